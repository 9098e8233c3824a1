"""Replica ensembles: reproducible, thread-parallel simulation of many trajectories."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..fluctuation import FieldKernel, FieldObservable, FieldTrajectory, make_replica, simulate_fields
from ..grid import Grid
from ..sep import replica_rng

MAX_BLOCK = 4096


def auto_block_size(total_rate: float, horizon: float) -> int:
    """Events drawn per refill: the expected count plus slack, capped at ``MAX_BLOCK``.

    Depends only on the grid and the horizon, so every replica and every
    worker count consumes the random stream identically.
    """
    mean = total_rate * horizon
    return int(min(MAX_BLOCK, max(16, math.ceil(mean + 5.0 * math.sqrt(mean) + 16))))


@dataclass
class EnsembleData:
    """Per-replica samples with shape ``(replicas, observables, times)``.

    ``first_replica`` is the global index of row 0, so the data of a
    sub-range of replicas lines up with the full ensemble.
    """

    names: list
    times: np.ndarray
    Y: np.ndarray
    I: np.ndarray
    D: np.ndarray
    G: np.ndarray
    n_events: np.ndarray
    n_swaps: np.ndarray
    initial_count: np.ndarray
    final_count: np.ndarray
    final_states: Optional[np.ndarray] = None
    first_replica: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return self.Y.shape[0]

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def M(self) -> np.ndarray:
        return self.Y - self.Y[:, :, :1] - self.I

    @property
    def Nmart(self) -> np.ndarray:
        M = self.M
        return M * M - self.G

    def time_index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not a sample time")
        return k

    def trajectory(self, replica: int, name: str) -> FieldTrajectory:
        q = self.index(name)
        r = replica - self.first_replica
        return FieldTrajectory(name, self.times.copy(), self.Y[r, q].copy(), self.I[r, q].copy(),
                               self.G[r, q].copy(), self.D[r, q].copy())


def simulate_ensemble(grid: Grid, observables: Sequence[FieldObservable], sample_times, replicas: int,
                      master_seed: int, threads: int = 1, initial=None, keep_final: bool = False,
                      track_gamma: bool = True, block_size: Optional[int] = None,
                      first_replica: int = 0) -> EnsembleData:
    """Simulate replicas ``first_replica .. first_replica + replicas - 1``.

    Replica ``r`` uses the stream :func:`sepfluct.sep.replica_rng(master_seed, r)`
    (Bernoulli start drawn first, then events) and its results land in row
    ``r - first_replica``, so the output is bitwise identical for any
    ``threads``.  ``initial`` fixes a deterministic start instead.
    """
    if replicas < 1:
        raise ValueError("need at least one replica")
    kernel = FieldKernel(grid, observables, track_gamma=track_gamma)
    times = np.ascontiguousarray(sample_times, dtype=float)
    K = times.shape[0]
    Q = len(kernel.observables)
    if block_size is None:
        block_size = auto_block_size(kernel.table.total_rate, float(times[-1]))
    Y = np.zeros((replicas, Q, K))
    I = np.zeros((replicas, Q, K))
    D = np.zeros((replicas, Q, K))
    G = np.zeros((replicas, Q, K))
    n_events = np.zeros(replicas, dtype=np.int64)
    n_swaps = np.zeros(replicas, dtype=np.int64)
    c0 = np.zeros(replicas, dtype=np.int64)
    c1 = np.zeros(replicas, dtype=np.int64)
    finals = np.zeros((replicas, grid.n), dtype=np.uint8) if keep_final else None

    def work(rows):
        for row in rows:
            rng = replica_rng(master_seed, first_replica + row)
            cfg, sampler = make_replica(kernel, rng, block_size, initial)
            c0[row] = cfg.count
            res = simulate_fields(kernel, times, sampler, cfg)
            for q, tr in enumerate(res.trajectories):
                Y[row, q] = tr.Y
                I[row, q] = tr.I
                D[row, q] = tr.D if tr.D is not None else np.nan
                G[row, q] = tr.G
            n_events[row] = res.n_events
            n_swaps[row] = res.n_swaps
            c1[row] = int(res.final.occupancy.sum())
            if finals is not None:
                finals[row] = res.final.occupancy

    threads = max(1, int(threads))
    if threads == 1:
        work(range(replicas))
    else:
        chunks = np.array_split(np.arange(replicas), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(work, c) for c in chunks]:
                fut.result()
    return EnsembleData(
        names=[o.name for o in kernel.observables], times=times, Y=Y, I=I, D=D, G=G,
        n_events=n_events, n_swaps=n_swaps, initial_count=c0, final_count=c1, final_states=finals,
        first_replica=first_replica,
        meta={"master_seed": int(master_seed), "block_size": int(block_size),
              "total_rate": kernel.table.total_rate, "n": grid.n},
    )


def stationary_gamma_samples(grid: Grid, obs: FieldObservable, samples: int, rng: np.random.Generator,
                             chunk: int = 64) -> np.ndarray:
    """Carre du champ at ``samples`` independent draws from the product Bernoulli measure."""
    out = np.empty(samples)
    gw = obs.gamma_weights
    for a in range(0, samples, chunk):
        b = min(samples, a + chunk)
        eta = rng.random((b - a, grid.n)) < obs.rho
        disc = eta[:, grid.edge_i] != eta[:, grid.edge_j]
        out[a:b] = disc @ gw
    return out


def states_to_index(states: np.ndarray) -> np.ndarray:
    """Bit-pack rows of 0/1 occupancies, site ``i`` as bit ``i``."""
    n = states.shape[1]
    return states.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))
