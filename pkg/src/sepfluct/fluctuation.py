"""Density fluctuation fields and their Dynkin martingales along SEP trajectories.

For a test function ``f`` the field is
``Y_t(f) = N^{-1/2} sum_i f(p_i) (eta_t(p_i) - rho)``.  Along a trajectory we
accumulate, exactly (the configuration is piecewise constant between events):

* ``I_t = int_0^t Y_s(L f) ds`` with ``L`` the graph Laplacian,
* ``D_t = int_0^t Y_s(Delta f) ds`` with ``Delta`` the manifold Laplacian,
* ``G_t = int_0^t Gamma(eta_s) ds`` where
  ``Gamma = N^{-1} sum_{edges} c_ij (eta_j - eta_i)^2 (f_j - f_i)^2``.

Then ``M_t = Y_t - Y_0 - I_t`` and ``M_t^2 - G_t`` are martingales.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._kernels import advance
from .grid import Grid, laplacian_apply
from .manifold import TestFunction
from .sep import AliasTable, Configuration, EventSampler, Observer, init_bernoulli


@dataclass(frozen=True, eq=False)
class FieldObservable:
    """Per-grid precomputation for one test function.

    ``gamma_weights[e] = c_e (f_j - f_i)^2 / N`` so that
    ``Gamma(eta) = sum_e gamma_weights[e] * [eta_i != eta_j]``.
    Manifold-side quantities are ``None`` for observables built from a bare
    vector.
    """

    name: str
    rho: float
    f: np.ndarray
    Lf: np.ndarray
    gamma_weights: np.ndarray = field(repr=False)
    lap: Optional[np.ndarray] = None
    grad_sq: Optional[np.ndarray] = None
    norm_sq: Optional[float] = None
    grad_sq_integral: Optional[float] = None
    eigenvalue: Optional[float] = None

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @classmethod
    def build(cls, grid: Grid, f, rho: float, name: Optional[str] = None) -> "FieldObservable":
        if not 0.0 < rho < 1.0:
            raise ValueError(f"density must lie in (0, 1), got {rho}")
        vals = grid.values(f)
        Lf = laplacian_apply(grid, vals)
        gw = grid.weights * (vals[grid.edge_j] - vals[grid.edge_i]) ** 2 / grid.n
        if isinstance(f, TestFunction):
            return cls(
                name=name or f.name, rho=rho, f=vals, Lf=Lf, gamma_weights=gw,
                lap=f.laplacian(grid.points), grad_sq=f.grad_sq(grid.points),
                norm_sq=f.norm_sq, grad_sq_integral=f.grad_sq_integral, eigenvalue=f.eigenvalue,
            )
        return cls(name=name or "vector", rho=rho, f=vals, Lf=Lf, gamma_weights=gw)

    # exact finite-N reference values

    def variance_finite(self) -> float:
        """``Var Y(f)`` under the product Bernoulli measure."""
        return self.rho * (1 - self.rho) * float(np.mean(self.f**2))

    def variance_limit(self) -> Optional[float]:
        if self.norm_sq is None:
            return None
        return self.rho * (1 - self.rho) * self.norm_sq

    def gamma_mean_finite(self) -> float:
        """Stationary mean of the carre du champ, ``-(2 rho (1-rho) / N) sum f L f``."""
        return -2.0 * self.rho * (1 - self.rho) * float(np.mean(self.f * self.Lf))

    def gamma_mean_limit(self) -> Optional[float]:
        if self.grad_sq_integral is None:
            return None
        return 2.0 * self.rho * (1 - self.rho) * self.grad_sq_integral


def field_eval(cfg: Configuration, obs: FieldObservable) -> float:
    if cfg.n != obs.n:
        raise ValueError(f"configuration has {cfg.n} sites, observable {obs.n}")
    return float(np.dot(obs.f, cfg.occupancy - obs.rho) / math.sqrt(obs.n))


def field_of(cfg: Configuration, vals: np.ndarray, rho: float) -> float:
    """The field paired with an arbitrary vector of site values."""
    return float(np.dot(vals, cfg.occupancy - rho) / math.sqrt(vals.shape[0]))


def drift_increment(cfg: Configuration, obs: FieldObservable, dt: float) -> float:
    """``dt * Y(L f)`` for a holding interval of length ``dt``."""
    if dt == 0.0:
        return 0.0
    return dt * field_of(cfg, obs.Lf, obs.rho)


def gamma_eval(cfg: Configuration, obs: FieldObservable, grid: Grid) -> float:
    """Carre du champ at ``cfg``, one term per unordered edge."""
    eta = cfg.occupancy
    deta = eta[grid.edge_j] != eta[grid.edge_i]
    df = obs.f[grid.edge_j] - obs.f[grid.edge_i]
    return float(np.sum(grid.weights[deta] * df[deta] ** 2) / grid.n)


@dataclass
class FieldTrajectory:
    """Samples of ``Y``, ``I``, ``D`` and ``G`` for one observable along one path."""

    name: str
    times: np.ndarray
    Y: np.ndarray
    I: np.ndarray
    G: np.ndarray
    D: Optional[np.ndarray] = None

    @property
    def M(self) -> np.ndarray:
        return finalize_martingales(self)[0]

    @property
    def N(self) -> np.ndarray:
        return finalize_martingales(self)[1]

    @property
    def replacement(self) -> Optional[np.ndarray]:
        """``int_0^t Y_s(L f - Delta f) ds``."""
        return None if self.D is None else self.I - self.D


def finalize_martingales(traj: FieldTrajectory, obs: Optional[FieldObservable] = None):
    """Return ``(M, N)`` with ``M = Y - Y_0 - I`` and ``N = M^2 - G``."""
    M = traj.Y - traj.Y[0] - traj.I
    return M, M * M - traj.G


class FieldRecorder(Observer):
    """Reference (pure Python) accumulation of field integrals via :func:`sepfluct.sep.run`.

    Recomputes every integrand from scratch on every holding interval, so it
    is O(N + E) per event; use it for small grids and as an oracle for
    :func:`simulate_fields`.
    """

    def __init__(self, grid: Grid, observables: Sequence[FieldObservable]):
        self.grid = grid
        self.observables = list(observables)
        q = len(self.observables)
        self.I = np.zeros(q)
        self.D = np.zeros(q)
        self.G = np.zeros(q)
        self.samples = []

    def on_hold(self, t0, t1, cfg):
        dt = t1 - t0
        if dt <= 0:
            return
        for q, obs in enumerate(self.observables):
            self.I[q] += drift_increment(cfg, obs, dt)
            if obs.lap is not None:
                self.D[q] += dt * field_of(cfg, obs.lap, obs.rho)
            self.G[q] += dt * gamma_eval(cfg, obs, self.grid)

    def on_sample(self, t, cfg):
        ys = [field_eval(cfg, obs) for obs in self.observables]
        self.samples.append((t, ys, self.I.copy(), self.D.copy(), self.G.copy()))

    def trajectories(self):
        times = np.array([s[0] for s in self.samples])
        out = []
        for q, obs in enumerate(self.observables):
            out.append(FieldTrajectory(
                name=obs.name,
                times=times,
                Y=np.array([s[1][q] for s in self.samples]),
                I=np.array([s[2][q] for s in self.samples]),
                G=np.array([s[4][q] for s in self.samples]),
                D=np.array([s[3][q] for s in self.samples]) if obs.lap is not None else None,
            ))
        return out


class FieldKernel:
    """Shared, read-only arrays for the compiled trajectory kernel.

    Built once per ``(grid, observables)``; each observable contributes three
    field rows (``f``, ``L f``, ``Delta f``) and one carre du champ column.
    """

    def __init__(self, grid: Grid, observables: Sequence[FieldObservable], track_gamma: bool = True):
        self.grid = grid
        self.observables = list(observables)
        if not self.observables:
            raise ValueError("need at least one observable")
        rhos = {o.rho for o in self.observables}
        if len(rhos) != 1:
            raise ValueError("all observables must share one density")
        self.rho = rhos.pop()
        self.table = AliasTable(grid)
        rows = []
        for o in self.observables:
            rows += [o.f, o.Lf, o.lap if o.lap is not None else np.zeros(grid.n)]
        self.rows = np.ascontiguousarray(rows, dtype=float)
        self.track_gamma = track_gamma
        if track_gamma:
            self.indptr, self.nbr, self.eid = grid.neighbors
            self.gw = np.ascontiguousarray(np.column_stack([o.gamma_weights for o in self.observables]))
        else:
            self.indptr = np.zeros(grid.n + 1, dtype=np.int64)
            self.nbr = np.zeros(0, dtype=np.int64)
            self.eid = np.zeros(0, dtype=np.int64)
            self.gw = np.zeros((grid.n_edges, 0))

    def initial_gamma(self, cfg: Configuration) -> np.ndarray:
        if not self.track_gamma:
            return np.zeros(0)
        eta = cfg.occupancy
        disc = (eta[self.grid.edge_i] != eta[self.grid.edge_j]).astype(float)
        return disc @ self.gw


@dataclass
class SimulationResult:
    trajectories: list
    final: Configuration
    n_events: int
    n_swaps: int


def simulate_fields(kernel: FieldKernel, sample_times, sampler: EventSampler,
                    cfg: Configuration) -> SimulationResult:
    """Run one trajectory with the compiled kernel, recording at ``sample_times``.

    ``sample_times`` must start at 0 and end at the horizon.  ``cfg`` is
    advanced in place to the horizon.
    """
    times = np.ascontiguousarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) < 0):
        raise ValueError("sample times must be nondecreasing and start at 0")
    if sampler.table.n_edges != kernel.table.n_edges:
        raise ValueError("sampler does not belong to this grid")
    n = kernel.grid.n
    K = times.shape[0]
    R = kernel.rows.shape[0]
    Q = kernel.gw.shape[1]
    eta = cfg.occupancy
    y = kernel.rows @ (eta - kernel.rho) / math.sqrt(n)
    yint = np.zeros(R)
    gamma = kernel.initial_gamma(cfg)
    gint = np.zeros(Q)
    out_y = np.zeros((K, R))
    out_int = np.zeros((K, R))
    out_g = np.zeros((K, Q))
    clock_t = np.zeros(1)
    counters = np.zeros(3, dtype=np.int64)
    inv = 1.0 / math.sqrt(n)
    done = False
    while not done:
        dts, edges = sampler.take_block()
        done = advance(eta, kernel.table.ei, kernel.table.ej, dts, edges, clock_t, counters, times,
                       kernel.rows, inv, kernel.rho, y, yint,
                       kernel.indptr, kernel.nbr, kernel.eid, kernel.gw, gamma, gint,
                       out_y, out_int, out_g)
    trajs = []
    for q, obs in enumerate(kernel.observables):
        trajs.append(FieldTrajectory(
            name=obs.name,
            times=times.copy(),
            Y=out_y[:, 3 * q].copy(),
            I=out_int[:, 3 * q + 1].copy(),
            D=out_int[:, 3 * q + 2].copy() if obs.lap is not None else None,
            G=out_g[:, q].copy() if Q else np.full(K, np.nan),
        ))
    cfg.count = int(eta.sum())
    return SimulationResult(trajs, cfg, int(counters[1]), int(counters[2]))


def uniform_times(horizon: float, k: int = 50) -> np.ndarray:
    """``k + 1`` equally spaced sample times on ``[0, horizon]``."""
    return np.linspace(0.0, float(horizon), int(k) + 1)


def replay_integrals(grid: Grid, obs: FieldObservable, initial: Configuration, events, sample_times):
    """Recompute ``I`` and ``G`` at the sample times from an event log.

    ``events`` is a structured array as returned by
    :func:`sepfluct.sep.read_event_log`.
    """
    eta = initial.occupancy.copy()
    ei, ej = grid.edge_i, grid.edge_j
    t = 0.0
    I = G = 0.0
    out_I, out_G = [], []
    k = 0
    times = list(sample_times)
    cur = Configuration(eta)
    for ev in events:
        tn = float(ev["time"])
        while k < len(times) and times[k] <= tn:
            I += drift_increment(cur, obs, times[k] - t)
            G += (times[k] - t) * gamma_eval(cur, obs, grid)
            t = times[k]
            out_I.append(I)
            out_G.append(G)
            k += 1
        I += drift_increment(cur, obs, tn - t)
        G += (tn - t) * gamma_eval(cur, obs, grid)
        t = tn
        e = int(ev["edge"])
        a, b = int(ei[e]), int(ej[e])
        cur.occupancy[a], cur.occupancy[b] = cur.occupancy[b], cur.occupancy[a]
    while k < len(times):
        I += drift_increment(cur, obs, times[k] - t)
        G += (times[k] - t) * gamma_eval(cur, obs, grid)
        t = times[k]
        out_I.append(I)
        out_G.append(G)
        k += 1
    return np.array(out_I), np.array(out_G)


def write_trajectory_csv(path, replica_trajectories) -> None:
    """Write ``(replica, f_name, t, Y, M, N, I, G)`` rows.

    ``replica_trajectories`` is an iterable of ``(replica, [FieldTrajectory])``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "f_name", "t", "Y", "M", "N", "I", "G"])
        for rep, trajs in replica_trajectories:
            for tr in trajs:
                M, Nm = finalize_martingales(tr)
                for k in range(tr.times.shape[0]):
                    w.writerow([rep, tr.name, repr(float(tr.times[k])), repr(float(tr.Y[k])),
                                repr(float(M[k])), repr(float(Nm[k])), repr(float(tr.I[k])),
                                repr(float(tr.G[k]))])


def make_replica(kernel: FieldKernel, rng: np.random.Generator, block_size: int,
                 initial: Optional[np.ndarray] = None):
    """Initial configuration and event sampler for one replica (Bernoulli start by default)."""
    if initial is None:
        cfg = init_bernoulli(kernel.grid.n, kernel.rho, rng)
    else:
        cfg = Configuration(np.array(initial, dtype=np.uint8))
    return cfg, EventSampler(kernel.table, rng, block_size)
