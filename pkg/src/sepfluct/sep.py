"""Continuous-time symmetric exclusion process in the stirring representation.

Every edge carries an exponential clock of rate ``c_ij``; when it rings the
occupancies at its two ends are exchanged.  Exchanging equal values is the
identity, so this is the exclusion process with the total event rate
``R = sum_{i<j} c_ij`` independent of the configuration.  Event times and
edges therefore come from a static alias table and one uniform pair per
event.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import numpy as np

from ._kernels import alias_lookup, build_alias
from .grid import Grid

DEFAULT_BLOCK = 4096


class SimulationError(RuntimeError):
    """An observer raised during :func:`run`; the message carries the time and event index."""


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Independent generator for replica ``replica``, reproducible from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(replica),)))


class Configuration:
    """Occupancy vector ``eta`` in {0, 1}^N with a cached particle count."""

    __slots__ = ("occupancy", "count")

    def __init__(self, occupancy):
        occ = np.asarray(occupancy)
        if occ.ndim != 1 or not np.all((occ == 0) | (occ == 1)):
            raise ValueError("occupancy must be a 0/1 vector")
        self.occupancy = occ.astype(np.uint8)
        self.count = int(self.occupancy.sum())

    @property
    def n(self) -> int:
        return self.occupancy.shape[0]

    def copy(self) -> "Configuration":
        return Configuration(self.occupancy.copy())

    def index(self) -> int:
        """State index with site ``i`` as bit ``i`` (used by the brute-force oracle)."""
        return int(np.dot(self.occupancy.astype(np.int64), 1 << np.arange(self.n, dtype=np.int64)))

    def __repr__(self):
        bits = "".join(map(str, self.occupancy[:32]))
        return f"Configuration({bits}{'...' if self.n > 32 else ''}, count={self.count})"


def init_bernoulli(n: int, rho: float, rng: np.random.Generator) -> Configuration:
    """Sample from the product Bernoulli(rho) measure."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"density must lie in (0, 1), got {rho}")
    return Configuration(rng.random(n) < rho)


class AliasTable:
    """Static edge table of a grid: endpoints, rates and the Vose alias arrays.

    Immutable and safe to share between replicas.
    """

    def __init__(self, grid: Grid):
        if grid.n_edges == 0:
            raise ValueError("grid has no edges; total event rate is zero")
        self.ei = np.ascontiguousarray(grid.edge_i, dtype=np.int64)
        self.ej = np.ascontiguousarray(grid.edge_j, dtype=np.int64)
        self.rates = np.ascontiguousarray(grid.weights, dtype=float)
        self.total_rate = float(np.sum(self.rates))
        if not self.total_rate > 0:
            raise ValueError("total event rate must be positive")
        self.prob, self.alias = build_alias(self.rates)
        for arr in (self.ei, self.ej, self.rates, self.prob, self.alias):
            arr.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return self.rates.shape[0]

    def marginal(self) -> np.ndarray:
        """Exact sampling law implied by the alias arrays (should equal rates / R)."""
        E = self.n_edges
        p = self.prob / E
        out = p.copy()
        np.add.at(out, self.alias, (1.0 - self.prob) / E)
        return out


class EventSampler:
    """Per-replica event source: an alias table plus a random stream.

    Events are drawn in blocks of ``block_size`` uniform pairs: the first
    uniform gives the holding time by inversion, ``-log(1 - u) / R``; the
    second selects the edge through the alias table.  Single-event
    (:meth:`next_event`) and block (:meth:`take_block`) consumption read the
    same buffer, so both simulation paths see identical event sequences.
    """

    def __init__(self, table: AliasTable, rng: np.random.Generator, block_size: int = DEFAULT_BLOCK):
        self.table = table
        self.rng = rng
        self.block_size = int(block_size)
        self._dts = np.empty(0)
        self._edges = np.empty(0, dtype=np.int64)
        self._pos = 0

    @property
    def total_rate(self) -> float:
        return self.table.total_rate

    def _refill(self):
        u = self.rng.random((self.block_size, 2))
        self._dts = -np.log1p(-u[:, 0]) / self.table.total_rate
        self._edges = alias_lookup(u[:, 1], self.table.prob, self.table.alias)
        self._pos = 0

    def next_event(self):
        if self._pos >= self._dts.shape[0]:
            self._refill()
        b = self._pos
        self._pos += 1
        return float(self._dts[b]), int(self._edges[b])

    def take_block(self):
        """Return every buffered event not yet consumed (refilling if empty)."""
        if self._pos >= self._dts.shape[0]:
            self._refill()
        dts, edges = self._dts[self._pos:], self._edges[self._pos:]
        self._pos = self._dts.shape[0]
        return dts, edges

    def sample_edges(self, n: int) -> np.ndarray:
        """Draw ``n`` edge indices only (for testing the sampler marginal)."""
        return alias_lookup(self.rng.random(n), self.table.prob, self.table.alias)


@dataclass
class SimClock:
    t: float = 0.0
    n_events: int = 0


@dataclass(frozen=True)
class Event:
    time: float
    dt: float
    edge: int
    i: int
    j: int
    swapped: bool


def step(cfg: Configuration, sampler: EventSampler, clock: SimClock) -> Event:
    """Apply one stirring event: advance the clock and exchange the edge's endpoints."""
    dt, e = sampler.next_event()
    i = int(sampler.table.ei[e])
    j = int(sampler.table.ej[e])
    occ = cfg.occupancy
    swapped = bool(occ[i] != occ[j])
    if swapped:
        occ[i], occ[j] = occ[j], occ[i]
    clock.t += dt
    clock.n_events += 1
    return Event(clock.t, dt, e, i, j, swapped)


class Observer:
    """Base class for :func:`run` callbacks; override what you need.

    ``on_hold(t0, t1, cfg)`` is called for every interval on which the
    configuration is constant (intervals are split at sample times);
    ``on_sample(t, cfg)`` at each requested sample time; ``on_event`` after
    every applied event.
    """

    def on_hold(self, t0: float, t1: float, cfg: Configuration) -> None:
        pass

    def on_sample(self, t: float, cfg: Configuration) -> None:
        pass

    def on_event(self, event: Event, cfg: Configuration) -> None:
        pass


def _notify(observers, method, clock, *args):
    for obs in observers:
        try:
            getattr(obs, method)(*args)
        except Exception as exc:
            raise SimulationError(
                f"observer {type(obs).__name__}.{method} failed at t={clock.t:.6g}, "
                f"event index {clock.n_events}: {exc}"
            ) from exc


def run(cfg: Configuration, sampler: EventSampler, horizon: float,
        observers: Sequence[Observer] = (), sample_times: Optional[Iterable[float]] = None,
        clock: Optional[SimClock] = None) -> Configuration:
    """Simulate up to ``horizon`` one event at a time, driving the observers.

    ``cfg`` is updated in place and returned.  The state reported at a
    sample time ``s`` excludes events at times ``>= s``.  The first drawn
    event beyond the horizon is discarded; the clock is left at ``horizon``.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    clock = clock if clock is not None else SimClock()
    times = sorted(float(s) for s in (sample_times if sample_times is not None else (horizon,)))
    if any(s < clock.t or s > horizon for s in times):
        raise ValueError("sample times must lie in [current time, horizon]")
    k = 0
    while True:
        dt, e = sampler.next_event()
        tn = clock.t + dt
        while k < len(times) and times[k] <= tn:
            _notify(observers, "on_hold", clock, clock.t, times[k], cfg)
            clock.t = times[k]
            _notify(observers, "on_sample", clock, clock.t, cfg)
            k += 1
        if tn > horizon:
            if clock.t < horizon:
                _notify(observers, "on_hold", clock, clock.t, horizon, cfg)
            clock.t = horizon
            return cfg
        _notify(observers, "on_hold", clock, clock.t, tn, cfg)
        i = int(sampler.table.ei[e])
        j = int(sampler.table.ej[e])
        occ = cfg.occupancy
        swapped = bool(occ[i] != occ[j])
        if swapped:
            occ[i], occ[j] = occ[j], occ[i]
        clock.t = tn
        clock.n_events += 1
        _notify(observers, "on_event", clock, Event(tn, dt, e, i, j, swapped), cfg)


# --------------------------------------------------------------------------
# binary event log: magic "SEPEVLOG", u32 version, then packed records
# (f64 time, u32 edge, u8 swapped), little-endian

EVENT_LOG_MAGIC = b"SEPEVLOG"
EVENT_DTYPE = np.dtype([("time", "<f8"), ("edge", "<u4"), ("swapped", "u1")])


class EventLogWriter(Observer):
    """Observer streaming every event to a binary log."""

    def __init__(self, target: Union[str, Path, BinaryIO]):
        self._own = not hasattr(target, "write")
        self.fh = open(target, "wb") if self._own else target
        self.fh.write(EVENT_LOG_MAGIC + struct.pack("<I", 1))

    def on_event(self, event: Event, cfg: Configuration) -> None:
        rec = np.array([(event.time, event.edge, event.swapped)], dtype=EVENT_DTYPE)
        self.fh.write(rec.tobytes())

    def close(self):
        if self._own:
            self.fh.close()
        else:
            self.fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_event_log(source: Union[str, Path, bytes]) -> np.ndarray:
    data = source if isinstance(source, (bytes, bytearray)) else Path(source).read_bytes()
    if data[:8] != EVENT_LOG_MAGIC:
        raise ValueError("not an event log")
    return np.frombuffer(data, dtype=EVENT_DTYPE, offset=12)
