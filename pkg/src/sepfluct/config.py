"""Experiment configuration: YAML grammar, defaults, validation and round-tripping.

Grammar (every key optional unless marked)::

    name: covariance-decay           # free-form label
    manifold:                        # required
      kind: circle | torus | sphere
      dim: 1 | 2                     # torus only, default 2
    grid:
      sizes: [500, 1000, 2000]       # required, strictly increasing, each >= 2
      eps: auto                      # "auto" or a positive number
      seed: 0                        # seed of the grid used for ensembles
      seeds: 20                      # grid seeds 0..seeds-1 for ladder averages
    rho: 0.5                         # in (0, 1)
    horizon: 1.0                     # T >= 0
    samples: 50                      # K: sample times are T * k / K, k = 0..K
    test_functions: [1]              # eigenfunction indices (int, or list for torus/sphere)
    replicas: 4000                   # R >= 1
    seed: 0                          # master seed of the replica streams
    threads: 1
    suites: [variance]               # see SUITES
    covariance: {lags: [0, 0.5, 1, 2], offsets: [0, 0.5]}
    tightness: {window: 0.25}
    brute_force: {n: 6, eps: 2.0, replicas: 100000, times: [0.1, 0.7], horizon: 1.0}
    output: results                  # output directory
    trajectories: false              # also write the trajectory CSV

Validation collects every violation, each tagged with its dotted field path.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

SUITES = (
    "variance",
    "covariance",
    "martingale",
    "laplacian-convergence",
    "brute-force",
    "replacement",
    "gamma-variance",
    "tightness",
    "gaussianity",
)

MANIFOLD_KINDS = ("circle", "torus", "sphere")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists ``(field path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


@dataclass
class BruteForceSettings:
    n: int = 6
    eps: float = 2.0
    replicas: int = 100_000
    times: list = field(default_factory=lambda: [0.1, 0.7])
    horizon: float = 1.0
    seed: int = 0


@dataclass
class ExperimentConfig:
    manifold: dict
    sizes: list
    name: str = "experiment"
    eps: Union[str, float] = "auto"
    grid_seed: int = 0
    grid_seeds: int = 20
    rho: float = 0.5
    horizon: float = 1.0
    samples: int = 50
    test_functions: list = field(default_factory=lambda: [1])
    replicas: int = 4000
    seed: int = 0
    threads: int = 1
    suites: list = field(default_factory=lambda: ["variance"])
    lags: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    offsets: list = field(default_factory=lambda: [0.0, 0.5])
    tightness_window: float = 0.25
    brute_force: BruteForceSettings = field(default_factory=BruteForceSettings)
    output: str = "results"
    trajectories: bool = False

    @property
    def manifold_tag(self) -> str:
        kind = self.manifold["kind"]
        return f"torus{self.manifold.get('dim', 2)}" if kind == "torus" else kind

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.samples + 1)

    def to_dict(self) -> dict:
        """Nested form matching the YAML grammar."""
        return {
            "name": self.name,
            "manifold": dict(self.manifold),
            "grid": {"sizes": list(self.sizes), "eps": self.eps, "seed": self.grid_seed,
                     "seeds": self.grid_seeds},
            "rho": self.rho,
            "horizon": self.horizon,
            "samples": self.samples,
            "test_functions": copy.deepcopy(self.test_functions),
            "replicas": self.replicas,
            "seed": self.seed,
            "threads": self.threads,
            "suites": list(self.suites),
            "covariance": {"lags": list(self.lags), "offsets": list(self.offsets)},
            "tightness": {"window": self.tightness_window},
            "brute_force": asdict(self.brute_force),
            "output": self.output,
            "trajectories": self.trajectories,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _index_ok(kind: str, dim: int, idx) -> bool:
    if kind == "circle":
        return _is_int(idx)
    if kind == "torus":
        if dim == 1 and _is_int(idx):
            return True
        return isinstance(idx, list) and len(idx) == dim and all(_is_int(k) for k in idx)
    return isinstance(idx, list) and len(idx) == 2 and all(_is_int(k) for k in idx) and abs(idx[1]) <= idx[0]


KNOWN_KEYS = {"name", "manifold", "grid", "rho", "horizon", "samples", "test_functions", "replicas",
              "seed", "threads", "suites", "covariance", "tightness", "brute_force", "output",
              "trajectories"}


def from_dict(data: dict) -> ExperimentConfig:
    """Validate a nested mapping and build the config, reporting every violation."""
    errors = []

    def err(path, msg):
        errors.append((path, msg))

    if not isinstance(data, dict):
        raise ConfigError([("<root>", "configuration must be a mapping")])
    for k in sorted(set(data) - KNOWN_KEYS):
        err(k, "unknown key")

    man = data.get("manifold")
    kind, dim = None, None
    if not isinstance(man, dict):
        err("manifold", "required mapping with a 'kind' entry")
        man = {}
    else:
        kind = man.get("kind")
        if kind not in MANIFOLD_KINDS:
            err("manifold.kind", f"must be one of {', '.join(MANIFOLD_KINDS)}")
            kind = None
        if kind == "torus":
            dim = man.get("dim", 2)
            if dim not in (1, 2) or not _is_int(dim):
                err("manifold.dim", "torus dimension must be 1 or 2")
                dim = None
        elif "dim" in man and kind is not None:
            want = 1 if kind == "circle" else 2
            if man["dim"] != want:
                err("manifold.dim", f"{kind} has dimension {want}")
        for k in sorted(set(man) - {"kind", "dim"}):
            err(f"manifold.{k}", "unknown key")

    grid = data.get("grid", {})
    if not isinstance(grid, dict):
        err("grid", "must be a mapping")
        grid = {}
    sizes = grid.get("sizes")
    if not isinstance(sizes, list) or not sizes or not all(_is_int(n) for n in sizes):
        err("grid.sizes", "required nonempty list of integers")
        sizes = []
    else:
        if any(n < 2 for n in sizes):
            err("grid.sizes", "every size must be at least 2")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            err("grid.sizes", "ladder must be strictly increasing")
    eps = grid.get("eps", "auto")
    if not (eps == "auto" or (_is_num(eps) and eps > 0)):
        err("grid.eps", "must be 'auto' or a positive number")
    gseed = grid.get("seed", 0)
    if not _is_int(gseed) or gseed < 0:
        err("grid.seed", "must be a nonnegative integer")
    gseeds = grid.get("seeds", 20)
    if not _is_int(gseeds) or gseeds < 1:
        err("grid.seeds", "must be a positive integer")
    for k in sorted(set(grid) - {"sizes", "eps", "seed", "seeds"}):
        err(f"grid.{k}", "unknown key")

    rho = data.get("rho", 0.5)
    if not _is_num(rho) or not 0.0 < rho < 1.0:
        err("rho", "must lie strictly between 0 and 1")
    horizon = data.get("horizon", 1.0)
    if not _is_num(horizon) or horizon < 0:
        err("horizon", "must be a nonnegative number")
    samples = data.get("samples", 50)
    if not _is_int(samples) or samples < 1:
        err("samples", "must be a positive integer")
    replicas = data.get("replicas", 4000)
    if not _is_int(replicas) or replicas < 1:
        err("replicas", "must be an integer >= 1")
    seed = data.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        err("seed", "must be a nonnegative integer")
    threads = data.get("threads", 1)
    if not _is_int(threads) or threads < 1:
        err("threads", "must be a positive integer")

    tfs = data.get("test_functions", [1])
    if not isinstance(tfs, list) or not tfs:
        err("test_functions", "must be a nonempty list of eigenfunction indices")
        tfs = []
    elif kind is not None and (kind != "torus" or dim is not None):
        for q, idx in enumerate(tfs):
            if not _index_ok(kind, dim, idx):
                err(f"test_functions[{q}]", f"invalid eigenfunction index {idx!r} for {kind}")

    suites = data.get("suites", ["variance"])
    if not isinstance(suites, list) or not suites:
        err("suites", "must be a nonempty list")
        suites = []
    else:
        for q, s in enumerate(suites):
            if s not in SUITES:
                err(f"suites[{q}]", f"unknown suite {s!r}; choose from {', '.join(SUITES)}")

    covariance_on = isinstance(suites, list) and "covariance" in suites
    tightness_on = isinstance(suites, list) and "tightness" in suites
    cov = data.get("covariance", {})
    lags = cov.get("lags", [0.0, 0.5, 1.0, 2.0]) if isinstance(cov, dict) else None
    offsets = cov.get("offsets", [0.0, 0.5]) if isinstance(cov, dict) else None
    if not isinstance(cov, dict):
        err("covariance", "must be a mapping")
    else:
        for key, vals in (("lags", lags), ("offsets", offsets)):
            if not isinstance(vals, list) or not all(_is_num(v) and v >= 0 for v in vals):
                err(f"covariance.{key}", "must be a list of nonnegative numbers")
            elif covariance_on and _is_num(horizon) and any(v > horizon + 1e-12 for v in vals):
                err(f"covariance.{key}", "entries must not exceed the horizon")
        if covariance_on and isinstance(lags, list) and isinstance(offsets, list) and _is_num(horizon) \
                and all(_is_num(v) for v in lags + offsets) and lags and offsets \
                and max(lags) + max(offsets) > horizon + 1e-12:
            err("covariance", "largest lag plus largest offset exceeds the horizon")
        for k in sorted(set(cov) - {"lags", "offsets"}):
            err(f"covariance.{k}", "unknown key")

    tight = data.get("tightness", {})
    window = tight.get("window", 0.25) if isinstance(tight, dict) else None
    if not _is_num(window) or window <= 0 or (tightness_on and _is_num(horizon) and window > horizon):
        err("tightness.window", "must be positive and at most the horizon")

    bf_raw = data.get("brute_force", {})
    bf = BruteForceSettings()
    if not isinstance(bf_raw, dict):
        err("brute_force", "must be a mapping")
    else:
        for k in sorted(set(bf_raw) - set(asdict(bf))):
            err(f"brute_force.{k}", "unknown key")
        bf = BruteForceSettings(**{k: v for k, v in bf_raw.items() if k in asdict(bf)})
        if not _is_int(bf.n) or not 2 <= bf.n <= 10:
            err("brute_force.n", "must be an integer in [2, 10]")
        if not _is_num(bf.eps) or bf.eps <= 0:
            err("brute_force.eps", "must be positive")
        if not _is_int(bf.replicas) or bf.replicas < 1:
            err("brute_force.replicas", "must be an integer >= 1")
        if not _is_num(bf.horizon) or bf.horizon < 0:
            err("brute_force.horizon", "must be a nonnegative number")
        if not isinstance(bf.times, list) or not all(_is_num(t) and t >= 0 for t in bf.times):
            err("brute_force.times", "must be a list of nonnegative numbers")
        elif _is_num(bf.horizon) and any(t > bf.horizon for t in bf.times):
            err("brute_force.times", "entries must not exceed brute_force.horizon")
        if not _is_int(bf.seed) or bf.seed < 0:
            err("brute_force.seed", "must be a nonnegative integer")

    output = data.get("output", "results")
    if not isinstance(output, str) or not output:
        err("output", "must be a nonempty path string")
    traj = data.get("trajectories", False)
    if not isinstance(traj, bool):
        err("trajectories", "must be true or false")
    name = data.get("name", "experiment")
    if not isinstance(name, str):
        err("name", "must be a string")

    if errors:
        raise ConfigError(errors)
    manifold = {"kind": kind}
    if kind == "torus":
        manifold["dim"] = dim
    return ExperimentConfig(
        name=name, manifold=manifold, sizes=list(sizes), eps=eps, grid_seed=gseed, grid_seeds=gseeds,
        rho=float(rho), horizon=float(horizon), samples=samples, test_functions=copy.deepcopy(tfs),
        replicas=replicas, seed=seed, threads=threads, suites=list(suites),
        lags=[float(v) for v in lags], offsets=[float(v) for v in offsets],
        tightness_window=float(window), brute_force=bf, output=output, trajectories=traj,
    )


def parse_config(source: Union[str, Path]) -> ExperimentConfig:
    """Parse a YAML file path or inline YAML text."""
    if isinstance(source, Path) or ("\n" not in str(source) and Path(str(source)).is_file()):
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("<root>", f"not valid YAML: {exc}")]) from exc
    return from_dict(data if data is not None else {})


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of ``cfg`` with top-level fields replaced, revalidated."""
    data = cfg.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        data[key] = value
    return from_dict(data)


def recipe_path(name: str) -> Optional[Path]:
    """Path of a bundled recipe, or ``None``."""
    p = Path(__file__).with_name("recipes") / f"{name}.yaml"
    return p if p.is_file() else None


def recipe_names() -> list:
    return sorted(p.stem for p in (Path(__file__).with_name("recipes")).glob("*.yaml"))
