"""Pre-build calibration of the auto-bandwidth prefactor and the Laplacian error thresholds.

The prefactor ``A`` for each manifold minimizes the mean uniform error
``E_f(N) = max_i |L f(p_i) - Delta f(p_i)|`` over the library eigenfunctions
with eigenvalue at most ``max_eigenvalue``, at one reference size and a few
calibration seeds.  Given ``A``, the threshold for each eigenfunction is the
mean error over a second, larger set of calibration seeds plus four standard
errors of a difference of two 20-seed means.  Calibration seeds are disjoint
from the seeds used by the test suite.

``scripts/calibrate.py`` runs both steps and writes ``calibration.json``,
which :mod:`sepfluct.grid` reads at import.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import build_grid, laplacian_error
from .manifold import ManifoldModel, eigenfunctions_up_to

REFERENCE_N = 2000
MAX_EIGENVALUE = 10.0
BANDWIDTH_SEEDS = tuple(range(1000, 1005))
THRESHOLD_SEEDS = tuple(range(1000, 1020))
#: Ensemble size the thresholds are meant to be compared against.
CHECK_SEEDS = 20


def bandwidth_for(m: ManifoldModel, a: float, n: int) -> float:
    return a * (math.log(n) / n) ** (1.0 / (m.dim + 4))


def error_table(m: ManifoldModel, a: float, n: int, seeds, max_eigenvalue: float = MAX_EIGENVALUE):
    """Array of shape ``(len(seeds), n_functions)`` of uniform Laplacian errors."""
    funcs = eigenfunctions_up_to(m, max_eigenvalue)
    eps = bandwidth_for(m, a, n)
    out = np.empty((len(seeds), len(funcs)))
    for s, seed in enumerate(seeds):
        g = build_grid(m, n, eps=eps, seed=seed)
        for q, f in enumerate(funcs):
            out[s, q] = laplacian_error(g, f)
    return out, [f.name for f in funcs]


def calibrate_bandwidth(m: ManifoldModel, candidates, n: int = REFERENCE_N, seeds=BANDWIDTH_SEEDS):
    """Return ``(best_a, {a: objective})`` minimizing the mean error."""
    scores = {}
    for a in candidates:
        table, _ = error_table(m, float(a), n, seeds)
        scores[float(a)] = float(table.mean())
    best = min(scores, key=scores.get)
    return best, scores


@dataclass
class Thresholds:
    names: list
    mean: np.ndarray
    std: np.ndarray
    threshold: np.ndarray


def calibrate_thresholds(m: ManifoldModel, a: float, n: int = REFERENCE_N, seeds=THRESHOLD_SEEDS):
    table, names = error_table(m, a, n, seeds)
    mean = table.mean(axis=0)
    std = table.std(axis=0, ddof=1)
    # four standard errors of (check mean - calibration mean)
    margin = 4.0 * std * math.sqrt(1.0 / len(seeds) + 1.0 / CHECK_SEEDS)
    return Thresholds(names, mean, std, mean + margin)
