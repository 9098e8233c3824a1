"""Run a configured experiment: build the ladder, simulate ensembles, evaluate check suites."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..calibration import MAX_EIGENVALUE
from ..config import ExperimentConfig
from ..manifold import eigenfunction, from_tag
from . import checks as ck
from .ensemble import simulate_ensemble
from .stats import EnsembleStats

logger = logging.getLogger(__name__)

DYNAMIC_SUITES = {"variance", "covariance", "martingale", "replacement", "tightness", "gaussianity"}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    stats: EnsembleStats
    rungs: list = field(default_factory=list)


def _index(idx):
    return tuple(idx) if isinstance(idx, list) else idx


def required_times(cfg: ExperimentConfig) -> np.ndarray:
    """Uniform sample times plus every time a suite reads (lags, offsets, windows, midpoint)."""
    T = cfg.horizon
    times = set(np.round(cfg.sample_times(), 12).tolist())
    if "covariance" in cfg.suites:
        for t in cfg.lags:
            for s in cfg.offsets:
                times.update({round(s, 12), round(t + s, 12)})
    if "tightness" in cfg.suites:
        times.update({0.0, round(cfg.tightness_window, 12), round(T - cfg.tightness_window, 12)})
    return np.array(sorted(times))


def run_ensemble(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """Simulate and evaluate every enabled suite; ``progress`` receives short status strings."""
    say = progress or (lambda msg: logger.info(msg))
    m = from_tag(cfg.manifold_tag)
    functions = [eigenfunction(m, _index(i)) for i in cfg.test_functions]
    stats = EnsembleStats()
    rungs = []
    suites = set(cfg.suites)
    seeds = range(cfg.grid_seeds)
    if suites & DYNAMIC_SUITES:
        times = required_times(cfg)
        track_gamma = bool(suites & {"martingale", "tightness"})
        for n in cfg.sizes:
            say(f"N={n}: building grid and observables")
            rung = ck.make_rung(m, n, functions, cfg.rho, cfg.eps, cfg.grid_seed,
                                spectral="covariance" in suites)
            say(f"N={n}: simulating {cfg.replicas} replicas to T={cfg.horizon}")
            rung.data = simulate_ensemble(rung.grid, rung.observables, times, cfg.replicas, cfg.seed,
                                          threads=cfg.threads, track_gamma=track_gamma)
            rungs.append(rung)
            if "variance" in suites:
                stats.extend(ck.variance_checks(rung))
            if "covariance" in suites:
                if rung.spectral is None:
                    say(f"N={n}: above the dense cap, covariance oracle skipped")
                else:
                    stats.extend(ck.covariance_checks(rung, cfg.lags, cfg.offsets,
                                                      limit_rel_tol=0.05 if n == cfg.sizes[-1] else None))
            if "martingale" in suites:
                stats.extend(ck.martingale_test(rung))
            if "replacement" in suites:
                stats.extend(ck.replacement_checks(rung))
            if "tightness" in suites:
                stats.extend(ck.tightness_checks(rung, cfg.tightness_window))
            if "gaussianity" in suites:
                stats.extend(ck.gaussianity_checks(rung))
        if "variance" in suites:
            stats.extend(ck.variance_limit_checks(rungs[-1]))
        if "covariance" in suites:
            stats.extend(ck.covariance_trend_checks([r for r in rungs if r.spectral is not None], cfg.lags))
        if "martingale" in suites and len(cfg.sizes) > 1:
            say("seed-averaged carre du champ ladder")
            stats.extend(ck.gamma_trend_checks(m, functions, cfg.sizes, cfg.rho, seeds, cfg.eps))
            stats.extend(ck.gamma_estimate_trend_checks(rungs))
        if "replacement" in suites:
            stats.extend(ck.replacement_trend_checks(rungs))
    if "gamma-variance" in suites:
        say("stationary carre du champ variance ladder")
        stats.extend(ck.gamma_variance_checks(m, functions, cfg.sizes, cfg.rho, seeds,
                                              master_seed=cfg.seed, eps=cfg.eps))
    if "laplacian-convergence" in suites:
        say("Laplacian consistency ladder")
        stats.extend(ck.laplacian_convergence_checks(m, cfg.sizes, seeds, MAX_EIGENVALUE, cfg.eps))
    if "brute-force" in suites:
        bf = cfg.brute_force
        say(f"brute force: N={bf.n}, {bf.replicas} replicas")
        stats.extend(ck.brute_force_checks(m, functions, cfg.rho, n=bf.n, eps=bf.eps, seed=cfg.grid_seed,
                                           replicas=bf.replicas, times=bf.times, horizon=bf.horizon,
                                           master_seed=bf.seed, threads=cfg.threads))
    return ExperimentResult(cfg, stats, rungs)
