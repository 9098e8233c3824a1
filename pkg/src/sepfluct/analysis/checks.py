"""Check suites: estimates from ensembles paired with exact finite-N or limit oracles.

Every suite returns a list of :class:`~sepfluct.analysis.stats.Check`.
Finite-N exact identities are the pass/fail ground truth; manifold-limit
values are compared at the largest grid size or as trends across the
grid-size ladder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..calibration import REFERENCE_N
from ..fluctuation import FieldObservable
from ..grid import (
    CALIBRATION, DENSE_CAP, Grid, SpectralLaplacian, build_grid, carre_du_champ_diagnostic,
    laplacian_apply, laplacian_error, spectral_decompose,
)
from ..manifold import ManifoldModel, TestFunction, eigenfunctions_up_to
from ..sep import Configuration
from .ensemble import (
    EnsembleData, simulate_ensemble, states_to_index, stationary_gamma_samples, total_variation,
)
from .oracles import (
    BruteForceModel, brute_force_expectation, covariance_oracle_finite, covariance_oracle_limit,
    gamma_variance_exact,
)
from .stats import Check, cov_se, gaussianity, mean_se, var_se

ANCHORS = {
    "variance": "stationary field variance rho(1-rho) int f^2",
    "covariance": "stationary covariance rho(1-rho) <f, exp(t Delta) g> of the limit field",
    "duality": "two-point correlations equal single random-walk transition probabilities",
    "martingale": "M and M^2 - int Gamma are martingales",
    "gamma-mean": "mean carre du champ tends to 2 rho(1-rho) int |grad f|^2",
    "gamma-variance": "variance of the carre du champ vanishes as N grows",
    "replacement": "drift with graph Laplacian is close to drift with manifold Laplacian",
    "tightness": "increment second moments bounded by a multiple of the window length",
    "laplacian": "graph Laplacian converges uniformly to the Laplace-Beltrami operator",
    "gaussianity": "fluctuation field is asymptotically Gaussian",
    "simulator": "simulated law matches the exact generator",
}


@dataclass
class LadderRung:
    """One grid size of an experiment: grid, test functions, observables and (optionally) data."""

    n: int
    grid: Grid
    functions: list
    observables: list
    rho: float
    spectral: Optional[SpectralLaplacian] = None
    data: Optional[EnsembleData] = None
    extra: dict = field(default_factory=dict)

    @property
    def manifold(self) -> ManifoldModel:
        return self.grid.manifold

    def observable(self, name: str) -> FieldObservable:
        return self.observables[[o.name for o in self.observables].index(name)]

    def function(self, name: str) -> TestFunction:
        return self.functions[[f.name for f in self.functions].index(name)]


def make_rung(m: ManifoldModel, n: int, functions: Sequence[TestFunction], rho: float, eps="auto",
              seed: int = 0, spectral: bool = False) -> LadderRung:
    g = build_grid(m, n, eps=eps, seed=seed)
    obs = [FieldObservable.build(g, f, rho) for f in functions]
    spec = spectral_decompose(g) if spectral and n <= DENSE_CAP else None
    return LadderRung(n, g, list(functions), obs, rho, spec)


def monotone(values, ses=None, allow_inversions: int = 0, strict: bool = False) -> bool:
    """Nonincreasing sequence check, tolerating ``allow_inversions`` rises each within one SE."""
    bad = 0
    for k in range(len(values) - 1):
        rise = values[k + 1] - values[k]
        if rise < 0 or (rise == 0 and not strict):
            continue
        if ses is not None and bad < allow_inversions and rise <= math.hypot(ses[k], ses[k + 1]):
            bad += 1
            continue
        return False
    return True


# --------------------------------------------------------------------------
# stationary variance and mean


def variance_checks(rung: LadderRung, times=None) -> list:
    d = rung.data
    times = [d.times[0], d.times[-1]] if times is None else times
    out = []
    for obs in rung.observables:
        q = d.index(obs.name)
        target = obs.variance_finite()
        for t in times:
            k = d.time_index(t)
            y = d.Y[:, q, k]
            est, se = var_se(y)
            out.append(Check("variance", "Var Y_t(f)", ANCHORS["variance"], est, target,
                             "exact finite-N", se, d.replicas, n=rung.n, f=obs.name, t=float(t)))
            m, mse = mean_se(y)
            out.append(Check("variance", "E Y_t(f)", ANCHORS["variance"], m, 0.0, "exact finite-N",
                             mse, d.replicas, n=rung.n, f=obs.name, t=float(t)))
    return out


def variance_limit_checks(rung: LadderRung, rel_tol: float = 0.02) -> list:
    out = []
    for obs in rung.observables:
        lim = obs.variance_limit()
        if lim is None:
            continue
        out.append(Check("variance", "finite-N variance vs limit", ANCHORS["variance"],
                         obs.variance_finite(), lim, "manifold limit", tolerance=rel_tol,
                         tolerance_kind="rel", n=rung.n, f=obs.name))
    return out


# --------------------------------------------------------------------------
# covariance


def covariance_checks(rung: LadderRung, lags, offsets, pairs=None, limit_rel_tol: Optional[float] = 0.05) -> list:
    """``Cov(Y_{t+s}(f), Y_s(g))`` against the duality oracle (and the limit at this N)."""
    d = rung.data
    out = []
    names = [o.name for o in rung.observables]
    pairs = [(a, b) for a in names for b in names] if pairs is None else pairs
    for fname, gname in pairs:
        f, g = rung.function(fname), rung.function(gname)
        qf, qg = d.index(fname), d.index(gname)
        fv, gv = rung.observable(fname).f, rung.observable(gname).f
        for t in lags:
            finite = covariance_oracle_finite(rung.spectral, fv, gv, t, rung.rho)
            limit = covariance_oracle_limit(rung.manifold, f, g, t, rung.rho) \
                if f.eigenvalue is not None and g.eigenvalue is not None else None
            for s in offsets:
                a = d.Y[:, qf, d.time_index(t + s)]
                b = d.Y[:, qg, d.time_index(s)]
                est, se = cov_se(a, b)
                out.append(Check("covariance", "Cov(Y_{t+s}(f), Y_s(g))", ANCHORS["covariance"], est, finite,
                                 "finite-N duality", se, d.replicas, n=rung.n, f=fname, g=gname, t=float(t),
                                 s=float(s), extra={"limit_oracle": limit}))
                if fname != gname and limit is not None and abs(limit) < 1e-12:
                    out.append(Check("covariance", "cross-covariance vs limit 0", ANCHORS["covariance"], est, 0.0,
                                     "manifold limit", se, d.replicas, n=rung.n, f=fname, g=gname,
                                     t=float(t), s=float(s)))
            if limit_rel_tol is not None and fname == gname and limit is not None:
                out.append(Check("covariance", "finite-N covariance vs limit", ANCHORS["covariance"], finite, limit,
                                 "manifold limit", tolerance=limit_rel_tol, tolerance_kind="rel", n=rung.n,
                                 f=fname, g=gname, t=float(t)))
    return out


def covariance_trend_checks(rungs: Sequence[LadderRung], lags) -> list:
    """``|finite-N oracle - limit|`` should shrink along the ladder (same-function pairs)."""
    out = []
    if len(rungs) < 2 or any(r.spectral is None for r in rungs):
        return out
    for f in rungs[0].functions:
        if f.eigenvalue is None:
            continue
        for t in lags:
            lim = covariance_oracle_limit(rungs[0].manifold, f, f, t, rungs[0].rho)
            gaps = [abs(covariance_oracle_finite(r.spectral, r.observable(f.name).f, r.observable(f.name).f, t,
                                                 r.rho) - lim) for r in rungs]
            ok = monotone(gaps) or t == 0 and max(gaps) < 1e-12
            out.append(Check("covariance", "|finite-N - limit| trend", ANCHORS["covariance"], gaps[-1], 0.0,
                             "trend", tolerance_kind="trend", passed=bool(ok), f=f.name, t=float(t),
                             extra={"sizes": [r.n for r in rungs], "gaps": gaps}))
    return out


# --------------------------------------------------------------------------
# martingales


def martingale_test(rung: LadderRung, times=None) -> list:
    """Finite-N martingale checks on one ensemble.

    (a) ``E[M_t] = 0``; (b) ``E[M_t^2 - G_t] = 0``; (c) ``E[G_T] / T``
    equals the exact stationary mean of the carre du champ; (d) increments
    ``M_T - M_s`` are uncorrelated with ``M_s`` for ``s = T / 2``.
    """
    d = rung.data
    T = float(d.times[-1])
    times = [d.times[len(d.times) // 2], T] if times is None else times
    M = d.M
    Nm = d.Nmart
    out = []
    for obs in rung.observables:
        q = d.index(obs.name)
        for t in times:
            k = d.time_index(t)
            est, se = mean_se(M[:, q, k])
            out.append(Check("martingale", "E M_t", ANCHORS["martingale"], est, 0.0, "exact finite-N", se,
                             d.replicas, n=rung.n, f=obs.name, t=float(t)))
            est, se = mean_se(Nm[:, q, k])
            out.append(Check("martingale", "E[M_t^2 - G_t]", ANCHORS["martingale"], est, 0.0, "exact finite-N",
                             se, d.replicas, n=rung.n, f=obs.name, t=float(t)))
        if T > 0:
            est, se = mean_se(d.G[:, q, -1] / T)
            out.append(Check("martingale", "E[G_T] / T", ANCHORS["gamma-mean"], est, obs.gamma_mean_finite(),
                             "exact finite-N", se, d.replicas, n=rung.n, f=obs.name, t=T,
                             extra={"limit_oracle": obs.gamma_mean_limit()}))
        ks = d.time_index(times[0])
        if times[0] < T:
            inc = M[:, q, -1] - M[:, q, ks]
            est, se = cov_se(inc, M[:, q, ks])
            out.append(Check("martingale", "Cov(M_t - M_s, M_s)", ANCHORS["martingale"], est, 0.0,
                             "exact finite-N", se, d.replicas, n=rung.n, f=obs.name, t=T, s=float(times[0])))
    return out


def gamma_mean_ladder(m: ManifoldModel, f: TestFunction, sizes, rho: float, seeds, eps="auto"):
    """Exact finite-N stationary mean of the carre du champ per size, averaged over grid seeds.

    Returns ``(means, standard errors)`` over the seeds.
    """
    means, ses = [], []
    for n in sizes:
        vals = []
        for seed in seeds:
            g = build_grid(m, n, eps=eps, seed=seed)
            v = g.values(f)
            vals.append(-2.0 * rho * (1 - rho) * float(np.mean(v * laplacian_apply(g, v))))
        mu, se = mean_se(vals)
        means.append(mu)
        ses.append(se if len(vals) > 1 else 0.0)
    return np.array(means), np.array(ses)


def gamma_trend_checks(m: ManifoldModel, functions, sizes, rho: float, seeds, eps="auto") -> list:
    """Seed-averaged finite-N carre du champ mean approaches the limit (one inversion within 1 SE)."""
    out = []
    for f in functions:
        if f.grad_sq_integral is None:
            continue
        lim = 2.0 * rho * (1 - rho) * f.grad_sq_integral
        means, ses = gamma_mean_ladder(m, f, sizes, rho, seeds, eps)
        gaps = np.abs(means - lim)
        ok = monotone(gaps, ses, allow_inversions=1)
        out.append(Check("martingale", "|finite-N Gamma mean - limit| trend", ANCHORS["gamma-mean"],
                         float(gaps[-1]), 0.0, "trend", tolerance_kind="trend", passed=bool(ok), f=f.name,
                         extra={"sizes": list(sizes), "means": means.tolist(), "ses": ses.tolist(),
                                "limit": lim, "seeds": len(list(seeds))}))
    return out


def gamma_estimate_trend_checks(rungs: Sequence[LadderRung]) -> list:
    """``|E[G_T]/T - limit|`` from the ensembles shrinks along the ladder (one inversion within 1 SE)."""
    out = []
    if len(rungs) < 2:
        return out
    for f in rungs[0].functions:
        if f.grad_sq_integral is None:
            continue
        lim = 2.0 * rungs[0].rho * (1 - rungs[0].rho) * f.grad_sq_integral
        gaps, ses = [], []
        for r in rungs:
            d = r.data
            q = d.index(f.name)
            est, se = mean_se(d.G[:, q, -1] / d.times[-1])
            gaps.append(abs(est - lim))
            ses.append(se)
        ok = monotone(gaps, ses, allow_inversions=1)
        out.append(Check("martingale", "|E[G_T]/T - limit| trend", ANCHORS["gamma-mean"], gaps[-1], 0.0, "trend",
                         tolerance_kind="trend", passed=bool(ok), f=f.name,
                         extra={"sizes": [r.n for r in rungs], "gaps": gaps, "ses": ses}))
    return out


# --------------------------------------------------------------------------
# replacement and tightness bounds


def replacement_checks(rung: LadderRung) -> list:
    """``E[(int_0^T Y_s(L f - Delta f) ds)^2] <= T^2 rho (1 - rho) E_f(N)^2``."""
    d = rung.data
    T = float(d.times[-1])
    out = []
    for obs, f in zip(rung.observables, rung.functions):
        q = d.index(obs.name)
        x = (d.I[:, q, -1] - d.D[:, q, -1]) ** 2
        est, se = mean_se(x)
        ef = laplacian_error(rung.grid, f)
        bound = T * T * rung.rho * (1 - rung.rho) * ef * ef
        out.append(Check("replacement", "E[(int Y(L f - Delta f))^2]", ANCHORS["replacement"], est, bound, "bound",
                         se, d.replicas, tolerance_kind="upper", n=rung.n, f=obs.name, t=T,
                         extra={"laplacian_error": ef}))
    return out


def replacement_trend_checks(rungs: Sequence[LadderRung]) -> list:
    out = []
    if len(rungs) < 2:
        return out
    for f in rungs[0].functions:
        vals, ses = [], []
        for r in rungs:
            d = r.data
            q = d.index(f.name)
            est, se = mean_se((d.I[:, q, -1] - d.D[:, q, -1]) ** 2)
            vals.append(est)
            ses.append(se)
        ok = monotone(vals, strict=True)
        out.append(Check("replacement", "replacement error trend", ANCHORS["replacement"], vals[-1], 0.0, "trend",
                         tolerance_kind="trend", passed=bool(ok), f=f.name,
                         extra={"sizes": [r.n for r in rungs], "estimates": vals, "ses": ses}))
    return out


def tightness_checks(rung: LadderRung, window: float) -> list:
    """Second moments of drift and martingale increments over windows of length ``window``.

    ``E[(int_tau^{tau+theta} Y(L f))^2] <= theta T rho (1-rho) (1/N) sum (L f)^2`` and
    ``E[(M_{tau+theta} - M_tau)^2] = theta (-2 rho (1-rho) / N) sum f L f``
    ``<= -theta (1/N) sum f L f``.
    """
    d = rung.data
    T = float(d.times[-1])
    M = d.M
    out = []
    for tau in sorted({0.0, T - window}):
        k0, k1 = d.time_index(tau), d.time_index(tau + window)
        for obs in rung.observables:
            q = d.index(obs.name)
            c = float(np.mean(obs.Lf ** 2))
            drift = (d.I[:, q, k1] - d.I[:, q, k0]) ** 2
            est, se = mean_se(drift)
            out.append(Check("tightness", "E[(drift increment)^2]", ANCHORS["tightness"], est,
                             window * T * rung.rho * (1 - rung.rho) * c, "bound", se, d.replicas,
                             tolerance_kind="upper", n=rung.n, f=obs.name, t=tau + window, s=tau))
            inc = (M[:, q, k1] - M[:, q, k0]) ** 2
            est, se = mean_se(inc)
            exact = window * obs.gamma_mean_finite()
            out.append(Check("tightness", "E[(martingale increment)^2]", ANCHORS["tightness"], est, exact,
                             "exact finite-N", se, d.replicas, n=rung.n, f=obs.name, t=tau + window, s=tau))
            bound = -window * float(np.mean(obs.f * obs.Lf))
            out.append(Check("tightness", "E[(martingale increment)^2] bound", ANCHORS["tightness"], est, bound,
                             "bound", se, d.replicas, tolerance_kind="upper", n=rung.n, f=obs.name,
                             t=tau + window, s=tau))
    return out


# --------------------------------------------------------------------------
# Gaussianity


def gaussianity_checks(rung: LadderRung, t: Optional[float] = None) -> list:
    d = rung.data
    k = len(d.times) - 1 if t is None else d.time_index(t)
    out = []
    for obs in rung.observables:
        y = d.Y[:, d.index(obs.name), k]
        z = (y - y.mean()) / y.std(ddof=1)
        res = gaussianity(z)
        out.append(Check("gaussianity", "skewness and excess kurtosis of standardized Y_t(f)",
                         ANCHORS["gaussianity"], res["skewness"], 0.0, "bounds", tolerance_kind="bool",
                         passed=bool(res["passed"]), replicas=d.replicas, n=rung.n, f=obs.name,
                         t=float(d.times[k]), extra=res))
    return out


# --------------------------------------------------------------------------
# carre du champ variance under the stationary measure


def gamma_variance_checks(m: ManifoldModel, functions, sizes, rho: float, seeds, samples: int = 1000,
                          master_seed: int = 0, eps="auto") -> list:
    """Sample variance of the carre du champ under the product measure, averaged over grid seeds.

    Each size gets an exact-variance comparison (4 SE over seeds) and the
    averaged sample variance must strictly decrease along the ladder.
    """
    out = []
    seeds = list(seeds)
    per_f = {f.name: [] for f in functions}
    for n in sizes:
        sample_vars = {f.name: [] for f in functions}
        exact_vars = {f.name: [] for f in functions}
        for seed in seeds:
            g = build_grid(m, n, eps=eps, seed=seed)
            rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(n, seed)))
            for f in functions:
                obs = FieldObservable.build(g, f, rho)
                gam = stationary_gamma_samples(g, obs, samples, rng)
                sample_vars[f.name].append(float(np.var(gam, ddof=1)))
                exact_vars[f.name].append(gamma_variance_exact(g, obs.f, rho))
        for f in functions:
            sv = np.array(sample_vars[f.name])
            ev = np.array(exact_vars[f.name])
            est = float(sv.mean())
            _, se = mean_se(sv - ev)
            per_f[f.name].append(est)
            out.append(Check("gamma-variance", "seed-averaged sample Var Gamma", ANCHORS["gamma-variance"], est,
                             float(ev.mean()), "exact finite-N", se, samples, n=n, f=f.name,
                             extra={"seeds": len(seeds)}))
    for f in functions:
        vals = per_f[f.name]
        out.append(Check("gamma-variance", "Var Gamma trend", ANCHORS["gamma-variance"], vals[-1], 0.0, "trend",
                         tolerance_kind="trend", passed=bool(monotone(vals, strict=True)) and len(vals) > 1,
                         f=f.name, extra={"sizes": list(sizes), "values": vals}))
    return out


# --------------------------------------------------------------------------
# Laplacian consistency


def laplacian_convergence_checks(m: ManifoldModel, sizes, seeds, max_eigenvalue: float = 10.0,
                                 eps="auto") -> list:
    """Seed-averaged uniform Laplacian error per eigenfunction along the ladder.

    Also checks the carre du champ gap shrinks from the smallest to the
    largest size, and compares against the calibrated threshold at the
    reference size when it is part of the ladder.
    """
    funcs = eigenfunctions_up_to(m, max_eigenvalue)
    seeds = list(seeds)
    err = np.zeros((len(sizes), len(seeds), len(funcs)))
    gap = np.zeros((len(sizes), len(seeds), len(funcs)))
    for a, n in enumerate(sizes):
        for b, seed in enumerate(seeds):
            g = build_grid(m, n, eps=eps, seed=seed)
            for c, f in enumerate(funcs):
                err[a, b, c] = laplacian_error(g, f)
                gap[a, b, c] = carre_du_champ_diagnostic(g, f)[2]
    mean = err.mean(axis=1)
    se = err.std(axis=1, ddof=1) / math.sqrt(len(seeds)) if len(seeds) > 1 else np.zeros_like(mean)
    thresholds = CALIBRATION.get("thresholds", {}).get(m.tag, {})
    out = []
    for c, f in enumerate(funcs):
        out.append(Check("laplacian-convergence", "seed-averaged E_f(N) trend", ANCHORS["laplacian"],
                         float(mean[-1, c]), 0.0, "trend", tolerance_kind="trend",
                         passed=bool(monotone(mean[:, c])), f=f.name,
                         extra={"sizes": list(sizes), "means": mean[:, c].tolist(), "ses": se[:, c].tolist(),
                                "seeds": len(seeds)}))
        if len(sizes) > 1:
            g0, g1 = gap[0, :, c].mean(), gap[-1, :, c].mean()
            out.append(Check("laplacian-convergence", "seed-averaged carre du champ gap shrinks",
                             ANCHORS["laplacian"], float(g1), float(g0), "trend", tolerance_kind="bool",
                             passed=bool(g1 < g0), f=f.name, extra={"sizes": [sizes[0], sizes[-1]]}))
        if REFERENCE_N in sizes and eps == "auto" and f.name in thresholds:
            a = list(sizes).index(REFERENCE_N)
            out.append(Check("laplacian-convergence", "E_f at the reference size below calibrated threshold",
                             ANCHORS["laplacian"], float(mean[a, c]), thresholds[f.name]["threshold"],
                             "calibration", tolerance_kind="bool",
                             passed=bool(mean[a, c] < thresholds[f.name]["threshold"]), n=REFERENCE_N, f=f.name))
    return out


# --------------------------------------------------------------------------
# brute force


BRUTE_TIMES = (0.0, 0.1, 1.0, 10.0)


def half_filled(n: int) -> Configuration:
    """Deterministic start with the first ``ceil(n/2)`` sites occupied."""
    occ = np.zeros(n, dtype=np.uint8)
    occ[: (n + 1) // 2] = 1
    return Configuration(occ)


def brute_force_checks(m: ManifoldModel, functions, rho: float, n: int = 6, eps: float = 2.0, seed: int = 0,
                       replicas: int = 100_000, times=(0.1, 0.7), horizon: float = 1.0, master_seed: int = 0,
                       threads: int = 1) -> list:
    """Exact small-grid comparisons: oracle equivalence, Monte Carlo vs CTMC, conservation."""
    g = build_grid(m, n, eps=eps, seed=seed)
    model = BruteForceModel(g, rho)
    spec = spectral_decompose(g)
    obs = [FieldObservable.build(g, f, rho) for f in functions]
    out = []
    # exact identities
    for a in obs:
        for b in obs:
            for t in sorted(set(BRUTE_TIMES) | set(times)):
                bf = brute_force_expectation(model, "y-covariance", t, f=a.f, g=b.f)
                du = covariance_oracle_finite(spec, a.f, b.f, t, rho)
                out.append(Check("brute-force", "duality oracle vs CTMC", ANCHORS["duality"], du, bf, "brute force",
                                 tolerance=1e-8, tolerance_kind="abs", n=n, f=a.name, g=b.name, t=float(t)))
    for t in times:
        for a in obs:
            m2 = brute_force_expectation(model, "second-moment-M", t, f=a.f)
            gm = brute_force_expectation(model, "mean-G", t, f=a.f)
            out.append(Check("brute-force", "CTMC E[M_t^2] vs E[G_t]", ANCHORS["martingale"], m2, gm, "brute force",
                             tolerance=1e-8, tolerance_kind="abs", n=n, f=a.name, t=float(t)))

    # Monte Carlo against the exact values, stationary start
    sample_times = np.array(sorted({0.0, *times, horizon}))
    d = simulate_ensemble(g, obs, sample_times, replicas, master_seed, threads=threads, keep_final=True)
    M = d.M
    for t in times:
        k = d.time_index(t)
        for a in obs:
            qa = d.index(a.name)
            for b in obs:
                est, se = cov_se(d.Y[:, qa, k], d.Y[:, d.index(b.name), 0])
                out.append(Check("brute-force", "MC Cov(Y_t(f), Y_0(g)) vs duality", ANCHORS["duality"], est,
                                 covariance_oracle_finite(spec, a.f, b.f, t, rho), "finite-N duality", se,
                                 d.replicas, n=n, f=a.name, g=b.name, t=float(t)))
            m2 = brute_force_expectation(model, "second-moment-M", t, f=a.f)
            est, se = mean_se(M[:, qa, k] ** 2)
            out.append(Check("brute-force", "MC E[M_t^2] vs CTMC", ANCHORS["martingale"], est, m2, "brute force", se,
                             d.replicas, n=n, f=a.name, t=float(t)))
            out.append(Check("brute-force", "MC E[M_t^2] vs CTMC (absolute)", ANCHORS["martingale"], est, m2,
                             "brute force", se, d.replicas, tolerance=1e-2, tolerance_kind="abs", n=n, f=a.name,
                             t=float(t)))
            est, se = mean_se(d.G[:, qa, k])
            out.append(Check("brute-force", "MC E[G_t] vs CTMC", ANCHORS["martingale"], est,
                             brute_force_expectation(model, "mean-G", t, f=a.f), "brute force", se, d.replicas,
                             n=n, f=a.name, t=float(t)))
    out += _marginal_checks(model, d, horizon, "stationary start")

    # deterministic start: the law at the horizon is far from stationary
    start = half_filled(n)
    d2 = simulate_ensemble(g, obs, sample_times, replicas, master_seed + 1, threads=threads, keep_final=True,
                           initial=start.occupancy)
    out += _marginal_checks(model, d2, horizon, "half-filled start", start)
    for a in obs:
        qa = d2.index(a.name)
        k = len(d2.times) - 1
        est, se = mean_se(d2.M[:, qa, k])
        out.append(Check("brute-force", "MC E[M_T] vs CTMC, half-filled start", ANCHORS["martingale"], est,
                         brute_force_expectation(model, "mean-M", horizon, f=a.f, initial=start), "brute force", se,
                         d2.replicas, n=n, f=a.name, t=horizon))
        est, se = mean_se(d2.M[:, qa, k] ** 2)
        out.append(Check("brute-force", "MC E[M_T^2] vs CTMC, half-filled start", ANCHORS["martingale"], est,
                         brute_force_expectation(model, "second-moment-M", horizon, f=a.f, initial=start),
                         "brute force", se, d2.replicas, n=n, f=a.name, t=horizon))
    return out


def _marginal_checks(model: BruteForceModel, d: EnsembleData, horizon: float, label: str, initial=None) -> list:
    exact = model.marginal(horizon, initial)
    idx = states_to_index(d.final_states)
    emp = np.bincount(idx, minlength=model.n_states) / d.replicas
    tv = total_variation(emp, exact)
    conserved = bool(np.all(d.initial_count == d.final_count))
    return [
        Check("brute-force", f"TV(empirical law of eta_T, CTMC law), {label}", ANCHORS["simulator"], tv, 0.0,
              "brute force", replicas=d.replicas, tolerance=0.02, tolerance_kind="abs", n=model.n, t=horizon),
        Check("brute-force", f"particle count conserved on every trajectory, {label}", ANCHORS["simulator"],
              float(np.max(np.abs(d.initial_count - d.final_count))), 0.0, "exact", replicas=d.replicas,
              tolerance_kind="bool", passed=conserved, n=model.n, t=horizon),
    ]
