"""Exact reference values: spectral duality, manifold limit and brute-force CTMC oracles."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from ..grid import Grid, SpectralLaplacian, laplacian_apply, semigroup_apply
from ..manifold import ManifoldModel, TestFunction, integrate
from ..sep import Configuration

#: Largest grid the brute-force generator is built for (2^N states).
MAX_BRUTE_N = 10


class OracleError(ValueError):
    pass


def _vector(f, grid: Optional[Grid], n: int) -> np.ndarray:
    if isinstance(f, TestFunction):
        if grid is None:
            raise OracleError("a grid is needed to evaluate a test function")
        return grid.values(f)
    v = np.asarray(f, dtype=float)
    if v.shape != (n,):
        raise OracleError(f"expected a vector of length {n}, got shape {v.shape}")
    return v


def covariance_oracle_finite(spectral: Optional[SpectralLaplacian], f, g, t: float, rho: float,
                             grid: Optional[Grid] = None) -> float:
    """Exact ``E[Y_t(f) Y_0(g)]`` under the stationary product measure.

    By duality with a single random walk this equals
    ``rho (1 - rho) / N * sum_i f(p_i) (exp(t L) g)(p_i)``.
    """
    if spectral is None:
        raise OracleError("no spectral decomposition available; use the brute-force oracle for small grids")
    n = spectral.n
    fv = _vector(f, grid, n)
    gv = _vector(g, grid, n)
    return rho * (1.0 - rho) * float(np.dot(fv, semigroup_apply(spectral, gv, t))) / n


def covariance_oracle_limit(m: ManifoldModel, f: TestFunction, g: TestFunction, t: float, rho: float,
                            resolution: int = 512) -> float:
    """``rho (1 - rho) exp(-lambda_f t) int f g`` for eigenfunctions ``f``, ``g``."""
    if not isinstance(f, TestFunction) or not isinstance(g, TestFunction) \
            or f.eigenvalue is None or g.eigenvalue is None:
        raise OracleError("limit covariance needs eigenfunctions; use the finite-N oracle instead")
    if t < 0:
        raise OracleError(f"time must be nonnegative, got {t}")
    if f.name == g.name:
        overlap = f.norm_sq
    else:
        overlap = integrate(m, lambda p: f(p) * g(p), resolution=resolution)
    return rho * (1.0 - rho) * math.exp(-f.eigenvalue * t) * overlap


def gamma_variance_exact(grid: Grid, fvals, rho: float) -> float:
    """Variance of the carre du champ under the product Bernoulli measure.

    Edge indicators ``[eta_i != eta_j]`` have variance ``p (1 - p)`` with
    ``p = 2 rho (1 - rho)``; two edges sharing one vertex have covariance
    ``rho (1 - rho) (1 - 4 rho (1 - rho))``; disjoint edges are independent.
    """
    f = np.asarray(fvals, dtype=float)
    w = grid.weights * (f[grid.edge_j] - f[grid.edge_i]) ** 2 / grid.n
    p = 2.0 * rho * (1.0 - rho)
    cov = rho * (1.0 - rho) * (1.0 - 4.0 * rho * (1.0 - rho))
    s = np.bincount(grid.edge_i, w, grid.n) + np.bincount(grid.edge_j, w, grid.n)
    q = np.bincount(grid.edge_i, w * w, grid.n) + np.bincount(grid.edge_j, w * w, grid.n)
    return float(p * (1.0 - p) * np.sum(w * w) + cov * np.sum(s * s - q))


# --------------------------------------------------------------------------
# brute force


class BruteForceModel:
    """Full generator of the exclusion process on ``{0, 1}^N`` for ``N <= 10``.

    State ``x`` has site ``i`` occupied iff bit ``i`` of ``x`` is set.  The
    generator acts on functions: ``(Q h)(x) = sum_e c_e (h(x^e) - h(x))``
    where ``x^e`` exchanges the two endpoint values of edge ``e``.
    """

    def __init__(self, grid: Grid, rho: float):
        if grid.n > MAX_BRUTE_N:
            raise OracleError(f"brute force limited to N <= {MAX_BRUTE_N}, got {grid.n}")
        if not 0.0 < rho < 1.0:
            raise OracleError(f"density must lie in (0, 1), got {rho}")
        self.grid = grid
        self.rho = float(rho)
        n = grid.n
        S = 1 << n
        states = np.arange(S)
        self.bits = ((states[:, None] >> np.arange(n)) & 1).astype(np.uint8)
        rows, cols, vals = [], [], []
        for i, j, c in zip(grid.edge_i, grid.edge_j, grid.weights):
            differ = self.bits[:, i] != self.bits[:, j]
            src = states[differ]
            rows.append(src)
            cols.append(src ^ ((1 << int(i)) | (1 << int(j))))
            vals.append(np.full(src.shape[0], c))
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        off = sp.csr_matrix((vals, (rows, cols)), shape=(S, S))
        self.generator = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
        k = self.bits.sum(axis=1)
        self.stationary = self.rho ** k * (1.0 - self.rho) ** (n - k)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def n_states(self) -> int:
        return self.bits.shape[0]

    # -- observables on the state space

    def field(self, fvals) -> np.ndarray:
        """``Y(f)`` as a function of the state."""
        f = np.asarray(fvals, dtype=float)
        return (self.bits - self.rho) @ f / math.sqrt(self.n)

    def gamma(self, fvals) -> np.ndarray:
        """Carre du champ as a function of the state."""
        f = np.asarray(fvals, dtype=float)
        g = self.grid
        disc = self.bits[:, g.edge_i] != self.bits[:, g.edge_j]
        return disc @ (g.weights * (f[g.edge_j] - f[g.edge_i]) ** 2) / self.n

    def initial_law(self, initial=None) -> np.ndarray:
        """Distribution vector for ``None`` (stationary), a configuration or a vector."""
        if initial is None:
            return self.stationary.copy()
        if isinstance(initial, Configuration):
            mu = np.zeros(self.n_states)
            mu[initial.index()] = 1.0
            return mu
        mu = np.asarray(initial, dtype=float)
        if mu.shape != (self.n_states,):
            raise OracleError("initial law has the wrong length")
        return mu

    # -- semigroup actions

    def evolve(self, h, t: float) -> np.ndarray:
        """``(exp(t Q) h)(x) = E_x[h(eta_t)]``."""
        if t < 0:
            raise OracleError(f"time must be nonnegative, got {t}")
        if t == 0:
            return np.array(h, dtype=float)
        return expm_multiply(t * self.generator, np.asarray(h, dtype=float))

    def marginal(self, t: float, initial=None) -> np.ndarray:
        """Law of ``eta_t``."""
        mu = self.initial_law(initial)
        if t == 0:
            return mu
        return expm_multiply(t * self.generator.T.tocsr(), mu)

    def time_integral(self, u, t: float) -> np.ndarray:
        """``E_x[int_0^t u(eta_s) ds]`` from a block exponential."""
        S = self.n_states
        B = sp.bmat([[self.generator, sp.csr_matrix(np.asarray(u, float)[:, None])],
                     [None, sp.csr_matrix((1, 1))]]).tocsr()
        e = np.zeros(S + 1)
        e[-1] = 1.0
        return expm_multiply(t * B, e)[:S]

    def integral_times_final(self, u, h, t: float) -> np.ndarray:
        """``E_x[int_0^t u(eta_s) ds * h(eta_t)]``."""
        S = self.n_states
        B = sp.bmat([[self.generator, sp.diags(np.asarray(u, float))],
                     [None, self.generator]]).tocsr()
        v = np.concatenate([np.zeros(S), np.asarray(h, float)])
        return expm_multiply(t * B, v)[:S]

    def integral_squared(self, u, t: float) -> np.ndarray:
        """``E_x[(int_0^t u(eta_s) ds)^2]`` from a three-block exponential."""
        S = self.n_states
        u = np.asarray(u, float)
        B = sp.bmat([[self.generator, sp.diags(u), None],
                     [None, self.generator, sp.csr_matrix(u[:, None])],
                     [None, None, sp.csr_matrix((1, 1))]]).tocsr()
        e = np.zeros(2 * S + 1)
        e[-1] = 1.0
        return 2.0 * expm_multiply(t * B, e)[:S]


OBSERVABLES = ("two-point", "y-covariance", "mean-M", "second-moment-M", "mean-G")


def brute_force_expectation(model: BruteForceModel, observable: str, t: float, rho: Optional[float] = None, *,
                            f=None, g=None, i: Optional[int] = None, j: Optional[int] = None,
                            initial=None) -> float:
    """Exact expectation of a path observable by matrix-exponential actions.

    ``observable`` is one of

    * ``"two-point"``: ``E[(eta_t(i) - rho)(eta_0(j) - rho)]``;
    * ``"y-covariance"``: ``E[Y_t(f) Y_0(g)]``;
    * ``"mean-M"``, ``"second-moment-M"``: ``E[M_t]``, ``E[M_t^2]`` for the
      Dynkin martingale of ``f``;
    * ``"mean-G"``: ``E[int_0^t Gamma(eta_s) ds]``.

    The start is the stationary product measure unless ``initial`` is given.
    """
    if rho is not None and abs(rho - model.rho) > 0:
        raise OracleError(f"model was built for density {model.rho}, not {rho}")
    if t < 0:
        raise OracleError(f"time must be nonnegative, got {t}")
    if observable not in OBSERVABLES:
        raise OracleError(f"unknown observable {observable!r}; choose from {OBSERVABLES}")
    mu = model.initial_law(initial)
    r = model.rho
    if observable == "two-point":
        if i is None or j is None:
            raise OracleError("two-point correlation needs sites i and j")
        hi = model.bits[:, i] - r
        hj = model.bits[:, j] - r
        return float(np.dot(mu * hj, model.evolve(hi, t)))
    if f is None:
        raise OracleError(f"{observable} needs a test vector f")
    f = np.asarray(f, dtype=float)
    yf = model.field(f)
    if observable == "y-covariance":
        yg = model.field(f if g is None else np.asarray(g, dtype=float))
        return float(np.dot(mu * yg, model.evolve(yf, t)))
    if observable == "mean-G":
        return float(np.dot(mu, model.time_integral(model.gamma(f), t)))
    drift = model.field(laplacian_apply(model.grid, f))
    if observable == "mean-M":
        val = model.evolve(yf, t) - yf - model.time_integral(drift, t)
        return float(np.dot(mu, val))
    # E_x[(Y_t - a - A_t)^2] with a = Y_0 = yf(x) and A_t = int_0^t Y_s(L f) ds
    a = yf
    sq_final = model.evolve(yf * yf, t) - 2.0 * a * model.evolve(yf, t) + a * a
    cross = model.integral_times_final(drift, yf, t) - a * model.time_integral(drift, t)
    val = sq_final - 2.0 * cross + model.integral_squared(drift, t)
    return float(np.dot(mu, val))
