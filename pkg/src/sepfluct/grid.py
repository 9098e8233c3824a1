"""Random geometric grids on model manifolds and their graph Laplacians."""

from __future__ import annotations

import functools
import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.spatial import cKDTree

from .manifold import TWO_PI, ManifoldModel, TestFunction, from_tag, geodesic_distance, sample_points

def _load_calibration() -> dict:
    path = Path(__file__).with_name("calibration.json")
    if not path.exists():
        return {}
    return json.loads(path.read_text())


CALIBRATION = _load_calibration()

#: Auto-bandwidth prefactors ``A`` in ``eps = A * (log N / N)^(1/(d+4))``,
#: fixed by ``scripts/calibrate.py``; see README for the procedure.
BANDWIDTH_CONSTANTS = CALIBRATION.get("bandwidth", {"circle": 2.5, "torus1": 2.5, "torus2": 3.0, "sphere": 2.75})

#: Edges connect points whose geodesic distance is at most ``CUTOFF * eps``.
CUTOFF = 1.0

#: Largest grid for which :func:`spectral_decompose` builds a dense matrix.
DENSE_CAP = 3000

GRID_MAGIC = b"SEPGRID\x00"
GRID_VERSION = 1


class GridError(ValueError):
    pass


def bump_kernel(r):
    """Smooth compactly supported profile ``exp(-1 / (1 - r^2))`` on ``[0, 1)``."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _bump_scalar(r: float) -> float:
    return math.exp(-1.0 / (1.0 - r * r)) if r < 1.0 else 0.0


@functools.lru_cache(maxsize=None)
def kernel_second_moment(d: int) -> float:
    """``int_{R^d} K(|v|) v_1^2 dv`` for the bump kernel, by radial quadrature."""
    if d == 1:
        val, _ = quad(lambda r: _bump_scalar(r) * r * r, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        return 2.0 * val
    if d == 2:
        val, _ = quad(lambda r: _bump_scalar(r) * r**3, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
        return math.pi * val
    raise GridError(f"no kernel moment for dimension {d}")


def kernel_normalizer(d: int) -> float:
    """``kappa_d = 2 / int K(|v|) v_1^2 dv``.

    With points of density ``N / vol`` and
    ``c_ij = vol * kappa_d / (N eps^(d+2)) * K(dist / eps)``, a second-order
    Taylor expansion gives ``sum_j c_ij (f_j - f_i) -> Delta f(p_i)``.
    """
    return 2.0 / kernel_second_moment(d)


def auto_bandwidth(m: ManifoldModel, n: int) -> float:
    a = BANDWIDTH_CONSTANTS[m.tag]
    return a * (math.log(n) / n) ** (1.0 / (m.dim + 4))


@dataclass(frozen=True, eq=False)
class Grid:
    """``N`` points on a manifold with symmetric edge weights.

    Each unordered edge is stored once with ``edge_i < edge_j``.
    """

    manifold: ManifoldModel
    points: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    weights: np.ndarray
    eps: float
    seed: int
    cutoff: float = CUTOFF
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def n_edges(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def degree(self) -> np.ndarray:
        """Total jump rate out of every site, ``sum_j c_ij``."""
        return np.bincount(self.edge_i, self.weights, self.n) + np.bincount(self.edge_j, self.weights, self.n)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        ij = np.concatenate([self.edge_i, self.edge_j])
        ji = np.concatenate([self.edge_j, self.edge_i])
        w = np.concatenate([self.weights, self.weights])
        return sp.csr_matrix((w, (ij, ji)), shape=(self.n, self.n))

    @cached_property
    def neighbors(self):
        """CSR neighbor lists ``(indptr, nbr, edge_id)`` covering both edge directions."""
        src = np.concatenate([self.edge_i, self.edge_j])
        dst = np.concatenate([self.edge_j, self.edge_i])
        eid = np.concatenate([np.arange(self.n_edges)] * 2)
        order = np.lexsort((dst, src))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)

    def values(self, f) -> np.ndarray:
        """Evaluate a test function (or pass a length-N vector through)."""
        if isinstance(f, TestFunction):
            return f.value(self.points)
        if callable(f):
            return np.asarray(f(self.points), dtype=float)
        v = np.asarray(f, dtype=float)
        if v.shape != (self.n,):
            raise GridError(f"expected {self.n} values, got shape {v.shape}")
        return v

    def dense_laplacian(self) -> np.ndarray:
        A = self.adjacency.toarray()
        return A - np.diag(self.degree)

    def save(self, path: Union[str, Path]) -> None:
        save_grid(self, path)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.manifold == other.manifold
            and self.eps == other.eps
            and self.seed == other.seed
            and self.cutoff == other.cutoff
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.edge_i, other.edge_i)
            and np.array_equal(self.edge_j, other.edge_j)
            and np.array_equal(self.weights, other.weights)
        )


def _candidate_pairs(m: ManifoldModel, pts: np.ndarray, radius: float) -> np.ndarray:
    n = pts.shape[0]
    if m.kind == "sphere":
        if radius >= math.pi:
            return np.array(np.triu_indices(n, 1)).T
        chord = 2.0 * math.sin(radius / 2.0) * (1.0 + 1e-12)
        return cKDTree(pts).query_pairs(chord, output_type="ndarray")
    if radius * 2.0 >= TWO_PI:
        return np.array(np.triu_indices(n, 1)).T
    tree = cKDTree(pts, boxsize=TWO_PI)
    return tree.query_pairs(radius * (1.0 + 1e-12), output_type="ndarray")


def build_grid(m: ManifoldModel, n: int, eps: Union[float, str, None] = "auto", seed: int = 0,
               cutoff: float = CUTOFF) -> Grid:
    """Sample ``n`` uniform points and connect them with bump-kernel weights.

    Parameters
    ----------
    m : ManifoldModel
    n : int
        Number of points, at least 2.
    eps : float or "auto"
        Kernel bandwidth.  ``"auto"`` uses :func:`auto_bandwidth`.
    seed : int
        Seed for the point sample; the grid is a deterministic function of
        ``(m, n, eps, seed)``.

    Isolated points are kept; their count is stored in
    ``grid.metadata["isolated"]`` and a warning is emitted.
    """
    if int(n) != n or n < 2:
        raise GridError(f"grid needs at least 2 points, got {n}")
    n = int(n)
    if eps is None or eps == "auto":
        eps = auto_bandwidth(m, n)
    eps = float(eps)
    if not eps > 0:
        raise GridError(f"bandwidth must be positive, got {eps}")
    rng = np.random.default_rng(seed)
    pts = sample_points(m, n, rng)

    pairs = _candidate_pairs(m, pts, cutoff * eps)
    if pairs.size:
        pairs = np.sort(pairs, axis=1)
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        dist = geodesic_distance(m, pts[pairs[:, 0]], pts[pairs[:, 1]])
        keep = dist <= cutoff * eps
        pairs, dist = pairs[keep], dist[keep]
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
        dist = np.zeros(0)
    scale = m.volume * kernel_normalizer(m.dim) / (n * eps ** (m.dim + 2))
    w = scale * bump_kernel(dist / eps)
    pos = w > 0.0
    pairs, w = pairs[pos], w[pos]

    meta = {}
    deg = np.bincount(pairs[:, 0], minlength=n) + np.bincount(pairs[:, 1], minlength=n)
    isolated = int(np.sum(deg == 0))
    meta["isolated"] = isolated
    if isolated:
        msg = f"{isolated} isolated grid point(s) at N={n}, eps={eps:.4g}"
        meta["warnings"] = [msg]
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return Grid(
        manifold=m,
        points=pts,
        edge_i=pairs[:, 0].astype(np.int64),
        edge_j=pairs[:, 1].astype(np.int64),
        weights=w,
        eps=eps,
        seed=int(seed),
        cutoff=float(cutoff),
        metadata=meta,
    )


def laplacian_apply(g: Grid, fvals) -> np.ndarray:
    """``(L f)(p_i) = sum_j c_ij (f(p_j) - f(p_i))``, edge by edge."""
    f = np.asarray(fvals, dtype=float)
    if f.shape != (g.n,):
        raise GridError(f"expected vector of length {g.n}, got shape {f.shape}")
    flux = g.weights * (f[g.edge_j] - f[g.edge_i])
    return np.bincount(g.edge_i, flux, g.n) - np.bincount(g.edge_j, flux, g.n)


def laplacian_error(g: Grid, f: TestFunction) -> float:
    """Uniform error ``max_i |L f(p_i) - Delta f(p_i)|`` over the grid."""
    return float(np.max(np.abs(laplacian_apply(g, f.value(g.points)) - f.laplacian(g.points))))


def edge_square_sums(g: Grid, fvals) -> np.ndarray:
    """``sum_j c_ij (f(p_j) - f(p_i))^2`` at every site."""
    f = np.asarray(fvals, dtype=float)
    sq = g.weights * (f[g.edge_j] - f[g.edge_i]) ** 2
    return np.bincount(g.edge_i, sq, g.n) + np.bincount(g.edge_j, sq, g.n)


def carre_du_champ_diagnostic(g: Grid, f: TestFunction):
    """Compare the discrete carre du champ with ``Delta(f^2) - 2 f Delta f = 2 |grad f|^2``.

    Returns ``(sup_value, limit_value, gap)``: the sup over sites of the
    discrete sum, the sup of the absolute continuum value, and the sup of
    their absolute difference.
    """
    discrete = edge_square_sums(g, f.value(g.points))
    limit = 2.0 * f.grad_sq(g.points)
    return float(np.max(discrete)), float(np.max(np.abs(limit))), float(np.max(np.abs(discrete - limit)))


def empirical_integral(g: Grid, f) -> float:
    return float(np.mean(g.values(f)))


@dataclass(frozen=True)
class SpectralLaplacian:
    """Eigendecomposition of the graph Laplacian, eigenvalues in decreasing order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def spectral_gap(self) -> float:
        return float(-self.eigenvalues[1]) if self.n > 1 else 0.0

    def matrix(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T

    def semigroup(self, fvals, t: float) -> np.ndarray:
        return semigroup_apply(self, fvals, t)


def spectral_decompose(g: Grid, cap: int = DENSE_CAP) -> SpectralLaplacian:
    """Dense symmetric eigendecomposition of the graph Laplacian."""
    if g.n > cap:
        raise GridError(
            f"N={g.n} exceeds the dense decomposition cap {cap}; "
            "use small-N grids for exact semigroup and duality oracles"
        )
    mu, Q = np.linalg.eigh(g.dense_laplacian())
    order = np.argsort(mu)[::-1]
    return SpectralLaplacian(eigenvalues=mu[order], eigenvectors=Q[:, order])


def semigroup_apply(s: SpectralLaplacian, fvals, t: float) -> np.ndarray:
    """``exp(t L) f`` via the eigen-expansion."""
    if t < 0:
        raise GridError(f"semigroup time must be nonnegative, got {t}")
    f = np.asarray(fvals, dtype=float)
    Q = s.eigenvectors
    coeff = Q.T @ f
    return Q @ (np.exp(t * s.eigenvalues) * coeff)


# --------------------------------------------------------------------------
# binary grid files
#
# Layout (little-endian):
#   8s   magic "SEPGRID\0"
#   u32  version
#   u32  length of the manifold tag, followed by the utf-8 tag
#   u64  N, u64 E, u32 chart_dim, u32 isolated count
#   f64  eps, f64 cutoff, i64 seed
#   f64[N * chart_dim] points (row major)
#   u32[E] edge_i, u32[E] edge_j, f64[E] weights

_HEADER = struct.Struct("<QQIIddq")


def save_grid(g: Grid, path: Union[str, Path]) -> None:
    tag = g.manifold.tag.encode()
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<II", GRID_VERSION, len(tag)))
        fh.write(tag)
        fh.write(_HEADER.pack(g.n, g.n_edges, g.manifold.chart_dim, g.metadata.get("isolated", 0),
                              g.eps, g.cutoff, g.seed))
        fh.write(np.ascontiguousarray(g.points, dtype="<f8").tobytes())
        fh.write(g.edge_i.astype("<u4").tobytes())
        fh.write(g.edge_j.astype("<u4").tobytes())
        fh.write(np.ascontiguousarray(g.weights, dtype="<f8").tobytes())


def load_grid(path: Union[str, Path]) -> Grid:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != GRID_MAGIC:
        raise GridError(f"{path}: not a grid file")
    version, taglen = struct.unpack_from("<II", data, 8)
    if version != GRID_VERSION:
        raise GridError(f"{path}: unsupported grid file version {version}")
    off = 16
    tag = data[off:off + taglen].decode()
    off += taglen
    if len(data) < off + _HEADER.size:
        raise GridError(f"{path}: truncated grid header")
    n, e, cdim, isolated, eps, cutoff, seed = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    expected = off + 8 * n * cdim + 16 * e
    if len(data) != expected:
        raise GridError(f"{path}: expected {expected} bytes, found {len(data)}")

    def take(dtype, count):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr

    pts = take("<f8", n * cdim).reshape(n, cdim).astype(float)
    ei = take("<u4", e).astype(np.int64)
    ej = take("<u4", e).astype(np.int64)
    w = take("<f8", e).astype(float)
    meta = {"isolated": int(isolated)}
    return Grid(from_tag(tag), pts, ei, ej, w, float(eps), int(seed), float(cutoff), meta)


def grid_summary(g: Grid) -> dict:
    deg_count = np.bincount(g.edge_i, minlength=g.n) + np.bincount(g.edge_j, minlength=g.n)
    return {
        "manifold": g.manifold.tag,
        "N": g.n,
        "edges": g.n_edges,
        "eps": g.eps,
        "cutoff": g.cutoff,
        "seed": g.seed,
        "isolated": int(g.metadata.get("isolated", 0)),
        "mean_neighbors": float(np.mean(deg_count)),
        "total_rate": float(np.sum(g.weights)),
    }
