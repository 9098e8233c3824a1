"""Model manifolds with exact geometry.

Three compact manifolds are supported: the unit circle, the flat torus
``[0, 2*pi)^d`` (d = 1 or 2) and the unit 2-sphere.  Each comes with uniform
sampling, geodesic distance, integration against the normalized volume
measure and a library of Laplace-Beltrami eigenfunctions whose Laplacian and
squared gradient are known in closed form.

Points are plain numpy arrays.  A batch of ``n`` points has shape
``(n, chart_dim)``: angles for the circle/torus, unit 3-vectors for the
sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

TWO_PI = 2.0 * np.pi

PointFn = Callable[[np.ndarray], np.ndarray]


class ManifoldError(ValueError):
    """Invalid manifold parameters or eigenfunction index."""


@dataclass(frozen=True)
class TestFunction:
    """Smooth function on a manifold with closed-form derivatives.

    ``value``, ``laplacian`` and ``grad_sq`` map an ``(n, chart_dim)`` array
    of points to an ``(n,)`` array.  ``eigenvalue`` is set only when
    ``laplacian == -eigenvalue * value``.
    """

    __test__ = False  # not a pytest class

    name: str
    value: PointFn = field(repr=False)
    laplacian: PointFn = field(repr=False)
    grad_sq: PointFn = field(repr=False)
    eigenvalue: Optional[float] = None
    integral: Optional[float] = None
    norm_sq: Optional[float] = None
    grad_sq_integral: Optional[float] = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.value(points)


@dataclass(frozen=True)
class ManifoldModel:
    """A compact Riemannian manifold from the supported family.

    Use the :func:`circle`, :func:`flat_torus` and :func:`sphere2` factories
    rather than constructing this directly.
    """

    kind: str
    dim: int
    volume: float

    def __post_init__(self):
        expected = {"circle": (1, TWO_PI), "sphere": (2, 4.0 * np.pi)}
        if self.kind in expected:
            d, vol = expected[self.kind]
            if self.dim != d or not math.isclose(self.volume, vol):
                raise ManifoldError(f"{self.kind} must have dim={d}, volume={vol}")
        elif self.kind == "torus":
            if self.dim not in (1, 2):
                raise ManifoldError("flat torus dimension must be 1 or 2")
            if not math.isclose(self.volume, TWO_PI ** self.dim):
                raise ManifoldError("flat torus volume must be (2 pi)^d")
        else:
            raise ManifoldError(f"unknown manifold kind {self.kind!r}")

    @property
    def chart_dim(self) -> int:
        """Number of stored coordinates per point."""
        return 3 if self.kind == "sphere" else self.dim

    @property
    def tag(self) -> str:
        return f"torus{self.dim}" if self.kind == "torus" else self.kind

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_points(self, n, rng)

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return geodesic_distance(self, p, q)

    def eigenfunction(self, index) -> TestFunction:
        return eigenfunction(self, index)

    def integrate(self, g, resolution: int = 4096) -> float:
        return integrate(self, g, resolution)


def circle() -> ManifoldModel:
    return ManifoldModel("circle", 1, TWO_PI)


def flat_torus(d: int = 2) -> ManifoldModel:
    return ManifoldModel("torus", d, TWO_PI**d)


def sphere2() -> ManifoldModel:
    return ManifoldModel("sphere", 2, 4.0 * np.pi)


def from_tag(tag: str) -> ManifoldModel:
    """Inverse of :attr:`ManifoldModel.tag`."""
    if tag == "circle":
        return circle()
    if tag == "sphere":
        return sphere2()
    if tag.startswith("torus"):
        return flat_torus(int(tag[5:] or 2))
    raise ManifoldError(f"unknown manifold tag {tag!r}")


# --------------------------------------------------------------------------
# sampling and distances


def _wrap_angles(theta: np.ndarray) -> np.ndarray:
    theta = np.mod(theta, TWO_PI)
    # np.mod can round up to exactly 2 pi for tiny negative inputs
    theta[theta >= TWO_PI] = 0.0
    return theta


def sample_points(m: ManifoldModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid points from the normalized volume measure."""
    if m.kind == "sphere":
        # Archimedes: z uniform on [-1, 1] and azimuth uniform is area-uniform
        z = rng.uniform(-1.0, 1.0, size=n)
        phi = rng.uniform(0.0, TWO_PI, size=n)
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        pts = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        return pts / np.linalg.norm(pts, axis=1, keepdims=True)
    return _wrap_angles(rng.random((n, m.dim)) * TWO_PI)


def sample_uniform(m: ManifoldModel, rng: np.random.Generator) -> np.ndarray:
    """Draw a single uniform point, shape ``(chart_dim,)``."""
    return sample_points(m, 1, rng)[0]


def geodesic_distance(m: ManifoldModel, p, q) -> Union[float, np.ndarray]:
    """Riemannian distance between points (broadcasts over leading axes)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    scalar = p.ndim == 1 and q.ndim == 1
    p = np.atleast_2d(p)
    q = np.atleast_2d(q)
    if m.kind == "sphere":
        # atan2 form is accurate for nearly coincident and nearly antipodal pairs
        cross = np.linalg.norm(np.cross(p, q), axis=-1)
        dot = np.einsum("...k,...k->...", p, q)
        out = np.arctan2(cross, dot)
    else:
        delta = np.abs(p - q) % TWO_PI
        delta = np.minimum(delta, TWO_PI - delta)
        out = np.sqrt(np.sum(delta * delta, axis=-1))
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# eigenfunctions


def _fourier_1d(k: int):
    """Real Fourier mode normalized for the uniform probability on the circle.

    Returns callables for the value and the derivative of one factor.
    """
    if k == 0:
        return (lambda th: np.ones_like(th)), (lambda th: np.zeros_like(th))
    a = abs(k)
    c = math.sqrt(2.0)
    if k > 0:
        return (lambda th: c * np.cos(a * th)), (lambda th: -c * a * np.sin(a * th))
    return (lambda th: c * np.sin(a * th)), (lambda th: c * a * np.cos(a * th))


def _angles_eigenfunction(m: ManifoldModel, ks: Sequence[int]) -> TestFunction:
    ks = tuple(int(k) for k in ks)
    lam = float(sum(k * k for k in ks))
    factors = [_fourier_1d(k) for k in ks]

    def value(pts):
        pts = np.atleast_2d(pts)
        out = np.ones(pts.shape[0])
        for axis, (v, _) in enumerate(factors):
            out = out * v(pts[:, axis])
        return out

    def grad_sq(pts):
        pts = np.atleast_2d(pts)
        vals = [v(pts[:, a]) for a, (v, _) in enumerate(factors)]
        ders = [dv(pts[:, a]) for a, (_, dv) in enumerate(factors)]
        total = np.zeros(pts.shape[0])
        for a in range(len(factors)):
            g = ders[a].copy()
            for b in range(len(factors)):
                if b != a:
                    g = g * vals[b]
            total += g * g
        return total

    if m.kind == "circle":
        name = f"circle[k={ks[0]}]"
    else:
        name = f"torus{m.dim}[k={','.join(map(str, ks))}]"
    const = all(k == 0 for k in ks)
    return TestFunction(
        name=name,
        value=value,
        laplacian=lambda pts: -lam * value(pts),
        grad_sq=grad_sq,
        eigenvalue=lam,
        integral=1.0 if const else 0.0,
        norm_sq=1.0,
        grad_sq_integral=lam,
    )


def _legendre_derivative_coeffs(ell: int, m: int) -> list[tuple[float, int, int]]:
    """Terms ``(a, p, k)`` with ``d^m P_ell / dt^m = sum a t^p`` and ``p = ell-m-2k``."""
    terms = []
    for k in range((ell - m) // 2 + 1):
        a = (
            (-1) ** k
            * math.comb(ell, k)
            * math.comb(2 * ell - 2 * k, ell)
            * math.factorial(ell - 2 * k)
            / math.factorial(ell - 2 * k - m)
            / 2.0**ell
        )
        terms.append((a, ell - m - 2 * k, k))
    return terms


def _sphere_eigenfunction(ell: int, m: int) -> TestFunction:
    """Real spherical harmonic scaled to unit norm under the normalized area.

    Built from the homogeneous harmonic polynomial
    ``F = c * A(x, y) * B(z, r^2)`` with ``A = Re/Im (x + i y)^|m|``; on the
    unit sphere the surface gradient is ``grad F - ell * F * x``, hence
    ``|grad_S f|^2 = |grad F|^2 - ell^2 F^2``.
    """
    am = abs(m)
    c = math.sqrt((2 * ell + 1) * math.factorial(ell - am) / math.factorial(ell + am))
    if m != 0:
        c *= math.sqrt(2.0)
    terms = _legendre_derivative_coeffs(ell, am)
    take = np.real if m >= 0 else np.imag

    def parts(pts):
        pts = np.atleast_2d(pts)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        s = x * x + y * y + z * z
        w = x + 1j * y
        A = take(w**am)
        if am > 0:
            dw = am * w ** (am - 1)
            Ax, Ay = take(dw), take(1j * dw)
        else:
            Ax = Ay = np.zeros_like(x)
        B = np.zeros_like(x)
        Bz = np.zeros_like(x)
        Bs = np.zeros_like(x)
        for a, p, k in terms:
            B += a * z**p * s**k
            if p > 0:
                Bz += a * p * z ** (p - 1) * s**k
            if k > 0:
                Bs += a * k * z**p * s ** (k - 1)
        F = c * A * B
        gx = c * (Ax * B + A * 2.0 * x * Bs)
        gy = c * (Ay * B + A * 2.0 * y * Bs)
        gz = c * A * (Bz + 2.0 * z * Bs)
        return F, gx, gy, gz

    def value(pts):
        return parts(pts)[0]

    def grad_sq(pts):
        F, gx, gy, gz = parts(pts)
        return np.maximum(gx * gx + gy * gy + gz * gz - ell * ell * F * F, 0.0)

    lam = float(ell * (ell + 1))
    return TestFunction(
        name=f"sphere[l={ell},m={m}]",
        value=value,
        laplacian=lambda pts: -lam * value(pts),
        grad_sq=grad_sq,
        eigenvalue=lam,
        integral=1.0 if ell == 0 else 0.0,
        norm_sq=1.0,
        grad_sq_integral=lam,
    )


def eigenfunction(m: ManifoldModel, index) -> TestFunction:
    """Laplace-Beltrami eigenfunction with unit norm in L2 of the normalized volume.

    Index conventions: circle ``k`` (int; ``k > 0`` cosine, ``k < 0`` sine);
    torus a length-d tuple of such ints (product of factors); sphere
    ``(ell, m)`` with ``|m| <= ell`` (``m > 0`` cosine, ``m < 0`` sine).
    """
    if m.kind == "circle":
        if isinstance(index, (tuple, list)):
            if len(index) != 1:
                raise ManifoldError(f"circle index must be a single int, got {index!r}")
            index = index[0]
        if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
            raise ManifoldError(f"circle index must be an int, got {index!r}")
        return _angles_eigenfunction(m, (int(index),))
    if m.kind == "torus":
        if isinstance(index, (int, np.integer)) and m.dim == 1:
            index = (int(index),)
        if not isinstance(index, (tuple, list)) or len(index) != m.dim:
            raise ManifoldError(f"torus{m.dim} index must have {m.dim} entries, got {index!r}")
        if not all(isinstance(k, (int, np.integer)) and not isinstance(k, bool) for k in index):
            raise ManifoldError(f"torus index entries must be ints, got {index!r}")
        return _angles_eigenfunction(m, index)
    if not isinstance(index, (tuple, list)) or len(index) != 2:
        raise ManifoldError(f"sphere index must be (ell, m), got {index!r}")
    ell, mm = (int(v) for v in index)
    if ell < 0 or abs(mm) > ell:
        raise ManifoldError(f"invalid spherical harmonic index {index!r}")
    return _sphere_eigenfunction(ell, mm)


def eigenfunctions_up_to(m: ManifoldModel, max_eigenvalue: float, include_constant: bool = False):
    """All library eigenfunctions with eigenvalue <= ``max_eigenvalue``."""
    out = []
    if m.kind == "sphere":
        ell = 0
        while ell * (ell + 1) <= max_eigenvalue:
            for mm in range(-ell, ell + 1):
                out.append(eigenfunction(m, (ell, mm)))
            ell += 1
    else:
        kmax = int(math.isqrt(int(max_eigenvalue)))
        grids = np.meshgrid(*[np.arange(-kmax, kmax + 1)] * m.dim, indexing="ij")
        for ks in zip(*(g.ravel() for g in grids)):
            if sum(int(k) ** 2 for k in ks) <= max_eigenvalue:
                idx = int(ks[0]) if m.kind == "circle" else tuple(int(k) for k in ks)
                out.append(eigenfunction(m, idx))
    if not include_constant:
        out = [f for f in out if f.eigenvalue != 0.0]
    return out


# --------------------------------------------------------------------------
# integration


def quadrature_nodes(m: ManifoldModel, resolution: int = 4096):
    """Nodes and weights (summing to 1) for integration against the normalized volume.

    Angles use the periodic trapezoid rule, which converges exponentially for
    smooth periodic integrands.  The sphere uses Gauss-Legendre in ``z``
    (exact for polynomials of degree < 2 * resolution) times the periodic
    trapezoid rule in the azimuth.  For the 2-torus and the sphere the node
    count is ``resolution**2``; callers integrating in chunks should use
    :func:`integrate` instead.
    """
    if m.kind == "sphere":
        z, wz = np.polynomial.legendre.leggauss(resolution)
        phi = np.arange(resolution) * (TWO_PI / resolution)
        Z, PHI = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - Z * Z)
        pts = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), Z.ravel()])
        w = (np.repeat(wz / 2.0, resolution)) / resolution
        return pts, w
    th = np.arange(resolution) * (TWO_PI / resolution)
    grids = np.meshgrid(*[th] * m.dim, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


def integrate(m: ManifoldModel, g, resolution: int = 4096) -> float:
    """Integral of ``g`` against the normalized volume measure.

    A :class:`TestFunction` with a known ``integral`` short-circuits to the
    closed form; anything else is integrated by quadrature (see
    :func:`quadrature_nodes`), evaluated one row of nodes at a time so that
    two-dimensional charts at the default resolution fit in memory.
    """
    if isinstance(g, TestFunction) and g.integral is not None:
        return float(g.integral)
    fn = g.value if isinstance(g, TestFunction) else g
    if m.kind == "circle" or (m.kind == "torus" and m.dim == 1):
        pts, w = quadrature_nodes(m, resolution)
        return float(np.sum(w * fn(pts)))
    row_sums = np.empty(resolution)
    if m.kind == "sphere":
        z, wz = np.polynomial.legendre.leggauss(resolution)
        phi = np.arange(resolution) * (TWO_PI / resolution)
        cphi, sphi = np.cos(phi), np.sin(phi)
        for a in range(resolution):
            s = math.sqrt(max(0.0, 1.0 - z[a] * z[a]))
            pts = np.column_stack([s * cphi, s * sphi, np.full(resolution, z[a])])
            row_sums[a] = wz[a] / 2.0 * np.mean(fn(pts))
        return float(math.fsum(row_sums))
    th = np.arange(resolution) * (TWO_PI / resolution)
    for a in range(resolution):
        pts = np.column_stack([np.full(resolution, th[a]), th])
        row_sums[a] = np.mean(fn(pts))
    return float(math.fsum(row_sums) / resolution)
