"""Ensemble estimators with standard errors, and the check records they feed."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import stats as sps

DEFAULT_GROUPS = 100


def mean_se(x) -> tuple[float, float]:
    """Sample mean and its standard error (``nan`` for fewer than two samples)."""
    x = np.asarray(x, dtype=float)
    m = float(np.mean(x))
    if x.shape[0] < 2:
        return m, math.nan
    return m, float(np.std(x, ddof=1) / math.sqrt(x.shape[0]))


def jackknife(stat: Callable[..., float], *samples, groups: int = DEFAULT_GROUPS) -> tuple[float, float]:
    """Full-sample estimate of ``stat`` and its grouped delete-a-group jackknife SE.

    ``samples`` are arrays sharing a leading replica axis; groups are
    contiguous blocks of replicas, so the result depends only on replica
    order, not on how the replicas were produced.
    """
    arrs = [np.asarray(s, dtype=float) for s in samples]
    R = arrs[0].shape[0]
    est = float(stat(*arrs))
    if R < 2:
        return est, math.nan
    G = min(int(groups), R)
    edges = np.linspace(0, R, G + 1).astype(int)
    keep = np.ones(R, dtype=bool)
    pseudo = np.empty(G)
    for k in range(G):
        keep[edges[k]:edges[k + 1]] = False
        pseudo[k] = stat(*(a[keep] for a in arrs))
        keep[edges[k]:edges[k + 1]] = True
    se = math.sqrt((G - 1) / G * float(np.sum((pseudo - pseudo.mean()) ** 2)))
    return est, se


def sample_cov(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sum((a - a.mean()) * (b - b.mean())) / (a.shape[0] - 1))


def cov_se(a, b, groups: int = DEFAULT_GROUPS) -> tuple[float, float]:
    return jackknife(sample_cov, a, b, groups=groups)


def var_se(a, groups: int = DEFAULT_GROUPS) -> tuple[float, float]:
    return jackknife(lambda x: sample_cov(x, x), a, groups=groups)


def gaussianity(x) -> dict:
    """Sample skewness and excess kurtosis with the ``4 sqrt(6/R)``, ``4 sqrt(24/R)`` bounds."""
    x = np.asarray(x, dtype=float)
    R = x.shape[0]
    skew = float(sps.skew(x))
    kurt = float(sps.kurtosis(x))
    skew_bound = 4.0 * math.sqrt(6.0 / R)
    kurt_bound = 4.0 * math.sqrt(24.0 / R)
    return {
        "replicas": R,
        "skewness": skew,
        "skewness_bound": skew_bound,
        "excess_kurtosis": kurt,
        "kurtosis_bound": kurt_bound,
        "passed": abs(skew) < skew_bound and abs(kurt) < kurt_bound,
    }


# --------------------------------------------------------------------------
# check records

#: How ``tolerance`` is interpreted when deciding a verdict.
TOLERANCE_KINDS = ("se", "abs", "rel", "upper", "trend", "bool")


@dataclass
class Check:
    """One estimate compared against one oracle.

    ``tolerance_kind`` selects the rule: ``"se"`` means
    ``|estimate - oracle| <= tolerance * se``; ``"abs"`` and ``"rel"`` are
    absolute and relative differences; ``"upper"`` means
    ``estimate <= oracle + tolerance * se``; ``"trend"`` and ``"bool"``
    carry a verdict computed elsewhere.
    """

    check: str
    quantity: str
    anchor: str
    estimate: float
    oracle: Optional[float] = None
    oracle_kind: str = ""
    se: Optional[float] = None
    replicas: Optional[int] = None
    tolerance: float = 4.0
    tolerance_kind: str = "se"
    n: Optional[int] = None
    f: Optional[str] = None
    g: Optional[str] = None
    t: Optional[float] = None
    s: Optional[float] = None
    passed: Optional[bool] = None
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tolerance_kind not in TOLERANCE_KINDS:
            raise ValueError(f"unknown tolerance kind {self.tolerance_kind!r}")
        if self.passed is None:
            self.passed = self._verdict()

    @property
    def z(self) -> Optional[float]:
        if self.oracle is None or not _usable(self.se):
            return None
        return (self.estimate - self.oracle) / self.se

    def _verdict(self) -> bool:
        if self.tolerance_kind in ("trend", "bool"):
            raise ValueError("trend and bool checks need an explicit verdict")
        if self.tolerance_kind in ("se", "upper"):
            if not _usable(self.se):
                self.note = (self.note + "; " if self.note else "") + "standard error undefined"
                return False
            if self.tolerance_kind == "se":
                return abs(self.estimate - self.oracle) <= self.tolerance * self.se
            return self.estimate <= self.oracle + self.tolerance * self.se
        diff = abs(self.estimate - self.oracle)
        if self.tolerance_kind == "abs":
            return diff <= self.tolerance
        return diff <= self.tolerance * abs(self.oracle)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["z"] = self.z
        return {k: _clean(v) for k, v in d.items()}


def _usable(se) -> bool:
    return se is not None and math.isfinite(se) and se > 0


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


class EnsembleStats:
    """Ordered collection of :class:`Check` records."""

    def __init__(self, checks: Iterable[Check] = ()):
        self.checks = list(checks)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[Check]) -> None:
        self.checks.extend(checks)

    def __iter__(self):
        return iter(self.checks)

    def __len__(self):
        return len(self.checks)

    def select(self, **attrs) -> list:
        return [c for c in self.checks if all(getattr(c, k) == v for k, v in attrs.items())]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_list(self) -> list:
        return [c.to_dict() for c in self.checks]
