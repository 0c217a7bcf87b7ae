"""LR-system performance measures: Cllr, ROC/AUC, Tippett curves, verbal scale."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .calibrate import LRValue

LN2 = math.log(2.0)
LN10 = math.log(10.0)

DEFAULT_LR_CAP = 1000.0


def _log10_array(lrs: Iterable[LRValue | float]) -> np.ndarray:
    out = []
    for v in lrs:
        if isinstance(v, LRValue):
            out.append(v.log10_lr)
        else:
            if not v > 0:
                raise ValueError(f"LR must be positive, got {v}")
            out.append(math.log10(float(v)))
    return np.asarray(out, dtype=float)


def cllr(lrs_h1: Sequence[LRValue | float], lrs_h2: Sequence[LRValue | float]) -> float:
    """Log-likelihood-ratio cost.

    0.5 * [ mean over H1 of log2(1 + 1/LR) + mean over H2 of log2(1 + LR) ].
    Equals 1.0 exactly for a system that always answers LR = 1 and tends to 0
    as H1 LRs grow and H2 LRs shrink.
    """
    l1 = _log10_array(lrs_h1)
    l2 = _log10_array(lrs_h2)
    if len(l1) == 0 or len(l2) == 0:
        raise ValueError("both LR lists must be non-empty")
    h1_term = np.logaddexp(0.0, -l1 * LN10).mean() / LN2
    h2_term = np.logaddexp(0.0, l2 * LN10).mean() / LN2
    return float(0.5 * (h1_term + h2_term))


@dataclass(frozen=True)
class RocSummary:
    auc: float
    fp_rate: float
    fn_rate: float


def roc_auc(scores: Sequence[float], h1_flags: Sequence[bool]) -> RocSummary:
    """AUC by the rank statistic (ties averaged), plus the LR=1 error rates.

    The operating point treats the scores as LRs: predict H1 when score > 1,
    so fp_rate is the H2 fraction above 1 and fn_rate the H1 fraction at or
    below 1.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(h1_flags, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and h1_flags must be equal-length vectors")
    n1 = int(y.sum())
    n2 = len(y) - n1
    if n1 == 0 or n2 == 0:
        raise ValueError("both classes must be present")
    ranks = rankdata(s)
    auc = (ranks[y].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n2)
    fp = float((s[~y] > 1.0).mean())
    fn = float((s[y] <= 1.0).mean())
    return RocSummary(auc=float(auc), fp_rate=fp, fn_rate=fn)


@dataclass(frozen=True)
class MetricReport:
    cllr: float
    auc: float
    fp_rate: float
    fn_rate: float
    n_h1: int
    n_h2: int

    def __post_init__(self) -> None:
        if self.cllr < 0:
            raise ValueError("cllr must be non-negative")
        for name in ("auc", "fp_rate", "fn_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {v}")
        if self.n_h1 < 1 or self.n_h2 < 1:
            raise ValueError("class counts must be >= 1")


@dataclass(frozen=True, eq=False)
class TippettCurve:
    """Empirical fraction of each class whose log10 LR exceeds a threshold."""

    thresholds: np.ndarray
    fraction_h1: np.ndarray
    fraction_h2: np.ndarray
    _sorted_h1: np.ndarray
    _sorted_h2: np.ndarray

    def fraction_exceeding(self, threshold: float) -> tuple[float, float]:
        """Exact (H1, H2) exceedance fractions at an arbitrary threshold."""
        f1 = 1.0 - np.searchsorted(self._sorted_h1, threshold, side="right") / len(self._sorted_h1)
        f2 = 1.0 - np.searchsorted(self._sorted_h2, threshold, side="right") / len(self._sorted_h2)
        return float(f1), float(f2)

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(t), float(f1), float(f2)) for t, f1, f2 in
                zip(self.thresholds, self.fraction_h1, self.fraction_h2)]


def tippett(lrs_h1: Sequence[LRValue | float], lrs_h2: Sequence[LRValue | float]) -> TippettCurve:
    """Inverse cumulative distributions of log10 LR under each hypothesis.

    The stored grid is the pooled set of observed log10 LRs with one leading
    threshold below the minimum, so the curves start at fraction 1 and end
    at 0.
    """
    l1 = np.sort(_log10_array(lrs_h1))
    l2 = np.sort(_log10_array(lrs_h2))
    if len(l1) == 0 or len(l2) == 0:
        raise ValueError("both LR lists must be non-empty")
    pooled = np.unique(np.concatenate([l1, l2]))
    grid = np.concatenate([[pooled[0] - 1.0], pooled])
    f1 = 1.0 - np.searchsorted(l1, grid, side="right") / len(l1)
    f2 = 1.0 - np.searchsorted(l2, grid, side="right") / len(l2)
    return TippettCurve(thresholds=grid, fraction_h1=f1, fraction_h2=f2,
                        _sorted_h1=l1, _sorted_h2=l2)


def cap_lr(lr: LRValue, cap: float = DEFAULT_LR_CAP) -> LRValue:
    """Clamp an LR into [1/cap, cap]; idempotent."""
    if not cap > 1:
        raise ValueError("cap must exceed 1")
    clamped = min(max(lr.lr, 1.0 / cap), cap)
    if clamped == lr.lr:
        return lr
    return LRValue.from_lr(clamped)


# Verbal equivalents of LR magnitude. Bands are lower-exclusive /
# upper-inclusive; [0.5, 2] is the neutral band and LRs below 0.5 mirror the
# ladder as support for H2 at magnitude 1/LR.
_VERBAL_LADDER: tuple[tuple[float, str], ...] = (
    (10.0, "weak support"),
    (100.0, "moderate support"),
    (1000.0, "moderately strong support"),
    (1e4, "strong support"),
    (1e6, "very strong support"),
    (math.inf, "extremely strong support"),
)
NEUTRAL_CATEGORY = "do not support one hypothesis over the other"


def verbal_scale(lr: LRValue | float) -> str:
    """Verbal category for an LR; mirrored wording below the neutral band."""
    value = lr.lr if isinstance(lr, LRValue) else float(lr)
    if not value > 0:
        raise ValueError(f"LR must be positive, got {value}")
    if 0.5 <= value <= 2.0:
        return NEUTRAL_CATEGORY
    side = "H1" if value > 2.0 else "H2"
    magnitude = value if value > 2.0 else 1.0 / value
    for upper, label in _VERBAL_LADDER:
        if magnitude <= upper:
            return f"{label} for {side}"
    raise AssertionError("unreachable")
