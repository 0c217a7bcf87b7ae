"""Score-to-LR calibration via logistic regression on log10 scores.

A raw score orders samples but its magnitude is not evidential strength. The
calibrator fits unregularized logistic regression of the H1 indicator on
log10 score, giving an affine map in log-odds space; subtracting the
calibration set's prior log odds turns posterior odds into a likelihood
ratio. For the one-vs-rest logistic model the affine map can be fused into
the model's own coefficients without changing any output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .classify import LN10, BinaryLogReg, ConvergenceError

SCORE_CLIP_LO = 1e-10
SCORE_CLIP_HI = 1e10


class CalibrationError(ValueError):
    """Calibration impossible or meaningless for the given scores."""


@dataclass(frozen=True)
class LRValue:
    """A likelihood ratio with its cached log10.

    log10 magnitudes beyond the float64 range keep an exact log10_lr while lr
    saturates to inf / 0; such values only ever reach reports after capping.
    """

    lr: float
    log10_lr: float

    def __post_init__(self) -> None:
        if not self.lr >= 0:
            raise ValueError(f"LR must be positive, got {self.lr}")
        if 0.0 < self.lr < math.inf:
            if abs(self.log10_lr - math.log10(self.lr)) > 1e-12 * max(1.0, abs(self.log10_lr)):
                raise ValueError("log10_lr inconsistent with lr")
        elif not abs(self.log10_lr) > 300:
            raise ValueError(f"LR must be positive, got {self.lr}")

    @classmethod
    def from_lr(cls, lr: float) -> "LRValue":
        return cls(lr=float(lr), log10_lr=math.log10(lr))

    @classmethod
    def from_log10(cls, log10_lr: float) -> "LRValue":
        log10_lr = float(log10_lr)
        if log10_lr > 308.0:
            return cls(lr=math.inf, log10_lr=log10_lr)
        return cls(lr=10.0 ** log10_lr, log10_lr=log10_lr)


@dataclass(frozen=True)
class Calibrator:
    """Affine map on log10 score: log10 LR = a0 + a1*log10(s) - prior_log_odds."""

    a0: float
    a1: float
    prior_log_odds: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a0) and math.isfinite(self.a1)
                and math.isfinite(self.prior_log_odds)):
            raise CalibrationError("calibrator parameters must be finite")

    @classmethod
    def identity(cls) -> "Calibrator":
        return cls(a0=0.0, a1=1.0, prior_log_odds=0.0)


def clip_score(score) -> np.ndarray:
    """Clamp raw scores into [1e-10, 1e10] before taking logs."""
    return np.clip(score, SCORE_CLIP_LO, SCORE_CLIP_HI)


def fit_calibrator(log_scores: Sequence[float], h1_flags: Sequence[bool],
                   correct_prior: bool = True, ridge: float = 1.0,
                   tolerance: float = 1e-10, max_iter: int = 200) -> Calibrator:
    """Fit the logistic calibration map on log10 scores.

    Newton iteration on the two-parameter logistic NLL. `ridge` adds
    0.5*ridge*slope^2 to the total NLL (intercept unpenalized), the ordinary
    logistic-regression default; it is negligible for overlapping score
    distributions but keeps the fit finite when the calibration scores are
    completely separated, where the unregularized maximum likelihood estimate
    does not exist. Pass ridge=0 for the strictly unregularized fit.

    correct_prior records log10(n_H1/n_H2) so that applying the calibrator
    reports an LR rather than the calibration set's posterior odds; turn it
    off to treat the calibration set as having prior odds 1.
    Raises CalibrationError when the fitted slope is not positive ("scores
    worse than chance") or only one class is present.
    """
    x = np.asarray(log_scores, dtype=float)
    y = np.asarray(h1_flags, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("log_scores and h1_flags must be equal-length vectors")
    if not np.all(np.isfinite(x)):
        raise CalibrationError("log scores must be finite (clip scores upstream)")
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise CalibrationError("both hypotheses must be present to calibrate")

    n = len(y)
    Z = np.column_stack([np.ones_like(x), x])
    reg = np.array([0.0, ridge / n])  # per-sample mean objective
    w = np.zeros(2)

    def loss_grad(w):
        t = Z @ w
        loss = float(np.mean(np.logaddexp(0.0, t) - y * t)) + 0.5 * float(reg @ w ** 2)
        grad = Z.T @ (expit(t) - y) / n + reg * w
        return loss, grad

    loss, grad = loss_grad(w)
    for _ in range(max_iter):
        if np.linalg.norm(grad) <= tolerance:
            break
        p = expit(Z @ w)
        s = p * (1.0 - p)
        H = (Z.T * s) @ Z / n + np.diag(reg) + 1e-14 * np.eye(2)
        step = np.linalg.solve(H, grad)
        # Backtrack if a full Newton step overshoots.
        for _ in range(60):
            w_new = w - step
            loss_new, grad_new = loss_grad(w_new)
            if loss_new <= loss + 1e-12:
                break
            step = step / 2.0
        w, loss, grad = w_new, loss_new, grad_new
    else:
        raise ConvergenceError(float(np.linalg.norm(grad)), tolerance,
                               detail="calibration fit")

    a0 = float(w[0] / LN10)
    a1 = float(w[1] / LN10)
    if a1 <= 0:
        raise CalibrationError(
            f"anti-discriminative scores: fitted slope {a1:.4g} <= 0")
    prior = math.log10(n1 / n0) if correct_prior else 0.0
    return Calibrator(a0=a0, a1=a1, prior_log_odds=prior)


def apply_calibrator(c: Calibrator, score: float) -> LRValue:
    """Map one raw score to a calibrated LR."""
    if not score > 0:
        raise ValueError(f"score must be positive, got {score}")
    log_s = math.log10(float(clip_score(score)))
    return LRValue.from_log10(c.a0 + c.a1 * log_s - c.prior_log_odds)


def apply_calibrator_many(c: Calibrator, scores: np.ndarray) -> np.ndarray:
    """Vectorized log10 LR for an array of raw scores."""
    scores = np.asarray(scores, dtype=float)
    if np.any(scores <= 0):
        raise ValueError("scores must be positive")
    return c.a0 + c.a1 * np.log10(clip_score(scores)) - c.prior_log_odds


def fuse_coefficients(c: Calibrator, m: BinaryLogReg) -> BinaryLogReg:
    """Fold the calibration map into the model's linear coefficients.

    Scoring with the fused model equals apply_calibrator(score_binary(...))
    exactly, for every score inside the clip bounds: the affine map only
    scales and translates the coefficients.
    """
    return BinaryLogReg(
        intercept=c.a0 + c.a1 * m.intercept - c.prior_log_odds,
        coefficients=c.a1 * m.coefficients,
        feature_mean=m.feature_mean,
        feature_scale=m.feature_scale,
    )


@dataclass(frozen=True)
class DecadeBin:
    """One unit-width bin of the held-out calibration diagnostic."""

    center: int
    n_h1: int
    n_h2: int
    log10_ratio: float | None
    deviation: float | None


def decade_bin_diagnostic(log10_lrs_h1: Sequence[float],
                          log10_lrs_h2: Sequence[float],
                          min_per_class: int = 30) -> tuple[DecadeBin, ...]:
    """Check "the LR of the LR is the LR" on held-out calibrated LRs.

    log10 LRs are binned into unit bins centered on integers; in a calibrated
    system the class-frequency ratio inside a bin matches the bin center. The
    deviation is only meaningful (non-None) for bins holding at least
    min_per_class samples of each class.
    """
    l1 = np.asarray(log10_lrs_h1, dtype=float)
    l2 = np.asarray(log10_lrs_h2, dtype=float)
    n1, n2 = len(l1), len(l2)
    if n1 == 0 or n2 == 0:
        raise ValueError("both hypotheses must be present")
    centers1 = np.floor(l1 + 0.5).astype(int)
    centers2 = np.floor(l2 + 0.5).astype(int)
    bins = []
    for center in sorted(set(centers1.tolist()) | set(centers2.tolist())):
        c1 = int((centers1 == center).sum())
        c2 = int((centers2 == center).sum())
        if c1 >= min_per_class and c2 >= min_per_class:
            ratio = math.log10((c1 / n1) / (c2 / n2))
            bins.append(DecadeBin(center, c1, c2, ratio, abs(ratio - center)))
        else:
            bins.append(DecadeBin(center, c1, c2, None, None))
    return tuple(bins)
