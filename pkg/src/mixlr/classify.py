"""Score models: binary and power-set multinomial logistic regression.

Both models are trained by minimizing an L2-regularized negative
log-likelihood, a smooth strictly convex objective with a unique minimizer.
The losses and their analytic gradients live here so they can be checked
against finite differences; the descent itself is delegated to a trust-region
Newton solver driven by exact Hessian-vector products. Coefficients are
stored in base-10 convention: a model's log10 posterior odds is
intercept + coefficients . features.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .profiles import BodyFluid, sorted_fluids

LN10 = math.log(10.0)

DEFAULT_L2 = 1e-4
DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 500

SCORE_DENOMINATOR_FLOOR = 1e-12


class ConvergenceError(RuntimeError):
    """Optimizer stopped above the requested gradient-norm tolerance."""

    def __init__(self, gradient_norm: float, tolerance: float, detail: str = ""):
        self.gradient_norm = gradient_norm
        self.tolerance = tolerance
        message = (f"optimization did not reach gradient norm {tolerance:g} "
                   f"(final norm {gradient_norm:.3e})")
        if detail:
            message += f"; {detail}"
        super().__init__(message)


@dataclass(frozen=True)
class TrainingConfig:
    """Optimization settings; l2_per_sample scales the penalty with n."""

    l2_per_sample: float = DEFAULT_L2
    tolerance: float = DEFAULT_TOLERANCE
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 0

    def __post_init__(self) -> None:
        if self.l2_per_sample < 0:
            raise ValueError("l2_per_sample must be >= 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


# --------------------------------------------------------------------------
# losses (natural-log parameterization, mean NLL + 0.5 * l2 * ||w||^2)

def binary_loss_and_grad(w: np.ndarray, Z: np.ndarray, y: np.ndarray,
                         l2: float) -> tuple[float, np.ndarray]:
    """Mean logistic NLL plus L2 penalty, with its analytic gradient.

    Z is the design matrix including the intercept column; y is 0/1.
    """
    t = Z @ w
    loss = float(np.mean(np.logaddexp(0.0, t) - y * t)) + 0.5 * l2 * float(w @ w)
    p = expit(t)
    grad = Z.T @ (p - y) / len(y) + l2 * w
    return loss, grad


def binary_hessp(w: np.ndarray, v: np.ndarray, Z: np.ndarray,
                 l2: float) -> np.ndarray:
    p = expit(Z @ w)
    s = p * (1.0 - p)
    return Z.T @ (s * (Z @ v)) / Z.shape[0] + l2 * v


def _softmax_rows(logits_full: np.ndarray) -> np.ndarray:
    shifted = logits_full - logits_full.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def powerset_loss_and_grad(w_flat: np.ndarray, Z: np.ndarray,
                           class_idx: np.ndarray, n_classes: int,
                           l2: float) -> tuple[float, np.ndarray]:
    """Multinomial NLL over all 2^k classes, reference class pinned at zero.

    w_flat holds the (d, n_classes - 1) parameter matrix for the non-reference
    classes. Classes never observed in the data still appear through the
    softmax normalization, so the regularization keeps their parameters
    finite.
    """
    n, d = Z.shape
    W = w_flat.reshape(d, n_classes - 1)
    logits = np.concatenate([np.zeros((n, 1)), Z @ W], axis=1)
    shift = logits.max(axis=1)
    lse = shift + np.log(np.exp(logits - shift[:, None]).sum(axis=1))
    true_logit = logits[np.arange(n), class_idx]
    loss = float(np.mean(lse - true_logit)) + 0.5 * l2 * float(w_flat @ w_flat)
    P = _softmax_rows(logits)
    P[np.arange(n), class_idx] -= 1.0
    grad = (Z.T @ P[:, 1:]) / n + l2 * W
    return loss, grad.ravel()


def powerset_hessp(w_flat: np.ndarray, v_flat: np.ndarray, Z: np.ndarray,
                   class_idx: np.ndarray, n_classes: int,
                   l2: float) -> np.ndarray:
    n, d = Z.shape
    W = w_flat.reshape(d, n_classes - 1)
    V = v_flat.reshape(d, n_classes - 1)
    logits = np.concatenate([np.zeros((n, 1)), Z @ W], axis=1)
    P = _softmax_rows(logits)
    U = np.concatenate([np.zeros((n, 1)), Z @ V], axis=1)
    row_dot = (P * U).sum(axis=1, keepdims=True)
    S = P * (U - row_dot)
    return ((Z.T @ S[:, 1:]) / n + l2 * V).ravel()


_NEWTON_POLISH_MAX_DIM = 512


def _minimize(fun, x0, hessp, cfg: TrainingConfig) -> np.ndarray:
    res = minimize(fun, x0, jac=True, hessp=hessp, method="trust-ncg",
                   options={"gtol": cfg.tolerance, "maxiter": cfg.max_iter})
    x = res.x
    _, grad = fun(x)
    norm = float(np.linalg.norm(grad))
    # The trust region can stall just above very tight tolerances; a couple
    # of exact Newton steps finish the job when the Hessian is small enough
    # to materialize from Hessian-vector products. A run that spent its whole
    # iteration budget is reported as non-convergence instead.
    if (norm > cfg.tolerance and res.nit < cfg.max_iter
            and x.size <= _NEWTON_POLISH_MAX_DIM):
        eye = np.eye(x.size)
        for _ in range(25):
            H = np.column_stack([hessp(x, eye[:, i]) for i in range(x.size)])
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                break
            loss = fun(x)[0]
            for _ in range(40):
                x_new = x - step
                loss_new, grad_new = fun(x_new)
                if loss_new <= loss + 1e-12:
                    break
                step = step / 2.0
            x, grad = x_new, grad_new
            norm = float(np.linalg.norm(grad))
            if norm <= cfg.tolerance:
                break
    if norm > cfg.tolerance:
        raise ConvergenceError(norm, cfg.tolerance, detail=res.message)
    return x


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale == 0, 1.0, scale)
    return (X - mean) / scale, mean, scale


def _unfold(w_std: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Map intercept+coefficients fit on standardized features back to raw."""
    coef = w_std[1:] / scale
    intercept = w_std[0] - float(coef @ mean)
    return np.concatenate([[intercept], coef])


# --------------------------------------------------------------------------
# binary (one-vs-rest) model

@dataclass(frozen=True, eq=False)
class BinaryLogReg:
    """log10 posterior odds = intercept + coefficients . features."""

    intercept: float
    coefficients: np.ndarray
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        coef = np.array(self.coefficients, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coef))):
            raise ValueError("model coefficients must be finite")

    def log10_scores(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.coefficients


def train_binary_logreg(X: np.ndarray, y: Sequence[bool],
                        cfg: TrainingConfig | None = None,
                        standardize: bool = False,
                        initial: np.ndarray | None = None) -> BinaryLogReg:
    """Fit the L2-regularized binary logistic model.

    Standardization (for raw-rfu features) happens in the optimizer only; the
    returned coefficients are always in raw feature space, so scoring is the
    plain weighted sum of the observed feature values. Raises on single-class
    labels and carries the final gradient norm on non-convergence.
    """
    cfg = cfg or TrainingConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X rows must match y length")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    mean = scale = None
    Xs = X
    if standardize:
        Xs, mean, scale = _standardize(X)
    Z = np.concatenate([np.ones((X.shape[0], 1)), Xs], axis=1)
    x0 = np.zeros(Z.shape[1]) if initial is None else np.asarray(initial, dtype=float)
    w = _minimize(lambda w: binary_loss_and_grad(w, Z, y, cfg.l2_per_sample),
                  x0, lambda w, v: binary_hessp(w, v, Z, cfg.l2_per_sample), cfg)
    if standardize:
        w = _unfold(w, mean, scale)
    beta = w / LN10
    return BinaryLogReg(intercept=float(beta[0]), coefficients=beta[1:],
                        feature_mean=mean, feature_scale=scale)


def score_binary(model: BinaryLogReg, r: np.ndarray) -> float:
    """Posterior odds 10^(intercept + coefficients . r)."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("feature vector must be finite")
    return float(10.0 ** (model.intercept + model.coefficients @ r))


def score_binary_many(model: BinaryLogReg, X: np.ndarray) -> np.ndarray:
    return 10.0 ** model.log10_scores(X)


# --------------------------------------------------------------------------
# label power-set model

@dataclass(frozen=True, eq=False)
class PowersetLogReg:
    """Multinomial model over every subset of the eligible fluids.

    Class c is the label set whose bitmask over `fluids` equals c; class 0
    (the empty set) is the reference with all parameters fixed at zero.
    intercepts has shape (2^k - 1,), coefficients (p, 2^k - 1), base-10.
    """

    fluids: tuple[BodyFluid, ...]
    intercepts: np.ndarray
    coefficients: np.ndarray
    feature_mean: np.ndarray | None = None
    feature_scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        b0 = np.array(self.intercepts, dtype=float)
        B = np.array(self.coefficients, dtype=float)
        b0.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "intercepts", b0)
        object.__setattr__(self, "coefficients", B)
        k = len(self.fluids)
        if b0.shape != (2 ** k - 1,) or B.shape[1] != 2 ** k - 1:
            raise ValueError("coefficient shape does not match the class space")
        if not (np.all(np.isfinite(b0)) and np.all(np.isfinite(B))):
            raise ValueError("model coefficients must be finite")

    @property
    def n_classes(self) -> int:
        return 2 ** len(self.fluids)

    def class_labels(self) -> list[frozenset[BodyFluid]]:
        return [self.labels_of_class(c) for c in range(self.n_classes)]

    def labels_of_class(self, c: int) -> frozenset[BodyFluid]:
        return frozenset(f for i, f in enumerate(self.fluids) if c >> i & 1)

    def class_of_labels(self, labels: frozenset[BodyFluid]) -> int:
        unknown = labels - set(self.fluids)
        if unknown:
            raise ValueError(
                f"labels outside the model's fluid space: "
                f"{[f.value for f in sorted_fluids(unknown)]}")
        return sum(1 << self.fluids.index(f) for f in labels)

    def interest_mask(self, interest: frozenset[BodyFluid]) -> int:
        return self.class_of_labels(frozenset(interest))


def train_powerset_logreg(X: np.ndarray,
                          labelsets: Sequence[frozenset[BodyFluid]],
                          cfg: TrainingConfig | None = None,
                          fluids: Sequence[BodyFluid] | None = None,
                          standardize: bool = False) -> PowersetLogReg:
    """Fit the multinomial model over the 2^k label power set.

    `fluids` fixes the class space (default: the fluids observed in the
    labels). Unobserved classes are estimated too; only the softmax
    normalization and the regularization act on them.
    """
    cfg = cfg or TrainingConfig()
    X = np.asarray(X, dtype=float)
    if fluids is None:
        observed: set[BodyFluid] = set()
        for labels in labelsets:
            observed |= labels
        fluids = sorted_fluids(observed)
    else:
        fluids = sorted_fluids(fluids)
    k = len(fluids)
    n_classes = 2 ** k
    order = {f: i for i, f in enumerate(fluids)}
    try:
        class_idx = np.array(
            [sum(1 << order[f] for f in labels) for labels in labelsets])
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} outside the fluid space") from None
    if X.shape[0] != class_idx.shape[0]:
        raise ValueError("X rows must match label count")
    if len(set(class_idx.tolist())) < 2:
        raise ValueError("training labels contain a single class")
    mean = scale = None
    Xs = X
    if standardize:
        Xs, mean, scale = _standardize(X)
    Z = np.concatenate([np.ones((X.shape[0], 1)), Xs], axis=1)
    d = Z.shape[1]
    x0 = np.zeros(d * (n_classes - 1))
    w = _minimize(
        lambda w: powerset_loss_and_grad(w, Z, class_idx, n_classes, cfg.l2_per_sample),
        x0,
        lambda w, v: powerset_hessp(w, v, Z, class_idx, n_classes, cfg.l2_per_sample),
        cfg)
    W = w.reshape(d, n_classes - 1)
    if standardize:
        W = np.column_stack([_unfold(W[:, j], mean, scale)
                             for j in range(n_classes - 1)])
    W = W / LN10
    return PowersetLogReg(fluids=tuple(fluids), intercepts=W[0],
                          coefficients=W[1:], feature_mean=mean,
                          feature_scale=scale)


def powerset_posteriors(model: PowersetLogReg, r: np.ndarray) -> np.ndarray:
    """Softmax class probabilities for one feature vector (sums to 1)."""
    r = np.asarray(r, dtype=float)
    logits10 = np.concatenate([[0.0], model.intercepts + r @ model.coefficients])
    return _softmax_rows((logits10 * LN10)[None, :])[0]


def score_powerset(model: PowersetLogReg, r: np.ndarray,
                   interest: frozenset[BodyFluid]) -> float:
    """P(classes intersecting the interest set) / P(classes disjoint from it)."""
    if not interest:
        raise ValueError("interest set must be non-empty")
    mask = model.interest_mask(frozenset(interest))
    P = powerset_posteriors(model, r)
    classes = np.arange(model.n_classes)
    h1 = (classes & mask) != 0
    num = float(P[h1].sum())
    den = float(P[~h1].sum())
    return num / max(den, SCORE_DENOMINATOR_FLOOR)


def score_powerset_many(model: PowersetLogReg, X: np.ndarray,
                        interest: frozenset[BodyFluid]) -> np.ndarray:
    if not interest:
        raise ValueError("interest set must be non-empty")
    mask = model.interest_mask(frozenset(interest))
    X = np.asarray(X, dtype=float)
    logits10 = np.concatenate(
        [np.zeros((X.shape[0], 1)), model.intercepts + X @ model.coefficients],
        axis=1)
    P = _softmax_rows(logits10 * LN10)
    h1 = (np.arange(model.n_classes) & mask) != 0
    num = P[:, h1].sum(axis=1)
    den = P[:, ~h1].sum(axis=1)
    return num / np.maximum(den, SCORE_DENOMINATOR_FLOOR)
