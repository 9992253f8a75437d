"""Proximal-gradient solvers for penalized least squares with a top-k term.

The objective minimized by :func:`fit` is::

    ||y - Xw||^2 + lambda_topk * ||y - X topk(w, k)||^2
        + lambda_l1 * ||w||_1 + lambda_l2 * ||w||_2

Setting ``lambda_topk = 0`` gives the plain elastic net; ``lambda_l2 = 0``
gives Lasso; ``lambda_l1 = 0`` gives ridge. The l2 term is the norm itself by
default; pass ``l2_squared=True`` for the conventional squared form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .topk import ActiveSet, active_set, apply_mask, route_gradient

log = logging.getLogger(__name__)

__all__ = [
    "Hyperparams",
    "LinearFit",
    "soft_threshold",
    "objective_value",
    "smooth_objective",
    "smooth_gradient",
    "lipschitz_bound",
    "fit",
    "predict",
]

MAX_HALVINGS = 60


@dataclass(frozen=True)
class Hyperparams:
    lambda_l2: float = 0.0
    lambda_l1: float = 0.0
    lambda_topk: float = 0.0
    k: int = 1
    max_iters: int = 10_000
    tol: float = 1e-8
    step: float | None = None  # None: 1/L from a power-iteration estimate
    backtracking: bool = True
    l2_squared: bool = False

    def __post_init__(self):
        for name in ("lambda_l2", "lambda_l1", "lambda_topk"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v}")
        if int(self.k) < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.tol >= 0:
            raise InvalidArgumentError("tol must be >= 0")
        if self.step is not None and not self.step > 0:
            raise InvalidArgumentError("step must be > 0")


@dataclass
class LinearFit:
    weights: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    active_set_final: ActiveSet
    n_iter: int = 0
    step: float = 0.0
    extra: dict = field(default_factory=dict)


def soft_threshold(x, t):
    """sign(x) * max(|x| - t, 0), elementwise."""
    if np.any(np.asarray(t) < 0):
        raise InvalidArgumentError("threshold must be >= 0")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _check(X, y, w=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if w is not None:
        w = np.asarray(w, dtype=float)
        if w.shape != (X.shape[1],):
            raise InvalidArgumentError(f"w has shape {w.shape}, expected ({X.shape[1]},)")
    return X, y, w


def _l2_value(w, h):
    return h.lambda_l2 * (w @ w if h.l2_squared else np.sqrt(w @ w))


def _l2_grad(w, h):
    if h.l2_squared:
        return 2.0 * h.lambda_l2 * w
    nrm = np.sqrt(w @ w)
    if nrm == 0.0:
        return np.zeros_like(w)
    return h.lambda_l2 * w / nrm


def smooth_objective(X, y, w, h: Hyperparams) -> float:
    """Everything except the l1 term, which the proximal step handles."""
    X, y, w = _check(X, y, w)
    r = y - X @ w
    val = r @ r
    if h.lambda_topk > 0:
        rk = y - X @ apply_mask(w, active_set(w, h.k))
        val += h.lambda_topk * (rk @ rk)
    if h.lambda_l2 > 0:
        val += _l2_value(w, h)
    return float(val)


def objective_value(X, y, w, h: Hyperparams) -> float:
    X, y, w = _check(X, y, w)
    return smooth_objective(X, y, w, h) + h.lambda_l1 * float(np.abs(w).sum())


def smooth_gradient(X, y, w, h: Hyperparams, s: ActiveSet | None = None) -> np.ndarray:
    """Gradient of :func:`smooth_objective` with the active set held fixed.

    The top-k branch only touches active coordinates: its gradient is the
    least-squares gradient evaluated at the masked weights, restricted to the
    active columns and scaled by ``lambda_topk``.
    """
    X, y, w = _check(X, y, w)
    g = 2.0 * (X.T @ (X @ w - y))
    if h.lambda_topk > 0:
        if s is None:
            s = active_set(w, h.k)
        idx = s.array
        g_k = np.zeros_like(w)
        g_k[idx] = 2.0 * (X[:, idx].T @ (X[:, idx] @ w[idx] - y))
        g = g + route_gradient(g_k, s, h.lambda_topk)
    if h.lambda_l2 > 0:
        g = g + _l2_grad(w, h)
    return g


def lipschitz_bound(X, lambda_topk=0.0, n_power_iter=100, seed=0) -> float:
    """Estimate of the gradient Lipschitz constant 2(1+lambda_topk)*||X^T X||_2."""
    X = np.asarray(X, dtype=float)
    v = np.random.default_rng(seed).standard_normal(X.shape[1])
    lam = 0.0
    for _ in range(n_power_iter):
        u = X.T @ (X @ v)
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            return 1.0
        lam_new = nrm / np.linalg.norm(v)
        v = u / nrm
        if abs(lam_new - lam) <= 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # power iteration approaches from below; pad slightly
    return 2.0 * (1.0 + lambda_topk) * lam * 1.01


def _prox_step(X, y, w, t, h, s):
    z = w - t * smooth_gradient(X, y, w, h, s)
    return soft_threshold(z, t * h.lambda_l1)


def fit(X, y, h: Hyperparams, seed: int = 0, w0=None) -> LinearFit:
    """Proximal gradient with optional backtracking.

    Each iteration ranks the current weights, takes a gradient step on the
    smooth part with that active set frozen, then soft-thresholds. With
    backtracking the step is halved until the full objective does not
    increase; if no step achieves that, the iterate is stationary and the
    solver stops. ``seed`` only drives the power-iteration start vector.
    """
    X, y, _ = _check(X, y)
    n, m = X.shape
    if n < 1 or m < 1:
        raise InvalidArgumentError("need at least one sample and one feature")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("X and y must be finite")

    t0 = h.step if h.step is not None else 1.0 / lipschitz_bound(X, h.lambda_topk, seed=seed)
    w = np.zeros(m) if w0 is None else np.array(w0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        # divergence surfaces as a non-finite objective and a NumericalError below
        return _iterate(X, y, w, t0, h)


def _iterate(X, y, w, t0, h) -> LinearFit:
    obj = objective_value(X, y, w, h)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, h.max_iters + 1):
        s = active_set(w, h.k) if h.lambda_topk > 0 else None
        t = t0
        w_new = _prox_step(X, y, w, t, h, s)
        obj_new = objective_value(X, y, w_new, h)
        if h.backtracking:
            halvings = 0
            while not obj_new <= obj and halvings < MAX_HALVINGS:
                t *= 0.5
                halvings += 1
                w_new = _prox_step(X, y, w, t, h, s)
                obj_new = objective_value(X, y, w_new, h)
            if not obj_new <= obj:
                # no descent direction at any tested step: stationary
                converged = True
                break
        if not np.isfinite(obj_new):
            raise NumericalError(f"objective became non-finite at iteration {it}", step=it)
        delta = abs(obj - obj_new)
        w, obj = w_new, obj_new
        trace.append(obj)
        if delta < h.tol * max(1.0, abs(obj)):
            converged = True
            break
    if not converged:
        log.info("linear fit stopped at max_iters=%d without meeting tol", h.max_iters)
    return LinearFit(
        weights=w,
        objective_trace=np.asarray(trace),
        converged=converged,
        active_set_final=active_set(w, h.k),
        n_iter=it,
        step=t0,
    )


def predict(X, w) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.ndim != 2 or w.shape != (X.shape[1],):
        raise InvalidArgumentError(f"shape mismatch: X {X.shape}, w {w.shape}")
    return X @ w
