"""Central finite-difference checks of the analytic gradients.

Points are drawn so that the active set is stable under the probe step (a
clear gap between the k-th and (k+1)-th magnitudes) and, for networks, no
hidden pre-activation sits within reach of the ReLU kink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mlp
from .linear import Hyperparams, smooth_gradient, smooth_objective
from .topk import active_set, apply_mask

LINEAR_TOL = 1e-6
MLP_TOL = 1e-4


def rel_error(a, b) -> float:
    """||a - b|| / max(||a||, ||b||), 0 when both vanish."""
    a = np.ravel(a)
    b = np.ravel(b)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0.0 else float(np.linalg.norm(a - b) / den)


def central_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` (modified in place, then restored)."""
    g = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + eps
        fp = f()
        x[idx] = orig - eps
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2 * eps)
    return g


def has_gap(w, k, margin) -> bool:
    """True when the top-k set cannot change under perturbations of size ``margin``."""
    k = min(k, w.size)
    if k == w.size:
        return True
    mag = np.sort(np.abs(w))[::-1]
    return mag[k - 1] - mag[k] > 2 * margin


@dataclass
class CheckResult:
    component: str
    lambda_topk: float
    k: int
    rel_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.rel_error < self.tol


def linear_case(rng, n=5, m=3, lambda_topk=0.5, k=1, l2_squared=False, eps=1e-6) -> CheckResult:
    X = rng.standard_normal((n, m))
    y = rng.standard_normal(n)
    while True:
        w = rng.standard_normal(m)
        if has_gap(w, k, 10 * eps) and np.linalg.norm(w) > 1e-3:
            break
    h = Hyperparams(lambda_l2=0.3, lambda_l1=0.2, lambda_topk=lambda_topk, k=k, l2_squared=l2_squared)
    g = smooth_gradient(X, y, w, h)
    fd = central_difference(lambda: smooth_objective(X, y, w, h), w, eps)
    return CheckResult("linear", lambda_topk, k, rel_error(g, fd), LINEAR_TOL)


def _kink_free(params, X, k, lambda_topk, margin):
    vs = [params.w]
    if lambda_topk > 0:
        vs.append(apply_mask(params.w, active_set(params.w, k)))
    for v in vs:
        _, pre = mlp._run(params, X, v)
        if any(np.min(np.abs(Z)) < margin for Z in pre[:-1]):
            return False
    return True


def mlp_case(rng, task="regression", n=10, m=6, hidden=(8, 4), lambda_topk=0.5, k=1,
             eps=1e-6) -> CheckResult:
    X = rng.standard_normal((n, m))
    if task == "regression":
        y = rng.standard_normal(n)
    elif task == "binary":
        y = np.arange(n) % 2
    else:
        y = np.arange(n) % 3
    cfg = mlp.TrainConfig(h=Hyperparams(lambda_l2=0.1, lambda_l1=0.05, lambda_topk=lambda_topk, k=k),
                          hidden=hidden)
    for _ in range(1000):
        params = mlp.init_params(m, mlp.infer_outputs(y, task), hidden, task, rng)
        params.w = rng.standard_normal(m)
        for W in params.layers:
            W[-1] = 0.1 * rng.standard_normal(W.shape[1])
        if has_gap(params.w, k, 10 * eps) and _kink_free(params, X, k, lambda_topk, 1e-3):
            break
    _, grads = mlp.backward(params, X, y, cfg)
    analytic = np.concatenate([a.ravel() for a in grads.arrays()])
    numeric = np.concatenate([
        central_difference(lambda: mlp.loss(params, X, y, cfg), a, eps).ravel()
        for a in params.arrays()
    ])
    return CheckResult(f"mlp_{task}", lambda_topk, k, rel_error(analytic, numeric), MLP_TOL)


def run_suite(seed: int = 0, lambdas=(0.0, 0.5), linear_m: int = 3, mlp_m: int = 6,
              tasks=("regression", "binary", "multiclass")) -> list[CheckResult]:
    """Every branch combination: lambda_topk in ``lambdas``, k in {1, ceil(m/2), m}."""
    rng = np.random.default_rng(seed)
    out = []
    for lam in lambdas:
        for k in sorted({1, -(-linear_m // 2), linear_m}):
            for sq in (False, True):
                out.append(linear_case(rng, m=linear_m, lambda_topk=lam, k=k, l2_squared=sq))
    for task in tasks:
        for lam in lambdas:
            for k in sorted({1, -(-mlp_m // 2), mlp_m}):
                out.append(mlp_case(rng, task=task, m=mlp_m, lambda_topk=lam, k=k))
    return out
