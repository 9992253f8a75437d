"""Feed-forward networks with a one-to-one input layer and a top-k sub-network.

The input first passes through ``X * w`` (a diagonal layer, one weight per
feature), then through dense layers with ReLU hidden activations. The top-k
sub-network reuses every dense layer but sees ``X * topk(w, k)``. Training
minimizes

    lead_loss + lambda_topk * masked_loss + lambda_l1 * ||w||_1 + lambda_l2 * ||w||_2

where the data losses are sample means (squared error for regression,
cross-entropy for classification). With ``lambda_topk = 0`` this is plain
deep feature selection (DFS).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .linear import Hyperparams
from .topk import ActiveSet, active_set, apply_mask, route_gradient

log = logging.getLogger(__name__)

TASKS = ("regression", "binary", "multiclass")
OUTPUT_ACTIVATION = {"regression": "linear", "binary": "sigmoid", "multiclass": "softmax"}
TASK_OF_ACTIVATION = {v: k for k, v in OUTPUT_ACTIVATION.items()}


@dataclass
class MlpParams:
    """One-to-one weights ``w`` plus dense layers with the bias as the last row."""

    w: np.ndarray
    layers: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        if len(self.layers) != len(self.activations):
            raise InvalidArgumentError("one activation tag per layer is required")
        fan_in = self.w.shape[0]
        for i, W in enumerate(self.layers):
            if W.ndim != 2 or W.shape[0] != fan_in + 1:
                raise InvalidArgumentError(
                    f"layer {i} has shape {W.shape}, expected ({fan_in + 1}, *)"
                )
            fan_in = W.shape[1]
        for a in self.activations[:-1]:
            if a != "relu":
                raise InvalidArgumentError(f"hidden activations must be relu, got {a!r}")
        if self.activations[-1] not in TASK_OF_ACTIVATION:
            raise InvalidArgumentError(f"unknown output activation {self.activations[-1]!r}")

    @property
    def task(self) -> str:
        return TASK_OF_ACTIVATION[self.activations[-1]]

    @property
    def n_features(self) -> int:
        return self.w.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.w, *self.layers]

    def copy(self) -> "MlpParams":
        return MlpParams(self.w.copy(), [W.copy() for W in self.layers], self.activations)

    def zeros_like(self) -> "MlpParams":
        return MlpParams(np.zeros_like(self.w), [np.zeros_like(W) for W in self.layers],
                         self.activations)


@dataclass(frozen=True)
class TrainConfig:
    h: Hyperparams = field(default_factory=Hyperparams)
    epochs: int = 300
    batch_size: int | None = None  # None: full batch below 1024 samples, else 128
    optimizer: str = "adam"
    rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden: tuple[int, ...] = (64, 32)  # depth L = len(hidden) + 1
    hidden_l2: float = 0.0  # optional weight decay on dense layers, off by default

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")
        if any(int(M) < 1 for M in self.hidden):
            raise InvalidArgumentError("hidden widths must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidArgumentError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if not self.rate > 0:
            raise InvalidArgumentError("rate must be > 0")

    @property
    def depth(self) -> int:
        return len(self.hidden) + 1


def init_params(m: int, n_out: int, hidden, task: str, rng) -> MlpParams:
    """Ones on the one-to-one layer, He-scaled Gaussians on dense layers, zero biases."""
    if task not in TASKS:
        raise InvalidArgumentError(f"unknown task {task!r}")
    widths = [m, *[int(M) for M in hidden], n_out]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        W = np.zeros((fan_in + 1, fan_out))
        W[:-1] = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append(W)
    acts = ("relu",) * len(hidden) + (OUTPUT_ACTIVATION[task],)
    return MlpParams(np.ones(m), layers, acts)


# ---------------------------------------------------------------- forward ---

def _affine(A, W):
    return A @ W[:-1] + W[-1]


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _output(z, act):
    if act == "linear":
        return z
    if act == "sigmoid":
        return _sigmoid(z)
    return _softmax(z)


def _run(params: MlpParams, X, v):
    """Forward pass from input scaling ``v``; returns (inputs per layer, pre-activations)."""
    A = X * v
    inputs, pre = [], []
    for i, W in enumerate(params.layers):
        inputs.append(A)
        Z = _affine(A, W)
        pre.append(Z)
        if i < len(params.layers) - 1:
            A = np.maximum(Z, 0.0)
    return inputs, pre


def _check_X(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.n_features:
        raise InvalidArgumentError(
            f"X has shape {X.shape}, network expects {params.n_features} features"
        )
    return X


def forward(params: MlpParams, X, masked: bool = False, k: int | None = None) -> np.ndarray:
    """Network output, shape (n, n_out). ``masked=True`` evaluates the top-k sub-network."""
    X = _check_X(params, X)
    v = params.w
    if masked:
        if k is None:
            raise InvalidArgumentError("k is required for the masked forward pass")
        v = apply_mask(v, active_set(v, k))
    _, pre = _run(params, X, v)
    return _output(pre[-1], params.activations[-1])


# ------------------------------------------------------------------- loss ---

def _targets(params, y):
    task = params.task
    y = np.asarray(y)
    if task == "regression":
        y = y.astype(float)
        return y.reshape(-1, 1) if y.ndim == 1 else y
    if y.ndim != 1:
        raise InvalidArgumentError("class labels must be a 1-d array of indices")
    n_out = params.layers[-1].shape[1]
    n_classes = 2 if task == "binary" else n_out
    if not np.all(np.equal(np.mod(y, 1), 0)) or y.min() < 0 or y.max() >= n_classes:
        raise InvalidArgumentError(f"labels must be integers in [0, {n_classes})")
    y = y.astype(np.intp)
    if task == "binary":
        return y.astype(float).reshape(-1, 1)
    return np.eye(n_out)[y]


def _data_loss(z, T, act):
    """Mean loss and its gradient w.r.t. the output pre-activation ``z``."""
    n = z.shape[0]
    if act == "linear":
        r = z - T
        return float((r * r).sum() / n), 2.0 * r / n
    if act == "sigmoid":
        # log(1+e^z) - t*z, stable form
        val = np.maximum(z, 0) - z * T + np.log1p(np.exp(-np.abs(z)))
        return float(val.sum() / n), (_sigmoid(z) - T) / n
    zs = z - z.max(axis=1, keepdims=True)
    logp = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
    return float(-(T * logp).sum() / n), (np.exp(logp) - T) / n


def _penalty(w, h: Hyperparams):
    val = h.lambda_l1 * np.abs(w).sum()
    g = h.lambda_l1 * np.sign(w)
    if h.lambda_l2 > 0:
        if h.l2_squared:
            val += h.lambda_l2 * (w @ w)
            g = g + 2.0 * h.lambda_l2 * w
        else:
            nrm = np.sqrt(w @ w)
            val += h.lambda_l2 * nrm
            if nrm > 0:
                g = g + h.lambda_l2 * w / nrm
    return float(val), g


def loss_components(params: MlpParams, X, y, config: TrainConfig, s: ActiveSet | None = None):
    """Dict with the lead loss, masked loss, penalty and weighted total."""
    X = _check_X(params, X)
    T = _targets(params, y)
    h = config.h
    act = params.activations[-1]
    lead, _ = _data_loss(_run(params, X, params.w)[1][-1], T, act)
    masked = 0.0
    if h.lambda_topk > 0:
        if s is None:
            s = active_set(params.w, h.k)
        masked, _ = _data_loss(_run(params, X, apply_mask(params.w, s))[1][-1], T, act)
    pen, _ = _penalty(params.w, h)
    decay = config.hidden_l2 * sum(float((W[:-1] ** 2).sum()) for W in params.layers)
    total = lead + h.lambda_topk * masked + pen + decay
    return {"lead": lead, "masked": masked, "penalty": pen + decay, "total": total}


def loss(params: MlpParams, X, y, config: TrainConfig) -> float:
    return loss_components(params, X, y, config)["total"]


# --------------------------------------------------------------- backward ---

def branch_gradients(params: MlpParams, X, T, v):
    """Loss and gradients of one branch whose input is ``X * v``.

    Returns ``(loss, grad_v, [grad_W...])``. ``T`` is the encoded target
    matrix. The gradient w.r.t. ``v`` is dense; the caller restricts it.
    """
    inputs, pre = _run(params, X, v)
    val, delta = _data_loss(pre[-1], T, params.activations[-1])
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        W = params.layers[i]
        A = inputs[i]
        grads[i] = np.vstack([A.T @ delta, delta.sum(axis=0, keepdims=True)])
        delta = delta @ W[:-1].T
        if i > 0:
            delta = delta * (pre[i - 1] > 0)
    grad_v = (X * delta).sum(axis=0)
    return val, grad_v, grads


def backward(params: MlpParams, X, y, config: TrainConfig, s: ActiveSet | None = None):
    """Gradient of :func:`loss`, shaped like ``params``; returns ``(loss, grads)``.

    Dense layers accumulate both branches since their weights are shared.
    The one-to-one weights receive the masked branch only on the active set.
    """
    X = _check_X(params, X)
    T = _targets(params, y)
    h = config.h
    lead, g_w, g_layers = branch_gradients(params, X, T, params.w)
    total = lead
    if h.lambda_topk > 0:
        if s is None:
            s = active_set(params.w, h.k)
        masked, gv_k, gl_k = branch_gradients(params, X, T, apply_mask(params.w, s))
        total += h.lambda_topk * masked
        g_w = g_w + route_gradient(gv_k, s, h.lambda_topk)
        g_layers = [a + h.lambda_topk * b for a, b in zip(g_layers, gl_k)]
    pen, g_pen = _penalty(params.w, h)
    total += pen
    g_w = g_w + g_pen
    if config.hidden_l2 > 0:
        for i, W in enumerate(params.layers):
            total += config.hidden_l2 * float((W[:-1] ** 2).sum())
            g = g_layers[i].copy()
            g[:-1] += 2.0 * config.hidden_l2 * W[:-1]
            g_layers[i] = g
    return total, MlpParams(g_w, g_layers, params.activations)


# -------------------------------------------------------------- optimizer ---

class Adam:
    def __init__(self, shapes, rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.rate, self.beta1, self.beta2, self.eps = rate, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, arrays, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


class Sgd:
    def __init__(self, shapes, rate=1e-2, **_):
        self.rate = rate

    def step(self, arrays, grads):
        for p, g in zip(arrays, grads):
            p -= self.rate * g


def make_optimizer(params: MlpParams, config: TrainConfig):
    shapes = [a.shape for a in params.arrays()]
    if config.optimizer == "adam":
        return Adam(shapes, config.rate, config.beta1, config.beta2, config.eps)
    return Sgd(shapes, config.rate)


# ------------------------------------------------------------------ train ---

@dataclass
class TrainResult:
    params: MlpParams
    loss_trace: np.ndarray
    epochs: int
    steps: int


def infer_outputs(y, task: str) -> int:
    if task == "regression":
        return 1
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise InvalidArgumentError("classification needs at least two classes present")
    if task == "binary":
        if classes.size != 2:
            raise InvalidArgumentError("binary task needs exactly two classes")
        return 1
    return int(y.max()) + 1


def resolve_batch_size(n: int, batch_size: int | None) -> int:
    if batch_size is None:
        return n if n < 1024 else 128
    return min(int(batch_size), n)


def train(X, y, config: TrainConfig, task: str = "regression",
          init: MlpParams | None = None) -> TrainResult:
    """Mini-batch training of the lead network and its top-k sub-network.

    The active set is recomputed from the current one-to-one weights before
    every parameter update and held fixed during it. Initialization and the
    per-epoch shuffles draw from one generator seeded by ``config.seed``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y.astype(float))):
        raise InvalidArgumentError("X and y must be finite")
    n, m = X.shape
    rng = np.random.default_rng(config.seed)
    n_out = infer_outputs(y, task)
    params = init.copy() if init is not None else init_params(m, n_out, config.hidden, task, rng)
    opt = make_optimizer(params, config)
    bs = resolve_batch_size(n, config.batch_size)
    h = config.h
    trace = np.empty(config.epochs)
    steps = 0
    # overflow shows up as a non-finite loss and is reported as NumericalError
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(n) if bs < n else None
            total, count = 0.0, 0
            for start in range(0, n, bs):
                if order is None:
                    Xb, yb = X, y
                else:
                    idx = order[start:start + bs]
                    Xb, yb = X[idx], y[idx]
                s = active_set(params.w, h.k) if h.lambda_topk > 0 else None
                val, grads = backward(params, Xb, yb, config, s)
                if not np.isfinite(val):
                    raise NumericalError(f"training loss became non-finite in epoch {epoch}", step=epoch)
                opt.step(params.arrays(), grads.arrays())
                steps += 1
                total += val * Xb.shape[0]
                count += Xb.shape[0]
            trace[epoch] = total / count
            if not all(np.all(np.isfinite(a)) for a in params.arrays()):
                raise NumericalError(f"parameters became non-finite in epoch {epoch}", step=epoch)
    return TrainResult(params, trace, config.epochs, steps)


def predict(params: MlpParams, X, masked: bool = False, k: int | None = None) -> np.ndarray:
    """Regression values, or class indices for classification networks."""
    out = forward(params, X, masked=masked, k=k)
    if params.task == "regression":
        return out[:, 0]
    if params.task == "binary":
        return (out[:, 0] > 0.5).astype(np.intp)
    return out.argmax(axis=1)


def with_topk(config: TrainConfig, lambda_topk: float) -> TrainConfig:
    return replace(config, h=replace(config.h, lambda_topk=lambda_topk))
