"""Feature selection by top-k of the trained feature weights, plus diagnostics."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import linear, mlp
from .data import Dataset, split, standardize
from .errors import InvalidArgumentError
from .evaluate import downstream_score, f1_selection
from .linear import Hyperparams
from .mlp import TrainConfig
from .topk import ActiveSet, active_set

log = logging.getLogger(__name__)

LINEAR_KINDS = ("lasso", "ridge", "enet")
MLP_KINDS = ("mlp_reg", "mlp_clf")
MODEL_KINDS = LINEAR_KINDS + MLP_KINDS


@dataclass(frozen=True)
class SelectConfig:
    """Everything that determines a selection run.

    ``k``, ``topk`` and ``seed`` override the matching fields inside
    ``linear`` and ``mlp``. With ``topk=False`` the top-k strength is forced
    to zero, giving the plain lead model.
    """

    k: int = 10
    topk: bool = True
    seed: int = 0
    standardize: bool = True
    linear: Hyperparams = field(
        default_factory=lambda: Hyperparams(lambda_l2=1.0, lambda_l1=1.0, lambda_topk=1.0))
    mlp: TrainConfig = field(
        default_factory=lambda: TrainConfig(h=Hyperparams(lambda_l2=1e-2, lambda_l1=1e-2, lambda_topk=1.0)))
    n_trees: int = 100
    train_ratio: float = 0.8

    def __post_init__(self):
        if int(self.k) < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {self.k}")


def linear_hyperparams(kind: str, config: SelectConfig) -> Hyperparams:
    h = replace(config.linear, k=config.k)
    if kind == "lasso":
        h = replace(h, lambda_l2=0.0)
    elif kind == "ridge":
        h = replace(h, lambda_l1=0.0)
    if not config.topk:
        h = replace(h, lambda_topk=0.0)
    return h


def train_config(config: SelectConfig) -> TrainConfig:
    h = replace(config.mlp.h, k=config.k)
    if not config.topk:
        h = replace(h, lambda_topk=0.0)
    return replace(config.mlp, h=h, seed=config.seed)


def fingerprint(obj) -> str:
    """SHA-256 over a canonical JSON rendering; stable across runs and platforms."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def config_fingerprint(kind: str, config: SelectConfig) -> str:
    d = asdict(config)
    d.pop("seed")
    d["mlp"].pop("seed")
    return fingerprint({"model_kind": kind, "config": d})


@dataclass
class SelectionReport:
    selected: ActiveSet
    weights: np.ndarray
    model_kind: str
    topk: bool
    k: int
    seed: int
    fingerprint: str
    timing: dict
    degenerate_all_zero: bool = False
    wall_seconds: float = 0.0

    def to_record(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "topk": self.topk,
            "k": self.k,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "selected": list(self.selected.indices),
            "weights": [float(v) for v in self.weights],
            "degenerate_all_zero": self.degenerate_all_zero,
            "timing": dict(self.timing),
        }


def _check_kind(d: Dataset, kind: str):
    if kind not in MODEL_KINDS:
        raise InvalidArgumentError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    if kind == "mlp_clf":
        if d.task == "regression":
            raise InvalidArgumentError("mlp_clf needs a classification dataset")
    elif d.task != "regression":
        raise InvalidArgumentError(f"{kind} needs a regression dataset, got {d.task}")


def fit_weights(d: Dataset, kind: str, config: SelectConfig) -> tuple[np.ndarray, dict]:
    """Train the chosen model on ``d`` and return its feature weights and work counters."""
    _check_kind(d, kind)
    if config.standardize:
        d, _, _ = standardize(d)
    if kind in LINEAR_KINDS:
        res = linear.fit(d.X, d.y, linear_hyperparams(kind, config), seed=config.seed)
        return res.weights, {"iterations": res.n_iter, "converged": res.converged}
    y = d.y
    if d.task == "regression":
        # unit-variance targets keep the penalty strengths comparable across datasets
        sd = float(np.std(y))
        y = y / sd if sd > 0 else y
    res = mlp.train(d.X, y, train_config(config), task=d.task)
    return res.params.w.copy(), {"epochs": res.epochs, "steps": res.steps,
                                 "final_loss": float(res.loss_trace[-1])}


def select(dataset: Dataset, model_kind: str, config: SelectConfig) -> SelectionReport:
    """Train, rank |w|, and keep the top k."""
    t0 = time.perf_counter()
    w, timing = fit_weights(dataset, model_kind, config)
    s = active_set(w, config.k)
    zero = not np.any(w)
    if zero:
        log.warning("%s produced an all-zero weight vector; selection falls back to the tie rule",
                    model_kind)
    return SelectionReport(
        selected=s, weights=w, model_kind=model_kind, topk=config.topk, k=config.k,
        seed=config.seed, fingerprint=config_fingerprint(model_kind, config), timing=timing,
        degenerate_all_zero=zero, wall_seconds=time.perf_counter() - t0)


def _map(fn, items, max_workers):
    if max_workers is None or max_workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------- stability --

def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    return 1.0 if not union else len(a & b) / len(union)


@dataclass
class StabilityResult:
    reports: list[SelectionReport]
    jaccard: np.ndarray
    mean_jaccard: float


def stability(dataset: Dataset, model_kind: str, config: SelectConfig, n_splits: int = 10,
              train_ratio: float = 0.8, max_workers: int | None = None) -> StabilityResult:
    """Select on ``n_splits`` random training splits and compare the selections.

    Split ``i`` and its training run both use seed ``config.seed + i``.
    Returns the pairwise Jaccard matrix and the mean over distinct pairs.
    """
    if n_splits < 2:
        raise InvalidArgumentError("n_splits must be >= 2")

    def one(i):
        seed_i = config.seed + i
        train, _ = split(dataset, train_ratio, seed_i)
        return select(train, model_kind, replace(config, seed=seed_i))

    reports = _map(one, range(n_splits), max_workers)
    sets = [r.selected.indices for r in reports]
    J = np.array([[jaccard(a, b) for b in sets] for a in sets])
    iu = np.triu_indices(n_splits, 1)
    return StabilityResult(reports, J, float(J[iu].mean()))


# ----------------------------------------------------------------- k sweep --

@dataclass
class SweepRow:
    k: int
    report: SelectionReport
    metrics: dict

    def to_record(self) -> dict:
        return {**self.report.to_record(), "metrics": dict(self.metrics)}


def evaluate_selection(train: Dataset, test: Dataset, selected, seed: int = 0,
                       n_trees: int = 100, informative=None) -> dict:
    """Downstream scores of ``selected`` columns, plus selection F1 when the truth is known."""
    cols = list(selected)
    out = downstream_score(train.columns(cols), train.y, test.columns(cols), test.y,
                           train.task, seed=seed, n_trees=n_trees)
    informative = train.informative if informative is None else informative
    if informative is not None:
        p, r, f1 = f1_selection(cols, informative)
        out.update(precision=p, recall=r, f1_selection=f1)
    return out


def sweep_k(dataset: Dataset, model_kind: str, config: SelectConfig, k_values,
            train_ratio: float | None = None, max_workers: int | None = None) -> list[SweepRow]:
    """Independent select + downstream evaluation for each k on one fixed split."""
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise InvalidArgumentError("k_values must be non-empty")
    if any(k < 1 for k in k_values):
        raise InvalidArgumentError("every k must be >= 1")
    ratio = config.train_ratio if train_ratio is None else train_ratio
    train, test = split(dataset, ratio, config.seed)

    def one(k):
        rep = select(train, model_kind, replace(config, k=k))
        return SweepRow(k, rep, evaluate_selection(train, test, rep.selected, config.seed, config.n_trees))

    return _map(one, k_values, max_workers)
