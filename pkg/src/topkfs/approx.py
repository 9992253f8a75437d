"""Empirical approximation study for the top-k sub-network.

A k-sparse target depends on ``k`` of ``m`` input coordinates, is bounded by
``eta`` and is ``eta / radius``-Lipschitz on the ball of that radius. For each
hidden width ``M`` a two-layer network with the top-k term is trained on
samples of the target, and the sup-norm error of the masked network is
measured on a dense grid over the informative coordinates.

The known worst-case rate shrinks like ``log(M') / M'**(1/k)`` up to an
unspecified constant ``C(k)``; only the trend in ``M`` is examined here, no
constant is computed or checked.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import mlp
from .errors import InvalidArgumentError
from .linear import Hyperparams
from .topk import active_set

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparseTarget:
    """``fn`` maps an (n, k) array of the informative coordinates to n values."""

    fn: object
    support: tuple[int, ...]
    m: int
    eta: float
    radius: float
    name: str = "target"

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def half_width(self) -> float:
        # the cube [-a, a]^k with a = R / sqrt(k) lies inside the radius-R ball
        return self.radius / np.sqrt(self.k)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.reduced(X[:, list(self.support)])

    def reduced(self, Xk) -> np.ndarray:
        try:
            out = np.asarray(self.fn(Xk), dtype=float)
        except Exception as exc:  # noqa: BLE001 - any failure here is an arity problem
            raise InvalidArgumentError(
                f"target {self.name!r} failed on a {Xk.shape[1]}-column input: {exc}") from exc
        if out.shape != (Xk.shape[0],):
            raise InvalidArgumentError(
                f"target {self.name!r} returned shape {out.shape} for {Xk.shape[0]} points "
                f"with {Xk.shape[1]} coordinates")
        return out


def _check_target(t: SparseTarget, grid):
    if t.k < 1 or len(set(t.support)) != t.k or min(t.support) < 0 or max(t.support) >= t.m:
        raise InvalidArgumentError(f"support {t.support} is not a valid subset of [0, {t.m})")
    if t.eta <= 0 or t.radius <= 0:
        raise InvalidArgumentError("eta and radius must be positive")
    vals = t.reduced(grid)
    if np.max(np.abs(vals)) > t.eta * (1 + 1e-9):
        raise InvalidArgumentError(f"|H| exceeds eta={t.eta} on the grid")
    # empirical Lipschitz ratio on a subsample of grid pairs
    rng = np.random.default_rng(0)
    i = rng.integers(0, grid.shape[0], 2000)
    j = rng.integers(0, grid.shape[0], 2000)
    d = np.linalg.norm(grid[i] - grid[j], axis=1)
    ok = d > 0
    if ok.any():
        ratio = np.max(np.abs(vals[i] - vals[j])[ok] / d[ok])
        if ratio > t.eta / t.radius * (1 + 1e-6):
            raise InvalidArgumentError(
                f"target is not eta/R-Lipschitz on the grid: ratio {ratio:.4g} > {t.eta / t.radius:.4g}")


def sinusoid_target(m: int = 20, support=(2, 7), radius: float = np.pi) -> SparseTarget:
    """sin of the sum of the supported coordinates; eta chosen to satisfy the Lipschitz bound."""
    k = len(support)
    eta = max(1.0, radius * np.sqrt(k))
    return SparseTarget(lambda Z: np.sin(Z.sum(axis=1)), tuple(support), m, eta, radius,
                        name=f"sin(sum x{list(support)})")


def constant_target(c: float, m: int = 10, support=(0,), eta: float = 1.0,
                    radius: float = 1.0) -> SparseTarget:
    return SparseTarget(lambda Z: np.full(Z.shape[0], float(c)), tuple(support), m, eta, radius,
                        name=f"const({c})")


def linear_target(m: int = 10, index: int = 3, slope: float = 1.0, radius: float = 1.0) -> SparseTarget:
    eta = abs(slope) * radius
    return SparseTarget(lambda Z: slope * Z[:, 0], (index,), m, eta, radius,
                        name=f"{slope}*x{index}")


def dense_grid(t: SparseTarget, grid_size: int) -> np.ndarray:
    a = t.half_width
    axis = np.linspace(-a, a, grid_size)
    return np.array(list(itertools.product(axis, repeat=t.k)))


@dataclass
class ApproxRow:
    width: int
    seed: int
    sup_error: float
    support_found: bool


@dataclass
class ApproxTable:
    target: str
    k: int
    rows: list[ApproxRow] = field(default_factory=list)

    def medians(self) -> dict[int, float]:
        widths = sorted({r.width for r in self.rows})
        return {M: float(np.median([r.sup_error for r in self.rows if r.width == M])) for M in widths}

    def non_increasing(self, slack: float = 0.0) -> bool:
        med = list(self.medians().values())
        return all(b <= a + slack for a, b in zip(med, med[1:]))


@dataclass(frozen=True)
class ApproxConfig:
    """Training schedule for each (width, seed) cell.

    The first phase trains with the penalties on until the support settles.
    The polish phase drops every penalty so that the measured error reflects
    what the width can represent rather than shrinkage bias. ``hidden_l2``
    breaks the scale trade-off between the one-to-one weights and the first
    dense layer, which otherwise lets wide networks ignore ``w``.
    """

    n_train: int = 1000
    epochs: int = 1000
    rate: float = 1e-2
    lambda_topk: float = 1.0
    lambda_l1: float = 1e-2
    lambda_l2: float = 0.0
    hidden_l2: float = 1e-3
    polish_epochs: int = 2000
    polish_rate: float = 1e-3
    margin: float = 1.1  # training cube half-width relative to the test grid's


def approx_study(target: SparseTarget, widths, seeds, grid_size: int = 41,
                 config: ApproxConfig | None = None) -> ApproxTable:
    """Sup-norm error of the trained top-k sub-network for each width and seed.

    The remaining ``m - k`` coordinates of every grid point are drawn once at
    random from the training distribution; a network that selected the right
    coordinates is unaffected by them.
    """
    config = config or ApproxConfig()
    widths = [int(M) for M in widths]
    if not widths or min(widths) < 1:
        raise InvalidArgumentError("widths must be positive integers")
    grid_k = dense_grid(target, grid_size)
    _check_target(target, grid_k)
    a = target.half_width
    table = ApproxTable(target.name, target.k)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        X = rng.uniform(-config.margin * a, config.margin * a, size=(config.n_train, target.m))
        y = target(X)
        grid = rng.uniform(-a, a, size=(grid_k.shape[0], target.m))
        grid[:, list(target.support)] = grid_k
        truth = target.reduced(grid_k)
        for M in widths:
            cfg = mlp.TrainConfig(
                h=Hyperparams(lambda_l1=config.lambda_l1, lambda_l2=config.lambda_l2,
                              lambda_topk=config.lambda_topk, k=target.k),
                epochs=config.epochs, rate=config.rate, seed=int(seed), hidden=(M,),
                batch_size=config.n_train, hidden_l2=config.hidden_l2)
            res = mlp.train(X, y, cfg, task="regression")
            if config.polish_epochs:
                # penalties off: the support is settled, now measure what the width can represent
                polish = replace(cfg, h=replace(cfg.h, lambda_l1=0.0, lambda_l2=0.0), hidden_l2=0.0,
                                 epochs=config.polish_epochs, rate=config.polish_rate)
                res = mlp.train(X, y, polish, task="regression", init=res.params)
            pred = mlp.forward(res.params, grid, masked=True, k=target.k)[:, 0]
            err = float(np.max(np.abs(truth - pred)))
            found = active_set(res.params.w, target.k).indices == tuple(sorted(target.support))
            table.rows.append(ApproxRow(M, int(seed), err, bool(found)))
            log.info("width=%d seed=%s sup_error=%.4g support_found=%s", M, seed, err, found)
    return table
