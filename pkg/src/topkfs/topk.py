"""Top-k magnitude selection and the masking primitives built on it.

``topk(w, k)`` keeps the ``k`` largest entries of ``w`` in magnitude and zeros
the rest. Ties in magnitude are broken in favour of the lower index so the
result is fully deterministic.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

__all__ = ["ActiveSet", "active_set", "apply_mask", "route_gradient", "topk", "as_weights"]


def as_weights(w) -> np.ndarray:
    """Validate a weight vector: 1-d, non-empty, finite. Returns a float64 array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgumentError(f"weight vector must be 1-d and non-empty, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidArgumentError("weight vector contains NaN or infinite entries")
    return w


@dataclass(frozen=True)
class ActiveSet:
    """Indices of the top-k magnitude weights, strictly ascending."""

    indices: tuple[int, ...]
    k_requested: int
    m: int

    def __post_init__(self):
        idx = self.indices
        if not all(map(operator.lt, idx, idx[1:])):
            raise InvalidArgumentError("active-set indices must be strictly ascending")
        if idx and (idx[0] < 0 or idx[-1] >= self.m):
            raise InvalidArgumentError(f"active-set index out of range for m={self.m}")

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in set(self.indices)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def mask(self) -> np.ndarray:
        """Boolean membership vector of length ``m``."""
        out = np.zeros(self.m, dtype=bool)
        out[self.array] = True
        return out

    @classmethod
    def full(cls, m: int) -> "ActiveSet":
        return cls(tuple(range(m)), m, m)


def _topk_indices(mag: np.ndarray, k: int) -> np.ndarray:
    # introselect finds the k-th largest magnitude in O(m); everything strictly
    # above it is kept, and the remaining slots go to the lowest-index entries
    # equal to it.
    m = mag.size
    if k >= m:
        return np.arange(m)
    thresh = np.partition(mag, m - k)[m - k]
    above = (mag > thresh).nonzero()[0]
    ties = (mag == thresh).nonzero()[0][: k - above.size]
    return np.sort(np.concatenate([above, ties]))


def active_set(w, k: int) -> ActiveSet:
    """Return the indices of the ``min(k, m)`` largest-magnitude entries of ``w``.

    Among equal magnitudes the lower index wins. ``k > m`` is clamped to ``m``
    with a warning.
    """
    w = as_weights(w)
    k = int(k)
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    m = w.size
    if k > m:
        log.warning("k=%d exceeds the number of features m=%d; clamping to m", k, m)
    idx = _topk_indices(np.abs(w), min(k, m))
    return ActiveSet(tuple(idx.tolist()), k, m)


def _check_set(s: ActiveSet, m: int):
    if s.m != m:
        raise InvalidArgumentError(f"active set built for m={s.m}, vector has length {m}")


def apply_mask(w, s: ActiveSet) -> np.ndarray:
    """Copy of ``w`` with every entry outside ``s`` set to zero."""
    w = as_weights(w)
    _check_set(s, w.size)
    out = np.zeros_like(w)
    idx = s.array
    out[idx] = w[idx]
    return out


def route_gradient(g_lead, s: ActiveSet, factor: float) -> np.ndarray:
    """Scale ``g_lead`` by ``factor`` on the active set and zero it elsewhere.

    This is how the top-k term's gradient reaches the one-to-one weights: the
    masked input is identically zero on inactive coordinates, so only active
    weights receive a contribution.
    """
    g = np.asarray(g_lead, dtype=float)
    if g.ndim != 1:
        raise InvalidArgumentError(f"gradient must be 1-d, got shape {g.shape}")
    _check_set(s, g.size)
    out = np.zeros_like(g)
    idx = s.array
    out[idx] = factor * g[idx]
    return out


def topk(w, k: int) -> np.ndarray:
    """``w`` with all but its ``k`` largest-magnitude entries zeroed."""
    return apply_mask(w, active_set(w, k))
