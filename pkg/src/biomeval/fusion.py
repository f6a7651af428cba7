"""Set-based template fusion.

Built-in methods are ``mean`` and ``weighted_mean``; further methods can be
added with :func:`register_fusion`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BadWeights, DuplicateName, EmptySet, MixedDimensions, ReservedName, ZeroNorm

BUILTIN_FUSIONS = ("mean", "weighted_mean")
NORMALIZE_CHOICES = ("none", "before", "after")

_registry: dict = {}


@dataclass(frozen=True)
class FusionMethod:
    kind: str = "mean"
    weights: Optional[Sequence[float]] = None


@dataclass(frozen=True)
class FusionHandle:
    """Returned by :func:`register_fusion`; lets callers unregister again."""

    name: str

    def unregister(self):
        _registry.pop(self.name, None)


def register_fusion(name: str, fn: Callable) -> FusionHandle:
    """Register ``fn(stack, weights) -> vector`` under ``name``.

    ``stack`` is an ``(n, dim)`` float64 array; ``weights`` is an
    ``(n,)`` array or None. Built-in names cannot be overridden.
    """
    if name in BUILTIN_FUSIONS:
        raise ReservedName(f"fusion name {name!r} is reserved")
    if name in _registry:
        raise DuplicateName(f"fusion {name!r} is already registered")
    if not callable(fn):
        raise TypeError("fusion function must be callable")
    _registry[name] = fn
    return FusionHandle(name)


def registered_fusions():
    return BUILTIN_FUSIONS + tuple(sorted(_registry))


def _stack(vectors):
    if len(vectors) == 0:
        raise EmptySet("cannot fuse an empty set of vectors")
    arrays = [np.asarray(getattr(v, "vector", v), dtype=np.float64).reshape(-1) for v in vectors]
    dims = {a.shape[0] for a in arrays}
    if len(dims) != 1:
        raise MixedDimensions(f"vectors disagree on dim: {sorted(dims)}")
    return np.stack(arrays)


def _l2(stack):
    norms = np.sqrt(np.sum(stack * stack, axis=-1, keepdims=True))
    if np.any(norms == 0):
        raise ZeroNorm("cannot L2-normalise a zero vector")
    return stack / norms


def _check_weights(weights, n):
    if weights is None:
        raise BadWeights("weighted_mean requires weights")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != n:
        raise BadWeights(f"got {w.shape[0]} weights for {n} vectors")
    if not np.isfinite(w).all() or np.any(w < 0):
        raise BadWeights("weights must be finite and non-negative")
    if w.sum() <= 0:
        raise BadWeights("weights sum to zero")
    return w


def _mean(stack):
    # column-wise sort makes the sum, hence the output, independent of input order
    return np.sort(stack, axis=0).sum(axis=0) / stack.shape[0]


def _weighted_mean(stack, w):
    return (stack * w[:, None]).sum(axis=0) / w.sum()


def fuse(vectors, method="mean", weights=None, normalize="none", dtype=np.float32):
    """Fuse a non-empty set of feature vectors into one vector (float32 by default).

    Args:
        vectors: feature vectors (arrays or :class:`Template` objects) of one dim.
        method: ``"mean"``, ``"weighted_mean"``, a registered name, or a
            :class:`FusionMethod`.
        weights: per-vector non-negative weights for ``weighted_mean``.
        normalize: ``"none"``, or L2-normalise ``"before"`` or ``"after"`` fusing.
        dtype: output precision; fusion itself always runs in float64.
    """
    if isinstance(method, FusionMethod):
        weights = method.weights if weights is None else weights
        method = method.kind
    if normalize not in NORMALIZE_CHOICES:
        raise ValueError(f"normalize must be one of {NORMALIZE_CHOICES}")
    stack = _stack(vectors)
    if normalize == "before":
        stack = _l2(stack)

    if method == "mean":
        out = _mean(stack)
    elif method == "weighted_mean":
        out = _weighted_mean(stack, _check_weights(weights, stack.shape[0]))
    elif method in _registry:
        w = None if weights is None else np.asarray(weights, dtype=np.float64)
        out = np.asarray(_registry[method](stack, w), dtype=np.float64).reshape(-1)
        if out.shape[0] != stack.shape[1]:
            raise MixedDimensions(
                f"fusion {method!r} returned dim {out.shape[0]}, expected {stack.shape[1]}")
    else:
        raise KeyError(f"unknown fusion method {method!r}")

    if normalize == "after":
        out = _l2(out[None, :])[0]
    return out.astype(dtype)
