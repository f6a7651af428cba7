"""Comparison, closed-set and open-set search protocols.

Also covers k-fold threshold calibration and curve averaging across folds
or gallery sets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from . import metrics
from .errors import (ClosedSetViolation, EmptyFold, EmptyInput, MissingTemplate, MixedKinds,
                     TooFewFolds)
from .similarity import canonical_measure, pair_scores, score_matrix
from .types import Curve, ScoreSet

log = logging.getLogger(__name__)

DEFAULT_LOG_RANGE = (1e-5, 1.0)
DEFAULT_N_POINTS = 100


class Pair(NamedTuple):
    a: str
    b: str
    same: bool
    fold: int = 0


@dataclass(frozen=True)
class ComparisonProtocol:
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(Pair(*p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        for n, p in enumerate(pairs):
            if p.a == p.b:
                raise ValueError(f"pair {n} compares template {p.a!r} with itself")
            if p.fold < 0:
                raise ValueError(f"pair {n} has negative fold {p.fold}")
        folds = {p.fold for p in pairs}
        if folds and folds != set(range(max(folds) + 1)):
            missing = sorted(set(range(max(folds) + 1)) - folds)
            raise EmptyFold(f"fold indices must be contiguous from 0; missing {missing}")

    @property
    def n_folds(self):
        return 1 + max((p.fold for p in self.pairs), default=-1)


@dataclass(frozen=True)
class SearchProtocol:
    """Named gallery sets searched by a common probe list.

    ``gallery_sets`` maps a set name to its template ids; ``mode`` is
    ``closed`` or ``open``.
    """

    gallery_sets: dict
    probes: tuple
    mode: str = "open"

    def __post_init__(self):
        if self.mode not in ("closed", "open"):
            raise ValueError("mode must be 'closed' or 'open'")
        object.__setattr__(self, "gallery_sets",
                           {k: tuple(v) for k, v in self.gallery_sets.items()})
        object.__setattr__(self, "probes", tuple(self.probes))


@dataclass(frozen=True)
class AggregatedCurve:
    mean_curve: Curve
    per_source: tuple
    grid: np.ndarray


@dataclass(frozen=True)
class SearchResult:
    gallery_set: str
    matrix: object
    ranks: list


class KFoldResult(NamedTuple):
    mean_acc: float
    per_fold: list
    thresholds: list
    train_folds: list


def _lookup(store, template_id, index):
    try:
        return store[template_id]
    except KeyError:
        raise MissingTemplate(template_id, index) from None


def run_comparison(p: ComparisonProtocol, store, measure="cosine"):
    """Score every pair and split the scores per fold into genuine/impostor."""
    measure = canonical_measure(measure)
    left = [_lookup(store, pair.a, n) for n, pair in enumerate(p.pairs)]
    right = [_lookup(store, pair.b, n) for n, pair in enumerate(p.pairs)]
    scores = pair_scores(left, right, measure)
    folds = []
    for f in range(p.n_folds):
        idx = [n for n, pair in enumerate(p.pairs) if pair.fold == f]
        genuine = [scores[n] for n in idx if p.pairs[n].same]
        impostor = [scores[n] for n in idx if not p.pairs[n].same]
        if not genuine or not impostor:
            raise EmptyFold(f"fold {f} has {len(genuine)} genuine and "
                            f"{len(impostor)} impostor pairs; need both")
        folds.append(ScoreSet(genuine, impostor, higher_is_better=True))
    return folds


def run_search(p: SearchProtocol, store, measure="cosine", tie_policy=metrics.DEFAULT_TIE_POLICY,
               batch=64, workers=1):
    """Score probes against each gallery set and rank every probe's mate."""
    measure = canonical_measure(measure)
    probes = [_lookup(store, t, n) for n, t in enumerate(p.probes)]
    results = []
    for name, ids in p.gallery_sets.items():
        gallery = [_lookup(store, t, n) for n, t in enumerate(ids)]
        enrolled = {t.subject_id for t in gallery}
        if p.mode == "closed":
            outside = [t.subject_id for t in probes if t.subject_id not in enrolled]
            if outside:
                raise ClosedSetViolation(outside)
        m = score_matrix(probes, gallery, measure, batch=batch, workers=workers)
        ranks = metrics.rank_probes(m, tie_policy=tie_policy)
        log.debug("gallery set %s: %d probes x %d templates", name, *m.shape)
        results.append(SearchResult(name, m, ranks))
    return results


def _eer_threshold(s):
    return metrics.eer(s)[1]


def _accuracy_threshold(s):
    return metrics.best_threshold(s)[1]


CALIBRATIONS = {"accuracy": _accuracy_threshold, "eer": _eer_threshold}


def kfold_accuracy(folds: Sequence[ScoreSet],
                   calibration: Union[str, Callable] = "accuracy") -> KFoldResult:
    """Cross-fold accuracy with thresholds fitted on the other folds.

    For each held-out fold the threshold comes from ``calibration`` applied
    to the union of the remaining folds; ``train_folds`` records which folds
    each threshold was fitted on.
    """
    if len(folds) < 2:
        raise TooFewFolds(f"k-fold evaluation needs at least 2 folds, got {len(folds)}")
    fit = CALIBRATIONS[calibration] if isinstance(calibration, str) else calibration
    orientations = {f.higher_is_better for f in folds}
    if len(orientations) != 1:
        raise ValueError("all folds must share one score orientation")
    per_fold, thresholds, train = [], [], []
    for k, held_out in enumerate(folds):
        others = [j for j in range(len(folds)) if j != k]
        union = ScoreSet(np.concatenate([folds[j].genuine for j in others]),
                         np.concatenate([folds[j].impostor for j in others]),
                         held_out.higher_is_better)
        t = fit(union)
        thresholds.append(float(t))
        train.append(others)
        per_fold.append(metrics.accuracy(held_out, t))
    return KFoldResult(float(np.mean(per_fold)), per_fold, thresholds, train)


def make_grid(spec="logarithmic", n_points=DEFAULT_N_POINTS, lo=None, hi=None):
    """Sample points for curve averaging: ``linear`` over [0, 1] or
    ``logarithmic`` over [1e-5, 1] by default."""
    if n_points < 1:
        raise ValueError("n_points must be positive")
    if spec in ("log", "logarithmic"):
        lo = DEFAULT_LOG_RANGE[0] if lo is None else lo
        hi = DEFAULT_LOG_RANGE[1] if hi is None else hi
        if lo <= 0:
            raise ValueError("logarithmic grid needs a positive lower bound")
        if n_points == 1:
            return np.array([hi], dtype=np.float64)
        return np.logspace(np.log10(lo), np.log10(hi), n_points)
    if spec == "linear":
        lo = 0.0 if lo is None else lo
        hi = 1.0 if hi is None else hi
        return np.linspace(lo, hi, n_points)
    raise ValueError(f"unknown grid spec {spec!r}")


def resample(c: Curve, grid):
    """Linear interpolation of ``c`` onto ``grid``, flat beyond its ends.

    Repeated x values (vertical steps) collapse to their best y: the highest
    for ROC, PR and CMC, the lowest for IET.
    """
    xs, inverse = np.unique(c.x, return_inverse=True)
    if c.kind == "IET":
        ys = np.full(xs.shape, np.inf)
        np.minimum.at(ys, inverse, c.y)
    else:
        ys = np.full(xs.shape, -np.inf)
        np.maximum.at(ys, inverse, c.y)
    return np.interp(grid, xs, ys)


def aggregate_curves(curves: Sequence[Curve], grid_spec="logarithmic",
                     n_points=DEFAULT_N_POINTS, grid=None) -> AggregatedCurve:
    """Pointwise mean of several curves on a common x grid.

    CMC curves are averaged rank by rank without interpolation; shorter
    curves hold their last value.
    """
    curves = list(curves)
    if not curves:
        raise EmptyInput("aggregate_curves needs at least one curve")
    kinds = {c.kind for c in curves}
    if len(kinds) != 1:
        raise MixedKinds(f"cannot average curves of kinds {sorted(kinds)}")
    kind = curves[0].kind
    if kind == "CMC":
        max_rank = int(max(c.x.max() for c in curves))
        grid = np.arange(1, max_rank + 1, dtype=np.float64)
        resampled = [resample(c, grid) for c in curves]
    else:
        grid = make_grid(grid_spec, n_points) if grid is None else np.asarray(grid, dtype=np.float64)
        resampled = [resample(c, grid) for c in curves]
    mean = np.mean(np.stack(resampled), axis=0)
    first = curves[0]
    mean_curve = Curve(kind, grid, mean, first.x_axis, first.y_axis,
                       n_folds_aggregated=sum(max(c.n_folds_aggregated, 1) for c in curves))
    return AggregatedCurve(mean_curve, tuple(curves), grid)
