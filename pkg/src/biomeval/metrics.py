"""Verification and identification metrics.

Verification (comparison protocol): ROC, PR, ACC, EER, AUC.
Closed-set identification: CMC.
Open-set identification: CMC and the FPIR/FNIR trade-off (IET).

Threshold sweeps use the distinct observed scores plus a +inf sentinel, so
every reported rate is an exact count ratio. A score ``s`` is accepted at
threshold ``t`` when ``s >= t``. For distance-oriented score sets the sweep
runs on negated scores and thresholds are reported back in the caller's
units (accept when ``s <= t``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import EmptyClass, NoMatedProbes, NoNonMatedProbes
from .types import Curve, ScoreSet, SimilarityMatrix

TIE_POLICIES = ("optimistic", "pessimistic")
DEFAULT_TIE_POLICY = "optimistic"
FNIR_CONVENTIONS = ("rank1", "threshold")
DEFAULT_FNIR_CONVENTION = "rank1"


class RocPoint(NamedTuple):
    threshold: float
    far: float
    tar: float


class IetPoint(NamedTuple):
    threshold: float
    fpir: float
    fnir: float


@dataclass(frozen=True)
class RankResult:
    probe_id: str
    mated: bool
    mate_rank: Optional[int]
    top_score: float
    mate_score: Optional[float]

    def __post_init__(self):
        if self.mated != (self.mate_rank is not None and self.mate_score is not None):
            raise ValueError("mated iff mate_rank and mate_score are present")
        if self.mate_rank is not None and self.mate_rank < 1:
            raise ValueError("mate_rank must be positive")


def _oriented(s):
    if s.higher_is_better:
        return s.genuine, s.impostor, 1.0
    return -s.genuine, -s.impostor, -1.0


def _count_ge(sorted_scores, thresholds):
    return sorted_scores.size - np.searchsorted(sorted_scores, thresholds, side="left")


def _sweep(genuine, impostor):
    """Descending thresholds (+inf first) with accept counts per class."""
    g = np.sort(genuine)
    i = np.sort(impostor)
    distinct = np.unique(np.concatenate([g, i]))[::-1]
    thresholds = np.concatenate([[np.inf], distinct])
    return thresholds, _count_ge(g, thresholds), _count_ge(i, thresholds)


def _require_both(s):
    if s.genuine.size == 0 or s.impostor.size == 0:
        raise EmptyClass(
            f"need at least one genuine and one impostor score "
            f"(got {s.genuine.size} genuine, {s.impostor.size} impostor)")


def roc(s: ScoreSet):
    """ROC curve (TAR vs FAR) and its operating points, threshold descending."""
    _require_both(s)
    g, i, sign = _oriented(s)
    thr, tg, ti = _sweep(g, i)
    far = ti / i.size
    tar = tg / g.size
    points = [RocPoint(float(sign * t), float(f), float(r)) for t, f, r in zip(thr, far, tar)]
    return Curve("ROC", far, tar), points


def auc(c: Curve) -> float:
    """Trapezoidal area under a ROC curve.

    With the distinct-score sweep this equals P(g > i) + P(g == i) / 2.
    """
    if c.kind != "ROC":
        raise ValueError(f"auc needs a ROC curve, got {c.kind}")
    x, y = c.x, c.y
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def _crossing(x0, y0, x1, y1):
    # symmetric in (x, y) so that swapping classes reproduces the value exactly
    d0 = x0 - y0
    d1 = x1 - y1
    return ((x0 + y0) * d1 - (x1 + y1) * d0) / (2.0 * (d1 - d0))


def eer(s: ScoreSet):
    """Equal error rate and the threshold where FAR meets FNR.

    When no swept threshold gives exact equality, the crossing is linearly
    interpolated between the two neighbouring operating points.

    Returns:
        ``(eer, threshold)``
    """
    _require_both(s)
    g, i, sign = _oriented(s)
    thr, tg, ti = _sweep(g, i)
    far = ti / i.size
    fnr = (g.size - tg) / g.size
    diff = far - fnr
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return float(far[k]), float(sign * thr[k])
    rate = _crossing(far[k - 1], fnr[k - 1], far[k], fnr[k])
    if np.isinf(thr[k - 1]):
        t = thr[k]
    else:
        alpha = -diff[k - 1] / (diff[k] - diff[k - 1])
        t = thr[k - 1] + alpha * (thr[k] - thr[k - 1])
    return float(rate), float(sign * t)


def precision_recall(s: ScoreSet) -> Curve:
    """Precision vs recall over the threshold sweep.

    Operating points with no accepted score report precision 1.0.
    """
    if s.genuine.size == 0:
        raise EmptyClass("precision/recall needs at least one genuine score")
    g, i, _ = _oriented(s)
    _, tp, fp = _sweep(g, i)
    predicted = tp + fp
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted == 0, 1.0, tp / np.maximum(predicted, 1))
    recall = tp / g.size
    return Curve("PR", recall, precision)


def best_threshold(s: ScoreSet):
    """Accuracy-maximising threshold; ties go to the lowest threshold.

    Returns:
        ``(accuracy, threshold)``
    """
    total = s.genuine.size + s.impostor.size
    if total == 0:
        raise EmptyClass("accuracy needs at least one score")
    g, i, sign = _oriented(s)
    thr, tg, ti = _sweep(g, i)
    correct = tg + (i.size - ti)
    best = correct.max()
    k = int(np.flatnonzero(correct == best)[-1])
    return float(best / total), float(sign * thr[k])


def accuracy(s: ScoreSet, threshold="best") -> float:
    """Fraction of correct accept/reject decisions at ``threshold``.

    ``threshold="best"`` picks the sweep threshold maximising accuracy.
    """
    if isinstance(threshold, str):
        if threshold != "best":
            raise ValueError("threshold must be a number or 'best'")
        return best_threshold(s)[0]
    total = s.genuine.size + s.impostor.size
    if total == 0:
        raise EmptyClass("accuracy needs at least one score")
    g, i, sign = _oriented(s)
    t = sign * float(threshold)
    correct = np.count_nonzero(g >= t) + np.count_nonzero(i < t)
    return correct / total


def rank_probes(m: SimilarityMatrix, tie_policy=DEFAULT_TIE_POLICY):
    """Rank each probe's mate within its row of the similarity matrix.

    Under the optimistic policy the mate's rank is one plus the number of
    gallery entries scoring strictly higher; the pessimistic policy also
    counts other entries that tie with the mate.
    """
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"tie_policy must be one of {TIE_POLICIES}")
    scores = m.scores
    n_probe, n_gallery = scores.shape
    column = {s: j for j, s in enumerate(m.gallery_subjects)}
    mate_col = np.array([column.get(s, -1) for s in m.probe_subjects], dtype=np.int64)
    mated = mate_col >= 0
    if n_gallery == 0:
        top = np.full(n_probe, -np.inf)
        ranks = np.zeros(n_probe, dtype=np.int64)
        mate_scores = np.zeros(n_probe)
    else:
        top = scores.max(axis=1)
        rows = np.arange(n_probe)
        mate_scores = scores[rows, np.where(mated, mate_col, 0)]
        if tie_policy == "optimistic":
            ranks = 1 + np.count_nonzero(scores > mate_scores[:, None], axis=1)
        else:
            ranks = np.count_nonzero(scores >= mate_scores[:, None], axis=1)
    results = []
    for r in range(n_probe):
        if mated[r]:
            results.append(RankResult(m.probe_ids[r], True, int(ranks[r]),
                                      float(top[r]), float(mate_scores[r])))
        else:
            results.append(RankResult(m.probe_ids[r], False, None, float(top[r]), None))
    return results


def _mated_ranks(results):
    ranks = np.array([r.mate_rank for r in results if r.mated], dtype=np.int64)
    if ranks.size == 0:
        raise NoMatedProbes("no mated probes: the probe set shares no subject with the gallery")
    return ranks


def cmc(results, max_rank: int) -> Curve:
    """Cumulative match characteristic for ranks 1..max_rank.

    Non-mated probes are excluded from the denominator.
    """
    if max_rank < 1:
        raise ValueError("max_rank must be positive")
    ranks = np.sort(_mated_ranks(results))
    ks = np.arange(1, max_rank + 1)
    hits = np.searchsorted(ranks, ks, side="right")
    return Curve("CMC", ks, hits / ranks.size)


def cmc_at(results, k: int) -> float:
    ranks = _mated_ranks(results)
    return float(np.count_nonzero(ranks <= k) / ranks.size)


def _split(results):
    mated = [r for r in results if r.mated]
    nonmated = [r for r in results if not r.mated]
    if not mated:
        raise NoMatedProbes("open-set IET needs at least one mated probe")
    if not nonmated:
        raise NoNonMatedProbes("open-set IET needs at least one non-mated probe")
    return mated, nonmated


def _mated_arrays(mated):
    rank = np.array([r.mate_rank for r in mated])
    score = np.array([r.mate_score for r in mated], dtype=np.float64)
    return rank, score


def _fnir_hits(rank, mate_score, thresholds, convention):
    if convention == "rank1":
        eligible = np.sort(mate_score[rank == 1])
    elif convention == "threshold":
        eligible = np.sort(mate_score)
    else:
        raise ValueError(f"FNIR convention must be one of {FNIR_CONVENTIONS}")
    return _count_ge(eligible, thresholds)


def iet(results, convention=DEFAULT_FNIR_CONVENTION):
    """FNIR vs FPIR trade-off for open-set search.

    A non-mated probe is a false positive when its top score reaches the
    threshold. Under the ``rank1`` convention a mated probe is a miss unless
    its mate is ranked first and scores at least the threshold; under
    ``threshold`` only the mate score is compared.

    Returns:
        ``(curve, points)`` with points ordered by descending threshold.
    """
    mated, nonmated = _split(results)
    rank, mate_score = _mated_arrays(mated)
    top_nm = np.sort(np.array([r.top_score for r in nonmated], dtype=np.float64))
    observed = [r.top_score for r in results]
    if convention == "threshold":
        observed += mate_score.tolist()
    thresholds = np.concatenate([[np.inf], np.unique(observed)[::-1]])
    fpir = _count_ge(top_nm, thresholds) / top_nm.size
    fnir = 1.0 - _fnir_hits(rank, mate_score, thresholds, convention) / len(mated)
    points = [IetPoint(float(t), float(a), float(b)) for t, a, b in zip(thresholds, fpir, fnir)]
    return Curve("IET", fpir, fnir), points


def identification_rates(results, threshold: float, convention=DEFAULT_FNIR_CONVENTION):
    """``(fpir, fnir)`` at one threshold."""
    mated, nonmated = _split(results)
    rank, mate_score = _mated_arrays(mated)
    top_nm = np.array([r.top_score for r in nonmated], dtype=np.float64)
    t = np.array([threshold], dtype=np.float64)
    fpir = np.count_nonzero(top_nm >= threshold) / top_nm.size
    fnir = 1.0 - _fnir_hits(rank, mate_score, t, convention)[0] / len(mated)
    return float(fpir), float(fnir)


def fnir_at_fpir(points, target: float, n_nonmated: int):
    """Lowest FNIR among operating points with FPIR <= ``target``.

    Returns None when ``target`` is below the FPIR resolution
    ``1 / n_nonmated`` and so cannot be measured.
    """
    if n_nonmated < 1 or target * n_nonmated < 1:
        return None
    ok = [p.fnir for p in points if p.fpir <= target]
    return float(min(ok)) if ok else None
