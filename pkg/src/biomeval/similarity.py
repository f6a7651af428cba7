"""Pairwise similarity and batched, parallel similarity matrices.

All scores come out of one kernel that accumulates over the feature
dimension in a fixed sequential order, elementwise, in float64. A score
therefore does not depend on which batch or worker produced it, and a
single :func:`similarity` call reproduces any matrix cell bit for bit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import MixedDimensions, ZeroNorm
from .types import SimilarityMatrix

MEASURES = ("cosine", "negative_euclidean")
_ALIASES = {"neg-euclidean": "negative_euclidean", "neg_euclidean": "negative_euclidean"}


def canonical_measure(m):
    m = _ALIASES.get(m, m)
    if m not in MEASURES:
        raise ValueError(f"unknown similarity measure {m!r}; choose from {MEASURES}")
    return m


def default_workers():
    env = os.environ.get("BIOMEVAL_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _as_matrix(vectors):
    rows = [np.asarray(getattr(v, "vector", v), dtype=np.float64).reshape(-1) for v in vectors]
    if not rows:
        return np.zeros((0, 0))
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise MixedDimensions(f"vectors disagree on dim: {sorted(dims)}")
    return np.stack(rows)


def _sq_norms(mt):
    """Sequential sum of squares per column of a (dim, n) array."""
    acc = np.zeros(mt.shape[1])
    for k in range(mt.shape[0]):
        acc += mt[k] * mt[k]
    return acc


def _block(pt, gt, measure, pnorm=None, gnorm=None):
    """Scores for probe columns ``pt`` (dim, b) against gallery ``gt`` (dim, g)."""
    b, g = pt.shape[1], gt.shape[1]
    acc = np.zeros((b, g))
    tmp = np.empty((b, g))
    if measure == "cosine":
        for k in range(pt.shape[0]):
            np.multiply(pt[k][:, None], gt[k][None, :], out=tmp)
            np.add(acc, tmp, out=acc)
        np.divide(acc, np.multiply(pnorm[:, None], gnorm[None, :]), out=acc)
        np.clip(acc, -1.0, 1.0, out=acc)
    else:
        for k in range(pt.shape[0]):
            np.subtract(pt[k][:, None], gt[k][None, :], out=tmp)
            np.multiply(tmp, tmp, out=tmp)
            np.add(acc, tmp, out=acc)
        np.sqrt(acc, out=acc)
        np.negative(acc, out=acc)
    return acc


def similarity(a, b, measure="cosine"):
    """Similarity of two feature vectors; higher means more alike.

    ``cosine`` lies in [-1, 1]; ``negative_euclidean`` is ``-||a - b||``.
    """
    measure = canonical_measure(measure)
    a = np.asarray(getattr(a, "vector", a), dtype=np.float64).reshape(-1, 1)
    b = np.asarray(getattr(b, "vector", b), dtype=np.float64).reshape(-1, 1)
    if a.shape != b.shape:
        raise MixedDimensions(f"dim {a.shape[0]} != {b.shape[0]}")
    if measure == "cosine":
        na, nb = np.sqrt(_sq_norms(a)), np.sqrt(_sq_norms(b))
        if na[0] == 0 or nb[0] == 0:
            raise ZeroNorm("cosine similarity of a zero-norm vector")
        return float(_block(a, b, measure, na, nb)[0, 0])
    return float(_block(a, b, measure)[0, 0])


def score_rows(probe_vectors, gallery_vectors, measure="cosine", batch=64, workers=1):
    """Dense probe × gallery float64 score array.

    Rows are split into blocks of ``batch`` and handed to ``workers``
    threads; each block writes only its own output rows.
    """
    measure = canonical_measure(measure)
    if batch < 1 or workers < 1:
        raise ValueError("batch and workers must be positive")
    p = _as_matrix(probe_vectors)
    g = _as_matrix(gallery_vectors)
    out = np.zeros((p.shape[0], g.shape[0]))
    if out.size == 0:
        return out
    if p.shape[1] != g.shape[1]:
        raise MixedDimensions(f"probe dim {p.shape[1]} != gallery dim {g.shape[1]}")
    pt = np.ascontiguousarray(p.T)
    gt = np.ascontiguousarray(g.T)

    pnorm = gnorm = None
    if measure == "cosine":
        pnorm = np.sqrt(_sq_norms(pt))
        gnorm = np.sqrt(_sq_norms(gt))
        zero_p = np.flatnonzero(pnorm == 0)
        zero_g = np.flatnonzero(gnorm == 0)
        if zero_p.size:
            raise ZeroNorm(f"zero-norm probe vector at (row {int(zero_p[0])}, col 0)")
        if zero_g.size:
            raise ZeroNorm(f"zero-norm gallery vector at (row 0, col {int(zero_g[0])})")

    def run(start):
        stop = min(start + batch, p.shape[0])
        sub_norm = None if pnorm is None else pnorm[start:stop]
        out[start:stop] = _block(pt[:, start:stop], gt, measure, sub_norm, gnorm)

    starts = range(0, p.shape[0], batch)
    if workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    return out


def score_matrix(probes, gallery, measure="cosine", batch=64, workers=1):
    """Score every probe template against every gallery template.

    The result is bitwise identical for any ``batch`` and ``workers``.
    """
    scores = score_rows(probes, gallery, measure, batch=batch, workers=workers)
    return SimilarityMatrix(
        probe_ids=[t.template_id for t in probes],
        gallery_ids=[t.template_id for t in gallery],
        scores=scores,
        probe_subjects=[t.subject_id for t in probes],
        gallery_subjects=[t.subject_id for t in gallery],
    )


def pair_scores(left, right, measure="cosine"):
    """Scores for aligned pairs ``(left[n], right[n])``.

    Uses the same accumulation order as :func:`similarity`, so each value
    matches a direct call bit for bit.
    """
    measure = canonical_measure(measure)
    if len(left) != len(right):
        raise ValueError("left and right must have the same length")
    if not left:
        return np.zeros(0)
    lt = np.ascontiguousarray(_as_matrix(left).T)
    rt = np.ascontiguousarray(_as_matrix(right).T)
    if lt.shape[0] != rt.shape[0]:
        raise MixedDimensions(f"dim {lt.shape[0]} != {rt.shape[0]}")
    acc = np.zeros(lt.shape[1])
    if measure == "cosine":
        ln, rn = np.sqrt(_sq_norms(lt)), np.sqrt(_sq_norms(rt))
        bad = np.flatnonzero((ln == 0) | (rn == 0))
        if bad.size:
            raise ZeroNorm(f"zero-norm vector in pair {int(bad[0])}")
        for k in range(lt.shape[0]):
            acc += lt[k] * rt[k]
        return np.clip(acc / (ln * rn), -1.0, 1.0)
    for k in range(lt.shape[0]):
        d = lt[k] - rt[k]
        acc += d * d
    return -np.sqrt(acc)
