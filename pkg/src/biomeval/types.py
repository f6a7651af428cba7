"""Shared domain vocabulary: templates, score sets, similarity matrices, curves.

Everything here is immutable after construction. Vectors are stored as
read-only float32 arrays; scores are stored as float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CURVE_KINDS = ("ROC", "PR", "CMC", "IET")

DEFAULT_AXES = {
    "ROC": ("FAR", "TAR"),
    "PR": ("recall", "precision"),
    "CMC": ("rank", "identification rate"),
    "IET": ("FPIR", "FNIR"),
}


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


def check_id(value, what="id"):
    """Validate an opaque identifier (subject or template id) and return it."""
    if not isinstance(value, str) or not value:
        raise ValueError(f"{what} must be a non-empty string, got {value!r}")
    if value != value.strip():
        raise ValueError(f"{what} {value!r} has leading/trailing whitespace")
    return value


@dataclass(frozen=True, eq=False)
class Template:
    """A subject-labelled feature vector, the unit of enrollment.

    Construction does not validate; use :func:`validate_template` to get the
    full list of invariant violations.
    """

    template_id: str
    subject_id: str
    vector: np.ndarray
    media_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vector", _frozen(self.vector, np.float32))
        object.__setattr__(self, "media_ids", tuple(self.media_ids))

    @property
    def dim(self):
        return int(self.vector.shape[0])

    def __eq__(self, other):
        if not isinstance(other, Template):
            return NotImplemented
        return (
            self.template_id == other.template_id
            and self.subject_id == other.subject_id
            and self.media_ids == other.media_ids
            and self.vector.shape == other.vector.shape
            and self.vector.tobytes() == other.vector.tobytes()
        )

    def __hash__(self):
        return hash((self.template_id, self.subject_id, self.vector.tobytes()))

    def __repr__(self):
        return (f"Template({self.template_id!r}, subject={self.subject_id!r}, "
                f"dim={self.dim})")


def validate_template(t):
    """Return every invariant violation of ``t`` as a list of messages.

    An empty list means the template is well formed.
    """
    problems = []
    for name in ("template_id", "subject_id"):
        value = getattr(t, name, None)
        if not isinstance(value, str) or not value:
            problems.append(f"{name} must be a non-empty string")
        elif value != value.strip():
            problems.append(f"{name} has leading/trailing whitespace")
    vec = np.asarray(t.vector)
    if vec.ndim != 1 or vec.size == 0:
        problems.append("dim must be ≥ 1")
    else:
        bad = np.flatnonzero(~np.isfinite(vec))
        for i in bad:
            problems.append(f"non-finite component at index {int(i)}")
    media = list(t.media_ids)
    if len(set(media)) != len(media):
        dupes = sorted({m for m in media if media.count(m) > 1})
        problems.append("duplicate media ids: " + ", ".join(map(str, dupes)))
    return problems


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Labelled genuine/impostor scores for verification metrics."""

    genuine: np.ndarray
    impostor: np.ndarray
    higher_is_better: bool = True

    def __post_init__(self):
        g = _frozen(self.genuine, np.float64)
        i = _frozen(self.impostor, np.float64)
        if not (np.isfinite(g).all() and np.isfinite(i).all()):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "genuine", g)
        object.__setattr__(self, "impostor", i)
        object.__setattr__(self, "higher_is_better", bool(self.higher_is_better))

    def __eq__(self, other):
        if not isinstance(other, ScoreSet):
            return NotImplemented
        return (self.higher_is_better == other.higher_is_better
                and np.array_equal(self.genuine, other.genuine)
                and np.array_equal(self.impostor, other.impostor))

    def __repr__(self):
        return (f"ScoreSet(n_genuine={self.genuine.size}, n_impostor={self.impostor.size}, "
                f"higher_is_better={self.higher_is_better})")


def orient_scores(s):
    """Return ``s`` oriented so that higher scores mean "more similar".

    Distance scores (``higher_is_better=False``) are negated.
    """
    if s.higher_is_better:
        return s
    return ScoreSet(-s.genuine, -s.impostor, higher_is_better=True)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Probe × gallery score grid with id and subject labels on both axes."""

    probe_ids: tuple
    gallery_ids: tuple
    scores: np.ndarray
    probe_subjects: tuple
    gallery_subjects: tuple

    def __post_init__(self):
        for name in ("probe_ids", "gallery_ids", "probe_subjects", "gallery_subjects"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        scores = np.array(self.scores, dtype=np.float64, copy=True)
        if scores.size == 0:
            scores = scores.reshape(len(self.probe_ids), len(self.gallery_ids))
        shape = (len(self.probe_ids), len(self.gallery_ids))
        if scores.shape != shape:
            raise ValueError(f"score grid shape {scores.shape} != {shape}")
        if len(self.probe_subjects) != shape[0] or len(self.gallery_subjects) != shape[1]:
            raise ValueError("subject labels must match the grid dimensions")
        if len(set(self.gallery_subjects)) != len(self.gallery_subjects):
            raise ValueError("gallery has duplicate subjects; fuse to one template per subject")
        if not np.isfinite(scores).all():
            raise ValueError("similarity scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def shape(self):
        return self.scores.shape


@dataclass(frozen=True, eq=False)
class Curve:
    """An ordered point list with axis semantics.

    ``x`` is sorted non-decreasing. ROC and CMC have non-decreasing ``y``,
    IET has non-increasing ``y``. Rates lie in [0, 1]; CMC ``x`` holds
    positive integer ranks.
    """

    kind: str
    x: np.ndarray
    y: np.ndarray
    x_axis: str = ""
    y_axis: str = ""
    n_folds_aggregated: int = 1

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        x = _frozen(self.x, np.float64)
        y = _frozen(self.y, np.float64)
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        dx, dy = DEFAULT_AXES[self.kind]
        object.__setattr__(self, "x_axis", self.x_axis or dx)
        object.__setattr__(self, "y_axis", self.y_axis or dy)
        if self.n_folds_aggregated < 0:
            raise ValueError("n_folds_aggregated must be non-negative")
        for msg in curve_violations(self):
            raise ValueError(msg)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __len__(self):
        return int(self.x.size)

    def __eq__(self, other):
        if not isinstance(other, Curve):
            return NotImplemented
        return (self.kind == other.kind and self.x_axis == other.x_axis
                and self.y_axis == other.y_axis
                and self.n_folds_aggregated == other.n_folds_aggregated
                and np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y))

    def __repr__(self):
        return f"Curve({self.kind}, n={len(self)}, {self.y_axis} vs {self.x_axis})"


def curve_violations(c):
    problems = []
    x, y = c.x, c.y
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        problems.append("curve points must be finite")
        return problems
    if np.any(np.diff(x) < 0):
        problems.append("curve x values must be non-decreasing")
    if c.kind in ("ROC", "CMC") and np.any(np.diff(y) < 0):
        problems.append(f"{c.kind} y values must be non-decreasing")
    if c.kind == "IET" and np.any(np.diff(y) > 0):
        problems.append("IET y values must be non-increasing")
    if np.any((y < 0) | (y > 1)):
        problems.append("curve y values must lie in [0, 1]")
    if c.kind == "CMC":
        if np.any(x < 1) or np.any(x != np.round(x)):
            problems.append("CMC ranks must be positive integers")
    elif np.any((x < 0) | (x > 1)):
        problems.append("curve x values must lie in [0, 1]")
    return problems



@dataclass
class TemplateStore:
    """Id-keyed template lookup.

    Built from any iterable of templates, which is also the boundary for
    online producers: anything that yields :class:`Template` objects can
    feed an evaluation.
    """

    _items: dict = field(default_factory=dict)

    @classmethod
    def from_templates(cls, templates):
        store = cls()
        for t in templates:
            store.add(t)
        return store

    def add(self, t):
        if t.template_id in self._items:
            raise ValueError(f"duplicate template id {t.template_id!r}")
        self._items[t.template_id] = t

    def __getitem__(self, template_id):
        return self._items[template_id]

    def __contains__(self, template_id):
        return template_id in self._items

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items.values())

    def get(self, template_id, default=None):
        return self._items.get(template_id, default)
