"""Synthetic score sets and gallery/probe populations with known metrics.

Randomness comes from :class:`CounterRNG`, a counter-based SplitMix64
generator: output ``i`` (1-based) of seed ``s`` is
``mix64(s + i * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix64`` is the
SplitMix64 finaliser. Uniforms use the top 53 bits,
``((x >> 11) + 0.5) / 2**53``, so they lie strictly inside (0, 1).
Normals use Box-Muller on consecutive uniform pairs ``(u1, u2)``, emitting
``r*cos(2*pi*u2)`` then ``r*sin(2*pi*u2)`` with ``r = sqrt(-2 ln u1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .formats import MediaRecord, PairRecord
from .types import ScoreSet, Template

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class CounterRNG:
    """SplitMix64 indexed by a 64-bit counter; draws advance the counter."""

    def __init__(self, seed: int, counter: int = 0):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self.counter = counter

    def at(self, index):
        """Raw 64-bit outputs at explicit 1-based counter positions."""
        idx = np.asarray(index, dtype=np.uint64)
        z = np.uint64(self.seed) + idx * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))

    def raw(self, n: int):
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return self.at(idx)

    def uniform(self, n: int):
        return ((self.raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normal(self, n: int):
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


@dataclass(frozen=True)
class GaussianScoreModel:
    genuine_mean: float = 0.6
    genuine_sd: float = 0.1
    impostor_mean: float = 0.4
    impostor_sd: float = 0.1
    n_genuine: int = 1000
    n_impostor: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.genuine_sd <= 0 or self.impostor_sd <= 0:
            raise ValueError("standard deviations must be positive")
        if self.n_genuine < 1 or self.n_impostor < 1:
            raise ValueError("score counts must be at least 1")

    @property
    def expected_auc(self):
        d = (self.genuine_mean - self.impostor_mean) / math.hypot(self.genuine_sd, self.impostor_sd)
        return normal_cdf(d)


@dataclass(frozen=True)
class SyntheticPopulation:
    n_subjects: int = 50
    n_probe_mated: int = 100
    n_probe_nonmated: int = 50
    dim: int = 16
    within_class_sd: float = 0.1
    between_class_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1 or self.dim < 1:
            raise ValueError("n_subjects and dim must be positive")
        if self.n_probe_mated < 0 or self.n_probe_nonmated < 0:
            raise ValueError("probe counts must be non-negative")
        if self.within_class_sd <= 0 or self.between_class_sd <= 0:
            raise ValueError("class standard deviations must be positive")


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def sample_scores(m: GaussianScoreModel) -> ScoreSet:
    """Draw genuine then impostor scores from one seeded stream."""
    rng = CounterRNG(m.seed)
    genuine = m.genuine_mean + m.genuine_sd * rng.normal(m.n_genuine)
    impostor = m.impostor_mean + m.impostor_sd * rng.normal(m.n_impostor)
    return ScoreSet(genuine, impostor, higher_is_better=True)


def split_folds(s: ScoreSet, n_folds: int):
    """Cut a score set into ``n_folds`` contiguous, near-equal folds."""
    if n_folds < 1:
        raise ValueError("n_folds must be positive")
    g = np.array_split(s.genuine, n_folds)
    i = np.array_split(s.impostor, n_folds)
    return [ScoreSet(a, b, s.higher_is_better) for a, b in zip(g, i)]


def subject_name(k):
    return f"S{k:05d}"


def sample_population(p: SyntheticPopulation):
    """Gaussian-class gallery (one template per subject) and probe set.

    Mated probe ``k`` belongs to enrolled subject ``k mod n_subjects``;
    every non-mated probe comes from its own unenrolled subject.

    Returns:
        ``(gallery, probes)`` lists of :class:`Template`.
    """
    rng = CounterRNG(p.seed)
    d = p.dim
    enrolled = p.between_class_sd * rng.normal(p.n_subjects * d).reshape(p.n_subjects, d)
    outsiders = p.between_class_sd * rng.normal(p.n_probe_nonmated * d).reshape(-1, d)
    g_noise = p.within_class_sd * rng.normal(p.n_subjects * d).reshape(p.n_subjects, d)
    m_noise = p.within_class_sd * rng.normal(p.n_probe_mated * d).reshape(-1, d)
    n_noise = p.within_class_sd * rng.normal(p.n_probe_nonmated * d).reshape(-1, d)

    gallery = [Template(f"g-{subject_name(k)}", subject_name(k), enrolled[k] + g_noise[k])
               for k in range(p.n_subjects)]
    probes = []
    for k in range(p.n_probe_mated):
        s = k % p.n_subjects
        probes.append(Template(f"p-{k:05d}", subject_name(s), enrolled[s] + m_noise[k]))
    for k in range(p.n_probe_nonmated):
        probes.append(Template(f"p-{p.n_probe_mated + k:05d}", f"U{k:05d}",
                               outsiders[k] + n_noise[k]))
    return gallery, probes


def expand_media(templates, per_template: int, sd: float, seed: int):
    """Split each template into ``per_template`` noisy media vectors.

    Returns the media templates and the media_map records that group them
    back under the original template ids.
    """
    if per_template < 1:
        raise ValueError("per_template must be positive")
    rng = CounterRNG(seed)
    media, records = [], []
    for t in templates:
        noise = sd * rng.normal(per_template * t.dim).reshape(per_template, t.dim)
        for j in range(per_template):
            mid = f"{t.template_id}-m{j}"
            media.append(Template(mid, t.subject_id, t.vector + noise[j], ()))
            records.append(MediaRecord(mid, t.subject_id, t.template_id, None))
    return media, records


def make_pairs(gallery, probes, n_folds: int = 1):
    """Verification pairs from a population.

    Each mated probe is paired with its mate (genuine) and every probe with
    the next subject's gallery template (impostor). Probes are dealt to
    folds round-robin, keeping each probe's pairs in one fold.
    """
    index = {t.subject_id: n for n, t in enumerate(gallery)}
    pairs = []
    for k, probe in enumerate(probes):
        mate = index.get(probe.subject_id)
        if mate is not None:
            pairs.append((k % n_folds, probe.template_id, gallery[mate].template_id, True))
            other = gallery[(mate + 1) % len(gallery)]
        else:
            other = gallery[k % len(gallery)]
        if other.subject_id != probe.subject_id:
            pairs.append((k % n_folds, probe.template_id, other.template_id, False))
    return [PairRecord(*p) for p in pairs]


def scores_as_templates(folds):
    """Encode score folds as 2-d templates whose cosine equals each score.

    Pair ``n`` compares ``[1, 0]`` with ``[s, sqrt(1 - s^2)]``; scores are
    clipped to [-1, 1]. Returns ``(templates, pair_records)``.
    """
    templates, pairs = [], []
    n = 0
    for fold, s in enumerate(folds):
        for same, values in ((True, s.genuine), (False, s.impostor)):
            for v in np.clip(values, -1.0, 1.0):
                a, b = f"a{n:06d}", f"b{n:06d}"
                templates.append(Template(a, f"A{n:06d}", [1.0, 0.0]))
                templates.append(Template(b, f"B{n:06d}", [v, math.sqrt(max(0.0, 1.0 - v * v))]))
                pairs.append(PairRecord(fold, a, b, same))
                n += 1
    return templates, pairs
