import math

import numpy as np
import pytest

from biomeval import metrics
from biomeval.errors import NoNonMatedProbes
from biomeval.protocols import ComparisonProtocol, run_comparison
from biomeval.similarity import score_matrix
from biomeval.synth import (CounterRNG, GaussianScoreModel, SyntheticPopulation, expand_media,
                            make_pairs, normal_cdf, sample_population, sample_scores,
                            scores_as_templates, split_folds)
from biomeval.types import TemplateStore

import oracles


def test_rng_matches_reference_splitmix64():
    for seed in (0, 1, 42, 2 ** 64 - 1):
        assert CounterRNG(seed).raw(64).tolist() == oracles.splitmix64(seed, 64)
    assert int(CounterRNG(0).raw(1)[0]) == 0xE220A8397B1DCDAF


def test_rng_counter_is_a_stream():
    a = CounterRNG(7)
    first = a.raw(5).tolist() + a.raw(3).tolist()
    assert first == CounterRNG(7).raw(8).tolist()


def test_uniform_open_interval():
    u = CounterRNG(3).uniform(100_000)
    assert u.min() > 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_normal_moments():
    z = CounterRNG(11).normal(200_001)
    assert z.size == 200_001
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1.0) < 0.01


def test_normal_cdf_against_series():
    for x in (-2.5, -1.0, 0.0, 0.3, math.sqrt(2), 2.9):
        assert normal_cdf(x) == pytest.approx(oracles.phi(x), abs=1e-12)


def test_sample_scores_deterministic_and_sized():
    m = GaussianScoreModel(n_genuine=5, n_impostor=7, seed=9)
    a, b = sample_scores(m), sample_scores(m)
    assert a == b
    assert a.genuine.tobytes() == b.genuine.tobytes()
    assert (a.genuine.size, a.impostor.size) == (5, 7)
    assert sample_scores(GaussianScoreModel(seed=10)) != sample_scores(GaussianScoreModel(seed=11))


def test_sample_scores_mean_sanity():
    m = GaussianScoreModel(n_genuine=4000, n_impostor=4000, seed=5)
    s = sample_scores(m)
    bound = 4 * 0.1 / math.sqrt(4000)
    assert abs(s.genuine.mean() - 0.6) <= bound
    assert abs(s.impostor.mean() - 0.4) <= bound


def test_model_validation():
    with pytest.raises(ValueError):
        GaussianScoreModel(genuine_sd=0)
    with pytest.raises(ValueError):
        GaussianScoreModel(n_genuine=0)
    with pytest.raises(ValueError):
        SyntheticPopulation(within_class_sd=0)


def test_gaussian_auc_closed_form():
    m = GaussianScoreModel(n_genuine=100_000, n_impostor=100_000, seed=0)
    expected = oracles.phi(math.sqrt(2))
    assert expected == pytest.approx(0.9214, abs=1e-4)
    got = metrics.auc(metrics.roc(sample_scores(m))[0])
    assert abs(got - expected) <= 0.01
    assert m.expected_auc == pytest.approx(expected, abs=1e-12)


def test_split_folds():
    s = sample_scores(GaussianScoreModel(n_genuine=10, n_impostor=11))
    folds = split_folds(s, 3)
    assert [f.genuine.size for f in folds] == [4, 3, 3]
    assert np.array_equal(np.concatenate([f.impostor for f in folds]), s.impostor)


def test_population_shape_and_determinism():
    p = SyntheticPopulation(n_subjects=5, n_probe_mated=7, n_probe_nonmated=3, dim=4, seed=2)
    g1, p1 = sample_population(p)
    g2, p2 = sample_population(p)
    assert g1 == g2 and p1 == p2
    assert len(g1) == 5 and len({t.subject_id for t in g1}) == 5
    enrolled = {t.subject_id for t in g1}
    assert sum(t.subject_id in enrolled for t in p1) == 7
    assert all(t.subject_id not in enrolled for t in p1[7:])


def _naive_rank1_rate(gallery, probes):
    hits = mated = 0
    for p in probes:
        row = [oracles.sequential_cosine(p.vector, g.vector) for g in gallery]
        subjects = [g.subject_id for g in gallery]
        if p.subject_id not in subjects:
            continue
        mated += 1
        hits += oracles.mate_rank(row, subjects.index(p.subject_id)) == 1
    return hits / mated


def test_population_cmc1_pinned_by_naive_oracle():
    p = SyntheticPopulation(n_subjects=50, n_probe_mated=100, n_probe_nonmated=0, dim=16,
                            within_class_sd=0.1, between_class_sd=1.0, seed=0)
    gallery, probes = sample_population(p)
    ranks = metrics.rank_probes(score_matrix(probes, gallery))
    got = metrics.cmc_at(ranks, 1)
    assert got == _naive_rank1_rate(gallery, probes)
    assert got >= 0.95


def test_tiny_within_class_sd_gives_rank_one():
    p = SyntheticPopulation(n_subjects=30, n_probe_mated=60, n_probe_nonmated=5,
                            within_class_sd=1e-6, seed=4)
    gallery, probes = sample_population(p)
    ranks = metrics.rank_probes(score_matrix(probes, gallery))
    assert all(r.mate_rank == 1 for r in ranks if r.mated)


def test_no_nonmated_probes_breaks_iet_only():
    p = SyntheticPopulation(n_subjects=10, n_probe_mated=20, n_probe_nonmated=0, seed=1)
    gallery, probes = sample_population(p)
    ranks = metrics.rank_probes(score_matrix(probes, gallery))
    metrics.cmc(ranks, 10)
    with pytest.raises(NoNonMatedProbes):
        metrics.iet(ranks)


def test_expand_media_groups():
    p = SyntheticPopulation(n_subjects=3, n_probe_mated=0, n_probe_nonmated=0, dim=4)
    gallery, _ = sample_population(p)
    media, recs = expand_media(gallery, 2, 0.01, seed=1)
    assert len(media) == 6
    assert {r.fused_template_id for r in recs} == {t.template_id for t in gallery}
    assert all(m.subject_id == r.subject_id for m, r in zip(media, recs))


def test_make_pairs_folds_have_both_classes():
    p = SyntheticPopulation(n_subjects=6, n_probe_mated=12, n_probe_nonmated=4, dim=4)
    gallery, probes = sample_population(p)
    pairs = make_pairs(gallery, probes, n_folds=3)
    for f in range(3):
        same = {r.same for r in pairs if r.fold == f}
        assert same == {True, False}


def test_scores_as_templates_preserve_scores():
    folds = split_folds(sample_scores(GaussianScoreModel(n_genuine=40, n_impostor=40)), 2)
    templates, pairs = scores_as_templates(folds)
    proto = ComparisonProtocol([(r.template_a, r.template_b, r.same, r.fold) for r in pairs])
    back = run_comparison(proto, TemplateStore.from_templates(templates))
    for a, b in zip(folds, back):
        # vectors are stored as float32, so scores survive to float32 precision
        assert np.allclose(a.genuine, b.genuine, atol=1e-6)
        assert np.allclose(a.impostor, b.impostor, atol=1e-6)
