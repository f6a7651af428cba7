import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biomeval import metrics
from biomeval.errors import (ClosedSetViolation, EmptyFold, EmptyInput, MissingTemplate,
                             MixedKinds, NoNonMatedProbes, TooFewFolds)
from biomeval.protocols import (ComparisonProtocol, SearchProtocol, aggregate_curves,
                                kfold_accuracy, make_grid, resample, run_comparison, run_search)
from biomeval.similarity import similarity
from biomeval.synth import GaussianScoreModel, sample_scores, split_folds
from biomeval.types import Curve, ScoreSet, Template, TemplateStore


def _store(*templates):
    return TemplateStore.from_templates(templates)


# -- comparison ------------------------------------------------------------

def test_comparison_basic():
    store = _store(Template("a", "A", [1, 0]), Template("a2", "A", [1, 0]),
                   Template("b", "B", [0, 1]))
    p = ComparisonProtocol([("a", "a2", True, 0), ("a", "b", False, 0)])
    (s,) = run_comparison(p, store)
    assert s.genuine.tolist() == [1.0] and s.impostor.tolist() == [0.0]


def test_comparison_missing_template():
    store = _store(Template("a", "A", [1, 0]))
    with pytest.raises(MissingTemplate) as e:
        run_comparison(ComparisonProtocol([("a", "Q", True, 0)]), store)
    assert e.value.template_id == "Q" and e.value.index == 0
    assert e.value.exit_code == 2


def test_comparison_rejects_self_pairs_and_gaps():
    with pytest.raises(ValueError):
        ComparisonProtocol([("a", "a", True, 0)])
    with pytest.raises(EmptyFold):
        ComparisonProtocol([("a", "b", True, 0), ("a", "c", False, 2)])


def test_comparison_fold_missing_class():
    store = _store(Template("a", "A", [1, 0]), Template("b", "B", [0, 1]))
    with pytest.raises(EmptyFold):
        run_comparison(ComparisonProtocol([("a", "b", True, 0)]), store)


def test_comparison_partition(rng):
    templates = [Template(f"t{k}", f"S{k % 3}", rng.normal(size=4)) for k in range(8)]
    store = _store(*templates)
    pairs = []
    for n in range(10):
        a, b = rng.choice(8, size=2, replace=False)
        pairs.append((f"t{a}", f"t{b}", n % 4 < 2, n % 2))
    folds = run_comparison(ComparisonProtocol(pairs), store)
    assert len(folds) == 2
    assert sum(f.genuine.size + f.impostor.size for f in folds) == 10
    a, b, same, fold = pairs[0]
    target = folds[fold].genuine if same else folds[fold].impostor
    assert similarity(store[a], store[b]) in target.tolist()


# -- search ----------------------------------------------------------------

def _search_store():
    return _store(Template("gA", "A", [1.0, 0.1]), Template("gB", "B", [0.1, 1.0]),
                  Template("pA", "A", [0.9, 0.2]), Template("pZ", "Z", [0.7, 0.7]))


def test_search_closed():
    store = _search_store()
    (res,) = run_search(SearchProtocol({"G1": ["gA", "gB"]}, ["pA"], "closed"), store)
    r = res.ranks[0]
    assert r.mated and r.mate_rank == 1
    for i, pid in enumerate(res.matrix.probe_ids):
        for j, gid in enumerate(res.matrix.gallery_ids):
            assert res.matrix.scores[i, j] == similarity(store[pid], store[gid])


def test_search_open_and_violation():
    store = _search_store()
    (res,) = run_search(SearchProtocol({"G1": ["gA", "gB"]}, ["pA", "pZ"], "open"), store)
    assert [r.mated for r in res.ranks] == [True, False]
    with pytest.raises(ClosedSetViolation, match="Z"):
        run_search(SearchProtocol({"G1": ["gA", "gB"]}, ["pA", "pZ"], "closed"), store)


def test_search_open_without_nonmated_degrades():
    (res,) = run_search(SearchProtocol({"G": ["gA", "gB"]}, ["pA"], "open"), _search_store())
    assert metrics.cmc(res.ranks, 2).y.tolist() == [1.0, 1.0]
    with pytest.raises(NoNonMatedProbes):
        metrics.iet(res.ranks)


def test_search_identical_gallery_sets():
    store = _search_store()
    p = SearchProtocol({"G1": ["gA", "gB"], "G2": ["gA", "gB"]}, ["pA", "pZ"])
    r1, r2 = run_search(p, store)
    assert r1.matrix.scores.tobytes() == r2.matrix.scores.tobytes()
    assert r1.ranks == r2.ranks


# -- k-fold ----------------------------------------------------------------

def test_kfold_requires_two_folds():
    with pytest.raises(TooFewFolds):
        kfold_accuracy([ScoreSet([0.9], [0.1])])


def test_kfold_perfect():
    folds = [ScoreSet([0.9, 0.8], [0.2, 0.1]) for _ in range(3)]
    assert kfold_accuracy(folds).mean_acc == 1.0


def test_kfold_identical_folds():
    s = ScoreSet([0.9, 0.4, 0.7], [0.5, 0.1, 0.6])
    assert len(set(kfold_accuracy([s, s]).per_fold)) == 1


def test_kfold_never_fits_on_held_out_fold():
    # every score is unique to its fold, so the spy can tell which folds it saw
    folds = [ScoreSet([k + 0.5, k + 0.75], [k + 0.1, k + 0.25]) for k in range(5)]
    owner = {v: k for k, f in enumerate(folds) for v in np.concatenate([f.genuine, f.impostor])}
    seen = []

    def spy(s):
        seen.append({owner[v] for v in np.concatenate([s.genuine, s.impostor])})
        return metrics.best_threshold(s)[1]

    res = kfold_accuracy(folds, calibration=spy)
    assert len(seen) == 5
    for k, used in enumerate(seen):
        assert k not in used
        assert used == set(res.train_folds[k]) == set(range(5)) - {k}


def test_kfold_eer_calibration():
    folds = split_folds(sample_scores(GaussianScoreModel(n_genuine=600, n_impostor=600)), 2)
    res = kfold_accuracy(folds, "eer")
    assert 0.7 < res.mean_acc < 0.95


# -- aggregation -----------------------------------------------------------

def test_make_grid():
    g = make_grid()
    assert g.size == 100 and g[0] == pytest.approx(1e-5) and g[-1] == 1.0
    assert make_grid("linear", 3).tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        make_grid("cubic")


def test_aggregate_identical_and_single():
    c = metrics.roc(ScoreSet([0.9, 0.6, 0.5], [0.7, 0.3]))[0]
    agg = aggregate_curves([c, c])
    assert np.array_equal(agg.mean_curve.y, resample(c, agg.grid))
    assert np.array_equal(agg.mean_curve.x, agg.grid)
    single = aggregate_curves([c], "linear", 11)
    assert np.array_equal(single.mean_curve.y, resample(c, make_grid("linear", 11)))
    assert len(single.per_source) == 1


def test_aggregate_crossing_steps():
    a = Curve("ROC", [0.0, 0.1, 0.1, 1.0], [0.2, 0.2, 0.9, 1.0])
    b = Curve("ROC", [0.0, 0.1, 1.0], [0.6, 0.6, 1.0])
    grid = np.logspace(-5, 0, 6)
    agg = aggregate_curves([a, b], grid=grid)
    k = int(np.argmin(np.abs(grid - 0.1)))
    assert agg.mean_curve.y[k] == pytest.approx((0.9 + 0.6) / 2, abs=1e-12)


def test_aggregate_flat_extrapolation():
    c = Curve("ROC", [0.01, 0.5], [0.3, 0.8])
    y = resample(c, [1e-5, 1.0])
    assert y.tolist() == [0.3, 0.8]


def test_aggregate_cmc_uses_ranks():
    a = Curve("CMC", [1, 2, 3], [0.5, 0.75, 1.0])
    b = Curve("CMC", [1, 2], [1.0, 1.0])
    agg = aggregate_curves([a, b])
    assert agg.grid.tolist() == [1.0, 2.0, 3.0]
    assert agg.mean_curve.y.tolist() == [0.75, 0.875, 1.0]


def test_aggregate_errors():
    with pytest.raises(EmptyInput):
        aggregate_curves([])
    with pytest.raises(MixedKinds):
        aggregate_curves([Curve("ROC", [0, 1], [0, 1]), Curve("CMC", [1], [1])])


def test_aggregate_iet_keeps_lowest_fnir_at_steps():
    c = Curve("IET", [0.0, 0.5, 0.5, 1.0], [1.0, 0.8, 0.2, 0.0])
    assert resample(c, [0.5])[0] == 0.2


rates = st.lists(st.floats(0, 1), min_size=2, max_size=12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(rates, rates), min_size=1, max_size=4))
def test_aggregate_preserves_monotonicity(raw):
    curves = []
    for xs, ys in raw:
        n = min(len(xs), len(ys))
        curves.append(Curve("ROC", sorted(xs[:n]), sorted(ys[:n])))
    y = aggregate_curves(curves).mean_curve.y
    assert np.all(np.diff(y) >= -1e-12)
