import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from biomeval.errors import BadWeights, DuplicateName, EmptySet, MixedDimensions, ReservedName
from biomeval.fusion import FusionMethod, fuse, register_fusion


@pytest.fixture
def registry():
    handles = []
    yield lambda name, fn: handles.append(register_fusion(name, fn)) or handles[-1]
    for h in handles:
        h.unregister()


def test_mean():
    assert fuse([[1, 0], [0, 1]]).tolist() == [0.5, 0.5]


def test_weighted_mean():
    out = fuse([[1, 0], [0, 1]], "weighted_mean", weights=[3, 1])
    assert out.tolist() == [0.75, 0.25]
    assert fuse([[1, 0], [0, 1]], FusionMethod("weighted_mean", (3, 1))).tolist() == [0.75, 0.25]


def test_mean_matches_summation_oracle(rng):
    vs = rng.normal(size=(100, 8)).astype(np.float32)
    expected = [sum(float(v[k]) for v in vs) / 100 for k in range(8)]
    np.testing.assert_allclose(fuse(list(vs)), expected, atol=1e-6)


def test_output_is_float32_with_input_dim():
    out = fuse([[1.0, 2.0, 3.0]])
    assert out.dtype == np.float32 and out.shape == (3,)


@pytest.mark.parametrize("vectors, kwargs, err", [
    ([], {}, EmptySet),
    ([[1, 0], [1, 0, 0]], {}, MixedDimensions),
    ([[1, 0], [0, 1]], {"method": "weighted_mean"}, BadWeights),
    ([[1, 0], [0, 1]], {"method": "weighted_mean", "weights": [1]}, BadWeights),
    ([[1, 0], [0, 1]], {"method": "weighted_mean", "weights": [1, -1]}, BadWeights),
    ([[1, 0], [0, 1]], {"method": "weighted_mean", "weights": [0, 0]}, BadWeights),
])
def test_fuse_errors(vectors, kwargs, err):
    with pytest.raises(err):
        fuse(vectors, **kwargs)


def test_register_custom(registry):
    registry("first", lambda stack, w: stack[0])
    assert fuse([[1, 0], [0, 1]], "first").tolist() == [1, 0]
    registry("max_pool", lambda stack, w: stack.max(axis=0))
    assert fuse([[1, 0], [0, 2]], "max_pool").tolist() == [1, 2]


def test_register_reserved_and_duplicate(registry):
    with pytest.raises(ReservedName):
        register_fusion("mean", lambda s, w: s[0])
    with pytest.raises(ReservedName):
        register_fusion("weighted_mean", lambda s, w: s[0])
    registry("dup", lambda s, w: s[0])
    with pytest.raises(DuplicateName):
        register_fusion("dup", lambda s, w: s[0])


def test_unknown_method():
    with pytest.raises(KeyError):
        fuse([[1.0]], "nope")


def test_normalize_before_and_after():
    vs = [[3.0, 4.0], [0.0, 2.0]]
    np.testing.assert_allclose(fuse(vs, normalize="before"), [0.3, 0.9], atol=1e-7)
    after = fuse(vs, normalize="after")
    np.testing.assert_allclose(np.linalg.norm(after), 1.0, atol=1e-6)
    np.testing.assert_allclose(after, np.array([1.5, 3.0]) / np.hypot(1.5, 3.0), atol=1e-7)


vector_sets = st.integers(1, 6).flatmap(lambda d: st.lists(
    arrays(np.float32, d, elements=st.floats(-100, 100, width=32)), min_size=1, max_size=12))


@settings(max_examples=100, deadline=None)
@given(vector_sets, st.randoms(use_true_random=False))
def test_mean_permutation_invariant(vectors, random):
    shuffled = list(vectors)
    random.shuffle(shuffled)
    assert fuse(vectors).tobytes() == fuse(shuffled).tobytes()


@settings(max_examples=100, deadline=None)
@given(vector_sets, st.floats(0.01, 100))
def test_uniform_weights_equal_mean(vectors, w):
    a = fuse(vectors, "weighted_mean", weights=[w] * len(vectors), dtype=np.float64)
    b = fuse(vectors, dtype=np.float64)
    np.testing.assert_allclose(a, b, atol=1e-9, rtol=0)
