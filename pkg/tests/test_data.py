import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from fsboost.data import (
    Episode, FoldSplit, LabeledExample, SyntheticConfig, class_prototypes, downsample_mask, generate_synthetic,
    make_folds, sample_episode, shared_dims,
)
from fsboost.embedding import masked_pool
from fsboost.errors import DataError, ShapeError
from fsboost.tensor import Rng


def example(cls, g=None, d=3):
    g = g or np.random.default_rng(cls)
    mask = np.zeros((4, 4), np.uint8)
    mask[:2, :2] = 1
    return LabeledExample(cls, g.normal(size=(d, 2, 2)).astype(np.float32), mask)


def test_downsample_examples():
    assert downsample_mask(np.ones((8, 8)), 2, 4).all()
    assert downsample_mask(np.array([[1, 1], [0, 0]]), 1, 1)[0, 0] == 1
    assert downsample_mask(np.array([[1, 0], [0, 0]]), 1, 1)[0, 0] == 0
    with pytest.raises(ShapeError):
        downsample_mask(np.ones((6, 6)), 4, 4)


@given(arrays(np.uint8, (8, 8), elements=st.integers(0, 1)))
def test_downsample_matches_block_count_oracle(mask):
    np.testing.assert_array_equal(downsample_mask(mask, 4, 4), oracles.downsample(mask.tolist(), 4, 4))
    np.testing.assert_array_equal(downsample_mask(mask, 2, 2), oracles.downsample(mask.tolist(), 2, 2))


def test_labeled_example_validation():
    with pytest.raises(ShapeError):
        LabeledExample(0, np.zeros((3, 2, 2)), np.zeros((5, 4), np.uint8))
    with pytest.raises(ShapeError):
        LabeledExample(0, np.zeros((2, 2)), np.zeros((4, 4), np.uint8))
    ex = example(0)
    assert ex.stride == 2 and ex.d == 3
    np.testing.assert_array_equal(ex.feature_mask, [[1, 0], [0, 0]])


def test_episode_validation():
    a, b, c = example(0), example(0), example(1)
    Episode([a], b)
    with pytest.raises(DataError):
        Episode([a], c)
    with pytest.raises(DataError):
        Episode([a], a)
    with pytest.raises(DataError):
        Episode([], a)


def test_folds_disjoint_and_cover():
    folds = make_folds(range(10), 4)
    tests = [f.test_classes for f in folds]
    assert set().union(*tests) == set(range(10))
    assert sum(len(t) for t in tests) == 10
    for f in folds:
        assert not f.test_classes & f.train_classes
        assert f.test_classes | f.train_classes == set(range(10))
    with pytest.raises(DataError):
        FoldSplit(0, [1, 2], [2, 3])
    with pytest.raises(DataError):
        make_folds(range(3), 4)


def test_forced_episode():
    ds = [example(0), example(0)]
    ep = sample_episode(ds, FoldSplit(0, [0], []), 1, "test", Rng(0))
    assert ep.supports[0] is not ep.query


def test_pigeonhole_kshot():
    ds = [example(0, np.random.default_rng(i)) for i in range(6)]
    ep = sample_episode(ds, FoldSplit(0, [0], []), 5, "test", Rng(3))
    used = [id(x) for x in ep.supports] + [id(ep.query)]
    assert sorted(used) == sorted(id(x) for x in ds)


def test_test_phase_never_yields_train_class():
    ds = [example(c, np.random.default_rng(10 * c + i)) for c in range(6) for i in range(3)]
    split = make_folds(range(6), 3)[1]
    rng = Rng(0)
    for _ in range(1000):
        assert sample_episode(ds, split, 1, "test", rng).class_id in split.test_classes


def test_unsampleable_split():
    with pytest.raises(DataError):
        sample_episode([example(0)], FoldSplit(0, [0], []), 1, "test", Rng(0))
    with pytest.raises(DataError):
        sample_episode([example(0), example(0)], FoldSplit(0, [0], []), 1, "train", Rng(0))


def test_generator_zero_noise_limit():
    cfg = SyntheticConfig(d=8, h=4, w=4, num_classes=3, noise_sigma=1e-9, num_shared_dims=0, stride=4,
                          blob_radius_range=(4, 8))
    protos = class_prototypes(cfg)
    for ex in generate_synthetic(cfg, 4):
        # pure-foreground cells carry the prototype exactly
        cover = ex.mask.reshape(4, 4, 4, 4).mean(axis=(1, 3))
        full = (cover == 1.0).astype(np.uint8)
        if full.any():
            np.testing.assert_allclose(masked_pool(ex.features, full), protos[ex.class_id], atol=1e-3)


def test_generator_masks_nondegenerate_and_deterministic():
    cfg = SyntheticConfig(num_classes=10, seed=4)
    a = generate_synthetic(cfg, 100)
    for ex in a:
        fm = ex.feature_mask
        assert 0 < fm.sum() < fm.size
    b = generate_synthetic(cfg, 100)
    assert all(np.array_equal(x.features, y.features) and np.array_equal(x.mask, y.mask) for x, y in zip(a, b))
    assert a[0].features.dtype == np.float32


def test_shared_dims_are_constant_across_classes():
    cfg = SyntheticConfig(num_classes=4, noise_sigma=0.01)
    idx = shared_dims(cfg)
    assert len(idx) == cfg.num_shared_dims
    for ex in generate_synthetic(cfg, 2):
        np.testing.assert_allclose(ex.features[idx], cfg.shared_value, atol=0.1)


def test_single_class_generation():
    ds = generate_synthetic(SyntheticConfig(num_classes=1), 3)
    assert {ex.class_id for ex in ds} == {0}


@pytest.mark.parametrize("kw", [dict(num_shared_dims=32), dict(noise_sigma=0.0), dict(num_classes=0),
                                dict(blob_count_range=(2, 1)), dict(offset_sigma=-1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SyntheticConfig(**kw)
