import numpy as np
import pytest

import oracles
from conftest import rel_err
from fsboost.errors import ShapeError
from fsboost.head import (
    HIDDEN_CHANNELS, HeadParams, cross_entropy_logits, head_forward, head_input, init_params, predicted_from_logits,
)
from fsboost.tensor import Rng


def random_params(g, d, hidden=5):
    return HeadParams(
        g.normal(size=(hidden, d + 1, 3, 3)), g.normal(size=hidden), g.normal(size=(2, hidden, 1, 1)), g.normal(size=2)
    )


def test_init_shapes_and_dtype():
    p = init_params(6, Rng(0))
    assert p.hidden == HIDDEN_CHANNELS and p.d == 6
    assert all(a.dtype == np.float32 for a in p.arrays())
    assert not p.conv1_bias.any() and not p.conv2_bias.any()


def test_zero_weights_constant_output():
    p = HeadParams(np.zeros((4, 3, 3, 3)), np.zeros(4), np.zeros((2, 4, 1, 1)), np.array([0.2, 1.5]))
    pred = head_forward(p, np.zeros((3, 3)), np.ones((2, 3, 3)))
    np.testing.assert_allclose(pred.foreground, 1 / (1 + np.exp(-1.3)))
    assert pred.binary.all()
    p.conv2_bias[:] = 0.7
    pred = head_forward(p, np.zeros((3, 3)), np.ones((2, 3, 3)))
    np.testing.assert_allclose(pred.foreground, 0.5)
    assert not pred.binary.any()


@pytest.mark.parametrize("seed", range(50))
def test_forward_matches_layer_oracle(seed):
    g = np.random.default_rng(seed)
    d, h, w = 2, 3, 3
    p = random_params(g, d)
    sim, feats = g.uniform(-1, 1, (h, w)), g.normal(size=(d, h, w))
    x = head_input(sim, feats)
    np.testing.assert_array_equal(x[0], sim)
    z1 = np.maximum(np.array(oracles.conv2d(x, p.conv1_weights, p.conv1_bias, 1)), 0.0)
    logits = np.array(oracles.conv2d(z1, p.conv2_weights, p.conv2_bias, 0))
    pred = head_forward(p, sim, feats)
    assert rel_err(pred.logits, logits) < 1e-10
    e = np.exp(logits - logits.max(axis=0))
    assert rel_err(pred.probs, e / e.sum(axis=0)) < 1e-10


@pytest.mark.parametrize("seed", range(50))
def test_cross_entropy_matches_oracle(seed):
    g = np.random.default_rng(seed)
    logits = g.normal(scale=3, size=(2, 4, 4))
    t = (g.random((4, 4)) < 0.5).astype(np.uint8)
    assert cross_entropy_logits(logits, t) == pytest.approx(oracles.cross_entropy(logits, t), rel=1e-12)


def test_cross_entropy_examples():
    t = np.array([[1, 0], [0, 1]])
    assert cross_entropy_logits(np.zeros((2, 2, 2)), t) == pytest.approx(np.log(2))
    good = np.stack([np.where(t, 0.0, 20.0), np.where(t, 20.0, 0.0)])
    assert cross_entropy_logits(good, t) < 1e-8
    with pytest.raises(ShapeError):
        cross_entropy_logits(np.zeros((2, 2, 3)), t)


def test_threshold_is_strict():
    pred = predicted_from_logits(np.zeros((2, 1, 1)))
    assert pred.binary[0, 0] == 0


def test_params_validation_and_flat_roundtrip():
    g = np.random.default_rng(0)
    p = random_params(g, 3)
    np.testing.assert_array_equal(p.unflat(p.flat()).flat(), p.flat())
    with pytest.raises(ShapeError):
        HeadParams(np.zeros((4, 3, 3, 3)), np.zeros(5), np.zeros((2, 4, 1, 1)), np.zeros(2))
    with pytest.raises(ShapeError):
        HeadParams(np.zeros((4, 3, 3, 3)), np.zeros(4), np.zeros((2, 4, 1, 1)), np.zeros(3))
    with pytest.raises(ShapeError):
        head_forward(p, np.zeros((3, 3)), np.zeros((2, 3, 3)))
