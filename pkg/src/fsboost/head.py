"""Two-layer convolutional prediction head and the cross-entropy loss.

Input to the head is the similarity map (channel 0) stacked on the feature
map; output is a background/foreground logit pair per position.
"""
from dataclasses import dataclass, fields

import numpy as np

from .errors import ShapeError
from .tensor import as_f64, as_mask, check_finite, concat_channels, conv2d, log_softmax2, softmax2

HIDDEN_CHANNELS = 128


@dataclass
class HeadParams:
    conv1_weights: np.ndarray  # (hidden, d + 1, 3, 3)
    conv1_bias: np.ndarray  # (hidden,)
    conv2_weights: np.ndarray  # (2, hidden, 1, 1)
    conv2_bias: np.ndarray  # (2,)

    def __post_init__(self):
        self.validate()

    @property
    def d(self):
        return self.conv1_weights.shape[1] - 1

    @property
    def hidden(self):
        return self.conv1_weights.shape[0]

    def arrays(self):
        return [getattr(self, f.name) for f in fields(self)]

    def validate(self):
        w1, b1, w2, b2 = self.arrays()
        hidden = w1.shape[0] if w1.ndim == 4 else -1
        if w1.ndim != 4 or w1.shape[2:] != (3, 3) or w1.shape[1] < 2:
            raise ShapeError(f"conv1_weights must be (hidden, d+1, 3, 3), got {w1.shape}")
        if b1.shape != (hidden,):
            raise ShapeError(f"conv1_bias must be ({hidden},), got {b1.shape}")
        if w2.shape != (2, hidden, 1, 1):
            raise ShapeError(f"conv2_weights must be (2, {hidden}, 1, 1), got {w2.shape}")
        if b2.shape != (2,):
            raise ShapeError(f"conv2_bias must be (2,), got {b2.shape}")
        for a in self.arrays():
            check_finite(a, "head parameters")

    def map(self, fn, *others):
        """New params from ``fn`` applied array-wise to self and ``others``."""
        cols = zip(self.arrays(), *(o.arrays() for o in others))
        return HeadParams(*[fn(*group) for group in cols])

    def astype(self, dtype):
        return self.map(lambda a: np.array(a, dtype=dtype))

    def flat(self):
        return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in self.arrays()])

    def unflat(self, vec):
        out, pos = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        return HeadParams(*out)


def init_params(d, rng, hidden=HIDDEN_CHANNELS):
    """Fan-in scaled Gaussian weights, zero biases, float32 storage."""
    fan1 = (d + 1) * 9
    w1 = rng.normal((hidden, d + 1, 3, 3), scale=np.sqrt(2.0 / fan1))
    w2 = rng.normal((2, hidden, 1, 1), scale=np.sqrt(2.0 / hidden))
    return HeadParams(
        w1.astype(np.float32),
        np.zeros(hidden, np.float32),
        w2.astype(np.float32),
        np.zeros(2, np.float32),
    )


@dataclass
class PredictedMask:
    logits: np.ndarray  # (2, h, w)
    probs: np.ndarray  # (2, h, w), channel 1 is foreground
    binary: np.ndarray  # (h, w) uint8

    @property
    def foreground(self):
        return self.probs[1]


def predicted_from_logits(logits):
    probs = softmax2(logits)
    return PredictedMask(logits, probs, (probs[1] > 0.5).astype(np.uint8))


def head_input(sim, features):
    feats = as_f64(features, 3, "features")
    sim = as_f64(sim, 2, "similarity map")
    if sim.shape != feats.shape[1:]:
        raise ShapeError(f"similarity map {sim.shape} does not match feature grid {feats.shape[1:]}")
    return concat_channels(sim, feats)


def head_layers(params, x):
    """Forward through both layers; returns ``(pre_relu, hidden, logits)``."""
    if x.shape[0] != params.d + 1:
        raise ShapeError(f"head expects {params.d + 1} input channels, got {x.shape[0]}")
    z1 = conv2d(x, params.conv1_weights, params.conv1_bias, 1)
    hid = np.maximum(z1, 0.0)
    logits = conv2d(hid, params.conv2_weights, params.conv2_bias, 0)
    return z1, hid, logits


def head_forward(params, sim, features):
    _, _, logits = head_layers(params, head_input(sim, features))
    return predicted_from_logits(logits)


def cross_entropy_logits(logits, target):
    t = as_mask(target, "target")
    if t.shape != logits.shape[1:]:
        raise ShapeError(f"target {t.shape} does not match prediction {logits.shape[1:]}")
    logp = log_softmax2(logits)
    picked = np.where(t == 1, logp[1], logp[0])
    return float(check_finite(-picked.mean(), "loss"))


def cross_entropy(pred, target):
    """Mean over positions of ``-log p(target)``."""
    return cross_entropy_logits(pred.logits, target)
