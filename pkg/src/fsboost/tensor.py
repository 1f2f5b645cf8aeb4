"""Dense tensor primitives.

Tensors are numpy arrays in channel-first layout: feature maps are ``(d, h, w)``,
masks ``(h, w)``, vectors ``(d,)``. Stored data (files, datasets, parameters)
is float32; every operation here upcasts to float64 before accumulating and
returns float64.
"""
import numpy as np

from . import kernels
from .errors import NonFiniteError, ShapeError

_MASK64 = (1 << 64) - 1


def as_f64(x, ndim=None, name="tensor"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must have rank {ndim}, got shape {arr.shape}")
    return arr


def check_finite(x, name="tensor"):
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return x


def as_mask(mask, name="mask"):
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be rank 2, got shape {m.shape}")
    if m.dtype != np.uint8:
        if not np.all((m == 0) | (m == 1)):
            raise ValueError(f"{name} values must be 0 or 1")
        m = m.astype(np.uint8)
    return m


def dot(a, b):
    a = as_f64(a, 1)
    b = as_f64(b, 1)
    if a.shape != b.shape:
        raise ShapeError(f"dot: shapes {a.shape} and {b.shape} differ")
    return float(check_finite(a @ b))


def l2_norm(x):
    x = as_f64(x)
    return float(check_finite(np.sqrt(np.sum(x * x))))


def channel_dot(v, feats):
    """Per-position reduction ``out[y, x] = sum_c v[c] * feats[c, y, x]``."""
    v = as_f64(v, 1, "vector")
    feats = as_f64(feats, 3, "features")
    if v.shape[0] != feats.shape[0]:
        raise ShapeError(f"channel_dot: vector has {v.shape[0]} channels, features {feats.shape[0]}")
    return check_finite(np.tensordot(v, feats, axes=(0, 0)))


def channel_norm(feats):
    """Per-position L2 norm over channels, ``(h, w)``."""
    feats = as_f64(feats, 3, "features")
    return np.sqrt(np.einsum("chw,chw->hw", feats, feats))


def concat_channels(*tensors):
    parts = []
    for t in tensors:
        t = as_f64(t)
        parts.append(t[None] if t.ndim == 2 else t)
    spatial = {p.shape[1:] for p in parts}
    if len(spatial) != 1 or any(p.ndim != 3 for p in parts):
        raise ShapeError(f"concat_channels: incompatible shapes {[p.shape for p in parts]}")
    return np.concatenate(parts, axis=0)


def relu(x):
    x = as_f64(x)
    return np.maximum(x, 0.0)


def block_average(x, fy, fx):
    """Average non-overlapping ``fy x fx`` blocks over the last two axes."""
    x = as_f64(x)
    h, w = x.shape[-2:]
    if fy <= 0 or fx <= 0 or h % fy or w % fx:
        raise ShapeError(f"block_average: {h}x{w} not divisible by {fy}x{fx}")
    lead = x.shape[:-2]
    blocks = x.reshape(*lead, h // fy, fy, w // fx, fx)
    return blocks.mean(axis=(-3, -1))


def conv2d(x, weight, bias, padding):
    """Same-size 2-D cross-correlation with zero padding."""
    x = as_f64(x, 3, "input")
    weight = as_f64(weight, 4, "weights")
    bias = as_f64(bias, 1, "bias")
    c_out, c_in, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square and odd, got {k}x{k2}")
    if padding != (k - 1) // 2:
        raise ShapeError(f"conv2d: padding must be {(k - 1) // 2} for a {k}x{k} kernel")
    if x.shape[0] != c_in:
        raise ShapeError(f"conv2d: input has {x.shape[0]} channels, weights expect {c_in}")
    if bias.shape[0] != c_out:
        raise ShapeError(f"conv2d: bias has {bias.shape[0]} entries, expected {c_out}")
    return check_finite(kernels.conv2d(x, weight, bias, padding), "conv2d output")


def conv2d_backward(x, weight, grad_out, padding, need_input=True):
    """Gradients of :func:`conv2d` given upstream ``grad_out``.

    Returns ``(grad_input, grad_weight, grad_bias)``; ``grad_input`` is None
    when ``need_input`` is false.
    """
    x = as_f64(x, 3, "input")
    weight = as_f64(weight, 4, "weights")
    grad_out = as_f64(grad_out, 3, "grad_out")
    if grad_out.shape != (weight.shape[0],) + x.shape[1:]:
        raise ShapeError(f"conv2d_backward: grad_out shape {grad_out.shape} does not match output")
    return kernels.conv2d_backward(x, weight, grad_out, padding, need_input)


def softmax2(logits):
    """Softmax across the two channels of a ``(2, h, w)`` logit map."""
    z = as_f64(logits, 3, "logits")
    if z.shape[0] != 2:
        raise ShapeError(f"softmax2 expects 2 channels, got {z.shape[0]}")
    check_finite(z, "logits")
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def log_softmax2(logits):
    z = as_f64(logits, 3, "logits")
    check_finite(z, "logits")
    m = z.max(axis=0, keepdims=True)
    return z - (m + np.log(np.exp(z - m).sum(axis=0, keepdims=True)))


def derive_seed(base_seed, *keys):
    """Deterministic 64-bit seed from a base seed and integer keys."""
    ss = np.random.SeedSequence([int(base_seed) & _MASK64, *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


class Rng:
    """Seeded counter-based generator (Philox).

    Streams depend only on the 64-bit seed, so equal seeds give equal draws on
    every platform. Not thread-safe; give each worker its own instance.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def spawn(self, *keys):
        return Rng(derive_seed(self.seed, *keys))

    def normal(self, size=None, scale=1.0):
        return self._gen.standard_normal(size) * scale

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        """Integers in ``[low, high)``."""
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, seq):
        return seq[int(self._gen.integers(len(seq)))]
