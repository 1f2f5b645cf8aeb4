"""Analytic backward pass for the support-prediction pipeline.

Pipeline: weighted cosine map -> concat with features -> 3x3 conv -> ReLU ->
1x1 conv -> two-way softmax cross-entropy. Gradients are taken w.r.t. the
class vector and/or the head parameters; the relevance vector and feature
maps are constants.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .head import HeadParams, head_input, head_layers
from .similarity import EPS, weighted_cosine_map
from .tensor import as_f64, as_mask, check_finite, conv2d, conv2d_backward, log_softmax2, softmax2

WRT_CHOICES = ("class_vector", "params", "both")


@dataclass
class GradBundle:
    loss: float
    d_class_vector: np.ndarray | None = None
    d_params: HeadParams | None = None
    logits: np.ndarray | None = None


def pipeline_loss(params, f, features, r, target, relu_gate=None):
    """Forward-only loss. ``relu_gate`` replaces the ReLU by a fixed 0/1 mask."""
    sim = weighted_cosine_map(f, features, r)
    x = head_input(sim, features)
    if relu_gate is None:
        _, _, logits = head_layers(params, x)
    else:
        z1 = conv2d(x, params.conv1_weights, params.conv1_bias, 1)
        logits = conv2d(z1 * relu_gate, params.conv2_weights, params.conv2_bias, 0)
    t = as_mask(target, "target")
    logp = log_softmax2(logits)
    return float(-np.where(t == 1, logp[1], logp[0]).mean())


def relu_pattern(params, f, features, r):
    """0/1 activation pattern of the hidden layer at the given point."""
    x = head_input(weighted_cosine_map(f, features, r), features)
    z1, _, _ = head_layers(params, x)
    return (z1 > 0).astype(np.float64)


def _cosine_backward(grad_sim, f, feats, r):
    a = f * r
    b = feats * r[:, None, None]
    na = np.sqrt(a @ a)
    nb = np.sqrt(np.einsum("chw,chw->hw", b, b))
    num = np.tensordot(a, b, axes=(0, 0))
    den = na * nb + EPS
    g = grad_sim / den
    da = np.tensordot(b, g, axes=([1, 2], [0, 1]))
    if na > 0:
        da -= (a / na) * np.sum(grad_sim * num * nb / den**2)
    return da * r


def backward(params, f, features, r, target, wrt="both"):
    """Loss and exact gradients for one support (or query) prediction.

    ``wrt`` selects ``"class_vector"``, ``"params"`` or ``"both"``.
    """
    if wrt not in WRT_CHOICES:
        raise ValueError(f"wrt must be one of {WRT_CHOICES}, got {wrt!r}")
    f = as_f64(f, 1, "class vector")
    feats = as_f64(features, 3, "features")
    r = as_f64(r, 1, "relevance")
    t = as_mask(target, "target")
    if t.shape != feats.shape[1:]:
        raise ShapeError(f"target {t.shape} does not match feature grid {feats.shape[1:]}")

    sim = weighted_cosine_map(f, feats, r)
    x = head_input(sim, feats)
    z1, hid, logits = head_layers(params, x)
    n_pos = t.size
    logp = log_softmax2(logits)
    loss = float(-np.where(t == 1, logp[1], logp[0]).mean())

    dz2 = softmax2(logits)
    dz2[1] -= t
    dz2[0] -= 1 - t
    dz2 /= n_pos

    dhid, dw2, db2 = conv2d_backward(hid, params.conv2_weights, dz2, 0)
    dz1 = dhid * (z1 > 0)
    want_f = wrt in ("class_vector", "both")
    dx, dw1, db1 = conv2d_backward(x, params.conv1_weights, dz1, 1, need_input=want_f)

    out = GradBundle(loss=loss, logits=logits)
    if want_f:
        out.d_class_vector = check_finite(_cosine_backward(dx[0], f, feats, r), "class-vector gradient")
    if wrt in ("params", "both"):
        for g in (dw1, db1, dw2, db2):
            check_finite(g, "parameter gradient")
        out.d_params = HeadParams(dw1, db1, dw2, db2)
    return out


def finite_diff_oracle(loss_fn, point, step=1e-3):
    """Central differences ``(L(x + h e_i) - L(x - h e_i)) / 2h`` in float64."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=np.float64).ravel()
    shape = np.shape(point)
    grad = np.empty_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + step
        up = float(loss_fn(x.reshape(shape)))
        x[i] = orig - step
        down = float(loss_fn(x.reshape(shape)))
        x[i] = orig
        grad[i] = (up - down) / (2.0 * step)
    return grad.reshape(shape)
