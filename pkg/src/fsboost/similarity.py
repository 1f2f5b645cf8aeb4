"""Cosine similarity maps between a class vector and a feature map."""
import numpy as np

from .errors import ShapeError
from .tensor import as_f64, check_finite

EPS = 1e-8


def _check(f, features):
    f = as_f64(f, 1, "class vector")
    feats = as_f64(features, 3, "features")
    if f.shape[0] != feats.shape[0]:
        raise ShapeError(f"class vector has dim {f.shape[0]}, features have {feats.shape[0]} channels")
    return f, feats


def cosine_map(f, features):
    """``out[i] = f . F_i / (|f| |F_i| + eps)`` for every position ``i``."""
    f, feats = _check(f, features)
    num = np.tensordot(f, feats, axes=(0, 0))
    den = np.sqrt(f @ f) * np.sqrt(np.einsum("chw,chw->hw", feats, feats)) + EPS
    return check_finite(num / den, "similarity map")


def weighted_cosine_map(f, features, r):
    """Cosine between ``f * r`` and ``F_i * r`` at every position.

    The relevance multiplies both arguments, so this is a diagonal-metric
    cosine with weights ``r**2``; weighting only one side gives different values.
    """
    f, feats = _check(f, features)
    r = as_f64(r, 1, "relevance")
    if r.shape != f.shape:
        raise ShapeError(f"relevance has dim {r.shape[0]}, expected {f.shape[0]}")
    return cosine_map(f * r, feats * r[:, None, None])
