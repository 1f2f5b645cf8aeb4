"""Class-vector pooling and feature relevance.

A support example yields a class vector (mean feature over its foreground)
and a foreground-minus-background difference vector whose direction is the
closed-form relevance weighting.
"""
import numpy as np

from .errors import DegenerateMaskError, EmptyMaskError, ShapeError
from .tensor import as_f64, as_mask, check_finite

ZERO_PHI_TOL = 1e-8


def _check_pair(features, mask):
    feats = as_f64(features, 3, "features")
    m = as_mask(mask)
    if m.shape != feats.shape[1:]:
        raise ShapeError(f"mask shape {m.shape} does not match feature grid {feats.shape[1:]}")
    return feats, m


def masked_pool(features, mask):
    """Mean feature column over the foreground cells of ``mask``."""
    feats, m = _check_pair(features, mask)
    count = int(m.sum())
    if count == 0:
        raise EmptyMaskError("masked_pool: mask has no foreground cells")
    fg = feats[:, m.astype(bool)]
    return check_finite(fg.sum(axis=1) / count, "class vector")


def feature_difference(features, mask):
    """Foreground mean minus background mean, per channel."""
    feats, m = _check_pair(features, mask)
    sel = m.astype(bool)
    n_fg = int(sel.sum())
    n_bg = sel.size - n_fg
    if n_fg == 0 or n_bg == 0:
        raise DegenerateMaskError("feature_difference needs both foreground and background cells")
    fg_mean = feats[:, sel].sum(axis=1) / n_fg
    bg_mean = feats[:, ~sel].sum(axis=1) / n_bg
    return check_finite(fg_mean - bg_mean, "feature difference")


def feature_difference_kshot(supports):
    """Sum of per-support difference vectors for ``[(features, mask), ...]``."""
    supports = list(supports)
    if not supports:
        raise ValueError("feature_difference_kshot needs at least one support")
    total = None
    for k, (feats, mask) in enumerate(supports):
        try:
            phi = feature_difference(feats, mask)
        except DegenerateMaskError as exc:
            raise DegenerateMaskError(str(exc), support_index=k) from None
        if total is None:
            total = phi
        elif total.shape != phi.shape:
            raise ShapeError(f"support {k} has feature dim {phi.shape[0]}, expected {total.shape[0]}")
        else:
            total = total + phi
    return total


def uniform_relevance(d):
    return np.full(d, 1.0 / np.sqrt(d))


def relevance(phi):
    """Unit vector maximising ``phi @ r``: ``phi / |phi|``.

    Falls back to the uniform unit vector when ``|phi| < 1e-8``, which makes the
    weighted cosine identical to the plain one.
    """
    phi = check_finite(as_f64(phi, 1, "phi"), "phi")
    norm = np.sqrt(phi @ phi)
    if norm < ZERO_PHI_TOL:
        return uniform_relevance(phi.shape[0])
    return phi / norm


def support_relevance(supports):
    """Joint relevance over one or more ``(features, mask)`` supports."""
    return relevance(feature_difference_kshot(supports))


def mean_class_vector(supports):
    """Average of per-support pooled class vectors (the K-shot initial expert)."""
    vecs = [masked_pool(f, m) for f, m in supports]
    if len(vecs) == 1:
        return vecs[0]
    return np.mean(vecs, axis=0)
