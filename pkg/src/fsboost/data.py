"""Episodes, fold splits, mask downsampling and the synthetic feature generator."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DataError, ShapeError
from .tensor import Rng, as_mask, block_average


def downsample_mask(mask, h, w):
    """Block-average ``mask`` to ``(h, w)``; a cell is foreground iff its average >= 0.5."""
    m = as_mask(mask)
    big_h, big_w = m.shape
    if h <= 0 or w <= 0 or big_h % h or big_w % w:
        raise ShapeError(f"cannot downsample {big_h}x{big_w} mask to {h}x{w}")
    fy, fx = big_h // h, big_w // w
    # Integer counts avoid float rounding at the 0.5 tie.
    counts = m.reshape(h, fy, w, fx).sum(axis=(1, 3), dtype=np.int64)
    return (2 * counts >= fy * fx).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    class_id: int
    features: np.ndarray  # (d, h, w) float32
    mask: np.ndarray  # (H, W) uint8, H and W integer multiples of h and w

    def __post_init__(self):
        if self.features.ndim != 3:
            raise ShapeError(f"features must be (d, h, w), got {self.features.shape}")
        as_mask(self.mask)
        _, h, w = self.features.shape
        big_h, big_w = self.mask.shape
        if big_h % h or big_w % w or big_h // h != big_w // w:
            raise ShapeError(f"mask {self.mask.shape} is not an integer-stride upsampling of {h}x{w}")

    @property
    def d(self):
        return self.features.shape[0]

    @property
    def stride(self):
        return self.mask.shape[0] // self.features.shape[1]

    @cached_property
    def feature_mask(self):
        """Mask at feature resolution."""
        _, h, w = self.features.shape
        return downsample_mask(self.mask, h, w)


@dataclass(eq=False)
class Episode:
    supports: list
    query: LabeledExample

    def __post_init__(self):
        if len(self.supports) < 1:
            raise DataError("an episode needs at least one support")
        ids = {s.class_id for s in self.supports} | {self.query.class_id}
        if len(ids) != 1:
            raise DataError(f"episode mixes classes {sorted(ids)}")
        if any(s is self.query for s in self.supports):
            raise DataError("query example appears among the supports")

    @property
    def class_id(self):
        return self.query.class_id

    @property
    def k(self):
        return len(self.supports)

    def support_pairs(self):
        return [(s.features, s.feature_mask) for s in self.supports]


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    test_classes: frozenset
    train_classes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "test_classes", frozenset(int(c) for c in self.test_classes))
        object.__setattr__(self, "train_classes", frozenset(int(c) for c in self.train_classes))
        if self.test_classes & self.train_classes:
            raise DataError(f"fold {self.fold_index}: test and train classes overlap")

    def classes(self, phase):
        if phase == "test":
            return self.test_classes
        if phase == "train":
            return self.train_classes
        raise ValueError(f"phase must be 'train' or 'test', got {phase!r}")


def make_folds(class_ids, num_folds=4):
    """Contiguous class blocks as test sets, the remainder as train sets."""
    classes = sorted(set(int(c) for c in class_ids))
    if num_folds < 1 or len(classes) < num_folds:
        raise DataError(f"cannot split {len(classes)} classes into {num_folds} folds")
    blocks = np.array_split(np.array(classes), num_folds)
    out = []
    for i, block in enumerate(blocks):
        test = frozenset(int(c) for c in block)
        out.append(FoldSplit(i, test, frozenset(classes) - test))
    return out


def group_by_class(dataset):
    groups = {}
    for idx, ex in enumerate(dataset):
        groups.setdefault(ex.class_id, []).append(idx)
    return groups


def sample_episode(dataset, split, k, phase, rng, groups=None):
    """Uniform eligible class, then ``k + 1`` distinct examples in random roles."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if groups is None:
        groups = group_by_class(dataset)
    allowed = split.classes(phase)
    eligible = sorted(c for c, idx in groups.items() if c in allowed and len(idx) >= k + 1)
    if not eligible:
        raise DataError(f"fold {split.fold_index}: no {phase} class has {k + 1} or more examples")
    cls = eligible[int(rng.integers(len(eligible)))]
    members = groups[cls]
    picks = rng.permutation(len(members))[: k + 1]
    chosen = [dataset[members[i]] for i in picks]
    return Episode(supports=chosen[:k], query=chosen[k])


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic class-conditional feature generator.

    Foreground cells carry the class prototype, background cells the prototype
    of a randomly drawn distractor class (a fixed background vector when there
    is only one class); ``num_shared_dims`` channels are set
    to ``shared_value`` everywhere so they look strongly active but carry no
    class information. ``offset_sigma`` adds a per-example random offset to
    every cell of the example (foreground and background alike), a nuisance
    that differs between support and query. ``context_sigma`` adds a per-class
    context vector, with a class-specific strength between 0 and twice
    ``context_sigma``, to every cell of every example of that class, so support
    and query of an episode share it. Blob sizes are in mask pixels.
    """

    d: int = 32
    h: int = 8
    w: int = 8
    num_classes: int = 20
    noise_sigma: float = 0.5
    num_shared_dims: int = 8
    blob_count_range: tuple = (1, 3)
    blob_radius_range: tuple = (3, 8)
    stride: int = 4
    seed: int = 0
    shared_value: float = 2.0
    prototype_scale: float = 1.0
    offset_sigma: float = 0.0
    context_sigma: float = 0.0

    def __post_init__(self):
        if not 0 <= self.num_shared_dims < self.d:
            raise ValueError("num_shared_dims must satisfy 0 <= num_shared_dims < d")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        if self.offset_sigma < 0 or self.context_sigma < 0:
            raise ValueError("offset_sigma and context_sigma must be non-negative")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        lo, hi = self.blob_count_range
        if not 1 <= lo <= hi:
            raise ValueError("blob_count_range must satisfy 1 <= low <= high")
        rlo, rhi = self.blob_radius_range
        if not 1 <= rlo <= rhi:
            raise ValueError("blob_radius_range must satisfy 1 <= low <= high")


def _blob_mask(rng, big_h, big_w, count_range, radius_range):
    yy, xx = np.mgrid[0:big_h, 0:big_w]
    mask = np.zeros((big_h, big_w), dtype=bool)
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    for _ in range(n):
        rad = rng.uniform(radius_range[0], radius_range[1])
        cy = rng.uniform(0, big_h)
        cx = rng.uniform(0, big_w)
        mask |= (yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2 <= rad**2
    return mask.astype(np.uint8)


def shared_dims(config):
    """Indices of the planted non-discriminative channels."""
    perm = Rng(config.seed).spawn(1).permutation(config.d)
    return np.sort(perm[: config.num_shared_dims])


def class_prototypes(config):
    return Rng(config.seed).spawn(0).normal((config.num_classes, config.d), scale=config.prototype_scale)


def generate_synthetic(config, examples_per_class, max_tries=1000):
    """Deterministic list of ``num_classes * examples_per_class`` examples."""
    protos = class_prototypes(config)
    ctx_rng = Rng(config.seed).spawn(3)
    contexts = ctx_rng.normal((config.num_classes, config.d), scale=config.context_sigma)
    contexts *= ctx_rng.uniform(0.0, 2.0, size=(config.num_classes, 1))
    shared = shared_dims(config)
    lone_bg = Rng(config.seed).spawn(4).normal(config.d, scale=config.prototype_scale)
    big_h, big_w = config.h * config.stride, config.w * config.stride
    out = []
    for cls in range(config.num_classes):
        for j in range(examples_per_class):
            rng = Rng(config.seed).spawn(2, cls, j)
            for _ in range(max_tries):
                mask = _blob_mask(rng, big_h, big_w, config.blob_count_range, config.blob_radius_range)
                fm = downsample_mask(mask, config.h, config.w)
                if 0 < fm.sum() < fm.size:
                    break
            else:
                raise DataError(f"could not place a non-degenerate mask for class {cls}, example {j}")
            if config.num_classes > 1:
                other = int(rng.integers(config.num_classes - 1))
                distractor = protos[other + (other >= cls)]
            else:
                distractor = lone_bg
            cover = block_average(mask, config.stride, config.stride)
            feats = (
                cover[None] * protos[cls][:, None, None]
                + (1.0 - cover[None]) * distractor[:, None, None]
                + rng.normal((config.d, config.h, config.w), scale=config.noise_sigma)
            )
            if config.context_sigma > 0:
                feats += contexts[cls][:, None, None]
            if config.offset_sigma > 0:
                feats += rng.normal(config.d, scale=config.offset_sigma)[:, None, None]
            feats[shared] = config.shared_value + rng.normal(
                (len(shared), config.h, config.w), scale=config.noise_sigma
            )
            out.append(LabeledExample(cls, feats.astype(np.float32), mask))
    return out
