"""Episodic evaluation under the ablation variants.

Episode ``i`` of fold ``f`` is always drawn with seed
``derive_seed(base_seed, f, i)``, so different variants (and sweeps over the
number of experts) are compared on identical episodes.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boosting import (
    BoostConfig,
    EnsembleResult,
    base_inference,
    build_ensemble,
    confidence_weights,
    expert_trace,
    fuse,
    fuse_probs,
    kshot_average_baseline,
    predict,
)
from .data import group_by_class, sample_episode
from .embedding import support_relevance, uniform_relevance
from .metrics import ClassScore, confusion_counts, miou
from .tensor import Rng, derive_seed

# variant name -> (use_relevance, use_boosting)
VARIANTS = {
    "B": (False, False),
    "B+C1": (True, False),
    "B+C2": (False, True),
    "B+C1+C2": (True, True),
}
KSHOT_MODES = ("joint", "average")


@dataclass(frozen=True)
class Ablation:
    use_relevance: bool = True
    use_boosting: bool = True
    kshot_mode: str = "joint"

    def __post_init__(self):
        if self.kshot_mode not in KSHOT_MODES:
            raise ValueError(f"kshot_mode must be one of {KSHOT_MODES}")

    @classmethod
    def from_variant(cls, name, kshot_mode="joint"):
        try:
            rel, boost = VARIANTS[name]
        except KeyError:
            raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}") from None
        return cls(rel, boost, kshot_mode)

    @property
    def name(self):
        for key, flags in VARIANTS.items():
            if flags == (self.use_relevance, self.use_boosting):
                return key if self.kshot_mode == "joint" else f"{key} (Average)"
        raise AssertionError("unreachable")


def episode_relevance(params, supports, use_relevance):
    return support_relevance(supports) if use_relevance else uniform_relevance(params.d)


def infer_episode(params, episode, ablation, boost=BoostConfig()):
    """Query prediction for one episode under ``ablation``."""
    supports = episode.support_pairs()
    fq = episode.query.features
    if ablation.kshot_mode == "average":
        return kshot_average_baseline(
            params, supports, fq, ablation.use_relevance, boost if ablation.use_boosting else None
        )
    r = episode_relevance(params, supports, ablation.use_relevance)
    if ablation.use_boosting:
        return fuse(build_ensemble(params, supports, r, boost), fq, r, params)
    pred = base_inference(params, supports, fq, r)
    return EnsembleResult(pred.probs, pred.binary, [])


@dataclass
class EpisodeRecord:
    index: int
    class_id: int
    tp: int
    fp: int
    fn: int
    iou: float
    experts: list = field(default_factory=list)


@dataclass
class FoldResult:
    fold: int
    scores: dict
    records: list

    @property
    def miou(self):
        return miou(self.scores.values())


def draw_episode(dataset, split, k, seed, fold, index, groups=None):
    rng = Rng(derive_seed(seed, fold, index))
    return sample_episode(dataset, split, k, "test", rng, groups)


def _record(index, episode, binary, experts):
    tp, fp, fn = confusion_counts(binary, episode.query.feature_mask)
    union = tp + fp + fn
    return EpisodeRecord(index, episode.class_id, tp, fp, fn, tp / union if union else 1.0, expert_trace(experts))


def _tally(fold, records, split):
    scores = {}
    for rec in sorted(records, key=lambda r: r.index):
        s = scores.setdefault(rec.class_id, ClassScore(rec.class_id))
        s.tp += rec.tp
        s.fp += rec.fp
        s.fn += rec.fn
        union = rec.tp + rec.fp + rec.fn
        s.episode_ious.append(rec.tp / union if union else 1.0)
    return FoldResult(fold, scores, sorted(records, key=lambda r: r.index))


def _run_chunk(args):
    dataset, split, params, ablation, boost, k, seed, indices = args
    groups = group_by_class(dataset)
    out = []
    for i in indices:
        ep = draw_episode(dataset, split, k, seed, split.fold_index, i, groups)
        res = infer_episode(params, ep, ablation, boost)
        out.append(_record(i, ep, res.fused_binary, res.experts))
    return out


def evaluate_fold(dataset, split, params, ablation, boost=BoostConfig(), k=1, episodes=200, seed=0, workers=1):
    """Run ``episodes`` test episodes of one fold; results are ordered by episode index."""
    indices = list(range(episodes))
    if workers <= 1:
        records = _run_chunk((dataset, split, params, ablation, boost, k, seed, indices))
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(dataset, split, params, ablation, boost, k, seed, c) for c in chunks])
            records = [r for part in parts for r in part]
    return _tally(split.fold_index, records, split)


def evaluate_fold_sweep(dataset, split, params, use_relevance, n_values, boost=BoostConfig(), k=1, episodes=200, seed=0):
    """Joint-mode boosted evaluation for several ensemble sizes on the same episodes.

    Experts are built once with ``max(n_values)`` steps; an ``N``-expert
    ensemble is its first ``N`` experts, which is exactly what a run with
    ``num_experts=N`` produces.
    """
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values or n_values[0] < 1:
        raise ValueError("n_values must be positive integers")
    big = BoostConfig(n_values[-1], boost.step_size, boost.optimizer, boost.beta1, boost.beta2, boost.eps)
    groups = group_by_class(dataset)
    records = {n: [] for n in n_values}
    for i in range(episodes):
        ep = draw_episode(dataset, split, k, seed, split.fold_index, i, groups)
        supports = ep.support_pairs()
        r = episode_relevance(params, supports, use_relevance)
        experts = build_ensemble(params, supports, r, big)
        fq = ep.query.features
        probs = [predict(params, e.f, fq, r).probs for e in experts]
        for n in n_values:
            sub = experts[:n]
            fused = fuse_probs(probs[:n], confidence_weights([e.confidence for e in sub]))
            records[n].append(_record(i, ep, (fused[1] > 0.5).astype(np.uint8), sub))
    return {n: _tally(split.fold_index, recs, split) for n, recs in records.items()}
