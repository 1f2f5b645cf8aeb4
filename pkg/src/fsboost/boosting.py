"""Guided ensemble inference at test time.

Starting from the pooled support class vector, each step predicts the
support masks, records the mean support IoU as the expert's confidence, and
moves the class vector down the gradient of the summed support loss. Every
iterate is an expert; the query prediction fuses the experts' probability
maps weighted by confidence.
"""
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import mean_class_vector, relevance, feature_difference, uniform_relevance
from .errors import NonFiniteError
from .gradients import backward
from .head import cross_entropy, head_forward, predicted_from_logits
from .metrics import iou
from .similarity import weighted_cosine_map

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class BoostConfig:
    num_experts: int = 10
    step_size: float = 1e-2
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.num_experts < 1:
            raise ValueError("num_experts must be >= 1")
        if self.step_size < 0:
            raise ValueError("step_size must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class Expert:
    f: np.ndarray
    confidence: float
    support_loss: float


@dataclass
class EnsembleResult:
    fused_probs: np.ndarray  # (2, h, w), channel 1 is foreground
    fused_binary: np.ndarray  # (h, w) uint8
    experts: list = field(default_factory=list)
    per_expert_query_probs: list | None = None

    @property
    def foreground(self):
        return self.fused_probs[1]


def predict(params, f, features, r):
    return head_forward(params, weighted_cosine_map(f, features, r), features)


def fuse_probs(prob_maps, weights):
    """Convex combination ``sum_n w_n p_n`` with ``sum_n w_n == 1``.

    Evaluated as ``p_1 + sum_{n>1} w_n (p_n - p_1)``: a single map, or a set of
    identical maps, comes back unchanged bit for bit. The result is clipped to
    the pointwise range of the inputs to absorb rounding.
    """
    maps = [np.asarray(p, dtype=np.float64) for p in prob_maps]
    if not maps:
        raise ValueError("nothing to fuse")
    base = maps[0]
    out = base.copy()
    for wn, p in zip(weights[1:], maps[1:]):
        out += float(wn) * (p - base)
    if len(maps) == 1:
        return out
    stack = np.stack(maps)
    return np.clip(out, stack.min(axis=0), stack.max(axis=0))


def confidence_weights(confidences):
    """Normalised confidences; plain average when they sum to (almost) zero."""
    rho = np.asarray(confidences, dtype=np.float64)
    total = rho.sum()
    if total < 1e-8:
        return np.full(rho.shape, 1.0 / rho.size)
    return rho / total


def _support_pass(params, f, supports, r, need_grad):
    """Summed support loss, mean support IoU and (optionally) the summed gradient."""
    loss, rho, grad = 0.0, 0.0, None
    for feats, mask in supports:
        if need_grad:
            g = backward(params, f, feats, r, mask, wrt="class_vector")
            grad = g.d_class_vector if grad is None else grad + g.d_class_vector
            loss += g.loss
            binary = predicted_from_logits(g.logits).binary
        else:
            pred = predict(params, f, feats, r)
            loss += cross_entropy(pred, mask)
            binary = pred.binary
        rho += iou(binary, mask)
    return loss, rho / len(supports), grad


def build_ensemble(params, supports, r, config=BoostConfig()):
    """Experts ``f^1..f^N`` for ``supports = [(features, feature_mask), ...]``.

    ``f^1`` is the mean pooled class vector. Each expert stores its pre-update
    value; the update after the last expert is never computed.
    """
    supports = list(supports)
    f = mean_class_vector(supports)
    r = np.asarray(r, dtype=np.float64)
    m = np.zeros_like(f)
    v = np.zeros_like(f)
    experts = []
    for n in range(1, config.num_experts + 1):
        last = n == config.num_experts
        try:
            loss, rho, grad = _support_pass(params, f, supports, r, need_grad=not last)
            if not np.isfinite(loss):
                raise NonFiniteError(f"support loss is {loss}")
        except NonFiniteError as exc:
            if n == 1:
                raise
            warnings.warn(f"boosting diverged at expert {n} ({exc}); keeping {n - 1} experts", RuntimeWarning)
            break
        experts.append(Expert(f.copy(), float(rho), float(loss)))
        if last:
            break
        if config.optimizer == "sgd":
            f = f - config.step_size * grad
        else:
            m = config.beta1 * m + (1 - config.beta1) * grad
            v = config.beta2 * v + (1 - config.beta2) * grad * grad
            m_hat = m / (1 - config.beta1**n)
            v_hat = v / (1 - config.beta2**n)
            f = f - config.step_size * m_hat / (np.sqrt(v_hat) + config.eps)
    return experts


def fuse(experts, query_features, r, params, keep_expert_probs=False):
    """Confidence-weighted average of the experts' query probability maps."""
    if not experts:
        raise ValueError("fuse needs at least one expert")
    probs = [predict(params, e.f, query_features, r).probs for e in experts]
    fused = fuse_probs(probs, confidence_weights([e.confidence for e in experts]))
    return EnsembleResult(
        fused_probs=fused,
        fused_binary=(fused[1] > 0.5).astype(np.uint8),
        experts=list(experts),
        per_expert_query_probs=probs if keep_expert_probs else None,
    )


def boosted_inference(params, supports, query_features, r, config=BoostConfig(), keep_expert_probs=False):
    experts = build_ensemble(params, supports, r, config)
    return fuse(experts, query_features, r, params, keep_expert_probs)


def base_inference(params, supports, query_features, r):
    """Non-boosted prediction from the mean pooled class vector."""
    return predict(params, mean_class_vector(supports), query_features, r)


def kshot_average_baseline(params, supports, query_features, use_relevance, boost=None):
    """Average of K independent one-shot query predictions.

    Each support gets its own class vector and, with ``use_relevance``, its own
    relevance. With ``boost`` set, each support is boosted on its own before
    averaging.
    """
    supports = list(supports)
    if not supports:
        raise ValueError("need at least one support")
    d = np.shape(supports[0][0])[0]
    probs, experts = [], []
    for feats, mask in supports:
        r = relevance(feature_difference(feats, mask)) if use_relevance else uniform_relevance(d)
        if boost is None:
            probs.append(base_inference(params, [(feats, mask)], query_features, r).probs)
        else:
            res = boosted_inference(params, [(feats, mask)], query_features, r, boost)
            probs.append(res.fused_probs)
            experts.extend(res.experts)
    fused = fuse_probs(probs, np.full(len(probs), 1.0 / len(probs)))
    return EnsembleResult(fused, (fused[1] > 0.5).astype(np.uint8), experts, probs)


def expert_trace(experts):
    return [
        {"expert": n, "support_loss": e.support_loss, "confidence": e.confidence}
        for n, e in enumerate(experts, start=1)
    ]


def write_trace(path, episodes):
    """JSON list of ``{"fold", "episode", "class_id", "experts": [...]}`` records."""
    Path(path).write_text(json.dumps(episodes, indent=1) + "\n", encoding="utf-8")
