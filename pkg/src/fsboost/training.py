"""Episodic SGD training of the prediction head on sampled train-class episodes."""
import logging
from dataclasses import dataclass

import numpy as np

from .data import group_by_class, sample_episode
from .embedding import masked_pool, support_relevance, uniform_relevance, mean_class_vector
from .gradients import backward
from .head import HIDDEN_CHANNELS, init_params
from .tensor import Rng, derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 7e-3
    iterations: int = 2000
    batch_size: int = 8
    seed: int = 0
    shot: int = 1
    hidden: int = HIDDEN_CHANNELS

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.shot < 1 or self.hidden < 1:
            raise ValueError("learning_rate, batch_size, shot and hidden must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


def episode_gradients(params, episode, use_relevance):
    """Query loss and parameter gradients for one episode."""
    supports = episode.support_pairs()
    d = params.d
    r = support_relevance(supports) if use_relevance else uniform_relevance(d)
    f = mean_class_vector(supports)
    q = episode.query
    return backward(params, f, q.features, r, q.feature_mask, wrt="params")


def train_head(dataset, split, config, use_relevance, init=None):
    """Train head parameters; returns ``(params, losses)``.

    ``losses[i]`` is the mean batch loss at iteration ``i`` before its update.
    Batch gradients are averaged over episodes in a fixed order.
    """
    dataset = list(dataset)
    d = dataset[0].d
    params = init if init is not None else init_params(d, Rng(derive_seed(config.seed, 0)), config.hidden)
    rng = Rng(derive_seed(config.seed, 1))
    groups = group_by_class(dataset)
    losses = []
    work = params.astype(np.float64)
    for it in range(config.iterations):
        total = None
        batch_loss = 0.0
        for _ in range(config.batch_size):
            ep = sample_episode(dataset, split, config.shot, "train", rng, groups)
            g = episode_gradients(work, ep, use_relevance)
            batch_loss += g.loss
            total = g.d_params if total is None else total.map(np.add, g.d_params)
        scale = config.learning_rate / config.batch_size
        work = work.map(lambda p, gp: p - scale * gp, total)
        losses.append(batch_loss / config.batch_size)
        if log.isEnabledFor(logging.DEBUG) and it % 100 == 0:
            log.debug("iteration %d loss %.5f", it, losses[-1])
    if config.iterations:
        params = work.astype(np.float32)
    return params, losses
