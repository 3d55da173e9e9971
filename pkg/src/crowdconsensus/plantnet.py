"""Iterative trust-weighted majority vote.

Each user's weight is a function of the number of distinct species they have
correctly identified. Labels, validity flags and weights are re-estimated in
turn until labels, validity flags and the integer species counts all stop
changing.
"""

from __future__ import annotations

import logging
import warnings
from typing import Callable, Iterable, Mapping

import numpy as np

from . import _engine
from .core import AggregationResult, StrategyConfig, UserStats, VoteTable
from .errors import ConvergenceWarning

__all__ = [
    "weight_fn",
    "is_self_validating",
    "weighted_labels",
    "score_observation",
    "user_species_counts",
    "run_plantnet",
]

logger = logging.getLogger(__name__)


def weight_fn(n: int, config: StrategyConfig | None = None) -> float:
    """Trust score ``n**alpha - n**beta + gamma`` of a user with ``n`` identified species."""
    if n < 0:
        raise ValueError("species count must be non-negative")
    config = config or StrategyConfig()
    return _engine.weight_fn(n, config.alpha, config.beta, config.gamma)


def is_self_validating(weight: float, config: StrategyConfig | None = None) -> bool:
    """Whether a lone vote with this weight makes an observation valid."""
    config = config or StrategyConfig()
    return weight >= config.theta_conf


def _as_weight_array(table: VoteTable, weights) -> np.ndarray:
    if isinstance(weights, Mapping):
        arr = np.zeros(table.n_user)
        for u, w in weights.items():
            arr[u] = w
        return arr
    arr = np.asarray(weights, dtype=np.float64)
    if arr.shape != (table.n_user,):
        raise ValueError(f"expected {table.n_user} user weights, got shape {arr.shape}")
    return arr


def weighted_labels(table: VoteTable, weights, seed: int = 0, workers: int | None = None) -> np.ndarray:
    """Weighted-vote label of every observation; ties go to the seeded priority."""
    w = _as_weight_array(table, weights)
    pairs = table.pairs
    scored = _engine.label_and_score(table, pairs, pairs.priority(seed), w[table.vote_user],
                                     workers=_engine.resolve_workers(workers))
    return scored.labels


def score_observation(votes_on_i: Iterable[tuple[int, int]], weights, label: int,
                      config: StrategyConfig | None = None) -> tuple[float, float, bool]:
    """Confidence, accuracy ratio and validity of ``label`` on one observation.

    ``votes_on_i`` holds ``(user, species)`` pairs; weights are summed in
    ascending user order, as the vectorized engine does.
    """
    config = config or StrategyConfig()
    conf = 0.0
    total = 0.0
    for user, species in sorted(votes_on_i):
        w = float(weights[user])
        total += w
        if species == label:
            conf += w
    if total <= 0:
        raise RuntimeError("observation carries no vote weight")
    ratio = conf / total
    return conf, ratio, bool(ratio >= config.theta_acc and conf >= config.theta_conf)


def user_species_counts(table: VoteTable, labels, valid, config: StrategyConfig | None = None) -> UserStats:
    """Distinct species each user identified as author (valid only) and as voter."""
    config = config or StrategyConfig()
    labels = np.asarray(labels)
    valid = np.asarray(valid, dtype=bool)
    n_author, n_vote, n_u = _engine.count_species(table, table.user_species, labels, valid,
                                                  config.vote_discount)
    weight = _engine.weights_from_counts(n_u, config.alpha, config.beta, config.gamma)
    return UserStats(n_author, n_vote, n_u, weight)


def _weights(n_u, config: StrategyConfig, weight_function):
    if weight_function is None:
        return _engine.weights_from_counts(n_u, config.alpha, config.beta, config.gamma)
    uniq, inverse = np.unique(n_u, return_inverse=True)
    return np.array([float(weight_function(int(n))) for n in uniq])[inverse.reshape(-1)]


def iterate(table: VoteTable, config: StrategyConfig, extra: _engine.Extra | None = None,
            workers: int | None = None, strategy: str = "plantnet",
            weight_function: Callable[[int], float] | None = None) -> AggregationResult:
    """Fixed-point loop shared by the plain strategy and the fixed-weight AI modes.

    An ``extra`` vote that stays out of the label only rescores the final
    round: the trust dynamics, and so the labels, are those of the plain run.
    """
    workers = _engine.resolve_workers(workers)
    overlay = None
    if extra is not None and not extra.in_label:
        overlay, extra = extra, None
    if extra is None or not len(extra.obs):
        pairs = table.pairs
        extra = None
    else:
        pairs = _engine.build_pairs(table.n_obs, table.vote_obs, table.vote_species,
                                    extra.obs, extra.species)
    priority = pairs.priority(config.seed)
    us = table.user_species

    weights = np.full(table.n_user, config.gamma)
    prev = None
    converged = False
    for it in range(1, config.max_iterations + 1):
        scored = _engine.label_and_score(table, pairs, priority, weights[table.vote_user],
                                         extra=extra, workers=workers)
        ratio = _engine.accuracy_ratio(scored.confidence, scored.total)
        valid = (ratio >= config.theta_acc) & (scored.confidence >= config.theta_conf)
        n_author, n_vote, n_u = _engine.count_species(table, us, scored.labels, valid,
                                                      config.vote_discount)
        logger.debug("iteration %d: %d valid observations", it, int(valid.sum()))
        state = (scored.labels, valid, n_u)
        if prev is not None and all(np.array_equal(a, b) for a, b in zip(state, prev)):
            converged = True
            break
        prev = state
        weights = _weights(n_u, config, weight_function)

    if overlay is not None:
        # same weights as the last scoring round, AI term added after the humans
        conf = scored.confidence.copy()
        total = scored.total.copy()
        agree = overlay.species == scored.labels[overlay.obs]
        conf[overlay.obs[agree]] += overlay.weight
        total[overlay.obs] += overlay.weight
        ratio = _engine.accuracy_ratio(conf, total)
        valid = (ratio >= config.theta_acc) & (conf >= config.theta_conf)
        scored = _engine.Scored(scored.labels, conf, total)

    if not converged:
        warnings.warn(f"{strategy}: no fixed point after {config.max_iterations} iterations",
                      ConvergenceWarning, stacklevel=3)
    stats = UserStats(n_author, n_vote, n_u, weights)
    return AggregationResult(
        strategy=strategy,
        labels=scored.labels,
        confidence=scored.confidence,
        accuracy_ratio=ratio,
        valid=valid,
        user_weights=weights,
        iterations_run=it,
        converged=converged,
        user_stats=stats,
    )


def run_plantnet(table: VoteTable, config: StrategyConfig | None = None,
                 workers: int | None = None,
                 weight_function: Callable[[int], float] | None = None) -> AggregationResult:
    """Run the trust-weighted majority vote to its fixed point.

    Every user starts at weight ``gamma``. Each round labels observations by
    weighted vote, flags as valid those whose supporting weight reaches
    ``theta_conf`` with an agreement ratio of at least ``theta_acc``, then
    recomputes weights from the species counts. The result carries the state
    of the last round; on a fixed point its labels and flags are consistent
    with ``user_weights``.

    ``weight_function`` replaces the default ``n**alpha - n**beta + gamma``
    map from species count to weight; initial weights stay at ``gamma``.
    """
    return iterate(table, config or StrategyConfig(), workers=workers, weight_function=weight_function)
