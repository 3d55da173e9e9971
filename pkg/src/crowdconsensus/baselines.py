"""Reference aggregation strategies: majority vote, WAWA and TwoThird."""

from __future__ import annotations

import numpy as np

from . import _engine
from .core import AggregationResult, VoteTable

__all__ = ["aggregate_mv", "aggregate_wawa", "aggregate_twothird"]


def _majority(table: VoteTable, seed: int, workers):
    pairs = table.pairs
    ones = np.ones(table.n_votes)
    return _engine.label_and_score(table, pairs, pairs.priority(seed), ones,
                                   workers=_engine.resolve_workers(workers))


def aggregate_mv(table: VoteTable, seed: int = 0, workers: int | None = None) -> AggregationResult:
    """Most voted species per observation. Every observation is valid."""
    s = _majority(table, seed, workers)
    return AggregationResult(
        strategy="mv",
        labels=s.labels,
        confidence=s.confidence,
        accuracy_ratio=_engine.accuracy_ratio(s.confidence, s.total),
        valid=np.ones(table.n_obs, dtype=bool),
        user_weights=np.ones(table.n_user),
        iterations_run=1,
    )


def wawa_weights(table: VoteTable, mv_labels: np.ndarray) -> np.ndarray:
    """Share of each user's votes that agree with the majority label."""
    agree = table.vote_species == mv_labels[table.vote_obs]
    hits = np.bincount(table.vote_user, minlength=table.n_user)
    good = np.bincount(table.vote_user[agree], minlength=table.n_user)
    out = np.zeros(table.n_user)
    np.divide(good, hits, out=out, where=hits > 0)
    return out


def aggregate_wawa(table: VoteTable, seed: int = 0, workers: int | None = None) -> AggregationResult:
    """Worker Agreement With Aggregate.

    Users are weighted by how often they agree with the majority vote, then
    labels are recomputed by weighted vote. Ties in both rounds use ``seed``.
    """
    workers = _engine.resolve_workers(workers)
    mv = _majority(table, seed, workers)
    w = wawa_weights(table, mv.labels)
    pairs = table.pairs
    s = _engine.label_and_score(table, pairs, pairs.priority(seed), w[table.vote_user],
                                workers=workers)
    return AggregationResult(
        strategy="wawa",
        labels=s.labels,
        confidence=s.confidence,
        accuracy_ratio=_engine.accuracy_ratio(s.confidence, s.total),
        valid=np.ones(table.n_obs, dtype=bool),
        user_weights=w,
        iterations_run=2,
    )


def aggregate_twothird(table: VoteTable, seed: int = 0, workers: int | None = None) -> AggregationResult:
    """Majority label, valid only with >= 2 votes of which >= 2/3 agree.

    Invalid observations still carry their majority label.
    """
    s = _majority(table, seed, workers)
    n_votes = table.votes_per_obs()
    top = s.confidence.astype(np.int64)  # unit weights: the tally is an exact count
    valid = (n_votes >= 2) & (3 * top >= 2 * n_votes)
    return AggregationResult(
        strategy="twothird",
        labels=s.labels,
        confidence=s.confidence,
        accuracy_ratio=_engine.accuracy_ratio(s.confidence, s.total),
        valid=valid,
        user_weights=np.ones(table.n_user),
        iterations_run=1,
    )
