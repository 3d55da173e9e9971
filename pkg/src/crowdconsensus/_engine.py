"""Vectorized kernels shared by every strategy.

Votes are grouped into (observation, species) *pairs*; a weighted tally is a
``bincount`` of vote weights over pair indices. Votes are stored sorted by
(observation, user), and ``bincount`` accumulates in input order, so every
tally is summed in ascending user id regardless of how observations are
chunked across workers.

Ties in an argmax are broken by a per-pair priority drawn from SplitMix64
keyed on ``(seed, observation, species)``: the tied species with the smallest
priority wins. Priorities do not depend on iteration, chunking or row order,
so a persisting tie resolves the same way every time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_NO_KEY = np.uint64(2**64 - 1)


def splitmix64(x: np.ndarray) -> np.ndarray:
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def tie_priority(seed: int, obs, species) -> np.ndarray:
    """SplitMix64 priority of each (obs, species) pair under ``seed``."""
    base = splitmix64(np.array([seed], dtype=np.uint64))
    h = splitmix64(base ^ np.asarray(obs, dtype=np.uint64))
    return splitmix64(h ^ np.asarray(species, dtype=np.uint64))


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit value, capped by ``CONSENSUS_THREADS`` when set."""
    cap = os.environ.get("CONSENSUS_THREADS")
    n = workers if workers is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"CONSENSUS_THREADS must be an integer, got {cap!r}") from None
    return max(1, int(n))


def obs_spans(n_obs: int, workers: int) -> list[tuple[int, int]]:
    if workers <= 1 or n_obs < 2 * workers:
        return [(0, n_obs)]
    bounds = np.linspace(0, n_obs, workers + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


@dataclass
class PairIndex:
    """Distinct (obs, species) pairs of a table, optionally extended by pseudo-votes."""

    pair_obs: np.ndarray
    pair_species: np.ndarray
    pair_ptr: np.ndarray  # pairs of obs i are pair_ptr[i]:pair_ptr[i+1]
    of_vote: np.ndarray  # pair index of every vote
    of_extra: np.ndarray  # pair index of every pseudo-vote

    def priority(self, seed: int) -> np.ndarray:
        return tie_priority(seed, self.pair_obs, self.pair_species)


def build_pairs(n_obs, vote_obs, vote_species, extra_obs=None, extra_species=None) -> PairIndex:
    vo = np.asarray(vote_obs, dtype=np.int64)
    vs = np.asarray(vote_species, dtype=np.int64)
    n_v = len(vo)
    if extra_obs is not None and len(extra_obs):
        vo = np.concatenate([vo, np.asarray(extra_obs, dtype=np.int64)])
        vs = np.concatenate([vs, np.asarray(extra_species, dtype=np.int64)])
    width = int(vs.max(initial=0)) + 1
    uniq, inverse = np.unique(vo * width + vs, return_inverse=True)
    pair_obs = uniq // width
    pair_species = uniq % width
    pair_ptr = np.searchsorted(pair_obs, np.arange(n_obs + 1)).astype(np.int64)
    inverse = inverse.reshape(-1)
    small = np.int32 if len(uniq) < 2**31 else np.int64
    return PairIndex(pair_obs, pair_species, pair_ptr,
                     inverse[:n_v].astype(small), inverse[n_v:].astype(small))


def _segment_argmax(values, priority, seg_ptr, seg_of):
    """Index (within ``values``) of the winning element of every segment."""
    starts = seg_ptr[:-1]
    best = np.maximum.reduceat(values, starts)
    at_max = values == best[seg_of]
    keys = np.where(at_max, priority, _NO_KEY)
    kmin = np.minimum.reduceat(keys, starts)
    hit = np.flatnonzero(at_max & (keys == kmin[seg_of]))
    # 64-bit priority collisions are astronomically rare; keep the first hit.
    first = np.ones(len(hit), dtype=bool)
    first[1:] = seg_of[hit[1:]] != seg_of[hit[:-1]]
    return hit[first]


@dataclass
class Extra:
    """Constant-weight pseudo-votes (the AI), at most one per observation.

    ``obs`` must be sorted ascending. ``in_label`` controls whether the
    pseudo-vote enters the label argmax; it always enters confidence and the
    accuracy denominator.
    """

    obs: np.ndarray
    species: np.ndarray
    weight: float
    in_label: bool = True


@dataclass
class Scored:
    labels: np.ndarray
    confidence: np.ndarray
    total: np.ndarray


def label_and_score(table, pairs: PairIndex, priority: np.ndarray, vote_weight: np.ndarray,
                    extra: Extra | None = None, workers: int = 1) -> Scored:
    """Weighted argmax label, supporting weight and total weight of every observation."""
    n_obs = table.n_obs
    labels = np.empty(n_obs, dtype=np.int64)
    confidence = np.empty(n_obs, dtype=np.float64)
    total = np.empty(n_obs, dtype=np.float64)
    obs_ptr = table.obs_ptr
    pp = pairs.pair_ptr
    if extra is not None and len(extra.obs):
        extra_ptr = np.searchsorted(extra.obs, np.arange(n_obs + 1))
    else:
        extra = None

    def run(span):
        a, b = span
        v0, v1 = obs_ptr[a], obs_ptr[b]
        p0, p1 = pp[a], pp[b]
        w = vote_weight[v0:v1]
        tally = np.bincount(pairs.of_vote[v0:v1] - p0, weights=w, minlength=p1 - p0)
        tot = np.bincount(table.vote_obs[v0:v1] - a, weights=w, minlength=b - a)
        label_tally = tally
        if extra is not None:
            e0, e1 = extra_ptr[a], extra_ptr[b]
            e_pair = pairs.of_extra[e0:e1] - p0
            e_obs = extra.obs[e0:e1] - a
            if extra.in_label:
                label_tally = tally.copy()
                label_tally[e_pair] += extra.weight
        seg_of = pairs.pair_obs[p0:p1] - a
        win = _segment_argmax(label_tally, priority[p0:p1], pp[a:b + 1] - p0, seg_of)
        lab = pairs.pair_species[p0 + win]
        conf = tally[win]
        if extra is not None:
            match = extra.species[e0:e1] == lab[e_obs]
            conf[e_obs[match]] += extra.weight
            tot[e_obs] += extra.weight
        labels[a:b] = lab
        confidence[a:b] = conf
        total[a:b] = tot

    spans = obs_spans(n_obs, workers)
    if len(spans) == 1:
        run(spans[0])
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(run, spans))
    return Scored(labels, confidence, total)


def accuracy_ratio(confidence, total):
    out = np.zeros_like(confidence)
    np.divide(confidence, total, out=out, where=total > 0)
    return out


def weight_fn(n, alpha: float, beta: float, gamma: float) -> float:
    n = float(n)
    return n ** alpha - n ** beta + gamma


def weights_from_counts(n_identified: np.ndarray, alpha, beta, gamma) -> np.ndarray:
    # Scalar evaluation on the distinct counts keeps results bit-identical to weight_fn.
    uniq, inverse = np.unique(n_identified, return_inverse=True)
    table = np.array([weight_fn(n, alpha, beta, gamma) for n in uniq.tolist()], dtype=np.float64)
    return table[inverse.reshape(-1)]


@dataclass
class UserSpeciesIndex:
    """Distinct (user, species) pairs and the pair index of every vote."""

    of_vote: np.ndarray
    user: np.ndarray


def build_user_species(table) -> UserSpeciesIndex:
    width = max(table.n_species, 1)
    key = table.vote_user.astype(np.int64) * width + table.vote_species
    uniq, inverse = np.unique(key, return_inverse=True)
    return UserSpeciesIndex(inverse.reshape(-1).astype(np.int64), uniq // width)


def count_species(table, us: UserSpeciesIndex, labels, valid, vote_discount: float):
    """Distinct correctly identified species per user, split author / voter.

    A species identified both as author (on a valid observation) and as voter
    counts only on the author side.
    """
    correct = table.vote_species == labels[table.vote_obs]
    is_author = table.vote_is_author
    author_mask = correct & is_author & valid[table.vote_obs]
    vote_mask = correct & ~is_author
    n_pairs = len(us.user)
    author_hit = np.zeros(n_pairs, dtype=bool)
    author_hit[us.of_vote[author_mask]] = True
    vote_hit = np.zeros(n_pairs, dtype=bool)
    vote_hit[us.of_vote[vote_mask]] = True
    vote_hit &= ~author_hit
    n_author = np.bincount(us.user[author_hit], minlength=table.n_user)
    n_vote = np.bincount(us.user[vote_hit], minlength=table.n_user)
    return n_author, n_vote, round_half_up(n_author, n_vote, vote_discount)


def round_half_up(n_author, n_vote, vote_discount: float) -> np.ndarray:
    """round(n_author + vote_discount * n_vote), halves away from zero (inputs are >= 0)."""
    inv = 1.0 / vote_discount
    if math.isfinite(inv) and float(inv).is_integer():
        # Exact integer arithmetic when the discount is 1/m: floor((2(a*m + v) + m) / 2m).
        m = int(inv)
        num = np.asarray(n_author, dtype=np.int64) * m + np.asarray(n_vote, dtype=np.int64)
        return (2 * num + m) // (2 * m)
    x = np.asarray(n_author, dtype=np.float64) + vote_discount * np.asarray(n_vote, dtype=np.float64)
    return np.floor(x + 0.5).astype(np.int64)
