"""Synthetic crowdsourcing data with a heavy-tailed vote distribution.

Users fall in three tiers (expert, average, single-time). Single-time users
cast exactly one vote when enough vote slots exist; the remaining slots go to
expert and average users in proportion to a Pareto activity score, so a few
users cast most of the votes. Each observation's first slot is its author.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AiPredictionSet, VoteTable

__all__ = ["SynthConfig", "SyntheticData", "generate_synthetic", "simulate_ai_predictions"]


@dataclass(frozen=True)
class SynthConfig:
    n_obs: int = 10_000
    n_users: int = 2_000
    n_species: int = 500
    skill_mix: tuple[float, float, float] = (0.02, 0.5, 0.48)  # expert, average, single-time
    noise_rate: tuple[float, float, float] = (0.02, 0.25, 0.45)
    votes_zipf: float = 3.0  # votes per observation ~ Zipf(votes_zipf), capped at max_votes
    max_votes: int = 50
    activity_shape: float = 1.2  # Pareto shape of per-user activity
    expert_activity: float = 5.0  # activity multiplier for experts
    species_zipf: float = 1.0  # popularity exponent of species
    seed: int = 0

    def __post_init__(self):
        if min(self.n_obs, self.n_users, self.n_species) < 1:
            raise ValueError("n_obs, n_users and n_species must be positive")
        if len(self.skill_mix) != 3 or min(self.skill_mix) < 0 or abs(sum(self.skill_mix) - 1) > 1e-9:
            raise ValueError("skill_mix must be three non-negative proportions summing to 1")
        if len(self.noise_rate) != 3 or not all(0 <= r <= 1 for r in self.noise_rate):
            raise ValueError("noise_rate must be three values in [0, 1]")
        if self.votes_zipf <= 1:
            raise ValueError("votes_zipf must exceed 1")
        if self.max_votes < 1:
            raise ValueError("max_votes must be >= 1")


@dataclass
class SyntheticData:
    table: VoteTable
    truth: np.ndarray  # true species per observation
    experts: np.ndarray  # user ids of the expert tier
    tier: np.ndarray  # 0 expert, 1 average, 2 single-time


def _tiers(rng, config: SynthConfig) -> np.ndarray:
    counts = np.floor(np.asarray(config.skill_mix) * config.n_users).astype(np.int64)
    counts[np.argmax(config.skill_mix)] += config.n_users - counts.sum()
    return rng.permutation(np.repeat(np.arange(3), counts))


def generate_synthetic(config: SynthConfig) -> SyntheticData:
    rng = np.random.default_rng(config.seed)
    K = config.n_species
    tier = _tiers(rng, config)

    per_obs = np.minimum(rng.zipf(config.votes_zipf, config.n_obs), config.max_votes)
    per_obs = np.minimum(per_obs, config.n_users)
    n_slots = int(per_obs.sum())

    single = np.flatnonzero(tier == 2)
    regular = np.flatnonzero(tier != 2)
    n_single = min(len(single), n_slots)
    slot_user = [rng.permutation(single)[:n_single]]
    rest = n_slots - n_single
    if rest:
        pool = regular if len(regular) else single
        activity = rng.pareto(config.activity_shape, len(pool)) + 1.0
        activity[tier[pool] == 0] *= config.expert_activity
        slot_user.append(rng.choice(pool, size=rest, p=activity / activity.sum()))
    slot_user = rng.permutation(np.concatenate(slot_user))
    slot_obs = np.repeat(np.arange(config.n_obs), per_obs)

    ranks = np.arange(1, K + 1, dtype=np.float64)
    popularity = ranks ** -config.species_zipf
    truth = rng.choice(K, size=config.n_obs, p=popularity / popularity.sum())

    noise = np.asarray(config.noise_rate)[tier[slot_user]]
    wrong = rng.random(n_slots) < noise
    species = truth[slot_obs].copy()
    if K > 1:
        shift = rng.integers(1, K, size=n_slots)
        species[wrong] = (species[wrong] + shift[wrong]) % K

    first = np.concatenate([[0], np.cumsum(per_obs)[:-1]])
    author = slot_user[first]
    # A user drawn twice on one observation keeps a single vote; drop later
    # duplicates so the author's (first) vote survives.
    key = slot_obs.astype(np.int64) * config.n_users + slot_user
    _, keep = np.unique(key, return_index=True)
    keep.sort()
    table = VoteTable.from_codes(slot_obs[keep], slot_user[keep], species[keep], author,
                                 n_user=config.n_users, n_species=K)
    return SyntheticData(table, truth, np.flatnonzero(tier == 0), tier)


def simulate_ai_predictions(truth: np.ndarray, n_species: int, seed: int = 0,
                            coverage: float = 1.0, calibrated: bool = True,
                            beta_a: float = 4.0, beta_b: float = 1.5) -> AiPredictionSet:
    """Top-1 AI predictions for a random share ``coverage`` of observations.

    Scores are drawn from Beta(beta_a, beta_b). With ``calibrated`` the
    prediction is correct with probability equal to its score; otherwise it is
    correct with the mean score regardless of the individual value.
    """
    rng = np.random.default_rng(seed)
    n = len(truth)
    obs = np.flatnonzero(rng.random(n) < coverage)
    prob = rng.beta(beta_a, beta_b, size=len(obs))
    p_correct = prob if calibrated else np.full(len(obs), prob.mean())
    right = rng.random(len(obs)) < p_correct
    species = truth[obs].copy()
    if n_species > 1:
        shift = rng.integers(1, n_species, size=len(obs))
        species[~right] = (species[~right] + shift[~right]) % n_species
    return AiPredictionSet(obs, species, prob)
