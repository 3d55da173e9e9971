"""Domain types and the columnar vote table.

All identifiers are dense integers. External tokens (whatever the data files
use) are kept in per-axis dictionaries so results can be written back in the
original vocabulary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, MissingAuthor, RangeError, UnknownSpecies

__all__ = [
    "StrategyConfig",
    "VoteTable",
    "UserStats",
    "AggregationResult",
    "AiPredictionSet",
    "build_vote_table",
    "table_from_columns",
    "voter_set",
]

DEFAULT_GAMMA = math.log(2.1)
_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class StrategyConfig:
    """Thresholds and weight-function parameters of the trust-weighted vote.

    Defaults are the production values: accuracy threshold 0.7, confidence
    threshold 2, ``f(n) = n**0.5 - n**0.2 + ln(2.1)`` and a 1/10 discount on
    species identified by voting on other users' observations.
    """

    theta_acc: float = 0.7
    theta_conf: float = 2.0
    alpha: float = 0.5
    beta: float = 0.2
    gamma: float = DEFAULT_GAMMA
    vote_discount: float = 0.1
    max_iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.theta_acc <= 1:
            raise ValueError(f"theta_acc must lie in (0, 1], got {self.theta_acc}")
        if not self.theta_conf > 0:
            raise ValueError(f"theta_conf must be positive, got {self.theta_conf}")
        if not self.alpha > self.beta > 0:
            raise ValueError(f"need alpha > beta > 0, got alpha={self.alpha}, beta={self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.vote_discount > 0:
            raise ValueError(f"vote_discount must be positive, got {self.vote_discount}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 <= self.seed <= _UINT64_MAX:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def replace(self, **changes) -> "StrategyConfig":
        return replace(self, **changes)


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def _factorize(values) -> tuple[np.ndarray, np.ndarray]:
    """Dense codes in first-appearance order plus the token array."""
    codes, uniques = pd.factorize(_object_array(values), sort=False)
    return codes.astype(np.int64), np.asarray(uniques, dtype=object)


class VoteTable:
    """Immutable columnar store of votes, sorted by (observation, user).

    Build one with :func:`build_vote_table` from external tokens or with
    :meth:`from_codes` from integer arrays. Token arrays are optional; when a
    token array is ``None`` the token of id ``j`` is ``j`` itself.
    """

    def __init__(self, vote_obs, vote_user, vote_species, author, n_user, n_species,
                 obs_tokens=None, user_tokens=None, species_tokens=None):
        # Trusted constructor: inputs already deduplicated, sorted and validated.
        self.vote_obs = vote_obs
        self.vote_user = vote_user
        self.vote_species = vote_species
        self.author = author
        self.n_obs = len(author)
        self.n_user = int(n_user)
        self.n_species = int(n_species)
        self.obs_tokens = obs_tokens
        self.user_tokens = user_tokens
        self.species_tokens = species_tokens
        self.obs_ptr = np.searchsorted(vote_obs, np.arange(self.n_obs + 1)).astype(np.int64)
        _freeze(self.vote_obs, self.vote_user, self.vote_species, self.author, self.obs_ptr)

    @classmethod
    def from_codes(cls, obs, user, species, author, *, n_user=None, n_species=None,
                   obs_tokens=None, user_tokens=None, species_tokens=None) -> "VoteTable":
        """Validate integer-coded votes and build a table.

        Rows are in file order; a repeated (obs, user) pair keeps its last row.
        ``author[i]`` is the author of observation ``i``.
        """
        obs = np.asarray(obs, dtype=np.int64)
        user = np.asarray(user, dtype=np.int64)
        species = np.asarray(species, dtype=np.int64)
        author = np.asarray(author, dtype=np.int64)
        if not (len(obs) == len(user) == len(species)):
            raise DataError("vote columns differ in length")
        n_obs = len(author)
        if n_user is None:
            n_user = int(max(user.max(initial=-1), author.max(initial=-1))) + 1
        if n_species is None:
            n_species = int(species.max(initial=-1)) + 1
        for name, arr, bound in (("observation", obs, n_obs), ("user", user, n_user),
                                 ("species", species, n_species), ("author", author, n_user)):
            if len(arr) and (arr.min() < 0 or arr.max() >= bound):
                raise DataError(f"{name} id out of range [0, {bound})")

        # Stable sort on the composite key keeps file order inside each (obs, user) group.
        key = obs * n_user + user
        order = np.argsort(key, kind="stable")
        key = key[order]
        last = np.ones(len(key), dtype=bool)
        last[:-1] = key[1:] != key[:-1]
        keep = order[last]
        vote_obs, vote_user, vote_species = obs[keep], user[keep], species[keep]

        counts = np.bincount(vote_obs, minlength=n_obs)
        if n_obs and counts.min() == 0:
            missing = int(np.flatnonzero(counts == 0)[0])
            raise DataError(f"observation {missing} has no votes")
        by_author = np.bincount(vote_obs[vote_user == author[vote_obs]], minlength=n_obs)
        if n_obs and by_author.min() == 0:
            missing = int(np.flatnonzero(by_author == 0)[0])
            raise MissingAuthor(f"author of observation {missing} has no vote on it")

        small = np.int32 if max(n_obs, n_user, n_species) < 2**31 else np.int64
        return cls(vote_obs.astype(small), vote_user.astype(small), vote_species.astype(small),
                   author.astype(small), n_user, n_species,
                   obs_tokens=obs_tokens, user_tokens=user_tokens, species_tokens=species_tokens)

    @property
    def n_votes(self) -> int:
        return len(self.vote_obs)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.n_obs, self.n_user, self.n_species

    def votes_per_obs(self) -> np.ndarray:
        return np.diff(self.obs_ptr)

    @cached_property
    def vote_is_author(self) -> np.ndarray:
        out = self.vote_user == self.author[self.vote_obs]
        _freeze(out)
        return out

    @cached_property
    def pairs(self):
        from ._engine import build_pairs
        return build_pairs(self.n_obs, self.vote_obs, self.vote_species)

    @cached_property
    def user_species(self):
        from ._engine import build_user_species
        return build_user_species(self)

    def voter_set(self, i: int) -> tuple[tuple[int, int], ...]:
        if not 0 <= i < self.n_obs:
            raise IndexError(f"observation {i} out of range [0, {self.n_obs})")
        lo, hi = self.obs_ptr[i], self.obs_ptr[i + 1]
        return tuple(zip(self.vote_user[lo:hi].tolist(), self.vote_species[lo:hi].tolist()))

    def token(self, axis: str, ids):
        """Map dense ids back to external tokens on ``axis`` in {obs, user, species}."""
        tokens = getattr(self, f"{axis}_tokens")
        ids = np.asarray(ids)
        return ids if tokens is None else tokens[ids]

    def lookup(self, axis: str) -> dict:
        """External token -> dense id dictionary for ``axis``."""
        tokens = getattr(self, f"{axis}_tokens")
        n = {"obs": self.n_obs, "user": self.n_user, "species": self.n_species}[axis]
        if tokens is None:
            return {j: j for j in range(n)}
        return {tok: j for j, tok in enumerate(tokens.tolist())}

    def rows(self):
        """Yield (obs, user, species) token triples in storage order."""
        o = self.token("obs", self.vote_obs)
        u = self.token("user", self.vote_user)
        s = self.token("species", self.vote_species)
        return zip(o.tolist(), u.tolist(), s.tolist())

    def with_extra_user(self, obs, species) -> "VoteTable":
        """Return a table with one more user (id ``n_user``) voting ``species`` on ``obs``.

        The new user authors nothing.
        """
        obs = np.asarray(obs, dtype=np.int64)
        species = np.asarray(species, dtype=np.int64)
        new_id = self.n_user
        all_obs = np.concatenate([self.vote_obs.astype(np.int64), obs])
        all_user = np.concatenate([self.vote_user.astype(np.int64), np.full(len(obs), new_id)])
        all_species = np.concatenate([self.vote_species.astype(np.int64), species])
        user_tokens = None
        if self.user_tokens is not None:
            user_tokens = np.append(self.user_tokens, np.array(["__ai__"], dtype=object))
        return VoteTable.from_codes(all_obs, all_user, all_species, self.author,
                                    n_user=self.n_user + 1, n_species=self.n_species,
                                    obs_tokens=self.obs_tokens, user_tokens=user_tokens,
                                    species_tokens=self.species_tokens)

    def __repr__(self):
        return (f"VoteTable(n_obs={self.n_obs}, n_user={self.n_user}, "
                f"n_species={self.n_species}, n_votes={self.n_votes})")


def _object_array(values) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype == object:
        return values
    arr = np.empty(len(values), dtype=object)
    arr[:] = list(values)
    return arr


def _missing(token) -> bool:
    return token is None or (isinstance(token, float) and math.isnan(token)) or token == ""


def build_vote_table(raw_votes: Iterable[Sequence], authorship: Iterable[Sequence],
                     species_vocabulary: Sequence | None = None) -> VoteTable:
    """Build a :class:`VoteTable` from token rows.

    ``raw_votes`` holds ``(obs, user, species)`` rows in file order.
    ``authorship`` holds ``(obs, user)`` or ``(obs, user, species)`` rows; the
    optional species is materialized as the author's vote when the author did
    not vote on the observation. If ``species_vocabulary`` is given it is the
    closed species dictionary (its order defines the species ids).
    """
    raw_votes = list(raw_votes)
    authorship = list(authorship)
    for row in authorship:
        if len(row) not in (2, 3):
            raise DataError(f"authorship rows need 2 or 3 fields, got {row!r}")
    cols = list(zip(*raw_votes)) if raw_votes else [(), (), ()]
    a_species = [row[2] if len(row) == 3 else None for row in authorship]
    return table_from_columns(
        cols[0], cols[1], cols[2],
        [row[0] for row in authorship], [row[1] for row in authorship], a_species,
        species_vocabulary=species_vocabulary,
    )


def table_from_columns(v_obs, v_user, v_species, a_obs, a_user, a_species=None,
                       species_vocabulary=None) -> VoteTable:
    """Columnar form of :func:`build_vote_table`; ids are first-appearance ordered."""
    v_obs, v_user, v_species = map(_object_array, (v_obs, v_user, v_species))
    a_obs, a_user = _object_array(a_obs), _object_array(a_user)
    n_v, n_a = len(v_obs), len(a_obs)
    if n_v == 0 and n_a == 0:
        raise DataError("no votes")

    obs_codes, obs_tokens = _factorize(np.concatenate([v_obs, a_obs]))
    n_obs = len(obs_tokens)
    a_codes = obs_codes[n_v:]
    obs_codes = obs_codes[:n_v]

    # Last authorship record per observation wins.
    rev_first = np.unique(a_codes[::-1], return_index=True)[1]
    last = n_a - 1 - rev_first
    has_author = np.zeros(n_obs, dtype=bool)
    has_author[a_codes[last]] = True
    if not has_author.all():
        o = obs_tokens[np.flatnonzero(~has_author)[0]]
        raise MissingAuthor(f"observation {o!r} has no authorship record")
    order = np.argsort(a_codes[last])
    last = last[order]  # authorship row of obs 0, 1, ...

    user_codes, user_tokens = _factorize(np.concatenate([v_user, a_user[last]]))
    n_user = len(user_tokens)
    author = user_codes[n_v:]
    user_codes = user_codes[:n_v]

    vote_key = obs_codes * n_user + user_codes
    author_key = np.arange(n_obs, dtype=np.int64) * n_user + author
    lacking = np.flatnonzero(~np.isin(author_key, vote_key))
    extra_species = np.empty(0, dtype=object)
    if len(lacking):
        if a_species is None:
            species_of = [None] * len(lacking)
        else:
            a_species = _object_array(a_species)
            species_of = a_species[last[lacking]].tolist()
        bad = [j for j, sp in zip(lacking, species_of) if _missing(sp)]
        if bad:
            o = obs_tokens[bad[0]]
            raise MissingAuthor(f"author {user_tokens[author[bad[0]]]!r} of observation {o!r} "
                                "has no species vote")
        extra_species = _object_array(species_of)

    all_species = np.concatenate([extra_species, v_species])
    if species_vocabulary is None:
        # First appearance follows the vote file, then materialized author votes.
        sp_codes, species_tokens = _factorize(np.concatenate([v_species, extra_species]))
        sp_codes = np.concatenate([sp_codes[n_v:], sp_codes[:n_v]])
    else:
        species_tokens = _object_array(list(species_vocabulary))
        index = pd.Index(species_tokens)
        if not index.is_unique:
            raise DataError("species dictionary contains duplicates")
        sp_codes = index.get_indexer(all_species).astype(np.int64)
        if (sp_codes < 0).any():
            tok = all_species[np.flatnonzero(sp_codes < 0)[0]]
            raise UnknownSpecies(f"species {tok!r} not in the species dictionary")

    # Materialized author votes go first so a real vote on the same pair wins.
    return VoteTable.from_codes(
        np.concatenate([lacking, obs_codes]),
        np.concatenate([author[lacking], user_codes]),
        sp_codes, author,
        n_user=n_user, n_species=len(species_tokens),
        obs_tokens=obs_tokens, user_tokens=user_tokens, species_tokens=species_tokens,
    )


def voter_set(table: VoteTable, i: int) -> tuple[tuple[int, int], ...]:
    """Voters of observation ``i`` with their species, in ascending user id."""
    return table.voter_set(i)


@dataclass
class UserStats:
    """Per-user species counts (columnar, indexed by user id)."""

    n_author: np.ndarray
    n_vote: np.ndarray
    n_identified: np.ndarray
    weight: np.ndarray


@dataclass
class AggregationResult:
    strategy: str
    labels: np.ndarray
    confidence: np.ndarray
    accuracy_ratio: np.ndarray
    valid: np.ndarray
    user_weights: np.ndarray
    iterations_run: int
    converged: bool = True
    user_stats: UserStats | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_obs(self) -> int:
        return len(self.labels)

    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if len(self.valid) else 0.0


@dataclass
class AiPredictionSet:
    """Top-1 AI prediction per observation with its output probability."""

    obs: np.ndarray
    species: np.ndarray
    prob: np.ndarray

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=np.int64)
        self.species = np.asarray(self.species, dtype=np.int64)
        self.prob = np.asarray(self.prob, dtype=np.float64)
        if not (len(self.obs) == len(self.species) == len(self.prob)):
            raise DataError("AI prediction columns differ in length")
        if len(self.prob) and (np.isnan(self.prob).any() or self.prob.min() < 0 or self.prob.max() > 1):
            raise RangeError("AI scores must lie in [0, 1]")
        if len(np.unique(self.obs)) != len(self.obs):
            raise DataError("at most one AI prediction per observation")
        order = np.argsort(self.obs, kind="stable")
        self.obs, self.species, self.prob = self.obs[order], self.species[order], self.prob[order]

    def __len__(self):
        return len(self.obs)

    def dense(self, n_obs: int) -> tuple[np.ndarray, np.ndarray]:
        """(species, prob) arrays over all observations; -1 / NaN where absent."""
        sp = np.full(n_obs, -1, dtype=np.int64)
        pr = np.full(n_obs, np.nan)
        sp[self.obs] = self.species
        pr[self.obs] = self.prob
        return sp, pr
