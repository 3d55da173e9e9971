"""Folding AI predictions into the trust-weighted vote.

Four ways to use the model's top-1 prediction:

``as-user``
    the AI becomes one more user and earns its weight like everyone else;
``fixed``
    the AI votes everywhere with a constant weight;
``invalidating``
    the constant-weight AI vote counts toward confidence and agreement
    (so it can flip validity) but never toward the label, and user weights
    evolve exactly as without the AI;
``confident``
    as ``fixed``, restricted to predictions whose score reaches ``theta_score``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _engine
from .core import AggregationResult, AiPredictionSet, StrategyConfig, VoteTable
from .errors import InvalidAiWeight
from .plantnet import iterate, run_plantnet

__all__ = ["AiMode", "validate_ai_weight", "ai_weight_bounds", "run_with_ai"]

DEFAULT_AI_WEIGHT = 1.70
DEFAULT_THETA_SCORE = 0.7
MODES = ("none", "as-user", "fixed", "invalidating", "confident")


@dataclass(frozen=True)
class AiMode:
    kind: str = "none"
    ai_weight: float = DEFAULT_AI_WEIGHT
    theta_score: float = DEFAULT_THETA_SCORE

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"unknown AI mode {self.kind!r}; expected one of {MODES}")
        if not 0 <= self.theta_score <= 1:
            raise ValueError("theta_score must lie in [0, 1]")
        if self.ai_weight < 0:
            raise ValueError("ai_weight must be non-negative")

    @property
    def fixed_weight(self) -> bool:
        return self.kind in ("fixed", "invalidating", "confident")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def as_user(cls):
        return cls("as-user")

    @classmethod
    def fixed(cls, ai_weight=DEFAULT_AI_WEIGHT):
        return cls("fixed", ai_weight)

    @classmethod
    def invalidating(cls, ai_weight=DEFAULT_AI_WEIGHT):
        return cls("invalidating", ai_weight)

    @classmethod
    def confident(cls, theta_score=DEFAULT_THETA_SCORE, ai_weight=DEFAULT_AI_WEIGHT):
        return cls("confident", ai_weight, theta_score)


def ai_weight_bounds(config: StrategyConfig | None = None) -> tuple[float, float]:
    """Open interval of AI weights that can invalidate a self-validating user
    but never self-validate."""
    config = config or StrategyConfig()
    return config.theta_conf * (1 - config.theta_acc) / config.theta_acc, config.theta_conf


def validate_ai_weight(w_ai: float, config: StrategyConfig | None = None) -> bool:
    lo, hi = ai_weight_bounds(config)
    return lo < w_ai < hi


def participating(ai: AiPredictionSet, theta_score: float) -> np.ndarray:
    """Mask of predictions that vote under a score threshold.

    A threshold of 1 disables the AI entirely, including predictions scored
    exactly 1.
    """
    if theta_score >= 1:
        return np.zeros(len(ai), dtype=bool)
    return ai.prob >= theta_score


def run_with_ai(table: VoteTable, ai: AiPredictionSet, mode: AiMode,
                config: StrategyConfig | None = None, *, strict: bool = True,
                workers: int | None = None) -> AggregationResult:
    """Trust-weighted vote with AI predictions folded in according to ``mode``.

    With ``strict`` (the default) the fixed-weight modes reject AI weights
    outside :func:`ai_weight_bounds`; pass ``strict=False`` to explore other
    weights, e.g. ``0`` to switch the AI off.
    """
    config = config or StrategyConfig()
    if len(ai) and (ai.obs.max() >= table.n_obs or ai.species.max() >= table.n_species):
        raise ValueError("AI predictions refer to observations or species outside the table")

    if mode.kind == "none":
        return run_plantnet(table, config, workers=workers)

    if mode.kind == "as-user":
        augmented = table.with_extra_user(ai.obs, ai.species)
        result = iterate(augmented, config, workers=workers, strategy="plantnet+ai-as-user")
        result.meta["ai_user"] = table.n_user
        return result

    if strict and not validate_ai_weight(mode.ai_weight, config):
        lo, hi = ai_weight_bounds(config)
        raise InvalidAiWeight(f"AI weight {mode.ai_weight} outside ({lo:.6g}, {hi:.6g})")

    keep = participating(ai, mode.theta_score) if mode.kind == "confident" else np.ones(len(ai), bool)
    extra = _engine.Extra(ai.obs[keep], ai.species[keep], float(mode.ai_weight),
                          in_label=mode.kind != "invalidating")
    result = iterate(table, config, extra=extra, workers=workers, strategy=f"plantnet+ai-{mode.kind}")
    result.meta.update(ai_weight=float(mode.ai_weight), ai_votes=int(keep.sum()))
    if mode.kind == "confident":
        result.meta["theta_score"] = float(mode.theta_score)
    return result
