"""Expert-based evaluation of aggregated labels.

Observations that received a vote from a designated expert form the test
set, with the expert's species as ground truth. Two nested subsets isolate
harder cases: observations with several votes, and among those the ones
where voters disagree.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .core import AggregationResult, AiPredictionSet, VoteTable
from .errors import EmptyExpertSet, EmptySubset

__all__ = [
    "ExpertTruth",
    "EvalSubset",
    "ReliabilityBin",
    "EvaluationReport",
    "build_subsets",
    "label_accuracy",
    "macro_precision_recall",
    "valid_fraction",
    "species_coverage",
    "reliability_bins",
    "ai_reliability",
    "evaluate",
]

SUBSET_KINDS = ("expert", "multiple", "disagreement")


@dataclass
class ExpertTruth:
    """``truth[i]`` is the expert species of observation ``i`` or -1."""

    experts: np.ndarray
    truth: np.ndarray
    dropped_contradictions: int = 0


@dataclass
class EvalSubset:
    kind: str
    members: np.ndarray

    def __len__(self):
        return len(self.members)


class ReliabilityBin(NamedTuple):
    low: float
    high: float
    mean_prob: float
    accuracy: float
    count: int


@dataclass
class EvaluationReport:
    strategy: str
    subset: str
    n_subset: int
    accuracy: float
    macro_precision: float
    macro_recall: float
    valid_fraction_full: float
    species_coverage: float
    reliability: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reliability"] = [b._asdict() if isinstance(b, ReliabilityBin) else dict(b)
                            for b in self.reliability]
        return d


def build_subsets(table: VoteTable, experts) -> tuple[ExpertTruth, EvalSubset, EvalSubset, EvalSubset]:
    """Expert truth plus the nested expert / multiple-votes / disagreement subsets.

    Observations on which two experts disagree get no truth and are left out.
    """
    experts = np.unique(np.asarray(list(experts) if not isinstance(experts, np.ndarray) else experts,
                                   dtype=np.int64))
    if len(experts) == 0:
        raise EmptyExpertSet("no expert users given")
    if experts.min() < 0 or experts.max() >= table.n_user:
        raise IndexError("expert user id out of range")
    is_expert = np.zeros(table.n_user, dtype=bool)
    is_expert[experts] = True

    ev = is_expert[table.vote_user]
    e_obs = table.vote_obs[ev].astype(np.int64)
    e_sp = table.vote_species[ev].astype(np.int64)
    n_exp_votes = np.bincount(e_obs, minlength=table.n_obs)
    sp_min = np.full(table.n_obs, np.iinfo(np.int64).max)
    sp_max = np.full(table.n_obs, -1)
    np.minimum.at(sp_min, e_obs, e_sp)
    np.maximum.at(sp_max, e_obs, e_sp)
    touched = n_exp_votes > 0
    agree = touched & (sp_min == sp_max)
    truth = np.where(agree, sp_max, -1)

    n_votes = table.votes_per_obs()
    # distinct species per observation from the sorted pair index
    n_distinct = np.diff(table.pairs.pair_ptr)
    expert_members = np.flatnonzero(agree)
    multiple = expert_members[n_votes[expert_members] >= 2]
    disagreement = multiple[n_distinct[multiple] >= 2]
    return (
        ExpertTruth(experts, truth, int((touched & ~agree).sum())),
        EvalSubset("expert", expert_members),
        EvalSubset("multiple", multiple),
        EvalSubset("disagreement", disagreement),
    )


def _members(subset: EvalSubset, truth: ExpertTruth) -> np.ndarray:
    m = np.asarray(subset.members, dtype=np.int64)
    if len(m) == 0:
        raise EmptySubset(f"subset {subset.kind!r} is empty")
    if (truth.truth[m] < 0).any():
        raise ValueError("subset contains observations without ground truth")
    return m


def label_accuracy(result: AggregationResult, truth: ExpertTruth, subset: EvalSubset) -> float:
    """Share of subset observations that are valid and match the expert label."""
    m = _members(subset, truth)
    hit = (result.labels[m] == truth.truth[m]) & result.valid[m]
    return float(hit.mean())


def macro_precision_recall(result: AggregationResult, truth: ExpertTruth, subset: EvalSubset,
                           n_species: int | None = None, domain: str = "subset") -> tuple[float, float]:
    """Macro-averaged precision and recall over species.

    Invalid observations count as "no prediction": they add a false negative
    for the true species and nothing else. With ``domain="subset"`` the
    averages run over species seen in the subset (as truth or as a valid
    prediction), skipping species whose denominator is zero. With
    ``domain="all"`` both sums are divided by ``n_species`` and zero
    denominators contribute 0.
    """
    m = _members(subset, truth)
    t = truth.truth[m]
    p = np.where(result.valid[m], result.labels[m], -1)
    width = int(max(t.max(), p.max(), (n_species or 0) - 1)) + 1
    tp = np.bincount(t[p == t], minlength=width)
    pred = np.bincount(p[p >= 0], minlength=width)
    actual = np.bincount(t, minlength=width)

    if domain == "all":
        if n_species is None:
            raise ValueError("domain='all' needs n_species")
        prec = np.divide(tp, pred, out=np.zeros(width), where=pred > 0)
        rec = np.divide(tp, actual, out=np.zeros(width), where=actual > 0)
        return float(prec.sum() / n_species), float(rec.sum() / n_species)
    if domain != "subset":
        raise ValueError(f"unknown macro domain {domain!r}")
    has_pred = pred > 0
    has_true = actual > 0
    precision = float((tp[has_pred] / pred[has_pred]).mean()) if has_pred.any() else 0.0
    recall = float((tp[has_true] / actual[has_true]).mean()) if has_true.any() else 0.0
    return precision, recall


def valid_fraction(result: AggregationResult) -> float:
    """Share of all observations (not just the test subset) flagged valid."""
    return result.valid_fraction()


def species_coverage(result: AggregationResult, truth: ExpertTruth, subset: EvalSubset) -> float:
    """Share of expert species recovered by at least one valid, correct label."""
    m = _members(subset, truth)
    t = truth.truth[m]
    ok = (result.labels[m] == t) & result.valid[m]
    return len(np.unique(t[ok])) / len(np.unique(t))


def reliability_bins(prob, correct, n_bins: int = 10) -> list[ReliabilityBin]:
    """Equal-width calibration bins over [0, 1].

    A probability ``p`` falls in bin ``floor(p * n_bins)``, with ``p == 1``
    in the last bin. Empty bins report NaN mean and accuracy with count 0.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    prob = np.asarray(prob, dtype=np.float64)
    correct = np.asarray(correct, dtype=np.float64)
    if len(prob) and (prob.min() < 0 or prob.max() > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    idx = np.minimum((prob * n_bins).astype(np.int64), n_bins - 1)
    count = np.bincount(idx, minlength=n_bins)
    psum = np.bincount(idx, weights=prob, minlength=n_bins)
    csum = np.bincount(idx, weights=correct, minlength=n_bins)
    bins = []
    for b in range(n_bins):
        c = int(count[b])
        mean = psum[b] / c if c else math.nan
        acc = csum[b] / c if c else math.nan
        bins.append(ReliabilityBin(b / n_bins, (b + 1) / n_bins, float(mean), float(acc), c))
    return bins


def ai_reliability(ai: AiPredictionSet, truth: ExpertTruth, subset: EvalSubset,
                   n_bins: int = 10) -> list[ReliabilityBin]:
    """Reliability bins of AI predictions against expert truth on a subset."""
    m = _members(subset, truth)
    sp, pr = ai.dense(len(truth.truth))
    m = m[sp[m] >= 0]
    return reliability_bins(pr[m], sp[m] == truth.truth[m], n_bins)


def evaluate(result: AggregationResult, truth: ExpertTruth, subset: EvalSubset,
             n_species: int | None = None, macro_domain: str = "subset",
             ai: AiPredictionSet | None = None, n_bins: int = 10) -> EvaluationReport:
    precision, recall = macro_precision_recall(result, truth, subset, n_species, macro_domain)
    reliability = ai_reliability(ai, truth, subset, n_bins) if ai is not None and len(ai) else []
    return EvaluationReport(
        strategy=result.strategy,
        subset=subset.kind,
        n_subset=len(subset),
        accuracy=label_accuracy(result, truth, subset),
        macro_precision=precision,
        macro_recall=recall,
        valid_fraction_full=valid_fraction(result),
        species_coverage=species_coverage(result, truth, subset),
        reliability=reliability,
    )
