"""Scalable aggregation of crowdsourced species labels.

The main entry points are :func:`run_plantnet` (trust-weighted iterative
majority vote), the baselines :func:`aggregate_mv`, :func:`aggregate_wawa`
and :func:`aggregate_twothird`, :func:`run_with_ai` for folding model
predictions into the vote, and the evaluation helpers in
:mod:`crowdconsensus.evaluation`.
"""

__version__ = "0.1.0"

from .ai import AiMode, ai_weight_bounds, run_with_ai, validate_ai_weight
from .baselines import aggregate_mv, aggregate_twothird, aggregate_wawa
from .core import (
    AggregationResult,
    AiPredictionSet,
    StrategyConfig,
    UserStats,
    VoteTable,
    build_vote_table,
    table_from_columns,
    voter_set,
)
from .errors import (
    ConvergenceWarning,
    DanglingReferenceError,
    DataError,
    EmptyExpertSet,
    EmptySubset,
    InvalidAiWeight,
    MissingAuthor,
    ParseError,
    RangeError,
    UnknownSpecies,
    WriteError,
)
from .evaluation import (
    EvalSubset,
    EvaluationReport,
    ExpertTruth,
    build_subsets,
    evaluate,
    label_accuracy,
    macro_precision_recall,
    reliability_bins,
    species_coverage,
    valid_fraction,
)
from .plantnet import (
    is_self_validating,
    run_plantnet,
    score_observation,
    user_species_counts,
    weight_fn,
    weighted_labels,
)
from .synth import SynthConfig, generate_synthetic, simulate_ai_predictions
