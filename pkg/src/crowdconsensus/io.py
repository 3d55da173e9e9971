"""Canonical CSV schemas, report files and the archive adapter.

Schemas (UTF-8, comma separated, header required, LF or CRLF):

* votes: ``obs_id,user_id,species_id``
* observations: ``obs_id,author_user_id`` with an optional ``species_id``
  column used when the author has no row in the votes file
* AI predictions: ``obs_id,species_id,score`` with ``score`` in [0, 1]
* experts: ``user_id``
* species dictionary: ``species_id``

Identifiers are opaque tokens and are never parsed as numbers.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .core import AggregationResult, AiPredictionSet, StrategyConfig, VoteTable, table_from_columns
from .errors import DanglingReferenceError, DataError, ParseError, RangeError, WriteError

__all__ = [
    "DatasetManifest",
    "load_dataset",
    "read_votes",
    "write_table",
    "write_experts",
    "write_ai_predictions",
    "write_report",
    "read_report",
    "write_labels",
    "convert_archive",
]

VOTES_HEADER = ["obs_id", "user_id", "species_id"]
OBS_HEADER = ["obs_id", "author_user_id"]
AI_HEADER = ["obs_id", "species_id", "score"]
EXPERTS_HEADER = ["user_id"]
SPECIES_HEADER = ["species_id"]


@dataclass
class DatasetManifest:
    votes_path: Path
    observations_path: Path
    ai_predictions_path: Path | None = None
    experts_path: Path | None = None
    species_dictionary_path: Path | None = None

    @classmethod
    def from_dir(cls, directory) -> "DatasetManifest":
        """Manifest for the file names written by ``crowdconsensus synth``."""
        d = Path(directory)

        def opt(name):
            return d / name if (d / name).exists() else None

        return cls(d / "votes.csv", d / "observations.csv", opt("ai.csv"), opt("experts.csv"),
                   opt("species.csv"))


_LINE_RE = re.compile(r"line (\d+)")


def _read_csv(path, header: list[str], optional: tuple[str, ...] = ()) -> pd.DataFrame:
    """Read a CSV of string tokens, failing with the 1-based file row of any defect."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            first = fh.readline().rstrip("\r\n")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", row=1, path=path) from None
    found = first.lstrip("\ufeff").split(",")
    allowed = header + [c for c in optional if c in found]
    if found != allowed:
        raise ParseError(f"expected header {','.join(header)}, got {first!r}", row=1, path=path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                         encoding="utf-8", engine="c", skip_blank_lines=False)
    except pd.errors.ParserError as exc:
        m = _LINE_RE.search(str(exc))
        raise ParseError(str(exc), row=int(m.group(1)) if m else None, path=path) from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", path=path) from None
    df.columns = allowed
    for col in header:
        empty = (df[col].isna() | (df[col] == "")).to_numpy()
        if empty.any():
            raise ParseError(f"empty {col}", row=int(np.flatnonzero(empty)[0]) + 2, path=path)
    return df


def read_votes(votes_path, observations_path, species_vocabulary=None) -> VoteTable:
    votes = _read_csv(votes_path, VOTES_HEADER)
    obs = _read_csv(observations_path, OBS_HEADER, optional=("species_id",))
    a_species = obs["species_id"].to_numpy(object) if "species_id" in obs else None
    return table_from_columns(
        votes["obs_id"].to_numpy(object), votes["user_id"].to_numpy(object),
        votes["species_id"].to_numpy(object),
        obs["obs_id"].to_numpy(object), obs["author_user_id"].to_numpy(object), a_species,
        species_vocabulary=species_vocabulary,
    )


def _index(tokens) -> pd.Index:
    return pd.Index(np.asarray(tokens, dtype=object))


def load_dataset(manifest: DatasetManifest):
    """Load the vote table plus the optional AI predictions and expert user ids.

    Returns ``(table, ai, experts)``; absent optional files give ``None``.
    Species ids follow the dictionary file when one is given, otherwise first
    appearance in votes, then observations, then AI predictions.
    """
    ai_df = None
    if manifest.ai_predictions_path is not None:
        ai_df = _read_csv(manifest.ai_predictions_path, AI_HEADER)
    vocabulary = None
    if manifest.species_dictionary_path is not None:
        vocabulary = _read_csv(manifest.species_dictionary_path, SPECIES_HEADER)["species_id"].tolist()
    elif ai_df is not None:
        votes_sp = _read_csv(manifest.votes_path, VOTES_HEADER)["species_id"]
        obs_df = _read_csv(manifest.observations_path, OBS_HEADER, optional=("species_id",))
        parts = [votes_sp]
        if "species_id" in obs_df:
            parts.append(obs_df["species_id"][obs_df["species_id"] != ""])
        parts.append(ai_df["species_id"])
        vocabulary = pd.unique(pd.concat(parts, ignore_index=True).to_numpy(object))

    table = read_votes(manifest.votes_path, manifest.observations_path, vocabulary)

    ai = None
    if ai_df is not None:
        ai = _ai_from_frame(table, ai_df, manifest.ai_predictions_path)

    experts = None
    if manifest.experts_path is not None:
        ex = _read_csv(manifest.experts_path, EXPERTS_HEADER)["user_id"].to_numpy(object)
        ids = _index(table.token("user", np.arange(table.n_user))).get_indexer(ex)
        if (ids < 0).any():
            bad = ex[np.flatnonzero(ids < 0)[0]]
            raise DanglingReferenceError(f"{manifest.experts_path}: unknown user {bad!r}")
        experts = np.unique(ids)
    return table, ai, experts


def _ai_from_frame(table: VoteTable, df: pd.DataFrame, path) -> AiPredictionSet:
    score = pd.to_numeric(df["score"], errors="coerce").to_numpy(np.float64)
    bad = np.isnan(score)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(f"score {df['score'].iloc[row]!r} is not a decimal", row=row + 2, path=path)
    out = (score < 0) | (score > 1)
    if out.any():
        row = int(np.flatnonzero(out)[0])
        raise RangeError(f"{path}: row {row + 2}: score {score[row]} outside [0, 1]")
    obs = _index(table.token("obs", np.arange(table.n_obs))).get_indexer(df["obs_id"].to_numpy(object))
    if (obs < 0).any():
        row = int(np.flatnonzero(obs < 0)[0])
        raise DanglingReferenceError(f"{path}: row {row + 2}: unknown observation {df['obs_id'].iloc[row]!r}")
    sp = _index(table.token("species", np.arange(table.n_species))).get_indexer(
        df["species_id"].to_numpy(object))
    if (sp < 0).any():
        row = int(np.flatnonzero(sp < 0)[0])
        raise DanglingReferenceError(f"{path}: row {row + 2}: unknown species {df['species_id'].iloc[row]!r}")
    return AiPredictionSet(obs, sp, score)


def _writing(path):
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            raise FileNotFoundError(f"directory {p.parent} does not exist")
        return open(p, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc


def _frame_to_csv(df: pd.DataFrame, path):
    with _writing(path) as fh:
        try:
            df.to_csv(fh, index=False, lineterminator="\n")
        except OSError as exc:
            raise WriteError(f"cannot write {path}: {exc}") from exc


def write_table(table: VoteTable, votes_path, observations_path):
    """Export a table in the canonical schema (tokens, storage order)."""
    _frame_to_csv(pd.DataFrame({
        "obs_id": table.token("obs", table.vote_obs),
        "user_id": table.token("user", table.vote_user),
        "species_id": table.token("species", table.vote_species),
    }), votes_path)
    _frame_to_csv(pd.DataFrame({
        "obs_id": table.token("obs", np.arange(table.n_obs)),
        "author_user_id": table.token("user", table.author),
    }), observations_path)


def write_experts(table: VoteTable, experts, path):
    _frame_to_csv(pd.DataFrame({"user_id": table.token("user", np.asarray(experts, dtype=np.int64))}), path)


def write_ai_predictions(table: VoteTable, ai: AiPredictionSet, path):
    _frame_to_csv(pd.DataFrame({
        "obs_id": table.token("obs", ai.obs),
        "species_id": table.token("species", ai.species),
        "score": [repr(float(p)) for p in ai.prob],
    }), path)


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def report_document(result: AggregationResult, report=None, config: StrategyConfig | None = None,
                    table: VoteTable | None = None, extra: dict | None = None) -> dict:
    doc = {
        "strategy": result.strategy,
        "iterations_run": result.iterations_run,
        "converged": result.converged,
        "n_obs": result.n_obs,
        "valid_fraction": result.valid_fraction(),
        "n_valid": int(result.valid.sum()),
    }
    if table is not None:
        doc["dims"] = {"n_obs": table.n_obs, "n_user": table.n_user,
                       "n_species": table.n_species, "n_votes": table.n_votes}
    if config is not None:
        doc["config"] = asdict(config)
    if result.meta:
        doc["meta"] = dict(result.meta)
    if report is not None:
        doc["metrics"] = report.to_dict()
    if extra:
        doc.update(extra)
    return _clean(doc)


def write_report(report, result: AggregationResult, path, *, config: StrategyConfig | None = None,
                 table: VoteTable | None = None, extra: dict | None = None):
    """Write a JSON report (sorted keys, stable formatting) for a run.

    ``report`` is an :class:`~crowdconsensus.evaluation.EvaluationReport` or
    ``None`` when only an aggregation was run.
    """
    doc = report_document(result, report, config, table, extra)
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    with _writing(path) as fh:
        try:
            fh.write(text)
        except OSError as exc:
            raise WriteError(f"cannot write {path}: {exc}") from exc


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_labels(table: VoteTable, result: AggregationResult, path):
    """Per-observation export: token, label, confidence, accuracy ratio, validity."""
    _frame_to_csv(pd.DataFrame({
        "obs_id": table.token("obs", np.arange(table.n_obs)),
        "label": table.token("species", result.labels),
        "confidence": [repr(float(x)) for x in result.confidence],
        "accuracy_ratio": [repr(float(x)) for x in result.accuracy_ratio],
        "valid": result.valid.astype(np.int8),
    }), path)


_TRUE = {"1", "true", "True", "TRUE", "yes", "y", "t"}


def convert_archive(source, out_dir, *, obs_col="obs_id", user_col="user_id",
                    species_col="species_id", author_col="is_author", sep=","):
    """Split a single vote file with an authorship flag into the canonical files.

    ``source`` has one row per vote; rows whose ``author_col`` is truthy
    (``1``, ``true``, ``yes``...) mark the observation's author. Returns the
    manifest of the written files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False, sep=sep)
    except pd.errors.ParserError as exc:
        m = _LINE_RE.search(str(exc))
        raise ParseError(str(exc), row=int(m.group(1)) if m else None, path=source) from None
    missing = [c for c in (obs_col, user_col, species_col, author_col) if c not in df.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", row=1, path=source)
    votes = df[[obs_col, user_col, species_col]]
    votes.columns = VOTES_HEADER
    flag = df[author_col].isin(_TRUE)
    authors = df.loc[flag, [obs_col, user_col]].drop_duplicates(subset=[obs_col], keep="last")
    authors.columns = OBS_HEADER
    if authors["obs_id"].nunique() != votes["obs_id"].nunique():
        lacking = set(votes["obs_id"]) - set(authors["obs_id"])
        raise DataError(f"{len(lacking)} observations have no author row, e.g. {sorted(lacking)[0]!r}")
    manifest = DatasetManifest(out / "votes.csv", out / "observations.csv")
    _frame_to_csv(votes, manifest.votes_path)
    _frame_to_csv(authors, manifest.observations_path)
    return manifest
