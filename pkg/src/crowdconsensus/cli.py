"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error. Non-convergence is a
warning on stderr and does not change the exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .ai import DEFAULT_AI_WEIGHT, DEFAULT_THETA_SCORE, AiMode, run_with_ai
from .baselines import aggregate_mv, aggregate_twothird, aggregate_wawa
from .core import DEFAULT_GAMMA, StrategyConfig
from .errors import ConvergenceWarning, DataError, EmptySubset, InvalidAiWeight, WriteError
from .evaluation import SUBSET_KINDS, build_subsets, evaluate
from .io import (
    DatasetManifest,
    convert_archive,
    load_dataset,
    write_ai_predictions,
    write_experts,
    write_labels,
    write_report,
    write_table,
)
from .plantnet import run_plantnet
from .synth import SynthConfig, generate_synthetic, simulate_ai_predictions


logger = logging.getLogger("crowdconsensus")

STRATEGIES = ("mv", "wawa", "twothird", "plantnet")
AI_CHOICES = ("none", "as-user", "fixed", "invalidating", "confident")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_data_args(p):
    p.add_argument("--votes", type=Path, required=True, help="votes CSV (obs_id,user_id,species_id)")
    p.add_argument("--observations", type=Path, required=True, help="observations CSV (obs_id,author_user_id)")
    p.add_argument("--species", type=Path, help="closed species dictionary CSV (species_id)")
    p.add_argument("--ai-predictions", type=Path, help="AI predictions CSV (obs_id,species_id,score)")


def _add_strategy_args(p):
    d = StrategyConfig()
    p.add_argument("--strategy", choices=STRATEGIES, default="plantnet")
    p.add_argument("--ai", choices=AI_CHOICES, default="none", help="how AI votes enter the plantnet strategy")
    p.add_argument("--ai-weight", type=float, default=DEFAULT_AI_WEIGHT)
    p.add_argument("--theta-score", type=float, default=DEFAULT_THETA_SCORE)
    p.add_argument("--theta-acc", type=float, default=d.theta_acc)
    p.add_argument("--theta-conf", type=float, default=d.theta_conf)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--max-iters", type=int, default=d.max_iterations)
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (capped by CONSENSUS_THREADS); output does not depend on it")
    p.add_argument("--out", type=Path, help="JSON report path")
    p.add_argument("--labels-out", type=Path, help="per-observation CSV export")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdconsensus", description="Aggregate crowdsourced species labels.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("aggregate", help="aggregate votes into labels and validity flags")
    _add_data_args(p)
    _add_strategy_args(p)

    p = sub.add_parser("evaluate", help="aggregate, then score against expert votes")
    _add_data_args(p)
    _add_strategy_args(p)
    p.add_argument("--experts", type=Path, required=True, help="expert users CSV (user_id)")
    p.add_argument("--subset", choices=SUBSET_KINDS, default="expert")
    p.add_argument("--macro-domain", choices=("subset", "all"), default="subset")
    p.add_argument("--bins", type=int, default=10, help="reliability bins for AI predictions")

    s = SynthConfig()
    p = sub.add_parser("synth", help="write a synthetic dataset in the canonical schema")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--n-obs", type=int, default=s.n_obs)
    p.add_argument("--n-users", type=int, default=s.n_users)
    p.add_argument("--n-species", type=int, default=s.n_species)
    p.add_argument("--skill-mix", type=float, nargs=3, default=s.skill_mix,
                   metavar=("EXPERT", "AVERAGE", "SINGLE"))
    p.add_argument("--noise-rate", type=float, nargs=3, default=s.noise_rate,
                   metavar=("EXPERT", "AVERAGE", "SINGLE"))
    p.add_argument("--votes-zipf", type=float, default=s.votes_zipf)
    p.add_argument("--max-votes", type=int, default=s.max_votes)
    p.add_argument("--ai-coverage", type=float, default=0.0,
                   help="share of observations with a simulated AI prediction (0 writes no ai.csv)")
    p.add_argument("--seed", type=int, default=s.seed)

    p = sub.add_parser("bench", help="time aggregation strategies on a dataset or synthetic table")
    p.add_argument("--votes", type=Path)
    p.add_argument("--observations", type=Path)
    p.add_argument("--n-obs", type=int, default=100_000, help="synthetic size when no files are given")
    p.add_argument("--n-users", type=int, default=20_000)
    p.add_argument("--n-species", type=int, default=1_000)
    p.add_argument("--strategies", nargs="+", choices=STRATEGIES, default=list(STRATEGIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("convert", help="split a flagged vote archive into the canonical files")
    p.add_argument("source", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--obs-col", default="obs_id")
    p.add_argument("--user-col", default="user_id")
    p.add_argument("--species-col", default="species_id")
    p.add_argument("--author-col", default="is_author")
    p.add_argument("--sep", default=",")
    return parser


def _config(args) -> StrategyConfig:
    try:
        return StrategyConfig(theta_acc=args.theta_acc, theta_conf=args.theta_conf, alpha=args.alpha,
                              beta=args.beta, gamma=args.gamma, max_iterations=args.max_iters,
                              seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _run(args, table, ai, config):
    if args.strategy != "plantnet":
        if args.ai != "none":
            raise UsageError("--ai applies to the plantnet strategy only")
        fn = {"mv": aggregate_mv, "wawa": aggregate_wawa, "twothird": aggregate_twothird}[args.strategy]
        return fn(table, config.seed, workers=args.workers)
    if args.ai == "none":
        return run_plantnet(table, config, workers=args.workers)
    if ai is None:
        raise UsageError(f"--ai {args.ai} needs --ai-predictions")
    try:
        mode = AiMode(args.ai, args.ai_weight, args.theta_score)
        return run_with_ai(table, ai, mode, config, workers=args.workers)
    except (InvalidAiWeight, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _load(args, experts=None):
    manifest = DatasetManifest(args.votes, args.observations, args.ai_predictions, experts, args.species)
    return load_dataset(manifest)


def cmd_aggregate(args) -> int:
    config = _config(args)
    table, ai, _ = _load(args)
    result = _run(args, table, ai, config)
    if args.out:
        write_report(None, result, args.out, config=config, table=table)
    else:
        print(json.dumps({"strategy": result.strategy, "iterations_run": result.iterations_run,
                          "converged": result.converged, "valid_fraction": result.valid_fraction()}))
    if args.labels_out:
        write_labels(table, result, args.labels_out)
    return 0


def cmd_evaluate(args) -> int:
    config = _config(args)
    table, ai, experts = _load(args, args.experts)
    result = _run(args, table, ai, config)
    truth, *subsets = build_subsets(table, experts)
    subset = {s.kind: s for s in subsets}[args.subset]
    try:
        report = evaluate(result, truth, subset, table.n_species, args.macro_domain, ai, args.bins)
    except EmptySubset as exc:
        raise DataError(str(exc)) from None
    extra = {"dropped_contradictions": truth.dropped_contradictions,
             "subset_sizes": {s.kind: len(s) for s in subsets}}
    if args.out:
        write_report(report, result, args.out, config=config, table=table, extra=extra)
    else:
        doc = report.to_dict()
        doc.pop("reliability")
        print(json.dumps(doc, sort_keys=True))
    if args.labels_out:
        write_labels(table, result, args.labels_out)
    return 0


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(n_obs=args.n_obs, n_users=args.n_users, n_species=args.n_species,
                          skill_mix=tuple(args.skill_mix), noise_rate=tuple(args.noise_rate),
                          votes_zipf=args.votes_zipf, max_votes=args.max_votes, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = generate_synthetic(cfg)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_table(data.table, out / "votes.csv", out / "observations.csv")
    write_experts(data.table, data.experts, out / "experts.csv")
    with open(out / "truth.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("obs_id,species_id\n")
        fh.writelines(f"{i},{s}\n" for i, s in enumerate(data.truth.tolist()))
    if args.ai_coverage > 0:
        ai = simulate_ai_predictions(data.truth, cfg.n_species, seed=args.seed, coverage=args.ai_coverage)
        write_ai_predictions(data.table, ai, out / "ai.csv")
    print(json.dumps({"n_obs": data.table.n_obs, "n_votes": data.table.n_votes,
                      "n_user": data.table.n_user, "n_species": data.table.n_species,
                      "n_experts": int(len(data.experts))}))
    return 0


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    if args.votes is not None:
        if args.observations is None:
            raise UsageError("--votes needs --observations")
        table, _, _ = load_dataset(DatasetManifest(args.votes, args.observations))
    else:
        table = generate_synthetic(SynthConfig(n_obs=args.n_obs, n_users=args.n_users,
                                               n_species=args.n_species, seed=args.seed)).table
    timings = {"load_s": time.perf_counter() - t0, "n_votes": table.n_votes, "n_obs": table.n_obs,
               "n_user": table.n_user, "n_species": table.n_species}
    config = StrategyConfig(seed=args.seed)
    for name in args.strategies:
        t0 = time.perf_counter()
        if name == "plantnet":
            r = run_plantnet(table, config, workers=args.workers)
            timings["plantnet_iterations"] = r.iterations_run
        else:
            {"mv": aggregate_mv, "wawa": aggregate_wawa, "twothird": aggregate_twothird}[name](
                table, args.seed, workers=args.workers)
        timings[f"{name}_s"] = time.perf_counter() - t0
    text = json.dumps(timings, indent=2)
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_convert(args) -> int:
    m = convert_archive(args.source, args.out_dir, obs_col=args.obs_col, user_col=args.user_col,
                        species_col=args.species_col, author_col=args.author_col, sep=args.sep)
    print(json.dumps({"votes": str(m.votes_path), "observations": str(m.observations_path)}))
    return 0


COMMANDS = {"aggregate": cmd_aggregate, "evaluate": cmd_evaluate, "synth": cmd_synth,
            "bench": cmd_bench, "convert": cmd_convert}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        try:
            code = COMMANDS[args.command](args)
        except UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            code = 1
        except (DataError, FileNotFoundError, IsADirectoryError) as exc:
            print(f"data error: {exc}", file=sys.stderr)
            code = 2
        except WriteError as exc:
            print(f"write error: {exc}", file=sys.stderr)
            code = 2
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
