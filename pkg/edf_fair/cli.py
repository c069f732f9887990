"""
EDF Command-Line Module

argparse front end. Result artifacts (tables, CSV predictions, JSON) go
to stdout or --out; diagnostics go to stderr. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical error.
"""

from dataclasses import replace
from typing import Any, List, Optional, Sequence
import argparse
import logging
import os
import sys

from edf_fair.errors import ConfigError, DataError, EdfError, exit_code_for
from edf_fair.fairness import FairnessReport, evaluate_model
from edf_fair.harness import ExperimentConfig, run_experiment, select_deweight, write_outputs
from edf_fair.persistence import FitConfig, fit_model, load_model, save_model, write_predictions
from edf_fair.tabular import load_csv, rank_proxy_features, read_csv
from edf_fair.utils import dumps_canonical, get_logger

PROG = "edf-fair"


def cmd_fit(args: argparse.Namespace) -> int:
    """Fits one model from a JSON fit description and writes the model bundle."""
    fit_config = FitConfig.from_json(args.config)
    if args.seed is not None:
        fit_config = replace(fit_config, seed=args.seed)
    bundle = fit_model(fit_config)
    if args.out:
        save_model(bundle, args.out)
        get_logger("Cli").info(f"Model saved to {args.out}")
    else:
        _emit(dumps_canonical(bundle.to_dict()) + "\n")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    """Writes single-column CSV predictions for raw rows."""
    bundle = load_model(args.model)
    predictions = bundle.predict_frame(read_csv(args.data))
    text = write_predictions(predictions, args.out)
    if not args.out:
        _emit(text)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Prints a FairnessReport table (or JSON) for a saved model on labelled rows."""
    logger = get_logger("Cli")
    bundle = load_model(args.model)
    eval_data = bundle.dataset_from_frame(read_csv(args.data), require_outcome=True, require_sensitive=True)
    try:
        train = bundle.training_data()
    except DataError as e:
        logger.warning(f"{e}; fitting the P(S=1|X) auxiliary on the evaluation rows instead")
        train = eval_data
    report = evaluate_model(bundle.model, train, eval_data, args.aux_family, args.aux_k,
                            deweight=bundle.deweight)
    if args.sensitive:
        report = _restrict(report, args.sensitive)
    if train is eval_data:
        report = replace(report, evaluated_on="evaluation rows (auxiliary fitted on the same rows)")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(dumps_canonical(report.to_dict()) + "\n")
    _emit(dumps_canonical(report.to_dict()) + "\n" if args.json else report.to_table())
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    """Runs a replicated-holdout experiment and prints its table."""
    result = run_experiment(_experiment_config(args), threads=args.threads)
    if args.out:
        write_outputs(result, args.out)
    _emit(result.table.to_text())
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    """Runs an experiment and prints the deweighting chosen under --rho-cap."""
    logger = get_logger("Cli")
    result = run_experiment(_experiment_config(args), threads=args.threads)
    if args.out:
        write_outputs(result, args.out)
    choice = select_deweight(result.table, args.rho_cap)
    if not choice.feasible:
        logger.warning(f"No grid value meets rho^2 <= {args.rho_cap}; reporting the lowest-rho^2 row")
    _emit(dumps_canonical(choice.to_dict()) + "\n")
    return 0


def cmd_rank_proxies(args: argparse.Namespace) -> int:
    """Prints (feature, squared correlation) lines, most correlated first."""
    data = load_csv(args.data, args.outcome, [args.sensitive], c_features=[],
                    categorical=args.categorical or ())
    lines: List[str] = []
    for j, name in enumerate(data.sensitive_names):
        if data.q > 1:
            lines.append(f"# {name}")
        lines.extend(f"{feature}\t{score:.4f}" for feature, score in rank_proxy_features(data, j))
    _emit("\n".join(lines) + "\n")
    return 0


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    return config


def _restrict(report: FairnessReport, names: Sequence[str]) -> FairnessReport:
    labels = [label for label, _ in report.categories]
    unknown = [n for n in names if n not in labels]
    if unknown:
        raise ConfigError(f"Unknown sensitive column(s) {unknown}; available: {labels}")
    return replace(report, categories=tuple(c for c in report.categories if c[0] in names))


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--settings", help="Alternate TOML defaults file (replaces config.toml)")
    common.add_argument("--verbose", action="store_true", help="Enable debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    """
    Builds the argument parser with one subparser per command.

    Returns:
        argparse.ArgumentParser: Parser whose namespace carries a `handler`
    """
    common = _common_options()
    parser = argparse.ArgumentParser(prog=PROG, description="Explicitly Deweighted Features fairness toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    fit = sub.add_parser("fit", parents=[common], help="Fit one model from a JSON fit description")
    fit.add_argument("--config", required=True, help="Fit description (JSON)")
    fit.add_argument("--out", help="Model bundle path (default: stdout)")
    fit.add_argument("--seed", type=int, help="Override the forest seed")
    fit.set_defaults(handler=cmd_fit)

    predict = sub.add_parser("predict", parents=[common], help="Predict for new rows")
    predict.add_argument("--model", required=True, help="Model bundle written by fit")
    predict.add_argument("--data", required=True, help="CSV with the training feature columns")
    predict.add_argument("--out", help="Output CSV (default: stdout)")
    predict.set_defaults(handler=cmd_predict)

    evaluate = sub.add_parser("evaluate", parents=[common], help="Fairness report for a saved model")
    evaluate.add_argument("--model", required=True, help="Model bundle written by fit")
    evaluate.add_argument("--data", required=True, help="CSV with features, outcome and sensitive columns")
    evaluate.add_argument("--sensitive", action="append", help="Report only this sensitive column (repeatable)")
    evaluate.add_argument("--aux-family", choices=["knn", "linear-probability"], help="Estimator of P(S=1|X)")
    evaluate.add_argument("--aux-k", type=int, help="Neighbors for the k-NN auxiliary")
    evaluate.add_argument("--json", action="store_true", help="Print JSON instead of a table")
    evaluate.add_argument("--out", help="Also write the report as JSON")
    evaluate.set_defaults(handler=cmd_evaluate)

    for name, handler, text in (("experiment", cmd_experiment, "Run a replicated-holdout experiment"),
                                ("tune", cmd_tune, "Choose a deweighting under a rho^2 cap")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("--config", required=True, help="Experiment config (JSON)")
        cmd.add_argument("--out", help="Directory for records.jsonl, summary.json and table.txt")
        cmd.add_argument("--seed", type=int, help="Override master_seed")
        cmd.add_argument("--threads", type=int, help="Worker threads (default: EDF_THREADS, then config)")
        if name == "tune":
            cmd.add_argument("--rho-cap", type=float, required=True, help="Largest acceptable mean rho^2")
        cmd.set_defaults(handler=handler)

    rank = sub.add_parser("rank-proxies", parents=[common], help="Rank features by correlation with S")
    rank.add_argument("--data", required=True, help="CSV file")
    rank.add_argument("--sensitive", required=True, help="Sensitive column")
    rank.add_argument("--outcome", required=True, help="Outcome column (excluded from ranking)")
    rank.add_argument("--categorical", nargs="*", help="Numeric-coded columns to one-hot encode")
    rank.set_defaults(handler=cmd_rank_proxies)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command-line entry point.

    Args:
        argv (Optional[Sequence[str]]): Arguments (default: sys.argv[1:])

    Returns:
        int: Process exit code
    """
    from app_utils import ConfigManager, LoggingManager

    args = build_parser().parse_args(argv)
    if args.settings:
        if not os.path.isfile(args.settings):
            return _fail(ConfigError(f"Settings file not found: {args.settings}"))
        ConfigManager.reset()
        ConfigManager.get_config(args.settings)
    if args.verbose:
        LoggingManager.set_level(logging.DEBUG)

    logger = get_logger("Cli")
    logger.debug(f"{PROG} {args.command}: {vars(args)}")
    try:
        return args.handler(args)
    except EdfError as e:
        return _fail(e)
    except OSError as e:
        logger.debug("I/O failure", exc_info=True)
        return _fail(DataError(f"{e.strerror or e}: {e.filename}" if e.filename else str(e)))


def _fail(exc: Any) -> int:
    message = " ".join(str(exc).split())
    sys.stderr.write(f"{PROG}: error: {message}\n")
    return exit_code_for(exc)
