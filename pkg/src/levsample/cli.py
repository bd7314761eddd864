"""
cli.py
========================
Command line front end. Exit codes: 0 on success, 2 for input errors, 3 for numerical failures.
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional

import pandas as pd
from marshmallow import ValidationError

from levsample import load_config, master_seed
from levsample.asymptotics import check_regularity
from levsample.datagen import DataSpec, Distribution, gen_dataset
from levsample.errors import ConfigError, IoError, LevsampleError
from levsample.harness import estimate, load_csv, run_experiment, write_report
from levsample.linalg import ols_fit
from levsample.models import EstimateResultSchema, ExperimentConfigSchema, RegularityDiagnosticsSchema
from levsample.probs import Scheme, SchemeSpec, build_probs, shrinkage_report

logger = logging.getLogger("levsample")


def add_data_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--input", type=Path, required=True, help="CSV file holding the response and predictors")
    parser.add_argument("--response", type=int, default=0, help="Index of the response column")
    parser.add_argument("--header", action="store_true", help="Skip the first line of the CSV file")
    parser.add_argument("--intercept", action="store_true", help="Prepend an intercept column")
    parser.add_argument("--expand", action="store_true",
                        help="Add squared and pairwise interaction terms of the predictors")


def add_scheme_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--scheme", type=Scheme, choices=list(Scheme), required=True,
                        metavar="{" + ",".join(s.value for s in Scheme) + "}")
    parser.add_argument("--floor", type=float, default=None, help="Probability floor as a fraction of 1/n")
    parser.add_argument("--slev-lambda", type=float, default=None, help="Mixing weight of SLEV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levsample",
                                     description="Leverage-based subsampling estimators for least squares")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads, 0 = automatic")
    parser.add_argument("--format", choices=["csv", "json"], default=None, help="Output format")
    parser.add_argument("--instance", type=Path, default=None, help="Directory holding config.json")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    probs = commands.add_parser("probs", help="Compute sampling probabilities")
    add_data_arguments(probs)
    add_scheme_arguments(probs)
    probs.add_argument("--out", type=Path, default=None)

    est = commands.add_parser("estimate", help="Compute one subsample estimate")
    add_data_arguments(est)
    add_scheme_arguments(est)
    est.add_argument("--r", type=int, required=True, help="Subsample size")
    est.add_argument("--seed", type=int, default=None)
    est.add_argument("--ci", type=float, default=None, help="Confidence level of the intervals")
    est.add_argument("--out", type=Path, default=None)

    experiment = commands.add_parser("experiment", help="Run a Monte Carlo bias/variance experiment")
    experiment.add_argument("--config", type=Path, required=True, help="Experiment configuration (JSON)")
    experiment.add_argument("--out", type=Path, required=True)
    experiment.add_argument("--seed", type=int, default=None, help="Overrides the configured master seed")
    experiment.add_argument("--timing", action="store_true", help="Include the wall time in JSON reports")
    experiment.add_argument("--no-progress", action="store_true")

    gen = commands.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--dist", type=Distribution, choices=list(Distribution), required=True,
                     metavar="{" + ",".join(d.value for d in Distribution) + "}")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--rho", type=float, default=0.7)
    gen.add_argument("--sigma", type=float, default=1.0)
    gen.add_argument("--noncentral", action="store_true", help="Shift before scaling for t designs")
    gen.add_argument("--out", type=Path, required=True)

    diagnose = commands.add_parser("diagnose", help="Report regularity diagnostics")
    add_data_arguments(diagnose)
    add_scheme_arguments(diagnose)
    diagnose.add_argument("--r", type=int, required=True)

    shrinkage = commands.add_parser("shrinkage", help="Per-row scores of the leverage based schemes")
    add_data_arguments(shrinkage)
    shrinkage.add_argument("--slev-lambda", type=float, default=None)
    shrinkage.add_argument("--out", type=Path, default=None)

    serve = commands.add_parser("serve", help="Run the development web server")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=5000)
    return parser


def _scheme(args, config) -> SchemeSpec:
    return SchemeSpec(
        kind=args.scheme,
        slev_lambda=config["SLEV_LAMBDA"] if args.slev_lambda is None else args.slev_lambda,
        floor=config["FLOOR"] if args.floor is None else args.floor,
    )


def _load(args):
    return load_csv(args.input, args.response, header=args.header, intercept=args.intercept, expand=args.expand)


def _emit_frame(frame: pd.DataFrame, out: Optional[Path], fmt: str):
    try:
        if fmt == "json":
            text = frame.to_json(orient="records", double_precision=15)
            if out is None:
                print(text)
            else:
                out.write_text(text + "\n")
        else:
            frame.to_csv(sys.stdout if out is None else out, index=False, float_format="%.17g",
                         lineterminator="\n")
    except OSError as e:
        raise IoError(f"Cannot write {out}: {e}")


def _emit_json(document, out: Optional[Path]):
    text = json.dumps(document, indent="    ")
    if out is None:
        print(text)
        return
    try:
        out.write_text(text + "\n")
    except OSError as e:
        raise IoError(f"Cannot write {out}: {e}")


def cmd_probs(args, config):
    X, Y = _load(args)
    fit = ols_fit(X, Y)
    pi = build_probs(X, fit, _scheme(args, config))
    _emit_frame(pd.DataFrame({"pi": pi.pi}), args.out, args.format or "csv")


def cmd_estimate(args, config):
    X, Y = _load(args)
    seed = master_seed(args.seed, config)
    result = estimate(X, Y, _scheme(args, config), args.r, seed, level=args.ci)
    if (args.format or "json") == "json":
        _emit_json(EstimateResultSchema().dump(result), args.out)
        return
    frame = pd.DataFrame({
        "coefficient": range(result.fit.p),
        "beta_tilde": result.estimate.beta_tilde,
        "beta_ols": result.fit.beta_hat,
    })
    if result.intervals is not None:
        frame["lower"] = result.intervals[:, 0]
        frame["upper"] = result.intervals[:, 1]
    _emit_frame(frame, args.out, "csv")


def cmd_experiment(args, config):
    try:
        with open(args.config, mode="r") as config_file:
            document = json.load(config_file)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read {args.config}: {e}")
    if not isinstance(document, dict):
        raise ConfigError(f"{args.config} must hold a JSON object")
    document.setdefault("replicates", config["REPLICATES"])
    document.setdefault("max_retries", config["MAX_RETRIES"])
    try:
        cfg = ExperimentConfigSchema().load(document)
    except ValidationError as err:
        raise ConfigError(f"Invalid experiment configuration: {err.messages}")

    seed = master_seed(args.seed, {"MASTER_SEED": cfg.master_seed})
    threads = config["THREADS"] if args.threads is None else args.threads
    cfg = replace(cfg, master_seed=seed, threads=threads)

    progress = not args.no_progress and sys.stderr.isatty()
    report = run_experiment(cfg, progress=progress)
    fmt = args.format or ("json" if args.out.suffix == ".json" else "csv")
    write_report(report, args.out, fmt, timing=args.timing)
    logger.info("Wrote %d cells to %s in %.1f s", len(report.cells), args.out, report.wall_time)


def cmd_gen(args, config):
    spec = DataSpec(dist=args.dist, n=args.n, p=args.p, seed=master_seed(args.seed, config), rho=args.rho,
                    sigma=args.sigma, noncentral=args.noncentral)
    X, Y, _ = gen_dataset(spec)
    frame = pd.DataFrame(X, columns=[f"x{j + 1}" for j in range(spec.p)])
    frame.insert(0, "y", Y)
    try:
        frame.to_csv(args.out, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise IoError(f"Cannot write {args.out}: {e}")
    logger.info("Wrote %s data (n=%d, p=%d) to %s; read it back with --header", spec.dist.value, spec.n, spec.p,
                args.out)


def cmd_diagnose(args, config):
    X, Y = _load(args)
    fit = ols_fit(X, Y)
    pi = build_probs(X, fit, _scheme(args, config))
    diagnostics = check_regularity(X, pi, args.r, config["MIN_SAMPLING_MASS"])
    if (args.format or "json") == "json":
        _emit_json(RegularityDiagnosticsSchema().dump(diagnostics), None)
    else:
        row = asdict(diagnostics)
        row["flags"] = ";".join(row["flags"])
        _emit_frame(pd.DataFrame([row]), None, "csv")


def cmd_shrinkage(args, config):
    X, Y = _load(args)
    fit = ols_fit(X, Y)
    slev_lambda = config["SLEV_LAMBDA"] if args.slev_lambda is None else args.slev_lambda
    _emit_frame(shrinkage_report(X, fit, slev_lambda), args.out, args.format or "csv")


def cmd_serve(args, config):
    from levsample import create_app
    create_app(instance_path=args.instance).run(host=args.host, port=args.port)


COMMANDS = {
    "probs": cmd_probs,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "gen": cmd_gen,
    "diagnose": cmd_diagnose,
    "shrinkage": cmd_shrinkage,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.instance)
        COMMANDS[args.command](args, config)
    except LevsampleError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
