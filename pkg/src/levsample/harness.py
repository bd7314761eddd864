"""
harness.py
========================
Monte Carlo experiments measuring squared bias and variance of subsample estimators across schemes and sample
sizes, CSV ingestion for real datasets and report serialization.

In unconditional mode every replicate draws a fresh dataset and the estimates are compared with the true parameter
(or X beta_0, X^T X beta_0 using that replicate's design). In conditional mode one dataset is fixed and the estimates
are compared with its OLS solution.

Every subsample is drawn from a seed derived from (master seed, scheme index, sample size index, replicate,
attempt), and replicate results are reduced in replicate order, so reports do not depend on the thread count.
"""
import itertools
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from levsample.asymptotics import AsymptoticCovariance, confidence_intervals, sigma_c
from levsample.datagen import DataSpec, default_beta0, gen_design, gen_response
from levsample.errors import (EmptyFile, InvalidSpec, IoError, NonNumeric, ParseError, SingularSubsample)
from levsample.linalg import OlsFit, as_design, as_response, ols_fit
from levsample.probs import Mode, ProbabilityVector, SchemeSpec, Target, build_probs
from levsample.sampler import SubsampleEstimate, derive_seed, draw_subsample, weighted_ls

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["scheme", "r", "squared_bias", "variance", "mse", "failed"]

# leading element of every derived seed key, keeping data and subsample streams apart
DATA_STREAM = 0
SUBSAMPLE_STREAM = 1


@dataclass(frozen=True)
class CsvSource:
    path: str
    response_column: int = 0
    header: bool = False
    intercept: bool = False
    expand: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    mode: Mode
    schemes: List[SchemeSpec]
    sample_sizes: List[int]
    target: Target = Target.COEF
    data: Optional[DataSpec] = None
    csv: Optional[CsvSource] = None
    replicates: int = 100
    master_seed: int = 0
    floor: float = 0.0
    beta0: Optional[List[float]] = None
    max_retries: int = 100
    normalize: bool = False
    threads: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "target", Target(self.target))
        if (self.data is None) == (self.csv is None):
            raise InvalidSpec("Exactly one of a data spec and a CSV source must be given")
        if self.mode == Mode.UNCONDITIONAL and self.data is None:
            raise InvalidSpec("Unconditional experiments need generated data with a known coefficient vector")
        if self.master_seed < 0:
            raise InvalidSpec(f"Master seed must be nonnegative, got {self.master_seed}")
        if self.replicates < 2:
            raise InvalidSpec(f"At least 2 replicates are required, got {self.replicates}")
        if any(r < 1 for r in self.sample_sizes):
            raise InvalidSpec("Sample sizes must be positive")
        if self.data is not None and any(r > self.data.n for r in self.sample_sizes):
            raise InvalidSpec(f"Sample sizes must not exceed n={self.data.n}")


@dataclass(frozen=True)
class ReportCell:
    scheme: str
    r: int
    squared_bias: float
    variance: float
    mse: float
    failed_replicates: int
    redraws: int = 0


@dataclass
class ExperimentReport:
    cells: List[ReportCell]
    metadata: Dict = field(default_factory=dict)
    wall_time: Optional[float] = field(default=None, compare=False)

    def cell(self, scheme: str, r: int) -> ReportCell:
        for candidate in self.cells:
            if candidate.scheme == scheme and candidate.r == r:
                return candidate
        raise KeyError((scheme, r))


@dataclass(frozen=True)
class EstimateBatch:
    estimates: np.ndarray  # shape (B, p), rows of failed replicates are NaN
    redraws: int

    @property
    def failed(self) -> int:
        return int(np.isnan(self.estimates[:, 0]).sum())


@dataclass(frozen=True)
class EstimateResult:
    fit: OlsFit
    probabilities: ProbabilityVector
    estimate: SubsampleEstimate
    covariance: AsymptoticCovariance
    level: Optional[float] = None
    intervals: Optional[np.ndarray] = None


def _parallel_map(function: Callable, items: Iterable, threads: int, total: int, progress: bool,
                  description: str) -> list:
    """Ordered map, on a thread pool unless threads == 1. threads == 0 lets the executor choose."""
    if threads == 1:
        results = map(function, items)
        return list(tqdm(results, total=total, disable=not progress, desc=description))
    with ThreadPoolExecutor(max_workers=threads or None) as executor:
        return list(tqdm(executor.map(function, items), total=total, disable=not progress, desc=description))


def _transform(X: np.ndarray, beta: np.ndarray, target: Target) -> np.ndarray:
    if target == Target.COEF:
        return np.asarray(beta)
    if target == Target.FIT:
        return X @ beta
    return X.T @ (X @ beta)


def estimate_with_retries(X, Y, pi: ProbabilityVector, r: int, master_seed: int, key: Tuple[int, ...],
                          max_retries: int) -> Tuple[Optional[SubsampleEstimate], int]:
    """
    Draws and solves one subsample, redrawing with a fresh derived seed while the subsample is singular.
    Returns the estimate (None once max_retries redraws failed as well) and the number of redraws.
    """
    for attempt in range(max_retries + 1):
        draw = draw_subsample(pi, r, derive_seed(master_seed, SUBSAMPLE_STREAM, *key, attempt))
        try:
            return weighted_ls(X, Y, draw, pi), attempt
        except SingularSubsample as e:
            logger.debug("Singular subsample for key %s, attempt %d: %s", key, attempt, e)
    logger.warning("Giving up on key %s after %d redraws", key, max_retries)
    return None, max_retries


def draw_estimates(X, Y, pi: ProbabilityVector, r: int, replicates: int, master_seed: int,
                   stream: Tuple[int, ...] = (), max_retries: int = 100, threads: int = 1,
                   progress: bool = False) -> EstimateBatch:
    """B independent subsample estimates on fixed data."""
    X = as_design(X)
    Y = as_response(Y, X.shape[0])

    def replicate(b: int):
        return estimate_with_retries(X, Y, pi, r, master_seed, stream + (b,), max_retries)

    results = _parallel_map(replicate, range(replicates), threads, replicates, progress,
                            f"{pi.scheme.label} r={r}")
    estimates = np.full((replicates, X.shape[1]), np.nan)
    redraws = 0
    for b, (result, attempts) in enumerate(results):
        redraws += attempts
        if result is not None:
            estimates[b] = result.beta_tilde
    return EstimateBatch(estimates=estimates, redraws=redraws)


def summarize_deviations(deviations: np.ndarray, normalize: bool = False) -> Tuple[float, float, float]:
    """
    Squared bias ||mean_b d_b||^2, variance mean_b ||d_b - mean d||^2 and mse mean_b ||d_b||^2 of the deviations
    d_b = t_b - target_b (rows of ``deviations``). NaN rows are excluded. With ``normalize`` the three values are
    divided by the dimension of the target.
    """
    valid = deviations[~np.isnan(deviations).any(axis=1)]
    if valid.shape[0] == 0:
        raise SingularSubsample("Every replicate failed")
    mean = valid.mean(axis=0)
    squared_bias = float(mean @ mean)
    variance = float(np.mean(np.sum((valid - mean) ** 2, axis=1)))
    mse = float(np.mean(np.sum(valid ** 2, axis=1)))
    if normalize:
        dimension = valid.shape[1]
        squared_bias, variance, mse = squared_bias / dimension, variance / dimension, mse / dimension
    return squared_bias, variance, mse


def _effective_schemes(cfg: ExperimentConfig) -> List[SchemeSpec]:
    if cfg.floor > 0.0:
        return [replace(spec, floor=max(spec.floor, cfg.floor)) for spec in cfg.schemes]
    return list(cfg.schemes)


def _beta0(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.beta0 is not None:
        return np.asarray(cfg.beta0, dtype=np.float64)
    return default_beta0(cfg.data.p)


def _unconditional(cfg: ExperimentConfig, schemes: List[SchemeSpec], progress: bool):
    beta0 = _beta0(cfg)

    def replicate(b: int):
        spec = replace(cfg.data, seed=derive_seed(cfg.master_seed, DATA_STREAM, b))
        X = gen_design(spec)
        Y = gen_response(X, beta0, spec.sigma, spec.seed)
        fit = ols_fit(X, Y)
        truth = _transform(X, beta0, cfg.target)
        outcome = {}
        for s, scheme in enumerate(schemes):
            pi = build_probs(X, fit, scheme)
            for k, r in enumerate(cfg.sample_sizes):
                result, redraws = estimate_with_retries(X, Y, pi, r, cfg.master_seed, (s, k, b), cfg.max_retries)
                deviation = None if result is None else _transform(X, result.beta_tilde, cfg.target) - truth
                outcome[(s, k)] = (deviation, redraws)
        return outcome

    outcomes = _parallel_map(replicate, range(cfg.replicates), cfg.threads, cfg.replicates, progress,
                             "replicates")
    dimension = cfg.data.n if cfg.target == Target.FIT else cfg.data.p
    cells = {}
    for s, k in itertools.product(range(len(schemes)), range(len(cfg.sample_sizes))):
        deviations = np.full((cfg.replicates, dimension), np.nan)
        redraws = 0
        for b, outcome in enumerate(outcomes):
            deviation, attempts = outcome[(s, k)]
            redraws += attempts
            if deviation is not None:
                deviations[b] = deviation
        cells[(s, k)] = (deviations, redraws)
    return cells, {"data_seed_key": [DATA_STREAM, "replicate"], "n": cfg.data.n, "p": cfg.data.p}


def _conditional(cfg: ExperimentConfig, schemes: List[SchemeSpec], progress: bool):
    if cfg.data is not None:
        X = gen_design(cfg.data)
        Y = gen_response(X, _beta0(cfg), cfg.data.sigma, cfg.data.seed)
    else:
        X, Y = load_csv(cfg.csv.path, cfg.csv.response_column, header=cfg.csv.header, intercept=cfg.csv.intercept,
                        expand=cfg.csv.expand)
        if any(r > X.shape[0] for r in cfg.sample_sizes):
            raise InvalidSpec(f"Sample sizes must not exceed n={X.shape[0]}")
    fit = ols_fit(X, Y)
    truth = _transform(X, fit.beta_hat, cfg.target)

    cells = {}
    for s, scheme in enumerate(schemes):
        pi = build_probs(X, fit, scheme)
        for k, r in enumerate(cfg.sample_sizes):
            batch = draw_estimates(X, Y, pi, r, cfg.replicates, cfg.master_seed, stream=(s, k),
                                   max_retries=cfg.max_retries, threads=cfg.threads, progress=progress)
            deviations = np.array([
                np.full(truth.shape[0], np.nan) if np.isnan(beta[0]) else _transform(X, beta, cfg.target) - truth
                for beta in batch.estimates
            ])
            cells[(s, k)] = (deviations, batch.redraws)
    return cells, {"n": int(X.shape[0]), "p": int(X.shape[1]), "sigma2_hat": fit.sigma2_hat}


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentReport:
    """
    Runs all (scheme, sample size) cells of an experiment and reports squared bias, variance and mse per cell.
    Failed replicates (singular subsamples after all redraws) are excluded and counted.
    """
    from levsample.models import ExperimentConfigSchema

    start = time.perf_counter()
    schemes = _effective_schemes(cfg)
    logger.info("Running %s experiment: %d schemes, sample sizes %s, %d replicates", cfg.mode.value,
                len(schemes), cfg.sample_sizes, cfg.replicates)

    if cfg.mode == Mode.UNCONDITIONAL:
        cells, data_metadata = _unconditional(cfg, schemes, progress)
    else:
        cells, data_metadata = _conditional(cfg, schemes, progress)

    report_cells = []
    for s, scheme in enumerate(schemes):
        for k, r in enumerate(cfg.sample_sizes):
            deviations, redraws = cells[(s, k)]
            failed = int(np.isnan(deviations).any(axis=1).sum())
            if failed:
                logger.warning("%s at r=%d: %d of %d replicates failed", scheme.label, r, failed, cfg.replicates)
            squared_bias, variance, mse = summarize_deviations(deviations, cfg.normalize)
            report_cells.append(ReportCell(scheme=scheme.label, r=int(r), squared_bias=squared_bias,
                                           variance=variance, mse=mse, failed_replicates=failed, redraws=redraws))

    metadata = {
        "config": ExperimentConfigSchema().dump(cfg),
        "master_seed": int(cfg.master_seed),
        "reference": "true parameter" if cfg.mode == Mode.UNCONDITIONAL else "full sample OLS",
        "variance_definition": "per-coordinate mean" if cfg.normalize else "trace (sum over coordinates)",
        "rng": "numpy Philox, seeds from SeedSequence spawn keys",
        **data_metadata,
    }
    return ExperimentReport(cells=report_cells, metadata=metadata, wall_time=time.perf_counter() - start)


def estimate(X, Y, spec: SchemeSpec, r: int, seed: int, level: Optional[float] = None) -> EstimateResult:
    """
    One subsample estimate with its conditional covariance (from the full sample residuals) and, if a level is
    given, normal confidence intervals.
    """
    fit = ols_fit(X, Y)
    pi = build_probs(X, fit, spec)
    draw = draw_subsample(pi, r, seed)
    result = weighted_ls(X, Y, draw, pi)
    covariance = sigma_c(X, fit.residuals, pi, r)
    intervals = None if level is None else confidence_intervals(result, covariance, level)
    return EstimateResult(fit=fit, probabilities=pi, estimate=result, covariance=covariance, level=level,
                          intervals=intervals)


def expand_features(X) -> np.ndarray:
    """Linear terms, their squares and all pairwise products, in that order (4 predictors give 14 columns)."""
    X = np.asarray(X, dtype=np.float64)
    pairs = [X[:, i] * X[:, j] for i, j in itertools.combinations(range(X.shape[1]), 2)]
    return np.column_stack([X, X ** 2] + pairs)


def add_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.column_stack([np.ones(X.shape[0]), X])


def load_csv(path: Union[str, Path], response_column: int, header: bool = False, intercept: bool = False,
             expand: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reads a comma separated numeric table. The response column becomes Y, the remaining columns in file order
    become X, optionally feature-expanded and with a leading intercept column.
    """
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty")
    except pd.errors.ParserError as e:
        raise ParseError(f"Cannot parse {path}: {e}")
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}")

    if frame.shape[0] == 0:
        raise EmptyFile(f"{path} contains no data rows")
    offset = 2 if header else 1

    missing = frame.isna().to_numpy()
    if missing.any():
        row, column = np.argwhere(missing)[0]
        raise ParseError("Missing value", row=int(row) + offset, column=int(column))

    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise NonNumeric(f"Cell {frame.iat[row, column]!r} is not a finite number", row=int(row) + offset,
                         column=int(column))

    if values.shape[1] < 2:
        raise ParseError(f"{path} needs a response column and at least one predictor column")
    if not 0 <= response_column < values.shape[1]:
        raise InvalidSpec(f"Response column {response_column} out of range for {values.shape[1]} columns")

    Y = values[:, response_column]
    X = np.delete(values, response_column, axis=1)
    if expand:
        X = expand_features(X)
    if intercept:
        X = add_intercept(X)
    logger.info("Loaded %d rows and %d predictors from %s", X.shape[0], X.shape[1], path)
    return as_design(X), as_response(Y, X.shape[0])


def write_report(report: ExperimentReport, path: Union[str, Path], format: str = "csv", timing: bool = False):
    """
    Writes a report as CSV (one row per cell, columns ``CSV_COLUMNS``, floats with 17 significant digits) or as JSON
    (cells and metadata; the wall time only if ``timing`` is set, since it differs between runs).
    """
    from levsample.models import ExperimentReportSchema

    try:
        if format == "csv":
            frame = pd.DataFrame(
                [[c.scheme, c.r, c.squared_bias, c.variance, c.mse, c.failed_replicates] for c in report.cells],
                columns=CSV_COLUMNS,
            )
            frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        elif format == "json":
            schema = ExperimentReportSchema() if timing else ExperimentReportSchema(exclude=("wall_time",))
            with open(path, mode="w") as report_file:
                json.dump(schema.dump(report), report_file, indent="    ")
                report_file.write("\n")
        else:
            raise InvalidSpec(f"Unknown report format {format!r}")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}")


def read_report(path: Union[str, Path]) -> ExperimentReport:
    from levsample.models import ExperimentReportSchema

    try:
        with open(path, mode="r") as report_file:
            return ExperimentReportSchema().load(json.load(report_file))
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}")
