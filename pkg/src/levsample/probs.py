"""
probs.py
========================
Sampling probability schemes over the rows of a design matrix.

Three schemes are established in the literature (UNIF, BLEV, SLEV). The other six minimize an asymptotic error
criterion: IC, RL and PL minimize the AMSE of beta, X beta and X^T X beta around the true parameter, and ICNLEV,
RLNLEV and PLNLEV minimize the expected AMSE around the full sample OLS solution. The latter differ from the former
by a factor sqrt(1 - h_ii).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Tuple

import numpy as np
import pandas as pd

from levsample.errors import DegenerateScheme, InvalidLambda, InvalidSpec
from levsample.linalg import OlsFit, as_design, row_norms

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    UNIF = "unif"
    BLEV = "blev"
    SLEV = "slev"
    IC = "ic"
    RL = "rl"
    PL = "pl"
    ICNLEV = "icnlev"
    RLNLEV = "rlnlev"
    PLNLEV = "plnlev"

    @property
    def negative_leverage(self) -> bool:
        return self in (Scheme.ICNLEV, Scheme.RLNLEV, Scheme.PLNLEV)


class Mode(str, Enum):
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"


class Target(str, Enum):
    COEF = "coef"  # beta
    FIT = "fit"  # X beta
    GRAM = "gram"  # X^T X beta


# scheme whose probabilities minimize AMSE (unconditional) or EAMSE (conditional) for a target
OPTIMAL_SCHEME: Dict[Tuple[Mode, Target], Scheme] = {
    (Mode.UNCONDITIONAL, Target.COEF): Scheme.IC,
    (Mode.UNCONDITIONAL, Target.FIT): Scheme.RL,
    (Mode.UNCONDITIONAL, Target.GRAM): Scheme.PL,
    (Mode.CONDITIONAL, Target.COEF): Scheme.ICNLEV,
    (Mode.CONDITIONAL, Target.FIT): Scheme.RLNLEV,
    (Mode.CONDITIONAL, Target.GRAM): Scheme.PLNLEV,
}

DEFAULT_SLEV_LAMBDA = 0.9


@dataclass(frozen=True)
class SchemeSpec:
    """
    A sampling scheme together with its parameters.

    :param slev_lambda: mixing weight of the leverage distribution, only used by SLEV
    :param floor: lower bound for every probability, as a fraction of 1/n
    """
    kind: Scheme
    slev_lambda: float = DEFAULT_SLEV_LAMBDA
    floor: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme(self.kind))
        if self.kind == Scheme.SLEV and not 0.0 < self.slev_lambda < 1.0:
            raise InvalidLambda(f"SLEV requires 0 < lambda < 1, got {self.slev_lambda}")
        if not 0.0 <= self.floor < 1.0:
            raise InvalidSpec(f"Probability floor must lie in [0, 1), got {self.floor}")

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class ProbabilityVector:
    pi: np.ndarray
    scheme: SchemeSpec

    @property
    def n(self) -> int:
        return self.pi.shape[0]


def _gram_inverse_norms(X: np.ndarray, fit: OlsFit) -> np.ndarray:
    return np.linalg.norm(X @ fit.gram_inverse, axis=1)


def raw_scores(X, fit: OlsFit, spec: SchemeSpec) -> np.ndarray:
    """Unnormalized scores of a scheme, before flooring."""
    X = as_design(X)
    n, p = X.shape
    h = np.clip(fit.leverage, 0.0, 1.0)
    kind = spec.kind

    if kind == Scheme.UNIF:
        return np.ones(n)
    if kind == Scheme.BLEV:
        return h / p
    if kind == Scheme.SLEV:
        return spec.slev_lambda * h / p + (1.0 - spec.slev_lambda) / n

    if kind in (Scheme.IC, Scheme.ICNLEV):
        scores = _gram_inverse_norms(X, fit)
    elif kind in (Scheme.RL, Scheme.RLNLEV):
        scores = np.sqrt(h)
    else:
        scores = row_norms(X)

    if kind.negative_leverage:
        scores = scores * np.sqrt(1.0 - h)
    return scores


def build_probs(X, fit: OlsFit, spec: SchemeSpec) -> ProbabilityVector:
    """
    Builds the sampling distribution of a scheme.

    Scores are divided by their exact sum. If a floor is set, every entry below floor/n is raised to it and the vector
    is renormalized once; floored vectors therefore deviate slightly from the closed-form probabilities.
    """
    scores = raw_scores(X, fit, spec)
    n = scores.shape[0]
    total = scores.sum()

    if total > 0.0:
        pi = scores / total
    elif spec.floor > 0.0:
        pi = np.zeros(n)
    else:
        raise DegenerateScheme(f"All {spec.label} scores are zero")

    if spec.floor > 0.0:
        lower = spec.floor / n
        raised = pi < lower
        if raised.any():
            logger.debug("Raising %d %s probabilities to the floor %g", raised.sum(), spec.label, lower)
            pi = np.where(raised, lower, pi)
            pi = pi / pi.sum()

    pi.setflags(write=False)
    return ProbabilityVector(pi=pi, scheme=spec)


def shrinkage_report(X, fit: OlsFit, slev_lambda: float = DEFAULT_SLEV_LAMBDA) -> pd.DataFrame:
    """
    Per-row scores of the leverage based schemes as functions of h_ii, for comparing how strongly each scheme
    shrinks the leverage distribution. The SLEV score is lambda h_ii + (1 - lambda) p / n.
    """
    X = as_design(X)
    n, p = X.shape
    h = np.clip(fit.leverage, 0.0, 1.0)
    return pd.DataFrame({
        "h": h,
        "blev_score": h,
        "rl_score": np.sqrt(h),
        "rlnlev_score": np.sqrt((1.0 - h) * h),
        "slev_score": slev_lambda * h + (1.0 - slev_lambda) * p / n,
    })


def probability_summary(X, fit: OlsFit, specs: Iterable[SchemeSpec]) -> pd.DataFrame:
    """
    Summary statistics of log10 probabilities per scheme: the numbers behind a box plot comparing how dispersed
    the sampling distributions are. Zero probabilities are excluded from the log statistics and counted separately.
    """
    records = []
    for spec in specs:
        pi = build_probs(X, fit, spec).pi
        positive = pi[pi > 0]
        logs = np.log10(positive)
        q1, median, q3 = np.percentile(logs, [25, 50, 75])
        records.append({
            "scheme": spec.label,
            "min": logs.min(),
            "q1": q1,
            "median": median,
            "q3": q3,
            "max": logs.max(),
            "mean": logs.mean(),
            "zeros": int(pi.shape[0] - positive.shape[0]),
        })
    return pd.DataFrame.from_records(
        records, columns=["scheme", "min", "q1", "median", "q3", "max", "mean", "zeros"])
