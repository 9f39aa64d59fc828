"""Logconcave noise families in standard (zero location, unit scale) form.

Three i.i.d. families are supported: Gaussian, Laplace and logistic.
Location and scale never live here; they enter through the observation
model. Per-coordinate log-CDFs use tail-stable formulas so values stay
finite and monotone for arguments far into the tails (|t| >= 30), which
matters because MLE line searches visit extreme arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import special

_LOG_HALF = math.log(0.5)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    LOGISTIC = "logistic"


# ---------------------------------------------------------------------------
# standard univariate building blocks, vectorized over numpy arrays
# ---------------------------------------------------------------------------

def _gaussian_log_pdf(t: np.ndarray) -> np.ndarray:
    return -0.5 * t * t - _HALF_LOG_2PI


def _laplace_log_pdf(t: np.ndarray) -> np.ndarray:
    return -np.abs(t) - math.log(2.0)


def _logistic_log_pdf(t: np.ndarray) -> np.ndarray:
    # symmetric form: exp(-|t|) never overflows
    a = np.abs(t)
    return -a - 2.0 * np.log1p(np.exp(-a))


def _gaussian_log_cdf(t: np.ndarray) -> np.ndarray:
    return special.log_ndtr(t)


def _laplace_log_cdf(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    left = t <= 0.0
    out[left] = _LOG_HALF + t[left]
    out[~left] = np.log1p(-0.5 * np.exp(-t[~left]))
    return out


def _logistic_log_cdf(t: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -np.asarray(t, dtype=float))


def _gaussian_quantile(p: np.ndarray) -> np.ndarray:
    return special.ndtri(p)


def _laplace_quantile(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    low = p < 0.5
    out[low] = np.log(2.0 * p[low])
    out[~low] = -np.log(2.0 * (1.0 - p[~low]))
    return out


def _logistic_quantile(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def _gaussian_score(t: np.ndarray) -> np.ndarray:
    return -np.asarray(t, dtype=float)


def _laplace_score(t: np.ndarray) -> np.ndarray:
    return -np.sign(t)


def _logistic_score(t: np.ndarray) -> np.ndarray:
    return -np.tanh(0.5 * np.asarray(t, dtype=float))


def _gaussian_sample(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape)


def _laplace_sample(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.laplace(0.0, 1.0, shape)


def _logistic_sample(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.logistic(0.0, 1.0, shape)


_LOG_PDF = {
    Family.GAUSSIAN: _gaussian_log_pdf,
    Family.LAPLACE: _laplace_log_pdf,
    Family.LOGISTIC: _logistic_log_pdf,
}
_LOG_CDF = {
    Family.GAUSSIAN: _gaussian_log_cdf,
    Family.LAPLACE: _laplace_log_cdf,
    Family.LOGISTIC: _logistic_log_cdf,
}
_QUANTILE = {
    Family.GAUSSIAN: _gaussian_quantile,
    Family.LAPLACE: _laplace_quantile,
    Family.LOGISTIC: _logistic_quantile,
}
_SCORE = {
    Family.GAUSSIAN: _gaussian_score,
    Family.LAPLACE: _laplace_score,
    Family.LOGISTIC: _logistic_score,
}
_SAMPLE = {
    Family.GAUSSIAN: _gaussian_sample,
    Family.LAPLACE: _laplace_sample,
    Family.LOGISTIC: _logistic_sample,
}


@dataclass(frozen=True)
class ConcavityReport:
    """Outcome of a randomized midpoint-concavity scan of a log-density."""

    trials: int
    violations: int
    worst_gap: float


def midpoint_concavity_report(
    log_pdf_batch: Callable[[np.ndarray], np.ndarray],
    dim: int,
    trials: int,
    seed: int,
    tol: float = 1e-9,
    spread: float = 3.0,
) -> ConcavityReport:
    """Scan random segments for violations of midpoint concavity.

    ``log_pdf_batch`` maps an (N, dim) array of points to N log-density
    values. A triple (w0, w1, alpha) violates concavity when
    ``log f(w_alpha) < alpha log f(w1) + (1 - alpha) log f(w0) - tol``
    with ``w_alpha = alpha w1 + (1 - alpha) w0``. The worst signed gap
    (positive = violation) is reported alongside the count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    w0 = rng.normal(0.0, spread, size=(trials, dim))
    w1 = rng.normal(0.0, spread, size=(trials, dim))
    alpha = rng.uniform(0.0, 1.0, size=trials)
    wa = alpha[:, None] * w1 + (1.0 - alpha[:, None]) * w0
    lp0 = log_pdf_batch(w0)
    lp1 = log_pdf_batch(w1)
    lpa = log_pdf_batch(wa)
    gap = alpha * lp1 + (1.0 - alpha) * lp0 - lpa
    return ConcavityReport(
        trials=trials,
        violations=int(np.count_nonzero(gap > tol)),
        worst_gap=float(np.max(gap)),
    )


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. noise vector in R^dim from a standard logconcave family.

    Immutable after construction and safe to share across threads;
    sampling takes an explicit seed and owns its generator per call.
    """

    family: Family
    dim: int

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family(self.family))
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    # -- univariate standard-form pieces (vectorized) --

    def log_pdf1(self, t) -> np.ndarray:
        """Log density of one standard coordinate; -inf at +-inf."""
        return _LOG_PDF[self.family](np.asarray(t, dtype=float))

    def pdf1(self, t) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_pdf1(t))

    def log_cdf(self, t) -> np.ndarray:
        """Tail-stable log CDF of one coordinate; handles +-inf by continuity."""
        return _LOG_CDF[self.family](np.asarray(t, dtype=float))

    def cdf(self, t) -> np.ndarray:
        return np.exp(self.log_cdf(t))

    def quantile(self, p) -> np.ndarray:
        return _QUANTILE[self.family](np.asarray(p, dtype=float))

    def score1(self, t) -> np.ndarray:
        """Derivative of log_pdf1 (defined a.e. for Laplace)."""
        return _SCORE[self.family](np.asarray(t, dtype=float))

    # -- vector operations --

    def log_pdf(self, w) -> float:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {w.shape}")
        return float(np.sum(self.log_pdf1(w)))

    def log_pdf_rows(self, W: np.ndarray) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[1] != self.dim:
            raise ValueError(f"expected (N, {self.dim}) array, got shape {W.shape}")
        return np.sum(self.log_pdf1(W), axis=1)

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Draw ``count`` i.i.d. standard vectors, reproducible per seed."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        return _SAMPLE[self.family](rng, (count, self.dim))

    def check_logconcavity(self, trials: int, seed: int, tol: float = 1e-9) -> ConcavityReport:
        """Randomized midpoint-concavity self-check of this family's log-pdf."""
        return midpoint_concavity_report(self.log_pdf_rows, self.dim, trials, seed, tol=tol)


def make_noise(name: str, dim: int) -> NoiseModel:
    """Build a NoiseModel from its CLI/config name ("gaussian"|"laplace"|"logistic")."""
    try:
        family = Family(name.lower())
    except ValueError:
        valid = ", ".join(f.value for f in Family)
        raise ValueError(f"unknown noise family {name!r}; expected one of: {valid}") from None
    return NoiseModel(family, dim)
