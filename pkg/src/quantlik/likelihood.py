"""Likelihood evaluation for continuous and quantized observations.

The observation model is y = scale^{-1} (S x + w) with w from a standard
i.i.d. noise family. For quantized data the likelihood of a code is the
noise-law probability of the region of w values consistent with that code.
On the exact path (box region, diagonal-like scale) that probability
factorizes into per-coordinate CDF differences, computed as stable
log-differences; everything else goes through Monte Carlo.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from .noise import NoiseModel
from .quantizer import Box, Code, Quantizer, Region, region_contains_rows

_DIAG_TOL = 1e-12


# ---------------------------------------------------------------------------
# scale parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleScalar:
    """Scale matrix psi * I with psi > 0."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("scalar scale must be positive")
        object.__setattr__(self, "value", float(self.value))

    def diagonal(self, n: int) -> np.ndarray:
        return np.full(n, self.value)

    def matrix(self, n: int) -> np.ndarray:
        return self.value * np.eye(n)

    def log_det(self, n: int) -> float:
        return n * math.log(self.value)

    def apply_rows(self, V: np.ndarray) -> np.ndarray:
        return self.value * V

    def solve_rows(self, V: np.ndarray) -> np.ndarray:
        return V / self.value


@dataclass(frozen=True)
class ScaleDiagonal:
    """Diagonal positive-definite scale matrix."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or not np.all(values > 0):
            raise ValueError("diagonal scale entries must be positive")
        object.__setattr__(self, "values", values)

    def diagonal(self, n: int) -> np.ndarray:
        self._check(n)
        return self.values

    def matrix(self, n: int) -> np.ndarray:
        self._check(n)
        return np.diag(self.values)

    def log_det(self, n: int) -> float:
        self._check(n)
        return float(np.sum(np.log(self.values)))

    def apply_rows(self, V: np.ndarray) -> np.ndarray:
        return V * self.values

    def solve_rows(self, V: np.ndarray) -> np.ndarray:
        return V / self.values

    def _check(self, n: int) -> None:
        if self.values.shape[0] != n:
            raise ValueError("diagonal scale length does not match dimension")


@dataclass(frozen=True)
class ScaleFixed:
    """Full symmetric positive-definite scale matrix, validated by Cholesky."""

    matrix_value: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix_value, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("fixed scale must be a square matrix")
        if not np.allclose(M, M.T, atol=1e-10):
            raise ValueError("fixed scale must be symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            raise ValueError("fixed scale must be positive definite") from None
        object.__setattr__(self, "matrix_value", M)

    def diagonal(self, n: int) -> np.ndarray:
        self._check(n)
        if not self.is_diagonal(n):
            raise ValueError("fixed scale is not numerically diagonal")
        return np.diag(self.matrix_value).copy()

    def matrix(self, n: int) -> np.ndarray:
        self._check(n)
        return self.matrix_value

    def log_det(self, n: int) -> float:
        self._check(n)
        sign, logdet = np.linalg.slogdet(self.matrix_value)
        return float(logdet)

    def apply_rows(self, V: np.ndarray) -> np.ndarray:
        return V @ self.matrix_value.T

    def solve_rows(self, V: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.matrix_value, V.T).T

    def is_diagonal(self, n: int, tol: float = _DIAG_TOL) -> bool:
        off = self.matrix_value - np.diag(np.diag(self.matrix_value))
        return bool(np.max(np.abs(off)) < tol)

    def _check(self, n: int) -> None:
        if self.matrix_value.shape[0] != n:
            raise ValueError("fixed scale shape does not match dimension")


Scale = Union[ScaleScalar, ScaleDiagonal, ScaleFixed]


def scale_diagonal_or_raise(scale: Scale, n: int) -> np.ndarray:
    """Diagonal entries of a diagonal-like scale; error for the general case."""
    if isinstance(scale, (ScaleScalar, ScaleDiagonal)):
        return scale.diagonal(n)
    if isinstance(scale, ScaleFixed) and scale.is_diagonal(n):
        return scale.diagonal(n)
    raise ValueError(
        "exact evaluation needs a scalar, diagonal, or numerically diagonal scale; "
        "use Monte Carlo (mc=...) for general scale matrices"
    )


# ---------------------------------------------------------------------------
# observation model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocationScaleModel:
    """Observation model y = scale^{-1}(S x + w); immutable, replace to update."""

    S: np.ndarray
    x: np.ndarray
    scale: Scale

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if S.ndim != 2:
            raise ValueError("S must be a matrix")
        if S.shape[1] != x.shape[0]:
            raise ValueError(f"S has {S.shape[1]} columns but x has length {x.shape[0]}")
        # trigger the scale's own dimension check early
        self.scale.matrix(S.shape[0])
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def m(self) -> int:
        return self.S.shape[1]

    def shift(self) -> np.ndarray:
        """S x, the location term in noise space."""
        return self.S @ self.x

    def with_params(self, x=None, scale: Optional[Scale] = None) -> "LocationScaleModel":
        return dataclasses.replace(
            self,
            x=self.x if x is None else np.asarray(x, dtype=float),
            scale=self.scale if scale is None else scale,
        )


# ---------------------------------------------------------------------------
# likelihood values
# ---------------------------------------------------------------------------

class EvalMethod(str, Enum):
    EXACT_BOX = "exact-box"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class MonteCarlo:
    """Monte-Carlo settings; count below 100 is rejected as meaningless."""

    count: int
    seed: int

    def __post_init__(self):
        if self.count < 100:
            raise ValueError("Monte-Carlo count must be at least 100")


@dataclass(frozen=True)
class LikelihoodValue:
    log_value: float
    std_error: float
    method: EvalMethod
    underflow: bool = False

    def __post_init__(self):
        if self.log_value > 0.0:
            raise ValueError("quantized log-likelihoods are log-probabilities (<= 0)")
        if self.std_error < 0.0:
            raise ValueError("std_error must be nonnegative")


# ---------------------------------------------------------------------------
# continuous likelihood
# ---------------------------------------------------------------------------

def residual_logpdf(model: LocationScaleModel, noise: NoiseModel, y) -> float:
    """log p_w(scale @ y - S x): the likelihood of (x, scale) for fixed y.

    This is the quantity whose joint concavity in the parameters is
    inherited directly from the noise log-density; it is not a normalized
    density of y (see continuous_loglik for that).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n,):
        raise ValueError(f"expected data vector of length {model.n}")
    w = model.scale.apply_rows(y[None, :])[0] - model.shift()
    return noise.log_pdf(w)


def continuous_loglik(model: LocationScaleModel, noise: NoiseModel, y) -> float:
    """Proper log-density of y: residual log-pdf plus the log|det scale| Jacobian."""
    return residual_logpdf(model, noise, y) + model.scale.log_det(model.n)


# ---------------------------------------------------------------------------
# exact box path
# ---------------------------------------------------------------------------

def log_interval_prob(noise: NoiseModel, lo, hi) -> np.ndarray:
    """log(F(hi) - F(lo)) per element, stable in both tails.

    Intervals in the upper tail are flipped through the family's symmetry
    so the difference is always taken between well-separated log-CDFs;
    infinite ends reduce to single CDF evaluations. Returns -inf when the
    probability underflows entirely.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.full(np.broadcast(lo, hi).shape, -np.inf)
    lo, hi = np.broadcast_arrays(lo, hi)

    full = np.isneginf(lo) & np.isposinf(hi)
    out[full] = 0.0

    upper_only = np.isneginf(lo) & ~full
    out[upper_only] = noise.log_cdf(hi[upper_only])

    lower_only = np.isposinf(hi) & ~full
    out[lower_only] = noise.log_cdf(-lo[lower_only])

    both = np.isfinite(lo) & np.isfinite(hi)
    if np.any(both):
        l, h = lo[both], hi[both]
        flip = (l + h) > 0.0  # families are symmetric: F(h)-F(l) = F(-l)-F(-h)
        a = np.where(flip, noise.log_cdf(-l), noise.log_cdf(h))
        b = np.where(flip, noise.log_cdf(-h), noise.log_cdf(l))
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = np.where(b > -np.inf, a + np.log(-np.expm1(b - a)), a)
        out[both] = diff
    return out


def _box_edges_rows(q: Quantizer, codes: Sequence[Code]) -> tuple[np.ndarray, np.ndarray]:
    """Stack the box bounds of the given codes into (N, n) arrays."""
    lowers, uppers = [], []
    for z in codes:
        reg = q.region(z)
        if not isinstance(reg, Box):
            raise ValueError(
                "exact evaluation needs box regions (per-dimension ADC quantizer); "
                "use Monte Carlo (mc=...) for polytope regions"
            )
        lowers.append(reg.lower)
        uppers.append(reg.upper)
    return np.array(lowers), np.array(uppers)


def _exact_logterms(
    model: LocationScaleModel, noise: NoiseModel, A: np.ndarray, B: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-coordinate log interval probabilities for boxes [A, B) in data space.

    Returns (terms, lo, hi) where lo/hi are the transformed edges in noise
    space: lo = d * A - S x, hi = d * B - S x for diagonal scale d.
    """
    d = scale_diagonal_or_raise(model.scale, model.n)
    sx = model.shift()
    with np.errstate(invalid="ignore"):
        lo = d * A - sx
        hi = d * B - sx
    return log_interval_prob(noise, lo, hi), lo, hi


def quantized_loglik(
    model: LocationScaleModel,
    noise: NoiseModel,
    q: Quantizer,
    z: Code,
    mc: Optional[MonteCarlo] = None,
) -> LikelihoodValue:
    """Log-probability of observing code z under the model.

    Without ``mc`` the exact factorized path is used, which requires a box
    region and a (numerically) diagonal scale. With ``mc`` the probability
    is the hit fraction of noise draws mapped through the model, with a
    delta-method standard error on the log scale; zero hits yield -inf and
    the underflow flag instead of an error so solvers can treat the value
    as a barrier.
    """
    if noise.dim != model.n:
        raise ValueError("noise dimension does not match model dimension")
    if mc is None:
        A, B = _box_edges_rows(q, [z])
        terms, _, _ = _exact_logterms(model, noise, A, B)
        return LikelihoodValue(float(np.sum(terms)), 0.0, EvalMethod.EXACT_BOX)

    region = q.region(z)
    W = noise.sample(mc.count, mc.seed)
    Y = model.scale.solve_rows(W + model.shift())
    hits = int(np.count_nonzero(region_contains_rows(region, Y)))
    if hits == 0:
        return LikelihoodValue(-np.inf, np.inf, EvalMethod.MONTE_CARLO, underflow=True)
    p_hat = hits / mc.count
    # half-count clamp keeps the estimate strictly inside (0, 1) so the
    # delta-method standard error is positive even when every draw hits
    p_se = min(p_hat, 1.0 - 0.5 / mc.count)
    se_log = math.sqrt(p_se * (1.0 - p_se) / mc.count) / p_se
    return LikelihoodValue(math.log(p_hat), se_log, EvalMethod.MONTE_CARLO)


@dataclass(frozen=True)
class QuantizedGrad:
    """Exact-path gradient of the quantized log-likelihood.

    ``d_scale`` has one entry for a scalar scale, n entries for a diagonal
    scale, and is None when the scale is a fixed matrix (treated as
    constant).
    """

    d_x: np.ndarray
    d_scale: Optional[np.ndarray]


def _grad_from_edges(
    model: LocationScaleModel,
    noise: NoiseModel,
    A: np.ndarray,
    B: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> tuple[QuantizedGrad, np.ndarray]:
    """Gradient terms for stacked boxes; weights multiply per-box contributions."""
    terms, lo, hi = _exact_logterms(model, noise, A, B)
    logp = terms
    if np.any(np.isneginf(logp)):
        raise ValueError("zero-probability bin: gradient undefined")
    with np.errstate(invalid="ignore"):
        r_hi = np.exp(noise.log_pdf1(hi) - logp)  # pdf at +-inf is 0, so ratio -> 0
        r_lo = np.exp(noise.log_pdf1(lo) - logp)
    if weights is None:
        weights = np.ones(A.shape[0])
    coord = weights[:, None] * (r_lo - r_hi)
    d_x = model.S.T @ np.sum(coord, axis=0)

    if isinstance(model.scale, ScaleFixed):
        return QuantizedGrad(d_x, None), terms

    # edge * pdf-ratio terms vanish at infinite edges (pdf decays faster)
    B_fin = np.where(np.isfinite(B), B, 0.0)
    A_fin = np.where(np.isfinite(A), A, 0.0)
    t = weights[:, None] * (B_fin * r_hi - A_fin * r_lo)
    if isinstance(model.scale, ScaleScalar):
        d_scale = np.array([float(np.sum(t))])
    else:
        d_scale = np.sum(t, axis=0)
    return QuantizedGrad(d_x, d_scale), terms


def grad_quantized_loglik(
    model: LocationScaleModel, noise: NoiseModel, q: Quantizer, z: Code
) -> QuantizedGrad:
    """Analytic gradient of the exact-path quantized log-likelihood at one code."""
    A, B = _box_edges_rows(q, [z])
    grad, _ = _grad_from_edges(model, noise, A, B)
    return grad


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def _unique_codes(codes: Sequence[Code]) -> tuple[list[Code], np.ndarray]:
    arr = np.asarray([tuple(z) for z in codes], dtype=int)
    uniq, counts = np.unique(arr, axis=0, return_counts=True)
    return [tuple(int(v) for v in row) for row in uniq], counts.astype(float)


def dataset_loglik(
    model: LocationScaleModel,
    noise: NoiseModel,
    q: Quantizer,
    codes: Sequence[Code],
    mc: Optional[MonteCarlo] = None,
) -> LikelihoodValue:
    """Sum of per-observation log-likelihoods over an i.i.d. code sample.

    Monte-Carlo runs derive per-observation seeds as ``seed XOR index`` so
    totals are deterministic; standard errors combine in quadrature. Any
    -inf term makes the total -inf.
    """
    codes = list(codes)
    if not codes:
        raise ValueError("codes must be nonempty")
    if mc is None:
        uniq, counts = _unique_codes(codes)
        A, B = _box_edges_rows(q, uniq)
        terms, _, _ = _exact_logterms(model, noise, A, B)
        per_code = np.sum(terms, axis=1)
        total = float(np.dot(counts, per_code)) if np.all(np.isfinite(per_code)) else -np.inf
        return LikelihoodValue(total, 0.0, EvalMethod.EXACT_BOX)

    total = 0.0
    var = 0.0
    underflow = False
    for i, z in enumerate(codes):
        lv = quantized_loglik(model, noise, q, z, mc=MonteCarlo(mc.count, mc.seed ^ i))
        if lv.underflow:
            underflow = True
        total += lv.log_value
        if math.isfinite(lv.std_error):
            var += lv.std_error**2
    se = math.inf if underflow else math.sqrt(var)
    return LikelihoodValue(
        -np.inf if underflow else total, se, EvalMethod.MONTE_CARLO, underflow=underflow
    )


def dataset_grad(
    model: LocationScaleModel, noise: NoiseModel, q: Quantizer, codes: Sequence[Code]
) -> QuantizedGrad:
    """Analytic exact-path gradient of dataset_loglik, grouped by unique code."""
    codes = list(codes)
    if not codes:
        raise ValueError("codes must be nonempty")
    uniq, counts = _unique_codes(codes)
    A, B = _box_edges_rows(q, uniq)
    grad, _ = _grad_from_edges(model, noise, A, B, weights=counts)
    return grad
