"""Numerical claim suite: every logconcavity and set-geometry property the
library relies on, run as seeded randomized checks with explicit margins.

Positive claims must pass; the two negative controls (a non-logconcave
density and a non-convex one-code region) must produce detected
violations, and the ball-outside-box search must find a witness. The
suite reports one record per claim and an overall ok flag that requires
exactly this pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .geometry import (
    MatrixCombinationSpec,
    MatrixFamily,
    SampledSet,
    ball_outside_box_witness,
    decompose_combination_point,
    diag_box_hull_check,
    minkowski_combine,
    noise_region_box,
    noise_region_membership,
    prekopa_check,
    psd_ball_hull_check,
    recombine_region_points,
)
from .likelihood import (
    LocationScaleModel,
    MonteCarlo,
    ScaleDiagonal,
    ScaleFixed,
    ScaleScalar,
    grad_quantized_loglik,
    quantized_loglik,
    residual_logpdf,
)
from .noise import Family, NoiseModel, midpoint_concavity_report
from .quantizer import AdcBank, Box, HexagonalQuantizer, sample_region


@dataclass
class VerifyConfig:
    seed: int
    midpoint_trials: int = 1000
    concavity_trials: int = 10000
    prekopa_pairs: int = 20
    prekopa_mc: int = 100000
    hull_samples: int = 10000
    mc_compare_configs: int = 40
    mc_compare_count: int = 100000
    gradient_points: int = 200


@dataclass
class ClaimResult:
    claim_id: str
    description: str
    passed: bool
    expect_violation: bool = False
    margin: Optional[float] = None
    details: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    seed: int
    results: list[ClaimResult]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "ok": self.ok,
            "claims": [
                {
                    "id": r.claim_id,
                    "description": r.description,
                    "passed": r.passed,
                    "expected_violation": r.expect_violation,
                    "margin": r.margin,
                    "details": r.details,
                }
                for r in self.results
            ],
        }


CheckFn = Callable[[VerifyConfig], ClaimResult]
_REGISTRY: list[tuple[str, str, CheckFn]] = []


def _claim(claim_id: str, description: str):
    def wrap(fn: CheckFn) -> CheckFn:
        _REGISTRY.append((claim_id, description, fn))
        return fn

    return wrap


def claim_ids() -> list[str]:
    return [cid for cid, _, _ in _REGISTRY]


def run_suite(cfg: VerifyConfig, only: Optional[str] = None) -> SuiteReport:
    results = []
    for cid, desc, fn in _REGISTRY:
        if only is not None and cid != only:
            continue
        results.append(fn(cfg))
    if only is not None and not results:
        raise ValueError(f"unknown claim id {only!r}; known ids: {', '.join(claim_ids())}")
    return SuiteReport(seed=cfg.seed, results=results)


# ---------------------------------------------------------------------------
# noise-density checks
# ---------------------------------------------------------------------------

def _noise_concavity(cfg: VerifyConfig, family: Family) -> ClaimResult:
    noise = NoiseModel(family, 3)
    rep = noise.check_logconcavity(cfg.concavity_trials, cfg.seed)
    return ClaimResult(
        claim_id=f"noise-midpoint-{family.value}",
        description=f"{family.value} log-density satisfies the midpoint-concavity inequality",
        passed=rep.violations == 0,
        margin=-rep.worst_gap,
        details={"trials": rep.trials, "violations": rep.violations, "worst_gap": rep.worst_gap},
    )


@_claim("noise-midpoint-gaussian", "Gaussian log-density midpoint concavity")
def _check_noise_gaussian(cfg: VerifyConfig) -> ClaimResult:
    return _noise_concavity(cfg, Family.GAUSSIAN)


@_claim("noise-midpoint-laplace", "Laplace log-density midpoint concavity")
def _check_noise_laplace(cfg: VerifyConfig) -> ClaimResult:
    return _noise_concavity(cfg, Family.LAPLACE)


@_claim("noise-midpoint-logistic", "logistic log-density midpoint concavity")
def _check_noise_logistic(cfg: VerifyConfig) -> ClaimResult:
    return _noise_concavity(cfg, Family.LOGISTIC)


@_claim("noise-nonlogconcave-control", "sqrt-exponential density is flagged as non-logconcave")
def _check_noise_control(cfg: VerifyConfig) -> ClaimResult:
    # density proportional to exp(-sqrt(|t|)) is not logconcave
    def log_pdf_rows(W: np.ndarray) -> np.ndarray:
        return -np.sum(np.sqrt(np.abs(W)), axis=1)

    rep = midpoint_concavity_report(log_pdf_rows, 1, cfg.concavity_trials, cfg.seed)
    return ClaimResult(
        claim_id="noise-nonlogconcave-control",
        description="midpoint scan detects violations for a non-logconcave density",
        passed=rep.violations > 0,
        expect_violation=True,
        margin=rep.worst_gap,
        details={"violations": rep.violations, "worst_gap": rep.worst_gap},
    )


@_claim("noise-cdf-quadrature", "log-CDFs agree with direct quadrature of the density")
def _check_noise_cdf(cfg: VerifyConfig) -> ClaimResult:
    worst = 0.0
    for family in Family:
        noise = NoiseModel(family, 1)
        for t in np.linspace(-10.0, 10.0, 21):
            pts = [0.0] if t > 0 else None  # Laplace/logistic kink at the origin
            ref, _ = quad(
                lambda s: float(np.exp(noise.log_pdf1(s))),
                -30.0,
                t,
                limit=300,
                epsabs=0.0,
                epsrel=1e-12,
                points=pts,
            )
            val = float(np.exp(noise.log_cdf(t)))
            worst = max(worst, abs(val - ref) / ref)
    return ClaimResult(
        claim_id="noise-cdf-quadrature",
        description="exp(log_cdf) matches tail quadrature to 1e-8 relative error",
        passed=worst <= 1e-8,
        margin=1e-8 - worst,
        details={"worst_rel_err": worst},
    )


# ---------------------------------------------------------------------------
# quantizer checks
# ---------------------------------------------------------------------------

def _test_quantizers(seed: int):
    rng = np.random.default_rng(seed)
    adc = AdcBank((np.array([-1.0, 0.0, 1.0]), np.array([-0.5, 0.5])))
    hexq = HexagonalQuantizer(pitch=0.8)
    return adc, hexq, rng


@_claim("quantizer-roundtrip", "regions contain the points that map to their codes")
def _check_roundtrip(cfg: VerifyConfig) -> ClaimResult:
    adc, hexq, rng = _test_quantizers(cfg.seed)
    bad = 0
    pts = rng.normal(0.0, 2.0, size=(10000, 2))
    for q in (adc, hexq):
        for y in pts:
            if not q.region(q.quantize(y)).contains(y):
                bad += 1
    return ClaimResult(
        claim_id="quantizer-roundtrip",
        description="contains(region(quantize(y)), y) for random points",
        passed=bad == 0,
        details={"points": 2 * len(pts), "failures": bad},
    )


@_claim("quantizer-region-convexity", "random chords of quantization regions stay inside")
def _check_region_convexity(cfg: VerifyConfig) -> ClaimResult:
    adc, hexq, rng = _test_quantizers(cfg.seed)
    bad = 0
    for q, code in ((adc, (2, 1)), (hexq, (0, 0)), (hexq, (2, -1))):
        reg = q.region(code)
        pts = sample_region(reg, 2000, cfg.seed + 1)
        a = pts[rng.integers(0, 2000, 1000)]
        b = pts[rng.integers(0, 2000, 1000)]
        al = rng.uniform(0, 1, 1000)[:, None]
        mid = al * a + (1 - al) * b
        bad += int(np.count_nonzero(~reg.contains_rows(mid)))
    return ClaimResult(
        claim_id="quantizer-region-convexity",
        description="convex combinations of region points remain in the region",
        passed=bad == 0,
        details={"failures": bad},
    )


@_claim("hexagon-nearest-center", "hexagon codes agree with exhaustive nearest-center search")
def _check_hexagon(cfg: VerifyConfig) -> ClaimResult:
    hexq = HexagonalQuantizer(pitch=0.7)
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-3.0, 3.0, size=(10000, 2))
    offs = np.array([(q, r) for q in range(-4, 5) for r in range(-4, 5)])
    centers = hexq.centers(offs.astype(float))
    d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    nearest = offs[np.argmin(d2, axis=1)]
    got = hexq.quantize_rows(pts)
    mism = int(np.count_nonzero(np.any(nearest != got, axis=1)))
    return ClaimResult(
        claim_id="hexagon-nearest-center",
        description="lattice quantization equals brute-force nearest center",
        passed=mism == 0,
        details={"points": len(pts), "mismatches": mism},
    )


@_claim("adc-partition", "ADC regions of distinct codes partition a dense grid")
def _check_partition(cfg: VerifyConfig) -> ClaimResult:
    adc = AdcBank((np.array([-1.0, 0.0, 1.0]), np.array([-0.5, 0.5])))
    g = np.linspace(-2.5, 2.5, 71)
    grid = np.array([(a, b) for a in g for b in g])
    hits = np.zeros(len(grid), dtype=int)
    for code in adc.codes():
        hits += adc.region(code).contains_rows(grid).astype(int)
    return ClaimResult(
        claim_id="adc-partition",
        description="every grid point lies in exactly one code region",
        passed=bool(np.all(hits == 1)),
        details={"grid_points": len(grid), "min_cover": int(hits.min()), "max_cover": int(hits.max())},
    )


# ---------------------------------------------------------------------------
# likelihood concavity checks
# ---------------------------------------------------------------------------

def _random_pd(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.normal(0.0, 1.0, size=(n, n)) / math.sqrt(n)
    return A @ A.T + 0.3 * np.eye(n)


@_claim("continuous-midpoint", "continuous likelihood is jointly midpoint-logconcave in (x, scale)")
def _check_continuous_midpoint(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    worst = -math.inf
    bad = 0
    for _ in range(cfg.midpoint_trials):
        family = list(Family)[int(rng.integers(0, 3))]
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        noise = NoiseModel(family, n)
        S = rng.normal(0.0, 1.0, size=(n, m))
        y = rng.normal(0.0, 1.5, size=n)
        x0, x1 = rng.normal(0.0, 1.5, size=(2, m))
        P0, P1 = _random_pd(rng, n), _random_pd(rng, n)
        lp0 = residual_logpdf(LocationScaleModel(S, x0, ScaleFixed(P0)), noise, y)
        lp1 = residual_logpdf(LocationScaleModel(S, x1, ScaleFixed(P1)), noise, y)
        mid = LocationScaleModel(S, 0.5 * (x0 + x1), ScaleFixed(0.5 * (P0 + P1)))
        lpm = residual_logpdf(mid, noise, y)
        gap = 0.5 * lp0 + 0.5 * lp1 - lpm
        worst = max(worst, gap)
        if gap > 1e-9:
            bad += 1
    return ClaimResult(
        claim_id="continuous-midpoint",
        description="midpoint inequality for the fixed-data parameter likelihood",
        passed=bad == 0,
        margin=-worst,
        details={"trials": cfg.midpoint_trials, "violations": bad, "worst_gap": worst},
    )


def _random_adc_instance(rng: np.random.Generator):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 3))
    family = list(Family)[int(rng.integers(0, 3))]
    noise = NoiseModel(family, n)
    S = rng.normal(0.0, 1.0, size=(n, m))
    cuts = tuple(np.sort(rng.uniform(-2.5, 2.5, size=int(rng.integers(1, 5)))) for _ in range(n))
    cuts = tuple(np.unique(c) for c in cuts)
    adc = AdcBank(cuts)
    return noise, S, adc, n, m


def _draw_code(rng, noise, S, adc, x, scale):
    model = LocationScaleModel(S, x, scale)
    w = noise.sample(1, int(rng.integers(0, 2**32)))[0]
    y = model.scale.solve_rows((w + model.shift())[None, :])[0]
    return adc.quantize(y)


def _quantized_midpoint(cfg: VerifyConfig, mode: str) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed + {"location": 101, "scalar": 202, "diag": 303}[mode])
    worst = -math.inf
    bad = 0
    for _ in range(cfg.midpoint_trials):
        noise, S, adc, n, m = _random_adc_instance(rng)
        x0, x1 = rng.normal(0.0, 1.2, size=(2, m))
        if mode == "location":
            s0 = s1 = ScaleScalar(float(rng.uniform(0.5, 2.0)))
        elif mode == "scalar":
            s0 = ScaleScalar(float(rng.uniform(0.5, 2.0)))
            s1 = ScaleScalar(float(rng.uniform(0.5, 2.0)))
        else:
            s0 = ScaleDiagonal(rng.uniform(0.5, 2.0, size=n))
            s1 = ScaleDiagonal(rng.uniform(0.5, 2.0, size=n))
        z = _draw_code(rng, noise, S, adc, x0, s0)
        l0 = quantized_loglik(LocationScaleModel(S, x0, s0), noise, adc, z).log_value
        l1 = quantized_loglik(LocationScaleModel(S, x1, s1), noise, adc, z).log_value
        if mode == "location":
            smid = s0
        elif mode == "scalar":
            smid = ScaleScalar(0.5 * (s0.value + s1.value))
        else:
            smid = ScaleDiagonal(0.5 * (s0.values + s1.values))
        lm = quantized_loglik(
            LocationScaleModel(S, 0.5 * (x0 + x1), smid), noise, adc, z
        ).log_value
        if math.isinf(l0) or math.isinf(l1):
            continue  # a -inf endpoint makes the inequality vacuous
        gap = 0.5 * l0 + 0.5 * l1 - lm
        worst = max(worst, gap)
        if gap > 1e-9:
            bad += 1
    label = {"location": "location", "scalar": "scalar-scale", "diag": "diag-scale"}[mode]
    return ClaimResult(
        claim_id=f"quantized-midpoint-{label}",
        description=f"quantized likelihood midpoint concavity ({label} regime)",
        passed=bad == 0,
        margin=-worst,
        details={"trials": cfg.midpoint_trials, "violations": bad, "worst_gap": worst},
    )


@_claim("quantized-midpoint-location", "quantized likelihood concavity in the location")
def _check_q_mid_location(cfg: VerifyConfig) -> ClaimResult:
    return _quantized_midpoint(cfg, "location")


@_claim("quantized-midpoint-scalar-scale", "joint concavity in location and scalar scale")
def _check_q_mid_scalar(cfg: VerifyConfig) -> ClaimResult:
    return _quantized_midpoint(cfg, "scalar")


@_claim("quantized-midpoint-diag-scale", "joint concavity in location and diagonal scale")
def _check_q_mid_diag(cfg: VerifyConfig) -> ClaimResult:
    return _quantized_midpoint(cfg, "diag")


@_claim("nonconvex-region-control", "a non-convex one-code region breaks logconcavity in x")
def _check_nonconvex_control(cfg: VerifyConfig) -> ClaimResult:
    # region (-inf, -1] u [1, inf) for 1-D Gaussian: P(x) = F(-1-x) + 1 - F(1-x)
    noise = NoiseModel(Family.GAUSSIAN, 1)

    def logp(x: float) -> float:
        return float(np.logaddexp(noise.log_cdf(-1.0 - x), noise.log_cdf(-(1.0 - x))))

    xs = np.linspace(-2.0, 2.0, 81)
    best_gap = -math.inf
    witness = None
    for x0 in xs:
        for x1 in xs:
            mid = 0.5 * (x0 + x1)
            gap = 0.5 * logp(x0) + 0.5 * logp(x1) - logp(mid)
            if gap > best_gap:
                best_gap = gap
                witness = (float(x0), float(x1))
    return ClaimResult(
        claim_id="nonconvex-region-control",
        description="grid search finds a midpoint violation above 1e-3",
        passed=best_gap > 1e-3,
        expect_violation=True,
        margin=best_gap,
        details={"worst_gap": best_gap, "witness": witness},
    )


# ---------------------------------------------------------------------------
# product-measure inequality over region pairs
# ---------------------------------------------------------------------------

def _random_region_pair(rng: np.random.Generator):
    kind = rng.choice(["box1", "box2", "box3", "hex"])
    if kind == "hex":
        hexq = HexagonalQuantizer(pitch=float(rng.uniform(0.6, 1.6)))
        z0 = (int(rng.integers(-1, 2)), int(rng.integers(-1, 2)))
        z1 = (int(rng.integers(-1, 2)), int(rng.integers(-1, 2)))
        return hexq.region(z0), hexq.region(z1), 2
    n = {"box1": 1, "box2": 2, "box3": 3}[kind]
    lo0 = rng.uniform(-2.0, 1.0, size=n)
    lo1 = rng.uniform(-2.0, 1.0, size=n)
    return (
        Box(lo0, lo0 + rng.uniform(0.5, 2.5, size=n)),
        Box(lo1, lo1 + rng.uniform(0.5, 2.5, size=n)),
        n,
    )


@_claim("minkowski-prob-inequality", "P[combined set] dominates the weighted geometric mean")
def _check_prekopa(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    margins = []
    worst_norm = math.inf
    failures = 0
    inconclusive = 0
    for i in range(cfg.prekopa_pairs):
        A0, A1, n = _random_region_pair(rng)
        family = Family.GAUSSIAN if i % 2 == 0 else Family.LAPLACE
        noise = NoiseModel(family, n)
        alpha = float(rng.uniform(0.05, 0.95))
        rep = prekopa_check(noise, A0, A1, alpha, cfg.prekopa_mc, cfg.seed + 1000 + i)
        if rep.inconclusive:
            inconclusive += 1
            continue
        margins.append(rep.margin)
        worst_norm = min(worst_norm, rep.margin / rep.se_combined if rep.se_combined > 0 else math.inf)
        if not rep.passed:
            failures += 1
    return ClaimResult(
        claim_id="minkowski-prob-inequality",
        description="probability inequality over sampled convex region pairs",
        passed=failures == 0,
        margin=worst_norm,
        details={
            "pairs": cfg.prekopa_pairs,
            "failures": failures,
            "inconclusive": inconclusive,
            "min_margin": min(margins) if margins else None,
            "min_margin_over_se": worst_norm,
            "mc_count": cfg.prekopa_mc,
        },
    )


# ---------------------------------------------------------------------------
# noise-region geometry
# ---------------------------------------------------------------------------

@_claim("noise-region-identity", "zero location and unit scale reproduce the code region")
def _check_region_identity(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    adc = AdcBank((np.array([-1.0, 0.5]), np.array([0.0, 2.0])))
    noise = NoiseModel(Family.GAUSSIAN, 2)
    model = LocationScaleModel(np.eye(2), np.zeros(2), ScaleScalar(1.0))
    pts = rng.normal(0.0, 2.0, size=(2000, 2))
    bad = 0
    for z in [(0, 0), (1, 1), (2, 2), (1, 2)]:
        reg = adc.region(z)
        for w in pts[:500]:
            if noise_region_membership(w, z, model, adc) != reg.contains(w):
                bad += 1
    return ClaimResult(
        claim_id="noise-region-identity",
        description="membership coincides pointwise with quantizer membership",
        passed=bad == 0,
        details={"failures": bad},
    )


@_claim("noise-region-chords", "noise-consistency regions are convex for convex quantizers")
def _check_region_chords(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    adc = AdcBank((np.array([-1.0, 0.5]), np.array([0.0, 2.0])))
    model = LocationScaleModel(
        rng.normal(size=(2, 2)), rng.normal(size=2), ScaleDiagonal(np.array([0.7, 1.8]))
    )
    bad = 0
    for z in [(1, 1), (0, 2), (2, 0)]:
        wbox = noise_region_box(model, adc, z)
        pts = sample_region(wbox, 1000, cfg.seed + 7)
        a = pts[rng.integers(0, 1000, 1000)]
        b = pts[rng.integers(0, 1000, 1000)]
        al = rng.uniform(0, 1, 1000)[:, None]
        bad += int(np.count_nonzero(~wbox.contains_rows(al * a + (1 - al) * b)))
    return ClaimResult(
        claim_id="noise-region-chords",
        description="random chords of noise regions stay inside",
        passed=bad == 0,
        details={"failures": bad},
    )


@_claim("minkowski-region-equivalence", "parameter interpolation matches the Minkowski combination")
def _check_region_equivalence(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    adc = AdcBank((np.array([-1.0, 0.5]), np.array([0.0, 2.0])))
    S = rng.normal(size=(2, 2))
    x0, x1 = rng.normal(size=(2, 2))
    s0 = ScaleDiagonal(rng.uniform(0.5, 2.0, size=2))
    s1 = ScaleDiagonal(rng.uniform(0.5, 2.0, size=2))
    alpha = 0.4
    z = (1, 1)
    x_a = alpha * x1 + (1 - alpha) * x0
    s_a = ScaleDiagonal(alpha * s1.values + (1 - alpha) * s0.values)
    box0 = noise_region_box(LocationScaleModel(S, x0, s0), adc, z)
    box1 = noise_region_box(LocationScaleModel(S, x1, s1), adc, z)
    box_a = noise_region_box(LocationScaleModel(S, x_a, s_a), adc, z)

    # sampled Minkowski points land in the interpolated-parameter region
    set0 = SampledSet(sample_region(box0, 1000, cfg.seed + 11), "A0")
    set1 = SampledSet(sample_region(box1, 1000, cfg.seed + 12), "A1")
    mixed = minkowski_combine(set0, set1, alpha, 1000, cfg.seed + 13)
    fail_fwd = int(np.count_nonzero(~box_a.contains_rows(mixed.points)))

    # interpolated-region points decompose into endpoint noise vectors
    fail_bwd = 0
    d_a = s_a.values
    for w in sample_region(box_a, 1000, cfg.seed + 14):
        y = (w + S @ x_a) / d_a
        w0, w1 = decompose_combination_point(w, y, S, x0, x1, s0, s1, alpha)
        if not (box0.contains(w0) and box1.contains(w1)):
            fail_bwd += 1
        if np.max(np.abs(alpha * w1 + (1 - alpha) * w0 - w)) > 1e-9:
            fail_bwd += 1
    return ClaimResult(
        claim_id="minkowski-region-equivalence",
        description="both inclusions hold on sampled points (tolerance 1e-9)",
        passed=fail_fwd == 0 and fail_bwd == 0,
        details={"forward_failures": fail_fwd, "backward_failures": fail_bwd},
    )


@_claim("recombination-cases", "scale-weighted recombination stays in the code region")
def _check_recombination(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 4))
        y0 = rng.normal(0, 2, size=n)
        y1 = rng.normal(0, 2, size=n)
        alpha = float(rng.uniform(0, 1))
        p0 = float(rng.uniform(0.3, 3.0))
        p1 = float(rng.uniform(0.3, 3.0))
        rb = recombine_region_points(y0, y1, ScaleScalar(p0), ScaleScalar(p1), alpha, "b")
        t = alpha * p1 / (alpha * p1 + (1 - alpha) * p0)
        if np.max(np.abs(rb.y - (t * y1 + (1 - t) * y0))) > 1e-9:
            bad += 1
        d0 = ScaleDiagonal(rng.uniform(0.3, 3.0, size=n))
        d1 = ScaleDiagonal(rng.uniform(0.3, 3.0, size=n))
        rc = recombine_region_points(y0, y1, d0, d1, alpha, "c")
        lo = np.minimum(y0, y1) - 1e-12
        hi = np.maximum(y0, y1) + 1e-12
        if np.any(rc.y < lo) or np.any(rc.y > hi):
            bad += 1
    return ClaimResult(
        claim_id="recombination-cases",
        description="scalar case reweights convexly; diagonal case stays in the coordinate box",
        passed=bad == 0,
        details={"failures": bad},
    )


# ---------------------------------------------------------------------------
# matrix-combination hulls
# ---------------------------------------------------------------------------

@_claim("diag-hull-box", "diagonal [0,1] combinations sweep exactly the coordinate box")
def _check_diag_hull(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    worst_excess = -math.inf
    worst_recon = 0.0
    ok = True
    for dim in range(1, 6):
        y0 = rng.normal(0.0, 2.0, size=dim)
        y1 = rng.normal(0.0, 2.0, size=dim)
        spec = MatrixCombinationSpec(MatrixFamily.DIAGONAL_UNIT, y0, y1)
        rep = diag_box_hull_check(spec, cfg.hull_samples, cfg.seed + dim)
        worst_excess = max(worst_excess, rep.max_containment_excess)
        worst_recon = max(worst_recon, rep.max_reconstruction_error)
        ok = ok and rep.weight_range_ok
    passed = ok and worst_excess <= 1e-9 and worst_recon <= 1e-9
    return ClaimResult(
        claim_id="diag-hull-box",
        description="containment and reconstruction in dimensions 1-5 at 1e-9",
        passed=passed,
        margin=1e-9 - max(worst_excess, worst_recon),
        details={"max_containment_excess": worst_excess, "max_reconstruction_error": worst_recon},
    )


@_claim("psd-hull-ball", "bounded-spectrum PSD combinations sweep exactly the midpoint ball")
def _check_psd_hull(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    worst_excess = -math.inf
    worst_recon = 0.0
    tr_lo, tr_hi = math.inf, -math.inf
    for dim in range(2, 6):
        y0 = rng.normal(0.0, 2.0, size=dim)
        y1 = rng.normal(0.0, 2.0, size=dim)
        spec = MatrixCombinationSpec(MatrixFamily.PSD_BOUNDED, y0, y1)
        rep = psd_ball_hull_check(spec, cfg.hull_samples, cfg.seed + dim)
        worst_excess = max(worst_excess, rep.max_radius_excess)
        worst_recon = max(worst_recon, rep.max_reconstruction_error)
        tr_lo, tr_hi = min(tr_lo, rep.trace_min), max(tr_hi, rep.trace_max)
    ref = MatrixCombinationSpec(
        MatrixFamily.PSD_BOUNDED, np.array([-1.0, 0.5]), np.array([1.0, -0.5])
    )
    ref_rep = psd_ball_hull_check(ref, 100, cfg.seed)
    radius_ok = abs(ref_rep.radius - 1.1180) <= 1e-4
    passed = (
        worst_excess <= 1e-9
        and worst_recon <= 1e-9
        and tr_lo >= -1e-12
        and tr_hi <= 1.0 + 1e-12
        and radius_ok
    )
    return ClaimResult(
        claim_id="psd-hull-ball",
        description="containment, trace range, reconstruction, and reference radius",
        passed=passed,
        margin=1e-9 - max(worst_excess, worst_recon),
        details={
            "max_radius_excess": worst_excess,
            "max_reconstruction_error": worst_recon,
            "trace_range": [tr_lo, tr_hi],
            "reference_radius": ref_rep.radius,
        },
    )


@_claim("ball-outside-box-control", "the combination ball can protrude from a box region")
def _check_ball_outside_box(cfg: VerifyConfig) -> ClaimResult:
    box = Box(np.zeros(2), np.ones(2))
    witness = ball_outside_box_witness(box, trials=200, seed=cfg.seed)
    found = witness is not None
    details = {}
    if found:
        details = {
            "y0": [float(v) for v in witness["y0"]],
            "y1": [float(v) for v in witness["y1"]],
            "point": [float(v) for v in witness["point"]],
            "excess": witness["excess"],
        }
    return ClaimResult(
        claim_id="ball-outside-box-control",
        description="witness endpoints inside the box whose ball exits it",
        passed=found,
        expect_violation=True,
        margin=details.get("excess"),
        details=details,
    )


# ---------------------------------------------------------------------------
# evaluator cross-checks
# ---------------------------------------------------------------------------

@_claim("exact-vs-mc", "exact box path agrees with Monte Carlo within 4 standard errors")
def _check_exact_vs_mc(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    ok = 0
    total = 0
    worst = 0.0
    while total < cfg.mc_compare_configs:
        noise, S, adc, n, m = _random_adc_instance(rng)
        x = rng.normal(0.0, 1.0, size=m)
        scale = ScaleScalar(float(rng.uniform(0.5, 2.0)))
        model = LocationScaleModel(S, x, scale)
        z = _draw_code(rng, noise, S, adc, x, scale)
        exact = quantized_loglik(model, noise, adc, z)
        if exact.log_value < math.log(5e-3):
            continue
        total += 1
        mcv = quantized_loglik(
            model, noise, adc, z, mc=MonteCarlo(cfg.mc_compare_count, cfg.seed + total)
        )
        delta = abs(exact.log_value - mcv.log_value)
        if mcv.std_error > 0:
            worst = max(worst, delta / mcv.std_error)
        if delta <= 4.0 * mcv.std_error:
            ok += 1
    return ClaimResult(
        claim_id="exact-vs-mc",
        description="per-configuration |exact - MC| within 4 MC standard errors",
        passed=ok >= math.ceil(0.99 * total),
        details={"configs": total, "within_4se": ok, "worst_delta_over_se": worst},
    )


@_claim("adc-normalization", "code probabilities of an ADC bank sum to one")
def _check_normalization(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(40):
        n = int(rng.integers(1, 3))
        noise = NoiseModel(list(Family)[int(rng.integers(0, 3))], n)
        cuts = tuple(np.sort(rng.uniform(-3.0, 3.0, size=int(rng.integers(1, 6)))) for _ in range(n))
        adc = AdcBank(tuple(np.unique(c) for c in cuts))
        m = int(rng.integers(1, 3))
        model = LocationScaleModel(
            rng.normal(size=(n, m)),
            rng.normal(0.0, 1.0, size=m),
            ScaleScalar(float(rng.uniform(0.5, 2.0))),
        )
        tot = 0.0
        for z in adc.codes():
            tot += math.exp(quantized_loglik(model, noise, adc, z).log_value)
        worst = max(worst, abs(tot - 1.0))
    return ClaimResult(
        claim_id="adc-normalization",
        description="sum over all codes equals 1 within 1e-9",
        passed=worst <= 1e-9,
        margin=1e-9 - worst,
        details={"worst_abs_error": worst},
    )


@_claim("gradient-finite-difference", "analytic gradients match central finite differences")
def _check_gradient(cfg: VerifyConfig) -> ClaimResult:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    pts = 0
    while pts < cfg.gradient_points:
        noise, S, adc, n, m = _random_adc_instance(rng)
        x = rng.normal(0.0, 1.0, size=m)
        if rng.uniform() < 0.5:
            scale = ScaleScalar(float(rng.uniform(0.5, 2.0)))
        else:
            scale = ScaleDiagonal(rng.uniform(0.5, 2.0, size=n))
        model = LocationScaleModel(S, x, scale)
        z = _draw_code(rng, noise, S, adc, x, scale)
        base = quantized_loglik(model, noise, adc, z).log_value
        if base < math.log(1e-4):
            continue
        pts += 1
        g = grad_quantized_loglik(model, noise, adc, z)
        rel = _gradient_rel_error(model, noise, adc, z, g)
        worst = max(worst, rel)
    return ClaimResult(
        claim_id="gradient-finite-difference",
        description="relative error at most 1e-5 against step-1e-5 central differences",
        passed=worst <= 1e-5,
        margin=1e-5 - worst,
        details={"points": pts, "worst_rel_err": worst},
    )


def _gradient_rel_error(model, noise, adc, z, g) -> float:
    h = 1e-5
    worst = 0.0

    def ll(mod):
        return quantized_loglik(mod, noise, adc, z).log_value

    for k in range(model.m):
        e = np.zeros(model.m)
        e[k] = h
        fd = (ll(model.with_params(x=model.x + e)) - ll(model.with_params(x=model.x - e))) / (2 * h)
        worst = max(worst, abs(g.d_x[k] - fd) / max(1.0, abs(fd)))
    if isinstance(model.scale, ScaleScalar):
        up = model.with_params(scale=ScaleScalar(model.scale.value + h))
        dn = model.with_params(scale=ScaleScalar(model.scale.value - h))
        fd = (ll(up) - ll(dn)) / (2 * h)
        worst = max(worst, abs(g.d_scale[0] - fd) / max(1.0, abs(fd)))
    elif isinstance(model.scale, ScaleDiagonal):
        for k in range(model.n):
            e = np.zeros(model.n)
            e[k] = h
            up = model.with_params(scale=ScaleDiagonal(model.scale.values + e))
            dn = model.with_params(scale=ScaleDiagonal(model.scale.values - e))
            fd = (ll(up) - ll(dn)) / (2 * h)
            worst = max(worst, abs(g.d_scale[k] - fd) / max(1.0, abs(fd)))
    return worst
