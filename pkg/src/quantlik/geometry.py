"""Set geometry behind quantized likelihoods, with sampling oracles.

Covers noise-consistency regions and their affine box transforms,
weighted Minkowski combinations of convex regions, a Monte-Carlo check
of the logconcave product-measure inequality over such combinations, the
constructive decomposition/recombination identities that tie parameter
interpolation to Minkowski interpolation, and the two matrix-combination
hulls: diagonal [0,1] matrices sweep a coordinate box, bounded-spectrum
PSD matrices sweep a Euclidean ball.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .likelihood import LocationScaleModel, Scale, ScaleDiagonal, ScaleScalar, scale_diagonal_or_raise
from .noise import NoiseModel
from .quantizer import Box, Code, Halfspace, Polytope, Quantizer, Region, bounding_box


# ---------------------------------------------------------------------------
# sampled sets and matrix-combination specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledSet:
    """A finite point sample standing in for a set, with a display label."""

    points: np.ndarray
    label: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (N, n) array")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


class MatrixFamily(str, Enum):
    DIAGONAL_UNIT = "diagonal-unit"  # diagonal matrices with entries in [0, 1]
    PSD_BOUNDED = "psd-bounded"  # symmetric PSD with spectral radius <= 1


@dataclass(frozen=True)
class MatrixCombinationSpec:
    family: MatrixFamily
    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float)
        y1 = np.asarray(self.y1, dtype=float)
        if y0.shape != y1.shape or y0.ndim != 1:
            raise ValueError("y0 and y1 must be 1-D vectors of equal length")
        object.__setattr__(self, "family", MatrixFamily(self.family))
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "y1", y1)

    @property
    def dim(self) -> int:
        return self.y0.shape[0]


# ---------------------------------------------------------------------------
# noise-consistency regions
# ---------------------------------------------------------------------------

def noise_region_membership(w, z: Code, model: LocationScaleModel, q: Quantizer) -> bool:
    """Is noise vector w consistent with observing code z at the model's parameters?

    Equivalent to membership of scale^{-1}(w + S x) in the code's region.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (model.n,):
        raise ValueError(f"expected vector of length {model.n}")
    y = model.scale.solve_rows((w + model.shift())[None, :])[0]
    return q.region(z).contains(y)


def noise_region_box(model: LocationScaleModel, q: Quantizer, z: Code) -> Box:
    """The noise-consistency region as an explicit box (diagonal-like scale only)."""
    reg = q.region(z)
    if not isinstance(reg, Box):
        raise ValueError("noise_region_box needs a box region")
    d = scale_diagonal_or_raise(model.scale, model.n)
    sx = model.shift()
    with np.errstate(invalid="ignore"):
        return Box(d * reg.lower - sx, d * reg.upper - sx)


# ---------------------------------------------------------------------------
# Minkowski combinations
# ---------------------------------------------------------------------------

def minkowski_combine(
    A0: SampledSet, A1: SampledSet, alpha: float, pairs: int, seed: int
) -> SampledSet:
    """Sample the weighted Minkowski combination alpha*A1 + (1-alpha)*A0."""
    if A0.dim != A1.dim:
        raise ValueError("sets disagree on dimension")
    rng = np.random.default_rng(seed)
    i0 = rng.integers(0, A0.points.shape[0], size=pairs)
    i1 = rng.integers(0, A1.points.shape[0], size=pairs)
    pts = alpha * A1.points[i1] + (1.0 - alpha) * A0.points[i0]
    return SampledSet(pts, f"{alpha:g}*{A1.label} + {1 - alpha:g}*{A0.label}")


def minkowski_box(box0: Box, box1: Box, alpha: float) -> Box:
    """Exact weighted Minkowski combination of two boxes (interval arithmetic)."""
    with np.errstate(invalid="ignore"):
        lo = alpha * box1.lower + (1.0 - alpha) * box0.lower
        hi = alpha * box1.upper + (1.0 - alpha) * box0.upper
    # 0 * inf from an endpoint weight keeps the other set's bound
    if alpha == 0.0:
        lo, hi = box0.lower.copy(), box0.upper.copy()
    elif alpha == 1.0:
        lo, hi = box1.lower.copy(), box1.upper.copy()
    else:
        lo = np.where(np.isnan(lo), -np.inf, lo)
        hi = np.where(np.isnan(hi), np.inf, hi)
    return Box(lo, hi)


def _support_value(poly: Polytope, direction: np.ndarray) -> float:
    from scipy.optimize import linprog

    res = linprog(
        -direction,
        A_ub=poly.normals,
        b_ub=poly.offsets,
        bounds=[(None, None)] * poly.dim,
        method="highs",
    )
    if res.status == 3:
        return math.inf
    if not res.success:
        raise RuntimeError("support-function LP failed")
    return float(-res.fun)


def _matched_normals(p0: Polytope, p1: Polytope, tol: float = 1e-9) -> Optional[np.ndarray]:
    """Shared unit-normal set of two polytopes, or None when the fans differ."""
    def unit_sorted(p: Polytope) -> np.ndarray:
        N = p.normals / np.linalg.norm(p.normals, axis=1, keepdims=True)
        order = np.lexsort(N.T[::-1])
        return N[order]

    n0, n1 = unit_sorted(p0), unit_sorted(p1)
    if n0.shape != n1.shape or not np.allclose(n0, n1, atol=tol):
        return None
    return n0


def minkowski_polytope(p0: Polytope, p1: Polytope, alpha: float) -> Polytope:
    """Exact combination for polytopes sharing a normal fan (e.g. two hexagons
    of one tiling): support offsets combine linearly facet by facet."""
    normals = _matched_normals(p0, p1)
    if normals is None:
        raise ValueError("polytopes do not share a normal fan; use decomposition search")
    hs = []
    for nvec in normals:
        h0 = _support_value(p0, nvec)
        h1 = _support_value(p1, nvec)
        hs.append(Halfspace(nvec, alpha * h1 + (1.0 - alpha) * h0))
    interior = alpha * p1.interior_point + (1.0 - alpha) * p0.interior_point
    return Polytope(tuple(hs), interior_point=interior)


def _project_box(box: Box, P: np.ndarray) -> np.ndarray:
    hi = np.where(np.isfinite(box.upper), box.upper, np.inf)
    return np.clip(P, box.lower, hi)


def _project_polytope(poly: Polytope, p: np.ndarray, cycles: int = 200) -> np.ndarray:
    """Dykstra's alternating projections onto the halfspace intersection."""
    normals = poly.normals
    offsets = poly.offsets
    norms2 = np.sum(normals**2, axis=1)
    y = p.astype(float).copy()
    corrections = np.zeros((normals.shape[0], p.shape[0]))
    for _ in range(cycles):
        max_move = 0.0
        for k in range(normals.shape[0]):
            z = y + corrections[k]
            viol = normals[k] @ z - offsets[k]
            if viol > 0.0:
                y_new = z - (viol / norms2[k]) * normals[k]
            else:
                y_new = z
            corrections[k] = z - y_new
            max_move = max(max_move, float(np.max(np.abs(y_new - y))))
            y = y_new
        if max_move < 1e-12:
            break
    return y


def _project_region(region: Region, p: np.ndarray) -> np.ndarray:
    if isinstance(region, Box):
        return _project_box(region, p)
    return _project_polytope(region, p)


def minkowski_membership(
    A0: Region, A1: Region, alpha: float, w, tol: float = 1e-6, max_iters: int = 500
) -> bool:
    """Decide w in alpha*A1 + (1-alpha)*A0 by decomposition search.

    Alternates exact block minimization of ||alpha w1 + (1-alpha) w0 - w||
    over w0 in A0 and w1 in A1 (each step is a projection); the objective
    is jointly convex, so the residual converges to the true distance.
    Membership is declared when the residual falls below ``tol``.
    """
    w = np.asarray(w, dtype=float)
    if alpha <= 0.0:
        return A0.contains(w)
    if alpha >= 1.0:
        return A1.contains(w)
    if isinstance(A0, Box) and isinstance(A1, Box):
        return minkowski_box(A0, A1, alpha).contains(w)
    w0 = _project_region(A0, w.copy())
    w1 = _project_region(A1, w.copy())
    prev = math.inf
    for _ in range(max_iters):
        w0 = _project_region(A0, (w - alpha * w1) / (1.0 - alpha))
        w1 = _project_region(A1, (w - (1.0 - alpha) * w0) / alpha)
        resid = float(np.linalg.norm(alpha * w1 + (1.0 - alpha) * w0 - w))
        if resid <= tol:
            return True
        if prev - resid < tol * 1e-3:
            return False
        prev = resid
    return False


def _minkowski_contains_rows(A0: Region, A1: Region, alpha: float, W: np.ndarray) -> np.ndarray:
    """Vectorized membership in the combined set; falls back to pointwise
    decomposition search when no exact construction applies."""
    if isinstance(A0, Box) and isinstance(A1, Box):
        combined = minkowski_box(A0, A1, alpha)
        # the combination of half-open boxes is closed on sampled data;
        # boundary rows have probability zero either way
        return combined.contains_rows(W)
    if isinstance(A0, Polytope) and isinstance(A1, Polytope):
        if _matched_normals(A0, A1) is not None:
            return minkowski_polytope(A0, A1, alpha).contains_rows(W)
    return np.array([minkowski_membership(A0, A1, alpha, w) for w in W], dtype=bool)


# ---------------------------------------------------------------------------
# product-measure midpoint inequality over Minkowski combinations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrekopaReport:
    """Monte-Carlo comparison of log P[A_alpha] against the weighted mean of
    log P[A_1], log P[A_0]; ``passed`` allows 4 combined standard errors."""

    lhs: float
    rhs: float
    margin: float
    se_combined: float
    passed: bool
    inconclusive: bool
    p_alpha: float
    p0: float
    p1: float
    mc_count: int


def _log_se(p_hat: float, count: int) -> float:
    p = min(max(p_hat, 0.5 / count), 1.0 - 0.5 / count)
    return math.sqrt(p * (1.0 - p) / count) / p


def prekopa_check(
    noise: NoiseModel,
    A0: Region,
    A1: Region,
    alpha: float,
    mc_count: int,
    seed: int,
) -> PrekopaReport:
    """Estimate all three probabilities with a common sample of noise draws."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if mc_count < 100:
        raise ValueError("mc_count must be at least 100")
    W = noise.sample(mc_count, seed)
    p0 = float(np.mean(A0.contains_rows(W)))
    p1 = float(np.mean(A1.contains_rows(W)))
    pa = float(np.mean(_minkowski_contains_rows(A0, A1, alpha, W)))
    if min(p0, p1, pa) == 0.0:
        return PrekopaReport(
            lhs=-math.inf if pa == 0 else math.log(pa),
            rhs=math.nan,
            margin=math.nan,
            se_combined=math.nan,
            passed=False,
            inconclusive=True,
            p_alpha=pa,
            p0=p0,
            p1=p1,
            mc_count=mc_count,
        )
    lhs = math.log(pa)
    rhs = alpha * math.log(p1) + (1.0 - alpha) * math.log(p0)
    se = math.sqrt(
        _log_se(pa, mc_count) ** 2
        + (alpha * _log_se(p1, mc_count)) ** 2
        + ((1.0 - alpha) * _log_se(p0, mc_count)) ** 2
    )
    margin = lhs - rhs
    return PrekopaReport(
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        se_combined=se,
        passed=margin >= -4.0 * se,
        inconclusive=False,
        p_alpha=pa,
        p0=p0,
        p1=p1,
        mc_count=mc_count,
    )


# ---------------------------------------------------------------------------
# decomposition / recombination identities
# ---------------------------------------------------------------------------

def decompose_combination_point(
    w,
    y,
    S: np.ndarray,
    x0,
    x1,
    scale0: Scale,
    scale1: Scale,
    alpha: float,
    tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Split w = scale_alpha y - S x_alpha into its endpoint noise vectors.

    Returns (w0, w1) with w_i = scale_i y - S x_i, so that
    alpha*w1 + (1-alpha)*w0 reconstructs w. Raises if the stated identity
    does not hold for the given w within ``tol``.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    n = S.shape[0]
    M_alpha = alpha * scale1.matrix(n) + (1.0 - alpha) * scale0.matrix(n)
    x_alpha = alpha * x1 + (1.0 - alpha) * x0
    w_check = M_alpha @ y - S @ x_alpha
    err = float(np.max(np.abs(w_check - w)))
    if err > tol:
        raise ValueError(f"w does not equal scale_alpha y - S x_alpha (max error {err:.3e})")
    w0 = scale0.matrix(n) @ y - S @ x0
    w1 = scale1.matrix(n) @ y - S @ x1
    return w0, w1


class CombinationCase(str, Enum):
    EQUAL_SCALE = "a"
    SCALAR_SCALE = "b"
    DIAGONAL_SCALE = "c"


@dataclass(frozen=True)
class Recombination:
    y: np.ndarray
    c0: np.ndarray
    c1: np.ndarray


def recombine_region_points(
    y0,
    y1,
    scale0: Scale,
    scale1: Scale,
    alpha: float,
    case: CombinationCase | str,
) -> Recombination:
    """Combine two region points with the scale-weighted matrices whose sum
    is the identity: C_i = (a0 S0 + a1 S1)^{-1} a_i S_i, y = C0 y0 + C1 y1.

    Case "a" (equal scales) gives plain convex weights; case "b" (scalar
    scales) gives reweighted convex weights; case "c" (diagonal scales)
    gives diagonal matrices with entries in [0, 1], so y lands in the
    coordinate box spanned by y0 and y1.
    """
    case = CombinationCase(case)
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    n = y0.shape[0]
    _validate_case(case, scale0, scale1, n)
    a0 = 1.0 - alpha
    a1 = alpha
    M = a0 * scale0.matrix(n) + a1 * scale1.matrix(n)
    c0 = np.linalg.solve(M, a0 * scale0.matrix(n))
    c1 = np.linalg.solve(M, a1 * scale1.matrix(n))
    if np.max(np.abs(c0 + c1 - np.eye(n))) > 1e-12:
        raise AssertionError("combination matrices do not sum to the identity")
    y = c0 @ y0 + c1 @ y1
    return Recombination(y=y, c0=c0, c1=c1)


def _validate_case(case: CombinationCase, scale0: Scale, scale1: Scale, n: int) -> None:
    if case is CombinationCase.EQUAL_SCALE:
        if not np.allclose(scale0.matrix(n), scale1.matrix(n), atol=1e-12, rtol=0.0):
            raise ValueError("case a requires equal scale parameters")
    elif case is CombinationCase.SCALAR_SCALE:
        if not (isinstance(scale0, ScaleScalar) and isinstance(scale1, ScaleScalar)):
            raise ValueError("case b requires scalar scale parameters")
    else:
        ok0 = isinstance(scale0, (ScaleScalar, ScaleDiagonal))
        ok1 = isinstance(scale1, (ScaleScalar, ScaleDiagonal))
        if not (ok0 and ok1):
            raise ValueError("case c requires diagonal scale parameters")


# ---------------------------------------------------------------------------
# matrix-combination hulls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagHullReport:
    samples: int
    max_containment_excess: float
    max_reconstruction_error: float
    weight_range_ok: bool


def diag_box_hull_check(spec: MatrixCombinationSpec, samples: int, seed: int) -> DiagHullReport:
    """Both hull inclusions for diagonal [0,1]-matrix combinations.

    Containment: random diagonal combinations stay in the coordinate box
    spanned by the endpoints. Reconstruction: random box points (plus all
    corners) are reproduced exactly by the per-coordinate weight
    (y[j]-y1[j])/(y0[j]-y1[j]), taken as 0 on degenerate coordinates.
    """
    if spec.family is not MatrixFamily.DIAGONAL_UNIT:
        raise ValueError("diag_box_hull_check needs the diagonal-unit family")
    rng = np.random.default_rng(seed)
    y0, y1 = spec.y0, spec.y1
    lo = np.minimum(y0, y1)
    hi = np.maximum(y0, y1)

    C = rng.uniform(0.0, 1.0, size=(samples, spec.dim))
    pts = C * y0 + (1.0 - C) * y1
    excess = float(np.max(np.maximum(lo - pts, pts - hi), initial=-math.inf))

    targets = rng.uniform(lo, hi, size=(samples, spec.dim))
    corners = _box_corners(lo, hi)
    targets = np.vstack([targets, corners])
    denom = y0 - y1
    with np.errstate(divide="ignore", invalid="ignore"):
        Cw = np.where(denom != 0.0, (targets - y1) / denom, 0.0)
    weight_ok = bool(np.all(Cw >= -1e-12) and np.all(Cw <= 1.0 + 1e-12))
    recon = Cw * y0 + (1.0 - Cw) * y1
    recon_err = float(np.max(np.abs(recon - targets), initial=0.0))
    return DiagHullReport(
        samples=samples,
        max_containment_excess=excess,
        max_reconstruction_error=recon_err,
        weight_range_ok=weight_ok,
    )


def _box_corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    dim = lo.shape[0]
    ids = np.arange(2**dim)
    bits = (ids[:, None] >> np.arange(dim)) & 1
    return np.where(bits == 1, hi, lo)


def sample_psd_bounded(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random symmetric PSD matrices with spectral radius <= 1.

    Recipe: Haar-random orthogonal basis (QR of a Gaussian matrix with the
    sign convention fixed) conjugating eigenvalues drawn uniformly from [0, 1].
    """
    G = rng.standard_normal((count, dim, dim))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.einsum("...ii->...i", R))
    signs[signs == 0] = 1.0
    Q = Q * signs[:, None, :]
    lam = rng.uniform(0.0, 1.0, size=(count, dim))
    return np.einsum("nij,nj,nkj->nik", Q, lam, Q)


def sample_ball(center: np.ndarray, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of the closed Euclidean ball."""
    dim = center.shape[0]
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.0, 1.0, size=count) ** (1.0 / dim)
    return center + radii[:, None] * dirs


@dataclass(frozen=True)
class BallHullReport:
    samples: int
    radius: float
    max_radius_excess: float
    trace_min: float
    trace_max: float
    max_reconstruction_error: float
    skipped: int


def psd_ball_hull_check(spec: MatrixCombinationSpec, samples: int, seed: int) -> BallHullReport:
    """Both hull inclusions for bounded-spectrum PSD combinations.

    Containment: random PSD combinations stay in the closed ball centered
    at the endpoint midpoint with radius half the endpoint distance.
    Reconstruction: for random ball points the rank-one matrix
    outer(yt, yt) / (yt . yt0), yt = y - y1, yt0 = y0 - y1, has its single
    nonzero eigenvalue tr(C) in [0, 1] and maps the endpoints back to y.
    Points on the degenerate ray yt . yt0 = 0 with yt != 0 are skipped and
    counted.
    """
    if spec.family is not MatrixFamily.PSD_BOUNDED:
        raise ValueError("psd_ball_hull_check needs the psd-bounded family")
    rng = np.random.default_rng(seed)
    y0, y1 = spec.y0, spec.y1
    center = 0.5 * (y0 + y1)
    radius = 0.5 * float(np.linalg.norm(y1 - y0))

    C = sample_psd_bounded(spec.dim, samples, rng)
    pts = C @ y0 + (np.eye(spec.dim) - C) @ y1
    dist = np.linalg.norm(pts - center, axis=1)
    max_excess = float(np.max(dist - radius, initial=-math.inf))

    targets = sample_ball(center, radius, samples, rng)
    yt = targets - y1
    yt0 = y0 - y1
    dots = yt @ yt0
    norms2 = np.sum(yt * yt, axis=1)
    degenerate = (np.abs(dots) <= 1e-12) & (norms2 > 1e-24)
    zero = norms2 <= 1e-24
    usable = ~degenerate & ~zero
    # materialize C = outer(yt, yt) / (yt . yt0) and apply it numerically
    Cs = yt[usable][:, :, None] * yt[usable][:, None, :] / dots[usable][:, None, None]
    traces = np.einsum("kii->k", Cs)
    recon = np.einsum("kij,j->ki", Cs, yt0) + y1
    recon_err = np.abs(recon - targets[usable]).max(initial=0.0)
    # yt = 0 means the target is y1 itself; C = 0 reconstructs it
    recon_err = max(float(recon_err), float(np.abs(y1 - targets[zero]).max(initial=0.0)))
    return BallHullReport(
        samples=samples,
        radius=radius,
        max_radius_excess=max_excess,
        trace_min=float(np.min(traces, initial=math.inf)),
        trace_max=float(np.max(traces, initial=-math.inf)),
        max_reconstruction_error=recon_err,
        skipped=int(np.count_nonzero(degenerate)),
    )


def ball_outside_box_witness(
    box: Box, trials: int, seed: int
) -> Optional[dict]:
    """Search for endpoints inside a box whose matrix-combination ball
    protrudes outside it; this is why general scale matrices defeat the
    box-based recombination argument. Returns a witness or None."""
    if not box.is_bounded():
        raise ValueError("witness search needs a bounded box")
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        y0 = rng.uniform(box.lower, box.upper)
        y1 = rng.uniform(box.lower, box.upper)
        center = 0.5 * (y0 + y1)
        radius = 0.5 * float(np.linalg.norm(y1 - y0))
        for j in range(box.dim):
            for sign in (-1.0, 1.0):
                pt = center.copy()
                pt[j] += sign * radius
                if not box.contains(pt):
                    excess = max(box.lower[j] - pt[j], pt[j] - box.upper[j])
                    return {
                        "y0": y0,
                        "y1": y1,
                        "point": pt,
                        "excess": float(excess),
                    }
    return None


# ---------------------------------------------------------------------------
# point-cloud output
# ---------------------------------------------------------------------------

def write_point_cloud(path: str, sets: Sequence[SampledSet]) -> None:
    """Write labeled point sets as CSV: header dim0,...,dimK,label."""
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one sampled set")
    dim = sets[0].dim
    if any(s.dim != dim for s in sets):
        raise ValueError("sampled sets disagree on dimension")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow([f"dim{j}" for j in range(dim)] + ["label"])
            for s in sets:
                for row in s.points:
                    writer.writerow([repr(float(v)) for v in row] + [s.label])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
