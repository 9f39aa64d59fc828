"""Quantizers with explicit convex inverse-image regions.

Three kinds ship: per-dimension ADC banks (box regions), a regular
hexagonal tiling of the plane (hexagon polytopes), and generic lists of
polytopes with an implicit "outside" code so the map stays total.

Boundary convention: ADC boxes are half-open [a, b) per coordinate;
hexagon/polytope boundary ties are broken toward the lowest code in the
natural tuple order. Boundaries carry no probability under continuous
noise, so likelihood values are unaffected; the convention only pins
down determinism.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np
from scipy.optimize import linprog

Code = tuple[int, ...]

_LP_BOUND = 1e9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with possibly infinite ends, half-open [lower, upper)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("box requires lower[j] < upper[j] for all j")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower) and np.all((y < self.upper) | np.isinf(self.upper)))

    def contains_rows(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        ok_lo = Y >= self.lower
        ok_hi = (Y < self.upper) | np.isinf(self.upper)
        return np.all(ok_lo & ok_hi, axis=1)

    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))


@dataclass(frozen=True)
class Halfspace:
    """Closed halfspace {y : normal . y <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        if normal.ndim != 1 or not np.any(normal != 0.0):
            raise ValueError("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class Polytope:
    """Intersection of closed halfspaces, certified nonempty at construction.

    ``interior_point`` strictly satisfies every inequality; when omitted, a
    Chebyshev center is computed by linear programming.
    """

    halfspaces: tuple[Halfspace, ...]
    interior_point: np.ndarray = field(default=None)

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise ValueError("polytope needs at least one halfspace")
        dim = hs[0].normal.shape[0]
        if any(h.normal.shape[0] != dim for h in hs):
            raise ValueError("halfspace normals disagree on dimension")
        object.__setattr__(self, "halfspaces", hs)
        point = self.interior_point
        if point is None:
            point = _chebyshev_center(hs)
        point = np.asarray(point, dtype=float)
        slack = self.offsets - self.normals @ point
        if np.min(slack) <= 0.0:
            raise ValueError("interior point does not strictly satisfy all halfspaces")
        object.__setattr__(self, "interior_point", point)

    @property
    def dim(self) -> int:
        return self.halfspaces[0].normal.shape[0]

    @property
    def normals(self) -> np.ndarray:
        return np.array([h.normal for h in self.halfspaces])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([h.offset for h in self.halfspaces])

    def contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.normals @ y <= self.offsets))

    def contains_rows(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        return np.all(Y @ self.normals.T <= self.offsets, axis=1)

    def strictly_contains(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(self.normals @ y < self.offsets))


Region = Union[Box, Polytope]


def _chebyshev_center(halfspaces: Sequence[Halfspace]) -> np.ndarray:
    """Largest-inscribed-ball center; raises if the polytope is empty or flat."""
    A = np.array([h.normal for h in halfspaces])
    b = np.array([h.offset for h in halfspaces])
    norms = np.linalg.norm(A, axis=1)
    dim = A.shape[1]
    c = np.zeros(dim + 1)
    c[-1] = -1.0  # maximize inscribed radius
    A_ub = np.hstack([A, norms[:, None]])
    bounds = [(-_LP_BOUND, _LP_BOUND)] * dim + [(0.0, _LP_BOUND)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if not res.success or res.x[-1] <= 1e-12:
        raise ValueError("polytope is empty or has no interior")
    return res.x[:dim]


def bounding_box(poly: Polytope) -> Box:
    """Smallest axis-aligned box containing the polytope; raises if unbounded."""
    A, b = poly.normals, poly.offsets
    dim = poly.dim
    lo = np.empty(dim)
    hi = np.empty(dim)
    for j in range(dim):
        c = np.zeros(dim)
        c[j] = 1.0
        sol_min = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * dim, method="highs")
        sol_max = linprog(-c, A_ub=A, b_ub=b, bounds=[(None, None)] * dim, method="highs")
        if sol_min.status == 3 or sol_max.status == 3:
            raise ValueError("polytope is unbounded; cannot build a bounding box")
        if not (sol_min.success and sol_max.success):
            raise ValueError("bounding-box LP failed")
        lo[j] = sol_min.fun
        hi[j] = -sol_max.fun
    span = np.maximum(hi - lo, 1e-12)
    # widen a hair so boundary points survive half-open checks downstream
    return Box(lo - 1e-12 * span, hi + 1e-12 * span)


# ---------------------------------------------------------------------------
# quantizers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdcBank:
    """Independent monotone scalar quantizer per coordinate.

    ``thresholds[j]`` is the strictly increasing cut list of dimension j;
    K thresholds yield K+1 bins indexed 0..K left to right, the two end
    bins unbounded.
    """

    thresholds: tuple[np.ndarray, ...]

    def __post_init__(self):
        cuts = tuple(np.asarray(t, dtype=float) for t in self.thresholds)
        if not cuts:
            raise ValueError("AdcBank needs at least one dimension")
        for t in cuts:
            if t.ndim != 1 or t.size < 1:
                raise ValueError("each dimension needs at least one threshold")
            if not np.all(np.isfinite(t)):
                raise ValueError("thresholds must be finite")
            if not np.all(np.diff(t) > 0):
                raise ValueError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", cuts)

    @property
    def dim(self) -> int:
        return len(self.thresholds)

    def bins_per_dim(self) -> tuple[int, ...]:
        return tuple(t.size + 1 for t in self.thresholds)

    def quantize(self, y) -> Code:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {y.shape}")
        return tuple(int(np.searchsorted(t, v, side="right")) for t, v in zip(self.thresholds, y))

    def quantize_rows(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        out = np.empty(Y.shape, dtype=int)
        for j, t in enumerate(self.thresholds):
            out[:, j] = np.searchsorted(t, Y[:, j], side="right")
        return out

    def region(self, z: Code) -> Box:
        self._validate_code(z)
        lower = np.empty(self.dim)
        upper = np.empty(self.dim)
        for j, (t, i) in enumerate(zip(self.thresholds, z)):
            lower[j] = -np.inf if i == 0 else t[i - 1]
            upper[j] = np.inf if i == t.size else t[i]
        return Box(lower, upper)

    def codes(self) -> Iterator[Code]:
        """All codes in row-major order (use only for small banks)."""
        from itertools import product

        return (tuple(c) for c in product(*(range(k) for k in self.bins_per_dim())))

    def _validate_code(self, z: Code) -> None:
        if len(z) != self.dim:
            raise ValueError(f"code length {len(z)} does not match dimension {self.dim}")
        for t, i in zip(self.thresholds, z):
            if not 0 <= int(i) <= t.size:
                raise ValueError(f"code component {i} out of range 0..{t.size}")


# flat-top hexagon: edge normals at 30 + 60k degrees, neighbors in axial coords
_HEX_NORMAL_ANGLES = np.deg2rad(30.0 + 60.0 * np.arange(6))
_HEX_NORMALS = np.stack([np.cos(_HEX_NORMAL_ANGLES), np.sin(_HEX_NORMAL_ANGLES)], axis=1)
_HEX_NEIGHBORS = np.array([(0, 0), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)])


@dataclass(frozen=True)
class HexagonalQuantizer:
    """Regular hexagonal tiling of the plane, flat-top orientation.

    ``pitch`` is the circumradius (center-to-vertex distance). Codes are
    axial integer pairs (q, r); the code's center sits at
    (1.5 * pitch * q, sqrt(3) * pitch * (r + q / 2)).
    """

    pitch: float

    def __post_init__(self):
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def dim(self) -> int:
        return 2

    @property
    def apothem(self) -> float:
        return self.pitch * math.sqrt(3.0) / 2.0

    def center(self, z: Code) -> np.ndarray:
        q, r = z
        return np.array([1.5 * self.pitch * q, math.sqrt(3.0) * self.pitch * (r + 0.5 * q)])

    def centers(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        x = 1.5 * self.pitch * Z[..., 0]
        y = math.sqrt(3.0) * self.pitch * (Z[..., 1] + 0.5 * Z[..., 0])
        return np.stack([x, y], axis=-1)

    def quantize(self, y) -> Code:
        y = np.asarray(y, dtype=float)
        if y.shape != (2,):
            raise ValueError("hexagonal quantizer is 2-D")
        q, r = self.quantize_rows(y[None, :])[0]
        return (int(q), int(r))

    def quantize_rows(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        qf = (2.0 / 3.0) * Y[:, 0] / self.pitch
        rf = (-Y[:, 0] / 3.0 + Y[:, 1] / math.sqrt(3.0)) / self.pitch
        base = _cube_round(qf, rf)
        best_code = base + _HEX_NEIGHBORS[0]
        best_d2 = np.sum((Y - self.centers(best_code)) ** 2, axis=1)
        for off in _HEX_NEIGHBORS[1:]:
            cand = base + off
            d2 = np.sum((Y - self.centers(cand)) ** 2, axis=1)
            closer = d2 < best_d2
            tie = d2 == best_d2
            lower_code = (cand[:, 0] < best_code[:, 0]) | (
                (cand[:, 0] == best_code[:, 0]) & (cand[:, 1] < best_code[:, 1])
            )
            take = closer | (tie & lower_code)
            best_code = np.where(take[:, None], cand, best_code)
            best_d2 = np.where(take, d2, best_d2)
        return best_code

    def region(self, z: Code) -> Polytope:
        if len(z) != 2:
            raise ValueError("hexagonal codes are axial pairs (q, r)")
        c = self.center(z)
        hs = tuple(
            Halfspace(n, float(n @ c) + self.apothem) for n in _HEX_NORMALS
        )
        return Polytope(hs, interior_point=c)


def _cube_round(qf: np.ndarray, rf: np.ndarray) -> np.ndarray:
    """Round fractional axial coordinates to the nearest hexagon code."""
    xf, zf = qf, rf
    yf = -xf - zf
    rx, ry, rz = np.round(xf), np.round(yf), np.round(zf)
    dx, dy, dz = np.abs(rx - xf), np.abs(ry - yf), np.abs(rz - zf)
    fix_x = (dx > dy) & (dx > dz)
    fix_z = ~fix_x & (dz > dy)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(fix_z, -rx - ry, rz)
    return np.stack([rx, rz], axis=1).astype(int)


@dataclass(frozen=True)
class PolytopeQuantizer:
    """Finite list of disjoint convex polytopes plus an implicit outside code.

    ``quantize`` is total: points in no listed region get ``outside_code``,
    whose (non-convex) complement region is deliberately not constructible.
    """

    regions: tuple[tuple[Code, Polytope], ...]
    outside_code: Code = None

    def __post_init__(self):
        regs = tuple(sorted(((tuple(c), p) for c, p in self.regions), key=lambda cp: cp[0]))
        if not regs:
            raise ValueError("PolytopeQuantizer needs at least one region")
        dim = regs[0][1].dim
        if any(p.dim != dim for _, p in regs):
            raise ValueError("regions disagree on dimension")
        codes = [c for c, _ in regs]
        if len(set(codes)) != len(codes):
            raise ValueError("duplicate codes in region list")
        outside = self.outside_code
        if outside is None:
            outside = (min(c[0] for c in codes) - 1,) + (0,) * (len(codes[0]) - 1)
        outside = tuple(outside)
        if outside in set(codes):
            raise ValueError("outside code collides with a listed code")
        object.__setattr__(self, "regions", regs)
        object.__setattr__(self, "outside_code", outside)

    @property
    def dim(self) -> int:
        return self.regions[0][1].dim

    def quantize(self, y) -> Code:
        y = np.asarray(y, dtype=float)
        for code, poly in self.regions:
            if poly.contains(y):
                return code
        return self.outside_code

    def quantize_rows(self, Y: np.ndarray) -> list[Code]:
        Y = np.asarray(Y, dtype=float)
        out: list[Code] = [self.outside_code] * Y.shape[0]
        unassigned = np.ones(Y.shape[0], dtype=bool)
        for code, poly in self.regions:
            hit = unassigned & poly.contains_rows(Y)
            for i in np.flatnonzero(hit):
                out[i] = code
            unassigned &= ~hit
        return out

    def region(self, z: Code) -> Polytope:
        z = tuple(z)
        if z == self.outside_code:
            raise ValueError("the outside code has a non-convex region and cannot be materialized")
        for code, poly in self.regions:
            if code == z:
                return poly
        raise ValueError(f"unknown code {z!r}")


Quantizer = Union[AdcBank, HexagonalQuantizer, PolytopeQuantizer]


# ---------------------------------------------------------------------------
# region operations
# ---------------------------------------------------------------------------

def contains(region: Region, y) -> bool:
    """Membership under the half-open box / closed polytope convention."""
    return region.contains(y)


def region_contains_rows(region: Region, Y: np.ndarray) -> np.ndarray:
    return region.contains_rows(Y)


def sample_region(region: Region, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` points inside the region, deterministic per seed.

    Bounded regions are sampled uniformly (rejection from the bounding box
    for polytopes); unbounded box coordinates use unit-exponential tails
    beyond their finite ends.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(region, Box):
        return _sample_box(region, count, rng)
    return _sample_polytope(region, count, rng)


def _sample_box(box: Box, count: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((count, box.dim))
    for j in range(box.dim):
        lo, hi = box.lower[j], box.upper[j]
        if np.isfinite(lo) and np.isfinite(hi):
            out[:, j] = rng.uniform(lo, hi, count)
        elif np.isfinite(lo):
            out[:, j] = lo + rng.exponential(1.0, count)
        elif np.isfinite(hi):
            out[:, j] = hi - rng.exponential(1.0, count)
        else:
            out[:, j] = rng.laplace(0.0, 1.0, count)
    # measure-zero boundary hits (u == upper) violate the half-open convention
    bad = ~box.contains_rows(out)
    while np.any(bad):
        out[bad] = _sample_box(box, int(np.count_nonzero(bad)), rng)
        bad = ~box.contains_rows(out)
    return out


def _sample_polytope(poly: Polytope, count: int, rng: np.random.Generator) -> np.ndarray:
    box = bounding_box(poly)
    accepted: list[np.ndarray] = []
    n_acc = 0
    n_prop = 0
    batch = max(count, 1024)
    while n_acc < count:
        prop = _sample_box(box, batch, rng)
        keep = poly.contains_rows(prop)
        n_prop += batch
        got = prop[keep]
        n_acc += got.shape[0]
        accepted.append(got)
        if n_prop >= 1_000_000 and n_acc / n_prop < 1e-6:
            raise RuntimeError("rejection acceptance rate below 1e-6; region is degenerate")
    return np.concatenate(accepted, axis=0)[:count]


def estimate_acceptance_rate(poly: Polytope, trials: int, seed: int) -> float:
    """Fraction of bounding-box proposals landing inside the polytope."""
    rng = np.random.default_rng(seed)
    prop = _sample_box(bounding_box(poly), trials, rng)
    return float(np.mean(poly.contains_rows(prop)))


def check_pairwise_disjoint(pq: PolytopeQuantizer, samples: int, seed: int) -> int:
    """Count sampled interior points of one region lying strictly inside another."""
    violations = 0
    for i, (code_a, poly_a) in enumerate(pq.regions):
        pts = sample_region(poly_a, samples, seed + i)
        for code_b, poly_b in pq.regions:
            if code_b == code_a:
                continue
            strict = np.all(pts @ poly_b.normals.T < poly_b.offsets, axis=1)
            violations += int(np.count_nonzero(strict))
    return violations


# ---------------------------------------------------------------------------
# JSON description (the CLI-facing quantizer format)
# ---------------------------------------------------------------------------

def quantizer_from_json(obj: dict) -> Quantizer:
    """Build a quantizer from its JSON description.

    Formats: {"kind": "adc", "thresholds": [[...], ...]},
    {"kind": "hex", "pitch": p}, or {"kind": "polytopes", "regions":
    [{"code": k, "halfspaces": [{"normal": [...], "offset": o}, ...]}, ...]}.
    """
    kind = obj.get("kind")
    if kind == "adc":
        return AdcBank(tuple(np.asarray(t, dtype=float) for t in obj["thresholds"]))
    if kind == "hex":
        return HexagonalQuantizer(float(obj["pitch"]))
    if kind == "polytopes":
        regions = []
        for reg in obj["regions"]:
            code = reg["code"]
            code = tuple(code) if isinstance(code, (list, tuple)) else (int(code),)
            hs = tuple(Halfspace(np.asarray(h["normal"], dtype=float), float(h["offset"]))
                       for h in reg["halfspaces"])
            regions.append((code, Polytope(hs)))
        return PolytopeQuantizer(tuple(regions))
    raise ValueError(f"unknown quantizer kind {kind!r}")


def quantizer_to_json(q: Quantizer) -> dict:
    if isinstance(q, AdcBank):
        return {"kind": "adc", "thresholds": [list(map(float, t)) for t in q.thresholds]}
    if isinstance(q, HexagonalQuantizer):
        return {"kind": "hex", "pitch": q.pitch}
    if isinstance(q, PolytopeQuantizer):
        return {
            "kind": "polytopes",
            "regions": [
                {
                    "code": list(code) if len(code) > 1 else code[0],
                    "halfspaces": [
                        {"normal": list(map(float, h.normal)), "offset": h.offset}
                        for h in poly.halfspaces
                    ],
                }
                for code, poly in q.regions
            ],
        }
    raise TypeError(f"not a quantizer: {type(q).__name__}")


def load_quantizer(path: str) -> Quantizer:
    with open(path, "r", encoding="utf-8") as handle:
        return quantizer_from_json(json.load(handle))
