"""Structural probes for the principal/remainder kernel decomposition.

Four numeric experiments: convexity of the principal kernel in each slot,
size and Hölder-difference bounds on the remainder with empirically fitted
constants, the second-difference inequality for smooth maps on point
quadruples, and the convex-plus-Hölder interpolation bound on an interval.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from .geometry import GraphFunction
from .kernels import principal_kernel_grid, remainder_kernel_grid

__all__ = [
    "ProbeRegion",
    "ConvexityReport",
    "RemainderBoundsReport",
    "SecondDifferenceResult",
    "ConvexHolderReport",
    "convexity_probe",
    "remainder_bounds_probe",
    "second_difference_check",
    "convex_holder_bound_check",
    "report_to_json",
]


@dataclass(frozen=True)
class ProbeRegion:
    """Rectangular (x, y) probe grid excluding a diagonal band."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int = 40
    ny: int = 40
    min_separation: float = 1e-2

    def __post_init__(self):
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("probe ranges must be nonempty")
        if self.min_separation <= 0:
            raise ValueError("min_separation must be positive")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least a 2x2 grid")

    def grids(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(*self.x_range, self.nx),
                np.linspace(*self.y_range, self.ny))


@dataclass(frozen=True)
class ConvexityReport:
    min_second_difference: float
    min_second_difference_x: float
    min_second_difference_y: float
    argmin: tuple[float, float]
    step: float


@dataclass(frozen=True)
class RemainderBoundsReport:
    size_constant: float
    continuity_constant: float
    n_pairs: int
    n_triples: int


@dataclass(frozen=True)
class SecondDifferenceResult:
    lhs: float
    rhs: float
    holds: bool
    slack_factor: float


@dataclass(frozen=True)
class ConvexHolderReport:
    hypotheses_ok: bool
    hypothesis_failures: tuple
    max_violation_left: float
    max_violation_right: float
    holds: bool
    slack: float


def convexity_probe(function: GraphFunction, region: ProbeRegion,
                    step: Optional[float] = None) -> ConvexityReport:
    """Minimum centered second difference of the principal kernel on the grid.

    Probes x -> P(x,y) and y -> P(x,y) at step min(1e-3, min_separation/10);
    a nonnegative minimum is the discrete shadow of convexity off the
    diagonal. No assertion is made: adversarially steep graphs may go
    negative and the caller sees the value.
    """
    h = step if step is not None else min(1e-3, region.min_separation / 10.0)
    xs, ys = region.grids()

    def second_diff_x() -> np.ndarray:
        center = principal_kernel_grid(function, xs, ys)
        plus = principal_kernel_grid(function, xs + h, ys)
        minus = principal_kernel_grid(function, xs - h, ys)
        return (plus - 2.0 * center + minus) / h ** 2

    def second_diff_y() -> np.ndarray:
        center = principal_kernel_grid(function, xs, ys)
        plus = principal_kernel_grid(function, xs, ys + h)
        minus = principal_kernel_grid(function, xs, ys - h)
        return (plus - 2.0 * center + minus) / h ** 2

    sep = np.abs(xs[:, None] - ys[None, :])
    ok = sep >= region.min_separation

    dx = second_diff_x()
    dy = second_diff_y()
    min_x = float(np.nanmin(np.where(ok, dx, np.nan)))
    min_y = float(np.nanmin(np.where(ok, dy, np.nan)))
    both = np.where(ok, np.minimum(dx, dy), np.nan)
    flat_idx = np.nanargmin(both)
    i, j = np.unravel_index(flat_idx, both.shape)
    return ConvexityReport(
        min_second_difference=float(both[i, j]),
        min_second_difference_x=min_x,
        min_second_difference_y=min_y,
        argmin=(float(xs[i]), float(ys[j])),
        step=h,
    )


def remainder_bounds_probe(function: GraphFunction, region: ProbeRegion,
                           n_offsets: int = 6) -> RemainderBoundsReport:
    """Fitted constants for the remainder size and Hölder-difference bounds.

    size_constant = max |R(x,y)| / min(lip, holder * |x-y|^alpha);
    continuity_constant maximizes the admissible-triple ratio
    |R(x,y)-R(x',y)| |x-y| / (|x-x'| min(lip, holder |x-y|^alpha))
    over offsets with |x-x'| <= |x-y|/2.
    """
    if function.lip_const == 0.0 and function.holder_const == 0.0:
        # flat/linear graphs: the remainder vanishes identically
        xs, ys = region.grids()
        Rm = remainder_kernel_grid(function, xs, ys)
        sep = np.abs(xs[:, None] - ys[None, :])
        ok = sep >= region.min_separation
        max_abs = float(np.nanmax(np.abs(np.where(ok, Rm, np.nan))))
        size_c = 0.0 if max_abs < 1e-12 else math.inf
        return RemainderBoundsReport(size_constant=size_c, continuity_constant=size_c,
                                     n_pairs=int(ok.sum()), n_triples=0)

    delta1 = function.lip_const
    delta2 = function.holder_const
    alpha = function.holder_exponent
    xs, ys = region.grids()
    sep = np.abs(xs[:, None] - ys[None, :])
    ok = sep >= region.min_separation

    Rm = remainder_kernel_grid(function, xs, ys)
    envelope = np.minimum(delta1, delta2 * sep ** alpha)
    ratios = np.where(ok, np.abs(Rm) / envelope, np.nan)
    size_constant = float(np.nanmax(ratios))

    # admissible triples: x' = x + t*(x-y)/2 for a few offsets t in (0,1]
    cont = 0.0
    n_triples = 0
    offsets = np.linspace(1.0 / n_offsets, 1.0, n_offsets)
    for t in offsets:
        xprime_grid = xs[:, None] + t * 0.5 * (xs[:, None] - ys[None, :])
        # evaluate R(x', y) one y-column at a time to reuse the grid kernel
        for jy in range(len(ys)):
            col_ok = ok[:, jy]
            if not np.any(col_ok):
                continue
            xp = xprime_grid[col_ok, jy]
            Rp = remainder_kernel_grid(function, xp, ys[jy:jy + 1])[:, 0]
            base = Rm[col_ok, jy]
            dxy = sep[col_ok, jy]
            dxxp = np.abs(t * 0.5 * dxy)
            env = np.minimum(delta1, delta2 * dxy ** alpha)
            vals = np.abs(base - Rp) * dxy / (dxxp * env)
            cont = max(cont, float(np.nanmax(vals)))
            n_triples += int(col_ok.sum())
    return RemainderBoundsReport(size_constant=size_constant,
                                 continuity_constant=cont,
                                 n_pairs=int(ok.sum()), n_triples=n_triples)


# ---------------------------------------------------------------------------
# second-difference inequality


def _hull_contains_origin(points: np.ndarray) -> bool:
    """Exact membership of 0 in the convex hull via an LP feasibility test."""
    k, d = points.shape
    A_eq = np.vstack([points.T, np.ones(k)])
    b_eq = np.concatenate([np.zeros(d), [1.0]])
    res = linprog(c=np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k,
                  method="highs")
    return bool(res.success)


def _hull_samples(points: np.ndarray, n_samples: int, seed: int = 0) -> np.ndarray:
    """Quasi-random convex combinations plus vertices and edge midpoints."""
    k, d = points.shape
    sampler = qmc.Sobol(d=k, scramble=True, seed=seed)
    raw = sampler.random(n_samples)
    weights = raw + 1e-12
    weights = weights / weights.sum(axis=1, keepdims=True)
    interior = weights @ points
    mids = [(points[i] + points[j]) / 2.0 for i in range(k) for j in range(i + 1, k)]
    return np.vstack([points, np.asarray(mids), interior])


_BUILTIN_MAP_IDS = ("log", "square_norm", "coordinate_cube")


def _map_data(map_id: str):
    """(f, sup |grad f| over samples, sup ||hess f|| over samples) callables.

    The log kernel gets exact hull suprema (distance from the origin to the
    hull); the polynomial maps use sampled suprema with a slack factor.
    """
    if map_id == "log":
        f = lambda z: -math.log(float(np.linalg.norm(z)))
        grad_bound = lambda pts: 1.0 / _dist_origin_hull(pts)
        hess_bound = lambda pts: 1.0 / _dist_origin_hull(pts) ** 2
        return f, grad_bound, hess_bound
    if map_id == "square_norm":
        f = lambda z: float(np.dot(z, z))
        grad_bound = lambda pts: 2.0 * float(np.max(np.linalg.norm(_hull_samples(pts, 1024), axis=1)))
        hess_bound = lambda pts: 2.0
        return f, grad_bound, hess_bound
    if map_id == "coordinate_cube":
        f = lambda z: float(z[0] ** 3)
        grad_bound = lambda pts: 3.0 * float(np.max(_hull_samples(pts, 1024)[:, 0] ** 2))
        hess_bound = lambda pts: 6.0 * float(np.max(np.abs(_hull_samples(pts, 1024)[:, 0])))
        return f, grad_bound, hess_bound
    raise ValueError(f"unknown map id {map_id!r}; known: {_BUILTIN_MAP_IDS}")


def _dist_origin_hull(points: np.ndarray) -> float:
    """Distance from the origin to the convex hull of <= 4 points, exact.

    The closest hull point lies on some segment between two of the points
    (or at a vertex), so the minimum over all pairwise segments is exact
    when the origin is outside the hull.
    """
    k = len(points)
    best = float(np.min(np.linalg.norm(points, axis=1)))
    for i in range(k):
        for j in range(i + 1, k):
            a, b = points[i], points[j]
            ab = b - a
            denom = float(np.dot(ab, ab))
            if denom == 0.0:
                continue
            t = float(np.clip(-np.dot(a, ab) / denom, 0.0, 1.0))
            best = min(best, float(np.linalg.norm(a + t * ab)))
    return best


def second_difference_check(map_id: str, a, b, c, d,
                            slack_factor: float = 1.05) -> SecondDifferenceResult:
    """Check |(f(b)-f(a)) - (f(d)-f(c))| against the quadrilateral bound

        max(|c-a|, |d-b|) * min(|b-a|, |d-c|) * sup ||hess f||
        + |(b-a)-(d-c)| * sup |grad f|

    with suprema over the convex hull of the four points and a 5 percent
    slack absorbing the sup estimation. The log map rejects hulls
    containing the origin.
    """
    pts = np.asarray([a, b, c, d], dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must share a dimension")
    if len({tuple(p) for p in pts}) != 4:
        raise ValueError("quadruple points must be distinct")
    f, grad_bound, hess_bound = _map_data(map_id)
    if map_id == "log" and _hull_contains_origin(pts):
        raise ValueError("hull contains the singularity of the log map")
    av, bv, cv, dv = pts
    lhs = abs((f(bv) - f(av)) - (f(dv) - f(cv)))
    m_cross = max(float(np.linalg.norm(cv - av)), float(np.linalg.norm(dv - bv)))
    M_side = min(float(np.linalg.norm(bv - av)), float(np.linalg.norm(dv - cv)))
    eps_par = float(np.linalg.norm((bv - av) - (dv - cv)))
    rhs = (m_cross * M_side * hess_bound(pts) + eps_par * grad_bound(pts)) * slack_factor
    return SecondDifferenceResult(lhs=lhs, rhs=rhs, holds=lhs <= rhs,
                                  slack_factor=slack_factor)


# ---------------------------------------------------------------------------
# convex + Hölder interpolation bound


def convex_holder_bound_check(xs: np.ndarray, U: np.ndarray, P: np.ndarray,
                              R: np.ndarray, holder_const: float,
                              exponent: float, slack: float = 1e-9) -> ConvexHolderReport:
    """Verify the two-sided secant-plus-Hölder bound on sampled U = P + R.

    Preconditions checked on the samples: U = P + R within 1e-12, P midpoint
    convex, R Hölder with the given constant. Hypothesis violations are
    reported as such, not as bound failures. The bound at each sample x:

        U(x) - U(a) <= (x-a) |U(b)-U(a)|/(b-a) + 2 C |x-a|^alpha

    and the mirrored form at b.
    """
    xs = np.asarray(xs, dtype=float)
    U = np.asarray(U, dtype=float)
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    if not (len(xs) == len(U) == len(P) == len(R)) or len(xs) < 3:
        raise ValueError("need aligned samples with at least 3 points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("sample positions must be strictly increasing")

    failures = []
    if float(np.max(np.abs(U - (P + R)))) > 1e-12 * max(1.0, float(np.max(np.abs(U)))):
        failures.append("decomposition: U != P + R on samples")
    # midpoint convexity on equally spaced interior triples
    mid_gap = P[:-2] + P[2:] - 2.0 * P[1:-1]
    if float(np.min(mid_gap)) < -1e-9 * max(1.0, float(np.max(np.abs(P)))):
        failures.append("principal part not midpoint-convex on samples")
    dxm = np.abs(xs[:, None] - xs[None, :])
    np.fill_diagonal(dxm, 1.0)
    ratios = np.abs(R[:, None] - R[None, :]) / dxm ** exponent
    np.fill_diagonal(ratios, 0.0)
    fitted_holder = float(np.max(ratios))
    if fitted_holder > holder_const * (1.0 + 1e-9) + 1e-15:
        failures.append(
            f"remainder Hölder constant {fitted_holder:.6g} exceeds supplied "
            f"{holder_const:.6g}")

    a, b = xs[0], xs[-1]
    Ua, Ub = U[0], U[-1]
    secant = abs(Ub - Ua) / (b - a)
    left = (U - Ua) - ((xs - a) * secant + 2.0 * holder_const * (xs - a) ** exponent)
    right = (U - Ub) - ((b - xs) * secant + 2.0 * holder_const * (b - xs) ** exponent)
    max_left = float(np.max(left))
    max_right = float(np.max(right))
    holds = (max_left <= slack) and (max_right <= slack)
    return ConvexHolderReport(
        hypotheses_ok=not failures,
        hypothesis_failures=tuple(failures),
        max_violation_left=max_left,
        max_violation_right=max_right,
        holds=holds,
        slack=slack,
    )


def report_to_json(convexity: ConvexityReport, bounds: RemainderBoundsReport,
                   violations: Optional[list] = None) -> str:
    """Probe summary in the JSON layout used by the CLI."""
    return json.dumps({
        "min_second_difference": convexity.min_second_difference,
        "C_size": bounds.size_constant,
        "C_cont": bounds.continuity_constant,
        "violations": violations or [],
    }, sort_keys=True, indent=2)
