"""Ball-growth (Frostman) exponents and the potential-to-growth inequality.

For a discrete measure the profile r -> sup_x mu(B(x,r)) is computed with
the sup restricted to node centers; below the node spacing the profile
measures discretization rather than the measure, so default radii stop at
four median spacings. The inequality check bounds ball masses by

    mu(B(x,r)) <= C * ||riesz_potential(mu, 1-alpha, .)||_{L^p} * r^{alpha - 1/p}

and reports the smallest empirical constant C together with its stability
under grid refinement; a norm that keeps growing under refinement is
flagged as divergent instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .equilibrium import DiscreteMeasure
from .fraclap import riesz_potential

__all__ = [
    "BallMassProfile",
    "FrostmanFit",
    "FrostmanInequalityReport",
    "ball_mass_profile",
    "default_radii",
    "frostman_exponent",
    "frostman_inequality_check",
]


@dataclass(frozen=True)
class BallMassProfile:
    """radii (decreasing) with masses[r] = max over node centers of mu(B(x,r))."""

    radii: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if len(r) != len(m) or len(r) == 0:
            raise ValueError("radii and masses must align")
        if np.any(np.diff(r) >= 0):
            raise ValueError("radii must be strictly decreasing")
        if np.any(np.diff(m) > 1e-15):
            raise ValueError("masses must be nonincreasing along decreasing radii")
        if np.any(m <= 0):
            raise ValueError("masses must be positive")


@dataclass(frozen=True)
class FrostmanFit:
    exponent: float
    residual: float
    fit_range: tuple[int, int]


@dataclass(frozen=True)
class FrostmanInequalityReport:
    alpha: float
    p: float
    constant: float
    per_radius_constants: np.ndarray
    radii: np.ndarray
    potential_norm: float
    refined_norms: tuple
    norm_divergent: bool
    constant_refined: float


def _positions_and_weights(mu: Union[DiscreteMeasure, tuple]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(points in R^d, 1-D parameter positions, weights)."""
    if isinstance(mu, DiscreteMeasure):
        if mu.curve is None:
            raise ValueError("measure carries no curve")
        return (np.asarray(mu.curve.points, float),
                np.asarray(mu.curve.params, float),
                np.asarray(mu.weights, float))
    positions, weights = mu
    pos = np.asarray(positions, dtype=float)
    pts = pos[:, None] if pos.ndim == 1 else pos
    line = pos if pos.ndim == 1 else pos[:, 0]
    return pts, line, np.asarray(weights, dtype=float)


def ball_mass_profile(mu: Union[DiscreteMeasure, tuple],
                      radii: Sequence[float]) -> BallMassProfile:
    """sup-over-centers ball masses at each radius (centers = support nodes)."""
    pts, _, w = _positions_and_weights(mu)
    support = w > 0
    if support.sum() < 1:
        raise ValueError("empty measure")
    radii = np.asarray(sorted(set(float(r) for r in radii), reverse=True))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    centers = pts[support]
    d = np.linalg.norm(centers[:, None, :] - pts[None, :, :], axis=-1)
    masses = np.empty(len(radii))
    for i, r in enumerate(radii):
        masses[i] = float(np.max((d <= r) @ w))
    return BallMassProfile(radii=radii, masses=masses)


def default_radii(mu: Union[DiscreteMeasure, tuple], count: int = 12) -> np.ndarray:
    """count log-spaced radii from diam/4 down to 4x the median node spacing."""
    pts, line, _ = _positions_and_weights(mu)
    diam = float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)))
    spacing = float(np.median(np.abs(np.diff(np.sort(line)))))
    lo = max(4.0 * spacing, 1e-12)
    hi = diam / 4.0
    if hi <= lo:
        hi = 2.0 * lo
    return np.geomspace(hi, lo, count)


def frostman_exponent(profile: BallMassProfile,
                      fit_range: Optional[tuple[int, int]] = None) -> FrostmanFit:
    """Least-squares slope of log mass against log radius over fit_range.

    Needs at least 4 radii spanning a decade; a constant profile fits slope
    zero, a degenerate radius range is an error.
    """
    r = profile.radii
    m = profile.masses
    if fit_range is None:
        fit_range = (0, len(r))
    a, b = fit_range
    rs, ms = r[a:b], m[a:b]
    if len(rs) < 4:
        raise ValueError("fit needs at least 4 radii")
    if rs.max() / rs.min() < 10.0:
        raise ValueError("fit range must span at least one decade of radii")
    lx = np.log(rs)
    ly = np.log(ms)
    if float(np.ptp(lx)) < 1e-12:
        raise ValueError("degenerate fit: no variance in log r")
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(math.sqrt(res[0] / len(lx))) if len(res) else 0.0
    return FrostmanFit(exponent=float(coef[0]), residual=resid, fit_range=(a, b))


def _lp_norm_on_grid(values: np.ndarray, spacing: float, p: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float((np.sum(np.abs(values) ** p) * spacing) ** (1.0 / p))


def frostman_inequality_check(mu: Union[DiscreteMeasure, tuple], alpha: float,
                              p: float, radii: Optional[Sequence[float]] = None,
                              grid_points: int = 2048,
                              refinements: int = 2) -> FrostmanInequalityReport:
    """Empirical constant in the Riesz-potential-to-ball-growth bound.

    Computes the potential riesz_potential(mu, 1-alpha, .) on a fine 1-D
    grid, its L^p norm, and the smallest C with
    mu(B(x,r)) <= C norm r^{alpha-1/p} over node centers and radii. The norm
    is recomputed on refined grids; growth beyond 25 percent across two
    refinements sets the divergence flag (the potential fails to be
    p-integrable at atom-scale, as for point masses).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0,1)")
    if p < 1.0:
        raise ValueError("p must be >= 1 (math.inf allowed)")
    if not math.isinf(p) and alpha - 1.0 / p <= 0.0:
        raise ValueError("need alpha - 1/p > 0, else the bound is vacuous")
    _, line, w = _positions_and_weights(mu)

    if radii is None:
        radii = default_radii(mu)
    radii = np.asarray(sorted(set(float(r) for r in radii), reverse=True))

    # ball masses on the parameter line (consistent with the 1-D potential)
    centers = line[w > 0]
    d = np.abs(centers[:, None] - line[None, :])
    masses = np.empty(len(radii))
    for i, r in enumerate(radii):
        masses[i] = float(np.max((d <= r) @ w))

    lo = float(line.min()) - 0.5
    hi = float(line.max()) + 0.5
    norms = []
    for level in range(refinements + 1):
        npts = grid_points * (2 ** level)
        xs = np.linspace(lo, hi, npts)
        vals = np.array([riesz_potential(mu, 1.0 - alpha, float(xx)) for xx in xs])
        if np.any(~np.isfinite(vals)):
            norms.append(math.inf)
        else:
            norms.append(_lp_norm_on_grid(vals, xs[1] - xs[0], p))
    norm0 = norms[0]
    divergent = (not all(map(math.isfinite, norms))) or \
        (norms[-1] > 1.25 * norms[0])

    exponent = alpha - (0.0 if math.isinf(p) else 1.0 / p)
    per_radius = masses / (norm0 * radii ** exponent)
    constant = float(np.max(per_radius))
    constant_refined = float(np.max(masses / (norms[-1] * radii ** exponent))) \
        if math.isfinite(norms[-1]) else 0.0
    return FrostmanInequalityReport(
        alpha=alpha, p=p, constant=constant, per_radius_constants=per_radius,
        radii=radii, potential_norm=norm0, refined_norms=tuple(norms),
        norm_divergent=bool(divergent), constant_refined=constant_refined)
