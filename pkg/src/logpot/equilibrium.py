"""Discrete equilibrium measures, Fekete points, and weak* comparisons.

The equilibrium problem is the simplex-constrained quadratic program

    minimize  w^T K w   over  w >= 0, sum(w) = mass,

whose KKT conditions are the discrete Frostman conditions: the potential
(Kw)_i equals a constant on the support and dominates it elsewhere. The
solver is accelerated projected gradient with exact sort-based simplex
projection and restart on non-monotonicity, followed by an active-set
polish that solves the reduced KKT system exactly on the identified
support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import SampledCurve, param_domain, point_at, tangent_at
from .kernels import (GraphLogKernel, KernelKind, KernelMatrix, LogKernel,
                      RieszKernel, TruncatedLogKernel, kernel_value)

__all__ = [
    "DiscreteMeasure",
    "EquilibriumResult",
    "ConditionReport",
    "FeketeResult",
    "TransfiniteReport",
    "project_to_simplex",
    "solve_equilibrium",
    "potential",
    "potential_on_nodes",
    "verify_equilibrium_conditions",
    "fekete_points",
    "transfinite_diameters",
    "ks_distance",
    "ks_distance_to_cdf",
    "compare_to_equilibrium",
    "total_variation_to_length",
]

SUPPORT_THRESHOLD_FACTOR = 1e-10


# ---------------------------------------------------------------------------
# measures and results


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative weights on curve nodes summing to a prescribed mass.

    curve may be None for matrix-only solves; operations that need node
    positions require it.
    """

    curve: Optional[SampledCurve]
    weights: np.ndarray
    mass: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.curve is not None and len(w) != self.curve.n_nodes:
            raise ValueError("weight count must equal node count")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(w.sum()) - self.mass) > 1e-12 * max(1.0, self.mass):
            raise ValueError("weights must sum to the mass")

    def support_mask(self, threshold: Optional[float] = None) -> np.ndarray:
        thr = threshold if threshold is not None else \
            SUPPORT_THRESHOLD_FACTOR * float(np.max(self.weights))
        return np.asarray(self.weights) > thr


@dataclass(frozen=True)
class EquilibriumResult:
    measure: DiscreteMeasure
    energy: float
    robin_constant: float
    kkt_residual: float
    support_mask: np.ndarray
    converged: bool
    iterations: int
    energy_trace: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.measure.weights],
            "energy": self.energy,
            "robin_constant": self.robin_constant,
            "kkt_residual": self.kkt_residual,
            "support_mask": [bool(b) for b in self.support_mask],
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class ConditionReport:
    """Discrete Frostman check: potential level on and off the support."""

    robin_constant: float
    max_support_deviation: float
    min_probe_excess: float
    tolerance: float
    passed: bool


# ---------------------------------------------------------------------------
# simplex projection and the QP solver


def project_to_simplex(v: np.ndarray, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = mass}; exact sort algorithm."""
    if mass <= 0:
        raise ValueError("mass must be positive")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    idx = np.arange(1, len(v) + 1)
    positive = u - css / idx > 0
    rho = idx[positive][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _kkt_residual(Kw: np.ndarray, support: np.ndarray) -> tuple[float, float]:
    lam = float(np.mean(Kw[support]))
    dev_on = float(np.max(np.abs(Kw[support] - lam)))
    off = ~support
    dev_off = float(max(0.0, np.max(lam - Kw[off]))) if np.any(off) else 0.0
    return lam, max(dev_on, dev_off)


def _polish_on_support(K: np.ndarray, mass: float, support: np.ndarray,
                       max_rounds: int = 60) -> Optional[np.ndarray]:
    """Active-set refinement: solve the equality-KKT system on the support,
    dropping negative weights and admitting violated off-support nodes."""
    n = K.shape[0]
    support = support.copy()
    for _ in range(max_rounds):
        S = np.flatnonzero(support)
        if len(S) == 0:
            return None
        m = len(S)
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = 2.0 * K[np.ix_(S, S)]
        A[:m, m] = 1.0
        A[m, :m] = 1.0
        rhs = np.zeros(m + 1)
        rhs[m] = mass
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            return None
        wS = sol[:m]
        if np.any(wS < 0):
            # drop the most negative weight and retry
            support[S[int(np.argmin(wS))]] = False
            continue
        w = np.zeros(n)
        w[S] = wS
        Kw = K @ w
        lam = sol[m] / 2.0
        off = np.flatnonzero(~support)
        if len(off):
            viol = lam - Kw[off]
            worst = int(np.argmax(viol))
            if viol[worst] > 1e-13 * max(1.0, abs(lam)):
                support[off[worst]] = True
                continue
        return w
    return None


def solve_equilibrium(K: KernelMatrix, mass: float = 1.0, tol: float = 1e-10,
                      max_iter: int = 200_000, polish: bool = True,
                      curve: Optional[SampledCurve] = None) -> EquilibriumResult:
    """Minimize w^T K w over the mass simplex to a target KKT residual.

    Deterministic given (K, mass, tol). On hitting max_iter without meeting
    tol the best iterate is returned with converged=False. The energy trace
    is nonincreasing by construction (restart on non-monotonicity).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = K.entries
    n = K.size
    if not np.allclose(A, A.T, atol=0.0):
        raise ValueError("kernel matrix must be symmetric")

    if n <= 1500:
        L = 2.0 * float(np.max(np.abs(np.linalg.eigvalsh(A))))
    else:
        v = np.full(n, 1.0 / math.sqrt(n))
        for _ in range(60):
            v2 = A @ v
            nv = np.linalg.norm(v2)
            if nv == 0:
                break
            v = v2 / nv
        L = 2.0 * float(abs(v @ (A @ v)))
    L = max(L, 1e-30)

    w = np.full(n, mass / n)
    y = w.copy()
    t_mom = 1.0
    Kw = A @ w
    energy = float(w @ Kw)
    trace = [energy]
    iterations = 0
    check_every = 25
    residual = math.inf
    lam = float(np.mean(Kw))

    for it in range(1, max_iter + 1):
        iterations = it
        grad_y = 2.0 * (A @ y)
        w_new = project_to_simplex(y - grad_y / L, mass)
        e_new = float(w_new @ (A @ w_new))
        if e_new > energy:
            # momentum restart; plain projected step from the last iterate
            y = w.copy()
            t_mom = 1.0
            grad_y = 2.0 * (A @ y)
            w_new = project_to_simplex(y - grad_y / L, mass)
            e_new = float(w_new @ (A @ w_new))
            if e_new > energy:     # cannot decrease further at this scale
                w_new, e_new = w, energy
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = w_new + ((t_mom - 1.0) / t_next) * (w_new - w)
        w, energy, t_mom = w_new, e_new, t_next
        trace.append(energy)
        if it % check_every == 0 or it == max_iter:
            Kw = A @ w
            support = w > SUPPORT_THRESHOLD_FACTOR * float(np.max(w))
            lam, residual = _kkt_residual(Kw, support)
            if residual <= tol:
                break

    support = w > SUPPORT_THRESHOLD_FACTOR * float(np.max(w))
    if polish:
        w_pol = _polish_on_support(A, mass, support)
        if w_pol is not None:
            e_pol = float(w_pol @ (A @ w_pol))
            if e_pol <= energy + 1e-12 * max(1.0, abs(energy)):
                w, energy = w_pol, e_pol
                trace.append(energy)
    Kw = A @ w
    support = w > SUPPORT_THRESHOLD_FACTOR * float(np.max(w))
    lam, residual = _kkt_residual(Kw, support)

    # renormalize away accumulated rounding so the measure invariant holds
    w = w * (mass / float(w.sum()))
    measure = DiscreteMeasure(curve=curve, weights=w, mass=mass)
    return EquilibriumResult(
        measure=measure,
        energy=energy,
        robin_constant=lam,
        kkt_residual=residual,
        support_mask=support,
        converged=residual <= tol,
        iterations=iterations,
        energy_trace=np.asarray(trace),
    )


# ---------------------------------------------------------------------------
# potentials and condition checks


def potential(curve: SampledCurve, measure: DiscreteMeasure, kind: KernelKind,
              x) -> float:
    """U mu(x) = sum_j k(x, p_j) w_j at a probe point (parameter for GraphLog).

    Probes coinciding with a positive-weight node raise
    KernelSingularityError for the singular kernel kinds.
    """
    w = np.asarray(measure.weights, dtype=float)
    if isinstance(kind, GraphLogKernel):
        total = 0.0
        for t_j, w_j in zip(curve.params, w):
            if w_j == 0.0:
                continue
            total += w_j * kernel_value(kind, float(x), float(t_j))
        return total
    xp = np.asarray(x, dtype=float)
    d = np.linalg.norm(curve.points - xp[None, :], axis=1)
    if isinstance(kind, LogKernel):
        _require_clear(d, w, "log")
        return float(np.sum(np.where(w > 0, -np.log(np.where(d > 0, d, 1.0)) * w, 0.0)))
    if isinstance(kind, RieszKernel):
        _require_clear(d, w, "Riesz")
        return float(np.sum(np.where(w > 0, np.where(d > 0, d, 1.0) ** (-kind.s) * w, 0.0)))
    if isinstance(kind, TruncatedLogKernel):
        from .kernels import truncated_log
        return float(np.sum(truncated_log(kind.eps, kind.R, d) * w))
    raise TypeError(f"not a kernel kind: {kind!r}")


def _require_clear(d: np.ndarray, w: np.ndarray, name: str) -> None:
    from .kernels import KernelSingularityError
    if np.any((d < 1e-14) & (w > 0)):
        raise KernelSingularityError(
            f"{name} potential probed at a positive-weight node")


def potential_on_nodes(K: KernelMatrix, measure: DiscreteMeasure) -> np.ndarray:
    """The node potentials (Kw)_i, using the matrix diagonal for self-cells."""
    return K.entries @ np.asarray(measure.weights, dtype=float)


def verify_equilibrium_conditions(curve: SampledCurve, K: KernelMatrix,
                                  result: EquilibriumResult,
                                  probes: Optional[np.ndarray] = None,
                                  tol: float = 1e-8) -> ConditionReport:
    """Check the discrete Frostman conditions of a solved equilibrium.

    Support nodes must see |U mu - lambda| small; off-support nodes and any
    extra probe points must see U mu >= lambda - tol. Probes are points in
    R^d (curve parameters for a GraphLog kernel).
    """
    Kw = potential_on_nodes(K, result.measure)
    lam = result.robin_constant
    sup = result.support_mask
    max_dev = float(np.max(np.abs(Kw[sup] - lam)))
    excesses = []
    if np.any(~sup):
        excesses.append(Kw[~sup] - lam)
    if probes is not None and len(probes):
        vals = np.array([potential(curve, result.measure, K.kind, p) for p in probes])
        excesses.append(vals - lam)
    min_excess = float(np.min(np.concatenate(excesses))) if excesses else 0.0
    passed = (max_dev <= tol) and (min_excess >= -tol)
    return ConditionReport(robin_constant=lam, max_support_deviation=max_dev,
                           min_probe_excess=min_excess, tolerance=tol, passed=passed)


# ---------------------------------------------------------------------------
# Fekete points


@dataclass(frozen=True)
class FeketeResult:
    params: np.ndarray
    points: np.ndarray
    discrete_energy: float
    normalized_energy: float
    restart_index: int
    converged: bool


@dataclass(frozen=True)
class TransfiniteReport:
    Ns: tuple
    taus: np.ndarray
    monotonicity_violations: tuple


def _pair_energy_and_grad(comp, kind: KernelKind, theta: np.ndarray,
                          want_grad: bool) -> tuple[float, Optional[np.ndarray]]:
    pts = np.atleast_2d(point_at(comp, theta))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.linalg.norm(diff, axis=-1)
    n = len(theta)
    off = ~np.eye(n, dtype=bool)
    dmin = d[off].min()
    if dmin <= 0.0:
        return math.inf, None
    if isinstance(kind, (LogKernel, GraphLogKernel)):
        vals = -np.log(d[off])
        kprime = lambda dd: -1.0 / dd
    elif isinstance(kind, RieszKernel):
        vals = d[off] ** (-kind.s)
        kprime = lambda dd: -kind.s * dd ** (-kind.s - 1.0)
    elif isinstance(kind, TruncatedLogKernel):
        from .kernels import truncated_log, truncated_log_derivative
        vals = truncated_log(kind.eps, kind.R, d[off])
        kprime = lambda dd: truncated_log_derivative(kind.eps, kind.R, dd)
    else:
        raise TypeError(f"not a kernel kind: {kind!r}")
    energy = float(np.sum(vals))
    if not want_grad:
        return energy, None
    tang = np.atleast_2d(tangent_at(comp, theta))
    dsafe = np.where(off, d, 1.0)
    kp = np.where(off, kprime(dsafe), 0.0)
    # dE/dtheta_i = 2 sum_j k'(d_ij) <p_i - p_j, T_i> / d_ij
    inner = np.einsum("ijk,ik->ij", diff, tang)
    grad = 2.0 * np.sum(kp * inner / dsafe, axis=1)
    return energy, grad


def _clamp_or_wrap(theta: np.ndarray, dom: tuple[float, float, bool]) -> np.ndarray:
    t0, t1, closed = dom
    if closed:
        return t0 + np.mod(theta - t0, t1 - t0)
    return np.clip(theta, t0, t1)


def fekete_points(curve: SampledCurve, N: int, kind: KernelKind,
                  restarts: int = 8, seed: int = 0, max_iter: int = 2000,
                  ftol: float = 1e-14) -> FeketeResult:
    """Best-of-restarts local minimum of the discrete pair energy.

    Projected gradient on curve parameters with backtracking line search;
    parameters clamp to the interval (open curves) or wrap (closed curves).
    Deterministic given the seed; ties within 1e-12 go to the lowest
    restart index. Single-component curves only.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    comp = curve.single_component()
    dom = param_domain(comp)
    if N > 100_000:
        raise ValueError("N exceeds the supported budget")

    best: Optional[tuple[float, int, np.ndarray, bool]] = None
    for ridx in range(restarts):
        rng = np.random.default_rng(seed + ridx)
        t0, t1, closed = dom
        theta = np.sort(rng.uniform(t0, t1, N))
        energy, grad = _pair_energy_and_grad(comp, kind, theta, True)
        step = 1.0 / (1.0 + np.max(np.abs(grad)))
        converged = False
        for _ in range(max_iter):
            trial_step = step * 2.0
            improved = False
            for _bt in range(60):
                cand = _clamp_or_wrap(theta - trial_step * grad, dom)
                cand = np.sort(cand)
                e_cand, _ = _pair_energy_and_grad(comp, kind, cand, False)
                if e_cand < energy:
                    improved = True
                    break
                trial_step *= 0.5
            if not improved:
                converged = True
                break
            if energy - e_cand <= ftol * (1.0 + abs(energy)):
                theta, energy = cand, e_cand
                converged = True
                break
            theta, energy = cand, e_cand
            step = trial_step
            _, grad = _pair_energy_and_grad(comp, kind, theta, True)
        if best is None or energy < best[0] - 1e-12:
            best = (energy, ridx, theta, converged)
    energy, ridx, theta, converged = best
    pts = np.atleast_2d(point_at(comp, theta))
    return FeketeResult(params=theta, points=pts, discrete_energy=energy,
                        normalized_energy=energy / (N * (N - 1)),
                        restart_index=ridx, converged=converged)


def transfinite_diameters(curve: SampledCurve, kind: KernelKind,
                          Ns: Sequence[int], restarts: int = 8,
                          seed: int = 0) -> TransfiniteReport:
    """Normalized minimal energies tau(N); violations flag optimizer failures."""
    Ns = tuple(Ns)
    if any(b <= a for a, b in zip(Ns, Ns[1:])) or any(N < 2 for N in Ns):
        raise ValueError("Ns must be strictly increasing and >= 2")
    taus = []
    for N in Ns:
        res = fekete_points(curve, N, kind, restarts=restarts, seed=seed)
        taus.append(res.normalized_energy)
    taus = np.asarray(taus)
    viol = tuple(int(i) for i in range(1, len(taus)) if taus[i] < taus[i - 1] - 1e-12)
    return TransfiniteReport(Ns=Ns, taus=taus, monotonicity_violations=viol)


# ---------------------------------------------------------------------------
# weak* comparisons


def ks_distance(params_a: np.ndarray, weights_a: np.ndarray,
                params_b: np.ndarray, weights_b: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between two discrete measures on the line.

    Both inputs are normalized to probability; the sup over the real line of
    |F - G| for right-continuous step CDFs is attained at an atom.
    """
    pa = np.asarray(params_a, dtype=float)
    pb = np.asarray(params_b, dtype=float)
    wa = np.asarray(weights_a, dtype=float)
    wb = np.asarray(weights_b, dtype=float)
    wa = wa / wa.sum()
    wb = wb / wb.sum()
    ia = np.argsort(pa, kind="stable")
    ib = np.argsort(pb, kind="stable")
    pa, wa = pa[ia], np.cumsum(wa[ia])
    pb, wb = pb[ib], np.cumsum(wb[ib])
    atoms = np.union1d(pa, pb)
    Fa = np.concatenate(([0.0], wa))[np.searchsorted(pa, atoms, side="right")]
    Fb = np.concatenate(([0.0], wb))[np.searchsorted(pb, atoms, side="right")]
    return float(np.max(np.abs(Fa - Fb)))


def ks_distance_to_cdf(params: np.ndarray, weights: np.ndarray,
                       cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """KS distance between a discrete measure and a continuous CDF.

    Exact for monotone CDFs: the sup is attained just before or at an atom.
    """
    p = np.asarray(params, dtype=float)
    w = np.asarray(weights, dtype=float)
    idx = np.argsort(p, kind="stable")
    p = p[idx]
    F = np.cumsum(w[idx] / w.sum())
    G = np.asarray(cdf(p), dtype=float)
    F_left = np.concatenate(([0.0], F[:-1]))
    return float(max(np.max(np.abs(F - G)), np.max(np.abs(F_left - G))))


def compare_to_equilibrium(points: FeketeResult, eq: EquilibriumResult) -> float:
    """KS distance between Fekete empirical measure and equilibrium weights.

    Requires both to live on the same single-component 1-D parametrization;
    multi-component curves have no canonical CDF and are rejected.
    """
    curve = eq.measure.curve
    if curve is None:
        raise ValueError("equilibrium result carries no curve")
    curve.single_component()
    N = len(points.params)
    return ks_distance(points.params, np.full(N, 1.0 / N),
                       curve.params, eq.measure.weights)


def total_variation_to_length(measure: DiscreteMeasure) -> float:
    """TV distance between a measure and the normalized arc-length measure."""
    w = np.asarray(measure.weights, dtype=float)
    w = w / w.sum()
    u = measure.curve.weights / measure.curve.weights.sum()
    return 0.5 * float(np.sum(np.abs(w - u)))
