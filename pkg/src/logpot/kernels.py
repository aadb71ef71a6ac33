"""Kernel evaluation and discrete energy matrices.

Covers the logarithmic kernel -log|x-y|, Riesz kernels |x-y|^{-s}, the
graph-log kernel -log|G(x)-G(y)| for a graph map G(x) = (x, A(x)), the
compactly supported C^4 truncation of -log|x|, and the principal/remainder
split of the graph-log kernel driven by a mollified gradient.

The truncated kernel is glued from four branches:

    |x| <= eps       quartic in |x| matching -log at eps to 4th order
    eps <= |x| <= R  -log|x| + C_R
    R <= |x| <= 2R   log-plus-powers tail with derivatives matching -log
                     at R and vanishing to 4th order at 2R
    |x| >= 2R        0

with C_R chosen so the pieces are continuous. All junction coefficients
are hard-coded; tests re-verify the C^1 gluing numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import (GraphFunction, SampledCurve, GraphCurve, graph_map,
                       mollified_gradient, mollified_gradient_many, speed_at)
from .parallel import run_chunked

__all__ = [
    "LogKernel",
    "RieszKernel",
    "GraphLogKernel",
    "TruncatedLogKernel",
    "KernelKind",
    "KernelMatrix",
    "KernelSingularityError",
    "kernel_value",
    "truncated_log",
    "truncated_log_constant",
    "truncated_log_derivative",
    "truncated_log_antiderivative",
    "truncated_log_cell_average",
    "principal_kernel",
    "principal_kernel_direct",
    "principal_kernel_grid",
    "remainder_kernel",
    "remainder_kernel_grid",
    "assemble_kernel_matrix",
    "write_kernel_csv",
]


class KernelSingularityError(ValueError):
    """Raised when a singular kernel is evaluated at coincident points."""


# ---------------------------------------------------------------------------
# kernel kinds


@dataclass(frozen=True)
class LogKernel:
    pass


@dataclass(frozen=True)
class RieszKernel:
    s: float

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("Riesz exponent must be positive")


@dataclass(frozen=True)
class GraphLogKernel:
    function: GraphFunction


@dataclass(frozen=True)
class TruncatedLogKernel:
    eps: float
    R: float

    def __post_init__(self):
        _check_trunc_params(self.eps, self.R)


KernelKind = Union[LogKernel, RieszKernel, GraphLogKernel, TruncatedLogKernel]


def _dist(x, y) -> float:
    dx = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.linalg.norm(np.atleast_1d(dx)))


def kernel_value(kind: KernelKind, x, y) -> float:
    """Evaluate a kernel at a point pair.

    Log/Riesz/TruncatedLog take points in R^d (or scalars); GraphLog takes
    scalar curve parameters, mapped through the graph embedding. Coincident
    points raise KernelSingularityError for the singular kinds.
    """
    if isinstance(kind, GraphLogKernel):
        d = _dist(graph_map(kind.function, float(x)), graph_map(kind.function, float(y)))
        if d == 0.0:
            raise KernelSingularityError("graph-log kernel at coincident parameters")
        return -math.log(d)
    d = _dist(x, y)
    if isinstance(kind, LogKernel):
        if d == 0.0:
            raise KernelSingularityError("log kernel at coincident points")
        return -math.log(d)
    if isinstance(kind, RieszKernel):
        if d == 0.0:
            raise KernelSingularityError("Riesz kernel at coincident points")
        return d ** (-kind.s)
    if isinstance(kind, TruncatedLogKernel):
        return float(truncated_log(kind.eps, kind.R, d))
    raise TypeError(f"not a kernel kind: {kind!r}")


# ---------------------------------------------------------------------------
# truncated logarithm


def _check_trunc_params(eps: float, R: float) -> None:
    if not (0.0 < eps <= 1.0 <= R):
        raise ValueError(f"need 0 < eps <= 1 <= R, got eps={eps}, R={R}")


def _inner_coeffs(eps: float) -> tuple[float, float, float, float]:
    return (-4.0 / eps, 3.0 / eps ** 2, -4.0 / (3.0 * eps ** 3), 1.0 / (4.0 * eps ** 4))


def _outer_coeffs(R: float) -> tuple[float, ...]:
    return (-209.0, -2240.0 * R, 5040.0 * R ** 2, -24640.0 / 3.0 * R ** 3,
            8820.0 * R ** 4, -29568.0 / 5.0 * R ** 5, 2240.0 * R ** 6,
            -2560.0 / 7.0 * R ** 7)


def _poly_inner(t: np.ndarray, a) -> np.ndarray:
    # p(t) = a1 t + a2 t^2 + a3 t^3 + a4 t^4, t = |x| >= 0
    return t * (a[0] + t * (a[1] + t * (a[2] + t * a[3])))


def _tail_outer(t: np.ndarray, b) -> np.ndarray:
    # h(t) = b0 log t + sum_{i=1..7} b_i / t^i, t > 0
    s = b[0] * np.log(t)
    for i in range(1, 8):
        s = s + b[i] / t ** i
    return s


def truncated_log_constant(eps: float, R: float) -> float:
    """The additive constant C_R = log R + h(R) - h(2R); only R matters."""
    _check_trunc_params(eps, R)
    b = _outer_coeffs(R)
    return float(math.log(R) + _tail_outer(np.array(R), b) - _tail_outer(np.array(2.0 * R), b))


def truncated_log(eps: float, R: float, x) -> Union[float, np.ndarray]:
    """Compactly supported C^4 truncation of -log|x|.

    Equals -log|x| + C_R on eps <= |x| <= R, is a quartic cap on [-eps, eps],
    decays to 0 across [R, 2R], and vanishes for |x| >= 2R.
    """
    _check_trunc_params(eps, R)
    a = _inner_coeffs(eps)
    b = _outer_coeffs(R)
    CR = truncated_log_constant(eps, R)
    xarr = np.asarray(x, dtype=float)
    t = np.abs(xarr)
    out = np.zeros_like(t)

    inner = t <= eps
    mid = (t > eps) & (t <= R)
    outer = (t > R) & (t < 2.0 * R)

    inner_const = math.log(1.0 / eps) + CR - float(_poly_inner(np.array(eps), a))
    out[inner] = _poly_inner(t[inner], a) + inner_const
    with np.errstate(divide="ignore"):
        out[mid] = -np.log(t[mid]) + CR
    if np.any(outer):
        h2R = float(_tail_outer(np.array(2.0 * R), b))
        out[outer] = _tail_outer(t[outer], b) - h2R
    return out if xarr.ndim else float(out)


def truncated_log_derivative(eps: float, R: float, x, order: int = 1) -> Union[float, np.ndarray]:
    """d^order/dx^order of the truncated log, order in {1, 2, 3}; x != 0.

    The first derivative is the bounded odd kernel k_{eps,R}; it equals -1/x
    on eps <= |x| <= R and is supported on [-2R, 2R].
    """
    _check_trunc_params(eps, R)
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2, or 3")
    xarr = np.asarray(x, dtype=float)
    if np.any(xarr == 0.0):
        raise KernelSingularityError("derivative of the truncated log is undefined at 0")
    a = _inner_coeffs(eps)
    b = _outer_coeffs(R)
    t = np.abs(xarr)
    sg = np.sign(xarr)
    out = np.zeros_like(t)

    inner = t <= eps
    mid = (t > eps) & (t <= R)
    outer = (t > R) & (t < 2.0 * R)

    ti = t[inner]
    if order == 1:
        out[inner] = sg[inner] * (a[0] + 2 * a[1] * ti + 3 * a[2] * ti ** 2 + 4 * a[3] * ti ** 3)
        out[mid] = -1.0 / xarr[mid]
    elif order == 2:
        out[inner] = 2 * a[1] + 6 * a[2] * ti + 12 * a[3] * ti ** 2
        out[mid] = 1.0 / xarr[mid] ** 2
    else:
        out[inner] = sg[inner] * (6 * a[2] + 24 * a[3] * ti)
        out[mid] = -2.0 / xarr[mid] ** 3

    if np.any(outer):
        to = t[outer]
        so = sg[outer]
        if order == 1:
            s = b[0] / xarr[outer]
            for i in range(1, 8):
                s = s - i * b[i] * so / to ** (i + 1)
        elif order == 2:
            s = -b[0] / to ** 2
            for i in range(1, 8):
                s = s + i * (i + 1) * b[i] / to ** (i + 2)
        else:
            s = 2 * b[0] / xarr[outer] ** 3
            for i in range(1, 8):
                s = s - i * (i + 1) * (i + 2) * b[i] * so / to ** (i + 3)
        out[outer] = s
    return out if xarr.ndim else float(out)


def truncated_log_antiderivative(eps: float, R: float, u) -> Union[float, np.ndarray]:
    """I(u) = integral of the truncated log over [0, u], u >= 0, branch-exact.

    Used for cell averages: piecewise polynomials and -log integrate in
    closed form, so averaging over quadrature cells costs no accuracy.
    """
    _check_trunc_params(eps, R)
    a = _inner_coeffs(eps)
    b = _outer_coeffs(R)
    CR = truncated_log_constant(eps, R)
    uarr = np.asarray(u, dtype=float)
    if np.any(uarr < 0):
        raise ValueError("antiderivative argument must be >= 0")
    inner_const = math.log(1.0 / eps) + CR - float(_poly_inner(np.array(eps), a))
    h2R = float(_tail_outer(np.array(2.0 * R), b))

    def ip(v):  # integral of the inner quartic + its constant
        return (a[0] * v ** 2 / 2 + a[1] * v ** 3 / 3 + a[2] * v ** 4 / 4
                + a[3] * v ** 5 / 5 + inner_const * v)

    def im(v):  # antiderivative of -log v + C_R
        return -(v * np.log(v) - v) + CR * v

    def io(v):  # antiderivative of h(v) - h(2R)
        s = b[0] * (v * np.log(v) - v) + b[1] * np.log(v)
        for i in range(2, 8):
            s = s - b[i] / ((i - 1) * v ** (i - 1))
        return s - h2R * v

    i_eps = float(ip(eps))
    i_R = i_eps + float(im(R) - im(eps))
    i_2R = i_R + float(io(2.0 * R) - io(R))

    out = np.full_like(uarr, i_2R)
    m1 = uarr <= eps
    out[m1] = ip(uarr[m1])
    m2 = (uarr > eps) & (uarr <= R)
    out[m2] = i_eps + im(uarr[m2]) - im(eps)
    m3 = (uarr > R) & (uarr <= 2.0 * R)
    out[m3] = i_R + io(uarr[m3]) - io(R)
    return out if uarr.ndim else float(out)


def truncated_log_cell_average(eps: float, R: float, lo, hi) -> Union[float, np.ndarray]:
    """Average of the truncated log over the (possibly signed) cell [lo, hi].

    The kernel is even, so a cell straddling zero folds onto |.|.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("cell must have hi > lo")
    anti = lambda v: truncated_log_antiderivative(eps, R, v)
    lo_b, hi_b = np.broadcast_arrays(lo, hi)
    width = hi_b - lo_b
    straddle = (lo_b < 0) & (hi_b > 0)
    same = ~straddle
    out = np.zeros_like(width)
    if np.any(same):
        av = np.abs(lo_b[same])
        bv = np.abs(hi_b[same])
        lo_abs = np.minimum(av, bv)
        hi_abs = np.maximum(av, bv)
        out[same] = (anti(hi_abs) - anti(lo_abs)) / width[same]
    if np.any(straddle):
        out[straddle] = (anti(-lo_b[straddle]) + anti(hi_b[straddle])) / width[straddle]
    return out if np.ndim(lo) or np.ndim(hi) else float(out)


# ---------------------------------------------------------------------------
# principal / remainder kernels


def principal_kernel(function: GraphFunction, x: float, y: float) -> float:
    """-log |(x-y, m(x)(x-y))| where m is the gradient mollified at radius |x-y|.

    Identical to -log|(1, m(x))| - log|x-y|, which is how it is computed.
    """
    if x == y:
        raise KernelSingularityError("principal kernel at coincident parameters")
    r = abs(x - y)
    g = mollified_gradient(function, x, r)
    return -0.5 * math.log1p(float(np.dot(g, g))) - math.log(r)


def principal_kernel_direct(function: GraphFunction, x: float, y: float) -> float:
    """The unreduced form -log |(x-y, m(x)(x-y))|; agrees with principal_kernel."""
    if x == y:
        raise KernelSingularityError("principal kernel at coincident parameters")
    r = abs(x - y)
    g = mollified_gradient(function, x, r)
    vec = np.concatenate(([x - y], g * (x - y)))
    return -math.log(float(np.linalg.norm(vec)))


def remainder_kernel(function: GraphFunction, x: float, y: float) -> float:
    """R(x,y) = -log|G(x)-G(y)| - P(x,y); zero for flat and linear graphs."""
    u = kernel_value(GraphLogKernel(function), x, y)
    return u - principal_kernel(function, x, y)


def principal_kernel_grid(function: GraphFunction, xs: np.ndarray,
                          ys: np.ndarray) -> np.ndarray:
    """Vectorized principal kernel on the grid xs x ys (NaN on the diagonal).

    Uses fixed-order Gauss-Legendre mollification; matches the adaptive
    route to ~1e-12 for the built-in graph functions.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X = xs[:, None]
    Y = ys[None, :]
    Rm = np.abs(X - Y)
    safe = np.where(Rm > 0, Rm, 1.0)
    g = mollified_gradient_many(function, np.broadcast_to(X, Rm.shape), safe)
    gsq = np.sum(g * g, axis=-1)
    out = -0.5 * np.log1p(gsq) - np.log(safe)
    out[Rm == 0] = np.nan
    return out


def remainder_kernel_grid(function: GraphFunction, xs: np.ndarray,
                          ys: np.ndarray) -> np.ndarray:
    """Vectorized remainder kernel on the grid xs x ys (NaN on the diagonal)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    px = np.reshape(graph_map(function, xs), (len(xs), 1, -1))
    py = np.reshape(graph_map(function, ys), (1, len(ys), -1))
    d = np.linalg.norm(px - py, axis=-1)
    safe = np.where(d > 0, d, 1.0)
    u = -np.log(safe)
    u[d == 0] = np.nan
    return u - principal_kernel_grid(function, xs, ys)


# ---------------------------------------------------------------------------
# matrix assembly


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric kernel matrix over curve nodes with a diagonal policy.

    Under the cell-average policy the diagonal holds the mean self-energy of
    a node's quadrature cell, so w^T K w is a consistent discretization of
    the double-integral energy. Under exclude the diagonal is zero and the
    consumer must know it.
    """

    size: int
    entries: np.ndarray
    diagonal_policy: str
    kind: KernelKind

    def __post_init__(self):
        if self.entries.shape != (self.size, self.size):
            raise ValueError("matrix shape mismatch")
        if self.diagonal_policy not in ("cell_average", "exclude"):
            raise ValueError("diagonal_policy must be 'cell_average' or 'exclude'")

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries)))


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def _offdiag_entries(curve: SampledCurve, kind: KernelKind) -> np.ndarray:
    if isinstance(kind, GraphLogKernel):
        pts = np.reshape(graph_map(kind.function, curve.params), (curve.n_nodes, -1))
    else:
        pts = curve.points
    D = _pairwise_distances(pts)
    off = ~np.eye(curve.n_nodes, dtype=bool)
    if np.any(D[off] == 0.0):
        raise ValueError("duplicate nodes in sampled curve")
    K = np.zeros_like(D)
    if isinstance(kind, (LogKernel, GraphLogKernel)):
        K[off] = -np.log(D[off])
    elif isinstance(kind, RieszKernel):
        K[off] = D[off] ** (-kind.s)
    elif isinstance(kind, TruncatedLogKernel):
        K[off] = truncated_log(kind.eps, kind.R, D[off])
    else:
        raise TypeError(f"not a kernel kind: {kind!r}")
    return K


def _cell_average_diagonal(curve: SampledCurve, kind: KernelKind) -> np.ndarray:
    w = curve.weights
    if isinstance(kind, LogKernel):
        # exact flat-cell mean self-energy: (1/h^2) iint_[0,h]^2 -log|s-t| = 3/2 - log h
        return 1.5 - np.log(w)
    if isinstance(kind, GraphLogKernel):
        # flat-cell formula in parameter width, corrected by the metric stretch
        cells = curve.param_cells()
        stretch = np.empty(curve.n_nodes)
        for ci, comp in enumerate(curve.components):
            sel = curve.component_id == ci
            if isinstance(comp, GraphCurve) and comp.function is kind.function:
                stretch[sel] = speed_at(comp, curve.params[sel])
            else:
                g = mollified_gradient_many(kind.function, curve.params[sel],
                                            np.full(sel.sum(), 1e-8))
                stretch[sel] = np.sqrt(1.0 + np.sum(g * g, axis=-1))
        return 1.5 - np.log(cells) - np.log(stretch)
    if isinstance(kind, RieszKernel):
        if kind.s >= 1.0:
            raise ValueError(
                "cell-average diagonal diverges for Riesz s >= 1; use exclude")
        s = kind.s
        # (1/h^2) iint_[0,h]^2 |u-v|^{-s} = h^{-s} * 2/((1-s)(2-s))
        return w ** (-s) * 2.0 / ((1.0 - s) * (2.0 - s))
    if isinstance(kind, TruncatedLogKernel):
        half = w / 2.0
        return np.asarray(truncated_log_cell_average(kind.eps, kind.R, -half, half))
    raise TypeError(f"not a kernel kind: {kind!r}")


def assemble_kernel_matrix(curve: SampledCurve, kind: KernelKind,
                           policy: str = "cell_average") -> KernelMatrix:
    """Symmetric n x n kernel matrix over the curve nodes.

    Off-diagonal entries are kernel values at node pairs; the diagonal
    follows the policy. Rows are filled in parallel chunks with identical
    results at any worker count.
    """
    if curve.n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    n = curve.n_nodes
    K = np.zeros((n, n))
    full = _offdiag_entries(curve, kind)

    def fill(a: int, b: int) -> None:
        K[a:b, :] = full[a:b, :]

    run_chunked(fill, n)
    # exact symmetry: distances are symmetric bit-for-bit, but mirror anyway
    iu = np.triu_indices(n, 1)
    K[(iu[1], iu[0])] = K[iu]
    if policy == "cell_average":
        K[np.diag_indices(n)] = _cell_average_diagonal(curve, kind)
    elif policy == "exclude":
        K[np.diag_indices(n)] = 0.0
    else:
        raise ValueError("policy must be 'cell_average' or 'exclude'")
    return KernelMatrix(size=n, entries=K, diagonal_policy=policy, kind=kind)


def write_kernel_csv(matrix: KernelMatrix, path) -> None:
    """Dump a kernel matrix as row-major "i,j,value" CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for i in range(matrix.size):
            row = matrix.entries[i]
            for j in range(matrix.size):
                writer.writerow([i, j, repr(float(row[j]))])
