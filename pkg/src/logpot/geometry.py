"""Curves in R^d, C^{1,alpha} graph functions, and arc-length sampling.

A curve is described by a spec (segment, circle, graph, or union of
those) and discretized by `sample_curve` into nodes with composite
trapezoid arc-length weights. Graph functions carry their Lipschitz and
Hölder data so downstream probes can normalize against them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

__all__ = [
    "GraphFunction",
    "Segment",
    "Circle",
    "GraphCurve",
    "CurveUnion",
    "CurveSpec",
    "SampledCurve",
    "flat_graph",
    "linear_graph",
    "sine_graph",
    "graph_map",
    "sample_curve",
    "curve_length",
    "mollified_gradient",
    "mollified_gradient_many",
    "bump_kernel",
    "curve_spec_from_json",
    "curve_spec_to_json",
]


# ---------------------------------------------------------------------------
# graph functions


@dataclass(frozen=True)
class GraphFunction:
    """A function A: R -> R^{d-1} with gradient and regularity constants.

    evaluate/gradient accept floats or numpy arrays and return arrays whose
    trailing dimension is ambient_dim - 1. lip_const bounds |A(x)-A(y)|/|x-y|,
    holder_const bounds |grad A(x)-grad A(y)|/|x-y|^holder_exponent. When the
    constants were estimated by sampling rather than derived analytically,
    constants_estimated is set and they are only lower bounds.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    lip_const: float
    holder_exponent: float
    holder_const: float
    ambient_dim: int = 2
    name: str = "custom"
    params: dict = field(default_factory=dict)
    constants_estimated: bool = False

    def __post_init__(self):
        if self.ambient_dim < 2:
            raise ValueError("ambient_dim must be >= 2")
        if not (0.0 < self.holder_exponent <= 1.0):
            raise ValueError("holder_exponent must lie in (0, 1]")
        if self.lip_const < 0 or self.holder_const < 0:
            raise ValueError("regularity constants must be nonnegative")

    def codim(self) -> int:
        return self.ambient_dim - 1


def flat_graph(ambient_dim: int = 2) -> GraphFunction:
    """A == 0; the graph is the x-axis of R^d."""
    codim = ambient_dim - 1

    def ev(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (codim,)) if x.ndim else np.zeros(codim)

    return GraphFunction(ev, ev, 0.0, 1.0, 0.0, ambient_dim, "flat", {})


def linear_graph(slope: float, ambient_dim: int = 2) -> GraphFunction:
    """A(x) = slope * x in the first codimension coordinate."""
    codim = ambient_dim - 1

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (codim,)) if x.ndim else np.zeros(codim)
        out[..., 0] = slope * x
        return out

    def gr(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (codim,)) if x.ndim else np.zeros(codim)
        out[..., 0] = slope
        return out

    return GraphFunction(ev, gr, abs(slope), 1.0, 0.0, ambient_dim, "linear",
                         {"slope": slope})


def sine_graph(amplitude: float, frequency: float = 1.0,
               ambient_dim: int = 2) -> GraphFunction:
    """A(x) = amplitude * sin(frequency x); lip = |a w|, holder_const = |a w^2|."""
    codim = ambient_dim - 1

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (codim,)) if x.ndim else np.zeros(codim)
        out[..., 0] = amplitude * np.sin(frequency * x)
        return out

    def gr(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (codim,)) if x.ndim else np.zeros(codim)
        out[..., 0] = amplitude * frequency * np.cos(frequency * x)
        return out

    return GraphFunction(ev, gr, abs(amplitude * frequency), 1.0,
                         abs(amplitude * frequency ** 2), ambient_dim, "sine",
                         {"amplitude": amplitude, "frequency": frequency})


_BUILTIN_GRAPHS = {
    "flat": lambda p, d: flat_graph(d),
    "linear": lambda p, d: linear_graph(float(p["slope"]), d),
    "sine": lambda p, d: sine_graph(float(p["amplitude"]),
                                    float(p.get("frequency", 1.0)), d),
}


def estimate_graph_constants(function: GraphFunction, interval: tuple[float, float],
                             n_pairs: int = 10_000, seed: int = 0) -> GraphFunction:
    """Sampled lower bounds for lip/holder constants, flagged as estimated."""
    rng = np.random.default_rng(seed)
    a, b = interval
    x = rng.uniform(a, b, n_pairs)
    y = rng.uniform(a, b, n_pairs)
    keep = np.abs(x - y) > 1e-12
    x, y = x[keep], y[keep]
    dv = np.linalg.norm(np.atleast_2d(function.evaluate(x) - function.evaluate(y)), axis=-1)
    dg = np.linalg.norm(np.atleast_2d(function.gradient(x) - function.gradient(y)), axis=-1)
    dx = np.abs(x - y)
    lip = float(np.max(dv / dx))
    hold = float(np.max(dg / dx ** function.holder_exponent))
    return replace(function, lip_const=lip, holder_const=hold, constants_estimated=True)


def graph_map(function: GraphFunction, x: float) -> np.ndarray:
    """The embedding x -> (x, A(x)) of the parameter line into R^d.

    Bi-Lipschitz onto its image: |x - y| <= |G(x) - G(y)| <= sqrt(1 + lip^2) |x - y|.
    """
    x_arr = np.asarray(x, dtype=float)
    vals = function.evaluate(x_arr)
    if x_arr.ndim == 0:
        return np.concatenate(([float(x_arr)], np.reshape(vals, (function.codim(),))))
    return np.concatenate((x_arr[..., None], vals), axis=-1)


# ---------------------------------------------------------------------------
# curve specs


@dataclass(frozen=True)
class Segment:
    a: float
    b: float
    ambient_dim: int = 2

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("segment needs a < b")


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle needs radius > 0")


@dataclass(frozen=True)
class GraphCurve:
    function: GraphFunction
    interval: tuple[float, float]

    def __post_init__(self):
        if not self.interval[0] < self.interval[1]:
            raise ValueError("graph interval must be nondegenerate")


@dataclass(frozen=True)
class CurveUnion:
    members: tuple
    clearance: float = 0.0

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("empty union")
        if self.clearance < 0:
            raise ValueError("clearance must be >= 0")


CurveSpec = Union[Segment, Circle, GraphCurve, CurveUnion]

_ComponentSpec = Union[Segment, Circle, GraphCurve]


def _components(spec: CurveSpec) -> list[_ComponentSpec]:
    if isinstance(spec, CurveUnion):
        out: list[_ComponentSpec] = []
        for m in spec.members:
            if isinstance(m, CurveUnion):
                raise ValueError("nested unions are not supported")
            out.append(m)
        return out
    return [spec]


def component_dim(spec: _ComponentSpec) -> int:
    if isinstance(spec, Segment):
        return spec.ambient_dim
    if isinstance(spec, Circle):
        return 2
    return spec.function.ambient_dim


def param_domain(spec: _ComponentSpec) -> tuple[float, float, bool]:
    """(t0, t1, closed) for the component's parametrization."""
    if isinstance(spec, Segment):
        return spec.a, spec.b, False
    if isinstance(spec, Circle):
        return 0.0, 2.0 * math.pi, True
    return spec.interval[0], spec.interval[1], False


def point_at(spec: _ComponentSpec, t) -> np.ndarray:
    """Point(s) on the component at parameter t; vectorized over t."""
    t = np.asarray(t, dtype=float)
    if isinstance(spec, Segment):
        shape = t.shape + (spec.ambient_dim,)
        out = np.zeros(shape) if t.ndim else np.zeros(spec.ambient_dim)
        out[..., 0] = t
        return out
    if isinstance(spec, Circle):
        cx, cy = spec.center
        return np.stack([cx + spec.radius * np.cos(t),
                         cy + spec.radius * np.sin(t)], axis=-1)
    return graph_map(spec.function, t)


def tangent_at(spec: _ComponentSpec, t) -> np.ndarray:
    """dPoint/dt; vectorized over t."""
    t = np.asarray(t, dtype=float)
    if isinstance(spec, Segment):
        shape = t.shape + (spec.ambient_dim,)
        out = np.zeros(shape) if t.ndim else np.zeros(spec.ambient_dim)
        out[..., 0] = 1.0
        return out
    if isinstance(spec, Circle):
        return np.stack([-spec.radius * np.sin(t), spec.radius * np.cos(t)], axis=-1)
    codim = spec.function.codim()
    g = np.reshape(spec.function.gradient(t), t.shape + (codim,))
    ones = np.ones(t.shape + (1,))
    return np.concatenate((ones, g), axis=-1)


def speed_at(spec: _ComponentSpec, t) -> np.ndarray:
    """|dPoint/dt|; vectorized over t."""
    t = np.asarray(t, dtype=float)
    tang = np.reshape(tangent_at(spec, t), t.shape + (-1,))
    speed = np.linalg.norm(tang, axis=-1)
    return speed if t.ndim else float(speed)


def curve_length(spec: CurveSpec) -> float:
    """Total arc length; analytic for segments/circles, quadrature for graphs."""
    total = 0.0
    for comp in _components(spec):
        if isinstance(comp, Segment):
            total += comp.b - comp.a
        elif isinstance(comp, Circle):
            total += 2.0 * math.pi * comp.radius
        else:
            a, b = comp.interval
            val, _ = quad(lambda s: float(np.linalg.norm(tangent_at(comp, s))), a, b,
                          limit=200, epsabs=1e-12, epsrel=1e-12)
            total += val
    return total


def _check_union_clearance(spec: CurveUnion, n_probe: int = 256) -> None:
    comps = _components(spec)
    dims = {component_dim(c) for c in comps}
    if len(dims) != 1:
        raise ValueError("union members must share an ambient dimension")
    clouds = []
    for c in comps:
        t0, t1, closed = param_domain(c)
        ts = np.linspace(t0, t1, n_probe, endpoint=not closed)
        clouds.append(np.atleast_2d(point_at(c, ts)))
    for i in range(len(clouds)):
        for j in range(i + 1, len(clouds)):
            d = np.linalg.norm(clouds[i][:, None, :] - clouds[j][None, :, :], axis=-1)
            if d.min() <= spec.clearance:
                raise ValueError(
                    f"union members {i} and {j} come within {d.min():.3g} "
                    f"<= clearance {spec.clearance:.3g}")


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SampledCurve:
    """Quadrature nodes on a curve: params, embedded points, arc weights.

    weights are composite-trapezoid integrals of |dPoint/dt| over node cells,
    so weights.sum() approximates total arc length to second order.
    """

    params: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    component_id: np.ndarray
    components: tuple
    closed: tuple

    def __post_init__(self):
        n = len(self.params)
        if not (len(self.points) == len(self.weights) == len(self.component_id) == n):
            raise ValueError("inconsistent node arrays")
        if np.any(self.weights <= 0):
            raise ValueError("arc-length weights must be positive")

    @property
    def n_nodes(self) -> int:
        return len(self.params)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def single_component(self) -> _ComponentSpec:
        if len(self.components) != 1:
            raise ValueError("operation requires a single-component curve")
        return self.components[0]

    def param_cells(self) -> np.ndarray:
        """Per-node parameter cell widths (wrapping for closed components)."""
        out = np.empty(self.n_nodes)
        for ci, comp in enumerate(self.components):
            sel = np.flatnonzero(self.component_id == ci)
            t = self.params[sel]
            if self.closed[ci]:
                t0, t1, _ = param_domain(comp)
                out[sel] = (t1 - t0) / len(t)
            else:
                cells = np.empty(len(t))
                cells[0] = (t[1] - t[0]) / 2
                cells[-1] = (t[-1] - t[-2]) / 2
                if len(t) > 2:
                    cells[1:-1] = (t[2:] - t[:-2]) / 2
                out[sel] = cells
        return out


def _allocate_nodes(lengths: Sequence[float], n: int) -> list[int]:
    """Nodes proportional to length, floor + remainder to the longest component."""
    k = len(lengths)
    if n < 2 * k:
        raise ValueError(f"need at least 2 nodes per component ({2 * k}), got {n}")
    total = float(sum(lengths))
    alloc = [max(2, int(math.floor(n * L / total))) for L in lengths]
    longest = int(np.argmax(lengths))
    leftover = n - sum(alloc)
    if leftover < 0:
        # floor clamping overshot; trim from the longest that still has > 2
        order = np.argsort(lengths)[::-1]
        i = 0
        while leftover < 0:
            j = order[i % k]
            if alloc[j] > 2:
                alloc[j] -= 1
                leftover += 1
            i += 1
    else:
        alloc[longest] += leftover
    return alloc


def sample_curve(spec: CurveSpec, n: int) -> SampledCurve:
    """Discretize a curve into n nodes with trapezoid arc-length weights.

    Union components receive nodes proportional to their lengths (remainder
    to the longest); every component needs at least 2 nodes. Closed curves
    are sampled periodically (uniform weights, no duplicated endpoint).
    """
    comps = _components(spec)
    if isinstance(spec, CurveUnion):
        _check_union_clearance(spec)
    if n < 2 * len(comps):
        raise ValueError(f"n must be >= 2 per component, got {n}")
    lengths = [curve_length(c) for c in comps]
    alloc = _allocate_nodes(lengths, n)

    params, points, weights, comp_id = [], [], [], []
    closed_flags = []
    for ci, (comp, m) in enumerate(zip(comps, alloc)):
        t0, t1, closed = param_domain(comp)
        closed_flags.append(closed)
        if closed:
            t = t0 + (t1 - t0) * np.arange(m) / m
            w = (t1 - t0) / m * speed_at(comp, t)
        else:
            t = np.linspace(t0, t1, m)
            h = (t1 - t0) / (m - 1)
            w = h * speed_at(comp, t)
            w[0] *= 0.5
            w[-1] *= 0.5
        params.append(t)
        points.append(np.atleast_2d(point_at(comp, t)))
        weights.append(w)
        comp_id.append(np.full(m, ci, dtype=int))

    return SampledCurve(
        params=np.concatenate(params),
        points=np.vstack(points),
        weights=np.concatenate(weights),
        component_id=np.concatenate(comp_id),
        components=tuple(comps),
        closed=tuple(closed_flags),
    )


# ---------------------------------------------------------------------------
# mollification

# fixed bump: C^2, even, supported on [-1,1], integral one
_BUMP_NORM = 35.0 / 32.0


def bump_kernel(u) -> np.ndarray:
    """psi(u) = (35/32)(1-u^2)^3 on [-1,1], zero outside."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) <= 1.0
    val = np.where(inside, _BUMP_NORM * (1.0 - u ** 2) ** 3, 0.0)
    return val if u.ndim else float(val)


def mollified_gradient(function: GraphFunction, x: float, r: float) -> np.ndarray:
    """(grad A * psi_r)(x) with psi_r(y) = psi(y/r)/r, by adaptive quadrature.

    Componentwise absolute tolerance 1e-10.
    """
    if r <= 0:
        raise ValueError("mollification radius must be positive")
    codim = function.codim()
    out = np.empty(codim)
    for k in range(codim):
        def integrand(u, _k=k):
            g = np.reshape(function.gradient(x - r * u), (codim,))
            return g[_k] * bump_kernel(u)
        val, _ = quad(integrand, -1.0, 1.0, epsabs=1e-10, limit=200)
        out[k] = val
    return out


_GL_NODES_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def mollified_gradient_many(function: GraphFunction, x, r, order: int = 24) -> np.ndarray:
    """Vectorized mollified gradient at paired (x, r) arrays.

    Fixed-order Gauss-Legendre on [-1,1]; for the polynomial-times-smooth
    integrands used here it matches the adaptive route to ~1e-12. Returns
    shape broadcast(x, r).shape + (codim,).
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("mollification radius must be positive")
    if order not in _GL_NODES_CACHE:
        _GL_NODES_CACHE[order] = leggauss(order)
    nodes, wts = _GL_NODES_CACHE[order]
    xb, rb = np.broadcast_arrays(x, r)
    args = xb[..., None] - rb[..., None] * nodes          # (..., q)
    grads = np.reshape(function.gradient(args), args.shape + (function.codim(),))
    psi = bump_kernel(nodes) * wts                        # (q,)
    return np.einsum("...qc,q->...c", grads, psi)


# ---------------------------------------------------------------------------
# JSON curve specs


def curve_spec_from_json(doc: Union[str, dict]) -> CurveSpec:
    """Parse a curve spec document.

    {"variant": "segment", "a": -1, "b": 1}
    {"variant": "circle", "center": [0, 0], "radius": 1}
    {"variant": "graph", "function": "sine", "amplitude": 0.05,
     "frequency": 1.0, "interval": [-3, 3]}
    {"variant": "union", "members": [...], "clearance": 0.0}
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "variant" not in doc:
        raise ValueError("curve spec must be an object with a 'variant' field")
    variant = doc["variant"]
    if variant == "segment":
        return Segment(float(doc["a"]), float(doc["b"]),
                       int(doc.get("ambient_dim", 2)))
    if variant == "circle":
        center = doc.get("center", [0.0, 0.0])
        return Circle((float(center[0]), float(center[1])), float(doc["radius"]))
    if variant == "graph":
        fid = doc.get("function")
        if fid not in _BUILTIN_GRAPHS:
            raise ValueError(f"unknown graph function id {fid!r}; "
                             f"known: {sorted(_BUILTIN_GRAPHS)}")
        dim = int(doc.get("ambient_dim", 2))
        fn = _BUILTIN_GRAPHS[fid](doc, dim)
        iv = doc["interval"]
        return GraphCurve(fn, (float(iv[0]), float(iv[1])))
    if variant == "union":
        members = tuple(curve_spec_from_json(m) for m in doc["members"])
        return CurveUnion(members, float(doc.get("clearance", 0.0)))
    raise ValueError(f"unknown curve variant {variant!r}")


def curve_spec_to_json(spec: CurveSpec) -> dict:
    if isinstance(spec, Segment):
        return {"variant": "segment", "a": spec.a, "b": spec.b,
                "ambient_dim": spec.ambient_dim}
    if isinstance(spec, Circle):
        return {"variant": "circle", "center": list(spec.center), "radius": spec.radius}
    if isinstance(spec, GraphCurve):
        out = {"variant": "graph", "function": spec.function.name,
               "interval": list(spec.interval),
               "ambient_dim": spec.function.ambient_dim}
        out.update(spec.function.params)
        return out
    if isinstance(spec, CurveUnion):
        return {"variant": "union", "clearance": spec.clearance,
                "members": [curve_spec_to_json(m) for m in spec.members]}
    raise TypeError(f"not a curve spec: {spec!r}")
