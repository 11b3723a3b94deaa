"""Line bundles with connection given by cocycle data.

A bundle is a cover of charts, transition functions ``g_ab`` (expressions in
the coordinates of chart ``a``) and local potentials ``theta_a``. Local
sections glue by ``s_b = g_ab s_a`` and the data must satisfy::

    g_ba g_ab = 1,    (i/hbar)(theta_b - theta_a) = g_ab^{-1} d g_ab

Parallel transport multiplies by ``exp((i/hbar) int theta(gamma'))`` along each
segment and by ``g_ab`` when the path changes charts. The cylinder has angle
period 2 pi, so with ``theta = p dphi`` the Bohr-Sommerfeld set is ``p in hbar Z``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp
from scipy.optimize import brentq

from . import chartcalc as cc

TAU = sp.Symbol("t", real=True)


class BundleError(ValueError):
    pass


class PathError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bundles


@dataclass(frozen=True)
class LineBundleCocycle:
    base: cc.ChartedSpace
    transitions: Mapping  # (a, b) -> g_ab as expression in chart a coordinates
    theta: cc.ChartForm
    hbar: float
    name: str = ""
    preset: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.theta.degree != 1:
            raise BundleError("connection potentials must be 1-forms")
        if self.hbar <= 0:
            raise BundleError("hbar must be positive")
        trans = {}
        for (a, b), g in self.transitions.items():
            if (a, b) not in self.base.transitions:
                raise BundleError(f"no chart overlap {a}->{b}")
            trans[(a, b)] = sp.sympify(g)
        object.__setattr__(self, "transitions", MappingProxyType(trans))

    def g(self, a: str, b: str, points: np.ndarray) -> np.ndarray:
        if a == b:
            return np.ones(np.shape(points)[:-1], dtype=complex)
        return cc.evaluate_expr(self.transitions[(a, b)], self.base.coords(a), points)


@dataclass(frozen=True)
class CocycleReport:
    inverse: float
    triple: float
    connection: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.inverse, self.triple, self.connection) <= self.tolerance

    def as_dict(self) -> dict:
        return {"lb1_inverse": self.inverse, "lb2_triple": self.triple, "lb3_connection": self.connection,
                "tolerance": self.tolerance, "passed": self.passed}


def _nonvanishing(vals: np.ndarray, pts: np.ndarray, a: str, b: str) -> None:
    bad = np.abs(vals) < 1e-14
    if bad.any():
        pt = pts[np.argwhere(bad)[0][0]]
        raise BundleError(f"transition g_{a}{b} vanishes at {pt.tolist()}")


def check_cocycle(L: LineBundleCocycle, count: int = cc.DEFAULT_SAMPLES, tol: float = 1e-8) -> CocycleReport:
    """Max residuals of the three compatibility conditions over sampled overlap points."""
    space = L.base
    inv = tri = conn = 0.0
    for (a, b), gab in L.transitions.items():
        x = space.sample_overlap(a, b, count)
        if not len(x):
            continue
        vab = L.g(a, b, x)
        _nonvanishing(vab, x, a, b)
        if (b, a) in L.transitions:
            vba = L.g(b, a, space.transition_map(a, b, x))
            _nonvanishing(vba, x, b, a)
            inv = max(inv, float(np.max(np.abs(vba * vab - 1))))
        # (i/hbar)(theta_b - theta_a) - dg/g in chart a coordinates
        coords = space.coords(a)
        pulled = cc.pullback_components(L.theta, a, b)
        for i, c in enumerate(coords):
            lhs = 1j / L.hbar * (
                cc.evaluate_expr(pulled.get((i,), 0), coords, x)
                - cc.evaluate_expr(L.theta.components[a].get((i,), 0), coords, x)
            )
            rhs = cc.evaluate_expr(sp.diff(gab, c), coords, x) / vab
            conn = max(conn, float(np.max(np.abs(lhs - rhs))))
    labels = space.labels
    for a in labels:
        for b in labels:
            for c in labels:
                if len({a, b, c}) < 3 or not {(a, b), (b, c), (c, a)} <= set(L.transitions):
                    continue
                x = space.sample_overlap(a, b, count)
                y = space.transition_map(a, b, x)
                keep = space.in_overlap(b, c, y) & space.in_overlap(a, c, x)
                if not keep.any():
                    continue
                x, y = x[keep], y[keep]
                zc = space.transition_map(b, c, y)
                prod = L.g(c, a, zc) * L.g(b, c, y) * L.g(a, b, x)
                tri = max(tri, float(np.max(np.abs(prod - 1))))
    return CocycleReport(inv, tri, conn, tol)


def curvature_residual(L: LineBundleCocycle, omega: cc.ChartForm, count: int = cc.DEFAULT_SAMPLES) -> float:
    """max |d theta_a / hbar - omega / hbar| over sampled points of each chart."""
    diff = cc.exterior_derivative(L.theta) - omega
    return cc.max_abs(diff, count) / L.hbar


@dataclass(frozen=True)
class CurvatureReport:
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def curvature_check(L: LineBundleCocycle, omega: cc.ChartForm, tol: float = 1e-8) -> CurvatureReport:
    return CurvatureReport(curvature_residual(L, omega), tol)


def tensor_product(L1: LineBundleCocycle, L2: LineBundleCocycle) -> LineBundleCocycle:
    if L1.base is not L2.base or L1.hbar != L2.hbar:
        raise BundleError("bundles must share base and hbar")
    trans = {k: L1.transitions[k] * L2.transitions[k] for k in L1.transitions if k in L2.transitions}
    return LineBundleCocycle(L1.base, trans, L1.theta + L2.theta, L1.hbar, f"{L1.name}*{L2.name}")


def tensor_power(L: LineBundleCocycle, k: int) -> LineBundleCocycle:
    """g -> g^k, theta -> k theta."""
    if k < 1:
        raise BundleError("k must be a positive integer")
    trans = {key: g**k for key, g in L.transitions.items()}
    preset = dict(L.preset)
    if "k" in preset:
        preset["k"] = preset["k"] * k
    return LineBundleCocycle(L.base, trans, L.theta * k, L.hbar, f"{L.name}^{k}", preset)


def gauge_transform(L: LineBundleCocycle, tau: Mapping[str, sp.Expr]) -> LineBundleCocycle:
    """Change of local frames s'_a = tau_a s_a (unit-modulus tau_a).

    g'_ab = tau_b g_ab / tau_a and theta'_a = theta_a + (hbar/i) dlog tau_a.
    """
    space = L.base
    trans = {}
    for (a, b), g in L.transitions.items():
        tb = sp.sympify(tau[b]).xreplace(dict(zip(space.coords(b), space.transitions[(a, b)].exprs)))
        trans[(a, b)] = tb * g / sp.sympify(tau[a])
    comps = {}
    for label in L.theta.components:
        coords = space.coords(label)
        t = sp.sympify(tau[label])
        comps[label] = {
            (i,): L.theta.components[label].get((i,), 0) - sp.I * L.hbar * sp.diff(t, c) / t for i, c in enumerate(coords)
        }
    return LineBundleCocycle(space, trans, cc.ChartForm(space, 1, comps), L.hbar, f"{L.name}'")


# ---------------------------------------------------------------------------
# model bundles


def cylinder_bundle(hbar: float = 1.0, lam: float = 0.0, space: cc.ChartedSpace | None = None) -> LineBundleCocycle:
    """Trivial bundle on T*S^1 with theta_lambda = p dphi + hbar lambda dphi."""
    space = space or cc.cylinder_space()
    comps = {label: {(0,): space.coords(label)[1] + hbar * lam} for label in space.labels}
    theta = cc.ChartForm(space, 1, comps)
    trans = {key: sp.Integer(1) for key in space.transitions}
    return LineBundleCocycle(space, trans, theta, hbar, f"cylinder(lambda={lam})",
                             {"preset": "cylinder-standard", "lambda": lam, "hbar": hbar})


def sphere_bundle(k: int = 1, hbar: float = 1.0, space: cc.ChartedSpace | None = None) -> LineBundleCocycle:
    """L_k on S^2: g_NS = z^{-k}, theta_N = -i hbar k zbar dz/(1+|z|^2), same form in w on U_S."""
    if k < 0:
        raise BundleError("k must be non-negative")
    space = space or cc.build_sphere_atlas()
    x, y = space.coords("N")
    u, v = space.coords("S")

    def theta_comps(a, b):
        r2 = a**2 + b**2
        # zbar dz = (a - i b) da + (b + i a) db
        return {(0,): -sp.I * hbar * k * (a - sp.I * b) / (1 + r2), (1,): -sp.I * hbar * k * (b + sp.I * a) / (1 + r2)}

    theta = cc.ChartForm(space, 1, {"N": theta_comps(x, y), "S": theta_comps(u, v)})
    trans = {("N", "S"): ((x - sp.I * y) / (x**2 + y**2)) ** k, ("S", "N"): ((u - sp.I * v) / (u**2 + v**2)) ** k}
    return LineBundleCocycle(space, trans, theta, hbar, f"L_{k}", {"preset": "sphere-Lk", "k": k, "hbar": hbar})


def sphere_symplectic_form(k: int = 1, hbar: float = 1.0, space: cc.ChartedSpace | None = None) -> cc.ChartForm:
    """omega_k = 2 pi hbar k omega_0."""
    space = space or cc.build_sphere_atlas()
    return cc.fubini_study_form(space) * (2 * sp.pi * hbar * k)


# ---------------------------------------------------------------------------
# serialization

_BASES = {"sphere": cc.build_sphere_atlas, "cylinder": cc.cylinder_space, "plane": lambda: cc.euclidean_space(1)}


def bundle_to_dict(L: LineBundleCocycle, base_name: str) -> dict:
    return {
        "schema": "1",
        "name": L.name,
        "base": base_name,
        "hbar": L.hbar,
        "theta": {lab: {str(k[0]): str(v) for k, v in comp.items()} for lab, comp in L.theta.components.items()},
        "transitions": {f"{a}->{b}": str(g) for (a, b), g in L.transitions.items()},
    }


def bundle_from_dict(data: Mapping) -> LineBundleCocycle:
    space = _BASES[data["base"]]()

    def parse(text, label):
        names = {str(c): c for c in space.coords(label)}
        return sp.sympify(text, locals=names)

    theta = cc.ChartForm(
        space, 1, {lab: {(int(k),): parse(v, lab) for k, v in comp.items()} for lab, comp in data["theta"].items()}
    )
    trans = {}
    for key, g in data["transitions"].items():
        a, b = key.split("->")
        trans[(a, b)] = parse(g, a)
    return LineBundleCocycle(space, trans, theta, float(data["hbar"]), data.get("name", ""))


def bundle_to_json(L: LineBundleCocycle, base_name: str) -> str:
    return json.dumps(bundle_to_dict(L, base_name), indent=2, sort_keys=True)


def bundle_from_json(text: str) -> LineBundleCocycle:
    return bundle_from_dict(json.loads(text))


def load_preset(name: str, hbar: float = 1.0, k: int = 1, lam: float = 0.0) -> LineBundleCocycle:
    """Named presets: 'cylinder-standard' and 'sphere-Lk', round-tripped through JSON."""
    if name == "cylinder-standard":
        return bundle_from_json(bundle_to_json(cylinder_bundle(hbar, lam), "cylinder"))
    if name == "sphere-Lk":
        return bundle_from_json(bundle_to_json(sphere_bundle(k, hbar), "sphere"))
    raise BundleError(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# paths and transport


@dataclass(frozen=True)
class PathSegment:
    """Curve t in [0, 1] -> chart coordinates; curve(t) has shape (..., len(t), dim)."""

    chart: str
    curve: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_exprs(cls, chart: str, exprs: Sequence) -> "PathSegment":
        exprs = [sp.sympify(e) for e in exprs]
        pos = [sp.lambdify(TAU, e, "numpy") for e in exprs]
        vel = [sp.lambdify(TAU, sp.diff(e, TAU), "numpy") for e in exprs]

        def stack(funcs):
            def f(t):
                t = np.asarray(t, dtype=float)
                return np.stack([np.broadcast_to(np.asarray(g(t), dtype=float), t.shape) for g in funcs], axis=-1)

            return f

        return cls(chart, stack(pos), stack(vel))

    def start(self) -> np.ndarray:
        return self.curve(np.array([0.0]))[..., 0, :]

    def end(self) -> np.ndarray:
        return self.curve(np.array([1.0]))[..., 0, :]

    def reversed(self) -> "PathSegment":
        c, v = self.curve, self.velocity
        return PathSegment(self.chart, lambda t: c(1 - np.asarray(t)), lambda t: -v(1 - np.asarray(t)))


@dataclass(frozen=True)
class PiecewisePath:
    segments: tuple

    def __post_init__(self):
        if not self.segments:
            raise PathError("empty path")
        object.__setattr__(self, "segments", tuple(self.segments))

    def reversed(self) -> "PiecewisePath":
        return PiecewisePath(tuple(s.reversed() for s in reversed(self.segments)))

    def __add__(self, other: "PiecewisePath") -> "PiecewisePath":
        return PiecewisePath(self.segments + other.segments)


def adaptive_simpson(f: Callable, a: float, b: float, tol: float = 1e-12, max_depth: int = 40):
    """Adaptive Simpson for vector-valued f(t) -> (..., len(t)); returns (value, error estimate)."""
    ts = np.array([a, (a + b) / 2, b])
    fa, fm, fb = np.moveaxis(f(ts), -1, 0)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    total = np.zeros_like(whole)
    err = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, b0, fa0, fm0, fb0, w0, tol0, depth = stack.pop()
        m = (a0 + b0) / 2
        fl, fr = np.moveaxis(f(np.array([(a0 + m) / 2, (m + b0) / 2])), -1, 0)
        left = (m - a0) / 6 * (fa0 + 4 * fl + fm0)
        right = (b0 - m) / 6 * (fm0 + 4 * fr + fb0)
        delta = left + right - w0
        dmax = float(np.max(np.abs(delta)))
        if dmax <= 15 * tol0 or depth >= max_depth:
            total = total + left + right + delta / 15
            err += dmax / 15
        else:
            stack.append((m, b0, fm0, fr, fb0, right, tol0 / 2, depth + 1))
            stack.append((a0, m, fa0, fl, fm0, left, tol0 / 2, depth + 1))
    return total, err


@dataclass(frozen=True)
class TransportResult:
    value: complex | np.ndarray
    error: float
    closed: bool

    def __complex__(self):
        return complex(self.value)


def _segment_integral(L: LineBundleCocycle, seg: PathSegment, tol: float):
    coords = L.base.coords(seg.chart)
    comps = L.theta.components[seg.chart]
    chart = L.base.charts[seg.chart]

    def integrand(t):
        x = seg.curve(t)
        if not chart.contains(x).all():
            raise PathError(f"segment leaves chart {seg.chart!r}")
        xd = seg.velocity(t)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for (i,), e in comps.items():
            out += cc.evaluate_expr(e, coords, x) * xd[..., i]
        return out

    return adaptive_simpson(integrand, 0.0, 1.0, tol)


def _junction(L, a, b, x_end, x_start, j, tol=1e-8):
    if a == b:
        mapped = x_end
    else:
        if (a, b) not in L.transitions:
            raise PathError(f"no transition {a}->{b} at junction after segment {j}")
        mapped = L.base.transition_map(a, b, x_end)
    gap = float(np.max(np.abs(mapped - x_start)))
    if gap > tol * max(1.0, float(np.max(np.abs(x_start)))):
        raise PathError(f"junction mismatch after segment {j}: gap {gap:.3e}")
    return L.g(a, b, x_end)


def parallel_transport(L: LineBundleCocycle, path: PiecewisePath, z0=1.0, tol: float = 1e-12) -> TransportResult:
    """Transport z0 along the path; closed loops are reported in the first chart's frame."""
    value = np.asarray(z0, dtype=complex)
    err = 0.0
    segs = path.segments
    for j, seg in enumerate(segs):
        integral, e = _segment_integral(L, seg, tol)
        value = value * np.exp(1j / L.hbar * integral)
        err += e / L.hbar
        if j + 1 < len(segs):
            value = value * _junction(L, seg.chart, segs[j + 1].chart, seg.end(), segs[j + 1].start(), j)
    first, last = segs[0], segs[-1]
    closed = False
    try:
        if last.chart == first.chart or (last.chart, first.chart) in L.transitions:
            g = _junction(L, last.chart, first.chart, last.end(), first.start(), len(segs) - 1)
            closed = True
            if last.chart != first.chart:
                value = value * g
    except PathError:
        closed = False
    if value.ndim == 0:
        value = complex(value)
    return TransportResult(value, err, closed)


def holonomy(L: LineBundleCocycle, loop: PiecewisePath, tol: float = 1e-12) -> complex | np.ndarray:
    res = parallel_transport(L, loop, 1.0, tol)
    if not res.closed:
        raise PathError("holonomy needs a closed loop")
    return res.value


def constant_path(chart: str, point: Sequence[float]) -> PiecewisePath:
    point = np.asarray(point, dtype=float)
    seg = PathSegment(
        chart,
        lambda t: np.broadcast_to(point, np.shape(t) + point.shape).copy(),
        lambda t: np.zeros(np.shape(t) + point.shape),
    )
    return PiecewisePath((seg,))


def cylinder_loop(p, winding: int = 1) -> PiecewisePath:
    """Loop at height p once around the cylinder (chart A then chart B).

    ``p`` may be an array of shape (m, 1) to transport a family of loops at once.
    """
    p = np.asarray(p, dtype=float)
    if winding < 0:
        return cylinder_loop(p, -winding).reversed()
    if winding == 0:
        raise PathError("winding must be nonzero")

    def seg(chart, phi0):
        def curve(t):
            t = np.asarray(t, dtype=float)
            phi = phi0 + np.pi * t
            ph, pp = np.broadcast_arrays(phi, p)
            return np.stack([ph, pp], axis=-1)

        def vel(t):
            t = np.asarray(t, dtype=float)
            ph, pp = np.broadcast_arrays(np.full(t.shape, np.pi), p)
            return np.stack([ph, np.zeros_like(pp)], axis=-1)

        return PathSegment(chart, curve, vel)

    one = (seg("A", np.pi / 2), seg("B", -np.pi / 2))
    return PiecewisePath(one * winding)


def circle_loop(radius: float, chart: str = "N", center=(0.0, 0.0)) -> PiecewisePath:
    """Counterclockwise circle in a 2-d chart."""
    ex = (center[0] + radius * sp.cos(2 * sp.pi * TAU), center[1] + radius * sp.sin(2 * sp.pi * TAU))
    return PiecewisePath((PathSegment.from_exprs(chart, ex),))


# ---------------------------------------------------------------------------
# integrality and Bohr-Sommerfeld


@dataclass(frozen=True)
class WeilResult:
    integral: complex
    integer: int
    nearest: float
    verdict: bool
    quadrature_error: float

    def as_dict(self) -> dict:
        return {"integral_re": self.integral.real, "integral_im": self.integral.imag, "integer": self.integer,
                "nearest": self.nearest, "verdict": self.verdict, "quadrature_error": self.quadrature_error}


def weil_integrality(omega, cycle: cc.TriangulatedCycle, hbar: float, tol: float = 1e-8) -> WeilResult:
    """Check int omega in 2 pi hbar Z; accepts a 2-form or a bundle (uses d theta)."""
    if isinstance(omega, LineBundleCocycle):
        omega = cc.exterior_derivative(omega.theta)
    res = cc.integrate_cycle_with_error(omega, cycle)
    unit = 2 * math.pi * hbar
    k = int(round(res.value.real / unit))
    nearest = k * unit
    ok = abs(res.value - nearest) <= tol
    return WeilResult(res.value, k, nearest, bool(ok), res.error)


@dataclass(frozen=True)
class ScanResult:
    roots: list
    grid_size: int
    max_residual: float


def bohr_sommerfeld_scan(
    L: LineBundleCocycle,
    p_min: float,
    p_max: float,
    resolution: int = 10_000,
    tol: float = 1e-8,
    loop_factory: Callable = cylinder_loop,
) -> ScanResult:
    """All p in [p_min, p_max] where the loop at height p has trivial holonomy.

    The holonomy phase is unwrapped on a uniform grid (all loops transported in
    one vectorized pass) and each crossing of 2 pi Z is refined with brentq.
    """
    ps = np.linspace(p_min, p_max, resolution)
    hol = holonomy(L, loop_factory(ps[:, None]), tol=1e-10)
    turns = np.unwrap(np.angle(hol)) / (2 * np.pi)

    def phase(p):
        return float(np.angle(holonomy(L, loop_factory(p))))

    roots = []
    for j in range(len(ps)):
        if abs(turns[j] - round(turns[j])) < 1e-13 and abs(phase(ps[j])) < 1e-12:
            roots.append(ps[j])
        if j + 1 < len(ps):
            lo, hi = sorted((turns[j], turns[j + 1]))
            k = math.floor(hi)
            if lo < k < hi:
                roots.append(brentq(phase, ps[j], ps[j + 1], xtol=1e-14, rtol=1e-14))
    roots = sorted(roots)
    uniq: list = []
    for r in roots:
        if not uniq or abs(r - uniq[-1]) > 1e-10:
            uniq.append(float(r))
    resid = max((abs(holonomy(L, loop_factory(r)) - 1) for r in uniq), default=0.0)
    kept = [r for r in uniq if abs(holonomy(L, loop_factory(r)) - 1) <= tol]
    return ScanResult(kept, resolution, float(resid))
