"""Chart-based exterior calculus on the model phase spaces.

Forms are stored per chart as sympy expressions indexed by strictly increasing
index tuples; the coefficient of ``dx^{i1} ^ ... ^ dx^{ip}`` with sorted
indices equals the tensor component ``omega_{i1...ip}``. With this
normalization the wedge product carries the usual binomial factor,
``(omega ^ tau)_{ij} = omega_i tau_j - omega_j tau_i`` for 1-forms, and
``d`` has components ``(p+1) d_[i0 omega_i1...ip]`` with the bracket dividing by
the number of permutations.

Hamiltonian convention (shared with :mod:`geoquant.weylalg`)::

    iota_{X_f} omega = -df,    {f, g} = omega(X_f, X_g) = X_f(g)

so on R^2 with omega = dp ^ dq: X_q = -d/dp, X_p = d/dq, {q, p} = -1.

Coefficients given as plain Python callables are wrapped by
:func:`numeric_function`, whose derivatives are 4th-order central differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import sympy as sp
from scipy.stats import qmc

SEED = 20240601
DEFAULT_SAMPLES = 200
FD_STEP = 1e-5

S, T = sp.symbols("s t", real=True)


class GeometryError(ValueError):
    pass


class DegenerateFormError(GeometryError):
    pass


class ChartEscapeError(GeometryError):
    pass


class EvaluationError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# numerical coefficient functions

_counter = itertools.count()


def _fd_partial(fn: Callable, index: int, h: float) -> Callable:
    def d(*xs):
        xs = [np.asarray(x, dtype=float) for x in xs]

        def shifted(delta):
            ys = list(xs)
            ys[index] = xs[index] + delta
            return np.asarray(fn(*ys))

        return (-shifted(2 * h) + 8 * shifted(h) - 8 * shifted(-h) + shifted(-2 * h)) / (12 * h)

    return d


def numeric_function(fn: Callable, nargs: int, h: float = FD_STEP, name: str = "F"):
    """Wrap a vectorized callable as a sympy function class.

    Calling the returned class on coordinate symbols gives an expression that
    lambdifies to ``fn`` and differentiates by finite differences with step ``h``.
    """
    uid = next(_counter)

    def fdiff(self, argindex=1):
        deriv = numeric_function(_fd_partial(fn, argindex - 1, h), nargs, h, f"{name}_{argindex}")
        return deriv(*self.args)

    return type(f"{name}_{uid}", (sp.Function,), {"nargs": nargs, "_imp_": staticmethod(fn), "fdiff": fdiff})


@lru_cache(maxsize=4096)
def _lambdify(expr: sp.Expr, coords: tuple) -> Callable:
    return sp.lambdify(coords, expr, modules="numpy")


def evaluate_expr(expr, coords: Sequence[sp.Symbol], points: np.ndarray) -> np.ndarray:
    """Evaluate a sympy expression at points of shape (..., dim); complex result."""
    points = np.asarray(points, dtype=float)
    expr = sp.sympify(expr)
    shape = points.shape[:-1]
    if expr.is_number:
        return np.full(shape, complex(expr), dtype=complex)
    f = _lambdify(expr, tuple(coords))
    with np.errstate(all="ignore"):
        val = f(*[points[..., i] for i in range(points.shape[-1])])
    return np.broadcast_to(np.asarray(val, dtype=complex), shape).copy()


def _check_finite(values: np.ndarray, points: np.ndarray, label: str, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        pt = points[tuple(idx)]
        raise EvaluationError(f"{what} not finite at point {pt.tolist()} of chart {label!r}")


def sample_points(box: Sequence[tuple[float, float]], count: int = DEFAULT_SAMPLES, seed: int = SEED) -> np.ndarray:
    """Deterministic scrambled Halton points in an axis-aligned box."""
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    u = qmc.Halton(d=len(box), scramble=True, seed=seed).random(count)
    return lo + u * (hi - lo)


# ---------------------------------------------------------------------------
# index bookkeeping


def sort_with_sign(idx: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sorted tuple and the sign of the sorting permutation (0 on repeats)."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return tuple(sorted(idx)), 0
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return tuple(sorted(idx)), sign


def _accumulate(comps: dict, key: tuple, value) -> None:
    comps[key] = comps.get(key, sp.Integer(0)) + value


def _prune(comps: Mapping) -> dict:
    return {k: v for k, v in comps.items() if not (v == 0)}


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class Chart:
    label: str
    coords: tuple
    box: tuple  # sampling box, one (lo, hi) per coordinate
    domain: Callable[[np.ndarray], np.ndarray] | None = None
    description: str = ""

    @property
    def dim(self) -> int:
        return len(self.coords)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        ok = np.all(np.isfinite(points), axis=-1)
        if self.domain is not None:
            ok &= np.asarray(self.domain(points), dtype=bool)
        return ok


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    exprs: tuple  # target coordinates as expressions in the source coordinates
    domain: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class ComplexChartStructure:
    """Pairs (re_index, im_index) of real coordinates forming z_k per chart."""

    pairs: Mapping[str, tuple]

    def J(self, label: str, dim: int) -> np.ndarray:
        J = np.zeros((dim, dim))
        for x, y in self.pairs[label]:
            # J d/dx = d/dy, J d/dy = -d/dx
            J[y, x] = 1.0
            J[x, y] = -1.0
        return J


class ChartedSpace:
    """An atlas of named charts with symbolic transition maps."""

    def __init__(
        self,
        dimension: int,
        charts: Sequence[Chart],
        transitions: Iterable[Transition] = (),
        complex_structure: ComplexChartStructure | None = None,
        name: str = "",
    ):
        self.dimension = dimension
        self.name = name
        self.charts = MappingProxyType({c.label: c for c in charts})
        for c in charts:
            if c.dim != dimension:
                raise GeometryError(f"chart {c.label!r} has {c.dim} coordinates, expected {dimension}")
        trans = {}
        for t in transitions:
            if len(t.exprs) != dimension:
                raise GeometryError(f"transition {t.source}->{t.target} has wrong arity")
            trans[(t.source, t.target)] = t
        self.transitions = MappingProxyType(trans)
        self.complex_structure = complex_structure
        self.forms: Mapping[str, "ChartForm"] = MappingProxyType({})

    def _install_forms(self, forms: Mapping[str, "ChartForm"]) -> None:
        self.forms = MappingProxyType(dict(forms))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.charts)

    def coords(self, label: str) -> tuple:
        return self.charts[label].coords

    def transition_map(self, a: str, b: str, points: np.ndarray) -> np.ndarray:
        if a == b:
            return np.asarray(points, dtype=float).copy()
        t = self.transitions[(a, b)]
        cs = self.coords(a)
        return np.stack([evaluate_expr(e, cs, points).real for e in t.exprs], axis=-1)

    def transition_jacobian_exprs(self, a: str, b: str) -> sp.Matrix:
        t = self.transitions[(a, b)]
        return sp.Matrix(t.exprs).jacobian(sp.Matrix(self.coords(a)))

    def transition_jacobian(self, a: str, b: str, points: np.ndarray) -> np.ndarray:
        Jx = self.transition_jacobian_exprs(a, b)
        cs = self.coords(a)
        d = self.dimension
        out = np.empty(np.shape(points)[:-1] + (d, d))
        for i in range(d):
            for j in range(d):
                out[..., i, j] = evaluate_expr(Jx[i, j], cs, points).real
        return out

    def in_overlap(self, a: str, b: str, points: np.ndarray) -> np.ndarray:
        ok = self.charts[a].contains(points)
        if a != b:
            t = self.transitions.get((a, b))
            if t is None:
                return np.zeros(ok.shape, dtype=bool)
            if t.domain is not None:
                ok &= np.asarray(t.domain(points), dtype=bool)
            img = self.transition_map(a, b, np.where(ok[..., None], points, 0.0))
            ok &= self.charts[b].contains(img)
        return ok

    def sample(self, label: str, count: int = DEFAULT_SAMPLES, seed: int = SEED) -> np.ndarray:
        pts = sample_points(self.charts[label].box, 4 * count, seed)
        pts = pts[self.charts[label].contains(pts)]
        return pts[:count]

    def sample_overlap(self, a: str, b: str, count: int = DEFAULT_SAMPLES, seed: int = SEED) -> np.ndarray:
        pts = sample_points(self.charts[a].box, 8 * count, seed)
        pts = pts[self.in_overlap(a, b, pts)]
        return pts[:count]

    def check_transitions(self, count: int = DEFAULT_SAMPLES) -> dict:
        """Max residuals of inverse pairs and triple-overlap cocycles at sampled points."""
        inverse = 0.0
        cocycle = 0.0
        for (a, b) in self.transitions:
            if (b, a) not in self.transitions:
                continue
            x = self.sample_overlap(a, b, count)
            if len(x):
                back = self.transition_map(b, a, self.transition_map(a, b, x))
                inverse = max(inverse, float(np.max(np.abs(back - x))))
        for a, b, c in itertools.permutations(self.labels, 3):
            if {(a, b), (b, c), (a, c)} <= set(self.transitions):
                x = self.sample_overlap(a, b, count)
                y = self.transition_map(a, b, x)
                keep = self.in_overlap(b, c, y) & self.in_overlap(a, c, x)
                if keep.any():
                    two = self.transition_map(b, c, y[keep])
                    one = self.transition_map(a, c, x[keep])
                    cocycle = max(cocycle, float(np.max(np.abs(two - one))))
        return {"inverse": inverse, "cocycle": cocycle}

    def check_complex_structure(self, count: int = DEFAULT_SAMPLES) -> dict:
        """J^2 + 1 and Cauchy-Riemann residuals of the transition maps."""
        cs = self.complex_structure
        if cs is None:
            raise GeometryError("space carries no complex structure")
        d = self.dimension
        j2 = 0.0
        for label in self.labels:
            J = cs.J(label, d)
            j2 = max(j2, float(np.max(np.abs(J @ J + np.eye(d)))))
        cr = 0.0
        for (a, b) in self.transitions:
            x = self.sample_overlap(a, b, count)
            if not len(x):
                continue
            Jac = self.transition_jacobian(a, b, x)
            # holomorphic iff Jac commutes with J
            Ja, Jb = cs.J(a, d), cs.J(b, d)
            cr = max(cr, float(np.max(np.abs(Jac @ Ja - Jb @ Jac))))
        return {"J_squared": j2, "cauchy_riemann": cr}


# ---------------------------------------------------------------------------
# forms and vector fields


def _as_expr(value, coords) -> sp.Expr:
    if callable(value) and not isinstance(value, sp.Basic):
        return numeric_function(value, len(coords))(*coords)
    return sp.sympify(value)


class ChartForm:
    """A differential p-form given per chart by its sorted-index components."""

    def __init__(self, space: ChartedSpace, degree: int, components: Mapping[str, Mapping], guards=None):
        self.space = space
        self.degree = degree
        comps = {}
        for label, cdict in components.items():
            if label not in space.charts:
                raise GeometryError(f"unknown chart {label!r}")
            coords = space.coords(label)
            out: dict = {}
            for idx, val in cdict.items():
                idx = (idx,) if isinstance(idx, int) else tuple(idx)
                if len(idx) != degree or any(not 0 <= i < space.dimension for i in idx):
                    raise GeometryError(f"bad index {idx} for a {degree}-form")
                key, sign = sort_with_sign(idx)
                if sign:
                    _accumulate(out, key, sign * _as_expr(val, coords))
            comps[label] = MappingProxyType(_prune(out))
        self.components = MappingProxyType(comps)
        self.guards = MappingProxyType(dict(guards or {}))

    @classmethod
    def scalar(cls, space: ChartedSpace, values) -> "ChartForm":
        """0-form from an expression (single-chart spaces) or a per-chart mapping."""
        if not isinstance(values, Mapping):
            values = {label: values for label in space.labels}
        return cls(space, 0, {k: {(): v} for k, v in values.items()})

    @classmethod
    def zero(cls, space: ChartedSpace, degree: int) -> "ChartForm":
        return cls(space, degree, {label: {} for label in space.labels})

    def labels(self) -> tuple:
        return tuple(self.components)

    def coefficient(self, label: str, idx: Sequence[int]) -> sp.Expr:
        key, sign = sort_with_sign(idx)
        if not sign:
            return sp.Integer(0)
        return sign * self.components[label].get(key, sp.Integer(0))

    def scalar_expr(self, label: str) -> sp.Expr:
        if self.degree:
            raise GeometryError("not a 0-form")
        return self.components[label].get((), sp.Integer(0))

    def _combine(self, other: "ChartForm", op) -> "ChartForm":
        if other.space is not self.space or other.degree != self.degree:
            raise GeometryError("forms live on different spaces or degrees")
        comps = {}
        for label in self.components:
            if label not in other.components:
                continue
            keys = set(self.components[label]) | set(other.components[label])
            comps[label] = {
                k: op(self.components[label].get(k, sp.Integer(0)), other.components[label].get(k, sp.Integer(0)))
                for k in keys
            }
        return ChartForm(self.space, self.degree, comps)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __neg__(self):
        return self * -1

    def __mul__(self, c):
        c = sp.sympify(c)
        return ChartForm(
            self.space, self.degree, {lab: {k: c * v for k, v in comp.items()} for lab, comp in self.components.items()}
        )

    __rmul__ = __mul__

    def evaluate(self, label: str, points: np.ndarray) -> dict:
        """Component values at points (..., dim); guards are checked first."""
        points = np.asarray(points, dtype=float)
        coords = self.space.coords(label)
        if label in self.guards:
            g = evaluate_expr(self.guards[label], coords, points)
            scale = max(1.0, float(np.max(np.abs(g)))) if g.size else 1.0
            bad = np.abs(g) <= 1e-12 * scale
            if bad.any():
                pt = points[tuple(np.argwhere(bad)[0])]
                raise DegenerateFormError(f"2-form degenerate at point {pt.tolist()} of chart {label!r}")
        out = {}
        for k, e in self.components[label].items():
            v = evaluate_expr(e, coords, points)
            _check_finite(v, points, label, f"coefficient {k}")
            out[k] = v
        return out

    def tensor(self, label: str, points: np.ndarray) -> np.ndarray:
        """Fully antisymmetric component array of shape (..., dim, ..., dim)."""
        points = np.asarray(points, dtype=float)
        d, p = self.space.dimension, self.degree
        out = np.zeros(points.shape[:-1] + (d,) * p, dtype=complex)
        for key, val in self.evaluate(label, points).items():
            for perm in itertools.permutations(range(p)):
                idx = tuple(key[i] for i in perm)
                _, sign = sort_with_sign(perm)
                out[(...,) + idx] = sign * val
        return out

    def __repr__(self):
        body = {lab: {k: str(v) for k, v in comp.items()} for lab, comp in self.components.items()}
        return f"ChartForm(degree={self.degree}, {body})"


class ChartVectorField:
    """Per-chart contravariant components."""

    def __init__(self, space: ChartedSpace, components: Mapping[str, Sequence], guards=None):
        self.space = space
        comps = {}
        for label, vals in components.items():
            coords = space.coords(label)
            vals = tuple(_as_expr(v, coords) for v in vals)
            if len(vals) != space.dimension:
                raise GeometryError("vector field has wrong number of components")
            comps[label] = vals
        self.components = MappingProxyType(comps)
        self.guards = MappingProxyType(dict(guards or {}))

    @classmethod
    def coordinate(cls, space: ChartedSpace, index: int) -> "ChartVectorField":
        comps = {lab: [1 if i == index else 0 for i in range(space.dimension)] for lab in space.labels}
        return cls(space, comps)

    def labels(self) -> tuple:
        return tuple(self.components)

    def apply(self, f: ChartForm) -> ChartForm:
        """Directional derivative v(f) of a 0-form."""
        comps = {}
        for label, v in self.components.items():
            expr = f.scalar_expr(label)
            coords = self.space.coords(label)
            comps[label] = {(): sum((v[i] * sp.diff(expr, coords[i]) for i in range(len(coords))), sp.Integer(0))}
        return ChartForm(self.space, 0, comps)

    def __add__(self, other):
        return ChartVectorField(
            self.space, {lab: [a + b for a, b in zip(self.components[lab], other.components[lab])] for lab in self.components}
        )

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, c):
        return ChartVectorField(self.space, {lab: [c * a for a in v] for lab, v in self.components.items()})

    __rmul__ = __mul__

    def evaluate(self, label: str, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        coords = self.space.coords(label)
        if label in self.guards:
            g = evaluate_expr(self.guards[label], coords, points)
            bad = np.abs(g) <= 1e-12 * max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
            if bad.any():
                pt = points[tuple(np.argwhere(bad)[0])]
                raise DegenerateFormError(f"2-form degenerate at point {pt.tolist()} of chart {label!r}")
        vals = np.stack([evaluate_expr(e, coords, points) for e in self.components[label]], axis=-1)
        _check_finite(vals, points, label, "vector field")
        return vals


# ---------------------------------------------------------------------------
# operations


def exterior_derivative(omega: ChartForm) -> ChartForm:
    """(d omega)_K = sum over i in K of sign * d_i omega_{K - i}."""
    space = omega.space
    comps = {}
    for label, comp in omega.components.items():
        coords = space.coords(label)
        out: dict = {}
        for idx, val in comp.items():
            for i in range(space.dimension):
                if i in idx:
                    continue
                key, sign = sort_with_sign((i,) + idx)
                _accumulate(out, key, sign * sp.diff(val, coords[i]))
        comps[label] = out
    return ChartForm(space, omega.degree + 1, comps)


def wedge(omega: ChartForm, tau: ChartForm) -> ChartForm:
    if omega.space is not tau.space:
        raise GeometryError("forms live on different spaces")
    comps = {}
    for label in omega.components:
        if label not in tau.components:
            continue
        out: dict = {}
        for i1, v1 in omega.components[label].items():
            for i2, v2 in tau.components[label].items():
                key, sign = sort_with_sign(i1 + i2)
                if sign:
                    _accumulate(out, key, sign * v1 * v2)
        comps[label] = out
    return ChartForm(omega.space, omega.degree + tau.degree, comps)


def interior_product(v: ChartVectorField, omega: ChartForm) -> ChartForm:
    """(iota_v omega)_J = v^i omega_{iJ}."""
    if omega.degree == 0:
        raise GeometryError("cannot contract a scalar")
    comps = {}
    for label, comp in omega.components.items():
        if label not in v.components:
            continue
        vec = v.components[label]
        out: dict = {}
        for idx, val in comp.items():
            for r, i in enumerate(idx):
                rest = idx[:r] + idx[r + 1 :]
                _accumulate(out, rest, (-1) ** r * vec[i] * val)
        comps[label] = out
    guards = {**omega.guards, **v.guards}
    return ChartForm(omega.space, omega.degree - 1, comps, guards)


def lie_derivative(v: ChartVectorField, omega: ChartForm) -> ChartForm:
    """Coordinate formula (L_v omega)_J = v^i d_i omega_J + sum_s d_{j_s} v^i omega_{j_1..i..j_p}."""
    space = omega.space
    d, p = space.dimension, omega.degree
    comps = {}
    for label in omega.components:
        coords = space.coords(label)
        vec = v.components[label]
        out: dict = {}
        for J in itertools.combinations(range(d), p):
            val = sum((vec[i] * sp.diff(omega.coefficient(label, J), coords[i]) for i in range(d)), sp.Integer(0))
            for s in range(p):
                for i in range(d):
                    Ji = J[:s] + (i,) + J[s + 1 :]
                    val += sp.diff(vec[i], coords[J[s]]) * omega.coefficient(label, Ji)
            out[J] = val
        comps[label] = out
    return ChartForm(space, p, comps)


def cartan_formula(v: ChartVectorField, omega: ChartForm) -> ChartForm:
    """d iota_v omega + iota_v d omega (0-forms: iota_v d omega only)."""
    rhs = interior_product(v, exterior_derivative(omega))
    if omega.degree:
        rhs = rhs + exterior_derivative(interior_product(v, omega))
    return rhs


def lie_bracket(X: ChartVectorField, Y: ChartVectorField) -> ChartVectorField:
    space = X.space
    comps = {}
    for label in X.components:
        coords = space.coords(label)
        x, y = X.components[label], Y.components[label]
        comps[label] = [
            sum((x[j] * sp.diff(y[i], coords[j]) - y[j] * sp.diff(x[i], coords[j]) for j in range(len(coords))), 0)
            for i in range(len(coords))
        ]
    return ChartVectorField(space, comps, {**X.guards, **Y.guards})


def _omega_matrix(omega: ChartForm, label: str) -> sp.Matrix:
    d = omega.space.dimension
    return sp.Matrix(d, d, lambda i, j: omega.coefficient(label, (i, j)))


def hamiltonian_vector_field(f: ChartForm, omega: ChartForm) -> ChartVectorField:
    """Solve iota_X omega = -df, i.e. X = Omega^{-1} grad f with Omega_ij = omega_ij."""
    if omega.degree != 2 or f.degree != 0:
        raise GeometryError("need a 0-form and a 2-form")
    comps, guards = {}, {}
    for label in omega.components:
        coords = omega.space.coords(label)
        Om = _omega_matrix(omega, label)
        det = sp.factor(Om.det())
        if det == 0:
            raise DegenerateFormError(f"2-form is identically degenerate on chart {label!r}")
        inv = Om.adjugate() / det
        grad = sp.Matrix([sp.diff(f.scalar_expr(label), c) for c in coords])
        comps[label] = list(inv * grad)
        guards[label] = det
    return ChartVectorField(omega.space, comps, guards)


def poisson_bracket(f: ChartForm, g: ChartForm, omega: ChartForm) -> ChartForm:
    """{f, g} = omega(X_f, X_g) = X_f(g)."""
    X = hamiltonian_vector_field(f, omega)
    out = X.apply(g)
    return ChartForm(out.space, 0, out.components, X.guards)


# ---------------------------------------------------------------------------
# complex structure


def _complex_frame(space: ChartedSpace, label: str):
    cs = space.complex_structure
    if cs is None:
        raise GeometryError("space carries no complex structure")
    pairs = cs.pairs[label]
    d = space.dimension
    m = len(pairs)
    if 2 * m != d:
        raise GeometryError("complex structure must pair every coordinate")
    # real coframe in terms of (dz_1..dz_m, dzbar_1..dzbar_m) and back
    N = sp.zeros(d, d)
    M = sp.zeros(d, d)
    for k, (x, y) in enumerate(pairs):
        N[x, k], N[x, m + k] = sp.Rational(1, 2), sp.Rational(1, 2)
        N[y, k], N[y, m + k] = -sp.I / 2, sp.I / 2
        M[k, x], M[k, y] = 1, sp.I
        M[m + k, x], M[m + k, y] = 1, -sp.I
    return pairs, N, M


def _change_frame(comp: Mapping, p: int, d: int, N: sp.Matrix) -> dict:
    out: dict = {}
    for I_, val in comp.items():
        for A in itertools.combinations(range(d), p):
            minor = N.extract(list(I_), list(A)).det() if p else sp.Integer(1)
            if minor != 0:
                _accumulate(out, A, val * minor)
    return out


def to_complex_frame(omega: ChartForm, label: str) -> dict:
    """Components in the coframe (dz_1..dz_m, dzbar_1..dzbar_m)."""
    _, N, _ = _complex_frame(omega.space, label)
    return _prune(_change_frame(omega.components[label], omega.degree, omega.space.dimension, N))


def dolbeault(omega: ChartForm, which: str) -> ChartForm:
    """The operator del ('del') or delbar ('delbar')."""
    if which not in ("del", "delbar"):
        raise ValueError("which must be 'del' or 'delbar'")
    space = omega.space
    d = space.dimension
    comps = {}
    for label in omega.components:
        pairs, N, M = _complex_frame(space, label)
        m = len(pairs)
        coords = space.coords(label)
        cplx = _change_frame(omega.components[label], omega.degree, d, N)
        out: dict = {}
        for A, val in cplx.items():
            for k, (x, y) in enumerate(pairs):
                if which == "del":
                    a, deriv = k, (sp.diff(val, coords[x]) - sp.I * sp.diff(val, coords[y])) / 2
                else:
                    a, deriv = m + k, (sp.diff(val, coords[x]) + sp.I * sp.diff(val, coords[y])) / 2
                key, sign = sort_with_sign((a,) + A)
                if sign:
                    _accumulate(out, key, sign * deriv)
        comps[label] = _change_frame(out, omega.degree + 1, d, M)
    return ChartForm(space, omega.degree + 1, comps)


def kahler_form_from_potential(f: ChartForm) -> ChartForm:
    """omega = (i/2) del delbar f."""
    return dolbeault(dolbeault(f, "delbar"), "del") * (sp.I / 2)


# ---------------------------------------------------------------------------
# pullback and covariance


def pullback_components(omega: ChartForm, source: str, target: str) -> dict:
    """Components in the source chart of the form given on the target chart."""
    space = omega.space
    t = space.transitions[(source, target)]
    coords_s, coords_t = space.coords(source), space.coords(target)
    sub = dict(zip(coords_t, t.exprs))
    Jac = space.transition_jacobian_exprs(source, target)
    p, d = omega.degree, space.dimension
    out: dict = {}
    for Jidx, val in omega.components[target].items():
        moved = val.xreplace(sub)
        for I_ in itertools.combinations(range(d), p):
            minor = Jac.extract(list(Jidx), list(I_)).det() if p else sp.Integer(1)
            if minor != 0:
                _accumulate(out, I_, moved * minor)
    return out


def form_covariance_residual(omega: ChartForm, count: int = DEFAULT_SAMPLES) -> float:
    """Max mismatch between a chart's components and the pullback of its neighbour's."""
    space = omega.space
    worst = 0.0
    for (a, b) in space.transitions:
        if a not in omega.components or b not in omega.components:
            continue
        x = space.sample_overlap(a, b, count)
        if not len(x):
            continue
        pulled = pullback_components(omega, a, b)
        coords = space.coords(a)
        for I_ in itertools.combinations(range(space.dimension), omega.degree):
            own = evaluate_expr(omega.components[a].get(I_, 0), coords, x)
            other = evaluate_expr(pulled.get(I_, 0), coords, x)
            worst = max(worst, float(np.max(np.abs(own - other))))
    return worst


def vector_covariance_residual(v: ChartVectorField, count: int = DEFAULT_SAMPLES) -> float:
    space = v.space
    worst = 0.0
    for (a, b) in space.transitions:
        if a not in v.components or b not in v.components:
            continue
        x = space.sample_overlap(a, b, count)
        if not len(x):
            continue
        Jac = space.transition_jacobian(a, b, x)
        va = v.evaluate(a, x)
        vb = v.evaluate(b, space.transition_map(a, b, x))
        worst = max(worst, float(np.max(np.abs(np.einsum("...ij,...j->...i", Jac, va) - vb))))
    return worst


def max_abs(omega: ChartForm, count: int = DEFAULT_SAMPLES, points: Mapping[str, np.ndarray] | None = None) -> float:
    """Largest coefficient magnitude over sampled points of every chart."""
    worst = 0.0
    for label in omega.components:
        x = points[label] if points is not None else omega.space.sample(label, count)
        for val in omega.evaluate(label, x).values():
            if val.size:
                worst = max(worst, float(np.max(np.abs(val))))
    return worst


def vector_max_abs(v: ChartVectorField, count: int = DEFAULT_SAMPLES, points=None) -> float:
    worst = 0.0
    for label in v.components:
        x = points[label] if points is not None else v.space.sample(label, count)
        vals = v.evaluate(label, x)
        if vals.size:
            worst = max(worst, float(np.max(np.abs(vals))))
    return worst


# ---------------------------------------------------------------------------
# model spaces


def euclidean_space(n: int = 1, box: float = 2.0) -> ChartedSpace:
    """R^{2n} with coordinates (q_1..q_n, p_1..p_n) and z_k = q_k + i p_k."""
    if n == 1:
        coords = sp.symbols("q p", real=True)
    else:
        coords = sp.symbols(" ".join([f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]), real=True)
    chart = Chart("R", tuple(coords), tuple((-box, box) for _ in coords), None, "global chart")
    cs = ComplexChartStructure({"R": tuple((k, n + k) for k in range(n))})
    return ChartedSpace(2 * n, [chart], (), cs, name=f"R^{2 * n}")


def real_space(dim: int, box: float = 2.0, names: str | None = None) -> ChartedSpace:
    coords = sp.symbols(names or " ".join(f"x{i + 1}" for i in range(dim)), real=True)
    coords = tuple(coords) if dim > 1 else (coords,) if isinstance(coords, sp.Symbol) else tuple(coords)
    chart = Chart("R", coords, tuple((-box, box) for _ in coords), None, "global chart")
    return ChartedSpace(dim, [chart], (), None, name=f"R^{dim}")


def standard_symplectic_form(space: ChartedSpace) -> ChartForm:
    """sum_i dp_i ^ dq_i on R^{2n} in (q, p) ordering."""
    n = space.dimension // 2
    return ChartForm(space, 2, {"R": {(n + i, i): 1 for i in range(n)}})


def cylinder_space(p_box: float = 4.0) -> ChartedSpace:
    """T*S^1 with coordinates (phi, p); two angle charts A: (0, 2pi) and B: (-pi, pi)."""
    phiA, pA = sp.symbols("phi_A p_A", real=True)
    phiB, pB = sp.symbols("phi_B p_B", real=True)
    eps = 1e-9
    A = Chart(
        "A", (phiA, pA), ((1e-3, 2 * np.pi - 1e-3), (-p_box, p_box)),
        lambda x: (x[..., 0] > 0) & (x[..., 0] < 2 * np.pi), "angle in (0, 2pi)",
    )
    B = Chart(
        "B", (phiB, pB), ((-np.pi + 1e-3, np.pi - 1e-3), (-p_box, p_box)),
        lambda x: (x[..., 0] > -np.pi) & (x[..., 0] < np.pi), "angle in (-pi, pi)",
    )
    AB = Transition(
        "A", "B", (sp.Piecewise((phiA, phiA < sp.pi), (phiA - 2 * sp.pi, True)), pA),
        lambda x: np.abs(x[..., 0] - np.pi) > eps,
    )
    BA = Transition(
        "B", "A", (sp.Piecewise((phiB, phiB > 0), (phiB + 2 * sp.pi, True)), pB),
        lambda x: np.abs(x[..., 0]) > eps,
    )
    return ChartedSpace(2, [A, B], [AB, BA], None, name="cylinder")


def cylinder_symplectic_form(space: ChartedSpace) -> ChartForm:
    """dp ^ dphi in both charts."""
    return ChartForm(space, 2, {"A": {(1, 0): 1}, "B": {(1, 0): 1}})


def stereographic_north(X: np.ndarray) -> np.ndarray:
    """Projection of S^n minus the north pole from (x_1..x_{n+1}) to R^n."""
    X = np.asarray(X, dtype=float)
    return X[..., :-1] / (1.0 - X[..., -1:])


def stereographic_south(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[..., :-1] / (1.0 + X[..., -1:])


def sphere_complex_coordinates(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """z = (x1 + i x2)/(1 - x3) on U_N and w = (x1 - i x2)/(1 + x3) on U_S."""
    X = np.asarray(X, dtype=float)
    z = (X[..., 0] + 1j * X[..., 1]) / (1.0 - X[..., 2])
    w = (X[..., 0] - 1j * X[..., 1]) / (1.0 + X[..., 2])
    return z, w


def inverse_stereographic_north(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    r2 = np.abs(z) ** 2
    return np.stack([2 * z.real, 2 * z.imag, r2 - 1], axis=-1) / (1 + r2)[..., None]


def build_sphere_atlas(box: float = 3.0) -> ChartedSpace:
    """S^2 with charts N (z = x + i y) and S (w = u + i v), w = 1/z on the overlap.

    The normalized Fubini-Study form omega_0 = (1/pi) dx^dy/(1+|z|^2)^2 is
    installed as ``space.forms['fubini_study']`` and integrates to 1.
    """
    x, y = sp.symbols("x y", real=True)
    u, v = sp.symbols("u v", real=True)
    N = Chart("N", (x, y), ((-box, box), (-box, box)), None, "S^2 minus north pole, z = x + i y")
    Sc = Chart("S", (u, v), ((-box, box), (-box, box)), None, "S^2 minus south pole, w = u + i v")
    r2 = x**2 + y**2
    s2 = u**2 + v**2
    NS = Transition("N", "S", (x / r2, -y / r2), lambda p: np.hypot(p[..., 0], p[..., 1]) > 1e-3)
    SN = Transition("S", "N", (u / s2, -v / s2), lambda p: np.hypot(p[..., 0], p[..., 1]) > 1e-3)
    cs = ComplexChartStructure({"N": ((0, 1),), "S": ((0, 1),)})
    space = ChartedSpace(2, [N, Sc], [NS, SN], cs, name="S^2")
    fs = ChartForm(space, 2, {"N": {(0, 1): 1 / (sp.pi * (1 + r2) ** 2)}, "S": {(0, 1): 1 / (sp.pi * (1 + s2) ** 2)}})
    space._install_forms({"fubini_study": fs})
    return space


def fubini_study_form(space: ChartedSpace | None = None) -> ChartForm:
    space = space or build_sphere_atlas()
    return space.forms["fubini_study"]


def fubini_study_potential(space: ChartedSpace) -> ChartForm:
    """f_N = (1/pi) log(1 + |z|^2) on U_N (and the same expression in w on U_S)."""
    x, y = space.coords("N")
    u, v = space.coords("S")
    return ChartForm.scalar(space, {"N": sp.log(1 + x**2 + y**2) / sp.pi, "S": sp.log(1 + u**2 + v**2) / sp.pi})


# ---------------------------------------------------------------------------
# triangulated cycles and integration

# degree-7 symmetric rule on the triangle (13 points, barycentric, weights sum to 1)
_RULE7 = [
    ((1 / 3, 1 / 3, 1 / 3), -0.149570044467682),
    ((0.260345966079040, 0.260345966079040, 0.479308067841920), 0.175615257433208),
    ((0.065130102902216, 0.065130102902216, 0.869739794195568), 0.053347235608838),
    ((0.048690315425316, 0.312865496004874, 0.638444188569810), 0.077113760890257),
]


def _expand_rule(rule) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = [], []
    for bary, w in rule:
        for perm in sorted(set(itertools.permutations(bary))):
            pts.append(perm)
            wts.append(w)
    return np.array(pts), np.array(wts)


RULE7_BARY, RULE7_WEIGHTS = _expand_rule(_RULE7)


def triangle_rule(order: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (s, t) on the reference triangle and weights summing to 1/2."""
    if order == 7:
        bary, w = RULE7_BARY, RULE7_WEIGHTS
    elif order == 1:
        bary, w = np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    else:
        raise ValueError("available orders: 1, 7")
    return bary[:, 1:].copy(), w / 2


@lru_cache(maxsize=16)
def _subdivided_rule(level: int, order: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on the reference triangle split into 4**level pieces."""
    nodes, weights = triangle_rule(order)
    m = 2**level
    h = 1.0 / m
    all_nodes, all_w = [], []
    for i in range(m):
        for j in range(m - i):
            v0 = np.array([i * h, j * h])
            # upward triangle
            pts = v0 + nodes * h
            all_nodes.append(pts)
            all_w.append(weights * h * h)
            if i + j < m - 1:
                # downward triangle with vertices (i+1,j+1), (i,j+1), (i+1,j)
                w0 = np.array([(i + 1) * h, (j + 1) * h])
                pts = w0 - nodes * h
                all_nodes.append(pts)
                all_w.append(weights * h * h)
    return np.concatenate(all_nodes), np.concatenate(all_w)


@dataclass(frozen=True)
class Triangle:
    """Map (s, t) -> chart coordinates on the simplex s, t >= 0, s + t <= 1."""

    chart: str
    exprs: tuple
    orientation: int = 1

    def point(self, st: np.ndarray) -> np.ndarray:
        st = np.asarray(st, dtype=float)
        return np.stack([evaluate_expr(e, (S, T), st).real for e in self.exprs], axis=-1)

    def jacobian(self, st: np.ndarray) -> np.ndarray:
        st = np.asarray(st, dtype=float)
        cols = []
        for e in self.exprs:
            cols.append(
                np.stack([evaluate_expr(sp.diff(e, S), (S, T), st).real, evaluate_expr(sp.diff(e, T), (S, T), st).real], -1)
            )
        return np.stack(cols, axis=-2)  # (..., dim, 2)


_EDGE_T = np.linspace(0.1, 0.9, 9)


def _edge_points(tri: Triangle, k: int) -> np.ndarray:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    a, b = verts[k], verts[(k + 1) % 3]
    if tri.orientation < 0:
        a, b = b, a
    st = a + _EDGE_T[:, None] * (b - a)
    return tri.point(st)


@dataclass(frozen=True)
class TriangulatedCycle:
    space: ChartedSpace
    triangles: tuple

    def edge_mismatch(self) -> float:
        """Worst distance from each edge to its best reversed partner edge."""
        edges = [(ti, tri, _edge_points(tri, k)) for ti, tri in enumerate(self.triangles) for k in range(3)]
        worst = 0.0
        for ti, tri, pts in edges:
            best = np.inf
            for tj, other, opts in edges:
                if tj == ti:
                    continue
                rev = opts[::-1]
                if other.chart != tri.chart:
                    if (other.chart, tri.chart) not in self.space.transitions:
                        continue
                    if not self.space.in_overlap(other.chart, tri.chart, rev).all():
                        continue
                    rev = self.space.transition_map(other.chart, tri.chart, rev)
                best = min(best, float(np.max(np.abs(rev - pts))))
            worst = max(worst, best)
        return worst

    def is_closed(self, tol: float = 1e-9) -> bool:
        return self.edge_mismatch() <= tol


@dataclass(frozen=True)
class IntegrationResult:
    value: complex
    error: float
    level: int


def _triangle_integral(omega: ChartForm, tri: Triangle, level: int, index: int) -> complex:
    space = omega.space
    st, w = _subdivided_rule(level)
    X = tri.point(st)
    chart = space.charts[tri.chart]
    if not chart.contains(X).all():
        raise ChartEscapeError(f"triangle {index} leaves chart {tri.chart!r}")
    Jst = tri.jacobian(st)
    comps = omega.evaluate(tri.chart, X)
    integrand = np.zeros(len(w), dtype=complex)
    for (i, j), val in comps.items():
        integrand += val * (Jst[:, i, 0] * Jst[:, j, 1] - Jst[:, j, 0] * Jst[:, i, 1])
    return tri.orientation * complex(np.sum(w * integrand))


def integrate_cycle_with_error(
    omega: ChartForm, cycle: TriangulatedCycle, tol: float = 1e-12, min_level: int = 1, max_level: int = 5
) -> IntegrationResult:
    """Composite degree-7 rule with Richardson extrapolation over subdivision levels."""
    if omega.degree != 2:
        raise GeometryError("only 2-forms integrate over 2-cycles")

    def total(level):
        return sum(_triangle_integral(omega, tri, level, i) for i, tri in enumerate(cycle.triangles))

    prev = total(min_level)
    prev_r = None
    for level in range(min_level + 1, max_level + 1):
        cur = total(level)
        rich = (256 * cur - prev) / 255
        err = abs(rich - prev_r) if prev_r is not None else abs(cur - prev)
        if err <= tol * max(1.0, abs(rich)):
            return IntegrationResult(rich, err, level)
        prev, prev_r = cur, rich
    return IntegrationResult(prev_r, err, max_level)


def integrate_cycle(omega: ChartForm, cycle: TriangulatedCycle, tol: float = 1e-12) -> complex:
    return integrate_cycle_with_error(omega, cycle, tol).value


def disk_triangles(
    chart: str, radius: float = 1.0, n_sectors: int = 8, orientation: int = 1, center=(0.0, 0.0)
) -> list[Triangle]:
    """Fan of curved triangles covering a disk in a 2-d chart.

    Triangle k is (s, t) -> c + R (s+t) e^{i(theta_k + dtheta t/(s+t))}; the
    area element is R^2 dtheta ds dt, so rotation-invariant integrands stay smooth.
    """
    out = []
    dth = 2 * sp.pi / n_sectors
    u = S + T
    for k in range(n_sectors):
        ang = k * dth + dth * T / u
        ex = (center[0] + radius * u * sp.cos(ang), center[1] + radius * u * sp.sin(ang))
        out.append(Triangle(chart, ex, orientation))
    return out


def disk_cycle(space: ChartedSpace, chart: str, radius: float = 1.0, n_sectors: int = 8) -> TriangulatedCycle:
    return TriangulatedCycle(space, tuple(disk_triangles(chart, radius, n_sectors)))


def sphere_cycle(space: ChartedSpace | None = None, n_sectors: int = 8) -> TriangulatedCycle:
    """Fundamental cycle of S^2: unit disks in both charts, complex orientation."""
    space = space or build_sphere_atlas()
    tris = disk_triangles("N", 1.0, n_sectors) + disk_triangles("S", 1.0, n_sectors)
    return TriangulatedCycle(space, tuple(tris))


def embedded_sphere_cycle(space: ChartedSpace, level: int = 0) -> TriangulatedCycle:
    """Unit sphere in R^3 from the projected octahedron, outward orientation."""
    verts = [np.array(v, dtype=float) for v in ((1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))]
    faces = []
    for k in range(4):
        a, b = verts[k], verts[(k + 1) % 4]
        faces.append((verts[4], a, b) if np.dot(np.cross(a - verts[4], b - verts[4]), verts[4]) > 0 else (verts[4], b, a))
        faces.append((verts[5], b, a) if np.dot(np.cross(b - verts[5], a - verts[5]), verts[5]) > 0 else (verts[5], a, b))
    tris = []
    for v0, v1, v2 in faces:
        lin = [sp.Float(v0[i]) + S * sp.Float(v1[i] - v0[i]) + T * sp.Float(v2[i] - v0[i]) for i in range(3)]
        norm = sp.sqrt(sum(c**2 for c in lin))
        tris.append(Triangle("R", tuple(c / norm for c in lin), 1))
    return TriangulatedCycle(space, tuple(tris))


def sphere_volume_form(space: ChartedSpace) -> ChartForm:
    """omega_ij = eps_ijk x^k / (4 pi) on R^3: pulls back to the normalized area form."""
    x = space.coords("R")
    comps = {}
    for (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        key, sign = sort_with_sign((i, j))
        comps[key] = sign * x[k] / (4 * sp.pi)
    return ChartForm(space, 2, {"R": comps})


# ---------------------------------------------------------------------------
# identity checks on fixed test data


def kernel_identity_residuals(count: int = DEFAULT_SAMPLES) -> dict:
    """Sampled residuals of d^2 = 0, Cartan, Jacobi and X_{f,g} = [X_f, X_g].

    Test data: a generic 1-form and vector field on R^3, three smooth
    functions on R^4 with the standard form, and the coordinate functions
    x1, x3 of the unit sphere with the Fubini-Study form.
    """
    R3 = real_space(3)
    x1, x2, x3 = R3.coords("R")
    alpha = ChartForm(R3, 1, {"R": {(0,): x1**2 * x2, (1,): sp.sin(x3) * x1, (2,): sp.exp(x1 * x2 / 4)}})
    beta = exterior_derivative(alpha) + ChartForm(R3, 2, {"R": {(0, 2): x2 * x3**2}})
    X = ChartVectorField(R3, {"R": [x2, -x1 * x3, sp.cos(x1)]})
    f0 = ChartForm.scalar(R3, sp.sin(x1) * x2 + x3**3)
    out = {
        "d_squared": max(max_abs(exterior_derivative(exterior_derivative(w)), count) for w in (f0, alpha, beta)),
        "cartan": max(max_abs(lie_derivative(X, w) - cartan_formula(X, w), count) for w in (f0, alpha, beta)),
    }
    R4 = euclidean_space(2)
    q1, q2, p1, p2 = R4.coords("R")
    om = standard_symplectic_form(R4)
    f = ChartForm.scalar(R4, q1**2 * p2 + sp.sin(p1))
    g = ChartForm.scalar(R4, q2 * p1 + q1**3)
    h = ChartForm.scalar(R4, sp.exp(q1 / 2) * p2 + p1 * q2**2)

    def pb(a, b):
        return poisson_bracket(a, b, om)

    out["jacobi"] = max_abs(pb(f, pb(g, h)) + pb(g, pb(h, f)) + pb(h, pb(f, g)), count)
    worst = vector_max_abs(
        hamiltonian_vector_field(pb(f, g), om)
        - lie_bracket(hamiltonian_vector_field(f, om), hamiltonian_vector_field(g, om)),
        count,
    )
    S2 = build_sphere_atlas()
    fs = fubini_study_form(S2)
    x, y = S2.coords("N")
    u, v = S2.coords("S")
    r2, s2 = x**2 + y**2, u**2 + v**2
    e1 = ChartForm.scalar(S2, {"N": 2 * x / (1 + r2), "S": 2 * u / (1 + s2)})
    e3 = ChartForm.scalar(S2, {"N": (r2 - 1) / (1 + r2), "S": (1 - s2) / (1 + s2)})
    worst = max(
        worst,
        vector_max_abs(
            hamiltonian_vector_field(poisson_bracket(e1, e3, fs), fs)
            - lie_bracket(hamiltonian_vector_field(e1, fs), hamiltonian_vector_field(e3, fs)),
            count,
        ),
    )
    out["hamiltonian_bracket"] = worst
    return out
