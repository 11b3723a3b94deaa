"""Exact polynomial observables and polynomial-coefficient differential operators.

Phase-space variables are ordered ``(q_1..q_n, p_1..p_n)``. Coefficients are
complex numbers with rational real and imaginary parts, and ``hbar`` is a
formal central symbol. Negative powers of ``hbar`` are allowed so that the
conjugation by ``exp(i q p / hbar)`` stays inside the algebra.

Bracket convention: ``omega = dp ^ dq`` and ``iota_{X_f} omega = -df``, so::

    X_f = sum_i  df/dp_i d/dq_i - df/dq_i d/dp_i
    {f, g} = X_f(g),   {q, p} = -1

With this choice the prequantum operators ``P_f = -i hbar X_f - theta(X_f) + f``
satisfy ``[P_f, P_g] = -i hbar P_{f,g}`` for ``theta = p dq``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, prod
from typing import Iterable, Mapping


class CRational:
    """Complex number with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, x) -> "CRational":
        if isinstance(x, CRational):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        return cls(x, 0)

    def __add__(self, other):
        o = CRational.coerce(other)
        return CRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return CRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-CRational.coerce(other))

    def __rsub__(self, other):
        return CRational.coerce(other) - self

    def __mul__(self, other):
        o = CRational.coerce(other)
        return CRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = CRational.coerce(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero")
        num = self * o.conjugate()
        return CRational(num.re / den, num.im / den)

    def conjugate(self):
        return CRational(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = CRational.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"CRational({self.re}, {self.im})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{self.im}i" if self.im.denominator == 1 else f"({self.im})i"
        sign = "+" if self.im > 0 else "-"
        mag = abs(self.im)
        return f"({self.re}{sign}{'' if mag == 1 else mag}i)"


I = CRational(0, 1)
ONE = CRational(1)


def _add_into(terms: dict, key, coeff: CRational) -> None:
    val = terms.get(key)
    val = coeff if val is None else val + coeff
    if val:
        terms[key] = val
    else:
        terms.pop(key, None)


def _clean(terms: Mapping) -> dict:
    out = {}
    for k, v in terms.items():
        v = CRational.coerce(v)
        if v:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# Observables


class PolyObservable:
    """Polynomial on R^{2n} in the variables (q_1..q_n, p_1..p_n)."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int = 1, terms: Mapping[tuple, object] | None = None):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        terms = _clean(terms or {})
        for k in terms:
            if len(k) != 2 * n or any(e < 0 for e in k):
                raise ValueError(f"bad exponent {k} for n={n}")
        self.terms = terms

    @classmethod
    def constant(cls, c, n: int = 1) -> "PolyObservable":
        return cls(n, {(0,) * (2 * n): c})

    @classmethod
    def monomial(cls, qexp: Iterable[int], pexp: Iterable[int], coeff=1) -> "PolyObservable":
        qexp, pexp = tuple(qexp), tuple(pexp)
        if len(qexp) != len(pexp):
            raise ValueError("q and p exponents must have equal length")
        return cls(len(qexp), {qexp + pexp: coeff})

    @classmethod
    def q(cls, i: int = 0, n: int = 1) -> "PolyObservable":
        e = [0] * (2 * n)
        e[i] = 1
        return cls(n, {tuple(e): 1})

    @classmethod
    def p(cls, i: int = 0, n: int = 1) -> "PolyObservable":
        e = [0] * (2 * n)
        e[n + i] = 1
        return cls(n, {tuple(e): 1})

    def _lift(self, other) -> "PolyObservable":
        if isinstance(other, PolyObservable):
            if other.n != self.n:
                raise ValueError("observables live on different phase spaces")
            return other
        return PolyObservable.constant(other, self.n)

    def __add__(self, other):
        other = self._lift(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            _add_into(terms, k, v)
        return PolyObservable(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyObservable(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        terms: dict = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                _add_into(terms, tuple(a + b for a, b in zip(k1, k2)), v1 * v2)
        return PolyObservable(self.n, terms)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = CRational.coerce(c)
        return PolyObservable(self.n, {k: v / c for k, v in self.terms.items()})

    def __pow__(self, m: int):
        out = PolyObservable.constant(1, self.n)
        for _ in range(m):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, PolyObservable):
            try:
                other = self._lift(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def p_degree(self) -> int:
        return max((sum(k[self.n:]) for k in self.terms), default=0)

    def diff(self, var: int) -> "PolyObservable":
        """Partial derivative with respect to variable index ``var`` in 0..2n-1."""
        terms: dict = {}
        for k, v in self.terms.items():
            if k[var]:
                e = list(k)
                e[var] -= 1
                _add_into(terms, tuple(e), v * k[var])
        return PolyObservable(self.n, terms)

    def conjugate(self) -> "PolyObservable":
        return PolyObservable(self.n, {k: v.conjugate() for k, v in self.terms.items()})

    def coefficient(self, exps) -> CRational:
        return self.terms.get(tuple(exps), CRational(0))

    def __call__(self, *values):
        """Numerical evaluation at a point (floats or complex)."""
        if len(values) != 2 * self.n:
            raise ValueError(f"expected {2 * self.n} values")
        return sum(complex(v) * prod(x**e for x, e in zip(values, k)) for k, v in self.terms.items())

    def __str__(self):
        if not self.terms:
            return "0"
        names = _var_names(self.n)
        parts = []
        for k in sorted(self.terms, key=_glex):
            mono = _mono_str(k, names)
            c = self.terms[k]
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def _var_names(n: int) -> list[str]:
    if n == 1:
        return ["q", "p"]
    return [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]


def _mono_str(exps, names) -> str:
    return "*".join(nm if e == 1 else f"{nm}^{e}" for nm, e in zip(names, exps) if e)


def _glex(exps):
    return (sum(exps), tuple(-e for e in exps))


def poisson_bracket_exact(f: PolyObservable, g: PolyObservable) -> PolyObservable:
    """{f, g} = sum_i df/dp_i dg/dq_i - df/dq_i dg/dp_i."""
    if f.n != g.n:
        raise ValueError("observables live on different phase spaces")
    n = f.n
    out = PolyObservable(n)
    for i in range(n):
        out = out + f.diff(n + i) * g.diff(i) - f.diff(i) * g.diff(n + i)
    return out


# ---------------------------------------------------------------------------
# Operators


class PictureMismatch(ValueError):
    pass


class QuantizationError(ValueError):
    pass


class PolyOperator:
    """Normal-ordered differential operator with polynomial coefficients.

    ``terms`` maps ``(hbar_power, coeff_exps, deriv_exps)`` to an exact
    coefficient; ``coeff_exps`` runs over all 2n phase-space variables,
    ``deriv_exps`` over the derivative variables of the picture: the n
    positions for ``picture='q'`` and all 2n variables for ``picture='qp'``.
    """

    __slots__ = ("n", "picture", "terms")

    def __init__(self, n: int, picture: str, terms: Mapping | None = None):
        if picture not in ("q", "qp"):
            raise ValueError("picture must be 'q' or 'qp'")
        self.n = n
        self.picture = picture
        terms = _clean(terms or {})
        nd = self.n_deriv
        for h, a, d in terms:
            if len(a) != 2 * n or len(d) != nd:
                raise ValueError("malformed operator term")
        self.terms = terms

    @property
    def n_deriv(self) -> int:
        return self.n if self.picture == "q" else 2 * self.n

    # constructors
    @classmethod
    def scalar(cls, c, n: int = 1, picture: str = "q", hbar_power: int = 0) -> "PolyOperator":
        nd = n if picture == "q" else 2 * n
        return cls(n, picture, {(hbar_power, (0,) * (2 * n), (0,) * nd): c})

    @classmethod
    def identity(cls, n: int = 1, picture: str = "q") -> "PolyOperator":
        return cls.scalar(1, n, picture)

    @classmethod
    def hbar(cls, n: int = 1, picture: str = "q", power: int = 1) -> "PolyOperator":
        return cls.scalar(1, n, picture, power)

    @classmethod
    def multiplication(cls, f: PolyObservable, picture: str = "q") -> "PolyOperator":
        nd = f.n if picture == "q" else 2 * f.n
        return cls(f.n, picture, {(0, k, (0,) * nd): v for k, v in f.terms.items()})

    @classmethod
    def derivative(cls, var: int, n: int = 1, picture: str = "q") -> "PolyOperator":
        nd = n if picture == "q" else 2 * n
        if not 0 <= var < nd:
            raise ValueError(f"no derivative variable {var} in picture {picture!r}")
        d = [0] * nd
        d[var] = 1
        return cls(n, picture, {(0, (0,) * (2 * n), tuple(d)): 1})

    # algebra
    def _check(self, other: "PolyOperator"):
        if not isinstance(other, PolyOperator):
            raise TypeError("expected a PolyOperator")
        if other.picture != self.picture or other.n != self.n:
            raise PictureMismatch("operators belong to different pictures")

    def _lift(self, other):
        if isinstance(other, PolyOperator):
            self._check(other)
            return other
        return PolyOperator.scalar(other, self.n, self.picture)

    def __add__(self, other):
        other = self._lift(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            _add_into(terms, k, v)
        return PolyOperator(self.n, self.picture, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyOperator(self.n, self.picture, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c, hbar_power: int = 0) -> "PolyOperator":
        c = CRational.coerce(c)
        return PolyOperator(
            self.n, self.picture, {(h + hbar_power, a, d): v * c for (h, a, d), v in self.terms.items()}
        )

    def __mul__(self, other):
        if isinstance(other, PolyOperator):
            return compose(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __matmul__(self, other):
        return compose(self, other)

    def __pow__(self, m: int):
        out = PolyOperator.identity(self.n, self.picture)
        for _ in range(m):
            out = compose(out, self)
        return out

    def __eq__(self, other):
        if not isinstance(other, PolyOperator):
            return NotImplemented
        return self.n == other.n and self.picture == other.picture and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, self.picture, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def is_scalar(self) -> bool:
        return all(not any(a) and not any(d) for _, a, d in self.terms)

    def scalar_part(self) -> dict[int, CRational]:
        """Map hbar power -> coefficient of the pure scalar terms."""
        return {h: v for (h, a, d), v in self.terms.items() if not any(a) and not any(d)}

    def hbar_powers(self) -> set[int]:
        return {h for h, _, _ in self.terms}

    def __str__(self):
        return format_operator(self)

    __repr__ = __str__


def _falling(e: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= e - j
    return out


def compose(A: PolyOperator, B: PolyOperator) -> PolyOperator:
    """Normal-ordered product A o B.

    x^a D^b . x^c D^d = sum_k prod C(b,k) [D^k x^c] x^a D^(b-k+d)
    """
    A._check(B)
    n2, nd = 2 * A.n, A.n_deriv
    terms: dict = {}
    for (h1, a, b), v1 in A.terms.items():
        ranges = [range(bj + 1) for bj in b]
        for (h2, c, d), v2 in B.terms.items():
            for kappa in itertools.product(*ranges):
                coeff = 1
                new_c = list(c)
                for j, kj in enumerate(kappa):
                    if kj:
                        cj = c[j]
                        if kj > cj:
                            coeff = 0
                            break
                        coeff *= comb(b[j], kj) * _falling(cj, kj)
                        new_c[j] = cj - kj
                if not coeff:
                    continue
                key = (
                    h1 + h2,
                    tuple(a[i] + new_c[i] for i in range(n2)),
                    tuple(b[j] - kappa[j] + d[j] for j in range(nd)),
                )
                _add_into(terms, key, v1 * v2 * coeff)
    return PolyOperator(A.n, A.picture, terms)


def commutator(A: PolyOperator, B: PolyOperator) -> PolyOperator:
    """Exact normal-ordered AB - BA."""
    A._check(B)
    return compose(A, B) - compose(B, A)


def normal_form(factors: Iterable[PolyOperator]) -> PolyOperator:
    """Compose a word of operators into canonical normal-ordered form."""
    factors = list(factors)
    if not factors:
        raise ValueError("empty product")
    out = factors[0]
    for f in factors[1:]:
        out = compose(out, f)
    return PolyOperator(out.n, out.picture, out.terms)


def format_operator(A: PolyOperator) -> str:
    """Deterministic text form: graded-lex on coefficient exponents, then derivatives."""
    if not A.terms:
        return "0"
    names = _var_names(A.n)
    dnames = names[: A.n_deriv]

    def key(t):
        h, a, d = t
        return (_glex(a), _glex(d), h)

    parts = []
    for t in sorted(A.terms, key=key):
        h, a, d = t
        factors = []
        if h == 1:
            factors.append("hbar")
        elif h:
            factors.append(f"hbar^{h}")
        mono = _mono_str(a, names)
        if mono:
            factors.append(mono)
        for nm, e in zip(dnames, d):
            if e:
                factors.append(f"d_{nm}" if e == 1 else f"d_{nm}^{e}")
        c = A.terms[t]
        body = "*".join(factors)
        if not body:
            parts.append(str(c))
        elif c == 1:
            parts.append(body)
        elif c == -1:
            parts.append("-" + body)
        else:
            parts.append(f"{c}*{body}")
    return " + ".join(parts).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Quantization maps


def _q_hat(n: int, i: int = 0) -> PolyOperator:
    return PolyOperator.multiplication(PolyObservable.q(i, n), "q")


def _p_hat(n: int, i: int = 0) -> PolyOperator:
    return PolyOperator.derivative(i, n, "q").scale(-I, 1)


def schrodinger_quantize(f: PolyObservable) -> PolyOperator:
    """q -> multiplication, p -> -i hbar d/dq on polynomials of degree <= 1."""
    if f.degree > 1:
        raise QuantizationError("outside P^{<=1}")
    n = f.n
    out = PolyOperator(n, "q")
    for k, v in f.terms.items():
        if not any(k):
            out = out + PolyOperator.scalar(v, n, "q")
            continue
        j = k.index(1)
        op = _q_hat(n, j) if j < n else _p_hat(n, j - n)
        out = out + op.scale(v)
    return out


@lru_cache(maxsize=None)
def _symmetric_words(m: int) -> tuple[PolyOperator, ...]:
    """T[k] = sum of all words with k copies of q-hat and m-k of p-hat."""
    qh, ph = _q_hat(1), _p_hat(1)
    T = [PolyOperator.identity(1, "q")]
    for j in range(1, m + 1):
        nxt = []
        for k in range(j + 1):
            acc = PolyOperator(1, "q")
            if k >= 1:
                acc = acc + compose(T[k - 1], qh)
            if k <= j - 1:
                acc = acc + compose(T[k], ph)
            nxt.append(acc)
        T = nxt
    return tuple(T)


def weyl_quantize(f: PolyObservable) -> PolyOperator:
    """Weyl quantization from the expansion of (a q + b p)^m (one degree of freedom).

    The coefficient of a^k b^(m-k) in (a q-hat + b p-hat)^m is the sum T_m[k]
    of all words with k factors q-hat, and C(m, k) q^k p^(m-k) maps to it.
    """
    if f.n != 1:
        raise ValueError("Weyl quantization is implemented for n = 1")
    out = PolyOperator(1, "q")
    for (a, b), v in f.terms.items():
        m = a + b
        word_sum = _symmetric_words(m)[a]
        out = out + word_sum.scale(CRational(v.re / comb(m, a), v.im / comb(m, a)))
    return out


def hamiltonian_vector_field_operator(f: PolyObservable) -> PolyOperator:
    """X_f as a first-order operator in the (q,p) picture."""
    n = f.n
    out = PolyOperator(n, "qp")
    for i in range(n):
        dq = PolyOperator.derivative(i, n, "qp")
        dp = PolyOperator.derivative(n + i, n, "qp")
        out = out + compose(PolyOperator.multiplication(f.diff(n + i), "qp"), dq)
        out = out - compose(PolyOperator.multiplication(f.diff(i), "qp"), dp)
    return out


def theta_contraction(f: PolyObservable, theta: str = "standard") -> PolyObservable:
    """theta(X_f) for theta = p dq ('standard') or -q dp ('alternate')."""
    n = f.n
    out = PolyObservable(n)
    for i in range(n):
        if theta == "standard":
            out = out + PolyObservable.p(i, n) * f.diff(n + i)
        elif theta == "alternate":
            out = out + PolyObservable.q(i, n) * f.diff(i)
        else:
            raise ValueError(f"unknown potential {theta!r}")
    return out


def prequant_operator(f: PolyObservable, theta: str = "standard") -> PolyOperator:
    """P_f = -i hbar X_f - theta(X_f) + f in the (q,p) picture."""
    X = hamiltonian_vector_field_operator(f)
    return (
        X.scale(-I, 1)
        - PolyOperator.multiplication(theta_contraction(f, theta), "qp")
        + PolyOperator.multiplication(f, "qp")
    )


@dataclass(frozen=True)
class GvHReport:
    """Two bracket routes to p^2 q^2 and their mismatch."""

    bracket_coeff_cubic: CRational  # {p^3, q^3} = c1 p^2 q^2
    bracket_coeff_mixed: CRational  # {p^2 q, q^2 p} = c2 p^2 q^2
    discrepancy: PolyOperator  # (1/c1)[W p^3, W q^3] - (1/c2)[W p^2q, W q^2p]
    route_cubic: PolyOperator  # [W p^3, W q^3] / (-i hbar c1)
    route_mixed: PolyOperator
    weyl_p2q2: PolyOperator

    @property
    def offset_cubic(self) -> PolyOperator:
        return self.route_cubic - self.weyl_p2q2

    @property
    def offset_mixed(self) -> PolyOperator:
        return self.route_mixed - self.weyl_p2q2


def _monomial_ratio(f: PolyObservable, target: PolyObservable) -> CRational:
    (k, v), = target.terms.items()
    if set(f.terms) != {k}:
        raise ValueError(f"{f} is not a multiple of {target}")
    return f.terms[k] / v


def gvh_analysis() -> GvHReport:
    q, p = PolyObservable.q(), PolyObservable.p()
    target = p**2 * q**2
    f1, g1 = p**3, q**3
    f2, g2 = p**2 * q, q**2 * p
    c1 = _monomial_ratio(poisson_bracket_exact(f1, g1), target)
    c2 = _monomial_ratio(poisson_bracket_exact(f2, g2), target)
    W = weyl_quantize
    k1 = commutator(W(f1), W(g1))
    k2 = commutator(W(f2), W(g2))
    disc = k1.scale(ONE / c1) - k2.scale(ONE / c2)
    r1 = k1.scale(ONE / (-I * c1), -1)
    r2 = k2.scale(ONE / (-I * c2), -1)
    return GvHReport(c1, c2, disc, r1, r2, W(target))


def gvh_discrepancy() -> PolyOperator:
    """(1/c1)[W p^3, W q^3] - (1/c2)[W p^2 q, W q^2 p], with c1, c2 the exact bracket coefficients."""
    return gvh_analysis().discrepancy


def conjugate_by_phase(A: PolyOperator) -> PolyOperator:
    """G A G^{-1} for G = exp((i/hbar) sum q_i p_i), qp picture.

    G d_{q_i} G^{-1} = d_{q_i} - (i/hbar) p_i and G d_{p_i} G^{-1} = d_{p_i} - (i/hbar) q_i.
    """
    if A.picture != "qp":
        raise PictureMismatch("conjugation needs the (q,p) picture")
    n = A.n
    shifted = []
    for j in range(2 * n):
        partner = PolyObservable.p(j, n) if j < n else PolyObservable.q(j - n, n)
        shifted.append(
            PolyOperator.derivative(j, n, "qp") - PolyOperator.multiplication(partner, "qp").scale(I, -1)
        )
    out = PolyOperator(n, "qp")
    for (h, a, d), v in A.terms.items():
        term = PolyOperator(n, "qp", {(h, a, (0,) * (2 * n)): v})
        for j, dj in enumerate(d):
            for _ in range(dj):
                term = compose(term, shifted[j])
        out = out + term
    return out


@dataclass(frozen=True)
class GaugeReport:
    f: PolyObservable
    standard: PolyOperator
    conjugated_alternate: PolyOperator

    @property
    def difference(self) -> PolyOperator:
        return self.standard - self.conjugated_alternate

    @property
    def equal(self) -> bool:
        return self.difference.is_zero()


def gauge_equivalence_check(f: PolyObservable) -> GaugeReport:
    """Compare P_f (theta = p dq) with G P'_f G^{-1} (theta' = -q dp)."""
    return GaugeReport(f, prequant_operator(f, "standard"), conjugate_by_phase(prequant_operator(f, "alternate")))


def dirac_q4_residual(f: PolyObservable, g: PolyObservable, theta: str = "standard") -> PolyOperator:
    """[P_f, P_g] + i hbar P_{f,g}; zero for a consistent prequantization."""
    lhs = commutator(prequant_operator(f, theta), prequant_operator(g, theta))
    return lhs + prequant_operator(poisson_bracket_exact(f, g), theta).scale(I, 1)


def monomials(max_degree: int, n: int = 1) -> list[PolyObservable]:
    """All monic monomials of total degree <= max_degree, graded-lex order."""
    out = []
    for exps in itertools.product(range(max_degree + 1), repeat=2 * n):
        if sum(exps) <= max_degree:
            out.append(exps)
    out.sort(key=_glex)
    return [PolyObservable(n, {e: 1}) for e in out]


def operator_to_dict(A: PolyOperator) -> dict:
    """JSON-friendly form with exact rationals as strings."""
    return {
        "picture": A.picture,
        "n": A.n,
        "terms": [
            {"hbar": h, "coeff_exps": list(a), "deriv_exps": list(d), "re": str(v.re), "im": str(v.im)}
            for (h, a, d), v in sorted(A.terms.items(), key=lambda t: (_glex(t[0][1]), _glex(t[0][2]), t[0][0]))
        ],
        "text": format_operator(A),
    }


def operator_from_dict(data: dict) -> PolyOperator:
    terms = {
        (t["hbar"], tuple(t["coeff_exps"]), tuple(t["deriv_exps"])): CRational(Fraction(t["re"]), Fraction(t["im"]))
        for t in data["terms"]
    }
    return PolyOperator(data["n"], data["picture"], terms)
