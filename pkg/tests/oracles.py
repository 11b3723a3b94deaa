"""Reference computations that do not go through the library's algorithms."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import sympy as sp

q, p, hbar = sp.symbols("q p hbar")


def poly_to_sympy(f) -> sp.Expr:
    """PolyObservable (one degree of freedom) as a sympy polynomial."""
    out = sp.Integer(0)
    for (a, b), v in f.terms.items():
        out += (sp.Rational(v.re.numerator, v.re.denominator) + sp.I * sp.Rational(v.im.numerator, v.im.denominator)) * q**a * p**b
    return sp.expand(out)


def apply_operator(A, psi: sp.Expr) -> sp.Expr:
    """Act with a PolyOperator on a sympy function of (q, p), term by term."""
    out = sp.Integer(0)
    for (h, a, d), v in A.terms.items():
        c = sp.Rational(v.re.numerator, v.re.denominator) + sp.I * sp.Rational(v.im.numerator, v.im.denominator)
        term = psi
        term = sp.diff(term, q, d[0]) if d[0] else term
        if len(d) > 1 and d[1]:
            term = sp.diff(term, p, d[1])
        out += c * hbar**h * q ** a[0] * p ** a[1] * term
    return sp.expand(out)


def prequant_apply(f: sp.Expr, psi: sp.Expr) -> sp.Expr:
    """(-i hbar X_f - p f_p + f) psi with X_f = f_p d_q - f_q d_p."""
    fq, fp = sp.diff(f, q), sp.diff(f, p)
    X = fp * sp.diff(psi, q) - fq * sp.diff(psi, p)
    return sp.expand(-sp.I * hbar * X - p * fp * psi + f * psi)


def poisson(f: sp.Expr, g: sp.Expr) -> sp.Expr:
    """{f, g} = f_p g_q - f_q g_p (so {q, p} = -1)."""
    return sp.expand(sp.diff(f, p) * sp.diff(g, q) - sp.diff(f, q) * sp.diff(g, p))


def weyl_apply(f: sp.Expr, psi: sp.Expr, x=q) -> sp.Expr:
    """Weyl operator of a polynomial in (q, p) through symmetrized products.

    Uses the McCoy form: q^a p^b maps to 2^{-a} sum_k C(a,k) q^k p-hat^b q^{a-k}.
    """
    poly = sp.Poly(sp.expand(f), q, p)
    out = sp.Integer(0)
    for (a, b), c in poly.terms():
        acc = sp.Integer(0)
        for k in range(a + 1):
            inner = x ** (a - k) * psi
            for _ in range(b):
                inner = -sp.I * hbar * sp.diff(inner, x)
            acc += sp.binomial(a, k) * x**k * inner
        out += c * acc / 2**a
    return sp.expand(out)


def su2_fusion_matrices(k: int) -> list[sp.Matrix]:
    """N_a[b, c] for SU(2) level k, labels a = 2j in 0..k."""
    mats = []
    for a in range(k + 1):
        M = sp.zeros(k + 1, k + 1)
        for b in range(k + 1):
            for c in range(k + 1):
                if abs(a - b) <= c <= min(a + b, 2 * k - a - b) and (a + b + c) % 2 == 0:
                    M[b, c] = 1
        mats.append(M)
    return mats


def verlinde_by_fusion(g: int, k: int) -> Fraction:
    """Tr C^{g-1} with C = sum_a N_a N_a; its eigenvalues are S_0j^{-2}."""
    N = su2_fusion_matrices(k)
    C = sp.zeros(k + 1, k + 1)
    for M in N:
        C += M * M
    P = C ** (g - 1) if g >= 1 else C.inv() ** (1 - g)
    t = sp.nsimplify(P.trace())
    return Fraction(int(t.p), int(t.q))


def gaussian_chirp(qv: float, t: float, hb: float = 1.0, s: float = 1.0) -> complex:
    """int exp(-(q-u)^2/(2 s^2)) exp(i u^2/(2 hbar t)) du in closed form."""
    a = 1 / (2 * s * s) - 1j / (2 * hb * t)
    b = qv / s**2
    return complex(np.sqrt(np.pi / a) * np.exp(b * b / (4 * a) - qv * qv / (2 * s * s)))


def gaussian_second_derivative(x, hb: float = 1.0):
    """d^2/dq^2 of exp(-q^2/(2 hbar))."""
    x = np.asarray(x, dtype=float)
    return (x * x / hb**2 - 1 / hb) * np.exp(-x * x / (2 * hb))


def cap_holonomy(k: int, r: float) -> complex:
    """Holonomy of L_k around |z| = r: exp of (i/hbar) times the enclosed k-form area."""
    return complex(np.exp(2j * math.pi * k * r * r / (1 + r * r)))


def wzw_single_mode(amplitude: float) -> float:
    """(1/16 pi) int |grad phi|^2 over [0, 2 pi)^2 for phi = A sin x."""
    return amplitude**2 * math.pi / 8
