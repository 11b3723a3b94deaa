"""Truncated Hilbert spaces for the model polarizations.

Gram matrices hold raw (unnormalized) basis inner products with
``G[m, n] = <b_m, b_n>``, antilinear in the first slot. Operators are stored as
matrices acting on coefficient vectors, ``A b_n = sum_m A[m, n] b_m``; the
adjoint with respect to ``G`` is ``G^{-1} A^H G`` and spectra are taken from the
similarity transform ``G^{1/2} A G^{-1/2}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .weylalg import PolyObservable, poisson_bracket_exact


class HilbertError(ValueError):
    pass


class DivergentNormError(HilbertError):
    pass


@dataclass(frozen=True)
class TruncatedHilbertSpace:
    kind: str
    labels: tuple
    gram: np.ndarray
    hbar: float
    polarization: str = ""
    half_form: bool = True
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        g = np.array(self.gram, dtype=complex)
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))
        if g.shape != (len(self.labels), len(self.labels)):
            raise HilbertError("Gram matrix does not match the basis")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def is_orthogonal(self) -> bool:
        return bool(np.all(self.gram[~np.eye(self.dim, dtype=bool)] == 0))

    def check_gram(self, tol: float = 1e-12) -> dict:
        g = self.gram
        herm = float(np.max(np.abs(g - g.conj().T))) / max(1.0, float(np.max(np.abs(g))))
        ev = np.linalg.eigvalsh((g + g.conj().T) / 2)
        return {"hermitian_residual": herm, "min_eigenvalue": float(ev.min()),
                "passed": herm <= tol and bool(ev.min() > 0)}

    def descriptor(self) -> dict:
        return {"kind": self.kind, "labels": [str(x) for x in self.labels], "hbar": self.hbar,
                "polarization": self.polarization, "half_form": self.half_form}


@dataclass(frozen=True)
class QuantumOperator:
    space: TruncatedHilbertSpace
    matrix: np.ndarray
    self_adjoint: bool = False
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise HilbertError("operator matrix does not match the space")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "QuantumOperator") -> "QuantumOperator":
        return QuantumOperator(self.space, self.matrix @ other.matrix, False, f"{self.name}{other.name}")

    def __add__(self, other: "QuantumOperator") -> "QuantumOperator":
        return QuantumOperator(self.space, self.matrix + other.matrix, self.self_adjoint and other.self_adjoint)

    def __sub__(self, other: "QuantumOperator") -> "QuantumOperator":
        return QuantumOperator(self.space, self.matrix - other.matrix, self.self_adjoint and other.self_adjoint)

    def scale(self, c) -> "QuantumOperator":
        return QuantumOperator(self.space, c * self.matrix, self.self_adjoint and np.isreal(c))


def adjoint(A: QuantumOperator) -> QuantumOperator:
    """G^{-1} A^H G."""
    G = A.space.gram
    return QuantumOperator(A.space, np.linalg.solve(G, A.matrix.conj().T @ G), A.self_adjoint, A.name + "^*")


def self_adjoint_residual(A: QuantumOperator) -> float:
    return float(np.max(np.abs(adjoint(A).matrix - A.matrix), initial=0.0))


def spectrum(A: QuantumOperator) -> np.ndarray:
    """Eigenvalues in an orthonormalized basis; sorted real values if self-adjoint."""
    M = A.matrix
    if not np.all(np.isfinite(M)):
        raise HilbertError("operator has non-finite entries")
    G = A.space.gram
    off = ~np.eye(len(G), dtype=bool)
    if np.all(G[off] == 0):
        d = np.sqrt(np.real(np.diag(G)))
        ratio = d[:, None] / d[None, :]
        S = M * ratio
    else:
        w, V = np.linalg.eigh(G)
        half = (V * np.sqrt(w)) @ V.conj().T
        ihalf = (V / np.sqrt(w)) @ V.conj().T
        S = half @ M @ ihalf
    if A.self_adjoint:
        if np.all(S[off] == 0):
            return np.sort(np.real(np.diag(S)))
        return np.linalg.eigvalsh((S + S.conj().T) / 2)
    ev = np.linalg.eigvals(S)
    return ev[np.lexsort((ev.imag, ev.real))]


def operator_to_dict(A: QuantumOperator, eigenvalues: Sequence | None = None) -> dict:
    if eigenvalues is None:
        eigenvalues = spectrum(A)
    ev = np.asarray(eigenvalues)
    return {
        "schema": "1",
        "basis": A.space.descriptor(),
        "name": A.name,
        "self_adjoint": A.self_adjoint,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in A.matrix],
        "eigenvalues": [float(x) for x in ev.real] if np.all(ev.imag == 0) else [[float(x.real), float(x.imag)] for x in ev],
    }


def operator_to_json(A: QuantumOperator) -> str:
    return json.dumps(operator_to_dict(A), sort_keys=True)


# ---------------------------------------------------------------------------
# Bargmann space


def bargmann_norm(n: int, hbar: float) -> float:
    """<z^n, z^n> = n! (2 hbar)^n for the measure e^{-|z|^2/2hbar} d^2z / (2 pi hbar)."""
    return math.factorial(n) * (2 * hbar) ** n


def bargmann_space(N: int, hbar: float = 1.0, half_form: bool = True) -> TruncatedHilbertSpace:
    if N < 1:
        raise HilbertError("cutoff must be at least 1")
    G = np.diag([bargmann_norm(n, hbar) for n in range(N + 1)]).astype(complex)
    return TruncatedHilbertSpace("bargmann", tuple(f"z^{n}" for n in range(N + 1)), G, hbar, "holomorphic", half_form,
                                 {"cutoff": N})


def bargmann_gram_quadrature(N: int, hbar: float = 1.0, angles: int = 64) -> np.ndarray:
    """Gram matrix by radial adaptive quadrature times an angular trapezoid rule."""
    phi = 2 * np.pi * np.arange(angles) / angles
    G = np.zeros((N + 1, N + 1), dtype=complex)
    for m in range(N + 1):
        for n in range(N + 1):
            radial, _ = integrate.quad(lambda r: r ** (m + n + 1) * np.exp(-r * r / (2 * hbar)), 0, np.inf,
                                       epsabs=0, epsrel=1e-13, limit=200)
            ang = np.mean(np.exp(1j * (n - m) * phi)) * 2 * np.pi
            G[m, n] = radial * ang / (2 * np.pi * hbar)
    return G


def quantize_harmonic_oscillator(space: TruncatedHilbertSpace, half_form: bool | None = None) -> QuantumOperator:
    """hbar (z d/dz + 1/2) on the monomials z^n; without half-forms hbar z d/dz."""
    if space.kind != "bargmann":
        raise HilbertError("harmonic oscillator is built on the Bargmann basis")
    half = space.half_form if half_form is None else half_form
    n = np.arange(space.dim)
    vals = space.hbar * (n + (0.5 if half else 0.0))
    return QuantumOperator(space, np.diag(vals), True, "H" if half else "H_uncorrected")


def _split_oscillator(f: PolyObservable) -> tuple[complex, complex]:
    """Write f = a (q^2 + p^2)/2 + b, or fail."""
    if f.n != 1:
        raise HilbertError("Bargmann quantization here is for one degree of freedom")
    a2 = complex(f.coefficient((2, 0)))
    b2 = complex(f.coefficient((0, 2)))
    const = complex(f.coefficient((0, 0)))
    rest = set(f.terms) - {(2, 0), (0, 2), (0, 0)}
    if rest or a2 != b2:
        raise HilbertError("observable does not preserve the holomorphic polarization in this basis")
    return 2 * a2, const


def bargmann_quantize(f: PolyObservable, space: TruncatedHilbertSpace) -> QuantumOperator:
    """Q_f for f = a H + b with H = (q^2 + p^2)/2 = |z|^2/2."""
    a, b = _split_oscillator(f)
    H = quantize_harmonic_oscillator(space).matrix
    real = abs(a.imag) < 1e-15 and abs(b.imag) < 1e-15
    return QuantumOperator(space, a * H + b * np.eye(space.dim), real, str(f))


# ---------------------------------------------------------------------------
# sphere


def sphere_norm(k: int, j: int) -> float:
    """<z^j, z^j> = int_0^inf s^j (1+s)^{-k-2} ds = j! (k-j)! / (k+1)!."""
    if not 0 <= j <= k:
        raise DivergentNormError(f"z^{j} is not normalizable for level {k}")
    return math.factorial(j) * math.factorial(k - j) / math.factorial(k + 1)


def sphere_space(k: int, hbar: float = 1.0) -> TruncatedHilbertSpace:
    """Holomorphic sections of L_k: monomials z^j, j = 0..k."""
    if k < 0:
        raise HilbertError("level must be non-negative")
    G = np.diag([sphere_norm(k, j) for j in range(k + 1)]).astype(complex)
    return TruncatedHilbertSpace("sphere", tuple(f"z^{j}" for j in range(k + 1)), G, hbar, "holomorphic", False,
                                 {"level": k})


def sphere_gram_quadrature(k: int, extra: int = 0, angles: int = 64) -> np.ndarray:
    """(1/pi) int z^a zbar^b (1+|z|^2)^{-k-2} d^2z by radial quad and angular trapezoid."""
    phi = 2 * np.pi * np.arange(angles) / angles
    size = k + 1 + extra
    G = np.zeros((size, size), dtype=complex)
    for a in range(size):
        for b in range(size):
            radial, _ = integrate.quad(lambda r: r ** (a + b + 1) * (1 + r * r) ** (-k - 2), 0, np.inf,
                                       epsabs=1e-15, epsrel=1e-12, limit=400)
            ang = np.mean(np.exp(1j * (b - a) * phi)) * 2 * np.pi
            G[a, b] = radial * ang / np.pi
    return G


@dataclass(frozen=True)
class DivergenceReport:
    radii: tuple
    partial_integrals: tuple
    increments: tuple
    diverges: bool


def sphere_norm_divergence(k: int, a: int, r0: float = 8.0, doublings: int = 6, threshold: float = 0.5) -> DivergenceReport:
    """Truncated norm integrals of z^a up to radius R, R doubling.

    Convergent norms have increments shrinking geometrically; for a = k + 1
    each doubling adds 2 log 2 in the limit.
    """
    radii = tuple(r0 * 2.0**j for j in range(doublings + 1))

    def integrand(r):
        return 2 * r ** (2 * a + 1) * (1 + r * r) ** (-k - 2)

    partial = []
    acc = integrate.quad(integrand, 0, radii[0], limit=200)[0]
    partial.append(acc)
    for lo, hi in zip(radii[:-1], radii[1:]):
        acc += integrate.quad(integrand, lo, hi, limit=200)[0]
        partial.append(acc)
    inc = tuple(np.diff(partial))
    diverges = inc[-1] > threshold * math.log(2) and inc[-1] >= 0.9 * inc[-2]
    return DivergenceReport(radii, tuple(partial), inc, bool(diverges))


def sphere_monomial_norm(k: int, a: int) -> float:
    """Norm of z^a in L_k, refusing monomials whose integral diverges."""
    rep = sphere_norm_divergence(k, a)
    if rep.diverges:
        raise DivergentNormError(f"norm of z^{a} diverges for level {k}")
    return sphere_norm(k, a)


# ---------------------------------------------------------------------------
# cylinder


def cylinder_space(K: int, hbar: float = 1.0, shift: int = 0) -> TruncatedHilbertSpace:
    """Fourier modes e^{i n phi} with n = shift-K..shift+K, orthonormal."""
    modes = tuple(range(shift - K, shift + K + 1))
    return TruncatedHilbertSpace("cylinder", modes, np.eye(len(modes)), hbar, "vertical", True, {"cutoff": K, "shift": shift})


def cylinder_vertical_quantize_p(lam: float, K: int, hbar: float = 1.0, shift: int = 0) -> QuantumOperator:
    """Q_p^lambda = -i hbar d/dphi - hbar lambda: diagonal hbar (n - lambda)."""
    space = cylinder_space(K, hbar, shift)
    n = np.array(space.labels, dtype=float)
    return QuantumOperator(space, np.diag(hbar * (n - lam)), True, f"Q_p^{lam}")


def compensating_shift(lam: float) -> int:
    """Mode window offset that keeps the spectrum centred for the lambda family."""
    return int(math.floor(lam + 0.5))


def spectra_coincide(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    a, b = np.sort(np.asarray(a)), np.sort(np.asarray(b))
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol))


def spectra_disjoint(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.min(np.abs(a[:, None] - b[None, :])) > tol)


def bump(x, width: float):
    """(1 - (x/w)^2)^4 on |x| < w, normalized to unit integral."""
    x = np.asarray(x, dtype=float)
    s = x / width
    return np.where(np.abs(s) < 1, (1 - s * s) ** 4, 0.0) * 315 / (256 * width)


@dataclass(frozen=True)
class CohomologicalMode:
    k: int
    center: float
    width: float

    def coefficient(self, p):
        """Fourier coefficient omega_k(p) of psi = e^{ik phi} eta(p - center) dphi."""
        return bump(np.asarray(p) - self.center, self.width)


@dataclass(frozen=True)
class CohomologicalBasis:
    modes: tuple
    hbar: float
    gram: np.ndarray

    def __len__(self):
        return len(self.modes)


def cohomological_basis_cylinder(K: int, hbar: float = 1.0, width: float | None = None) -> CohomologicalBasis:
    """Modes psi_k centred at the Bohr-Sommerfeld points p_k = hbar k, declared orthonormal."""
    width = hbar / 4 if width is None else width
    if not 0 < width <= hbar / 2:
        raise HilbertError("bump width must lie in (0, hbar/2]")
    modes = tuple(CohomologicalMode(k, hbar * k, width) for k in range(-K, K + 1))
    return CohomologicalBasis(modes, hbar, np.eye(len(modes)))


@dataclass(frozen=True)
class ExactnessReport:
    exact: bool
    value_at_bs_point: float
    primitive: Callable | None


def p_exactness(mode: CohomologicalMode, hbar: float, tol: float = 1e-14) -> ExactnessReport:
    """psi is P-exact iff its coefficient vanishes at p = hbar k.

    Solving (d/dphi - i p/hbar) f = psi mode by mode gives
    f_k(p) = omega_k(p) / (i (k - p/hbar)), smooth exactly when omega_k(hbar k) = 0.
    """
    at = float(mode.coefficient(hbar * mode.k))
    exact = abs(at) <= tol
    prim = None
    if exact:
        def prim(p, m=mode):
            p = np.asarray(p, dtype=float)
            den = 1j * (m.k - p / hbar)
            safe = np.where(np.abs(den) < 1e-300, 1.0, den)
            return np.where(np.abs(den) < 1e-300, 0.0, m.coefficient(p) / safe)
    return ExactnessReport(exact, at, prim)


@dataclass(frozen=True)
class DegreeZeroResult:
    solutions: list
    reason: str


def polarized_sections_cylinder(K: int, hbar: float = 1.0, p_grid: np.ndarray | None = None) -> DegreeZeroResult:
    """Smooth f with (d/dphi - i p/hbar) f = 0, sought mode by mode on a p grid.

    Mode n can only be supported where n - p/hbar = 0; a continuous nonzero
    solution needs an interval of support, so isolated zeros do not count.
    """
    if p_grid is None:
        p_grid = np.linspace(-(K + 0.5) * hbar, (K + 0.5) * hbar, 20 * (2 * K + 1) + 1)
    sols = []
    for n in range(-K, K + 1):
        coeff = np.abs(n - p_grid / hbar)
        null = coeff < 1e-12
        if np.any(null[:-1] & null[1:]):
            sols.append(n)
    reason = "no solutions: support would be confined to the points p = hbar n" if not sols else "smooth solutions found"
    return DegreeZeroResult(sols, reason)


# ---------------------------------------------------------------------------
# position grid (vertical polarization on R^2)


def position_grid_space(N: int = 256, L: float | None = None, hbar: float = 1.0) -> TruncatedHilbertSpace:
    """Interior points of [-L, L] with Dirichlet truncation; Gram = h * identity."""
    L = 10 * math.sqrt(hbar) if L is None else L
    h = 2 * L / (N + 1)
    q = -L + h * np.arange(1, N + 1)
    return TruncatedHilbertSpace("grid", tuple(q.tolist()), h * np.eye(N), hbar, "vertical", True, {"L": L, "h": h})


def grid_points(space: TruncatedHilbertSpace) -> np.ndarray:
    return np.array(space.labels, dtype=float)


def derivative_stencil(N: int, h: float) -> np.ndarray:
    """4th-order central first derivative, antisymmetric, zero outside the grid."""
    D = np.zeros((N, N))
    for off, c in ((1, 8.0), (2, -1.0)):
        idx = np.arange(N - off)
        D[idx, idx + off] = c
        D[idx + off, idx] = -c
    return D / (12 * h)


def _split_vertical(f: PolyObservable) -> tuple[PolyObservable, PolyObservable]:
    if f.n != 1:
        raise HilbertError("grid quantization is for one degree of freedom")
    if f.p_degree() > 1:
        raise HilbertError("not quantizable in the vertical polarization")
    f0, f1 = {}, {}
    for (a, b), v in f.terms.items():
        (f0 if b == 0 else f1)[(a, 0)] = v
    return PolyObservable(1, f0), PolyObservable(1, f1)


def _poly_values(f: PolyObservable, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(q, dtype=complex)
    for (a, _), v in f.terms.items():
        out += complex(v) * q**a
    return out


def vertical_quantize_Rn(f: PolyObservable, space: TruncatedHilbertSpace) -> QuantumOperator:
    """Q_f for f = f0(q) + f1(q) p on the position grid.

    -i hbar f1 d/dq - (i hbar/2) f1' + f0, with the derivative and divergence
    terms combined as -(i hbar/2)(F D + D F) so the matrix is exactly Hermitian.
    """
    if space.kind != "grid":
        raise HilbertError("vertical quantization needs a position grid")
    f0, f1 = _split_vertical(f)
    q = grid_points(space)
    D = derivative_stencil(len(q), space.meta["h"])
    F = np.diag(_poly_values(f1, q))
    M = -0.5j * space.hbar * (F @ D + D @ F) + np.diag(_poly_values(f0, q))
    real = all(v.im == 0 for v in f.terms.values())
    return QuantumOperator(space, M, real, str(f))


def smooth_test_states(space: TruncatedHilbertSpace) -> np.ndarray:
    """A few Gaussian wave packets, columns of the returned array."""
    q = grid_points(space)
    hb = space.hbar
    cols = [np.exp(-(q - c) ** 2 / (2 * hb)) * np.exp(1j * k * q) for c, k in ((0.0, 0.0), (0.7, 0.5), (-1.1, -0.3))]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class DiracReport:
    q4_residual: float
    q3_residual: float
    tolerance: float
    kind: str

    @property
    def passed(self) -> bool:
        return max(self.q4_residual, self.q3_residual) <= self.tolerance

    def as_dict(self) -> dict:
        return {"q4_residual": self.q4_residual, "q3_residual": self.q3_residual, "tolerance": self.tolerance,
                "residual_kind": self.kind, "passed": self.passed}


def dirac_q3_q4_matrix_check(pairs, space: TruncatedHilbertSpace, tol: float | None = None) -> DiracReport:
    """Residuals of [Q_f, Q_g] + i hbar Q_{f,g} and of Q_f - (Q_fbar)^*.

    Grid bases report the residual on smooth test states (discretization error);
    Bargmann bases report matrix norms (exact formulas).
    """
    if space.kind == "grid":
        quant, kind = vertical_quantize_Rn, "smooth-state"
        tol = 10 * space.meta["h"] ** 4 if tol is None else tol
        states = smooth_test_states(space)
        norms = np.linalg.norm(states, axis=0)
    elif space.kind == "bargmann":
        quant, kind = bargmann_quantize, "matrix"
        tol = 1e-10 if tol is None else tol
        states = None
    else:
        raise HilbertError(f"no quantization rule for basis {space.kind!r}")
    q4 = q3 = 0.0
    for f, g in pairs:
        Qf, Qg = quant(f, space), quant(g, space)
        Qfg = quant(poisson_bracket_exact(f, g), space)
        R = Qf.matrix @ Qg.matrix - Qg.matrix @ Qf.matrix + 1j * space.hbar * Qfg.matrix
        A = Qf.matrix - adjoint(quant(f.conjugate(), space)).matrix
        if states is None:
            q4 = max(q4, float(np.linalg.norm(R, 2)))
            q3 = max(q3, float(np.linalg.norm(A, 2)))
        else:
            q4 = max(q4, float(np.max(np.linalg.norm(R @ states, axis=0) / norms)))
            q3 = max(q3, float(np.max(np.linalg.norm(A @ states, axis=0) / norms)))
    return DiracReport(q4, q3, tol, kind)
