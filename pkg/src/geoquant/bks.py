"""Pairing between the vertical and horizontal polarizations of the plane.

States live on a periodic grid ``q_j = -L + j h`` (``h = 2L/N``). The momentum
grid is ``p_k = (k - N/2) dp`` with ``dp = 2 pi hbar / (N h)``, and the pairing
induces the map

    (U psi)(p_k) = h / sqrt(2 pi hbar) * sum_j psi(q_j) exp(i p_k q_j / hbar),

which is unitary for the inner products ``h sum`` and ``dp sum``. The kernel
sign means ``U^{-1} p U = +i hbar d/dq``; quantities built from ``p^2`` do not
see this.

The stationary-phase route quantizes ``p^2/2`` through the flow
``(q, p) -> (q + t p, p)``. Pairing the transported polarization with the
vertical one gives the chirp transform

    (U_t psi)(q) = (2 pi hbar t)^{-1/2} int psi(q - u) exp(i u^2 / (2 hbar t)) du
                 = e^{i pi/4} (psi + t (i hbar/2) psi'' + O(t^2)),

and ``i hbar d/dt`` at ``t = 0`` yields ``-e^{i pi/4} (hbar^2/2) psi''``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .hilbert import derivative_stencil

TAIL_TOL = 1e-10
EDGE_FRACTION = 0.1


class BKSError(ValueError):
    pass


class StationaryPhaseError(BKSError):
    pass


@dataclass(frozen=True)
class GridState:
    """Samples of a half-form wave function on a uniform periodic grid.

    ``label`` is "position" (values of g(q) sqrt(dq)) or "momentum"
    (values of h(p) sqrt(dp)). ``L`` is the half-extent of that grid.
    """

    values: np.ndarray
    L: float
    hbar: float = 1.0
    label: str = "position"
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 4 or v.size % 2:
            raise BKSError("grid states need an even number of samples")
        if not np.all(np.isfinite(v)):
            raise BKSError("grid state has non-finite values")
        if self.label not in ("position", "momentum"):
            raise BKSError(f"unknown grid label {self.label!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def half_form(self) -> str:
        return "sqrt_dq" if self.label == "position" else "sqrt_dp"

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return 2 * self.L / self.N

    @property
    def points(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.N)

    def inner(self, other: "GridState") -> complex:
        _same_grid(self, other)
        return complex(self.spacing * np.vdot(self.values, other.values))

    def norm(self) -> float:
        return math.sqrt(self.spacing * float(np.sum(np.abs(self.values) ** 2)))

    def with_values(self, values, warns: Sequence[str] = ()) -> "GridState":
        return GridState(values, self.L, self.hbar, self.label, tuple(self.warnings) + tuple(warns))

    def __add__(self, other: "GridState") -> "GridState":
        _same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __mul__(self, c) -> "GridState":
        return self.with_values(complex(c) * self.values)

    __rmul__ = __mul__


def _same_grid(a: GridState, b: GridState):
    if a.label != b.label or a.N != b.N or not math.isclose(a.L, b.L) or not math.isclose(a.hbar, b.hbar):
        raise BKSError("states live on different grids")


def position_state(fn: Callable, N: int = 256, L: float | None = None, hbar: float = 1.0) -> GridState:
    L = 10 * math.sqrt(hbar) if L is None else L
    q = -L + (2 * L / N) * np.arange(N)
    return GridState(fn(q), L, hbar, "position")


def momentum_half_extent(N: int, L: float, hbar: float) -> float:
    """Half-extent of the momentum grid dual to N points on [-L, L)."""
    return N * math.pi * hbar / (2 * L)


def tail_mass(state: GridState, fraction: float = EDGE_FRACTION) -> float:
    """Share of the squared norm sitting in the outer ``fraction`` of the grid."""
    x = state.points
    w = np.abs(state.values) ** 2
    total = float(np.sum(w))
    if total == 0:
        return 0.0
    return float(np.sum(w[np.abs(x) > (1 - fraction) * state.L])) / total


def _band_warnings(state: GridState, image: GridState, tol: float) -> list[str]:
    out = []
    for s in (state, image):
        m = tail_mass(s)
        if m > tol:
            out.append(f"{s.label} tail mass {m:.3e} exceeds {tol:.0e}; the state is not band-limited on this grid")
    return out


def _centered_dft(v: np.ndarray) -> np.ndarray:
    # sum_n v_n exp(2 pi i m n / N) with m, n centred on N/2
    return np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(v))) * v.size


def _centered_idft(v: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(v)))


def bks_fourier_map(psi: GridState, tail_tol: float = TAIL_TOL) -> GridState:
    """Position half-forms to momentum half-forms.

    A warning is attached to the result (and emitted) when either side has
    more than ``tail_tol`` of its mass near the grid edge.
    """
    if psi.label != "position":
        raise BKSError("the Fourier map takes a position-labelled state")
    h = psi.spacing
    vals = h / math.sqrt(2 * math.pi * psi.hbar) * _centered_dft(psi.values)
    out = GridState(vals, momentum_half_extent(psi.N, psi.L, psi.hbar), psi.hbar, "momentum", psi.warnings)
    notes = _band_warnings(psi, out, tail_tol)
    for n in notes:
        warnings.warn(n, RuntimeWarning, stacklevel=2)
    return out.with_values(out.values, notes)


def bks_inverse_map(phi: GridState, L: float | None = None) -> GridState:
    if phi.label != "momentum":
        raise BKSError("the inverse map takes a momentum-labelled state")
    L = momentum_half_extent(phi.N, phi.L, phi.hbar) if L is None else L
    dp = phi.spacing
    vals = dp / math.sqrt(2 * math.pi * phi.hbar) * _centered_idft(phi.values)
    return GridState(vals, L, phi.hbar, "position", phi.warnings)


def fourier_matrix(N: int, L: float, hbar: float = 1.0) -> np.ndarray:
    """Dense matrix of the map on sample vectors."""
    h = 2 * L / N
    q = -L + h * np.arange(N)
    p = (np.arange(N) - N // 2) * (2 * math.pi * hbar / (N * h))
    return h / math.sqrt(2 * math.pi * hbar) * np.exp(1j * np.outer(p, q) / hbar)


def momentum_points(N: int, L: float, hbar: float = 1.0) -> np.ndarray:
    return (np.arange(N) - N // 2) * (math.pi * hbar / L)


def multiplier_operator(N: int, L: float, hbar: float, symbol: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Matrix of ``U^{-1} symbol(p) U`` on position samples."""
    U = fourier_matrix(N, L, hbar)
    dp = math.pi * hbar / L
    h = 2 * L / N
    # U^{-1} = (dp/h) U^H on sample vectors
    return (dp / h) * U.conj().T @ (symbol(momentum_points(N, L, hbar))[:, None] * U)


def quantize_p2_via_pairing(psi: GridState, hbar: float | None = None, tail_tol: float = TAIL_TOL) -> GridState:
    """U^{-1} (p^2 U psi); on band-limited states this is -hbar^2 psi''."""
    if hbar is not None and not math.isclose(hbar, psi.hbar):
        raise BKSError("hbar does not match the state")
    phi = bks_fourier_map(psi, tail_tol)
    p = phi.points
    return bks_inverse_map(phi.with_values(p**2 * phi.values), psi.L)


def p2_pairing_matrix(N: int = 256, L: float | None = None, hbar: float = 1.0) -> np.ndarray:
    L = 10 * math.sqrt(hbar) if L is None else L
    return multiplier_operator(N, L, hbar, lambda p: p**2)


def periodic_second_derivative(N: int, h: float) -> np.ndarray:
    """4th-order central second derivative with periodic wrap."""
    D = np.zeros((N, N))
    idx = np.arange(N)
    for off, c in ((0, -30.0), (1, 16.0), (-1, 16.0), (2, -1.0), (-2, -1.0)):
        D[idx, (idx + off) % N] += c
    return D / (12 * h * h)


def spectral_derivative(psi: GridState, order: int = 1) -> GridState:
    """d^order/dq^order through the momentum grid."""
    phi = bks_fourier_map(psi, tail_tol=np.inf)
    k = -1j * phi.points / psi.hbar  # U f' = (-i p / hbar) U f
    return bks_inverse_map(phi.with_values(k**order * phi.values), psi.L)


@dataclass(frozen=True)
class CommutatorReport:
    residual: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"residual": self.residual, "tolerance": self.tolerance, "passed": self.passed}


def p2_commutator_check(N: int = 256, L: float | None = None, hbar: float = 1.0, tol: float | None = None) -> CommutatorReport:
    """[Q_{p^2/2}, Q_q] + i hbar Q_p on smooth packets, Q_p = -i hbar d/dq.

    Q_p uses the 4th-order stencil, so the residual is at stencil level.
    """
    L = 10 * math.sqrt(hbar) if L is None else L
    h = 2 * L / N
    q = -L + h * np.arange(N)
    H = p2_pairing_matrix(N, L, hbar) / 2
    Q = np.diag(q)
    P = -1j * hbar * derivative_stencil(N, h)
    C = H @ Q - Q @ H + 1j * hbar * P
    states = [np.exp(-(q - c) ** 2 / (2 * hbar)) * np.exp(1j * k * q) for c, k in ((0.0, 0.0), (0.8, 0.6), (-1.2, -0.4))]
    res = max(math.sqrt(h) * float(np.linalg.norm(C @ s)) for s in states)
    tol = 10 * hbar * h**4 if tol is None else tol
    return CommutatorReport(res, tol, res <= tol)


# stationary phase


@dataclass(frozen=True)
class ChirpIntegral:
    value: complex
    error: float
    window: float
    evaluations: int


def chirp_integral(
    g: Callable[[np.ndarray], np.ndarray],
    q: float,
    t: float,
    hbar: float = 1.0,
    extent: float | tuple[float, float] = 40.0,
    window: float = 6.0,
    nodes: int = 96,
    epsabs: float = 1e-13,
    epsrel: float = 1e-12,
    limit: int = 2000,
) -> ChirpIntegral:
    """int g(q - u) exp(i u^2 / (2 hbar t)) du.

    Gauss-Legendre on |u| <= window*sqrt(hbar t); beyond that v = u^2 turns the
    chirp into a plain Fourier weight and scipy's QAWO handles each tail up to
    |u| = extent (a pair gives separate limits for u > 0 and u < 0).
    """
    if t <= 0:
        raise StationaryPhaseError("t must be positive")
    up, um = (extent, extent) if np.isscalar(extent) else extent
    c = window * math.sqrt(hbar * t)
    if c >= min(up, um):
        raise StationaryPhaseError(f"stationary window {c:.3g} exceeds the integration extent")
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = c * x
    core = c * np.sum(w * np.asarray(g(q - u), dtype=complex) * np.exp(1j * u**2 / (2 * hbar * t)))
    omega = 1.0 / (2 * hbar * t)
    total, err, evals = complex(core), 0.0, nodes
    for sign, top in ((1.0, up), (-1.0, um)):
        def f(v, s=sign):
            r = math.sqrt(v)
            return complex(g(np.asarray(q - s * r))) / (2 * r)
        for part, wt in ((1.0, "cos"), (1j, "sin")):
            for comp in ("real", "imag"):
                fn = (lambda v, f=f: f(v).real) if comp == "real" else (lambda v, f=f: f(v).imag)
                out = integrate.quad(fn, c * c, top * top, weight=wt, wvar=omega, epsabs=epsabs, epsrel=epsrel,
                                     limit=limit, maxp1=400, full_output=1)
                if len(out) == 4:
                    raise StationaryPhaseError(
                        f"tail quadrature did not converge at q={q}, t={t}: {out[3].strip()} (abserr {out[1]:.2e})"
                    )
                val = out[0] if comp == "real" else 1j * out[0]
                total += part * val
                err += out[1]
                evals += out[2]["neval"]
    return ChirpIntegral(total, err, c, evals)


@dataclass(frozen=True)
class StationaryPhaseRow:
    t: float
    integral: complex
    asymptote: complex
    rel_error: float
    quad_error: float

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "integral_re": self.integral.real,
            "integral_im": self.integral.imag,
            "asymptote_re": self.asymptote.real,
            "asymptote_im": self.asymptote.imag,
            "rel_error": self.rel_error,
            "quad_error": self.quad_error,
        }


def two_term_asymptote(g0: complex, g2: complex, t: float, hbar: float = 1.0) -> complex:
    """sqrt(2 pi hbar t) e^{i pi/4} (g + t (i hbar/2) g'')."""
    return math.sqrt(2 * math.pi * hbar * t) * np.exp(1j * math.pi / 4) * (g0 + t * 0.5j * hbar * g2)


def stationary_phase_check(
    g: Callable,
    g2: Callable,
    ts: Sequence[float],
    hbar: float = 1.0,
    q: float = 0.0,
    **quad_kw,
) -> list[StationaryPhaseRow]:
    """Quadrature value of the chirp integral against the two-term asymptote."""
    g0, gpp = complex(g(np.asarray(q))), complex(g2(np.asarray(q)))
    rows = []
    for t in ts:
        ci = chirp_integral(g, q, t, hbar, **quad_kw)
        a = two_term_asymptote(g0, gpp, t, hbar)
        rows.append(StationaryPhaseRow(float(t), ci.value, complex(a), abs(ci.value - a) / abs(a), ci.error))
    return rows


def error_ratios(rows: Sequence[StationaryPhaseRow]) -> list[float]:
    return [b.rel_error / a.rel_error for a, b in zip(rows, rows[1:])]


def spectral_interpolant(psi: GridState) -> Callable[[np.ndarray], np.ndarray]:
    """Band-limited continuation of the samples (periodic with period 2L)."""
    phi = bks_fourier_map(psi, tail_tol=np.inf)
    p = phi.points
    c = phi.values * phi.spacing / math.sqrt(2 * math.pi * psi.hbar)

    def ev(x):
        x = np.asarray(x, dtype=float)
        return (np.exp(-1j * np.multiply.outer(x, p) / psi.hbar) @ c).reshape(x.shape)

    return ev


def richardson_weights(ratios: Sequence[float] = (1.0, 0.5, 0.25)) -> np.ndarray:
    """Weights w with sum w_i F(t_i) = F'(0) for F quadratic in t (t_i = ratio_i * t0, t0 = 1)."""
    r = np.asarray(ratios, dtype=float)
    V = np.vander(r, len(r), increasing=True).T
    e = np.zeros(len(r))
    e[1] = 1.0
    return np.linalg.solve(V, e)


@dataclass(frozen=True)
class StationaryPhaseQuantization:
    probes: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    reference: np.ndarray
    limit: np.ndarray
    magnitude_error: float
    phase_offset: float
    phase_error: float
    residual: float
    t_values: tuple

    def as_dict(self) -> dict:
        return {
            "probes": self.probes.tolist(),
            "raw_re": self.raw.real.tolist(),
            "raw_im": self.raw.imag.tolist(),
            "normalized_re": self.normalized.real.tolist(),
            "normalized_im": self.normalized.imag.tolist(),
            "reference": self.reference.real.tolist(),
            "magnitude_error": self.magnitude_error,
            "phase_offset": self.phase_offset,
            "phase_error": self.phase_error,
            "residual": self.residual,
            "t_values": list(self.t_values),
        }


def quantize_p2_stationary_phase(
    psi: GridState,
    hbar: float | None = None,
    probes: Sequence[float] = (0.0, 0.4, 1.6, 2.2),
    t0: float | None = None,
    second_derivative: Callable | None = None,
    margin: float = 0.1,
) -> StationaryPhaseQuantization:
    """Q(p^2/2) psi at probe points via i hbar d/dt of the chirp pairing.

    The t -> 0 derivative is the three-point extrapolation over t0, t0/2, t0/4
    (exact for a quadratic in t). ``raw`` keeps the e^{i pi/4} factor,
    ``normalized`` divides it out. The reference is -(hbar^2/2) psi'' from
    ``second_derivative`` if supplied, else spectrally.
    """
    if psi.label != "position":
        raise BKSError("stationary-phase quantization takes a position-labelled state")
    hb = psi.hbar
    if hbar is not None and not math.isclose(hbar, hb):
        raise BKSError("hbar does not match the state")
    t0 = 1e-2 * hb if t0 is None else t0
    x = psi.points
    idx = np.array([int(np.argmin(np.abs(x - p))) for p in probes])
    qs = x[idx]
    g = spectral_interpolant(psi)
    ratios = (1.0, 0.5, 0.25)
    ts = tuple(t0 * r for r in ratios)
    w = richardson_weights(ratios)
    fits = np.zeros((len(qs), 3), dtype=complex)
    for i, qv in enumerate(qs):
        ext = ((1 - margin) * psi.L + qv, (1 - margin) * psi.L - qv)
        for j, t in enumerate(ts):
            I = chirp_integral(g, float(qv), t, hb, extent=ext).value
            fits[i, j] = I / math.sqrt(2 * math.pi * hb * t)
    deriv = fits @ w / t0
    limit = _extrapolate_value(fits, ratios)
    raw = 1j * hb * deriv
    phase = np.exp(1j * math.pi / 4)
    normalized = raw / phase
    if second_derivative is not None:
        d2 = np.asarray(second_derivative(qs), dtype=complex)
    else:
        d2 = spectral_derivative(psi, 2).values[idx]
    ref = -0.5 * hb**2 * d2
    mag = float(np.max(np.abs(np.abs(raw) - np.abs(ref)) / np.abs(ref)))
    offsets = np.angle(raw / ref)
    off = float(np.mean(offsets))
    return StationaryPhaseQuantization(
        qs,
        raw,
        normalized,
        ref,
        limit,
        mag,
        off,
        float(np.max(np.abs(offsets - math.pi / 4))),
        float(np.max(np.abs(normalized - ref))),
        ts,
    )


def _extrapolate_value(fits: np.ndarray, ratios) -> np.ndarray:
    r = np.asarray(ratios, dtype=float)
    V = np.vander(r, len(r), increasing=True).T
    e = np.zeros(len(r))
    e[0] = 1.0
    return fits @ np.linalg.solve(V, e)
