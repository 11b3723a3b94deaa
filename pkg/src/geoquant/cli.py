"""Command-line front end: one subcommand per experiment.

Every run prints a report with a top-level ``"schema": "1"``, the parameters
used, the results, the tolerances and one verdict per checked claim. The exit
code is 0 when every verdict passes, 1 on a numerical failure and 2 on a usage
error. Wall time goes to stderr unless ``--timing`` puts it in the report, so
that repeated runs print identical reports.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Callable

import numpy as np

SCHEMA = "1"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# serialization


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, obj))


def to_csv(report: dict) -> str:
    """Table results become a plain table; anything else is flattened to key,value rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    table = report.get("results", {}).get("table")
    if isinstance(table, list) and table and all(isinstance(r, dict) for r in table):
        cols = list(table[0])
        w.writerow(cols)
        for r in table:
            w.writerow([r.get(c, "") for c in cols])
        return buf.getvalue()
    rows: list = []
    _flatten("", {k: v for k, v in report.items()}, rows)
    w.writerow(["key", "value"])
    for k, v in rows:
        w.writerow([k, json.dumps(v) if isinstance(v, (bool, type(None))) else v])
    return buf.getvalue()


def make_report(name: str, params: dict, results: dict, tolerances: dict, verdicts: dict, error: str | None = None) -> dict:
    rep = {
        "schema": SCHEMA,
        "subcommand": name,
        "parameters": params,
        "results": results,
        "tolerances": tolerances,
        "verdicts": verdicts,
        "passed": error is None and bool(verdicts) and all(verdicts.values()),
    }
    if error is not None:
        rep["error"] = error
    return jsonable(rep)


# ---------------------------------------------------------------------------
# subcommands; each returns (params, results, tolerances, verdicts)


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def cmd_spectrum_ho(args):
    from . import hilbert as hb

    hbar = args.hbar
    cutoff = 8 if args.cutoff is None else args.cutoff
    tol = _tol(args, 1e-12)
    space = hb.bargmann_space(cutoff, hbar, not args.no_half_form)
    H = hb.quantize_harmonic_oscillator(space)
    ev = np.sort(hb.spectrum(H))
    n = np.arange(space.dim)
    expected = hbar * (n + (0.0 if args.no_half_form else 0.5))
    dev = float(np.max(np.abs(ev - expected)))
    gram = space.check_gram()
    return (
        {"hbar": hbar, "cutoff": cutoff, "half_form": not args.no_half_form},
        {"eigenvalues": ev, "max_deviation": dev, "self_adjoint_residual": hb.self_adjoint_residual(H), "gram": gram},
        {"max_deviation": tol},
        {"spectrum": dev <= tol, "gram_positive": gram["passed"]},
    )


def cmd_sphere_dim(args):
    from . import hilbert as hb

    tol = _tol(args, 1e-8)
    levels = [args.level] if args.level is not None else list(range(11))
    rows, ok_dim, ok_pd, ok_div, ok_quad = [], True, True, True, True
    for k in levels:
        space = hb.sphere_space(k)
        gram = space.check_gram()
        fires = hb.sphere_norm_divergence(k, k + 1).diverges
        quiet = not hb.sphere_norm_divergence(k, k).diverges
        row = {"k": k, "dim": space.dim, "min_gram_eigenvalue": gram["min_eigenvalue"],
               "divergence_detected_z^(k+1)": fires, "z^k_convergent": quiet}
        if k <= 6:
            G = space.gram
            Q = hb.sphere_gram_quadrature(k)
            row["gram_vs_quadrature"] = float(np.max(np.abs(G - Q)))
            ok_quad &= row["gram_vs_quadrature"] <= tol
        ok_dim &= space.dim == k + 1
        ok_pd &= gram["passed"]
        ok_div &= fires and quiet
        rows.append(row)
    return (
        {"levels": levels},
        {"table": rows},
        {"gram_vs_quadrature": tol},
        {"dimension_k_plus_1": ok_dim, "gram_positive_definite": ok_pd, "divergence_detector": ok_div,
         "gram_closed_form": ok_quad},
    )


def cmd_sphere_gram(args):
    from . import hilbert as hb

    k = 3 if args.level is None else args.level
    tol = _tol(args, 1e-8)
    space = hb.sphere_space(k)
    Q = hb.sphere_gram_quadrature(k)
    diff = float(np.max(np.abs(space.gram - Q)))
    gram = space.check_gram()
    return (
        {"k": k},
        {"closed_form_diagonal": np.real(np.diag(space.gram)), "quadrature_diagonal": np.real(np.diag(Q)),
         "max_difference": diff, "min_eigenvalue": gram["min_eigenvalue"]},
        {"max_difference": tol},
        {"closed_form_matches_quadrature": diff <= tol, "positive_definite": gram["passed"]},
    )


def cmd_verlinde(args):
    from . import cswzw

    tol = _tol(args, 1e-9)
    if args.genus is not None and args.level is not None:
        r = cswzw.verlinde_su2_dim(cswzw.VerlindeInput(args.genus, args.level))
        verdicts = {"integral": r.residual <= tol}
        if args.genus == 1:
            verdicts["genus_one_is_k_plus_1"] = abs(r.value - (args.level + 1)) <= 1e-12
        return ({"genus": args.genus, "level": args.level}, {"table": [r.as_dict()], "value": r.rounded},
                {"residual": tol, "genus_one": 1e-12}, verdicts)
    genera = [args.genus] if args.genus is not None else list(range(5))
    levels = [args.level] if args.level is not None else list(range(1, 11))
    table = cswzw.verlinde_table(genera, levels)
    verdicts = {"integral": all(r.residual <= tol for r in table)}
    g1 = [r for r in table if r.genus == 1]
    if g1:
        verdicts["genus_one_is_k_plus_1"] = all(abs(r.value - (r.level + 1)) <= 1e-12 for r in g1)
    g0 = [r for r in table if r.genus == 0]
    if g0:
        verdicts["genus_zero_is_1"] = all(r.rounded == 1 and r.residual <= tol for r in g0)
    return ({"genera": genera, "levels": levels}, {"table": [r.as_dict() for r in table]},
            {"residual": tol, "genus_one": 1e-12}, verdicts)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}")


def cmd_pw_check(args):
    from . import cswzw

    Ns = _int_list(args.grid) if args.grid else [32, 64, 128]
    if len(Ns) < 2:
        raise UsageError("pw-check needs at least two grid sizes")
    study = cswzw.pw_convergence(Ns)
    lattice = cswzw.pw_convergence(Ns, rule="lattice")
    N = Ns[0]
    A_in, A_out, g, _, _ = cswzw.default_configuration(N)
    one = cswzw.LatticeGroupField.identity(N)
    trivial = cswzw.pw_identity_residual(A_in, A_out, g, one, one).residual
    rows = [r.as_dict() for r in study.rows]
    verdicts = {"second_order": 1.8 <= study.slope <= 2.2, "identity_gauge_exact": trivial == 0.0,
                "lattice_rule_exact": max(r.residual for r in lattice.rows) <= 1e-12}
    if 64 in Ns:
        verdicts["N64_below_1e-3"] = dict(zip(Ns, (r.residual for r in study.rows)))[64] < 1e-3
    return (
        {"grid": Ns},
        {"table": rows, "slope": study.slope, "identity_gauge_residual": trivial,
         "lattice_rule_residuals": [r.residual for r in lattice.rows]},
        {"slope_range": [1.8, 2.2], "lattice_rule": 1e-12},
        verdicts,
    )


def _bundle(args, default: str):
    from . import prequantum as pq

    name = args.preset or default
    if name.endswith(".json"):
        with open(name) as fh:
            return pq.bundle_from_json(fh.read()), "file"
    k = 1 if args.level is None else args.level
    return pq.load_preset(name, args.hbar, k, args.lam), name


def cmd_holonomy(args):
    from . import prequantum as pq

    L, name = _bundle(args, "cylinder-standard")
    tol = _tol(args, 1e-10)
    hbar = L.hbar
    if L.base.name == "cylinder":
        p = 0.7 if args.p is None else args.p
        lam = args.lam
        val = complex(pq.holonomy(L, pq.cylinder_loop(p)))
        expected = complex(np.exp(2j * math.pi * (p / hbar + lam)))
        params = {"bundle": name, "hbar": hbar, "lambda": lam, "p": p}
    elif L.base.name == "S^2":
        r = 0.8 if args.radius is None else args.radius
        k = 1 if args.level is None else args.level
        val = complex(pq.holonomy(L, pq.circle_loop(r, "N")))
        expected = complex(np.exp(2j * math.pi * k * r * r / (1 + r * r)))
        params = {"bundle": name, "hbar": hbar, "k": k, "radius": r}
    else:
        raise UsageError(f"no holonomy experiment for base {L.base.name!r}")
    err = abs(val - expected)
    return params, {"holonomy": val, "expected": expected, "error": err}, {"error": tol}, {"holonomy": err <= tol}


def cmd_bs_scan(args):
    from . import prequantum as pq

    L, name = _bundle(args, "cylinder-standard")
    if L.base.name != "cylinder":
        raise UsageError("bs-scan runs on a cylinder bundle")
    hbar, lam = L.hbar, args.lam
    tol = _tol(args, 1e-8)
    pmin = -3.5 * hbar if args.pmin is None else args.pmin
    pmax = 3.5 * hbar if args.pmax is None else args.pmax
    res = pq.bohr_sommerfeld_scan(L, pmin, pmax, tol=tol)
    n = np.arange(math.ceil(pmin / hbar + lam), math.floor(pmax / hbar + lam) + 1)
    expected = hbar * (n - lam)
    expected = expected[(expected >= pmin - tol) & (expected <= pmax + tol)]
    match = len(res.roots) == len(expected) and (
        not len(expected) or float(np.max(np.abs(np.array(res.roots) - expected))) <= tol
    )
    return (
        {"bundle": name, "hbar": hbar, "lambda": lam, "pmin": pmin, "pmax": pmax},
        {"roots": res.roots, "in_hbar_units": [r / hbar for r in res.roots], "expected": expected,
         "max_holonomy_residual": res.max_residual},
        {"root": tol},
        {"bohr_sommerfeld_set": bool(match)},
    )


def cmd_weil(args):
    from . import chartcalc as cc
    from . import prequantum as pq

    tol = _tol(args, 1e-8)
    kmax = 5 if args.level is None else args.level
    hbar = args.hbar
    space = cc.build_sphere_atlas()
    cycle = cc.sphere_cycle(space)
    rows, ok = [], True
    for k in range(1, kmax + 1):
        r = pq.weil_integrality(pq.sphere_symplectic_form(k, hbar, space), cycle, hbar, tol)
        rows.append({"k": k, "integral": r.integral.real, "expected": 2 * math.pi * hbar * k,
                     "error": abs(r.integral - 2 * math.pi * hbar * k), "verdict": r.verdict})
        ok &= r.verdict and r.integer == k
    scaled = pq.weil_integrality(pq.sphere_symplectic_form(1, hbar, space) * args.scale, cycle, hbar, tol)
    return (
        {"hbar": hbar, "kmax": kmax, "scale": args.scale},
        {"table": rows, "rescaled": scaled.as_dict(), "rescaled_integral": scaled.verdict},
        {"integral": tol},
        {"integrality": ok, "rescaled_classified": scaled.verdict == (abs(args.scale - round(args.scale)) < 1e-12)},
    )


def cmd_gvh(args):
    from . import weylalg as wa

    rep = wa.gvh_analysis()
    disc = rep.discrepancy
    differ = not (rep.route_cubic - rep.route_mixed).is_zero()
    return (
        {},
        {"bracket_p3_q3": str(rep.bracket_coeff_cubic), "bracket_p2q_q2p": str(rep.bracket_coeff_mixed),
         "discrepancy": wa.format_operator(disc), "route_cubic_minus_weyl": wa.format_operator(rep.offset_cubic),
         "route_mixed_minus_weyl": wa.format_operator(rep.offset_mixed)},
        {"arithmetic": "exact"},
        {"discrepancy_nonzero_scalar": disc.is_scalar() and not disc.is_zero(), "routes_differ": differ},
    )


def cmd_dirac_q4(args):
    from . import weylalg as wa

    deg = 4 if args.degree is None else args.degree
    mons = wa.monomials(deg)
    bad = []
    for f in mons:
        for g in mons:
            if not wa.dirac_q4_residual(f, g).is_zero():
                bad.append([str(f), str(g)])
    return (
        {"max_degree": deg},
        {"pairs": len(mons) ** 2, "nonzero_residuals": bad},
        {"arithmetic": "exact"},
        {"q4_all_pairs": not bad},
    )


def cmd_vacuum_angles(args):
    from . import hilbert as hb

    K = 5 if args.cutoff is None else args.cutoff
    hbar = args.hbar
    spectra = {}
    for lam in (0.0, 0.5, 1.0):
        op = hb.cylinder_vertical_quantize_p(lam, K, hbar, hb.compensating_shift(lam))
        spectra[lam] = np.sort(hb.spectrum(op))
    return (
        {"cutoff": K, "hbar": hbar, "lambdas": [0.0, 0.5, 1.0]},
        {"spectra": {str(k): v for k, v in spectra.items()},
         "shifts": {str(lam): hb.compensating_shift(lam) for lam in spectra}},
        {"set_equality": 1e-12},
        {"integer_lambda_coincide": hb.spectra_coincide(spectra[0.0], spectra[1.0]),
         "half_lambda_disjoint": hb.spectra_disjoint(spectra[0.0], spectra[0.5])},
    )


def cmd_bks_p2(args):
    from . import bks

    N = 256 if args.grid is None else _int_list(args.grid)[0]
    hbar = args.hbar
    L = 10 * math.sqrt(hbar)
    tol = _tol(args, 1e-6)
    psi = bks.position_state(lambda q: np.exp(-q * q / (2 * hbar)), N, L, hbar)
    q = psi.points
    exact = -(hbar**2) * (q * q / hbar**2 - 1 / hbar) * psi.values
    pair = bks.quantize_p2_via_pairing(psi)
    pair_err = float(np.max(np.abs(pair.values - exact)))
    stencil = -(hbar**2) * bks.periodic_second_derivative(N, psi.spacing) @ psi.values
    stencil_gap = float(np.max(np.abs(pair.values - stencil)))
    sp = bks.quantize_p2_stationary_phase(
        psi, second_derivative=lambda x: (x * x / hbar**2 - 1 / hbar) * np.exp(-x * x / (2 * hbar))
    )
    idx = [int(np.argmin(np.abs(q - p))) for p in sp.probes]
    cross = float(np.max(np.abs(sp.normalized - pair.values[idx] / 2)))
    comm = bks.p2_commutator_check(N, L, hbar)
    return (
        {"grid": N, "L": L, "hbar": hbar, "state": "exp(-q^2/(2 hbar))"},
        {"pairing_error": pair_err, "pairing_vs_4th_order_stencil": stencil_gap, "stationary_phase": sp.as_dict(),
         "cross_method_gap": cross, "commutator": comm.as_dict(), "warnings": list(pair.warnings)},
        {"pairing": tol, "magnitude": 0.01, "phase": 1e-3, "cross_method": 1e-3},
        {"pairing_matches_second_derivative": pair_err <= tol, "stationary_phase_magnitude": sp.magnitude_error <= 0.01,
         "stationary_phase_phase": sp.phase_error <= 1e-3, "methods_agree": cross <= 1e-3,
         "commutator": comm.passed},
    )


def cmd_stationary_phase(args):
    from . import bks

    hbar = args.hbar
    ts = [0.1 * 2.0**-m for m in range(5)]
    g = lambda x: np.exp(-np.asarray(x) ** 2 / 2)
    g2 = lambda x: (np.asarray(x) ** 2 - 1) * np.exp(-np.asarray(x) ** 2 / 2)
    rows = bks.stationary_phase_check(g, g2, ts, hbar)
    ratios = bks.error_ratios(rows)
    at = bks.stationary_phase_check(g, g2, [1e-3, 1e-4], hbar)
    lead = at[1].integral / math.sqrt(2 * math.pi * hbar * 1e-4)
    phase_err = abs(float(np.angle(lead)) - math.pi / 4)
    trend = all(abs(b - 0.25) <= abs(a - 0.25) + 1e-12 for a, b in zip(ratios, ratios[1:]))
    tol = _tol(args, 0.01)
    table = [r.as_dict() for r in rows + at]
    return (
        {"hbar": hbar, "q": 0.0, "profile": "exp(-x^2/2)", "t_decade": ts},
        {"table": table, "error_ratios": ratios, "rel_error_t1e-3": at[0].rel_error, "leading_phase_error_t1e-4": phase_err},
        {"rel_error": tol, "phase": 1e-3, "ratio_window": [0.2, 0.3]},
        {"rel_error_below_1pct": at[0].rel_error < tol, "ratio_trends_to_quarter": trend and abs(ratios[-1] - 0.25) < 0.05,
         "leading_phase": phase_err <= 1e-3},
    )


def cmd_fubini_study(args):
    from . import chartcalc as cc

    tol = _tol(args, 1e-8)
    space = cc.build_sphere_atlas()
    fs = cc.fubini_study_form(space)
    kahler = cc.kahler_form_from_potential(cc.fubini_study_potential(space))
    pot = cc.max_abs(kahler - fs)
    cov = cc.form_covariance_residual(fs)
    pos = min(float(np.min(fs.evaluate(lab, space.sample(lab))[(0, 1)].real)) for lab in space.labels)
    total = cc.integrate_cycle_with_error(fs, cc.sphere_cycle(space))
    cs = space.check_complex_structure()
    return (
        {"samples": cc.DEFAULT_SAMPLES, "seed": cc.SEED},
        {"potential_residual": pot, "covariance_residual": cov, "min_density": pos, "volume": total.value,
         "volume_quadrature_error": total.error, "complex_structure": cs},
        {"residual": tol},
        {"potential_reproduces_form": pot <= tol, "form_covariant": cov <= tol, "positive": pos > 0,
         "unit_volume": abs(total.value - 1) <= tol},
    )


def cmd_atlas_check(args):
    from . import chartcalc as cc
    from . import prequantum as pq

    tol = _tol(args, 1e-9)
    space = cc.build_sphere_atlas()
    trans = space.check_transitions()
    kernel = cc.kernel_identity_residuals()
    fs = cc.fubini_study_form(space)
    vol = cc.integrate_cycle_with_error(fs, cc.sphere_cycle(space)).value
    pot = cc.max_abs(cc.kahler_form_from_potential(cc.fubini_study_potential(space)) - fs)
    k = 1 if args.level is None else args.level
    coc = pq.check_cocycle(pq.sphere_bundle(k, args.hbar, space))
    verdicts = {f"{name}": val <= tol for name, val in kernel.items()}
    verdicts.update({
        "transitions": max(trans.values()) <= tol,
        "sphere_volume": abs(vol - 1) <= 1e-8,
        "kahler_potential": pot <= 1e-8,
        "bundle_cocycle": coc.passed,
    })
    return (
        {"samples": cc.DEFAULT_SAMPLES, "seed": cc.SEED, "k": k, "hbar": args.hbar},
        {"kernel": kernel, "transitions": trans, "sphere_volume": vol, "kahler_potential_residual": pot,
         "cocycle": coc.as_dict()},
        {"kernel": tol, "volume": 1e-8, "potential": 1e-8},
        verdicts,
    )


def cmd_coh_cylinder(args):
    from . import hilbert as hb

    K = 3 if args.cutoff is None else args.cutoff
    hbar = args.hbar
    basis = hb.cohomological_basis_cylinder(K, hbar)
    nontrivial = [not hb.p_exactness(m, hbar).exact for m in basis.modes]
    off = [hb.p_exactness(hb.CohomologicalMode(m.k, m.center + hbar / 2, m.width), hbar).exact for m in basis.modes]
    deg0 = hb.polarized_sections_cylinder(K, hbar)
    return (
        {"cutoff": K, "hbar": hbar, "width": basis.modes[0].width},
        {"dimension": len(basis), "centres": [m.center for m in basis.modes], "degree_zero": deg0.reason},
        {"exactness": 1e-14},
        {"modes_nontrivial": all(nontrivial), "off_bs_modes_exact": all(off), "no_polarized_sections": not deg0.solutions,
         "dimension": len(basis) == 2 * K + 1},
    )


COMMANDS: dict[str, tuple[Callable, str]] = {
    "spectrum-ho": (cmd_spectrum_ho, "harmonic oscillator spectrum in the Bargmann basis"),
    "sphere-dim": (cmd_sphere_dim, "dimension and Gram data of holomorphic sections on the sphere"),
    "sphere-gram": (cmd_sphere_gram, "closed-form sphere Gram matrix against quadrature"),
    "verlinde": (cmd_verlinde, "SU(2) Verlinde dimensions"),
    "pw-check": (cmd_pw_check, "abelian Polyakov-Wiegmann identity on the lattice torus"),
    "holonomy": (cmd_holonomy, "holonomy of a prequantum bundle around a loop"),
    "bs-scan": (cmd_bs_scan, "Bohr-Sommerfeld heights on the cylinder"),
    "weil": (cmd_weil, "integrality of the sphere forms"),
    "gvh": (cmd_gvh, "Groenewold-van Hove obstruction, exact"),
    "dirac-q4": (cmd_dirac_q4, "commutator condition of prequantization on all monomial pairs"),
    "vacuum-angles": (cmd_vacuum_angles, "spectra of p for the family of cylinder prequantizations"),
    "bks-p2": (cmd_bks_p2, "quantization of p^2 by pairing and by stationary phase"),
    "stationary-phase": (cmd_stationary_phase, "chirp integral against its two-term asymptote"),
    "fubini-study": (cmd_fubini_study, "Kahler potential and volume of the Fubini-Study form"),
    "atlas-check": (cmd_atlas_check, "geometry kernel identities and sphere atlas consistency"),
    "coh-cylinder": (cmd_coh_cylinder, "cohomological wave functions on the cylinder"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--hbar", type=float, default=1.0)
    common.add_argument("--cutoff", type=int)
    common.add_argument("--level", "-k", type=int)
    common.add_argument("--genus", type=int)
    common.add_argument("--lambda", dest="lam", type=float, default=0.0)
    common.add_argument("--grid", help="grid size, or comma-separated sizes")
    common.add_argument("--tol", type=float)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--preset", help="bundle preset name or path to a bundle JSON file")
    common.add_argument("--timing", action="store_true", help="include wall time in the report")
    common.add_argument("--no-half-form", action="store_true")
    common.add_argument("--p", type=float, help="cylinder height for holonomy")
    common.add_argument("--radius", type=float, help="circle radius for sphere holonomy")
    common.add_argument("--pmin", type=float)
    common.add_argument("--pmax", type=float)
    common.add_argument("--scale", type=float, default=1.37, help="rescaling for the weil rejection check")
    common.add_argument("--degree", type=int)
    parser = argparse.ArgumentParser(prog="geoquant", description="Geometric quantization experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name, (_, help_) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_)
    return parser


def run(argv=None) -> tuple[int, dict]:
    """Parse, run and build the report; usage errors raise SystemExit(2)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    fn = COMMANDS[args.command][0]
    t0 = time.perf_counter()
    try:
        params, results, tols, verdicts = fn(args)
        report = make_report(args.command, params, results, tols, verdicts)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        report = make_report(args.command, {k: v for k, v in vars(args).items() if k != "command"}, {}, {}, {},
                             f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - t0
    if args.timing:
        report["wall_time_s"] = wall
    report["_format"] = args.format
    report["_wall"] = wall
    return (0 if report["passed"] else 1), report


def main(argv=None) -> int:
    try:
        code, report = run(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    fmt = report.pop("_format")
    wall = report.pop("_wall")
    out = to_csv(report) if fmt == "csv" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(out)
    sys.stderr.write(f"{report['subcommand']}: {'pass' if report['passed'] else 'FAIL'} in {wall:.3f} s\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
