"""End-to-end acceptance checks, one per criterion, run through the CLI.

Each check re-reads the numbers from the JSON report and applies its own
tolerance, so a wrong verdict inside the CLI cannot hide a failure. A summary
line per criterion is printed at the end of the pytest run, or directly when
this file is executed as a script.
"""

import math
import time

import numpy as np
import pytest

from geoquant import cli

SUMMARY: list[str] = []


def report(*argv):
    code, rep = cli.run(list(argv))
    rep.pop("_format", None)
    rep.pop("_wall", None)
    return code, rep


def c1_oscillator():
    code, rep = report("spectrum-ho", "--hbar", "1", "--cutoff", "32")
    ev = np.array(rep["results"]["eigenvalues"])
    dev = float(np.max(np.abs(ev - (np.arange(33) + 0.5))))
    code2, rep2 = report("spectrum-ho", "--hbar", "1", "--cutoff", "32", "--no-half-form")
    dev2 = float(np.max(np.abs(np.array(rep2["results"]["eigenvalues"]) - np.arange(33))))
    ok = code == code2 == 0 and len(ev) == 33 and dev <= 1e-12 and dev2 <= 1e-12
    return ok, f"max deviation {dev:.1e}, without half-form {dev2:.1e}"


def c2_sphere():
    code, rep = report("sphere-dim")
    rows = rep["results"]["table"]
    dims = all(r["dim"] == r["k"] + 1 for r in rows) and [r["k"] for r in rows] == list(range(11))
    posdef = all(r["min_gram_eigenvalue"] > 0 for r in rows)
    diverge = all(r["divergence_detected_z^(k+1)"] for r in rows)
    gram = max(r["gram_vs_quadrature"] for r in rows if r["k"] <= 6)
    ok = code == 0 and dims and posdef and diverge and gram <= 1e-8
    return ok, f"dims k+1 for k=0..10, Gram vs quadrature {gram:.1e}"


def c3_verlinde():
    code, rep = report("verlinde")
    rows = rep["results"]["table"]
    g1 = max(abs(r["value"] - (r["k"] + 1)) for r in rows if r["g"] == 1)
    g0 = all(r["rounded"] == 1 for r in rows if r["g"] == 0)
    resid = max(r["residual"] for r in rows)
    ok = code == 0 and len(rows) == 50 and g1 <= 1e-12 and g0 and resid <= 1e-9
    return ok, f"genus one error {g1:.1e}, max residual {resid:.1e}"


def c4_gvh():
    from geoquant import weylalg as wa

    code, rep = report("gvh")
    D = wa.gvh_discrepancy()
    g = wa.gvh_analysis()
    ok = code == 0 and D.is_scalar() and not D.is_zero() and not (g.route_cubic - g.route_mixed).is_zero()
    return ok, f"discrepancy {rep['results']['discrepancy']}"


def c5_q4():
    code, rep = report("dirac-q4")
    ok = code == 0 and rep["results"]["pairs"] == 225 and rep["results"]["nonzero_residuals"] == []
    return ok, f"{rep['results']['pairs']} pairs, all exactly zero"


def c6_vacuum():
    code, rep = report("vacuum-angles")
    s = {k: np.array(v) for k, v in rep["results"]["spectra"].items()}
    same = np.array_equal(np.sort(s["0.0"]), np.sort(s["1.0"]))
    gap = float(np.min(np.abs(s["0.0"][:, None] - s["0.5"][None, :])))
    ok = code == 0 and same and gap > 0
    return ok, f"integer shift identical, half shift gap {gap:.2f}"


def c7_bohr_sommerfeld():
    code, rep = report("bs-scan", "--hbar", "1")
    roots = np.array(rep["results"]["roots"])
    ok = code == 0 and len(roots) == 7 and float(np.max(np.abs(roots - np.arange(-3, 4)))) <= 1e-8
    err = float(np.max(np.abs(roots - np.arange(-3, 4)))) if len(roots) == 7 else math.inf
    return ok, f"{len(roots)} roots, max error {err:.1e}"


def c8_weil():
    code, rep = report("weil", "--scale", "1.37")
    rows = rep["results"]["table"]
    err = max(abs(r["integral"] - 2 * math.pi * r["k"]) for r in rows)
    ok = code == 0 and [r["k"] for r in rows] == [1, 2, 3, 4, 5] and err <= 1e-8
    ok = ok and rep["results"]["rescaled"]["verdict"] is False
    return ok, f"max error {err:.1e}, 1.37 rescaling rejected"


def c9_bks():
    code, rep = report("bks-p2", "--grid", "256")
    r = rep["results"]
    sp_ = r["stationary_phase"]
    ok = (
        code == 0
        and rep["parameters"]["L"] == 10
        and r["pairing_error"] <= 1e-6
        and sp_["magnitude_error"] <= 1e-2
        and abs(sp_["phase_offset"] - math.pi / 4) <= 1e-3
    )
    return ok, (f"pairing {r['pairing_error']:.1e}, magnitude {sp_['magnitude_error']:.1e}, "
                f"phase {abs(sp_['phase_offset'] - math.pi / 4):.1e}")


def c10_asymptote():
    code, rep = report("stationary-phase")
    r = rep["results"]
    ratios = r["error_ratios"]
    ts = rep["parameters"]["t_decade"]
    decade = max(ts) / min(ts) >= 10
    trend = abs(ratios[-1] - 0.25) <= abs(ratios[0] - 0.25) and abs(ratios[-1] - 0.25) < 0.01
    ok = code == 0 and r["rel_error_t1e-3"] < 1e-2 and decade and trend
    return ok, f"rel error at 1e-3 {r['rel_error_t1e-3']:.1e}, last ratio {ratios[-1]:.4f}"


def c11_pw():
    code, rep = report("pw-check", "--grid", "32,64,128")
    r = rep["results"]
    ok = code == 0 and 1.8 <= r["slope"] <= 2.2 and r["identity_gauge_residual"] == 0
    return ok, f"slope {r['slope']:.3f}, identity residual {r['identity_gauge_residual']}"


def c12_geometry():
    code, rep = report("atlas-check")
    r = rep["results"]
    kernel = max(r["kernel"].values())
    vol = abs(complex(r["sphere_volume"]["re"], r["sphere_volume"]["im"]) - 1)
    ok = code == 0 and kernel <= 1e-9 and vol <= 1e-8 and r["kahler_potential_residual"] <= 1e-8
    return ok, f"kernel {kernel:.1e}, volume {vol:.1e}, potential {r['kahler_potential_residual']:.1e}"


CRITERIA = [
    (1, "harmonic oscillator spectrum", 1, c1_oscillator),
    (2, "sphere dimension", 10, c2_sphere),
    (3, "Verlinde dimensions", 1, c3_verlinde),
    (4, "Groenewold-van Hove", 1, c4_gvh),
    (5, "Dirac Q4 exact", 30, c5_q4),
    (6, "vacuum angles", 1, c6_vacuum),
    (7, "Bohr-Sommerfeld scan", 2, c7_bohr_sommerfeld),
    (8, "Weil integrality", 5, c8_weil),
    (9, "BKS p^2", 10, c9_bks),
    (10, "stationary-phase asymptote", 10, c10_asymptote),
    (11, "Polyakov-Wiegmann", 20, c11_pw),
    (12, "geometry kernel", 30, c12_geometry),
]


def evaluate(num, title, limit, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    ok = ok and dt < limit
    line = f"criterion {num:2d} {title}: {'PASS' if ok else 'FAIL'} ({detail}; {dt:.2f} s of {limit} s)"
    return ok, line


@pytest.mark.parametrize("num,title,limit,fn", CRITERIA, ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(num, title, limit, fn):
    ok, line = evaluate(num, title, limit, fn)
    SUMMARY.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    for crit in CRITERIA:
        print(evaluate(*crit)[1])
