"""Acceptance criteria 1-10, each recorded as one PASS/FAIL line in the terminal summary."""

import numpy as np
import pytest

from mkv.catalog import CATALOG_NAMES, frame_components, frame_matrix, get_entry, get_spec, verify_frame_table
from mkv.contact import DeformationParams, StructureFields, d_homothetic_deform, h_tensors, verify_structure_identities
from mkv.curvature import curvature_checks
from mkv.geometry import Geometry, ManifoldSpec, sample_points
from mkv.killing import (
    Classification,
    bochner_terms,
    classify_field,
    conformal_change_check,
    identity_residuals,
    lie_data,
    reeb_mixed_killing_check,
)
from mkv.realline import RealLineProblem, realline_analyze

STRUCTURES = ["flat-r3", "olszak-halfspace", "group-H"]
FLAT = ManifoldSpec("flat", ["x", "y", "z"], [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
                    domain={c: (-1.0, 1.0) for c in "xyz"})


def num(v: float) -> str:
    return f"({v:.17g})"


def linear_field(a: np.ndarray, b: np.ndarray) -> list[str]:
    return [" + ".join([num(b[i])] + [f"{num(a[i, j])}*{c}" for j, c in enumerate("xyz")]) for i in range(3)]


def affine_mixed(rng) -> tuple[list[str], float]:
    """V = Ax + b with A = S/2 + K, S^2 = sS and [S, K] = 0, so L_V L_V g = s L_V g."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    mask = rng.integers(0, 2, size=3)
    if not mask.any():
        mask[rng.integers(3)] = 1
    s = float(rng.choice([-1, 1]) * rng.uniform(0.5, 3))
    b = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            if mask[i] == mask[j]:
                b[i, j] = rng.uniform(-2, 2)
                b[j, i] = -b[i, j]
    a = q @ (np.diag(s * mask) / 2 + b) @ q.T
    return linear_field(a, rng.uniform(-1, 1, 3)), s


def quadratic_mixed(rng) -> list[str]:
    """V = (n.x - c)^2 n for a unit n: a rotated copy of x^2 d_x, f = 5(n.x - c)."""
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    lin = " + ".join(f"{num(n[j])}*{c}" for j, c in enumerate("xyz")) + f" - {num(rng.uniform(-2, 2))}"
    return [f"{num(n[i])}*({lin})^2" for i in range(3)]


def random_quadratic(rng) -> list[str]:
    monos = ["1", "x", "y", "z", "x^2", "y^2", "z^2", "x*y", "x*z", "y*z"]
    return [" + ".join(f"{num(c)}*{m}" for c, m in zip(rng.uniform(-2, 2, len(monos)), monos)) for _ in range(3)]


def equivalence_population():
    rng = np.random.default_rng(20240501)
    fields = [affine_mixed(rng)[0] for _ in range(25)]
    fields += [quadratic_mixed(rng) for _ in range(5)]
    fields += [random_quadratic(rng) for _ in range(20)]
    return fields


@pytest.fixture(scope="module")
def equivalence_data():
    pts = sample_points(FLAT, grid=3, n_random=8)
    rows = []
    for v in equivalence_population():
        d = lie_data(FLAT, v, pts)
        keep = np.isfinite(d["f"])
        res = identity_residuals(FLAT, v, d["f"][keep], pts[keep])
        rows.append({"field": v, "lie": d["projection"][keep], **res})
    return rows


# 1 -----------------------------------------------------------------------------


def test_criterion_1_flat_homothetic_field(criterion):
    spec = get_spec("flat-r3")
    kr = classify_field(spec, "V")
    proj = kr.report.diagnostics["max projection residual"]
    ok = (kr.classification == Classification.MIXED_KILLING and np.allclose(kr.f, 2, rtol=0, atol=1e-10)
          and proj < 1e-10)
    criterion(1, "flat-r3 V is mixed Killing with f = 2", ok,
              f"{kr.classification.value}, f in [{kr.f.min():.12g}, {kr.f.max():.12g}], projection {proj:.1e}")


# 2 -----------------------------------------------------------------------------


def test_criterion_2_half_space(criterion):
    entry = get_entry("olszak-halfspace", a=1.0)
    spec = entry.spec
    xs, zs = np.meshgrid(np.linspace(-0.9, 0.9, 5), np.linspace(0.5, 3.5, 5))
    pts = np.column_stack([xs.ravel(), np.full(25, 0.3), zs.ravel()])
    e = frame_matrix(spec, entry.frame, pts, order=0).value
    hf = frame_components(e, StructureFields(spec, pts).h.value)  # column i = h e_i
    z = pts[:, 2]
    expect = np.zeros_like(hf)
    expect[:, 1, 0] = 1 / z
    expect[:, 0, 1] = 1 / z
    h_err = float(np.abs(hf - expect).max())
    cls = classify_field(spec, "xi", pts).classification
    table = verify_frame_table(entry, pts)
    n_conn = len(entry.frame.connection)
    ok = (h_err < 1e-8 and cls not in (Classification.KILLING, Classification.TWO_KILLING,
                                      Classification.MIXED_KILLING)
          and table.residuals["connection"] < 1e-8 and n_conn == 9)
    criterion(2, "olszak-halfspace h, xi and connection table", ok,
              f"h error {h_err:.1e}, xi {cls.value}, {n_conn} connection entries, "
              f"table error {table.residuals['connection']:.1e}")


# 3 -----------------------------------------------------------------------------


def test_criterion_3_group_h(criterion):
    entry = get_entry("group-H", n=1, a=(1.0,))
    spec = entry.spec
    pts = sample_points(spec, grid=3, n_random=8)
    sf = StructureFields(spec, pts)
    e = frame_matrix(spec, entry.frame, pts, order=0).value
    hf = frame_components(e, sf.h.value)
    he1_err = float(np.abs(hf[:, :, 1] - np.array([0, 0, 1])).max())
    nxi_h = np.einsum("pijk,pk->pij", sf.nabla_h.value, sf.xi.value)
    geom = sf.geom
    llg = geom.lie_02(sf.xi, geom.lie_metric(sf.xi)).value
    llg_frame = np.einsum("pci,pcd,pdj->pij", e, llg, e)
    max_llg = float(np.abs(llg_frame).max())
    ok = he1_err < 1e-8 and np.abs(nxi_h).max() < 1e-8 and max_llg > 1
    criterion(3, "group-H: he1 = e1', nabla_e0 h = 0, e0 not 2-Killing", ok,
              f"he1 error {he1_err:.1e}, |nabla_e0 h| {np.abs(nxi_h).max():.1e}, max L L g entry {max_llg:.3g}")


# 4 -----------------------------------------------------------------------------


def test_criterion_4_structure_identities(criterion):
    worst, details = 0.0, []
    ric_ok = True
    for name in STRUCTURES:
        spec = get_spec(name)
        pts = sample_points(spec, grid=3, n_random=8)
        report = verify_structure_identities(spec, pts)
        worst = max(worst, report.max_residual)
        # Ric(xi, xi) by direct curvature contraction vs -tr h^2
        geom = Geometry(spec, report.points)
        xi = StructureFields(spec, report.points).xi.value
        ric = np.einsum("pij,pi,pj->p", geom.ricci.value, xi, xi)
        tr = np.array([h_tensors(spec, p).trace_h_squared for p in report.points])
        if name == "olszak-halfspace":
            expected = 2 / report.points[:, 2] ** 2
        elif name == "group-H":
            expected = np.full(len(tr), 2 * spec.parameters["a1"] ** 2)
        else:
            expected = np.zeros(len(tr))
        ric_ok &= bool(np.allclose(tr, expected, rtol=1e-10, atol=1e-12) and np.allclose(ric, -tr, rtol=1e-9, atol=1e-12))
        details.append(f"{name} {report.max_residual:.1e}")
    criterion(4, "structure identities and Ric(xi,xi) = -tr h^2", worst < 1e-7 and ric_ok, ", ".join(details))


# 5 -----------------------------------------------------------------------------


def test_criterion_5_criterion_equivalence(criterion, equivalence_data):
    tol = 1e-8
    disagree = literal_disagree = n_points = n_mixed_points = 0
    trace_worst = 0.0
    for row in equivalence_data:
        v1 = row["lie"] < tol
        v8 = row["quadratic form"] < tol
        v7 = row["operator form"] < tol
        v7_literal = row["operator form without nabla_V phi"] < tol
        disagree += int(np.sum((v1 != v8) | (v1 != v7)))
        literal_disagree += int(np.sum(v1 != v7_literal))
        n_points += len(v1)
        n_mixed_points += int(v1.sum())
        trace_worst = max(trace_worst, float(row["trace of operator form - Bochner"].max()))
    ok = disagree == 0 and trace_worst < tol and n_mixed_points > 0
    criterion(5, "Lie, quadratic and operator criteria agree; trace of operator form = Bochner", ok,
              f"{len(equivalence_data)} fields, {n_points} points ({n_mixed_points} mixed), {disagree} disagreements, "
              f"disagreements without nabla_V phi {literal_disagree}, trace gap {trace_worst:.1e}")


# 6 -----------------------------------------------------------------------------


def test_criterion_6_bochner(criterion, equivalence_data):
    pts = sample_points(FLAT, grid=3, n_random=8)
    worst, count = 0.0, 0
    for v in [row["field"] for row in equivalence_data] + [["x", "y - z", "y + z"], ["x", "y", "z"]]:
        kr = classify_field(FLAT, v, pts)
        if kr.classification != Classification.MIXED_KILLING:
            continue
        count += 1
        keep = np.isfinite(kr.f)
        res = identity_residuals(FLAT, v, kr.f[keep], kr.report.points[keep])
        worst = max(worst, float(res["Bochner integrand"].max()))
    t = bochner_terms(get_spec("flat-r3"), "V", 2.0, [0.3, 0.7, -0.4])
    terms = (t["Ric(V,V)"], t["div(nabla_V V)"], t["|nabla V|^2"], t["f div V"])
    ok = count > 0 and worst < 1e-8 and np.allclose(terms, (0, 1, 5, 6), atol=1e-12)
    criterion(6, "Bochner integrand vanishes for mixed Killing fields", ok,
              f"{count} mixed fields, max residual {worst:.1e}, worked terms {[round(x, 12) for x in terms]}")


# 7 -----------------------------------------------------------------------------


def deformation_cases():
    rng = np.random.default_rng(7)
    cases = []
    for _ in range(10):
        name = CATALOG_NAMES[rng.integers(len(CATALOG_NAMES))]
        spec = get_spec(name)
        coord = spec.coordinates[int(np.flatnonzero(np.array(spec.structure.xi) != "0")[0])]
        u = f"{rng.uniform(2, 3):.6f} + {rng.uniform(-0.4, 0.4):.6f}*{coord}"
        cases.append((name, DeformationParams(u, float(rng.uniform(0.5, 3)))))
    return cases


def test_criterion_7_reeb_h_zero_equivalence(criterion):
    counterexamples, worst_h, checked = [], 0.0, 0
    specs = [(name, get_spec(name)) for name in CATALOG_NAMES]
    for name, params in deformation_cases():
        base = get_spec(name)
        deformed, report = d_homothetic_deform(base, params, sample_points(base, grid=2, n_random=6))
        worst_h = max(worst_h, report.residuals["H = h/u"])
        specs.append((f"{name} u={params.u} c={params.c:.3f}", deformed))
    for label, spec in specs:
        report = reeb_mixed_killing_check(spec, sample_points(spec, grid=2, n_random=6))
        checked += 1
        if not report.conditions["(max |h| < tol) <=> xi Killing"]:
            counterexamples.append(label)
    ok = not counterexamples and worst_h < 1e-8
    criterion(7, "max |h| < 1e-8 <=> xi Killing, H = h/u under deformation", ok,
              f"{checked} structures, counterexamples {counterexamples or 'none'}, H = h/u error {worst_h:.1e}")


# 8 -----------------------------------------------------------------------------


def test_criterion_8_real_line(criterion):
    report = realline_analyze(RealLineProblem("x", 2.0, domain=(0.5, 10.0), x0=1.0, t_end=2.0, step=1e-3))
    gap = report.residuals["r^2 = (c/f) exp(f t) + c'"]
    display = report.diagnostics["display-form residuals (reported, not asserted)"]
    c, c_prime = report.fitted["c"], report.fitted["c'"]
    ok = gap < 1e-6 and c == pytest.approx(2) and abs(c_prime) < 1e-12 and len(display) == 3
    criterion(8, "real-line flow matches r = e^t (definitional convention)", ok,
              f"closed-form gap {gap:.1e}, c = {c:.6g}, c' = {c_prime:.1e}, "
              f"{len(display)} display-form residuals reported")


# 9 -----------------------------------------------------------------------------


def conformal_pairs():
    rng = np.random.default_rng(99)
    fields = [["x", "y - z", "y + z"], ["x", "y", "z"], ["2*x", "2*y", "2*z"]]
    fields += [affine_mixed(rng)[0] for _ in range(2)]
    rhos = ["1", "2.5", "exp(x)", "exp(0.3*x - y)", "1 + z^2", "x^-2", "1/(x^2 + y^2 + z^2)", "cosh(y)"]
    return [(fields[rng.integers(len(fields))], rhos[rng.integers(len(rhos))]) for _ in range(20)]


def test_criterion_9_conformal_change(criterion):
    pts = np.random.default_rng(5).uniform(0.3, 1.0, size=(12, 3))
    disagreements, holds = [], 0
    for v, rho in conformal_pairs():
        report = conformal_change_check(FLAT, v, rho, pts)
        holds += int(report.diagnostics["identity holds"])
        if not report.passed:
            disagreements.append((v, rho))
    ok = not disagreements
    criterion(9, "conformal-change identity agrees with direct recomputation", ok,
              f"20 pairs, identity holds in {holds}, disagreements {disagreements or 'none'}")


# 10 ----------------------------------------------------------------------------


def test_criterion_10_numerical_substrate(criterion):
    fd = ng = bianchi = 0.0
    specs = [get_spec(n) for n in CATALOG_NAMES] + [get_spec("group-H", n=2)]
    for spec in specs:
        report = curvature_checks(spec, sample_points(spec, grid=3, n_random=8))
        fd = max(fd, report.diagnostics["Christoffel jets vs finite differences"])
        ng = max(ng, report.residuals["nabla g = 0"])
        bianchi = max(bianchi, report.residuals["(div Q)Y = Yr/2"])
    ok = fd < 1e-6 and ng < 1e-10 and bianchi < 1e-7
    criterion(10, "jets vs finite differences, nabla g = 0, contracted Bianchi", ok,
              f"FD gap {fd:.1e}, nabla g {ng:.1e}, div Q - dr/2 {bianchi:.1e}")
