import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkv.catalog import get_spec
from mkv.geometry import ManifoldSpec, SpecError, sample_points
from mkv.killing import (
    Classification,
    KillingDegenerateError,
    bochner_integrand,
    bochner_terms,
    classify_field,
    classify_with_identities,
    collinear_field_check,
    conformal_change_check,
    contact_transformation_check,
    curvature_identity_operator,
    curvature_identity_quadratic,
    estimate_factor,
    identity_residuals,
    reeb_mixed_killing_check,
    two_killing_reeb_check,
)

EXAMPLE_V = ["x", "y - z", "y + z"]


def flat(fields=None):
    metric = [["1" if i == j else "0" for j in range(3)] for i in range(3)]
    return ManifoldSpec("flat", ["x", "y", "z"], metric, fields=fields or {})


def small(spec):
    return sample_points(spec, grid=3, n_random=8)


# classification --------------------------------------------------------------


def test_example_field_is_homothetic_mixed_killing():
    spec = get_spec("flat-r3")
    kr = classify_field(spec, "V", small(spec))
    assert kr.classification == Classification.MIXED_KILLING
    assert kr.flags["homothetic"] and kr.flags["proper"]
    assert kr.f_aggregate["constant"]
    assert kr.f_aggregate["value"] == pytest.approx(2)
    assert np.allclose(kr.f, 2)


@pytest.mark.parametrize("field", [["1", "0", "0"], ["y", "-x", "0"], ["0", "z", "-y"], ["2", "3*z", "-3*y"]])
def test_isometries_are_killing(field):
    spec = flat()
    kr = classify_field(spec, field, small(spec))
    assert kr.classification == Classification.KILLING
    assert not kr.flags["proper"]
    assert kr.report.diagnostics["max |L_V g|"] < 1e-8


def test_non_conformal_mixed_killing_with_varying_factor():
    # L_V g = 4x dx^2, L_V L_V g = 20x^2 dx^2
    spec = flat()
    pts = np.array([[0.5, 0.1, 0.2], [1.5, -0.3, 0.4], [-2.0, 0.0, 1.0]])
    kr = classify_field(spec, ["x^2", "0", "0"], pts)
    assert kr.classification == Classification.MIXED_KILLING
    assert not kr.flags["conformal"]
    assert np.allclose(kr.f, 5 * pts[:, 0])
    assert not kr.f_aggregate["constant"]


def test_generic_field_is_none():
    spec = flat()
    kr = classify_field(spec, ["x*y", "z", "x^2"], small(spec))
    assert kr.classification == Classification.NONE
    assert kr.report.diagnostics["max projection residual"] > 1e-3


def test_conformal_line_field():
    # every field on a line is conformal; lambda = 2x changes along x^2 d_x
    line = ManifoldSpec("line", ["x"], [["1"]], domain={"x": (0.5, 2.0)})
    kr = classify_field(line, ["x^2"], [[0.7], [1.2]])
    assert kr.classification == Classification.CONFORMAL
    assert kr.flags["conformal"] and not kr.flags["homothetic"]


def test_empty_sample_set():
    with pytest.raises(SpecError):
        classify_field(flat(), ["x", "0", "0"], np.zeros((0, 3)))


def test_unknown_field():
    with pytest.raises(KeyError):
        classify_field(flat(), "W", [[0.1, 0.2, 0.3]])


# factor estimate -------------------------------------------------------------


def test_estimate_factor_example():
    f, resid = estimate_factor(get_spec("flat-r3"), "V", [0.3, -0.2, 0.9])
    assert f == pytest.approx(2)
    assert resid < 1e-14


def test_estimate_factor_line():
    line = ManifoldSpec("line", ["x"], [["1"]])
    f, resid = estimate_factor(line, ["x"], [1.3])
    assert f == pytest.approx(2)
    assert resid < 1e-14


def test_estimate_factor_killing_degenerate():
    with pytest.raises(KillingDegenerateError):
        estimate_factor(flat(), ["1", "0", "0"], [0.1, 0.2, 0.3])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=9, max_size=9), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_scaling_field_scales_factor(a, p):
    # affine fields give constant L_V g; f is defined wherever L_V g != 0
    m = np.array(a).reshape(3, 3)
    field = [" + ".join(f"({m[i, j]})*{c}" for j, c in enumerate("xyz")) for i in range(3)]
    double = [f"2*({e})" for e in field]
    spec = flat()
    if np.abs(m + m.T).max() < 1e-3:
        return
    f1, _ = estimate_factor(spec, field, p)
    f2, _ = estimate_factor(spec, double, p)
    assert f2 == pytest.approx(2 * f1, rel=1e-9, abs=1e-9)


# curvature identities --------------------------------------------------------


def test_operator_form_example_field():
    spec = get_spec("flat-r3")
    p = [0.3, 0.7, -0.4]
    assert curvature_identity_operator(spec, "V", 2.0, [0, 1, 0], p) < 1e-10
    assert curvature_identity_operator(spec, "V", 2.0, [0, 1, 0], p, include_nabla_phi=True) < 1e-10
    assert curvature_identity_operator(spec, "V", 3.0, [0, 1, 0], p) > 0.5


def test_operator_form_killing_field():
    spec = flat()
    assert curvature_identity_operator(spec, ["1", "0", "0"], 7.0, [0.2, 1, 3], [0.1, 0.2, 0.3]) == 0


def test_operator_form_without_nabla_phi():
    # x^2 d_x has zero twist, so both forms agree; a field with varying twist separates them
    spec = flat()
    v = ["x^2", "0", "0"]
    p = np.array([[0.8, 0.1, 0.3]])
    res = identity_residuals(spec, v, 5 * 0.8, p)
    assert res["operator form"][0] < 1e-12
    assert res["quadratic form"][0] < 1e-12
    v = ["x", "x*z + y", "z - x*y"]
    res = identity_residuals(spec, v, 0.0, p)
    assert abs(res["operator form without nabla_V phi"][0] - res["operator form"][0]) > 1e-3


def test_quadratic_form_example_field():
    spec = get_spec("flat-r3")
    p = [0.3, 0.7, -0.4]
    assert curvature_identity_quadratic(spec, "V", 2.0, [0, 1, 0], p) == pytest.approx(0, abs=1e-12)
    assert curvature_identity_quadratic(spec, "V", 3.0, [0, 1, 0], p) == pytest.approx(1)
    assert curvature_identity_quadratic(spec, ["1", "0", "0"], 1.0, ["1", "0", "0"], p) == 0


def test_bochner_terms_example_field():
    spec = get_spec("flat-r3")
    p = [0.3, 0.7, -0.4]
    t = bochner_terms(spec, "V", 2.0, p)
    assert t["Ric(V,V)"] == pytest.approx(0, abs=1e-14)
    assert t["div(nabla_V V)"] == pytest.approx(1)
    assert t["|nabla V|^2"] == pytest.approx(5)
    assert t["f div V"] == pytest.approx(6)
    assert bochner_integrand(spec, "V", 2.0, p) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("name, field", [("flat-r3", "xi"), ("flat-r3", ["1", "0", "0"]), ("r-cross-s2", "xi")])
def test_bochner_trivial(name, field):
    assert bochner_integrand(get_spec(name), field, 1.0, [0.2, 1.0, 0.3]) == pytest.approx(0, abs=1e-12)


def test_identities_for_example_field():
    spec = get_spec("flat-r3")
    kr, ident = classify_with_identities(spec, "V", small(spec))
    assert kr.is_mixed and ident.passed
    assert ident.residuals["quadratic form"] < 1e-10


def test_trace_of_operator_form_is_bochner_on_curved_metric():
    spec = get_spec("olszak-halfspace").with_field("W", ["y*z", "x^2", "z"])
    res = identity_residuals(spec, "W", 0.7, small(spec))
    assert res["trace of operator form - Bochner"].max() < 1e-10


# conformal change ------------------------------------------------------------


def test_conformal_change_trivial_rho():
    spec = get_spec("flat-r3")
    report = conformal_change_check(spec, "V", "1", small(spec))
    assert report.passed
    assert report.diagnostics["identity holds"]
    assert report.diagnostics["V mixed Killing for rho g (same f)"]


def test_conformal_change_exponential():
    spec = get_spec("flat-r3")
    report = conformal_change_check(spec, "V", "exp(x)", small(spec))
    assert report.passed  # the two verdicts agree
    assert not report.diagnostics["identity holds"]
    assert not report.diagnostics["V mixed Killing for rho g (same f)"]
    kr = classify_field(spec.with_parameters(), "V", small(spec))
    assert kr.is_mixed


def test_conformal_change_killing_field_rho_invariant():
    spec = flat({"K": ["0", "0", "1"]})
    report = conformal_change_check(spec, "K", "exp(x) + y^2", small(spec), f=0.0)
    assert report.passed
    assert report.diagnostics["max identity residual"] < 1e-12


def test_conformal_change_rejects_nonpositive_rho():
    spec = get_spec("flat-r3")
    with pytest.raises(SpecError):
        conformal_change_check(spec, "V", "x - 10", [[0.1, 0.2, 0.3]])


# Reeb field ------------------------------------------------------------------


@pytest.mark.parametrize("name, h_zero, cls", [
    ("flat-r3", True, "KILLING"),
    ("r-cross-s2", True, "KILLING"),
    ("olszak-halfspace", False, "NONE"),
    ("group-H", False, "NONE"),
])
def test_reeb_field(name, h_zero, cls):
    spec = get_spec(name)
    report = reeb_mixed_killing_check(spec, small(spec))
    assert report.passed
    assert (report.diagnostics["max |h|"] < 1e-8) is h_zero
    assert report.diagnostics["xi classification"] == cls
    assert not report.diagnostics["xi mixed Killing"]


@pytest.mark.parametrize("name, two_killing", [
    ("flat-r3", True), ("olszak-halfspace", False), ("group-H", False), ("r-cross-s2", True),
])
def test_two_killing_reeb(name, two_killing):
    spec = get_spec(name)
    report = two_killing_reeb_check(spec, small(spec))
    assert report.passed
    assert report.diagnostics["xi 2-Killing"] is two_killing


def test_group_h_nabla_xi_h_vanishes():
    report = two_killing_reeb_check(get_spec("group-H"))
    assert report.diagnostics["max |nabla_xi h|"] < 1e-12
    assert report.diagnostics["max |2 phi h^2|"] > 1


# collinear fields --------------------------------------------------------------


def test_collinear_constant_on_flat():
    spec = get_spec("flat-r3")
    report = collinear_field_check(spec, "3", None, small(spec))
    assert report.residuals["(o1)"] < 1e-12 and report.residuals["(o2)"] < 1e-12
    assert report.diagnostics["V = alpha xi classification"] == "KILLING"


@pytest.mark.parametrize("alpha", ["2", "0.5", "z", "z^2 + 1", "x + 2"])
def test_collinear_half_space_never_mixed(alpha):
    spec = get_spec("olszak-halfspace")
    report = collinear_field_check(spec, alpha, None, small(spec))
    assert report.residuals["(o2)"] > 1e-3
    assert report.diagnostics["V = alpha xi classification"] != "MIXED_KILLING"


def test_collinear_requires_structure():
    with pytest.raises(SpecError):
        collinear_field_check(flat(), "1")


def test_collinear_rejects_vanishing_alpha():
    spec = get_spec("flat-r3")
    with pytest.raises(SpecError):
        collinear_field_check(spec, "x", 1.0, [[0.0, 0.3, 0.2]])


# contact transformations -----------------------------------------------------


def test_contact_transformation_reeb():
    spec = get_spec("flat-r3")
    fit = contact_transformation_check(spec, "xi", small(spec))
    assert fit.report.passed
    assert np.allclose(fit.sigma, 0)
    fit = contact_transformation_check(spec, ["0", "0", "0"], small(spec))
    assert np.allclose(fit.sigma, 0)


def test_contact_transformation_dilation():
    spec = get_spec("flat-r3")
    fit = contact_transformation_check(spec, EXAMPLE_V[:1] + ["y", "z"], small(spec))
    assert fit.report.passed
    assert np.allclose(fit.sigma, 1)
    assert fit.report.diagnostics["max |grad sigma - (xi sigma) xi|"] < 1e-12


def test_contact_transformation_rejects_non_ict():
    spec = get_spec("flat-r3")
    fit = contact_transformation_check(spec, ["y", "0", "0"], small(spec))
    assert not fit.report.diagnostics["infinitesimal contact transformation"]
    assert fit.residual.max() > 1e-3
