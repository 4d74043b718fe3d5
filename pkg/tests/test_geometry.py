import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mkv.catalog import get_spec
from mkv.curvature import curvature_checks
from mkv.geometry import (
    DegenerateMetricError,
    Geometry,
    ManifoldSpec,
    covariant_derivative_vector,
    divergence,
    geometry_at,
    gradient,
    lie_derivative_connection,
    lie_derivative_metric,
    sample_points,
    sample_map,
    second_covariant_derivative,
    second_lie_derivative_metric,
    twist_operator,
    weyl_tensor,
)
from mkv.jets import PointEvaluationError

X, Y, Z = sp.symbols("x y z")


def flat(fields=None, coords=("x", "y", "z")):
    n = len(coords)
    metric = [["1" if i == j else "0" for j in range(n)] for i in range(n)]
    return ManifoldSpec("flat", list(coords), metric, fields=fields or {})


def sympy_curvature(metric, coords):
    """Christoffels and R^l_{k i j} = components of R(d_i, d_j) d_k, straight from the textbook formulas."""
    g = sp.Matrix(metric)
    gi = g.inv()
    n = len(coords)
    gam = [[[sum(gi[k, l] * (sp.diff(g[l, i], coords[j]) + sp.diff(g[l, j], coords[i]) - sp.diff(g[i, j], coords[l]))
                 for l in range(n)) / 2 for j in range(n)] for i in range(n)] for k in range(n)]
    riem = [[[[sp.diff(gam[l][j][k], coords[i]) - sp.diff(gam[l][i][k], coords[j])
               + sum(gam[l][i][m] * gam[m][j][k] - gam[l][j][m] * gam[m][i][k] for m in range(n))
               for j in range(n)] for i in range(n)] for k in range(n)] for l in range(n)]
    return gam, riem


def as_array(nested, coords, point):
    f = sp.lambdify(coords, nested, "numpy")
    return np.array(f(*point), dtype=float)


# worked values -----------------------------------------------------------------


def test_flat_space_is_flat():
    c = geometry_at(flat(), [0.3, -0.2, 0.1])
    assert not c.christoffel.any()
    assert not c.riemann.any()
    assert c.scalar_curvature == 0


def test_olszak_christoffel_and_ricci():
    spec = get_spec("olszak-halfspace")
    c = geometry_at(spec, [0, 0, 1])
    assert np.allclose(c.g, np.eye(3))
    assert c.christoffel[0, 0, 2] == pytest.approx(1.0)  # d_z(g_xx) / (2 g_xx) = 1/z
    xi = np.array([0, 0, 1.0])
    assert xi @ c.ricci @ xi == pytest.approx(-2.0)


@pytest.mark.parametrize("name, metric, point", [
    ("olszak", [[Z**2, 0, 0], [0, sp.exp(2 * X) / Z**2, 0], [0, 0, 1]], (0.3, -0.4, 1.7)),
    ("warped", [[1 + X**2, X * Y, 0], [X * Y, 2 + sp.sin(Z), 0], [0, 0, sp.exp(Y)]], (0.2, 0.5, -0.3)),
    ("sphere", [[1, 0, 0], [0, 1, 0], [0, 0, sp.sin(Y)**2]], (0.1, 1.1, 0.4)),
])
def test_curvature_matches_symbolic(name, metric, point):
    coords = [X, Y, Z]
    text = [[str(e).replace("**", "^") for e in row] for row in metric]
    spec = ManifoldSpec(name, ["x", "y", "z"], text)
    gam, riem = sympy_curvature(metric, coords)
    c = geometry_at(spec, point)
    assert np.allclose(c.christoffel, as_array(gam, coords, point), rtol=1e-12, atol=1e-12)
    assert np.allclose(c.riemann, as_array(riem, coords, point), rtol=1e-10, atol=1e-11)


def test_covariant_derivative_of_example_field():
    spec = flat({"V": ["x", "y - z", "y + z"]})
    a = covariant_derivative_vector(spec, "V", [0.4, 0.1, -0.3])
    assert np.array_equal(a, [[1, 0, 0], [0, 1, -1], [0, 1, 1]])


def test_nabla_xi_on_half_space():
    spec = get_spec("olszak-halfspace")
    a = covariant_derivative_vector(spec, "xi", [0, 0, 1])
    assert np.allclose(a, np.diag([1, -1, 0]))  # frame = coordinates at (0, 0, 1)


def test_zero_field():
    spec = get_spec("olszak-halfspace")
    assert not covariant_derivative_vector(spec, ["0", "0", "0"], [0.2, 0.1, 2]).any()


def test_second_covariant_derivative():
    spec = flat({"V": ["x", "y - z", "y + z"]})
    p = [0.5, 0.2, -0.7]
    # nabla_V V = (x, -2z, 2y); its derivative along d_y is (0, 0, 2)
    out = second_covariant_derivative(spec, "V", [0, 1, 0], "V", p)
    assert np.allclose(out, [0, 0, 2])
    assert not second_covariant_derivative(spec, ["1", "2", "3"], [0, 1, 0], [1, 0, 0], p).any()


def test_lie_derivatives_of_example_field():
    spec = flat({"V": ["x", "y - z", "y + z"], "T": ["1", "0", "0"]})
    p = [0.1, 0.2, 0.3]
    assert np.allclose(lie_derivative_metric(spec, "V", p), 2 * np.eye(3))
    assert not lie_derivative_metric(spec, "T", p).any()
    assert np.allclose(second_lie_derivative_metric(spec, "V", p), 4 * np.eye(3))
    assert not second_lie_derivative_metric(spec, "T", p).any()


def test_lie_derivative_of_reeb_field():
    spec = get_spec("olszak-halfspace")
    z = 2.0
    lg = lie_derivative_metric(spec, "xi", [0, 0, z])
    e = np.diag([1 / z, z, 1])  # frame columns at x = 0
    assert np.allclose(e.T @ lg @ e, np.diag([2 / z, -2 / z, 0]))


def test_real_line_second_lie_derivative():
    spec = ManifoldSpec("line", ["x"], [["1"]], fields={"V": ["x"]})
    # 2 r r'' + 4 r'^2 with r = x
    assert second_lie_derivative_metric(spec, "V", [0.7])[0, 0] == pytest.approx(4)


def test_twist_operator():
    spec = flat({"V": ["x", "y - z", "y + z"], "G": ["x", "0", "0"]})
    phi = twist_operator(spec, "V", [0.3, 0.3, 0.3])
    assert np.allclose(phi @ [1, 0, 0], 0)
    assert np.allclose(phi @ [0, 1, 0], [0, 0, -2])
    assert np.allclose(phi @ [0, 0, 1], [0, 2, 0])
    assert not twist_operator(spec, "G", [0.3, 0.3, 0.3]).any()
    assert np.allclose(twist_operator(get_spec("olszak-halfspace"), "xi", [0.2, 0.1, 1.3]), 0)


@pytest.mark.parametrize("name, point", [("flat-r3", [0.1, 0.2, 0.3]), ("olszak-halfspace", [0, 0, 1]),
                                         ("r-cross-s2", [0.1, 1.0, 0.2]), ("group-H", [0.3, 0.1, 0.2])])
def test_weyl_vanishes_in_dimension_three(name, point):
    w = weyl_tensor(get_spec(name), point)
    assert np.abs(w).max() < 1e-9


def test_weyl_requires_dimension_three():
    spec = flat(coords=("a", "b", "c", "d"))
    with pytest.raises(ValueError):
        weyl_tensor(spec, [0, 0, 0, 0])


def test_lie_derivative_of_connection():
    spec = flat({"V": ["x", "y - z", "y + z"], "K": ["-y", "x", "0"]})
    for f in ("V", "K"):
        for x, y in [([1, 0, 0], [0, 1, 0]), ([0.3, -1, 2], [1, 1, 0])]:
            assert np.allclose(lie_derivative_connection(spec, f, x, y, [0.2, 0.4, 0.6]), 0)
    line = ManifoldSpec("line", ["x"], [["1"]], fields={"V": ["x^2"]})
    assert lie_derivative_connection(line, "V", [1], [1], [0.5]) == pytest.approx([2])


def test_lie_derivative_of_connection_is_symmetric():
    spec = get_spec("olszak-halfspace").with_field("W", ["y*z", "x^2", "z"])
    p = [0.2, -0.1, 1.4]
    a = lie_derivative_connection(spec, "W", [1, 2, 0], [0, 1, -1], p)
    b = lie_derivative_connection(spec, "W", [0, 1, -1], [1, 2, 0], p)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_divergence_and_gradient():
    spec = flat({"V": ["x", "y - z", "y + z"]})
    assert divergence(spec, "V", [0.1, 0.2, 0.3]) == pytest.approx(3)
    assert divergence(get_spec("olszak-halfspace"), "xi", [0.3, 0.2, 1.5]) == pytest.approx(0, abs=1e-14)
    assert not gradient(spec, "7", [0.1, 0.2, 0.3]).any()
    assert np.allclose(gradient(get_spec("olszak-halfspace"), "z^2 + x", [0, 0, 2]), [1 / 4, 0, 4])


# invariants ------------------------------------------------------------------


metric_coeffs = st.lists(st.floats(-0.3, 0.3), min_size=6, max_size=6)


@settings(max_examples=25, deadline=None)
@given(metric_coeffs)
def test_random_metric_invariants(c):
    # perturbation of the identity by smooth functions, positive definite on the box
    metric = [
        [f"1 + {c[0]}*sin(x*y)", f"{c[1]}*x*z", "0"],
        [f"{c[1]}*x*z", f"1 + {c[2]}*exp(z)*x^2", f"{c[3]}*cos(x + y)"],
        ["0", f"{c[3]}*cos(x + y)", f"1.5 + {c[4]}*y^3 + {c[5]}*x*y"],
    ]
    spec = ManifoldSpec("random", ["x", "y", "z"], metric, domain={k: (-0.8, 0.8) for k in "xyz"})
    report = curvature_checks(spec, sample_points(spec, grid=2, n_random=6))
    for key in ("g^ik g_kj = delta", "nabla g = 0"):
        assert report.residuals[key] < 1e-10
    for key in ("R antisymmetric in (i,j)", "R antisymmetric in (k,l)", "R pair symmetry", "first Bianchi"):
        assert report.residuals[key] < 1e-9
    assert report.residuals["(div Q)Y = Yr/2"] < 1e-7
    assert report.diagnostics["Christoffel jets vs finite differences"] < 1e-6


def test_coordinate_and_covariant_lie_derivatives_agree():
    spec = get_spec("olszak-halfspace").with_field("W", ["sin(y)", "x*z", "z^2"])
    pts = sample_points(spec, grid=4, n_random=36)
    assert len(pts) == 100
    lie_derivative_metric(spec, "W", pts)  # raises on disagreement beyond 1e-10
    second_lie_derivative_metric(spec, "W", pts)


def test_degenerate_metric_rejected():
    spec = ManifoldSpec("bad", ["x", "y"], [["x", "0"], ["0", "1"]])
    with pytest.raises(DegenerateMetricError):
        Geometry(spec, [[0.0, 0.3]])


def test_failing_points_are_skipped_and_reported():
    spec = ManifoldSpec("half", ["x", "y"], [["1", "0"], ["0", "log(x)^2 + 1"]], domain={"x": (-1, 1), "y": (0, 1)})
    pts = np.array([[-0.5, 0.1], [0.5, 0.1], [0.2, 0.7]])
    run = sample_map(lambda p: {"r": Geometry(spec, p).scalar_curvature.value}, pts)
    assert len(run.points) == 2
    assert len(run.dropped) == 1 and run.warnings
    with pytest.raises(PointEvaluationError):
        sample_map(lambda p: {"r": Geometry(spec, p).scalar_curvature.value}, pts[:1])


def test_sampling_is_deterministic_and_inside_domain():
    spec = get_spec("olszak-halfspace")
    a, b = sample_points(spec), sample_points(spec)
    assert np.array_equal(a, b)
    assert len(a) == 5**3 + 32
    z = a[:, 2]
    assert z.min() >= 0.25 + 0.05 * 3.75 - 1e-12 and z.max() <= 4 - 0.05 * 3.75 + 1e-12
