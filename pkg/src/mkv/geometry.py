"""Metric-derived geometry on a single coordinate chart.

Index conventions (all arrays carry a leading point axis):

* ``christoffel[k, i, j]`` is the Christoffel symbol of the second kind.
* ``riemann[l, k, i, j]`` are the components of ``R(d_i, d_j) d_k``, with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``.
* ``ricci[j, k] = riemann[i, k, i, j]`` so ``Ric(Y, Z) = tr(X -> R(X, Y) Z)``.
* A (1,1) tensor ``A[i, j]`` acts on vectors as ``A @ X``; in particular
  ``nabla_vector(V)[i, j]`` is ``nabla_j V^i`` so that ``nabla_X V = A @ X``.
* Covariant derivatives append the differentiation index last.
"""

from __future__ import annotations

import copy
import functools
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import Expression, parse
from .jets import Jet, PointEvaluationError, contract, evaluate, inverse, scale

DEFAULT_GRID = 5
DEFAULT_RANDOM = 32
SAMPLE_SEED = 24029
MAX_GRID_POINTS = 100_000
SHRINK = 0.05
DET_FLOOR = 1e-10


class SpecError(ValueError):
    """The manifold description itself is invalid."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DegenerateMetricError(PointEvaluationError):
    def __init__(self, bad: np.ndarray):
        super().__init__("metric", "degenerate metric", bad)


@dataclass
class StructureBlock:
    """Almost contact data as expression strings: Reeb field, optional 1-form, (1,1) tensor."""

    xi: list[str]
    phi: list[list[str]]
    eta: list[str] | None = None


@dataclass
class ManifoldSpec:
    name: str
    coordinates: list[str]
    metric: list[list[str]]
    domain: dict[str, tuple[float, float]] = field(default_factory=dict)
    parameters: dict[str, float] = field(default_factory=dict)
    fields: dict[str, list[str]] = field(default_factory=dict)
    structure: StructureBlock | None = None

    def __post_init__(self):
        self.coordinates = list(self.coordinates)
        self.domain = {c: tuple(map(float, self.domain.get(c, (-1.0, 1.0)))) for c in self.coordinates}
        self.parameters = {k: float(v) for k, v in self.parameters.items()}

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def expression(self, source: str) -> Expression:
        return _parse_cached(str(source), tuple(self.coordinates), tuple(sorted(self.parameters)))

    def scalar_jet(self, source: str, points: np.ndarray, order: int = 3) -> Jet:
        return evaluate(self.expression(source), points, self.parameters, order)

    def field_components(self, name: str) -> list[str]:
        if name in self.fields:
            return list(self.fields[name])
        if name == "xi" and self.structure is not None:
            return list(self.structure.xi)
        raise KeyError(f"unknown vector field {name!r}; declared: {sorted(self.fields)}")

    def vector_jet(self, field_: str | Sequence[str], points: np.ndarray, order: int = 3) -> Jet:
        comps = self.field_components(field_) if isinstance(field_, str) else list(field_)
        if len(comps) != self.dimension:
            raise SpecError(f"vector field has {len(comps)} components, expected {self.dimension}")
        return Jet.stack([self.scalar_jet(c, points, order) for c in comps])

    def matrix_jet(self, rows: Sequence[Sequence[str]], points: np.ndarray, order: int = 3) -> Jet:
        n = self.dimension
        flat = [self.scalar_jet(rows[i][j], points, order) for i in range(n) for j in range(n)]
        return Jet.stack(flat, (n, n))

    def metric_jet(self, points: np.ndarray, order: int = 3) -> Jet:
        """Metric components; the upper triangle is mirrored so the result is exactly symmetric."""
        n = self.dimension
        cache: dict[tuple[int, int], Jet] = {}
        for i in range(n):
            for j in range(i, n):
                cache[i, j] = self.scalar_jet(self.metric[i][j], points, order)
        flat = [cache[min(i, j), max(i, j)] for i in range(n) for j in range(n)]
        return Jet.stack(flat, (n, n))

    def with_field(self, name: str, components: Sequence[str]) -> "ManifoldSpec":
        out = copy.deepcopy(self)
        out.fields[name] = list(components)
        return out

    def with_parameters(self, **values: float) -> "ManifoldSpec":
        out = copy.deepcopy(self)
        out.parameters.update({k: float(v) for k, v in values.items()})
        return out


@functools.lru_cache(maxsize=4096)
def _parse_cached(source: str, coords: tuple[str, ...], params: tuple[str, ...]) -> Expression:
    return parse(source, coords, params)


# Sampling --------------------------------------------------------------------


def sample_points(
    spec: ManifoldSpec,
    grid: int = DEFAULT_GRID,
    n_random: int = DEFAULT_RANDOM,
    seed: int = SAMPLE_SEED,
) -> np.ndarray:
    """Product grid over the domain box shrunk 5% inward, plus seeded random interior points."""
    n = spec.dimension
    while grid > 1 and grid**n > MAX_GRID_POINTS:
        grid -= 1
    lo = np.array([spec.domain[c][0] for c in spec.coordinates])
    hi = np.array([spec.domain[c][1] for c in spec.coordinates])
    width = hi - lo
    lo, hi = lo + SHRINK * width, hi - SHRINK * width
    axes = [np.linspace(a, b, grid) if grid > 1 else np.array([(a + b) / 2]) for a, b in zip(lo, hi)]
    mesh = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n)
    if n_random:
        rng = np.random.default_rng(seed)
        extra = rng.uniform(lo, hi, size=(n_random, n))
        mesh = np.vstack([mesh, extra])
    return mesh


def _chunk_size(n: int) -> int:
    return int(max(16, min(4096, 2e7 // max(n, 1) ** 6)))


@dataclass
class SampleRun:
    """Per-point outputs of a computation plus the points that could not be evaluated."""

    points: np.ndarray
    data: dict[str, np.ndarray]
    dropped: list[tuple[list[float], str]]

    @property
    def warnings(self) -> list[str]:
        return [f"point {p} skipped: {why}" for p, why in self.dropped]


def sample_map(
    compute: Callable[[np.ndarray], Mapping[str, np.ndarray]],
    points: np.ndarray,
    n: int | None = None,
) -> SampleRun:
    """Run ``compute`` over points in chunks, skipping points where evaluation fails.

    ``compute`` must return arrays whose first axis indexes the points it was
    given.  Failing points are reported rather than aborting the run.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    size = _chunk_size(n or points.shape[1])
    outputs: list[dict[str, np.ndarray]] = []
    kept: list[np.ndarray] = []
    dropped: list[tuple[list[float], str]] = []
    for start in range(0, len(points), size):
        chunk = points[start:start + size]
        for _ in range(len(chunk) + 1):
            if len(chunk) == 0:
                break
            try:
                res = dict(compute(chunk))
            except PointEvaluationError as err:
                bad = np.asarray(err.bad, dtype=bool)
                if bad.shape != (len(chunk),) or not bad.any():
                    raise
                for p in chunk[bad]:
                    dropped.append((p.tolist(), str(err)))
                chunk = chunk[~bad]
                continue
            outputs.append(res)
            kept.append(chunk)
            break
    if not outputs:
        raise PointEvaluationError("sample set", "no sample point could be evaluated", np.ones(len(points), bool))
    data = {k: np.concatenate([o[k] for o in outputs]) for k in outputs[0]}
    return SampleRun(np.concatenate(kept), data, dropped)


# Unary einsum on jets (linear, so parts transform independently) -------------


def einsum1(subscripts: str, a: Jet) -> Jet:
    lhs, out = subscripts.split("->")
    parts = []
    for k, p in enumerate(a.parts):
        d = "UVW"[:k]
        parts.append(np.einsum(f"Z{lhs}{d}->Z{out}{d}", p))
    return Jet(parts)


def identity_jet(n: int, npoints: int, order: int) -> Jet:
    return Jet.constant(np.eye(n), npoints, n, order)


# Geometry --------------------------------------------------------------------


class Geometry:
    """Levi-Civita geometry of ``spec`` at a batch of points (derivatives via jets)."""

    def __init__(self, spec: ManifoldSpec, points: np.ndarray, order: int = 3):
        self.spec = spec
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.n = spec.dimension
        self.order = order
        self.g = spec.metric_jet(self.points, order)
        det = np.linalg.det(self.g.value)
        bad = ~(np.abs(det) > DET_FLOOR)
        if bad.any():
            raise DegenerateMetricError(bad)

    @property
    def npoints(self) -> int:
        return len(self.points)

    def const(self, value) -> Jet:
        return Jet.constant(value, self.npoints, self.n, self.order)

    def vector(self, field_) -> Jet:
        if isinstance(field_, Jet):
            return field_
        arr = np.asarray(field_) if not isinstance(field_, str) else None
        if arr is not None and arr.dtype.kind in "fiu":
            return self.const(arr.astype(float))
        return self.spec.vector_jet(field_, self.points, self.order)

    def scalar(self, source: str) -> Jet:
        return self.spec.scalar_jet(source, self.points, self.order)

    # metric-level quantities -----------------------------------------------
    @functools.cached_property
    def ginv(self) -> Jet:
        return inverse(self.g)

    @functools.cached_property
    def christoffel(self) -> Jet:
        dg = self.g.derivative()  # [l, j, i] = d_i g_lj
        combo = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
        return 0.5 * contract("kl,lij->kij", self.ginv.truncate(dg.order), combo)

    @functools.cached_property
    def riemann(self) -> Jet:
        gam = self.christoffel
        d = gam.derivative().transpose(0, 2, 3, 1)  # [l, k, i, j] = d_i Gamma^l_jk
        quad = contract("lim,mjk->lkij", gam, gam)
        return d - d.transpose(0, 1, 3, 2) + quad - quad.transpose(0, 1, 3, 2)

    @functools.cached_property
    def riemann_lowered(self) -> Jet:
        return contract("lm,mkij->lkij", self.g, self.riemann)

    @functools.cached_property
    def ricci(self) -> Jet:
        return einsum1("ikij->jk", self.riemann)

    @functools.cached_property
    def ricci_operator(self) -> Jet:
        return contract("ik,kj->ij", self.ginv, self.ricci)

    @functools.cached_property
    def scalar_curvature(self) -> Jet:
        return einsum1("ii->", self.ricci_operator)

    # index gymnastics --------------------------------------------------------
    def lower(self, v: Jet) -> Jet:
        return contract("ij,j->i", self.g, v)

    def raise_(self, w: Jet) -> Jet:
        return contract("ij,j->i", self.ginv, w)

    def inner(self, x: Jet, y: Jet) -> Jet:
        return contract("i,i->", self.lower(x), y)

    def norm_vector(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.abs(np.einsum("pij,pi,pj->p", self.g.value, v, v, optimize=True)))

    def norm_02(self, t: np.ndarray) -> np.ndarray:
        gi = self.ginv.value
        return np.sqrt(np.abs(np.einsum("pia,pjb,pij,pab->p", gi, gi, t, t, optimize=True)))

    def norm_11(self, a: np.ndarray) -> np.ndarray:
        g, gi = self.g.value, self.ginv.value
        return np.sqrt(np.abs(np.einsum("pia,pjb,pij,pab->p", g, gi, a, a, optimize=True)))

    def norm_13(self, t: np.ndarray) -> np.ndarray:
        g, gi = self.g.value, self.ginv.value
        return np.sqrt(np.abs(np.einsum("pla,pkb,pic,pjd,plkij,pabcd->p", g, gi, gi, gi, t, t, optimize=True)))

    def inner_02(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        gi = self.ginv.value
        return np.einsum("pia,pjb,pij,pab->p", gi, gi, s, t, optimize=True)

    def inner_11(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        g, gi = self.g.value, self.ginv.value
        return np.einsum("pia,pjb,pij,pab->p", g, gi, a, b, optimize=True)

    def _gam(self, order: int) -> Jet:
        return self.christoffel.truncate(min(order, self.christoffel.order))

    # covariant derivatives ---------------------------------------------------
    def nabla_vector(self, w: Jet) -> Jet:
        """``[i, j] = nabla_j W^i``."""
        dw = w.derivative()
        return dw + contract("ijk,k->ij", self._gam(dw.order), w)

    def nabla_form(self, w: Jet) -> Jet:
        """``[i, k] = (nabla_k w)_i``."""
        dw = w.derivative()
        return dw - contract("mki,m->ik", self._gam(dw.order), w)

    def nabla_11(self, t: Jet) -> Jet:
        """``[i, j, k] = (nabla_k T)^i_j``."""
        dt = t.derivative()
        gam = self._gam(dt.order)
        return dt + contract("ikm,mj->ijk", gam, t) - contract("mkj,im->ijk", gam, t)

    def nabla_02(self, t: Jet) -> Jet:
        """``[i, j, k] = (nabla_k T)_ij``."""
        dt = t.derivative()
        gam = self._gam(dt.order)
        return dt - contract("mki,mj->ijk", gam, t) - contract("mkj,im->ijk", gam, t)

    # Lie derivatives (coordinate formulas) ----------------------------------
    def lie_02(self, v: Jet, t: Jet) -> Jet:
        dt, dv = t.derivative(), v.derivative()  # dt[i,j,k] = d_k T_ij, dv[k,i] = d_i V^k
        return contract("k,ijk->ij", v, dt) + contract("kj,ki->ij", t, dv) + contract("ik,kj->ij", t, dv)

    def lie_11(self, v: Jet, t: Jet) -> Jet:
        dt, dv = t.derivative(), v.derivative()
        return contract("k,ijk->ij", v, dt) - contract("kj,ik->ij", t, dv) + contract("ik,kj->ij", t, dv)

    def lie_form(self, v: Jet, w: Jet) -> Jet:
        dw, dv = w.derivative(), v.derivative()
        return contract("k,ik->i", v, dw) + contract("k,ki->i", w, dv)

    def lie_metric(self, v: Jet) -> Jet:
        return self.lie_02(v, self.g)

    # curvature applied to vectors (values only) ------------------------------
    def curvature_map(self, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        """``R(X, Y) Z`` at every point."""
        return np.einsum("plkij,pk,pi,pj->pl", self.riemann.value, z, x, y, optimize=True)


def twist_from_nabla(g: np.ndarray, ginv: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Skew operator with g(X, phi Y) = g(nabla_X V, Y) - g(X, nabla_Y V)."""
    return np.einsum("pik,plk,plj->pij", ginv, a, g, optimize=True) - a


def twist_jet(geom: Geometry, a: Jet) -> Jet:
    ginv = geom.ginv.truncate(a.order)
    g = geom.g.truncate(a.order)
    at_g = contract("lk,lj->kj", a, g)
    return contract("ik,kj->ij", ginv, at_g) - a


# Single-point and batched operations ----------------------------------------


def _as_points(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    return np.atleast_2d(arr), arr.ndim == 1


def _unbatch(x: np.ndarray, single: bool):
    return x[0] if single else x


@dataclass
class GeometryCache:
    """Metric-derived quantities at one point."""

    point: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    d_christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    ricci_operator: np.ndarray
    scalar_curvature: float
    d_ricci: np.ndarray


def geometry_at(spec: ManifoldSpec, p: Sequence[float]) -> GeometryCache:
    geom = Geometry(spec, np.asarray(p, dtype=float)[None, :])
    return GeometryCache(
        point=np.asarray(p, dtype=float),
        g=geom.g.value[0],
        ginv=geom.ginv.value[0],
        christoffel=geom.christoffel.value[0],
        d_christoffel=geom.christoffel.parts[1][0],
        riemann=geom.riemann.value[0],
        ricci=geom.ricci.value[0],
        ricci_operator=geom.ricci_operator.value[0],
        scalar_curvature=float(geom.scalar_curvature.value[0]),
        d_ricci=geom.ricci.parts[1][0],
    )


def covariant_derivative_vector(spec: ManifoldSpec, v, p) -> np.ndarray:
    """``(nabla V)^i_j = d_j V^i + Gamma^i_jk V^k``."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    return _unbatch(geom.nabla_vector(geom.vector(v)).value, single)


def second_covariant_derivative(spec: ManifoldSpec, v, x, y, p) -> np.ndarray:
    """``nabla_X (nabla_Y V)`` where Y is a field (name/expressions) or constant components."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    vj, yj = geom.vector(v), geom.vector(y)
    w = contract("ij,j->i", geom.nabla_vector(vj), yj)
    xv = np.broadcast_to(np.asarray(geom.vector(x).value), (geom.npoints, geom.n))
    return _unbatch(np.einsum("pij,pj->pi", geom.nabla_vector(w).value, xv), single)


class ConsistencyError(AssertionError):
    """Two independent routes to the same quantity disagree beyond tolerance."""


def lie_derivative_metric(spec: ManifoldSpec, v, p, tol: float = 1e-10) -> np.ndarray:
    """``L_V g`` by the coordinate formula, cross-checked against ``nabla_i V_j + nabla_j V_i``."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    vj = geom.vector(v)
    coord = geom.lie_metric(vj).value
    a = geom.nabla_vector(vj).value
    lowered = np.einsum("pjk,pki->pij", geom.g.value, a)
    cov = lowered + lowered.transpose(0, 2, 1)
    scale_ = 1 + np.abs(coord).max()
    if np.abs(coord - cov).max() > tol * scale_:
        raise ConsistencyError(f"coordinate and covariant L_V g disagree by {np.abs(coord - cov).max():.3e}")
    return _unbatch(coord, single)


def second_lie_curvature_expansion(geom: Geometry, vj: Jet) -> np.ndarray:
    """``L_V L_V g`` from the curvature expansion in terms of nabla V and the twist operator.

    Includes the ``g((nabla_V phi) Y, X)`` term, which is needed for the
    expansion to equal the double Lie derivative for non-affine fields.
    """
    a = geom.nabla_vector(vj)  # order 2
    phi = twist_jet(geom, a)
    av = a.value
    ph = phi.value
    v = vj.value
    r_v = np.einsum("plkij,pk,pi->plj", geom.riemann.value, v, v, optimize=True)  # Y -> R(V, Y) V
    w = contract("ij,j->i", a, vj.truncate(a.order))  # nabla_V V
    nab_w = geom.nabla_vector(w).value  # Y -> nabla_Y nabla_V V
    nab_phi_v = np.einsum("pijk,pk->pij", geom.nabla_11(phi).value, v)
    op = (
        2 * r_v
        + 2 * nab_w
        + 2 * av @ av
        + 3 * ph @ av
        + ph @ ph
        + av @ ph
        + nab_phi_v
    )
    return np.einsum("pik,pkj->pij", geom.g.value, op)


def second_lie_derivative_metric(spec: ManifoldSpec, v, p, tol: float = 1e-8) -> np.ndarray:
    """``L_V L_V g``: coordinate Lie derivative applied twice, checked against the curvature expansion."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    vj = geom.vector(v)
    direct = geom.lie_02(vj, geom.lie_metric(vj)).value
    expanded = second_lie_curvature_expansion(geom, vj)
    gap = np.abs(direct - expanded).max()
    if gap > tol * (1 + np.abs(direct).max()):
        raise ConsistencyError(f"double Lie derivative and curvature expansion disagree by {gap:.3e}")
    return _unbatch(direct, single)


def twist_operator(spec: ManifoldSpec, v, p, tol: float = 1e-10) -> np.ndarray:
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    a = geom.nabla_vector(geom.vector(v)).value
    phi = twist_from_nabla(geom.g.value, geom.ginv.value, a)
    lowered = np.einsum("pik,pkj->pij", geom.g.value, phi)
    if np.abs(lowered + lowered.transpose(0, 2, 1)).max() > tol * (1 + np.abs(lowered).max()):
        raise ConsistencyError("twist operator is not g-skew")
    return _unbatch(phi, single)


def weyl_from_geometry(geom: Geometry) -> np.ndarray:
    if geom.n != 3:
        raise ValueError(f"the Weyl display is the dimension-3 form; got dimension {geom.n}")
    n = geom.n
    g, ric, q = geom.g.value, geom.ricci.value, geom.ricci_operator.value
    r = geom.scalar_curvature.value
    delta = np.eye(n)
    bracket = (
        np.einsum("pjk,li->plkij", ric, delta)
        - np.einsum("pik,lj->plkij", ric, delta)
        + np.einsum("pjk,pli->plkij", g, q)
        - np.einsum("pik,plj->plkij", g, q)
    )
    metric_part = np.einsum("pjk,li->plkij", g, delta) - np.einsum("pik,lj->plkij", g, delta)
    return geom.riemann.value - bracket + 0.5 * r[:, None, None, None, None] * metric_part


def weyl_tensor(spec: ManifoldSpec, p) -> np.ndarray:
    pts, single = _as_points(p)
    return _unbatch(weyl_from_geometry(Geometry(spec, pts)), single)


def lie_derivative_connection(spec: ManifoldSpec, v, x, y, p) -> np.ndarray:
    """``(L_V nabla)(X, Y) = nabla_X nabla_Y V - nabla_{nabla_X Y} V - R(X, V) Y`` for constant X, Y."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    vj = geom.vector(v)
    second = geom.nabla_11(geom.nabla_vector(vj)).value  # [i, j, k] = nabla_k nabla_j V^i
    xv = np.broadcast_to(np.asarray(x, dtype=float), (geom.npoints, geom.n))
    yv = np.broadcast_to(np.asarray(y, dtype=float), (geom.npoints, geom.n))
    hess = np.einsum("pijk,pj,pk->pi", second, yv, xv, optimize=True)
    return _unbatch(hess - geom.curvature_map(xv, vj.value, yv), single)


def divergence(spec: ManifoldSpec, v, p) -> np.ndarray:
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    return _unbatch(np.einsum("pii->p", geom.nabla_vector(geom.vector(v)).value), single)


def gradient(spec: ManifoldSpec, alpha: str, p) -> np.ndarray:
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    grad = np.einsum("pij,pj->pi", geom.ginv.value, geom.scalar(alpha).parts[1])
    return _unbatch(grad, single)


def nabla_norm(spec: ManifoldSpec, v, p) -> np.ndarray:
    """``|nabla V|`` with the metric contraction of a (1,1) tensor."""
    pts, single = _as_points(p)
    geom = Geometry(spec, pts)
    return _unbatch(geom.norm_11(geom.nabla_vector(geom.vector(v)).value), single)


# Finite-difference cross-check ----------------------------------------------


def christoffel_fd(spec: ManifoldSpec, points: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Christoffel symbols from metric values only, 4th-order central differences."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = spec.dimension
    g0 = spec.metric_jet(pts, 0).value
    dg = np.zeros(g0.shape + (n,))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        vals = {s: spec.metric_jet(pts + s * e, 0).value for s in (-2, -1, 1, 2)}
        dg[..., k] = (-vals[2] + 8 * vals[1] - 8 * vals[-1] + vals[-2]) / (12 * step)
    ginv = np.linalg.inv(g0)
    combo = dg.transpose(0, 1, 3, 2) + dg - dg.transpose(0, 3, 1, 2)
    return 0.5 * np.einsum("pkl,plij->pkij", ginv, combo)
