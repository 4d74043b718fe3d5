"""Killing-type classification of vector fields and the mixed Killing identities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .contact import StructureFields, covariant_norm, _aggregate, _points
from .geometry import (
    ConsistencyError,
    Geometry,
    ManifoldSpec,
    SpecError,
    sample_map,
    second_lie_curvature_expansion,
    twist_jet,
)
from .jets import Jet, contract
from .report import Report

EPS_KILLING = 1e-8
F_NONZERO = 1e-6
CLASSIFY_TOL = 1e-7


class Classification(str, enum.Enum):
    KILLING = "KILLING"
    TWO_KILLING = "TWO_KILLING"
    HOMOTHETIC = "HOMOTHETIC"
    CONFORMAL = "CONFORMAL"
    MIXED_KILLING = "MIXED_KILLING"
    NONE = "NONE"


class KillingDegenerateError(ValueError):
    """L_V g vanishes at the point, so the mixed Killing factor is undefined there."""


# Per-point Lie-derivative data -----------------------------------------------


def _field_jet(spec: ManifoldSpec, v, points: np.ndarray, geom: Geometry) -> Jet:
    if isinstance(v, str) and v not in spec.fields and v != "xi":
        raise KeyError(f"unknown vector field {v!r}; declared: {sorted(spec.fields)}")
    return geom.vector(v)


def lie_data(spec: ManifoldSpec, v, points: np.ndarray) -> dict[str, np.ndarray]:
    """L_V g, L_V L_V g and the conformal factor at a batch of points."""
    geom = Geometry(spec, points, order=2)
    vj = _field_jet(spec, v, points, geom)
    lg = geom.lie_metric(vj)  # order 1
    llg = geom.lie_02(vj, lg).value
    expanded = second_lie_curvature_expansion(geom, vj)
    a = geom.nabla_vector(vj).value
    lowered = np.einsum("pjk,pki->pij", geom.g.value, a)
    cov = lowered + lowered.transpose(0, 2, 1)
    n = geom.n
    lam = contract("ij,ij->", geom.ginv.truncate(lg.order), lg) * (1.0 / (2 * n))
    v_lam = np.einsum("pi,pi->p", lam.parts[1], vj.value)
    lgv = lg.value
    lg_norm = geom.norm_02(lgv)
    llg_norm = geom.norm_02(llg)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = geom.inner_02(llg, lgv) / lg_norm**2
    f = np.where(lg_norm < EPS_KILLING, np.nan, f)
    f_used = np.nan_to_num(f)
    proj = geom.norm_02(llg - f_used[:, None, None] * lgv) / (1 + llg_norm)
    conf = geom.norm_02(lgv - 2 * lam.value[:, None, None] * geom.g.value) / (1 + lg_norm)
    return {
        "lg_norm": lg_norm,
        "llg_norm": llg_norm,
        "f": f,
        "projection": proj,
        "lambda": lam.value,
        "V(lambda)": v_lam,
        "conformal": conf,
        "coordinate vs covariant L_V g": np.abs(lgv - cov).max(axis=(1, 2)) / (1 + np.abs(lgv).max(axis=(1, 2))),
        "double Lie vs curvature expansion": np.abs(llg - expanded).max(axis=(1, 2)) / (1 + np.abs(llg).max(axis=(1, 2))),
    }


def estimate_factor(spec: ManifoldSpec, v, p) -> tuple[float, float]:
    """Projection coefficient f = <LLg, Lg>/|Lg|^2 and the relative projection residual at p."""
    d = lie_data(spec, v, np.atleast_2d(np.asarray(p, dtype=float)))
    if not np.isfinite(d["f"][0]):
        raise KillingDegenerateError(f"L_V g vanishes at {list(np.ravel(p))}; the factor is undefined")
    return float(d["f"][0]), float(d["projection"][0])


# Classification --------------------------------------------------------------


@dataclass
class KillingReport:
    field: str
    classification: Classification
    f: np.ndarray
    f_aggregate: dict
    flags: dict[str, bool]
    report: Report
    coverage: float = 1.0

    @property
    def is_mixed(self) -> bool:
        return self.classification == Classification.MIXED_KILLING

    def to_document(self) -> dict:
        doc = self.report.to_document()
        doc["classification"] = self.classification.value
        doc["flags"] = self.flags
        return doc


def _label(v) -> str:
    return v if isinstance(v, str) else "[" + ", ".join(map(str, v)) + "]"


def classify_field(spec: ManifoldSpec, v, points=None, tol: float = CLASSIFY_TOL) -> KillingReport:
    """Killing > 2-Killing > homothetic/conformal > fitted mixed Killing > none."""
    pts = _points(spec, points)
    if len(pts) == 0:
        raise SpecError("empty sample set", "points")
    run = sample_map(lambda p: lie_data(spec, v, p), pts)
    d = run.data
    flags = {"homothetic": False, "conformal": False, "proper": False}
    lam_agg = _aggregate(d["lambda"])
    f = d["f"]
    if d["lg_norm"].max() < EPS_KILLING:
        cls = Classification.KILLING
    elif d["llg_norm"].max() < EPS_KILLING:
        cls = Classification.TWO_KILLING
    elif d["conformal"].max() < tol:
        flags["conformal"] = True
        if lam_agg["constant"]:
            flags["homothetic"] = True
            cls = Classification.MIXED_KILLING
            f = 2 * d["lambda"]
        elif np.all(np.abs(d["V(lambda)"]) < F_NONZERO * (1 + np.abs(d["lambda"]))):
            cls = Classification.MIXED_KILLING
            f = 2 * d["lambda"]
        else:
            cls = Classification.CONFORMAL
    elif d["projection"].max() < tol:
        finite = f[np.isfinite(f)]
        cls = Classification.MIXED_KILLING if finite.size and np.abs(finite).max() > F_NONZERO \
            else Classification.TWO_KILLING
    else:
        cls = Classification.NONE
    flags["proper"] = cls == Classification.MIXED_KILLING
    finite = f[np.isfinite(f)]
    f_agg = _aggregate(finite) if finite.size else {"value": None, "constant": False}

    report = Report("classify_field", spec.name, tol)
    report.points = run.points
    report.per_point_residual = d["projection"]
    report.per_point_fitted["f"] = f
    for key in ("coordinate vs covariant L_V g", "double Lie vs curvature expansion"):
        report.residuals[key] = float(d[key].max())
    report.fitted["f"] = f_agg
    report.diagnostics.update({
        "field": _label(v),
        "classification": cls.value,
        "flags": flags,
        "max |L_V g|": float(d["lg_norm"].max()),
        "max |L_V L_V g|": float(d["llg_norm"].max()),
        "max projection residual": float(d["projection"].max()),
        "max conformal residual": float(d["conformal"].max()),
        "lambda": lam_agg,
    })
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    coverage = len(run.points) / len(pts)
    if report.residuals["coordinate vs covariant L_V g"] > 1e-10 or report.residuals["double Lie vs curvature expansion"] > 1e-8:
        raise ConsistencyError(f"internal Lie-derivative routes disagree for field {_label(v)}")
    return KillingReport(_label(v), cls, f, f_agg, flags, report, coverage)


# Curvature identities ---------------------------------------------------------


@dataclass
class IdentityTerms:
    """Matrices of the curvature identities at a batch of points (operators on Y)."""

    operator_dropped: np.ndarray
    operator_full: np.ndarray
    quadratic: np.ndarray
    bochner: np.ndarray
    bochner_terms: dict[str, np.ndarray]
    scale: np.ndarray
    geom: Geometry


def identity_terms(spec: ManifoldSpec, v, f, points: np.ndarray) -> IdentityTerms:
    """Operators Y -> residual of the criteria for given f (scalar or per-point array)."""
    geom = Geometry(spec, points, order=2)
    vj = _field_jet(spec, v, points, geom)
    npts = geom.npoints
    fv = np.broadcast_to(np.asarray(f, dtype=float), (npts,))[:, None, None]
    a = geom.nabla_vector(vj)
    phi = twist_jet(geom, a)
    av, ph, vv = a.value, phi.value, vj.value
    g = geom.g.value
    r_v = np.einsum("plkij,pk,pi->plj", geom.riemann.value, vv, vv, optimize=True)  # Y -> R(V, Y) V
    w = contract("ij,j->i", a, vj.truncate(a.order))  # nabla_V V
    nab_w = geom.nabla_vector(w).value  # Y -> nabla_Y nabla_V V
    nab_phi_v = np.einsum("pijk,pk->pij", geom.nabla_11(phi).value, vv)
    op = 2 * r_v + 2 * nab_w + 2 * av @ av + 3 * ph @ av + ph @ ph + av @ ph
    lin = fv * (2 * av + ph)
    op_dropped = op - lin
    op_full = op + nab_phi_v - lin
    # quadratic form of the second criterion: Y -> g(R(Y,V)V,Y) - g(nabla_Y nabla_V V, Y) - |nabla_Y V|^2 + f g(nabla_Y V, Y)
    quad_form = (
        np.einsum("pkl,plj->pkj", g, -r_v)
        - np.einsum("pkl,plj->pkj", g, nab_w)
        - np.einsum("pli,plm,pmj->pij", av, g, av, optimize=True)
        + fv * np.einsum("pkl,plj->pkj", g, av)
    )
    quad_form = 0.5 * (quad_form + quad_form.transpose(0, 2, 1))
    ric_vv = np.einsum("pij,pi,pj->p", geom.ricci.value, vv, vv)
    div_w = np.einsum("pii->p", nab_w)
    nab_sq = geom.norm_11(av) ** 2
    div_v = np.einsum("pii->p", av)
    bochner = ric_vv - div_w - nab_sq + fv[:, 0, 0] * div_v
    scale = 1 + geom.norm_11(op) + np.abs(fv[:, 0, 0]) * geom.norm_11(2 * av + ph)
    return IdentityTerms(
        op_dropped, op_full, quad_form, bochner,
        {"Ric(V,V)": ric_vv, "div(nabla_V V)": div_w, "|nabla V|^2": nab_sq, "f div V": fv[:, 0, 0] * div_v},
        scale, geom,
    )


def _probe(y, n: int, npts: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(y, dtype=float), (npts, n))


def curvature_identity_operator(spec: ManifoldSpec, v, f, y, p, include_nabla_phi: bool = False) -> float:
    """|2R(V,Y)V - [2f nabla_Y V + f phi Y - 2 nabla_Y nabla_V V - ...]|_g at p (phi = twist of V)."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    t = identity_terms(spec, v, f, pts)
    yv = _probe(y, spec.dimension, len(pts))
    mat = t.operator_full if include_nabla_phi else t.operator_dropped
    res = np.einsum("pij,pj->pi", mat, yv)
    return float(t.geom.norm_vector(res).max())


def curvature_identity_quadratic(spec: ManifoldSpec, v, f, y, p) -> float:
    """g(R(Y,V)V,Y) - g(nabla_Y nabla_V V, Y) - |nabla_Y V|^2 + f g(nabla_Y V, Y) at p."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    t = identity_terms(spec, v, f, pts)
    yv = _probe(y, spec.dimension, len(pts))
    return float(np.einsum("pij,pi,pj->p", t.quadratic, yv, yv)[0])


def bochner_integrand(spec: ManifoldSpec, v, f, p) -> float:
    """Ric(V,V) - div(nabla_V V) - |nabla V|^2 + f div V at p."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    return float(identity_terms(spec, v, f, pts).bochner[0])


def bochner_terms(spec: ManifoldSpec, v, f, p) -> dict[str, float]:
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    t = identity_terms(spec, v, f, pts)
    return {k: float(val[0]) for k, val in t.bochner_terms.items()}


def identity_residuals(spec: ManifoldSpec, v, f, points: np.ndarray) -> dict[str, np.ndarray]:
    """Relative residuals of the three criteria over all probe directions, plus the trace relation."""
    t = identity_terms(spec, v, f, points)
    geom = t.geom
    quad = t.quadratic
    trace_op = -0.5 * np.einsum("pii->p", t.operator_dropped)
    return {
        "operator form without nabla_V phi": geom.norm_11(t.operator_dropped) / t.scale,
        "operator form": geom.norm_11(t.operator_full) / t.scale,
        "quadratic form": geom.norm_02(quad) / t.scale,
        "Bochner integrand": np.abs(t.bochner) / t.scale,
        "trace of operator form - Bochner": np.abs(trace_op - t.bochner) / t.scale,
    }


def killing_identities(spec: ManifoldSpec, v, points=None, tol: float = 1e-8,
                       classification: KillingReport | None = None) -> Report:
    """Criteria 7, 8 and the Bochner integrand with the fitted factor."""
    pts = _points(spec, points)
    kr = classification or classify_field(spec, v, pts)
    f = np.nan_to_num(kr.f)
    keep = {tuple(p) for p in kr.report.points}
    mask = np.array([tuple(p) in keep for p in pts])
    pts = pts[mask]
    run = sample_map(lambda p: identity_residuals(spec, v, _f_for(p, pts, f), p), pts)
    report = Report("killing_identities", spec.name, tol)
    report.points = run.points
    d = run.data
    asserted = ["quadratic form", "Bochner integrand", "operator form", "trace of operator form - Bochner"]
    if kr.is_mixed:
        for k in asserted:
            report.residuals[k] = float(d[k].max())
        report.diagnostics["operator form without nabla_V phi"] = float(d["operator form without nabla_V phi"].max())
    else:
        for k in asserted + ["operator form without nabla_V phi"]:
            report.diagnostics[k] = float(d[k].max())
        report.residuals["trace of operator form - Bochner"] = float(d["trace of operator form - Bochner"].max())
    report.per_point_residual = np.max(np.vstack([d[k] for k in ("quadratic form", "Bochner integrand")]), axis=0)
    report.per_point_fitted["f"] = _f_for(run.points, pts, f)
    report.diagnostics["classification"] = kr.classification.value
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


def _f_for(chunk: np.ndarray, pts: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Look up per-point f for a chunk of points drawn from ``pts``."""
    index = {tuple(p): i for i, p in enumerate(pts)}
    return np.array([f[index[tuple(p)]] for p in chunk])


def classify_with_identities(spec: ManifoldSpec, v, points=None, tol: float = CLASSIFY_TOL) -> tuple[KillingReport, Report]:
    kr = classify_field(spec, v, points, tol)
    ident = killing_identities(spec, v, _points(spec, points), classification=kr)
    kr.report.children.append(ident)
    return kr, ident


# Conformal change ------------------------------------------------------------


def conformal_spec(spec: ManifoldSpec, rho: str) -> ManifoldSpec:
    """Spec with metric rho * g built at the expression level."""
    r = spec.expression(rho).root
    n = spec.dimension
    metric = [[ex.render(ex.mul(r, spec.expression(spec.metric[min(i, j)][max(i, j)]).root)) for j in range(n)]
              for i in range(n)]
    out = spec.with_parameters()
    out.name = f"{spec.name}*({rho})"
    out.metric = metric
    return out


def conformal_change_check(spec: ManifoldSpec, v, rho: str, points=None, f=None, tol: float = 1e-7) -> Report:
    """Compare the identity 2(V rho) L_V g = [f (V rho) - V(V rho)] g with direct recomputation on rho g."""
    pts = _points(spec, points)
    scaled = conformal_spec(spec, rho)

    def compute(p):
        rj = spec.scalar_jet(rho, p)
        if np.any(rj.value <= 0):
            raise SpecError(f"rho must be positive; rho = {rj.value.min():.3e} at a sample point", "rho")
        d = lie_data(spec, v, p)
        fv = np.nan_to_num(d["f"]) if f is None else np.broadcast_to(np.asarray(f, dtype=float), (len(p),))
        geom = Geometry(spec, p, order=2)
        vj = geom.vector(v)
        v_rho = contract("i,i->", vj, rj.derivative())  # order 2
        vv_rho = np.einsum("pi,pi->p", v_rho.parts[1], vj.value)
        lg = geom.lie_metric(vj).value
        g = geom.g.value
        lhs = 2 * v_rho.value[:, None, None] * lg
        rhs = (fv * v_rho.value - vv_rho)[:, None, None] * g
        ident = geom.norm_02(lhs - rhs) / (1 + geom.norm_02(lhs) + geom.norm_02(rhs))
        sgeom = Geometry(scaled, p, order=2)
        svj = sgeom.vector(v)
        slg = sgeom.lie_metric(svj)
        sllg = sgeom.lie_02(svj, slg).value
        direct = geom.norm_02(sllg - fv[:, None, None] * slg.value) / (1 + geom.norm_02(sllg))
        return {"identity": ident, "direct": direct, "V rho": v_rho.value, "f": fv, "mixed": d["projection"]}

    run = sample_map(compute, pts)
    d = run.data
    identity_ok = bool(d["identity"].max() < tol)
    direct_ok = bool(d["direct"].max() < tol)
    report = Report("conformal_change_check", spec.name, tol)
    report.points = run.points
    report.per_point_residual = np.abs(d["identity"] - d["direct"])
    report.per_point_fitted.update({"f": d["f"], "V rho": d["V rho"]})
    report.conditions["identity verdict agrees with direct recomputation on rho g"] = identity_ok == direct_ok
    report.diagnostics.update({
        "rho": rho,
        "identity holds": identity_ok,
        "V mixed Killing for rho g (same f)": direct_ok,
        "max identity residual": float(d["identity"].max()),
        "max direct residual": float(d["direct"].max()),
        "max mixed Killing residual on g": float(d["mixed"].max()),
    })
    if d["mixed"].max() >= tol:
        report.warnings.append("V is not mixed Killing on the original metric; the comparison is still reported")
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


# Reeb field ------------------------------------------------------------------


def reeb_mixed_killing_check(spec: ManifoldSpec, points=None, tol: float = 1e-7, h_tol: float = 1e-8) -> Report:
    """Lie derivatives of g along xi via h, the h = 0 criterion and, if applicable, the mixed Killing consequences."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        g = geom.g.value
        xi = sf.xi
        lg = geom.lie_metric(xi)
        llg = geom.lie_02(xi, lg).value
        h, hp = sf.h.value, sf.h_prime.value
        lg_expect = 2 * np.einsum("pik,pkj->pij", g, hp)
        lg_expect = 0.5 * (lg_expect + lg_expect.transpose(0, 2, 1))
        nxi_hp = np.einsum("pijk,pk->pij", sf.nabla_h_prime.value, xi.value)
        llg_expect = 4 * np.einsum("pik,pkj->pij", g, h @ h) + 2 * np.einsum("pik,pkj->pij", g, nxi_hp)
        llg_expect = 0.5 * (llg_expect + llg_expect.transpose(0, 2, 1))
        lgv = lg.value
        r_xx = np.einsum("plkij,pk,pj->pli", geom.riemann.value, xi.value, xi.value)  # Y -> R(Y, xi) xi
        return {
            "L_xi g = 2 g(h' ., .)": geom.norm_02(lgv - lg_expect) / (1 + geom.norm_02(lgv)),
            "L_xi L_xi g = 4 g(h^2 ., .) + 2 g((nabla_xi h') ., .)": geom.norm_02(llg - llg_expect) / (1 + geom.norm_02(llg)),
            "h_norm": sf.norm11(h),
            "nxi_hp": nxi_hp.reshape(len(p), -1),
            "hp": hp.reshape(len(p), -1),
            "h2": (h @ h).reshape(len(p), -1),
            "r_xx": r_xx.reshape(len(p), -1),
            "h_phi": (h @ sf.phi.value).reshape(len(p), -1),
        }

    run = sample_map(compute, pts)
    d = run.data
    kr = classify_field(spec, "xi", run.points)
    report = Report("reeb_mixed_killing_check", spec.name, tol)
    report.points = run.points
    keys = ["L_xi g = 2 g(h' ., .)", "L_xi L_xi g = 4 g(h^2 ., .) + 2 g((nabla_xi h') ., .)"]
    for k in keys:
        report.residuals[k] = float(d[k].max())
    report.per_point_residual = np.max(np.vstack([d[k] for k in keys]), axis=0)
    report.per_point_fitted["|h|"] = d["h_norm"]
    h_zero = bool(d["h_norm"].max() < h_tol)
    killing = kr.classification == Classification.KILLING
    report.conditions["(max |h| < tol) <=> xi Killing"] = h_zero == killing
    report.diagnostics.update({
        "max |h|": float(d["h_norm"].max()),
        "xi classification": kr.classification.value,
        "xi mixed Killing": kr.is_mixed,
    })
    if kr.is_mixed:
        f = np.nan_to_num(kr.f)[:, None]
        nxi_hp_gap = d["nxi_hp"] - (f * d["hp"] - 2 * d["h2"])
        r_xx_gap = d["r_xx"] - (-f * d["h_phi"] + d["h2"])
        report.residuals["nabla_xi h' = f h' - 2h^2"] = float(np.abs(nxi_hp_gap).max() / (1 + np.abs(d["nxi_hp"]).max()))
        report.residuals["R(Y,xi)xi = -f h phi Y + h^2 Y"] = float(np.abs(r_xx_gap).max() / (1 + np.abs(d["r_xx"]).max()))
    report.children.append(kr.report)
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


def two_killing_reeb_check(spec: ManifoldSpec, points=None, tol: float = 1e-8) -> Report:
    """Compare L_xi L_xi g = 0 with nabla_xi h = -2 phi h^2, both computed independently."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        xi = sf.xi
        llg = geom.lie_02(xi, geom.lie_metric(xi)).value
        nxi_h = np.einsum("pijk,pk->pij", sf.nabla_h.value, xi.value)
        h = sf.h.value
        two_phi_h2 = 2 * sf.phi.value @ h @ h
        return {
            "llg": geom.norm_02(llg),
            "nabla_xi h": sf.norm11(nxi_h),
            "2 phi h^2": sf.norm11(two_phi_h2),
            "criterion": sf.norm11(nxi_h + two_phi_h2) / (1 + sf.norm11(nxi_h)),
        }

    run = sample_map(compute, pts)
    d = run.data
    two_killing = bool(d["llg"].max() < tol)
    criterion = bool(d["criterion"].max() < tol)
    report = Report("two_killing_reeb_check", spec.name, tol)
    report.points = run.points
    report.per_point_residual = d["criterion"]
    report.conditions["(L_xi L_xi g = 0) <=> (nabla_xi h = -2 phi h^2)"] = two_killing == criterion
    report.diagnostics.update({
        "xi 2-Killing": two_killing,
        "nabla_xi h + 2 phi h^2 = 0": criterion,
        "max |L_xi L_xi g|": float(d["llg"].max()),
        "max |nabla_xi h|": float(d["nabla_xi h"].max()),
        "max |2 phi h^2|": float(d["2 phi h^2"].max()),
    })
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


# Collinear fields and contact transformations --------------------------------


def collinear_field_check(spec: ManifoldSpec, alpha: str, f: str | float | None = None, points=None,
                          tol: float = 1e-7) -> Report:
    """Necessary conditions (o1), (o2) for V = alpha xi to be mixed Killing with factor f."""
    pts = _points(spec, points)
    block = spec.structure
    if block is None:
        raise SpecError("no almost contact structure declared", "structure")
    a_node = spec.expression(alpha).root
    v_expr = [ex.render(ex.mul(a_node, spec.expression(c).root)) for c in block.xi]
    kr = classify_field(spec, v_expr, pts)
    f_fit = np.nan_to_num(kr.f)
    index = {tuple(p): i for i, p in enumerate(kr.report.points)}

    def compute(p):
        al = spec.scalar_jet(alpha, p, 1)
        a = al.value
        if np.any(np.abs(a) < 1e-12):
            raise SpecError(f"alpha vanishes at {p[np.argmin(np.abs(a))].tolist()}", "alpha")
        if f is None:
            fv = np.array([f_fit[index[tuple(q)]] if tuple(q) in index else 0.0 for q in p])
        elif isinstance(f, str):
            fv = spec.scalar_jet(f, p, 0).value
        else:
            fv = np.full(len(p), float(f))
        sf = StructureFields(spec, p)
        geom = sf.geom
        da = al.parts[1]
        grad = np.einsum("pij,pj->pi", geom.ginv.value, da)
        xi, phi, h = sf.xi.value, sf.phi.value, sf.h.value
        xi_a = np.einsum("pi,pi->p", da, xi)
        nxi_h = np.einsum("pijk,pk->pij", sf.nabla_h.value, xi)
        phi_x_a = np.einsum("pm,pmj->pj", da, phi)  # (phi d_j) alpha
        a2 = (a**2)[:, None, None]
        lhs = a2 * nxi_h
        rhs = (
            np.einsum("pj,pi->pij", phi_x_a, grad - xi_a[:, None] * xi)
            + a2 * (phi @ h @ h)
            + (a * (fv + a - xi_a))[:, None, None] * h
        )
        o1 = sf.norm11(lhs - rhs) / (1 + sf.norm11(lhs) + sf.norm11(rhs))
        grad_sq = np.einsum("pi,pi->p", grad, da)
        tr_h2 = sf.trace_h_squared
        o2_terms = np.abs(xi_a**2) + np.abs(grad_sq) + np.abs(a**2 * tr_h2)
        o2 = np.abs(xi_a**2 - grad_sq - a**2 * tr_h2) / (1 + o2_terms)
        return {"(o1)": o1, "(o2)": o2, "f": fv}

    run = sample_map(compute, pts)
    d = run.data
    report = Report("collinear_field_check", spec.name, tol)
    report.points = run.points
    report.residuals["(o1)"] = float(d["(o1)"].max())
    report.residuals["(o2)"] = float(d["(o2)"].max())
    report.per_point_residual = np.maximum(d["(o1)"], d["(o2)"])
    report.per_point_fitted["f"] = d["f"]
    report.diagnostics.update({"alpha": alpha, "V = alpha xi classification": kr.classification.value})
    if kr.is_mixed:
        report.conditions["necessary pair holds for mixed Killing V"] = bool(
            report.residuals["(o1)"] < tol and report.residuals["(o2)"] < tol)
    report.children.append(kr.report)
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


@dataclass
class ContactTransformFit:
    sigma: np.ndarray
    residual: np.ndarray
    report: Report = field(repr=False, default=None)


def contact_transformation_check(spec: ManifoldSpec, v, points=None, tol: float = 1e-7,
                                 grad_tol: float = 1e-6, h_tol: float = 1e-8) -> ContactTransformFit:
    """Fit L_V eta = sigma eta; when h = 0 and the fit holds, check grad sigma = (xi sigma) xi."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        vj = _field_jet(spec, v, p, geom)
        eta = sf.eta  # order 2
        lv_eta = geom.lie_form(vj, eta)  # order 1
        ginv = geom.ginv.truncate(lv_eta.order)
        et = eta.truncate(lv_eta.order)
        num_ = contract("ij,i->j", ginv, lv_eta)
        sigma = contract("j,j->", num_, et) / contract("j,j->", contract("ij,i->j", ginv, et), et)
        resid_form = lv_eta.value - sigma.value[:, None] * eta.value
        ginv0 = geom.ginv.value
        fit = covariant_norm(resid_form, ginv0) / (1 + covariant_norm(lv_eta.value, ginv0))
        nv = geom.nabla_vector(vj).value
        eta_nabla_gap = (np.einsum("pi,pij->pj", eta.value, nv) - sigma.value[:, None] * eta.value
                + np.einsum("pjm,pmk,pk->pj", geom.g.value, sf.h_prime.value, vj.value, optimize=True))
        dsig = sigma.parts[1]
        grad = np.einsum("pij,pj->pi", ginv0, dsig)
        xi_sig = np.einsum("pi,pi->p", dsig, sf.xi.value)
        grad_gap = geom.norm_vector(grad - xi_sig[:, None] * sf.xi.value)
        return {
            "sigma": sigma.value,
            "fit": fit,
            "eta nabla gap": covariant_norm(eta_nabla_gap, ginv0) / (1 + covariant_norm(lv_eta.value, ginv0)),
            "grad_gap": grad_gap,
            "h_norm": sf.norm11(sf.h.value),
        }

    run = sample_map(compute, pts)
    d = run.data
    report = Report("contact_transformation_check", spec.name, tol)
    report.points = run.points
    report.per_point_residual = d["fit"]
    report.per_point_fitted["sigma"] = d["sigma"]
    report.fitted["sigma"] = _aggregate(d["sigma"])
    report.diagnostics["field"] = _label(v)
    report.diagnostics["L_V eta = sigma eta fit residual"] = float(d["fit"].max())
    report.diagnostics["eta(nabla_X V) = sigma eta(X) - g(h'V, X) residual"] = float(d["eta nabla gap"].max())
    is_ict = bool(d["fit"].max() < tol)
    report.diagnostics["infinitesimal contact transformation"] = is_ict
    if is_ict:
        report.residuals["eta(nabla_X V) = sigma eta(X) - g(h'V, X)"] = float(d["eta nabla gap"].max())
    if is_ict and d["h_norm"].max() < h_tol:
        gap = float(d["grad_gap"].max())
        report.diagnostics["max |grad sigma - (xi sigma) xi|"] = gap
        report.conditions["grad sigma = (xi sigma) xi"] = gap < grad_tol
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return ContactTransformFit(d["sigma"], d["fit"], report)
