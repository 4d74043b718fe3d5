"""Almost contact metric structures: axioms, h-tensors and structural classifiers."""

from __future__ import annotations

import copy
import functools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .geometry import (
    ConsistencyError,
    Geometry,
    ManifoldSpec,
    SampleRun,
    SpecError,
    StructureBlock,
    einsum1,
    sample_map,
    sample_points,
)
from .jets import Jet, contract
from .report import Report, relative

ETA_MISMATCH_TOL = 1e-10


def _require_structure(spec: ManifoldSpec) -> StructureBlock:
    if spec.structure is None:
        raise SpecError("no almost contact structure declared", "structure")
    if spec.dimension % 2 != 1:
        raise SpecError(f"almost contact structures need odd dimension, got {spec.dimension}", "dimension")
    return spec.structure


def covariant_norm(t: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """g-norm of a covariant tensor of any rank (leading point axis)."""
    rank = t.ndim - 1
    out = t
    for axis in range(rank):
        out = np.moveaxis(np.einsum("pab,p...b->p...a", ginv, np.moveaxis(out, axis + 1, -1)), -1, axis + 1)
    return np.sqrt(np.abs((t * out).reshape(len(t), -1).sum(axis=1)))


class StructureFields:
    """Almost contact data and derived tensors at a batch of points."""

    def __init__(self, spec: ManifoldSpec, points: np.ndarray, geom: Geometry | None = None, order: int = 2):
        block = _require_structure(spec)
        self.spec = spec
        # metric order 2 gives curvature values; order 3 is needed only for nabla Q
        self.geom = geom or Geometry(spec, points, order)
        self.points = self.geom.points
        self.n = spec.dimension
        self.m = (self.n - 1) // 2
        self.xi = spec.vector_jet(block.xi, self.points)
        self.phi = spec.matrix_jet(block.phi, self.points)
        self.eta = self.geom.lower(self.xi)
        self.eta_declared = spec.vector_jet(block.eta, self.points) if block.eta else None

    @functools.cached_property
    def fundamental_form(self) -> Jet:
        """``Phi_ij = g(d_i, phi d_j)``."""
        return contract("ik,kj->ij", self.geom.g, self.phi)

    @functools.cached_property
    def d_eta(self) -> Jet:
        """``d eta(d_i, d_j) = (d_i eta_j - d_j eta_i) / 2``."""
        de = self.eta.derivative()  # [j, i] = d_i eta_j
        return 0.5 * (de.transpose(1, 0) - de)

    @functools.cached_property
    def d_fundamental(self) -> Jet:
        """Cyclic sum ``d_i Phi_jk + d_j Phi_ki + d_k Phi_ij``."""
        dp = self.fundamental_form.derivative()  # [j, k, i] = d_i Phi_jk
        return dp.transpose(2, 0, 1) + dp.transpose(1, 2, 0) + dp

    @functools.cached_property
    def h(self) -> Jet:
        """``h = L_xi phi / 2``."""
        return 0.5 * self.geom.lie_11(self.xi, self.phi)

    @functools.cached_property
    def h_prime(self) -> Jet:
        return contract("ik,kj->ij", self.h, self.phi.truncate(self.h.order))

    @functools.cached_property
    def nabla_xi(self) -> Jet:
        return self.geom.nabla_vector(self.xi)

    @functools.cached_property
    def nabla_phi(self) -> Jet:
        return self.geom.nabla_11(self.phi)

    @functools.cached_property
    def nabla_h(self) -> Jet:
        return self.geom.nabla_11(self.h)

    @functools.cached_property
    def nabla_h_prime(self) -> Jet:
        return self.geom.nabla_11(self.h_prime)

    @property
    def h_squared(self) -> np.ndarray:
        h = self.h.value
        return h @ h

    @property
    def trace_h_squared(self) -> np.ndarray:
        return np.einsum("pii->p", self.h_squared)

    def norm11(self, a: np.ndarray) -> np.ndarray:
        return self.geom.norm_11(a)

    def covariant(self, t: np.ndarray) -> np.ndarray:
        return covariant_norm(t, self.geom.ginv.value)

    def vector_norm(self, v: np.ndarray) -> np.ndarray:
        return self.geom.norm_vector(v)


def _points(spec: ManifoldSpec, points) -> np.ndarray:
    return sample_points(spec) if points is None else np.atleast_2d(np.asarray(points, dtype=float))


def _finish(report: Report, run: SampleRun, residual_keys: list[str], fitted_keys: list[str] = ()) -> Report:
    report.points = run.points
    cols = [run.data[k] for k in residual_keys]
    report.per_point_residual = np.max(np.vstack(cols), axis=0) if cols else None
    for k in residual_keys:
        report.residuals[k] = float(run.data[k].max()) if run.data[k].size else 0.0
    for k in fitted_keys:
        report.per_point_fitted[k] = run.data[k]
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report


# Axioms ----------------------------------------------------------------------


def validate_structure(spec: ManifoldSpec, points=None, tol: float = 1e-8) -> Report:
    """Residuals of eta(xi) = 1, phi^2 = -I + eta (x) xi and metric compatibility."""
    _require_structure(spec)
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        g = sf.geom.g.value
        xi, eta, phi = sf.xi.value, sf.eta.value, sf.phi.value
        out = {}
        if sf.eta_declared is not None:
            gap = np.abs(sf.eta_declared.value - eta).max(axis=1)
            if np.any(gap > ETA_MISMATCH_TOL * (1 + np.abs(eta).max(axis=1))):
                bad = int(np.argmax(gap))
                raise SpecError(
                    f"declared eta differs from g(xi, .) by {gap[bad]:.3e} at {p[bad].tolist()}",
                    "structure.eta",
                )
        eye = np.eye(sf.n)
        out["eta(xi) = 1"] = np.abs(np.einsum("pi,pi->p", eta, xi) - 1.0)
        phi2 = phi @ phi + eye - np.einsum("pi,pj->pij", xi, eta)
        out["phi^2 = -I + eta(x)xi"] = sf.norm11(phi2) / (1 + sf.norm11(phi @ phi))
        out["phi2_entry"] = np.abs(phi2).max(axis=(1, 2))
        compat = np.einsum("pki,pkl,plj->pij", phi, g, phi, optimize=True) - g + np.einsum("pi,pj->pij", eta, eta)
        out["g(phi X, phi Y) = g(X, Y) - eta(X)eta(Y)"] = sf.geom.norm_02(compat) / (1 + sf.geom.norm_02(g))
        out["eta o phi = 0"] = sf.covariant(np.einsum("pi,pij->pj", eta, phi))
        out["phi xi = 0"] = sf.vector_norm(np.einsum("pij,pj->pi", phi, xi))
        return out

    keys = ["eta(xi) = 1", "phi^2 = -I + eta(x)xi", "g(phi X, phi Y) = g(X, Y) - eta(X)eta(Y)",
            "eta o phi = 0", "phi xi = 0"]
    run = sample_map(compute, pts)
    report = _finish(Report("validate_structure", spec.name, tol), run, keys)
    report.diagnostics["max |phi^2 + I - eta(x)xi| entry"] = float(run.data["phi2_entry"].max())
    return report


def fundamental_two_form(spec: ManifoldSpec, p, tol: float = 1e-10) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    sf = StructureFields(spec, pts)
    form = sf.fundamental_form.value
    if np.abs(form + form.transpose(0, 2, 1)).max() > tol * (1 + np.abs(form).max()):
        raise ConsistencyError("fundamental 2-form is not antisymmetric")
    return form[0] if np.ndim(p) == 1 else form


def is_almost_cokahler(spec: ManifoldSpec, points=None, tol: float = 1e-8) -> Report:
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        ginv = sf.geom.ginv.value
        ref_eta = covariant_norm(sf.eta.parts[1], ginv)
        ref_phi = covariant_norm(sf.fundamental_form.parts[1], ginv)
        return {
            "d eta = 0": covariant_norm(sf.d_eta.value, ginv) / (1 + ref_eta),
            "d Phi = 0": covariant_norm(sf.d_fundamental.value, ginv) / (1 + ref_phi),
        }

    run = sample_map(compute, pts)
    return _finish(Report("is_almost_cokahler", spec.name, tol), run, ["d eta = 0", "d Phi = 0"])


@dataclass
class StructureDerived:
    """Derived structure tensors at one point."""

    fundamental_form: np.ndarray
    h: np.ndarray
    h_prime: np.ndarray
    d_eta: np.ndarray
    d_fundamental: np.ndarray
    trace_h_squared: float


def h_tensors(spec: ManifoldSpec, p, check_tol: float = 1e-9, cokahler_tol: float = 1e-8) -> StructureDerived:
    """h, h' and the closedness data at a point; asserts h' = nabla xi on almost coKahler inputs."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    sf = StructureFields(spec, pts)
    ginv = sf.geom.ginv.value
    closed = max(covariant_norm(sf.d_eta.value, ginv).max(), covariant_norm(sf.d_fundamental.value, ginv).max())
    hp, nxi = sf.h_prime.value, sf.nabla_xi.value
    if closed < cokahler_tol and np.abs(hp - nxi).max() > check_tol * (1 + np.abs(nxi).max()):
        raise ConsistencyError(f"h' and nabla xi differ by {np.abs(hp - nxi).max():.3e}")
    return StructureDerived(
        fundamental_form=sf.fundamental_form.value[0],
        h=sf.h.value[0],
        h_prime=hp[0],
        d_eta=sf.d_eta.value[0],
        d_fundamental=sf.d_fundamental.value[0],
        trace_h_squared=float(sf.trace_h_squared[0]),
    )


def verify_structure_identities(spec: ManifoldSpec, points=None, tol: float = 1e-7) -> Report:
    """Structure identities of almost coKahler manifolds, each as a max relative residual."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        g, xi, eta, phi = geom.g.value, sf.xi.value, sf.eta.value, sf.phi.value
        h, hp = sf.h.value, sf.h_prime.value
        h2 = sf.h_squared
        hnorm = sf.norm11(h)
        out = {}
        out["h xi = 0"] = sf.vector_norm(np.einsum("pij,pj->pi", h, xi)) / (1 + hnorm)
        out["h phi = -phi h"] = sf.norm11(h @ phi + phi @ h) / (1 + hnorm)
        nphi = sf.nabla_phi.value
        out["nabla_xi phi = 0"] = sf.norm11(np.einsum("pijk,pk->pij", nphi, xi)) / (1 + sf.norm11(phi))
        nxi = sf.nabla_xi.value
        out["nabla xi = h'"] = sf.norm11(nxi - hp) / (1 + sf.norm11(nxi))
        neta = geom.nabla_form(sf.eta).value  # [i, k] = (nabla_k eta)_i
        rhs = np.einsum("pkm,pmi->pik", g, hp)
        out["(nabla_Y eta)X = g(h'X, Y)"] = geom.norm_02(neta - rhs) / (1 + geom.norm_02(neta))
        out["div xi = 0"] = np.abs(np.einsum("pii->p", nxi)) / (1 + sf.norm11(nxi))
        r_xi = np.einsum("plkab,pk->plab", geom.riemann.value, xi)
        nhp = sf.nabla_h_prime.value  # [l, b, a] = (nabla_a h')^l_b
        r_xi_gap = r_xi - nhp.transpose(0, 1, 3, 2) + nhp
        scale_r = np.abs(r_xi).max(axis=(1, 2, 3))
        out["R(Y,X)xi = (nabla_Y h')X - (nabla_X h')Y"] = np.abs(r_xi_gap).max(axis=(1, 2, 3)) / (1 + scale_r)
        ric_xx = np.einsum("pij,pi,pj->p", geom.ricci.value, xi, xi, optimize=True)
        tr_h2 = np.einsum("pii->p", h2)
        out["Ric(xi, xi) = -tr h^2"] = relative(ric_xx + tr_h2, ric_xx)
        hl = np.einsum("pik,pkj->pij", g, h)
        out["h g-symmetric"] = geom.norm_02(hl - hl.transpose(0, 2, 1)) / (1 + hnorm)
        hpl = np.einsum("pik,pkj->pij", g, hp)
        out["h' g-symmetric"] = geom.norm_02(hpl - hpl.transpose(0, 2, 1)) / (1 + hnorm)
        out["tr h = tr h' = 0"] = (np.abs(np.einsum("pii->p", h)) + np.abs(np.einsum("pii->p", hp))) / (1 + hnorm)
        out["h'^2 = h^2"] = sf.norm11(hp @ hp - h2) / (1 + sf.norm11(h2))
        out["Ric(xi,xi)"] = ric_xx
        out["tr h^2"] = tr_h2
        return out

    run = sample_map(compute, pts)
    keys = [k for k in run.data if k not in ("Ric(xi,xi)", "tr h^2")]
    return _finish(Report("verify_structure_identities", spec.name, tol), run, keys, ["Ric(xi,xi)", "tr h^2"])


def nijenhuis_tensor(sf: StructureFields) -> np.ndarray:
    """``[phi, phi](d_i, d_j)^k`` as ``[k, i, j]``."""
    phi = sf.phi.value
    dphi = sf.phi.parts[1]  # [k, j, m] = d_m phi^k_j
    t1 = np.einsum("pmi,pkjm->pkij", phi, dphi)
    t3 = np.einsum("pkm,pmij->pkij", phi, dphi)  # phi^k_m d_j phi^m_i
    return t1 - t1.transpose(0, 1, 3, 2) + t3 - t3.transpose(0, 1, 3, 2)


def nijenhuis_normality(spec: ManifoldSpec, points=None, tol: float = 1e-7) -> Report:
    """Normality: [phi, phi] + 2 d eta (x) xi = 0 on coordinate-basis pairs."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        nij = nijenhuis_tensor(sf)
        total = nij + 2 * np.einsum("pij,pk->pkij", sf.d_eta.value, sf.xi.value)
        scale = np.abs(sf.phi.parts[1]).max(axis=(1, 2, 3)) * np.abs(sf.phi.value).max(axis=(1, 2))
        return {"[phi,phi] + 2 d eta (x) xi = 0": np.abs(total).max(axis=(1, 2, 3)) / (1 + scale)}

    run = sample_map(compute, pts)
    return _finish(Report("nijenhuis_normality", spec.name, tol), run, ["[phi,phi] + 2 d eta (x) xi = 0"])


def is_cokahler(spec: ManifoldSpec, points=None, tol: float = 1e-8) -> Report:
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        nphi = sf.nabla_phi.value
        ginv, g = sf.geom.ginv.value, sf.geom.g.value
        norm = np.sqrt(np.abs(np.einsum("pia,pjb,pkc,pijk,pabc->p", g, ginv, ginv, nphi, nphi, optimize=True)))
        return {"nabla phi = 0": norm}

    run = sample_map(compute, pts)
    return _finish(Report("is_cokahler", spec.name, tol), run, ["nabla phi = 0"])


def kahlerian_leaves_check(spec: ManifoldSpec, points=None, tol: float = 1e-7) -> Report:
    """Residual of (nabla_Y phi)X = g(X, hY) xi - eta(X) hY over coordinate pairs."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        g, xi, eta, h = sf.geom.g.value, sf.xi.value, sf.eta.value, sf.h.value
        nphi = sf.nabla_phi.value  # [i, j, k] = (nabla_k phi)^i_j
        rhs = np.einsum("pjm,pmk,pi->pijk", g, h, xi, optimize=True) - np.einsum("pj,pik->pijk", eta, h)
        scale = np.abs(nphi).max(axis=(1, 2, 3))
        return {"(nabla_Y phi)X = g(X,hY)xi - eta(X)hY": np.abs(nphi - rhs).max(axis=(1, 2, 3)) / (1 + scale)}

    run = sample_map(compute, pts)
    return _finish(Report("kahlerian_leaves_check", spec.name, tol), run, ["(nabla_Y phi)X = g(X,hY)xi - eta(X)hY"])


# Ricci-type fits -------------------------------------------------------------


@dataclass
class EtaEinsteinFit:
    a: np.ndarray
    b: np.ndarray
    residual: np.ndarray
    report: Report

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())


def _aggregate(values: np.ndarray) -> dict:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    spread = float(values.max() - values.min())
    constant = spread < 1e-6 * (1 + abs(mean))
    return {"value": mean if constant else None, "constant": constant, "min": float(values.min()),
            "max": float(values.max())}


def eta_einstein_fit(spec: ManifoldSpec, points=None, tol: float = 1e-7, h_tol: float = 1e-8) -> EtaEinsteinFit:
    """Pointwise least squares Q ~ a I + b eta (x) xi, with the closed forms and constant-r checks."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p, order=3)
        geom = sf.geom
        n, m = sf.n, sf.m
        q = geom.ricci_operator.value
        xi, eta = sf.xi.value, sf.eta.value
        eye = np.broadcast_to(np.eye(n), q.shape)
        xe = np.einsum("pi,pj->pij", xi, eta)
        ip = geom.inner_11
        gram = np.stack([np.stack([ip(eye, eye), ip(eye, xe)], -1), np.stack([ip(xe, eye), ip(xe, xe)], -1)], -2)
        rhs = np.stack([ip(eye, q), ip(xe, q)], -1)
        ab = np.linalg.solve(gram, rhs[..., None])[..., 0]
        a, b = ab[:, 0], ab[:, 1]
        fit = a[:, None, None] * eye + b[:, None, None] * xe
        resid = sf.norm11(q - fit) / (1 + sf.norm11(q))
        r = geom.scalar_curvature.value
        tr_h2 = sf.trace_h_squared
        a_cf = (r + tr_h2) / (2 * m)
        b_cf = -(r + (2 * m + 1) * tr_h2) / (2 * m)
        dr = geom.scalar_curvature.parts[1]
        nq = geom.nabla_11(geom.ricci_operator).value  # [i, j, k] = (nabla_k Q)^i_j
        proj = eye - xe
        nabla_q_gap = nq - np.einsum("pk,pij->pijk", dr, proj) / (2 * m)
        return {
            "residual": resid,
            "a": a,
            "b": b,
            "a_closed_form": a_cf,
            "b_closed_form": b_cf,
            "h_norm": sf.norm11(sf.h.value),
            "grad_r": np.abs(dr).max(axis=1),
            "xi_r": np.einsum("pi,pi->p", dr, xi),
            "nabla Q gap": np.abs(nabla_q_gap).max(axis=(1, 2, 3)) / (1 + np.abs(nq).max(axis=(1, 2, 3))),
            "r": r,
        }

    run = sample_map(compute, pts)
    d = run.data
    report = Report("eta_einstein_fit", spec.name, tol)
    report.points = run.points
    report.per_point_residual = d["residual"]
    report.residuals["Q = aI + b eta(x)xi"] = float(d["residual"].max())
    for k in ("a", "b", "r"):
        report.per_point_fitted[k] = d[k]
    report.fitted["a"] = _aggregate(d["a"])
    report.fitted["b"] = _aggregate(d["b"])
    report.diagnostics["closed-form deviation |a - a_cf|"] = float(np.abs(d["a"] - d["a_closed_form"]).max())
    report.diagnostics["closed-form deviation |b - b_cf|"] = float(np.abs(d["b"] - d["b_closed_form"]).max())
    report.diagnostics["xi(r) max"] = float(np.abs(d["xi_r"]).max())
    if report.residuals["Q = aI + b eta(x)xi"] < tol and d["h_norm"].max() < h_tol:
        # eta-Einstein with h = 0: nabla Q follows from dr, and r must be constant
        report.residuals["(nabla_X Q)Y = Xr/2n [Y - eta(Y)xi]"] = float(d["nabla Q gap"].max())
        report.residuals["grad r = 0"] = float(d["grad_r"].max())
        report.residuals["closed-form a"] = float(np.abs(d["a"] - d["a_closed_form"]).max())
        report.residuals["closed-form b"] = float(np.abs(d["b"] - d["b_closed_form"]).max())
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return EtaEinsteinFit(d["a"], d["b"], d["residual"], report)


@dataclass
class KappaMuFit:
    kappa: np.ndarray
    mu: np.ndarray
    residual: np.ndarray
    report: Report


def kappa_mu_fit(spec: ManifoldSpec, points=None, tol: float = 1e-7) -> KappaMuFit:
    """Pointwise least squares for R(X,Y)xi = kappa(...) + mu(...), then the consequences when it fits."""
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        n, m = sf.n, sf.m
        xi, eta, h, phi = sf.xi.value, sf.eta.value, sf.h.value, sf.phi.value
        lhs = np.einsum("plkab,pk->plab", geom.riemann.value, xi)
        eye = np.eye(n)
        kb = np.einsum("pb,la->plab", eta, eye) - np.einsum("pa,lb->plab", eta, eye)
        mb = np.einsum("pb,pla->plab", eta, h) - np.einsum("pa,plb->plab", eta, h)
        npts = len(p)
        design = np.stack([kb.reshape(npts, -1), mb.reshape(npts, -1)], -1)
        target = lhs.reshape(npts, -1)
        coef = np.zeros((npts, 2))
        for i in range(npts):
            coef[i] = np.linalg.lstsq(design[i], target[i], rcond=None)[0]
        kappa, mu = coef[:, 0], coef[:, 1]
        fit = np.einsum("pqc,pc->pq", design, coef)
        scale = np.abs(target).max(axis=1)
        resid = np.abs(target - fit).max(axis=1) / (1 + scale)
        q = geom.ricci_operator.value
        r = geom.scalar_curvature.value
        h2 = h @ h
        qxi = np.einsum("pij,pj->pi", q, xi) - 2 * m * kappa[:, None] * xi
        h2_k = h2 - kappa[:, None, None] * (phi @ phi)
        out = {
            "residual": resid,
            "kappa": kappa,
            "mu": mu,
            "Q xi = 2n kappa xi": np.abs(qxi).max(axis=1) / (1 + np.abs(q).max(axis=(1, 2))),
            "h^2 = kappa phi^2": np.abs(h2_k).max(axis=(1, 2)) / (1 + np.abs(h2).max(axis=(1, 2))),
        }
        if n == 3:
            q20 = (mu[:, None, None] * h + (r / 2 - kappa)[:, None, None] * eye
                   + (3 * kappa - r / 2)[:, None, None] * np.einsum("pi,pj->pij", xi, eta))
            out["Q = mu h + (r/2 - kappa)I + (3 kappa - r/2) eta(x)xi"] = (
                np.abs(q - q20).max(axis=(1, 2)) / (1 + np.abs(q).max(axis=(1, 2))))
        return out

    run = sample_map(compute, pts)
    d = run.data
    report = Report("kappa_mu_fit", spec.name, tol)
    report.points = run.points
    report.per_point_residual = d["residual"]
    report.per_point_fitted.update({"kappa": d["kappa"], "mu": d["mu"]})
    report.residuals["R(X,Y)xi = kappa(..) + mu(..)"] = float(d["residual"].max())
    report.fitted["kappa"] = _aggregate(d["kappa"])
    report.fitted["mu"] = _aggregate(d["mu"])
    if report.residuals["R(X,Y)xi = kappa(..) + mu(..)"] < tol:
        for k in ("Q xi = 2n kappa xi", "h^2 = kappa phi^2", "Q = mu h + (r/2 - kappa)I + (3 kappa - r/2) eta(x)xi"):
            if k in d:
                report.residuals[k] = float(d[k].max())
        report.conditions["kappa <= 0"] = bool(np.all(d["kappa"] <= tol))
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return KappaMuFit(d["kappa"], d["mu"], d["residual"], report)


# D-homothetic deformation ----------------------------------------------------


def eta_expressions(spec: ManifoldSpec) -> list[str]:
    """Expression strings for eta_i: the declared ones, else sum_j g_ij xi^j built symbolically."""
    block = _require_structure(spec)
    if block.eta:
        return list(block.eta)
    n = spec.dimension
    node = spec.expression
    out = []
    for i in range(n):
        terms = [ex.mul(node(spec.metric[min(i, j)][max(i, j)]).root, node(block.xi[j]).root) for j in range(n)]
        out.append(ex.render(ex.total(terms)))
    return out


@dataclass
class DeformationParams:
    u: str
    c: float


def deform_spec(spec: ManifoldSpec, params: DeformationParams) -> ManifoldSpec:
    """Expression-level deformed spec: phi' = phi, xi' = xi/u, eta' = u eta, g' = c g + (u^2 - c) eta (x) eta."""
    block = _require_structure(spec)
    if params.c <= 0:
        raise SpecError(f"deformation constant c must be positive, got {params.c}", "c")
    n = spec.dimension
    node = lambda s: spec.expression(s).root  # noqa: E731
    u = node(params.u)
    c = ex.num(params.c)
    eta = [node(e) for e in eta_expressions(spec)]
    coeff = ex.sub(ex.power(u, ex.Num(2.0)), c)
    metric = []
    for i in range(n):
        row = []
        for j in range(n):
            term = ex.add(ex.mul(c, node(spec.metric[min(i, j)][max(i, j)])), ex.mul(coeff, ex.mul(eta[i], eta[j])))
            row.append(ex.render(term))
        metric.append(row)
    xi = [ex.render(ex.div(node(s), u)) for s in block.xi]
    eta_new = [ex.render(ex.mul(u, e)) for e in eta]
    out = copy.deepcopy(spec)
    out.name = f"{spec.name}~D({params.u},{params.c:g})"
    out.metric = metric
    out.structure = StructureBlock(xi=xi, phi=[list(r) for r in block.phi], eta=eta_new)
    return out


def d_homothetic_deform(
    spec: ManifoldSpec, params: DeformationParams, points=None, tol: float = 1e-8
) -> tuple[ManifoldSpec, Report]:
    """Deform and verify: admissibility of u, axioms of the new structure, and H = h/u."""
    _require_structure(spec)
    if params.c <= 0:
        raise SpecError(f"deformation constant c must be positive, got {params.c}", "c")
    pts = _points(spec, points)
    deformed = deform_spec(spec, params)

    def compute(p):
        sf = StructureFields(spec, p)
        uj = spec.scalar_jet(params.u, p)
        u = uj.value
        if np.any(np.abs(u) < 1e-12):
            raise SpecError(f"u vanishes at {p[np.argmin(np.abs(u))].tolist()}", "u")
        du = uj.parts[1]
        xi_u = np.einsum("pi,pi->p", du, sf.xi.value)
        off_xi = du - xi_u[:, None] * sf.eta.value
        sd = StructureFields(deformed, p)
        h_new = sd.h.value
        h_expect = sf.h.value / u[:, None, None]
        return {
            "du = (xi u) eta": covariant_norm(off_xi, sf.geom.ginv.value) / (1 + np.abs(du).max(axis=1)),
            "H = h/u": np.abs(h_new - h_expect).max(axis=(1, 2)) / (1 + np.abs(h_expect).max(axis=(1, 2))),
            "h_norm": sf.norm11(sf.h.value),
            "H_norm": sd.norm11(h_new),
        }

    run = sample_map(compute, pts)
    if run.data["du = (xi u) eta"].max() > tol:
        raise SpecError("u must vary along xi only (du has components off eta)", "u")
    report = _finish(Report("d_homothetic_deform", spec.name, tol), run, ["H = h/u"], ["h_norm", "H_norm"])
    report.children.append(validate_structure(deformed, run.points, tol))
    report.diagnostics["deformed metric"] = deformed.metric
    return deformed, report


def leaf_curvature(spec: ManifoldSpec, points=None, tol: float = 1e-8) -> Report:
    """Intrinsic curvature of the leaves of ker eta through the Gauss equation.

    The leaves have unit normal xi and second fundamental form b(X, Y) = -g(h'X, Y),
    so R_leaf(X,Y,Z,W) = R(X,Y,Z,W) + b(Y,Z) b(X,W) - b(X,Z) b(Y,W) on vectors orthogonal to xi.
    """
    pts = _points(spec, points)

    def compute(p):
        sf = StructureFields(spec, p)
        geom = sf.geom
        g, xi, eta = geom.g.value, sf.xi.value, sf.eta.value
        rl = np.einsum("plkij,plw->pijkw", geom.riemann.value, g)  # g(R(d_i,d_j)d_k, d_w)
        b = -np.einsum("pjm,pmi->pij", g, sf.h_prime.value)
        leaf = rl + np.einsum("pjk,piw->pijkw", b, b) - np.einsum("pik,pjw->pijkw", b, b)
        proj = np.eye(spec.dimension)[None] - np.einsum("pi,pj->pij", xi, eta)  # X -> X - eta(X) xi
        leaf = np.einsum("pai,pbj,pck,pdw,pabcd->pijkw", proj, proj, proj, proj, leaf, optimize=True)
        ginv = geom.ginv.value
        norm = np.sqrt(np.abs(np.einsum("pia,pjb,pkc,pwd,pijkw,pabcd->p", ginv, ginv, ginv, ginv, leaf, leaf,
                                        optimize=True)))
        return {"leaf curvature = 0": norm / (1 + geom.norm_13(geom.riemann.value))}

    run = sample_map(compute, pts)
    return _finish(Report("leaf_curvature", spec.name, tol), run, ["leaf curvature = 0"])
