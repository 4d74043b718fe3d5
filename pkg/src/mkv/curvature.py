"""Self-checks of the curvature substrate: inverse, compatibility, symmetries, Bianchi identities."""

from __future__ import annotations

import numpy as np

from .geometry import Geometry, ManifoldSpec, christoffel_fd, sample_map, sample_points, weyl_from_geometry
from .report import Report

FD_STEP = 1e-3


def _rel_max(res: np.ndarray, ref: np.ndarray) -> np.ndarray:
    flat = lambda a: np.abs(a).reshape(len(a), -1).max(axis=1)  # noqa: E731
    return flat(res) / (1 + flat(ref))


def curvature_residuals(spec: ManifoldSpec, p: np.ndarray) -> dict[str, np.ndarray]:
    geom = Geometry(spec, p, order=3)
    n = spec.dimension
    g, ginv = geom.g.value, geom.ginv.value
    gam = geom.christoffel.value
    dg = geom.g.parts[1]  # [i, j, k] = d_k g_ij
    out = {}
    out["g^ik g_kj = delta"] = np.abs(ginv @ g - np.eye(n)).max(axis=(1, 2))
    ng = dg - np.einsum("plki,plj->pijk", gam, g) - np.einsum("plkj,pil->pijk", gam, g)
    out["nabla g = 0"] = _rel_max(ng, dg)
    rl = geom.riemann_lowered.value  # [l, k, i, j] = g(R(d_i, d_j) d_k, d_l)
    out["R antisymmetric in (i,j)"] = _rel_max(rl + rl.transpose(0, 1, 2, 4, 3), rl)
    out["R antisymmetric in (k,l)"] = _rel_max(rl + rl.transpose(0, 2, 1, 3, 4), rl)
    out["R pair symmetry"] = _rel_max(rl - rl.transpose(0, 3, 4, 1, 2), rl)
    bianchi1 = rl + rl.transpose(0, 1, 3, 4, 2) + rl.transpose(0, 1, 4, 2, 3)
    out["first Bianchi"] = _rel_max(bianchi1, rl)
    nq = geom.nabla_11(geom.ricci_operator).value  # [i, j, k] = (nabla_k Q)^i_j
    div_q = np.einsum("piji->pj", nq)
    half_dr = 0.5 * geom.scalar_curvature.parts[1]
    out["(div Q)Y = Yr/2"] = _rel_max(div_q - half_dr, nq)
    fd = christoffel_fd(spec, p, FD_STEP)
    out["Christoffel jets vs finite differences"] = _rel_max(gam - fd, gam)
    if n == 3:
        out["Weyl (dimension 3) = 0"] = _rel_max(weyl_from_geometry(geom), geom.riemann.value)
    out["scalar curvature"] = geom.scalar_curvature.value
    return out


def curvature_checks(spec: ManifoldSpec, points=None, tol: float = 1e-7) -> Report:
    """Identities every Levi-Civita geometry satisfies, as relative residuals.

    The finite-difference comparison is a diagnostic: its error is set by the
    step, not by the jet arithmetic.
    """
    pts = sample_points(spec) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    run = sample_map(lambda p: curvature_residuals(spec, p), pts)
    d = run.data
    report = Report("curvature", spec.name, tol)
    report.points = run.points
    skip = ("scalar curvature", "Christoffel jets vs finite differences")
    keys = [k for k in d if k not in skip]
    for k in keys:
        report.residuals[k] = float(d[k].max()) if d[k].size else 0.0
    report.per_point_residual = np.max(np.vstack([d[k] for k in keys]), axis=0)
    report.per_point_fitted["scalar curvature"] = d["scalar curvature"]
    r = d["scalar curvature"]
    if r.size:
        report.fitted["scalar curvature"] = {"min": float(r.min()), "max": float(r.max())}
        report.diagnostics["Christoffel jets vs finite differences"] = float(
            d["Christoffel jets vs finite differences"].max())
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report
