"""Mixed Killing fields V = r(x) d/dx on the real line: the ODE, its flow and the closed form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import parse
from .geometry import SpecError
from .jets import evaluate
from .report import Report


@dataclass
class RealLineProblem:
    r: str
    f: str | float | None = None
    domain: tuple[float, float] = (0.5, 8.0)
    x0: float = 1.0
    t_end: float = 2.0
    step: float = 1e-3
    coordinate: str = "x"


def _r_jet(problem: RealLineProblem, x: np.ndarray):
    expr = parse(problem.r, [problem.coordinate], [])
    jet = evaluate(expr, np.asarray(x, dtype=float).reshape(-1, 1), {}, 2)
    return jet.value, jet.parts[1][:, 0], jet.parts[2][:, 0, 0]


def _f_values(problem: RealLineProblem, x: np.ndarray) -> np.ndarray | None:
    if problem.f is None:
        return None
    if isinstance(problem.f, str):
        expr = parse(problem.f, [problem.coordinate], [])
        return evaluate(expr, np.asarray(x, dtype=float).reshape(-1, 1), {}, 0).value
    return np.full(np.shape(x), float(problem.f))


def rk4_flow(rhs, x0: float, t_end: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step classical Runge-Kutta for dx/dt = rhs(x)."""
    nsteps = int(round(t_end / step))
    t = np.linspace(0.0, nsteps * step, nsteps + 1)
    x = np.empty(nsteps + 1)
    x[0] = x0
    for i in range(nsteps):
        xi = x[i]
        k1 = rhs(xi)
        k2 = rhs(xi + 0.5 * step * k1)
        k3 = rhs(xi + 0.5 * step * k2)
        k4 = rhs(xi + step * k3)
        x[i + 1] = xi + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return t, x


def realline_analyze(problem: RealLineProblem, grid: int = 41, tol: float = 1e-6) -> Report:
    """Definitional residual, flow t-form, closed form and the labeled display-form residuals."""
    lo, hi = problem.domain
    xs = np.linspace(lo, hi, grid)
    r, r1, r2 = _r_jet(problem, xs)
    if np.any(np.abs(r) < 1e-12):
        raise SpecError("r vanishes on the domain; the flow substitution dx/dt = r needs r != 0", "r")
    report = Report("realline_analyze", f"line:{problem.r}", tol)
    report.points = xs[:, None]
    lg = 2 * r1  # (L_V g)_00
    llg = 2 * r * r2 + 4 * r1**2  # (L_V L_V g)_00
    fv = _f_values(problem, xs)
    if np.all(np.abs(lg) < 1e-8):
        report.diagnostics["classification"] = "KILLING"
        report.diagnostics["f"] = "undefined (L_V g = 0)"
        return report
    if fv is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            fv = np.where(np.abs(lg) > 1e-8, llg / lg, np.nan)
        report.fitted["f"] = {"min": float(np.nanmin(fv)), "max": float(np.nanmax(fv))}
    definitional = np.abs(llg - np.nan_to_num(fv) * lg) / (1 + np.abs(llg))
    report.residuals["(L_V L_V g)_00 = f (L_V g)_00"] = float(definitional.max())
    report.per_point_residual = definitional
    report.per_point_fitted["f"] = np.asarray(fv)
    report.diagnostics["(L_V g)_00 at x0"] = float(2 * _r_jet(problem, [problem.x0])[1][0])

    # flow of V
    def rhs(x):
        if not lo <= x <= hi:
            raise SpecError(f"flow left the domain [{lo}, {hi}] at x = {x}", "domain")
        return float(_r_jet(problem, [x])[0][0])

    t, x = rk4_flow(rhs, problem.x0, problem.t_end, problem.step)
    rt, r1t, r2t = _r_jet(problem, x)
    f_t = _f_values(problem, x)
    if f_t is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            f_t = np.where(np.abs(r1t) > 1e-8, (2 * rt * r2t + 4 * r1t**2) / (2 * r1t), 0.0)
    rdot = r1t * rt  # chain rule
    rddot = r2t * rt**2 + r1t**2 * rt
    # finite differences along the sampled trajectory, interior points
    h = problem.step
    rdot_fd = (rt[2:] - rt[:-2]) / (2 * h)
    rddot_fd = (rt[2:] - 2 * rt[1:-1] + rt[:-2]) / h**2
    s = slice(1, -1)
    t_form = np.abs(rt * rddot + rdot**2 - f_t * rt * rdot) / (1 + np.abs(rt * rddot) + rdot**2)
    t_form_fd = np.abs(rt[s] * rddot_fd + rdot_fd**2 - f_t[s] * rt[s] * rdot_fd) / (1 + np.abs(rt[s] * rddot_fd) + rdot_fd**2)
    report.residuals["r r'' + r'^2 = f r r' along the flow (chain rule)"] = float(t_form.max())
    report.diagnostics["same, finite differences along the integrated flow"] = float(t_form_fd.max())
    report.diagnostics["flow end point x(t_end)"] = float(x[-1])

    display = {}
    display["x-form r r'' + 2 r'^2 = 2 f r'"] = float(np.abs(r * r2 + 2 * r1**2 - 2 * np.nan_to_num(fv) * r1).max())
    display["t-form r r'' + r' = 2 f r r'"] = float(np.abs(rt * rddot + rdot - 2 * f_t * rt * rdot).max())
    if problem.f is not None and not isinstance(problem.f, str):
        f = float(problem.f)
        r0, r10 = rt[0], r1t[0]
        c = 2 * r0**2 * r10
        c_prime = r0**2 - c / f
        closed = np.sqrt(np.maximum(c / f * np.exp(f * t) + c_prime, 0.0))
        report.fitted["c"] = float(c)
        report.fitted["c'"] = float(c_prime)
        gap = np.abs(np.abs(rt) - closed)
        report.residuals["r^2 = (c/f) exp(f t) + c'"] = float(gap.max())
        report.per_point_fitted["closed form r(t_end)"] = np.full(len(xs), closed[-1])
        c_p = r0**2 * r10
        c_prime_p = r0**2 - c_p / f
        display["closed form r^2 = (c/f) exp(2 f t) + c'"] = float(
            np.abs(rt**2 - (c_p / f * np.exp(2 * f * t) + c_prime_p)).max())
        report.diagnostics["trajectory"] = {"t": [float(t[0]), float(t[-1])], "r": [float(rt[0]), float(rt[-1])]}
    report.diagnostics["display-form residuals (reported, not asserted)"] = display
    return report
