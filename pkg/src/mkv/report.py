"""Structured outcome of a check and its JSON document form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__


def relative(residual: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Relative residual ``|res| / (1 + |ref|)``."""
    return np.abs(residual) / (1.0 + np.abs(reference))


def _clean(value: Any) -> Any:
    """Convert numpy scalars/arrays to plain JSON values; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


@dataclass
class Report:
    """Outcome of one check over a set of sample points.

    ``residuals`` holds the max residual per identity; ``conditions`` holds
    logical claims (equivalences, classifications) which count as residual
    0 when true and 1 when false, so the verdict only ever depends on
    ``max_residual < tolerance`` and evaluation coverage.
    """

    check: str
    spec_name: str
    tolerance: float
    residuals: dict[str, float] = field(default_factory=dict)
    conditions: dict[str, bool] = field(default_factory=dict)
    points: np.ndarray | None = None
    per_point_residual: np.ndarray | None = None
    per_point_fitted: dict[str, np.ndarray] = field(default_factory=dict)
    fitted: dict[str, Any] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    failures: int = 0
    children: list["Report"] = field(default_factory=list)

    @property
    def all_residuals(self) -> dict[str, float]:
        out = dict(self.residuals)
        for name, ok in self.conditions.items():
            out[f"condition: {name}"] = 0.0 if ok else 1.0
        for child in self.children:
            out[f"{child.check}"] = child.max_residual if child.verdict != "fail" else max(child.max_residual, 1.0)
        return out

    @property
    def max_residual(self) -> float:
        vals = [v for v in self.all_residuals.values() if v is not None]
        if not vals:
            return 0.0
        vals = [v if math.isfinite(v) else 1e300 for v in vals]
        return float(max(vals))

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def verdict(self) -> str:
        ok = self.max_residual < self.tolerance
        failures = self.failures + sum(c.failures for c in self.children)
        if ok and failures == 0:
            return "pass"
        if ok:
            return "partial"
        return "fail"

    def details(self) -> list[dict[str, Any]]:
        if self.points is None:
            return []
        rows = []
        for i, p in enumerate(self.points):
            row = {
                "point": [float(x) for x in p],
                "residual": float(self.per_point_residual[i]) if self.per_point_residual is not None else None,
                "fitted": {k: v[i] for k, v in self.per_point_fitted.items()},
            }
            rows.append(row)
        return rows

    def to_document(self) -> dict[str, Any]:
        doc = {
            "tool_version": __version__,
            "spec_name": self.spec_name,
            "check": self.check,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "details": self.details(),
            "warnings": list(self.warnings),
            "residuals": self.all_residuals,
            "fitted": self.fitted,
            "diagnostics": self.diagnostics,
        }
        if self.children:
            doc["checks"] = [c.to_document() for c in self.children]
        return _clean(doc)

    def to_json(self) -> str:
        return dumps(self.to_document())

    def summary_lines(self, indent: str = "") -> list[str]:
        lines = [f"{indent}[{self.verdict.upper():7s}] {self.check} ({self.spec_name}): "
                 f"max residual {self.max_residual:.3e} (tol {self.tolerance:.1e})"]
        for name, val in self.residuals.items():
            lines.append(f"{indent}    {name}: {val:.3e}")
        for name, ok in self.conditions.items():
            lines.append(f"{indent}    {name}: {'yes' if ok else 'NO'}")
        for name, val in self.fitted.items():
            lines.append(f"{indent}    fitted {name} = {_fmt(val)}")
        for name, val in self.diagnostics.items():
            lines.append(f"{indent}    [info] {name} = {_fmt(val)}")
        for w in self.warnings:
            lines.append(f"{indent}    warning: {w}")
        for child in self.children:
            lines.extend(child.summary_lines(indent + "  "))
        return lines

    def text(self) -> str:
        return "\n".join(self.summary_lines())


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v)}" for k, v in value.items()) + "}"
    return str(_clean(value))


def dumps(doc: Any) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def max_or_zero(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.max()) if values.size else 0.0
