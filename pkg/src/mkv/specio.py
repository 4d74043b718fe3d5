"""ManifoldSpec JSON documents: strict loading with error paths and canonical saving."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .expr import ExpressionError
from .geometry import ManifoldSpec, SpecError, StructureBlock, sample_points
from .jets import PointEvaluationError

_EXPR = {"type": "string", "minLength": 1}
_NAME = {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "coordinates", "metric"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "coordinates": {"type": "array", "items": _NAME, "minItems": 1, "uniqueItems": True},
        "domain": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "parameters": {"type": "object", "additionalProperties": {"type": "number"}},
        "metric": {"type": "array", "items": {"type": "array", "items": _EXPR}},
        "fields": {"type": "object", "additionalProperties": {"type": "array", "items": _EXPR}},
        "structure": {
            "type": "object",
            "required": ["xi", "phi"],
            "additionalProperties": False,
            "properties": {
                "xi": {"type": "array", "items": _EXPR},
                "eta": {"type": "array", "items": _EXPR},
                "phi": {"type": "array", "items": {"type": "array", "items": _EXPR}},
            },
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _check_shape(value, n: int, path: str, rank: int) -> None:
    if len(value) != n:
        raise SpecError(f"expected {n} entries, got {len(value)}", path)
    if rank == 2:
        for i, row in enumerate(value):
            if len(row) != n:
                raise SpecError(f"expected {n} entries, got {len(row)}", f"{path}[{i}]")


def spec_from_document(doc: dict) -> ManifoldSpec:
    """Validate a decoded JSON document and build the spec."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as err:
        raise SpecError(err.message, _path(err.absolute_path)) from None
    coords = doc["coordinates"]
    n = len(coords)
    if "dimension" in doc and doc["dimension"] != n:
        raise SpecError(f"dimension {doc['dimension']} but {n} coordinates", "dimension")
    _check_shape(doc["metric"], n, "metric", 2)
    for name, comps in doc.get("fields", {}).items():
        _check_shape(comps, n, f"fields.{name}", 1)
    for c, box in doc.get("domain", {}).items():
        if c not in coords:
            raise SpecError(f"domain given for unknown coordinate {c!r}", f"domain.{c}")
        if not box[0] < box[1]:
            raise SpecError(f"empty interval {box}", f"domain.{c}")
    structure = None
    if "structure" in doc:
        st = doc["structure"]
        _check_shape(st["xi"], n, "structure.xi", 1)
        _check_shape(st["phi"], n, "structure.phi", 2)
        if "eta" in st:
            _check_shape(st["eta"], n, "structure.eta", 1)
        structure = StructureBlock(xi=list(st["xi"]), phi=[list(r) for r in st["phi"]], eta=st.get("eta"))
    spec = ManifoldSpec(
        name=doc["name"],
        coordinates=list(coords),
        metric=[list(r) for r in doc["metric"]],
        domain={c: tuple(v) for c, v in doc.get("domain", {}).items()},
        parameters=dict(doc.get("parameters", {})),
        fields={k: list(v) for k, v in doc.get("fields", {}).items()},
        structure=structure,
    )
    validate_expressions(spec)
    check_metric_symmetry(spec)
    return spec


def _expression_slots(spec: ManifoldSpec):
    n = spec.dimension
    for i in range(n):
        for j in range(n):
            yield f"metric[{i}][{j}]", spec.metric[i][j]
    for name, comps in spec.fields.items():
        for i, c in enumerate(comps):
            yield f"fields.{name}[{i}]", c
    if spec.structure is not None:
        st = spec.structure
        for i, c in enumerate(st.xi):
            yield f"structure.xi[{i}]", c
        for i, c in enumerate(st.eta or []):
            yield f"structure.eta[{i}]", c
        for i in range(n):
            for j in range(n):
                yield f"structure.phi[{i}][{j}]", st.phi[i][j]


def validate_expressions(spec: ManifoldSpec) -> None:
    clash = set(spec.coordinates) & set(spec.parameters)
    if clash:
        raise SpecError(f"names used as both coordinate and parameter: {sorted(clash)}", "parameters")
    for path, source in _expression_slots(spec):
        try:
            spec.expression(source)
        except ExpressionError as err:
            raise SpecError(str(err), path) from err


def check_metric_symmetry(spec: ManifoldSpec, tol: float = 1e-12) -> None:
    """Metric entries must agree as text or as values at the sample points."""
    n = spec.dimension
    pts = None
    for i in range(n):
        for j in range(i + 1, n):
            a, b = spec.metric[i][j], spec.metric[j][i]
            if a.replace(" ", "") == b.replace(" ", ""):
                continue
            if pts is None:
                pts = sample_points(spec)
            try:
                va = spec.scalar_jet(a, pts, 0).value
                vb = spec.scalar_jet(b, pts, 0).value
            except PointEvaluationError as err:
                raise SpecError(f"cannot evaluate metric entry: {err}", f"metric[{i}][{j}]") from None
            if np.any(np.abs(va - vb) > tol * (1 + np.abs(va))):
                raise SpecError(f"metric is not symmetric: {a!r} differs from metric[{j}][{i}] = {b!r}", f"metric[{i}][{j}]")


def spec_to_document(spec: ManifoldSpec) -> dict:
    doc: dict[str, Any] = {
        "name": spec.name,
        "dimension": spec.dimension,
        "coordinates": list(spec.coordinates),
        "domain": {c: [float(lo), float(hi)] for c, (lo, hi) in spec.domain.items()},
        "parameters": {k: float(v) for k, v in spec.parameters.items()},
        "metric": [list(r) for r in spec.metric],
        "fields": {k: list(v) for k, v in spec.fields.items()},
    }
    if spec.structure is not None:
        st = {"xi": list(spec.structure.xi), "phi": [list(r) for r in spec.structure.phi]}
        if spec.structure.eta is not None:
            st["eta"] = list(spec.structure.eta)
        doc["structure"] = st
    return doc


def dumps_spec(spec: ManifoldSpec) -> str:
    """Canonical text: sorted keys, two-space indent, shortest round-trip float repr."""
    return json.dumps(spec_to_document(spec), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def loads_spec(text: str) -> ManifoldSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"invalid JSON: {err.msg} at line {err.lineno} column {err.colno}", "<document>") from None
    if not isinstance(doc, dict):
        raise SpecError("top level must be an object", "<root>")
    return spec_from_document(doc)


def load_spec(path: str | Path) -> ManifoldSpec:
    return loads_spec(Path(path).read_text(encoding="utf-8"))


def save_spec(spec: ManifoldSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_spec(spec), encoding="utf-8")
