"""Built-in manifolds with their tabulated orthonormal frames and connection tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry, ManifoldSpec, SpecError, StructureBlock, sample_map, sample_points
from .report import Report

CATALOG_NAMES = ("flat-r3", "olszak-halfspace", "group-H", "r-cross-s2")


@dataclass
class FrameTable:
    """Orthonormal frame e_i (coordinate expressions) with tabulated brackets, connection and h-action.

    ``brackets[(i, j)]``, ``connection[(i, j)]`` (meaning nabla_{e_i} e_j) and
    ``h_action[i]`` hold frame coefficients as expression strings; missing
    entries are zeros.
    """

    labels: list[str]
    frame: list[list[str]]
    brackets: dict[tuple[int, int], list[str]] = field(default_factory=dict)
    connection: dict[tuple[int, int], list[str]] = field(default_factory=dict)
    h_action: dict[int, list[str]] = field(default_factory=dict)
    complete_connection: bool = False

    @property
    def size(self) -> int:
        return len(self.frame)


@dataclass
class CatalogEntry:
    name: str
    description: str
    spec: ManifoldSpec
    frame: FrameTable
    options: dict = field(default_factory=dict)


def _zero(n: int) -> list[str]:
    return ["0"] * n


def _unit(n: int, i: int, coeff: str = "1") -> list[str]:
    out = _zero(n)
    out[i] = coeff
    return out


def flat_r3() -> CatalogEntry:
    spec = ManifoldSpec(
        name="flat-r3",
        coordinates=["x", "y", "z"],
        metric=[["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        domain={c: (-1.0, 1.0) for c in "xyz"},
        fields={
            "V": ["x", "y - z", "y + z"],
            "translation": ["1", "0", "0"],
            "rotation": ["-y", "x", "0"],
            "dilation": ["x", "y", "z"],
        },
        structure=StructureBlock(
            xi=["1", "0", "0"],
            phi=[["0", "0", "0"], ["0", "0", "-1"], ["0", "1", "0"]],
            eta=["1", "0", "0"],
        ),
    )
    frame = FrameTable(labels=["e1", "e2", "e3"], frame=[_unit(3, i) for i in range(3)], complete_connection=True)
    return CatalogEntry("flat-r3", "Euclidean 3-space with the flat coKahler structure", spec, frame)


def olszak_halfspace(a: float = 1.0) -> CatalogEntry:
    spec = ManifoldSpec(
        name="olszak-halfspace",
        coordinates=["x", "y", "z"],
        metric=[["z^2", "0", "0"], ["0", "exp(2*a*x)/z^2", "0"], ["0", "0", "1"]],
        domain={"x": (-1.0, 1.0), "y": (-1.0, 1.0), "z": (0.25, 4.0)},
        parameters={"a": a},
        structure=StructureBlock(
            xi=["0", "0", "1"],
            phi=[["0", "-exp(a*x)/z^2", "0"], ["z^2*exp(-a*x)", "0", "0"], ["0", "0", "0"]],
            eta=["0", "0", "1"],
        ),
    )
    frame = FrameTable(
        labels=["e1", "e2", "e3"],
        frame=[["1/z", "0", "0"], ["0", "z*exp(-a*x)", "0"], ["0", "0", "1"]],
        brackets={(0, 1): ["0", "-a/z", "0"], (0, 2): ["1/z", "0", "0"], (1, 2): ["0", "-1/z", "0"]},
        connection={
            (0, 0): ["0", "0", "-1/z"],
            (1, 0): ["0", "a/z", "0"],
            (2, 0): _zero(3),
            (0, 1): _zero(3),
            (1, 1): ["-a/z", "0", "1/z"],
            (2, 1): _zero(3),
            (0, 2): ["1/z", "0", "0"],
            (1, 2): ["0", "-1/z", "0"],
            (2, 2): _zero(3),
        },
        h_action={0: ["0", "1/z", "0"], 1: ["1/z", "0", "0"], 2: _zero(3)},
        complete_connection=True,
    )
    return CatalogEntry("olszak-halfspace", "almost coKahler half-space z > 0", spec, frame, {"a": a})


def group_h(n: int = 1, a: tuple[float, ...] | None = None) -> CatalogEntry:
    """Semi-direct product R x R^2n, metric read off the orthonormal frame."""
    if n not in (1, 2):
        raise SpecError(f"group-H is provided for n in (1, 2), got {n}", "n")
    a = tuple(a) if a is not None else (1.0, 0.5)[:n]
    if len(a) != n:
        raise SpecError(f"group-H needs {n} values a_k, got {len(a)}", "a")
    dim = 2 * n + 1
    coords = [f"x{i}" for i in range(dim)]
    params = {f"a{k}": float(a[k - 1]) for k in range(1, n + 1)}
    metric = [["0"] * dim for _ in range(dim)]
    phi = [["0"] * dim for _ in range(dim)]
    frame_rows = [_unit(dim, 0)]
    metric[0][0] = "1"
    for k in range(1, n + 1):
        kp = k + n
        metric[k][k] = f"exp(2*a{k}*x0)"
        metric[kp][kp] = f"exp(-2*a{k}*x0)"
        phi[kp][k] = f"exp(2*a{k}*x0)"
        phi[k][kp] = f"-exp(-2*a{k}*x0)"
    for k in range(1, n + 1):
        frame_rows.append(_unit(dim, k, f"exp(-a{k}*x0)"))
    for k in range(1, n + 1):
        frame_rows.append(_unit(dim, k + n, f"exp(a{k}*x0)"))
    brackets, connection, h_action = {}, {}, {0: _zero(dim)}
    for k in range(1, n + 1):
        kp = k + n
        brackets[(0, k)] = _unit(dim, k, f"-a{k}")
        brackets[(0, kp)] = _unit(dim, kp, f"a{k}")
        connection[(k, 0)] = _unit(dim, k, f"a{k}")
        connection[(kp, 0)] = _unit(dim, kp, f"-a{k}")
        connection[(k, k)] = _unit(dim, 0, f"-a{k}")
        connection[(kp, kp)] = _unit(dim, 0, f"a{k}")
        h_action[k] = _unit(dim, kp, f"a{k}")
        h_action[kp] = _unit(dim, k, f"a{k}")
    spec = ManifoldSpec(
        name="group-H",
        coordinates=coords,
        metric=metric,
        domain={c: (-1.0, 1.0) for c in coords},
        parameters=params,
        structure=StructureBlock(xi=_unit(dim, 0), phi=phi, eta=_unit(dim, 0)),
    )
    labels = ["e0"] + [f"e{k}" for k in range(1, n + 1)] + [f"e{k}'" for k in range(1, n + 1)]
    frame = FrameTable(labels, frame_rows, brackets, connection, h_action, complete_connection=True)
    return CatalogEntry("group-H", "almost coKahler Lie group with flat Kahlerian leaves", spec, frame,
                        {"n": n, "a": list(a)})


def r_cross_s2() -> CatalogEntry:
    """Product of a line with the unit sphere, used as an eta-Einstein test case."""
    spec = ManifoldSpec(
        name="r-cross-s2",
        coordinates=["t", "th", "ph"],
        metric=[["1", "0", "0"], ["0", "1", "0"], ["0", "0", "sin(th)^2"]],
        domain={"t": (-1.0, 1.0), "th": (0.5, 2.6), "ph": (-1.0, 1.0)},
        structure=StructureBlock(
            xi=["1", "0", "0"],
            phi=[["0", "0", "0"], ["0", "0", "-sin(th)"], ["0", "1/sin(th)", "0"]],
            eta=["1", "0", "0"],
        ),
    )
    frame = FrameTable(
        labels=["e0", "e1", "e2"],
        frame=[_unit(3, 0), _unit(3, 1), _unit(3, 2, "1/sin(th)")],
        brackets={(1, 2): _unit(3, 2, "-cos(th)/sin(th)")},
        connection={(2, 2): _unit(3, 1, "-cos(th)/sin(th)"), (2, 1): _unit(3, 2, "cos(th)/sin(th)")},
        complete_connection=True,
    )
    return CatalogEntry("r-cross-s2", "R x S^2(1) product, auxiliary eta-Einstein case", spec, frame)


_BUILDERS = {
    "flat-r3": flat_r3,
    "olszak-halfspace": olszak_halfspace,
    "group-H": group_h,
    "r-cross-s2": r_cross_s2,
}


def catalog_list() -> list[str]:
    return list(CATALOG_NAMES)


def get_entry(name: str, **options) -> CatalogEntry:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise SpecError(f"unknown catalog entry {name!r}; available: {', '.join(CATALOG_NAMES)}", "name") from None
    return builder(**options)


def get_spec(name: str, **options) -> ManifoldSpec:
    return get_entry(name, **options).spec


# Frame verification ----------------------------------------------------------


def frame_matrix(spec: ManifoldSpec, table: FrameTable, points: np.ndarray, order: int = 3):
    """Jet whose column i holds the coordinate components of e_i."""
    from .jets import Jet

    n = spec.dimension
    flat = [spec.scalar_jet(table.frame[i][c], points, order) for c in range(n) for i in range(n)]
    return Jet.stack(flat, (n, n))


def frame_components(e: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Frame matrix of a (1,1) tensor: column i holds the frame coefficients of T e_i."""
    return np.linalg.solve(e, t @ e)


def _table_array(spec: ManifoldSpec, entries: dict, keys: list, n: int, points: np.ndarray) -> np.ndarray:
    out = np.zeros((len(points), len(keys), n))
    for q, key in enumerate(keys):
        coeffs = entries.get(key)
        if coeffs is None:
            continue
        for c in range(n):
            out[:, q, c] = spec.scalar_jet(coeffs[c], points, 0).value
    return out


def verify_frame_table(entry: CatalogEntry, points=None, tol: float = 1e-8) -> Report:
    """Recompute orthonormality, brackets, Levi-Civita actions and h on the frame and compare."""
    from .contact import StructureFields

    spec, table = entry.spec, entry.frame
    n = spec.dimension
    pts = sample_points(spec) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    pairs = [(i, j) for i in range(n) for j in range(n)]
    upper = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def compute(p):
        geom = Geometry(spec, p)
        ej = frame_matrix(spec, table, p, order=1)
        e, de = ej.value, ej.parts[1]  # de[c, i, m] = d_m e_i^c
        out = {}
        gram = np.einsum("pci,pcd,pdj->pij", e, geom.g.value, e, optimize=True)
        out["orthonormal"] = np.abs(gram - np.eye(n)).max(axis=(1, 2))
        # directional derivative e_i(e_j)^c
        dd = np.einsum("pmi,pcjm->pijc", e, de)
        bracket = dd - dd.transpose(0, 2, 1, 3)
        gam = geom.christoffel.value
        nab = dd + np.einsum("pmi,pcmk,pkj->pijc", e, gam, e, optimize=True)
        einv = np.linalg.inv(e)
        br_f = np.einsum("pac,pijc->pija", einv, bracket)
        nab_f = np.einsum("pac,pijc->pija", einv, nab)
        br_pub = _table_array(spec, table.brackets, upper, n, p)
        nab_pub = _table_array(spec, table.connection, pairs, n, p)
        br_got = np.stack([br_f[:, i, j] for i, j in upper], 1) if upper else np.zeros((len(p), 0, n))
        nab_got = np.stack([nab_f[:, i, j] for i, j in pairs], 1)
        out["brackets"] = (np.abs(br_got - br_pub) / (1 + np.abs(br_pub))).max(axis=(1, 2))
        out["connection"] = (np.abs(nab_got - nab_pub) / (1 + np.abs(nab_pub))).max(axis=(1, 2))
        if table.h_action and spec.structure is not None:
            sf = StructureFields(spec, p, geom)
            hf = frame_components(e, sf.h.value)  # column i = h e_i
            h_pub = _table_array(spec, table.h_action, list(range(n)), n, p)
            h_got = hf.transpose(0, 2, 1)
            out["h-action"] = (np.abs(h_got - h_pub) / (1 + np.abs(h_pub))).max(axis=(1, 2))
        return out

    run = sample_map(compute, pts)
    report = Report("verify_frame_table", spec.name, tol)
    report.points = run.points
    report.per_point_residual = np.max(np.vstack(list(run.data.values())), axis=0)
    for k, v in run.data.items():
        report.residuals[k] = float(v.max())
    report.diagnostics["tabulated connection entries"] = len(table.connection)
    report.warnings.extend(run.warnings)
    report.failures += len(run.dropped)
    return report
