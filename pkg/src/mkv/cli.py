"""Command-line entry point ``mkv``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CATALOG_NAMES, get_entry, get_spec
from .contact import (
    DeformationParams,
    d_homothetic_deform,
    eta_einstein_fit,
    is_almost_cokahler,
    is_cokahler,
    kahlerian_leaves_check,
    kappa_mu_fit,
    nijenhuis_normality,
    validate_structure,
    verify_structure_identities,
)
from .curvature import curvature_checks
from .expr import ExpressionError
from .geometry import ConsistencyError, Geometry, ManifoldSpec, SpecError, sample_points
from .jets import PointEvaluationError
from .killing import (
    KillingDegenerateError,
    classify_with_identities,
    collinear_field_check,
    contact_transformation_check,
    reeb_mixed_killing_check,
    two_killing_reeb_check,
)
from .realline import RealLineProblem, realline_analyze
from .report import Report, dumps
from .reproduce import reproduce_claims
from .specio import load_spec, save_spec

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# argument helpers ------------------------------------------------------------


def _parse_assignments(text: str, flag: str) -> dict[str, float]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"{flag}: expected name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"{flag}: {value!r} is not a number") from None
    return out


def resolve_spec(arg: str, args) -> ManifoldSpec:
    """Catalog name (with --n/--param options) or path to a spec document."""
    params = {}
    for text in args.param or []:
        params.update(_parse_assignments(text, "--param"))
    if arg in CATALOG_NAMES:
        options = {}
        if arg == "group-H":
            n = args.n or 1
            a = tuple(params.pop(f"a{k}", (1.0, 0.5)[k - 1]) for k in range(1, n + 1))
            options = {"n": n, "a": a}
        elif arg == "olszak-halfspace" and "a" in params:
            options = {"a": params.pop("a")}
        spec = get_spec(arg, **options)
    else:
        path = Path(arg)
        if not path.is_file():
            raise InputError(f"{arg!r} is neither a catalog entry ({', '.join(CATALOG_NAMES)}) nor a file")
        spec = load_spec(path)
    unknown = set(params) - set(spec.parameters)
    if unknown:
        raise SpecError(f"unknown parameters {sorted(unknown)}", "parameters")
    return spec.with_parameters(**params) if params else spec


def resolve_points(spec: ManifoldSpec, args) -> np.ndarray:
    """--point overrides (missing coordinates take the domain midpoint), else the sample grid."""
    if not args.point:
        return sample_points(spec, grid=args.grid)
    rows = []
    for text in args.point:
        values = _parse_assignments(text, "--point")
        unknown = set(values) - set(spec.coordinates)
        if unknown:
            raise InputError(f"--point: unknown coordinates {sorted(unknown)}; chart has {spec.coordinates}")
        rows.append([values.get(c, sum(spec.domain[c]) / 2) for c in spec.coordinates])
    return np.array(rows, dtype=float)


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


# subcommands -----------------------------------------------------------------


def cmd_validate(args) -> Report:
    spec = resolve_spec(args.spec, args)
    pts = resolve_points(spec, args)
    report = Report("validate", spec.name, _tol(args, 1e-8))
    geom = Geometry(spec, pts, order=0)
    report.points = pts
    report.diagnostics.update({
        "dimension": spec.dimension,
        "coordinates": spec.coordinates,
        "fields": sorted(spec.fields),
        "min |det g|": float(np.abs(np.linalg.det(geom.g.value)).min()),
        "positive definite": bool(np.all(np.linalg.eigvalsh(geom.g.value) > 0)),
    })
    if spec.structure is not None:
        report.children.append(validate_structure(spec, pts, _tol(args, 1e-8)))
    return report


def cmd_curvature(args) -> Report:
    spec = resolve_spec(args.spec, args)
    return curvature_checks(spec, resolve_points(spec, args), _tol(args, 1e-7))


def cmd_killing(args) -> Report:
    spec = resolve_spec(args.spec, args)
    if args.field not in spec.fields and not (args.field == "xi" and spec.structure is not None):
        raise InputError(f"unknown field {args.field!r}; declared: {sorted(spec.fields)}")
    kr, _ = classify_with_identities(spec, args.field, resolve_points(spec, args), _tol(args, 1e-7))
    report = kr.report
    report.check = "killing"
    report.fitted["classification"] = kr.classification.value
    return report


def cmd_contact(args) -> Report:
    spec = resolve_spec(args.spec, args)
    pts = resolve_points(spec, args)
    tol = _tol(args, 1e-7)
    report = Report("contact", spec.name, tol)
    report.children.append(validate_structure(spec, pts, min(tol, 1e-8)))
    ack = is_almost_cokahler(spec, pts, min(tol, 1e-8))
    report.children.append(ack)
    if ack.passed:
        report.children.append(verify_structure_identities(spec, pts, tol))
        report.children.append(kahlerian_leaves_check(spec, pts, tol))
    # properties of the structure, reported as data
    props = {
        "normal": nijenhuis_normality(spec, pts, tol),
        "coKahler": is_cokahler(spec, pts, min(tol, 1e-8)),
    }
    ee = eta_einstein_fit(spec, pts, tol)
    km = kappa_mu_fit(spec, pts, tol)
    props["eta-Einstein"] = ee.report
    props["(kappa,mu)"] = km.report
    report.diagnostics["properties"] = {
        k: {"holds": r.passed, "max residual": r.max_residual, "fitted": r.fitted} for k, r in props.items()
    }
    return report


def cmd_reeb(args) -> Report:
    spec = resolve_spec(args.spec, args)
    pts = resolve_points(spec, args)
    tol = _tol(args, 1e-7)
    report = Report("reeb", spec.name, tol)
    report.children.append(reeb_mixed_killing_check(spec, pts, tol))
    report.children.append(two_killing_reeb_check(spec, pts, min(tol, 1e-8)))
    return report


def _number_or_expr(text: str | None):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return text


def cmd_collinear(args) -> Report:
    spec = resolve_spec(args.spec, args)
    return collinear_field_check(spec, args.alpha, _number_or_expr(args.f), resolve_points(spec, args),
                                 _tol(args, 1e-7))


def cmd_contacttrans(args) -> Report:
    spec = resolve_spec(args.spec, args)
    if args.field not in spec.fields and args.field != "xi":
        raise InputError(f"unknown field {args.field!r}; declared: {sorted(spec.fields)}")
    return contact_transformation_check(spec, args.field, resolve_points(spec, args), _tol(args, 1e-7)).report


def cmd_deform(args) -> Report:
    spec = resolve_spec(args.spec, args)
    deformed, report = d_homothetic_deform(spec, DeformationParams(args.u, args.c), resolve_points(spec, args),
                                           _tol(args, 1e-8))
    if args.output:
        save_spec(deformed, args.output)
        report.diagnostics["written"] = str(args.output)
    return report


def cmd_line(args) -> Report:
    domain = tuple(args.domain) if args.domain else (0.5, 8.0)
    x0 = args.x0
    if args.point:
        values = _parse_assignments(args.point[0], "--point")
        x0 = values.get("x", x0)
    problem = RealLineProblem(args.r, _number_or_expr(args.f), domain=domain, x0=x0, t_end=args.t_end)
    return realline_analyze(problem, grid=args.grid if args.grid > 1 else 41, tol=_tol(args, 1e-6))


def cmd_reproduce(args) -> Report:
    target = args.entry
    if target != "all" and target not in CATALOG_NAMES:
        path = Path(target)
        if not path.is_file():
            raise InputError(f"{target!r} is neither 'all', a catalog entry nor a file")
        target = load_spec(path)
    elif target in CATALOG_NAMES and (args.n or args.param):
        target = resolve_spec(target, args)
    points = None
    if args.point and target != "all":
        spec = target if isinstance(target, ManifoldSpec) else get_spec(target)
        points = resolve_points(spec, args)
    return reproduce_claims(target, points, args.grid, _tol(args, 1e-7))


def cmd_export(args) -> Report:
    spec = resolve_spec(args.entry, args)
    save_spec(spec, args.output)
    report = Report("export", spec.name, _tol(args, 1e-8))
    report.diagnostics["written"] = str(args.output)
    if args.entry in CATALOG_NAMES:
        report.diagnostics["description"] = get_entry(args.entry, **_entry_options(spec)).description
    return report


def _entry_options(spec: ManifoldSpec) -> dict:
    if spec.name == "group-H":
        n = (spec.dimension - 1) // 2
        return {"n": n, "a": tuple(spec.parameters[f"a{k}"] for k in range(1, n + 1))}
    if spec.name == "olszak-halfspace":
        return {"a": spec.parameters["a"]}
    return {}


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=5, help="grid points per axis (default 5)")
    common.add_argument("--tol", type=float, default=None, help="pass threshold override")
    common.add_argument("--point", action="append", metavar="c=v,...",
                        help="evaluate only at this point (repeatable); missing coordinates use the domain midpoint")
    common.add_argument("--json", action="store_true", help="write the JSON report document")
    common.add_argument("--n", type=int, choices=(1, 2), help="group-H half dimension")
    common.add_argument("--param", action="append", metavar="name=v,...", help="override spec parameters")

    parser = argparse.ArgumentParser(prog="mkv", description="Mixed Killing and almost coKahler verification.")
    parser.add_argument("--version", action="version", version=f"mkv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_, spec=True):
        p = sub.add_parser(name, parents=[common], help=help_)
        if spec:
            p.add_argument("spec", help="catalog entry or spec file")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "validate a spec document")
    add("curvature", cmd_curvature, "curvature substrate self-checks")
    p = add("killing", cmd_killing, "classify a vector field and check the curvature criteria")
    p.add_argument("--field", required=True)
    add("contact", cmd_contact, "almost coKahler structure pipeline")
    add("reeb", cmd_reeb, "mixed Killing and 2-Killing criteria for the Reeb field")
    p = add("collinear", cmd_collinear, "necessary conditions for V = alpha xi")
    p.add_argument("--alpha", required=True)
    p.add_argument("--f", default=None, help="mixed Killing factor (number or expression); fitted if omitted")
    p = add("contacttrans", cmd_contacttrans, "infinitesimal contact transformation fit")
    p.add_argument("--field", required=True)
    p = add("deform", cmd_deform, "D-homothetic deformation")
    p.add_argument("--u", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--output", default=None, help="write the deformed spec here")
    p = add("line", cmd_line, "mixed Killing fields r(x) d/dx on the real line", spec=False)
    p.add_argument("--r", required=True)
    p.add_argument("--f", default=None)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=2.0)
    p.add_argument("--domain", type=float, nargs=2, metavar=("LO", "HI"))
    p = sub.add_parser("reproduce", parents=[common], help="claims checklist for the worked examples")
    p.add_argument("entry", help="'all', a catalog entry or an exported spec file")
    p.set_defaults(func=cmd_reproduce)
    p = sub.add_parser("export", parents=[common], help="write a catalog entry as a spec document")
    p.add_argument("entry")
    p.add_argument("output")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.grid < 1:
        parser.error("--grid must be positive")
    try:
        report = args.func(args)
    except (InputError, SpecError, ExpressionError, KeyError, KillingDegenerateError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else str(err)
        print(f"mkv: error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except PointEvaluationError as err:
        print(f"mkv: error: evaluation failed: {err}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as err:
        print(f"mkv: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as err:
        print(f"mkv: internal consistency failure: {err}", file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        sys.stdout.write(dumps(report.to_document()))
    else:
        print(report.text())
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
