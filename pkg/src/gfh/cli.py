"""Command line front end.

Verbs:
  gh         numeric GH table of a generating family spec
  front      sample the Legendrian front as a CSV point cloud
  spin       emit the spun spec of a 1-jet generating family
  ss         spectral sequence pages of a filtered family complex
  psi        monodromy action on fiber GH
  twistspin  twisted spin GH of a fiber model
  kunneth    product GH over a closed base (S1, S2, T2, point)
  dumbbell   bundled fiber model with swap monodromy
  certify    non-contractibility certificate for a family
  check      validate a JSON artifact against the known schemas

Exit codes: 0 success, 1 validation error, 2 internal failure.  On failure a
single JSON diagnostic goes to stderr; schema problems carry the JSON path.
Identical invocations produce byte-identical output.  GFH_THREADS caps the
compiled-kernel thread count without changing any output bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import sys
from typing import Optional, Sequence

from .cubical import CubicalError
from .expr import ExpressionError
from .families import (
    FamilyError,
    MonodromyData,
    base_betti_numbers,
    certificate,
    dumbbell,
    kunneth,
    psi,
    sphere_family,
    twist_spin,
)
from .genfam import (
    GenFamError,
    GenFamSpec,
    bundled,
    bundled_names,
    gh,
    legendrian_front,
    spin_spec,
    stability,
)
from .spectral import FilteredComplex, SpectralError, collapse_check, pages
from .z2 import GHTable, GradedComplex, Z2Error, homology


class UsageError(ValueError):
    """Bad flags, unreadable input, or an unusable combination of options."""


class SchemaError(ValueError):
    """Input JSON does not match any accepted artifact schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_VALIDATION_ERRORS = (
    UsageError,
    SchemaError,
    ExpressionError,
    CubicalError,
    GenFamError,
    Z2Error,
    SpectralError,
    FamilyError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; route them through the
    # validation path (exit 1) instead.
    def error(self, message):
        raise UsageError(message)


def _fail(code: int, message: str, path: Optional[str] = None) -> int:
    blob = {"error": "validation" if code == 1 else "internal", "message": message}
    if path is not None:
        blob["path"] = path
    print(json.dumps(blob, sort_keys=True), file=sys.stderr)
    return code


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _read_json(path: str):
    name = "stdin" if path == "-" else path
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path) as fh:
                text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {name}: {e.strerror or e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON in {name}: {e.msg} (line {e.lineno} column {e.colno})")


def _need(blob: dict, key: str, where: str = "$"):
    if key not in blob:
        raise SchemaError(f"{where}.{key}", "missing required key")
    return blob[key]


def _spec_from_json(blob) -> GenFamSpec:
    if not isinstance(blob, dict):
        raise SchemaError("$", "expected a JSON object")
    try:
        return GenFamSpec.from_json(blob)
    except GenFamError as e:
        m = re.search(r"lacks key '([^']+)'", str(e))
        if m:
            raise SchemaError(f"$.{m.group(1)}", str(e))
        raise


def _load_spec(arg: str) -> GenFamSpec:
    if arg == "-" or os.path.exists(arg):
        return _spec_from_json(_read_json(arg))
    if arg in bundled_names():
        return bundled(arg)
    raise UsageError(
        f"no spec file {arg!r} and no bundled spec of that name; "
        f"bundled: {', '.join(bundled_names())}"
    )


def _scale(spec: GenFamSpec, factor: float) -> GenFamSpec:
    if factor == 1.0:
        return spec
    if factor <= 0:
        raise UsageError("--box-scale must be positive")
    box = tuple(
        (0.5 * (lo + hi) - 0.5 * factor * (hi - lo), 0.5 * (lo + hi) + 0.5 * factor * (hi - lo))
        for lo, hi in spec.computation_box
    )
    return dataclasses.replace(spec, computation_box=box)


def _load_model(blob: dict):
    fiber = GradedComplex.from_json(_need(blob, "fiber"))
    data = MonodromyData.from_json(_need(blob, "monodromy"))
    return fiber, data


def _load_family(blob) -> FilteredComplex:
    if isinstance(blob, dict) and {"base", "generators", "components"} <= set(blob):
        return FilteredComplex.from_json(blob)
    if isinstance(blob, dict) and {"fiber", "monodromy"} <= set(blob):
        fiber, data = _load_model(blob)
        return sphere_family(fiber, int(blob.get("m", 1)), data)
    raise SchemaError(
        "$",
        "expected a filtered family complex (keys base/generators/components) "
        "or a fiber model (keys fiber/monodromy)",
    )


def _as_table(raw) -> GHTable:
    if not isinstance(raw, dict):
        raise SchemaError("$.gh", "expected an object mapping degree to rank")
    try:
        return GHTable.from_json(raw)
    except (Z2Error, TypeError, ValueError) as e:
        raise SchemaError("$.gh", f"bad GH table: {e}")


def _intlike(key) -> bool:
    try:
        int(key)
        return True
    except (TypeError, ValueError):
        return False


def _fmt_ranks(ranks: dict) -> str:
    if not ranks:
        return "(empty)"
    return "{" + ", ".join(f"{k}: {ranks[k]}" for k in sorted(ranks, key=int)) + "}"


def _table_lines(table: GHTable, title: str) -> list:
    ranks = table.to_json()
    lines = [title]
    if not ranks:
        lines.append("  (empty)")
    for k in sorted(ranks, key=int):
        lines.append(f"  degree {k}: {ranks[k]}")
    return lines


def _cap_threads() -> None:
    raw = os.environ.get("GFH_THREADS", "").strip()
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"GFH_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"GFH_THREADS must be a positive integer, got {raw!r}")
    try:
        import warnings

        with warnings.catch_warnings():
            # numba may warn about the threading layer while re-initializing it
            warnings.simplefilter("ignore")
            import numba

            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def _cmd_gh(args) -> None:
    spec = _scale(_load_spec(args.spec), args.box_scale)
    if args.stability and (args.eps is not None or args.omega is not None):
        raise UsageError("--stability recomputes the window; it cannot be combined with --eps/--omega")
    result = gh(spec, args.resolution, eps=args.eps, omega=args.omega)
    blob = result.to_json()
    report = None
    if args.stability:
        report = stability(spec, args.resolution)
        blob["stability"] = report.to_json()
    if args.json:
        _emit(blob)
        return
    lines = _table_lines(result.table, "GH ranks")
    lines.append(f"eps = {result.eps!r}")
    lines.append(f"omega = {result.omega!r}")
    for flag in result.stability_flags:
        lines.append(f"note: {flag}")
    if report is not None:
        if report.ok():
            lines.append("stability: ok")
        else:
            lines.append("stability: DISCREPANCY in " + ", ".join(report.discrepancies))
        for name in sorted(report.tables):
            lines.append(f"  {name}: {_fmt_ranks(report.tables[name].to_json())}")
    print("\n".join(lines))


def _cmd_front(args) -> None:
    spec = _scale(_load_spec(args.spec), args.box_scale)
    cloud = legendrian_front(spec, args.resolution)
    if args.csv:
        cloud.to_csv(args.csv)
        print(f"wrote {len(cloud.points)} front points to {args.csv}")
        return
    sys.stdout.write(",".join(cloud.columns) + "\n")
    for row in cloud.points:
        sys.stdout.write(",".join(repr(float(v)) for v in row) + "\n")


def _cmd_spin(args) -> None:
    spun = spin_spec(_load_spec(args.spec), args.m)
    text = json.dumps(spun.to_json(), indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote spun spec to {args.output}")
    else:
        print(text)


def _cmd_ss(args) -> None:
    fam = _load_family(_read_json(args.family))
    pg = pages(fam)
    collapse = collapse_check(pg)
    pj = pg.to_json()
    if args.json:
        pj["collapse_at_e2"] = collapse
        _emit(pj)
        return
    by_page = {}
    for key, rank in pj["ranks"].items():
        r, l, j = (int(v) for v in key.split("/"))
        by_page.setdefault(r, []).append((l, j, rank))
    lines = []
    for r in sorted(by_page):
        lines.append(f"page E^{r}" + (" (stable)" if r == pj["r_stable"] else ""))
        for l, j, rank in sorted(by_page[r]):
            lines.append(f"  (l={l}, j={j}): {rank}")
    lines.append("E^infinity")
    einf = pj["e_infinity"]
    for key in sorted(einf, key=lambda s: tuple(int(v) for v in s.split("/"))):
        l, j = key.split("/")
        lines.append(f"  (l={l}, j={j}): {einf[key]}")
    lines.append(f"stable at r = {pj['r_stable']}")
    lines.append(f"collapses at E^2: {'yes' if collapse else 'no'}")
    print("\n".join(lines))


def _cmd_psi(args) -> None:
    fam = _load_family(_read_json(args.family))
    pj = psi(fam).to_json()
    if args.json:
        _emit(pj)
        return
    lines = [f"monodromy action on fiber GH (m = {pj['m']}, degree shift {pj['degree_shift']})"]
    for k in sorted(pj["degrees"], key=int):
        lines.append(f"degree {k} on [{', '.join(pj['basis'][k])}]:")
        for row in pj["degrees"][k]:
            lines.append("  " + " ".join(str(v) for v in row))
    print("\n".join(lines))


def _cmd_twistspin(args) -> None:
    blob = _read_json(args.model)
    if not (isinstance(blob, dict) and {"fiber", "monodromy"} <= set(blob)):
        raise SchemaError(
            "$", "twistspin consumes a fiber model with keys fiber/monodromy (as emitted by `gfh dumbbell`)"
        )
    fiber, data = _load_model(blob)
    p = psi(sphere_family(fiber, 1, data))
    table = twist_spin(fiber, p, args.m)
    if args.json:
        _emit({"gh": table.to_json(), "m": args.m})
        return
    print("\n".join(_table_lines(table, f"twisted spin GH ranks (m = {args.m})")))


def _cmd_kunneth(args) -> None:
    blob = _read_json(args.table)
    raw = blob.get("gh", blob) if isinstance(blob, dict) else blob
    table = kunneth(_as_table(raw), base_betti_numbers(args.base))
    if args.json:
        _emit({"gh": table.to_json(), "base": args.base})
        return
    print("\n".join(_table_lines(table, f"product GH ranks over {args.base}")))


def _cmd_dumbbell(args) -> None:
    fiber, data = dumbbell(args.n, args.r, args.copies)
    _emit(
        {
            "n": args.n,
            "r": args.r,
            "copies": args.copies,
            "m": 1,
            "gh": homology(fiber).to_json(),
            "fiber": fiber.to_json(),
            "monodromy": data.to_json(),
        }
    )


def _cmd_certify(args) -> None:
    blob = _read_json(args.model)
    if isinstance(blob, dict) and {"fiber", "monodromy"} <= set(blob):
        fiber, data = _load_model(blob)
        fam = sphere_family(fiber, args.m, data)
    elif isinstance(blob, dict) and {"base", "generators", "components"} <= set(blob):
        fam = FilteredComplex.from_json(blob)
    else:
        raise SchemaError(
            "$", "certify consumes a fiber model (keys fiber/monodromy) or a filtered family complex"
        )
    cert = certificate(psi(fam))
    if args.json:
        _emit(cert)
        return
    print(f"nontrivial: {'yes' if cert.get('nontrivial') else 'no'}")
    print(f"order lower bound: {cert.get('order_lower_bound')}")
    print(f"basis: {cert.get('basis')}")
    print(f"claim: {cert.get('paper_claim')}")


def _cmd_check(args) -> None:
    print(f"ok: {_validate_artifact(_read_json(args.path))}")


def _validate_artifact(blob) -> str:
    if not isinstance(blob, dict):
        raise SchemaError("$", "expected a JSON object")
    keys = set(blob)
    if {"expr", "computation_box"} <= keys:
        spec = _spec_from_json(blob)
        return f"generating family spec (n={spec.n}, N={spec.N})"
    if {"fiber", "monodromy"} <= keys:
        fiber, data = _load_model(blob)
        sphere_family(fiber, int(blob.get("m", 1)), data)
        return f"fiber model with monodromy ({len(blob['fiber'].get('generators', []))} fiber generators)"
    if {"base", "generators", "components"} <= keys:
        FilteredComplex.from_json(blob)
        base = blob["base"] if isinstance(blob["base"], dict) else {}
        return f"filtered family complex (base kind {base.get('kind', '?')}, m={base.get('m', '?')})"
    if {"ranks", "r_stable"} <= keys:
        return f"spectral pages (stable at r = {blob['r_stable']})"
    if {"degrees", "degree_shift"} <= keys:
        return "monodromy action on fiber GH"
    if keys == {"degrees"}:
        MonodromyData.from_json(blob)
        return "monodromy data"
    if {"nontrivial", "order_lower_bound"} <= keys:
        return f"certificate (order lower bound {blob['order_lower_bound']})"
    if "gh" in keys:
        table = _as_table(blob["gh"])
        return f"GH table ({len(table.to_json())} degrees)"
    if keys and all(_intlike(k) for k in keys):
        table = _as_table(blob)
        return f"GH table ({len(table.to_json())} degrees)"
    raise SchemaError(
        "$",
        "unrecognized artifact; known schemas: spec, fiber model, family complex, "
        "spectral pages, monodromy, certificate, GH table",
    )


def _build_parser() -> _Parser:
    top = _Parser(prog="gfh", description="generating family homology toolkit")
    top.add_argument(
        "--seed", type=int, default=0,
        help="seed for randomized fixtures (current verbs are deterministic)",
    )
    sub = top.add_subparsers(dest="verb", metavar="verb", required=True)

    def spec_flags(p):
        p.add_argument("spec", help="spec JSON path, '-' for stdin, or a bundled name")
        p.add_argument("--resolution", type=int, default=65, help="grid points per axis (default 65)")
        p.add_argument("--box-scale", type=float, default=1.0,
                       help="scale the computation box about its center (default 1.0)")

    p = sub.add_parser("gh", help="numeric GH table of a generating family spec")
    spec_flags(p)
    p.add_argument("--eps", type=float, default=None, help="override the lower window level")
    p.add_argument("--omega", type=float, default=None, help="override the upper window level")
    p.add_argument("--stability", action="store_true",
                   help="also rerun at doubled resolution, doubled box, alternate window")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_gh)

    p = sub.add_parser("front", help="sample the Legendrian front as CSV")
    spec_flags(p)
    p.add_argument("--csv", metavar="PATH", default=None, help="write CSV to a file instead of stdout")
    p.set_defaults(fn=_cmd_front)

    p = sub.add_parser("spin", help="emit the spun spec of a 1-jet generating family")
    p.add_argument("spec", help="spec JSON path, '-' for stdin, or a bundled name")
    p.add_argument("--m", type=int, default=1, help="spin dimension (default 1)")
    p.add_argument("-o", "--output", metavar="PATH", default=None, help="write the spun spec to a file")
    p.set_defaults(fn=_cmd_spin)

    p = sub.add_parser("ss", help="spectral sequence pages of a family")
    p.add_argument("family", help="family or fiber-model JSON path, '-' for stdin")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_ss)

    p = sub.add_parser("psi", help="monodromy action on fiber GH")
    p.add_argument("family", help="family or fiber-model JSON path, '-' for stdin")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_psi)

    p = sub.add_parser("twistspin", help="twisted spin GH of a fiber model")
    p.add_argument("model", help="fiber-model JSON path, '-' for stdin")
    p.add_argument("--m", type=int, default=1, help="spin dimension (default 1)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_twistspin)

    p = sub.add_parser("kunneth", help="product GH over a closed base")
    p.add_argument("table", help="GH table JSON path, '-' for stdin")
    p.add_argument("--base", default="S1", help="base manifold name: S1, S2, T2, or point")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_kunneth)

    p = sub.add_parser("dumbbell", help="bundled fiber model with swap monodromy (JSON to stdout)")
    p.add_argument("--n", type=int, required=True, help="degree of the core generator")
    p.add_argument("--r", type=int, required=True, help="degree of the handle generators (r >= n+2)")
    p.add_argument("--copies", type=int, default=2, help="number of handles (default 2)")
    p.set_defaults(fn=_cmd_dumbbell)

    p = sub.add_parser("certify", help="non-contractibility certificate for a family")
    p.add_argument("model", nargs="?", default="-",
                   help="fiber-model or family JSON path (default: stdin)")
    p.add_argument("--m", type=int, default=1, help="base sphere dimension for fiber models (default 1)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("check", help="validate a JSON artifact against the known schemas")
    p.add_argument("path", help="artifact JSON path, '-' for stdin")
    p.set_defaults(fn=_cmd_check)

    return top


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _cap_threads()
        args.fn(args)
        return 0
    except _VALIDATION_ERRORS as e:
        return _fail(1, str(e), path=getattr(e, "path", None))
    except OSError as e:
        return _fail(1, str(e))
    except Exception as e:  # anything else is a bug, not bad input
        return _fail(2, f"{type(e).__name__}: {e}")


if __name__ == "__main__":
    sys.exit(main())
