"""Command-line front door.

Exit codes: 0 = success / well-typed / no violation; 1 = negative analysis
verdict (type error, unsatisfiable constraints, noninterference violation);
2 = usage, IO, parse, or validation error. JSON mode emits one document on
stdout with deterministic key order and no timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys

from .basetypes import format_function_type
from .inference import InferUnsat, annotate, infer_system
from .interp import DEFAULT_FUEL, FuelExhausted, call_function
from .nitest import DEFAULT_PAIR_CAP, NIReport, nitest_system
from .parser import ParseError, parse_system
from .system import CheckedSystem, ValidationError, to_source, validate_system
from .typecheck import CheckReport, check_system


class SystemExit2(Exception):
    """Raised for usage, IO, parse, and validation failures (exit code 2)."""


def _load(path: str) -> CheckedSystem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise SystemExit2(f"cannot read {path}: {e}")
    try:
        sys_ = parse_system(text)
        return validate_system(sys_)
    except (ParseError, ValidationError) as e:
        raise SystemExit2(str(e))


def _emit(doc, as_json: bool, human_lines) -> None:
    if as_json:
        print(json.dumps(doc, indent=2))
    else:
        for line in human_lines:
            print(line)


def _type_table(t, csys) -> dict:
    uni = csys.universe
    lat = csys.lattice
    return {uni.format_set(p): lat.name(t.at(p)) for p in uni.sets()}


def _violation_doc(err, csys) -> dict:
    doc = {
        "kind": err.kind,
        "message": err.message,
        "span": {"line": err.span.line, "col": err.span.col},
        "trace": err.trace.format(csys.universe.names),
    }
    if err.lhs is not None:
        doc["lhs"] = _type_table(err.lhs, csys)
    if err.rhs is not None:
        doc["rhs"] = _type_table(err.rhs, csys)
    if err.witness is not None:
        doc["witness"] = csys.universe.format_set(err.witness)
    return doc


def cmd_check(args) -> int:
    csys = _load(args.file)
    report: CheckReport = check_system(csys)
    doc = {
        "command": "check",
        "file": args.file,
        "ok": report.ok,
        "functions": [
            {
                "name": v.function,
                "ok": v.ok,
                **({"error": _violation_doc(v.error, csys)} if v.error else {}),
            }
            for v in report.verdicts
        ],
    }
    lines = []
    for v in report.verdicts:
        if v.ok:
            lines.append(f"{v.function}: ok")
            continue
        err = v.error
        lines.append(f"{v.function}: FAIL {err.kind} at {err.span}: {err.message}")
        if err.witness is not None:
            under = (
                f" under trace {err.trace.format(csys.universe.names)}"
                if not err.trace.is_empty()
                else ""
            )
            lines.append(
                f"  witness permission set {csys.universe.format_set(err.witness)}{under}"
            )
    lines.append("well-typed" if report.ok else "ill-typed")
    _emit(doc, args.json, lines)
    return 0 if report.ok else 1


def cmd_infer(args) -> int:
    csys = _load(args.file)
    try:
        result = infer_system(csys)
    except InferUnsat as e:
        doc = {
            "command": "infer",
            "file": args.file,
            "ok": False,
            "unsat": {
                "functions": e.functions,
                "message": str(e.cause),
            },
        }
        _emit(doc, args.json, [f"unsatisfiable: {e}"])
        return 1

    funs = []
    lines = []
    for f in result.functions:
        entry = {
            "name": f.function,
            "inferred": f.inferred,
            "params": [_type_table(t, csys) for t in f.type.params],
            "return": _type_table(f.type.ret, csys),
            "signature": format_function_type(f.type, csys.universe),
            "constraints": f.constraint_count,
            "intervals": [
                {
                    "guard": iv.guard.format(csys.universe.names),
                    "lo": _type_table(iv.lo, csys),
                    "hi": _type_table(iv.hi, csys),
                }
                for iv in f.intervals
            ],
        }
        funs.append(entry)
        lines.append(f"{f.function} : {entry['signature']}")
    doc = {"command": "infer", "file": args.file, "ok": result.ok, "functions": funs}
    if args.timings:
        doc["timings"] = result.stage_timings
    if not result.ok:
        bad = [v.function for v in result.recheck.verdicts if not v.ok]
        doc["recheck_failures"] = bad
        lines.append(f"recheck failed for: {', '.join(bad)}")

    if args.emit_annotated:
        annotated_src = to_source(csys.system, result.types())
        with open(args.emit_annotated, "w", encoding="utf-8") as fh:
            fh.write(annotated_src)
        lines.append(f"annotated source written to {args.emit_annotated}")

    _emit(doc, args.json, lines)
    return 0 if result.ok else 1


def cmd_run(args) -> int:
    csys = _load(args.file)
    if args.entry not in csys.fd:
        raise SystemExit2(f"unknown entry function {args.entry}")
    arg_values = []
    if args.args:
        try:
            arg_values = [int(a) for a in args.args.split(",")]
        except ValueError:
            raise SystemExit2(f"bad --args value {args.args!r}")
    perms = _parse_perms(args.caller_perms, csys)
    try:
        value = call_function(csys.system, args.entry, arg_values, perms, args.fuel)
    except FuelExhausted:
        _emit(
            {"command": "run", "file": args.file, "error": "fuel exhausted"},
            args.json,
            ["fuel exhausted"],
        )
        return 1
    except ValueError as e:
        raise SystemExit2(str(e))
    _emit(
        {"command": "run", "file": args.file, "entry": args.entry, "result": value},
        args.json,
        [str(value)],
    )
    return 0


def cmd_nitest(args) -> int:
    csys = _load(args.file)
    lat = csys.lattice

    needs_types = [q for q in csys.fun_order if csys.ft[q] is None]
    if needs_types:
        try:
            result = infer_system(csys)
        except InferUnsat as e:
            raise SystemExit2(f"cannot infer types for noninterference test: {e}")
        csys = annotate(csys, result.types())

    observers = None
    if args.observer is not None:
        try:
            observers = (lat.level(args.observer),)
        except ValueError as e:
            raise SystemExit2(str(e))
    domain = _parse_domain(args.domain)
    report: NIReport = nitest_system(
        csys,
        observers=observers,
        domain=domain,
        fuel=args.fuel,
        pair_cap=args.pair_cap,
        strict=args.strict,
    )
    cells = []
    lines = []
    for c in report.cells:
        entry = {
            "function": c.function,
            "P": csys.universe.format_set(c.perms),
            "observer": lat.name(c.observer),
            "pairs_tested": c.pairs_tested,
            "verdict": c.verdict,
        }
        if c.note:
            entry["note"] = c.note
        if c.witness:
            entry["witness"] = {
                "env1": c.witness.env1,
                "env2": c.witness.env2,
                "out1": c.witness.out1,
                "out2": c.witness.out2,
            }
        cells.append(entry)
        if c.verdict != "ok":
            lines.append(
                f"{c.function} P={entry['P']} observer={entry['observer']}: "
                f"{c.verdict}"
                + (f" ({c.note})" if c.note else "")
            )
    ok = report.ok
    doc = {"command": "nitest", "file": args.file, "ok": ok, "cells": cells}
    lines.append("no violations" if ok else "VIOLATION found")
    _emit(doc, args.json, lines)
    return 0 if ok else 1


def cmd_fmt(args) -> int:
    csys = _load(args.file)
    src = to_source(csys.system)
    if args.json:
        print(json.dumps({"command": "fmt", "file": args.file, "source": src}, indent=2))
    else:
        print(src, end="")
    return 0


def _parse_perms(spec: str | None, csys) -> int:
    if not spec:
        return 0
    mask = 0
    for name in spec.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            mask |= 1 << csys.universe.index(name)
        except ValueError as e:
            raise SystemExit2(str(e))
    return mask


def _parse_domain(spec: str) -> tuple[int, ...]:
    try:
        lo, hi = spec.split("..")
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise SystemExit2(f"bad --domain value {spec!r}; expected lo..hi")
    if hi_i < lo_i:
        raise SystemExit2("empty --domain range")
    return tuple(range(lo_i, hi_i + 1))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="permflow",
        description="permission-dependent information-flow analysis",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="system source file")
        p.add_argument("--json", action="store_true", help="emit a JSON report")

    p = sub.add_parser("check", help="type-check a fully annotated system")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("infer", help="infer function types")
    common(p)
    p.add_argument("--emit-annotated", metavar="PATH",
                   help="write the source back with inferred annotations")
    p.add_argument("--timings", action="store_true",
                   help="include solver stage timings in the JSON report")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("run", help="execute one function call")
    common(p)
    p.add_argument("--entry", required=True, metavar="A.f")
    p.add_argument("--args", default="", metavar="1,2")
    p.add_argument("--caller-perms", default="", metavar="p,q")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("nitest", help="run the noninterference harness")
    common(p)
    p.add_argument("--observer", metavar="LEVEL",
                   help="observer level (default: every level)")
    p.add_argument("--domain", default="0..2", metavar="lo..hi")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--pair-cap", type=int, default=DEFAULT_PAIR_CAP)
    p.add_argument("--strict", action="store_true",
                   help="also test cells whose return type is unobservable")
    p.set_defaults(fn=cmd_nitest)

    p = sub.add_parser("fmt", help="pretty-print a system")
    common(p)
    p.set_defaults(fn=cmd_fmt)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit2 as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
