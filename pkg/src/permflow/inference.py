"""Whole-system type inference.

Generates the joint constraint system over every unannotated function
(annotated ones contribute ground signatures), solves it for the least
substitution, instantiates the function-type table, and re-checks the
result with the trace-rule checker as a final guard.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .basetypes import BaseType, FunctionType
from .constraints import TGround, TVar, gen_constraints
from .solver import Interval, SolveResult, UnsatError, solve
from .system import CheckedSystem
from .typecheck import CheckReport, check_system


@dataclass
class FunctionInference:
    function: str
    type: FunctionType
    inferred: bool  # False when the annotation was echoed
    constraint_count: int
    intervals: list[Interval] = field(default_factory=list)


@dataclass
class InferResult:
    functions: list[FunctionInference]
    recheck: CheckReport
    stage_timings: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.recheck.ok

    def types(self) -> dict[str, FunctionType]:
        return {f.function: f.type for f in self.functions}


class InferUnsat(Exception):
    def __init__(self, err: UnsatError, functions: list[str]):
        names = ", ".join(functions) if functions else "the system"
        super().__init__(f"no type assignment satisfies {names}: {err}")
        self.cause = err
        self.functions = functions


def infer_system(csys: CheckedSystem) -> InferResult:
    lattice = csys.lattice
    nperms = csys.universe.count

    t0 = time.perf_counter()
    gen = gen_constraints(csys)
    all_constraints = gen.all_constraints()
    requested = tuple(
        t.vid
        for sig in gen.signatures.values()
        for t in (*sig.params, sig.ret)
        if isinstance(t, TVar)
    )
    t1 = time.perf_counter()

    try:
        result: SolveResult = solve(all_constraints, lattice, nperms, requested)
    except UnsatError as err:
        raise InferUnsat(err, _blamed_functions(err, gen)) from err
    t2 = time.perf_counter()

    theta = result.substitution
    functions: list[FunctionInference] = []
    ft: dict[str, FunctionType] = {}
    for qname in csys.fun_order:
        sig = gen.signatures[qname]
        params = tuple(_resolve(t, theta) for t in sig.params)
        ret = _resolve(sig.ret, theta)
        ftype = FunctionType(params, ret)
        ft[qname] = ftype
        own_vids = {
            t.vid for t in (*sig.params, sig.ret) if isinstance(t, TVar)
        }
        functions.append(
            FunctionInference(
                qname,
                ftype,
                inferred=csys.ft[qname] is None,
                constraint_count=len(sig.constraints),
                intervals=[iv for iv in result.intervals if iv.var in own_vids],
            )
        )

    annotated = annotate(csys, ft)
    recheck = check_system(annotated)
    t3 = time.perf_counter()

    return InferResult(
        functions,
        recheck,
        {
            "generate": t1 - t0,
            "solve": t2 - t1,
            "recheck": t3 - t2,
        },
    )


def _resolve(term, theta) -> BaseType:
    if isinstance(term, TGround):
        return term.type
    return theta[term.vid]


def _blamed_functions(err: UnsatError, gen) -> list[str]:
    core = set(err.core)
    blamed = []
    for qname, cs in gen.by_function.items():
        if core & set(cs):
            blamed.append(qname)
    return blamed


def annotate(csys: CheckedSystem, ft: dict[str, FunctionType]) -> CheckedSystem:
    """A copy of the system with every function carrying a type from ``ft``."""
    from dataclasses import replace

    from .system import System

    new_fd = {}
    new_ft = {}
    for qname, decl in csys.fd.items():
        ann = ft.get(qname, csys.ft[qname])
        new_fd[qname] = replace(decl, annotation=ann)
        new_ft[qname] = ann
    base = csys.system
    sys2 = System(
        base.lattice,
        base.universe,
        dict(base.theta),
        new_fd,
        new_ft,
        dict(base.constants),
        base.app_order,
        base.fun_order,
    )
    return CheckedSystem(sys2, dict(csys.rank), csys.topo)
