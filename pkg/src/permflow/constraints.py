"""Guarded subtyping constraints and their generation.

Constraint terms follow a two-sided grammar: joins and projections may
appear on the left of ≤, meets, merges and projections on the right.
Ground subterms fold eagerly, so a term containing no variable is always a
single ground type.

Generation walks a function body exactly like the trace rules but records
every partial-subtyping side condition as a guarded constraint instead of
checking it, handing unknown function and local types fresh variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .basetypes import BaseType, embed, merge
from .syntax import (
    Assign,
    BinOp,
    CallAssign,
    Cmd,
    Expr,
    If,
    IntLit,
    LetVar,
    Seq,
    Test,
    Var,
    While,
)
from .system import CheckedSystem
from .traces import EPSILON, Trace


@dataclass(frozen=True)
class TVar:
    vid: int

    def __repr__(self):
        return f"a{self.vid}"


@dataclass(frozen=True)
class TGround:
    type: BaseType

    def __repr__(self):
        return "g"


@dataclass(frozen=True)
class TJoin:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class TMeet:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class TMerge:
    perm: int
    then: "Term"
    els: "Term"


@dataclass(frozen=True)
class TProj:
    term: "Term"
    pset: int


Term = Union[TVar, TGround, TJoin, TMeet, TMerge, TProj]


def tjoin(a: Term, b: Term) -> Term:
    if isinstance(a, TGround) and isinstance(b, TGround):
        return TGround(a.type.join(b.type))
    return TJoin(a, b)


def tmeet(a: Term, b: Term) -> Term:
    if isinstance(a, TGround) and isinstance(b, TGround):
        return TGround(a.type.meet(b.type))
    return TMeet(a, b)


def tmerge(perm: int, a: Term, b: Term) -> Term:
    if isinstance(a, TGround) and isinstance(b, TGround):
        return TGround(merge(perm, a.type, b.type))
    return TMerge(perm, a, b)


def tproj(t: Term, pset: int) -> Term:
    if isinstance(t, TGround):
        return TGround(t.type.project(pset))
    return TProj(t, pset)


def term_vars(t: Term) -> set[int]:
    if isinstance(t, TVar):
        return {t.vid}
    if isinstance(t, TGround):
        return set()
    if isinstance(t, (TJoin, TMeet)):
        return term_vars(t.lhs) | term_vars(t.rhs)
    if isinstance(t, TMerge):
        return term_vars(t.then) | term_vars(t.els)
    return term_vars(t.term)


def eval_term(t: Term, pset: int, subst: dict[int, BaseType], lattice) -> int:
    """Level of the term at ``pset`` under a (possibly partial) substitution."""
    if isinstance(t, TGround):
        return t.type.at(pset)
    if isinstance(t, TVar):
        return subst[t.vid].at(pset)
    if isinstance(t, TJoin):
        return lattice.join(
            eval_term(t.lhs, pset, subst, lattice),
            eval_term(t.rhs, pset, subst, lattice),
        )
    if isinstance(t, TMeet):
        return lattice.meet(
            eval_term(t.lhs, pset, subst, lattice),
            eval_term(t.rhs, pset, subst, lattice),
        )
    if isinstance(t, TMerge):
        branch = t.then if pset >> t.perm & 1 else t.els
        return eval_term(branch, pset, subst, lattice)
    if isinstance(t, TProj):
        return eval_term(t.term, t.pset, subst, lattice)
    raise TypeError(f"not a term: {t!r}")


@dataclass(frozen=True)
class Constraint:
    """(Λ, lhs ≤ rhs): both sides guarded by the same trace."""

    guard: Trace
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class GenConstraint:
    """(Λl, lhs ≤ Λr, rhs): each side guarded independently."""

    lguard: Trace
    lhs: Term
    rguard: Trace
    rhs: Term


def generalize(constraints) -> list[GenConstraint]:
    out = []
    for c in constraints:
        if isinstance(c, GenConstraint):
            out.append(c)
        else:
            out.append(GenConstraint(c.guard, c.lhs, c.guard, c.rhs))
    return out


def constraint_holds(c, subst: dict[int, BaseType], lattice, nperms: int) -> bool:
    return constraint_witness(c, subst, lattice, nperms) is None


def constraint_witness(c, subst: dict[int, BaseType], lattice, nperms: int) -> int | None:
    """Permission set where the constraint fails under ``subst``, if any."""
    gc = c if isinstance(c, GenConstraint) else GenConstraint(c.guard, c.lhs, c.guard, c.rhs)
    for q in range(1 << nperms):
        vl = eval_term(gc.lhs, gc.lguard.remap(q), subst, lattice)
        vr = eval_term(gc.rhs, gc.rguard.remap(q), subst, lattice)
        if not lattice.leq(vl, vr):
            return q
    return None


@dataclass
class VarInfo:
    vid: int
    role: str  # "param" | "ret" | "local"
    name: str
    function: str


class VarSupply:
    def __init__(self):
        self.infos: list[VarInfo] = []

    def fresh(self, role: str, name: str, function: str) -> TVar:
        info = VarInfo(len(self.infos), role, name, function)
        self.infos.append(info)
        return TVar(info.vid)

    def info(self, vid: int) -> VarInfo:
        return self.infos[vid]


@dataclass
class FunSignature:
    params: tuple[Term, ...]
    ret: Term
    constraints: tuple  # the function's own constraints, generation order


@dataclass
class GenOutput:
    signatures: dict[str, FunSignature]
    by_function: dict[str, list[Constraint]]
    supply: VarSupply

    def all_constraints(self) -> list[Constraint]:
        seen = set()
        out = []
        for qname, cs in self.by_function.items():
            for c in cs:
                if c not in seen:
                    seen.add(c)
                    out.append(c)
        return out


def gen_constraints(csys: CheckedSystem) -> GenOutput:
    """Constraint sets for every function, callee-first.

    Annotated functions contribute ground signatures with empty constraint
    sets; unannotated ones get fresh parameter/return variables and their
    body's side conditions. A call imports the callee's set and adds the
    projection constraints onto the calling app's permissions.
    """
    supply = VarSupply()
    signatures: dict[str, FunSignature] = {}
    by_function: dict[str, list[Constraint]] = {}

    for qname in csys.topo:
        decl = csys.fd[qname]
        annotation = csys.ft[qname]
        if annotation is not None:
            signatures[qname] = FunSignature(
                tuple(TGround(t) for t in annotation.params),
                TGround(annotation.ret),
                (),
            )
            by_function[qname] = []
            continue
        gamma: dict[str, Term] = {
            p: supply.fresh("param", p, qname) for p in decl.params
        }
        gamma[decl.ret_var] = supply.fresh("ret", decl.ret_var, qname)
        collected: list[Constraint] = []
        if decl.body is not None:
            _gen_cmd(gamma, EPSILON, decl.app, decl.body, csys, signatures, supply,
                     collected, qname)
        dedup: list[Constraint] = []
        seen = set()
        for c in collected:
            if c not in seen:
                seen.add(c)
                dedup.append(c)
        signatures[qname] = FunSignature(
            tuple(gamma[p] for p in decl.params),
            gamma[decl.ret_var],
            tuple(dedup),
        )
        by_function[qname] = dedup
    return GenOutput(signatures, by_function, supply)


def _gen_expr(gamma, trace, e: Expr, csys) -> Term:
    lat = csys.lattice
    n = csys.universe.count
    if isinstance(e, IntLit):
        return TGround(embed(lat.bottom, lat, n))
    if isinstance(e, Var):
        if e.name in gamma:
            return gamma[e.name]
        return TGround(csys.constants[e.name].type)
    if isinstance(e, BinOp):
        return tjoin(_gen_expr(gamma, trace, e.lhs, csys),
                     _gen_expr(gamma, trace, e.rhs, csys))
    raise TypeError(f"not an expression: {e!r}")


def _gen_cmd(gamma, trace, app, c: Cmd, csys, signatures, supply, out, fun) -> Term:
    if isinstance(c, Assign):
        t = _gen_expr(gamma, trace, c.expr, csys)
        out.append(Constraint(trace, t, gamma[c.name]))
        return gamma[c.name]
    if isinstance(c, CallAssign):
        sig = signatures[c.target]
        out.extend(sig.constraints)
        theta_a = csys.theta[app]
        for arg, pt in zip(c.args, sig.params):
            s = _gen_expr(gamma, trace, arg, csys)
            out.append(Constraint(trace, s, tproj(pt, theta_a)))
        out.append(Constraint(trace, tproj(sig.ret, theta_a), gamma[c.name]))
        return gamma[c.name]
    if isinstance(c, Seq):
        t1 = _gen_cmd(gamma, trace, app, c.first, csys, signatures, supply, out, fun)
        t2 = _gen_cmd(gamma, trace, app, c.second, csys, signatures, supply, out, fun)
        return tmeet(t1, t2)
    if isinstance(c, If):
        te = _gen_expr(gamma, trace, c.cond, csys)
        t1 = _gen_cmd(gamma, trace, app, c.then, csys, signatures, supply, out, fun)
        t2 = _gen_cmd(gamma, trace, app, c.els, csys, signatures, supply, out, fun)
        out.append(Constraint(trace, te, tmeet(t1, t2)))
        return tmeet(t1, t2)
    if isinstance(c, While):
        te = _gen_expr(gamma, trace, c.cond, csys)
        t = _gen_cmd(gamma, trace, app, c.body, csys, signatures, supply, out, fun)
        out.append(Constraint(trace, te, t))
        return t
    if isinstance(c, Test):
        p = csys.universe.index(c.perm)
        t1 = _gen_cmd(gamma, trace.append(p, True), app, c.then, csys, signatures,
                      supply, out, fun)
        t2 = _gen_cmd(gamma, trace.append(p, False), app, c.els, csys, signatures,
                      supply, out, fun)
        return tmerge(p, t1, t2)
    if isinstance(c, LetVar):
        s = _gen_expr(gamma, trace, c.init, csys)
        alpha = supply.fresh("local", c.name, fun)
        out.append(Constraint(trace, s, alpha))
        inner = dict(gamma)
        inner[c.name] = alpha
        return _gen_cmd(inner, trace, app, c.body, csys, signatures, supply, out, fun)
    raise TypeError(f"not a command: {c!r}")
