"""System container and static validation.

A system bundles the lattice, the permission universe, the per-app
permission assignment, declared constants, and the function tables. The
validator confirms the assumptions the analyses rely on: closed function
bodies, an acyclic call graph, per-function unique bound names, matching
call arity, no re-test of a permission already on the enclosing trace, and
it computes every function's call rank and a topological order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .basetypes import FunctionType, PermUniverse
from .lattice import Lattice
from .syntax import (
    Assign,
    BinOp,
    CallAssign,
    Cmd,
    ConstDecl,
    Expr,
    FunDecl,
    If,
    IntLit,
    LetVar,
    Seq,
    Span,
    Test,
    Var,
    While,
    format_fun,
)


class ValidationError(ValueError):
    def __init__(self, message: str, span: Span | None = None):
        self.span = span
        super().__init__(message if span is None else f"{span}: {message}")


class RecursiveCall(ValidationError):
    pass


class OpenFunction(ValidationError):
    pass


class RepeatedPermissionTest(ValidationError):
    pass


class ArityMismatch(ValidationError):
    pass


@dataclass
class System:
    lattice: Lattice
    universe: PermUniverse
    theta: dict[str, int]  # app name -> permission bitmask
    fd: dict[str, FunDecl]  # "A.f" -> declaration
    ft: dict[str, FunctionType | None]  # "A.f" -> annotation, if any
    constants: dict[str, ConstDecl]
    app_order: tuple[str, ...] = ()
    fun_order: tuple[str, ...] = ()


@dataclass
class CheckedSystem:
    system: System
    rank: dict[str, int]
    topo: tuple[str, ...]  # callees before callers

    def __getattr__(self, item):
        return getattr(self.system, item)


def _callees(c: Cmd | None) -> list[CallAssign]:
    out: list[CallAssign] = []

    def walk(node):
        if isinstance(node, CallAssign):
            out.append(node)
        elif isinstance(node, Seq):
            walk(node.first)
            walk(node.second)
        elif isinstance(node, (If, Test)):
            walk(node.then)
            walk(node.els)
        elif isinstance(node, While):
            walk(node.body)
        elif isinstance(node, LetVar):
            walk(node.body)

    if c is not None:
        walk(c)
    return out


def _free_expr_vars(e: Expr) -> set[str]:
    if isinstance(e, IntLit):
        return set()
    if isinstance(e, Var):
        return {e.name}
    return _free_expr_vars(e.lhs) | _free_expr_vars(e.rhs)


def validate_system(sys: System) -> CheckedSystem:
    for qname in sys.fun_order:
        decl = sys.fd[qname]
        _validate_function(sys, decl)

    rank, topo = _ranks(sys)
    return CheckedSystem(sys, rank, tuple(topo))


def _validate_function(sys: System, decl: FunDecl) -> None:
    consts = set(sys.constants)
    bound: set[str] = set()

    def bind(name: str, span: Span):
        if name in bound:
            raise ValidationError(f"bound name {name!r} reused in {decl.qualified}", span)
        if name in consts:
            raise ValidationError(
                f"{name!r} shadows a declared constant in {decl.qualified}", span
            )
        bound.add(name)

    for p in decl.params:
        bind(p, decl.span)
    bind(decl.ret_var, decl.span)

    def check_expr(e: Expr, scope: set[str]):
        for v in _free_expr_vars(e):
            if v not in scope and v not in consts:
                raise OpenFunction(
                    f"variable {v!r} is not in scope in {decl.qualified}",
                    e.span if isinstance(e, (Var, BinOp, IntLit)) else decl.span,
                )

    def walk(c: Cmd, scope: set[str], tested: frozenset[str]):
        if isinstance(c, Assign):
            if c.name not in scope:
                raise OpenFunction(
                    f"assignment to {c.name!r} outside its scope in {decl.qualified}",
                    c.span,
                )
            check_expr(c.expr, scope)
        elif isinstance(c, CallAssign):
            if c.name not in scope:
                raise OpenFunction(
                    f"assignment to {c.name!r} outside its scope in {decl.qualified}",
                    c.span,
                )
            target = sys.fd.get(c.target)
            if target is None:
                raise ValidationError(f"call to unknown function {c.target}", c.span)
            if len(c.args) != len(target.params):
                raise ArityMismatch(
                    f"{c.target} takes {len(target.params)} argument(s), got {len(c.args)}",
                    c.span,
                )
            for a in c.args:
                check_expr(a, scope)
        elif isinstance(c, Seq):
            walk(c.first, scope, tested)
            walk(c.second, scope, tested)
        elif isinstance(c, If):
            check_expr(c.cond, scope)
            walk(c.then, scope, tested)
            walk(c.els, scope, tested)
        elif isinstance(c, While):
            check_expr(c.cond, scope)
            walk(c.body, scope, tested)
        elif isinstance(c, Test):
            if c.perm not in sys.universe.names:
                raise ValidationError(f"test of unknown permission {c.perm!r}", c.span)
            if c.perm in tested:
                raise RepeatedPermissionTest(
                    f"permission {c.perm!r} is re-tested inside an enclosing test",
                    c.span,
                )
            inner = tested | {c.perm}
            walk(c.then, scope, inner)
            walk(c.els, scope, inner)
        elif isinstance(c, LetVar):
            if c.name in _free_expr_vars(c.init):
                raise ValidationError(
                    f"letvar {c.name!r} occurs in its own initializer", c.span
                )
            check_expr(c.init, scope)
            bind(c.name, c.span)
            walk(c.body, scope | {c.name}, tested)
        else:
            raise TypeError(f"not a command: {c!r}")

    if decl.body is not None:
        walk(decl.body, set(decl.params) | {decl.ret_var}, frozenset())

    if decl.annotation is not None and len(decl.annotation.params) != len(decl.params):
        raise ArityMismatch(
            f"annotation of {decl.qualified} has {len(decl.annotation.params)} "
            f"parameter type(s) for {len(decl.params)} parameter(s)",
            decl.span,
        )


def _ranks(sys: System) -> tuple[dict[str, int], list[str]]:
    """Call ranks per the no-recursion assumption, plus a callee-first order."""
    edges = {q: sorted({c.target for c in _callees(sys.fd[q].body)}) for q in sys.fun_order}

    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    rank: dict[str, int] = {}
    topo: list[str] = []
    stack: list[str] = []

    def visit(q: str):
        if state.get(q) == 2:
            return
        if state.get(q) == 1:
            cycle = stack[stack.index(q):] + [q]
            raise RecursiveCall(
                "recursive call chain: " + " -> ".join(cycle),
                sys.fd[q].span,
            )
        state[q] = 1
        stack.append(q)
        r = 0
        for callee in edges[q]:
            visit(callee)
            r = max(r, rank[callee] + 1)
        # rank of a function is the rank of its body; calls add one level.
        rank[q] = _cmd_rank(sys.fd[q].body, rank)
        stack.pop()
        state[q] = 2
        topo.append(q)

    for q in sys.fun_order:
        visit(q)
    return rank, topo


def _cmd_rank(c: Cmd | None, rank: dict[str, int]) -> int:
    if c is None:
        return 0
    if isinstance(c, Assign):
        return 0
    if isinstance(c, CallAssign):
        return rank[c.target] + 1
    if isinstance(c, Seq):
        return max(_cmd_rank(c.first, rank), _cmd_rank(c.second, rank))
    if isinstance(c, (If, Test)):
        return max(_cmd_rank(c.then, rank), _cmd_rank(c.els, rank))
    if isinstance(c, While):
        return _cmd_rank(c.body, rank)
    if isinstance(c, LetVar):
        return _cmd_rank(c.body, rank)
    raise TypeError(f"not a command: {c!r}")


def to_source(sys: System, ft_override: dict[str, FunctionType] | None = None) -> str:
    """Render a system back to its surface syntax."""
    from .basetypes import format_type

    lat = sys.lattice
    covers = ", ".join(f"{lat.name(a)} < {lat.name(b)}" for a, b in lat.covers())
    order = f" order {covers};" if covers else ""
    lines = [
        f"lattice {{ levels {', '.join(lat.names)};{order} }}",
        f"permissions {{ {', '.join(sys.universe.names)} }}",
    ]
    for app in sys.app_order:
        perms = ", ".join(sys.universe.set_names(sys.theta[app]))
        lines.append(f"app {app} perms {{{perms}}} {{")
        for const in sys.constants.values():
            if const.app != app:
                continue
            lines.append(
                f"  const {const.name} : {format_type(const.type, sys.universe)}"
                f" = {const.value};"
            )
        for qname in sys.fun_order:
            decl = sys.fd[qname]
            if decl.app != app:
                continue
            if ft_override and qname in ft_override:
                decl = FunDecl(
                    decl.app,
                    decl.name,
                    decl.params,
                    decl.ret_var,
                    decl.body,
                    ft_override[qname],
                    decl.span,
                )
            lines.append(format_fun(decl, sys.universe))
        lines.append("}")
    return "\n".join(lines) + "\n"
