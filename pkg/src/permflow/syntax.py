"""Abstract syntax for the analyzed language, plus the pretty-printer.

Every node carries a source span that is excluded from equality, so the
parse/print round-trip can be checked with plain ==.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .basetypes import BaseType, FunctionType, PermUniverse, format_type

BINOPS = ("+", "-", "*", "==", "<")


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0

    def __str__(self):
        return f"{self.line}:{self.col}"


NO_SPAN = Span()


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"
    span: Span = field(default=NO_SPAN, compare=False)


Expr = Union[IntLit, Var, BinOp]


@dataclass(frozen=True)
class Assign:
    name: str
    expr: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class CallAssign:
    name: str
    app: str
    fun: str
    args: tuple[Expr, ...]
    span: Span = field(default=NO_SPAN, compare=False)

    @property
    def target(self) -> str:
        return f"{self.app}.{self.fun}"


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Cmd"
    els: "Cmd"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Cmd"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Seq:
    first: "Cmd"
    second: "Cmd"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class LetVar:
    name: str
    init: Expr
    body: "Cmd"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Test:
    perm: str
    then: "Cmd"
    els: "Cmd"
    span: Span = field(default=NO_SPAN, compare=False)


Cmd = Union[Assign, CallAssign, If, While, Seq, LetVar, Test]


@dataclass(frozen=True)
class FunDecl:
    app: str
    name: str
    params: tuple[str, ...]
    ret_var: str
    body: Cmd | None  # None: empty body, the function returns the init value
    annotation: FunctionType | None = None
    span: Span = field(default=NO_SPAN, compare=False)

    @property
    def qualified(self) -> str:
        return f"{self.app}.{self.name}"


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: int
    type: BaseType
    app: str = ""  # declaring app, for printing; constants are readable everywhere
    span: Span = field(default=NO_SPAN, compare=False)


def _prec(op: str) -> int:
    return {"==": 0, "<": 0, "+": 1, "-": 1, "*": 2}[op]


def format_expr(e: Expr, parent_prec: int = -1) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    p = _prec(e.op)
    # + - * are left-associative, comparisons non-associative; parenthesize
    # exactly so the printed form re-parses to the identical tree.
    left = format_expr(e.lhs, p if e.op in ("==", "<") else p - 1)
    right = format_expr(e.rhs, p)
    s = f"{left} {e.op} {right}"
    if p <= parent_prec:
        return f"({s})"
    return s


def format_cmd(c: Cmd, indent: int) -> str:
    pad = "  " * indent
    if isinstance(c, Assign):
        return f"{pad}{c.name} := {format_expr(c.expr)}"
    if isinstance(c, CallAssign):
        args = ", ".join(format_expr(a) for a in c.args)
        return f"{pad}{c.name} := call {c.app}.{c.fun}({args})"
    if isinstance(c, Seq):
        return f"{format_cmd(c.first, indent)};\n{format_cmd(c.second, indent)}"
    if isinstance(c, If):
        return (
            f"{pad}if {format_expr(c.cond)} then {{\n"
            f"{format_cmd(c.then, indent + 1)}\n{pad}}} else {{\n"
            f"{format_cmd(c.els, indent + 1)}\n{pad}}}"
        )
    if isinstance(c, While):
        return (
            f"{pad}while {format_expr(c.cond)} do {{\n"
            f"{format_cmd(c.body, indent + 1)}\n{pad}}}"
        )
    if isinstance(c, Test):
        return (
            f"{pad}test({c.perm}) {{\n{format_cmd(c.then, indent + 1)}\n"
            f"{pad}}} else {{\n{format_cmd(c.els, indent + 1)}\n{pad}}}"
        )
    if isinstance(c, LetVar):
        return (
            f"{pad}letvar {c.name} = {format_expr(c.init)} in {{\n"
            f"{format_cmd(c.body, indent + 1)}\n{pad}}}"
        )
    raise TypeError(f"not a command: {c!r}")


def format_fun(decl: FunDecl, universe: PermUniverse, indent: int = 1) -> str:
    pad = "  " * indent
    if decl.annotation is not None:
        params = ", ".join(
            f"{p} : {format_type(t, universe)}"
            for p, t in zip(decl.params, decl.annotation.params)
        )
        ret = f" : {format_type(decl.annotation.ret, universe)}"
    else:
        params = ", ".join(decl.params)
        ret = ""
    lines = [f"{pad}fun {decl.name}({params}){ret} {{"]
    lines.append(f"{pad}  init {decl.ret_var} = 0 in {{")
    if decl.body is not None:
        lines.append(format_cmd(decl.body, indent + 2) + ";")
    lines.append(f"{pad}    return {decl.ret_var}")
    lines.append(f"{pad}  }}")
    lines.append(f"{pad}}}")
    return "\n".join(lines)
