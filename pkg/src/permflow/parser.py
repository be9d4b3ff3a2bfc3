"""Tokenizer and recursive-descent parser for system files.

File layout: one ``lattice`` block, one ``permissions`` block, then app
blocks holding constants and functions. Statement separator is ``;``,
blocks use braces, and the command forms are::

    x := e                      x := call B.f(e1, e2)
    if e then c1 else c2        while e do c
    test(p) c1 else c2          letvar x = e in c

A base type annotation is either a bare level name (a constant type) or a
literal like ``{ {p,q}: H, {p}: l1, _: L }`` where ``_`` supplies the level
for every unlisted permission set.
"""

from __future__ import annotations

import re

from .basetypes import BaseType, FunctionType, PermUniverse, embed
from .lattice import Lattice, load_lattice
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
)
from .system import System

KEYWORDS = {
    "lattice", "levels", "order", "permissions", "app", "perms", "const",
    "fun", "infer", "init", "in", "return", "if", "then", "else", "while",
    "do", "test", "letvar", "call",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|[{}(),;:=<.\+\-\*])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, span: Span):
        self.span = span
        super().__init__(f"{span}: {message}")


class DuplicateName(ParseError):
    pass


class UnknownReference(ParseError):
    pass


class Token:
    __slots__ = ("kind", "text", "span")

    def __init__(self, kind: str, text: str, span: Span):
        self.kind = kind
        self.text = text
        self.span = span

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r})"


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", Span(line, col))
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, Span(line, col)))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, col)))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.lattice: Lattice | None = None
        self.universe: PermUniverse | None = None

    # token plumbing

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("ident", "op", "int")

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            got = tok.text if tok.kind != "eof" else "end of input"
            raise ParseError(f"expected {text!r}, got {got!r}", tok.span)
        return self.next()

    def ident(self, what: str = "name") -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise ParseError(f"expected {what}, got {tok.text!r}", tok.span)
        return self.next()

    def name_list(self) -> list[Token]:
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        return names

    # top level

    def parse_system(self) -> System:
        if self.peek().kind == "eof":
            raise ParseError("empty input", self.peek().span)
        self._parse_lattice()
        self._parse_permissions()
        theta: dict[str, int] = {}
        fd: dict[str, FunDecl] = {}
        ft: dict[str, FunctionType | None] = {}
        constants: dict[str, ConstDecl] = {}
        app_order: list[str] = []
        fun_order: list[str] = []
        while not self.peek().kind == "eof":
            self._parse_app(theta, fd, ft, constants, app_order, fun_order)
        sys = System(
            self.lattice,
            self.universe,
            theta,
            fd,
            ft,
            constants,
            tuple(app_order),
            tuple(fun_order),
        )
        self._resolve_calls(sys)
        return sys

    def _parse_lattice(self) -> None:
        kw = self.expect("lattice")
        self.expect("{")
        self.expect("levels")
        names = self.name_list()
        self.expect(";")
        covers: list[tuple[str, str]] = []
        if self.accept("order"):
            while True:
                lo = self.ident("level name")
                self.expect("<")
                hi = self.ident("level name")
                covers.append((lo.text, hi.text))
                if not self.accept(","):
                    break
            self.expect(";")
        self.expect("}")
        seen = set()
        for t in names:
            if t.text in seen:
                raise DuplicateName(f"duplicate level {t.text!r}", t.span)
            seen.add(t.text)
        try:
            self.lattice = load_lattice([t.text for t in names], covers)
        except ValueError as e:
            raise ParseError(str(e), kw.span) from e

    def _parse_permissions(self) -> None:
        self.expect("permissions")
        self.expect("{")
        names: list[Token] = []
        if not self.at("}"):
            names = self.name_list()
        self.expect("}")
        seen = set()
        for t in names:
            if t.text in seen:
                raise DuplicateName(f"duplicate permission {t.text!r}", t.span)
            seen.add(t.text)
        self.universe = PermUniverse(tuple(t.text for t in names))

    def _parse_app(self, theta, fd, ft, constants, app_order, fun_order) -> None:
        self.expect("app")
        app = self.ident("app name")
        if app.text in theta:
            raise DuplicateName(f"duplicate app {app.text!r}", app.span)
        self.expect("perms")
        self.expect("{")
        perm_names: list[Token] = []
        if not self.at("}"):
            perm_names = self.name_list()
        self.expect("}")
        mask = 0
        for t in perm_names:
            if t.text not in self.universe.names:
                raise UnknownReference(f"unknown permission {t.text!r}", t.span)
            mask |= 1 << self.universe.index(t.text)
        theta[app.text] = mask
        app_order.append(app.text)
        self.expect("{")
        while not self.accept("}"):
            if self.at("const"):
                decl = self._parse_const(app.text)
                if decl.name in constants:
                    raise DuplicateName(f"duplicate constant {decl.name!r}", decl.span)
                constants[decl.name] = decl
            elif self.at("fun"):
                decl = self._parse_fun(app.text)
                if decl.qualified in fd:
                    raise DuplicateName(f"duplicate function {decl.qualified}", decl.span)
                fd[decl.qualified] = decl
                ft[decl.qualified] = decl.annotation
                fun_order.append(decl.qualified)
            else:
                tok = self.peek()
                raise ParseError(f"expected 'const' or 'fun', got {tok.text!r}", tok.span)

    def _parse_const(self, app: str) -> ConstDecl:
        kw = self.expect("const")
        name = self.ident("constant name")
        self.expect(":")
        ctype = self._parse_basetype()
        self.expect("=")
        value = self._parse_int_value()
        self.expect(";")
        return ConstDecl(name.text, value, ctype, app, kw.span)

    def _parse_int_value(self) -> int:
        neg = self.accept("-") is not None
        tok = self.peek()
        if tok.kind != "int":
            raise ParseError(f"expected integer, got {tok.text!r}", tok.span)
        self.next()
        return -int(tok.text) if neg else int(tok.text)

    def _parse_fun(self, app: str) -> FunDecl:
        kw = self.expect("fun")
        name = self.ident("function name")
        self.expect("(")
        params: list[str] = []
        param_types: list[BaseType] = []
        annotated = None
        if not self.at(")"):
            while True:
                p = self.ident("parameter name")
                if p.text in params:
                    raise DuplicateName(f"duplicate parameter {p.text!r}", p.span)
                params.append(p.text)
                if self.accept(":"):
                    if annotated is False:
                        raise ParseError(
                            "either annotate every parameter or none", p.span
                        )
                    annotated = True
                    param_types.append(self._parse_basetype())
                else:
                    if annotated is True:
                        raise ParseError(
                            "either annotate every parameter or none", p.span
                        )
                    annotated = False
                if not self.accept(","):
                    break
        self.expect(")")
        ret_type = None
        if self.accept(":"):
            ret_type = self._parse_basetype()
        if self.accept("infer") and ret_type is not None:
            raise ParseError("'infer' contradicts the type annotation", kw.span)
        if (annotated is True) and ret_type is None:
            raise ParseError(
                "annotated parameters require a return annotation", kw.span
            )
        if ret_type is not None and annotated is False:
            raise ParseError(
                "a return annotation requires annotated parameters", kw.span
            )
        annotation = None
        if ret_type is not None:
            annotation = FunctionType(tuple(param_types), ret_type)

        self.expect("{")
        self.expect("init")
        ret_var = self.ident("return variable")
        if ret_var.text in params:
            raise DuplicateName(f"return variable {ret_var.text!r} shadows a parameter", ret_var.span)
        self.expect("=")
        zero = self.peek()
        if zero.kind != "int" or int(zero.text) != 0:
            raise ParseError("the return variable must be initialized to 0", zero.span)
        self.next()
        self.expect("in")
        self.expect("{")
        body = self._parse_body_cmds(ret_var.text)
        self.expect("}")
        self.expect("}")
        return FunDecl(
            app, name.text, tuple(params), ret_var.text, body, annotation, kw.span
        )

    def _parse_body_cmds(self, ret_var: str) -> Cmd | None:
        cmds: list[Cmd] = []
        while not self.at("return"):
            cmds.append(self._parse_cmd())
            if not self.accept(";"):
                break
        ret = self.expect("return")
        got = self.ident("return variable")
        if got.text != ret_var:
            raise ParseError(
                f"function returns {got.text!r} but initializes {ret_var!r}", got.span
            )
        self.accept(";")
        body = None
        for c in cmds:
            body = c if body is None else Seq(body, c, c.span)
        return body

    def _parse_cmd(self) -> Cmd:
        tok = self.peek()
        if self.accept("{"):
            inner = self._parse_cmd_seq()
            self.expect("}")
            return inner
        if self.accept("if"):
            cond = self._parse_expr()
            self.expect("then")
            then = self._parse_cmd()
            self.expect("else")
            els = self._parse_cmd()
            return If(cond, then, els, tok.span)
        if self.accept("while"):
            cond = self._parse_expr()
            self.expect("do")
            body = self._parse_cmd()
            return While(cond, body, tok.span)
        if self.accept("test"):
            self.expect("(")
            perm = self.ident("permission name")
            if perm.text not in self.universe.names:
                raise UnknownReference(f"unknown permission {perm.text!r}", perm.span)
            self.expect(")")
            then = self._parse_cmd()
            self.expect("else")
            els = self._parse_cmd()
            return Test(perm.text, then, els, tok.span)
        if self.accept("letvar"):
            name = self.ident("variable name")
            self.expect("=")
            init = self._parse_expr()
            self.expect("in")
            body = self._parse_cmd()
            return LetVar(name.text, init, body, tok.span)
        name = self.ident("variable name")
        self.expect(":=")
        if self.accept("call"):
            app = self.ident("app name")
            self.expect(".")
            fun = self.ident("function name")
            self.expect("(")
            args: list[Expr] = []
            if not self.at(")"):
                args.append(self._parse_expr())
                while self.accept(","):
                    args.append(self._parse_expr())
            self.expect(")")
            return CallAssign(name.text, app.text, fun.text, tuple(args), tok.span)
        return Assign(name.text, self._parse_expr(), tok.span)

    def _parse_cmd_seq(self) -> Cmd:
        cmds = [self._parse_cmd()]
        while self.accept(";"):
            if self.at("}"):
                break
            cmds.append(self._parse_cmd())
        body = cmds[0]
        for c in cmds[1:]:
            body = Seq(body, c, c.span)
        return body

    # expressions

    def _parse_expr(self) -> Expr:
        lhs = self._parse_add()
        tok = self.peek()
        if tok.text in ("==", "<"):
            self.next()
            rhs = self._parse_add()
            return BinOp(tok.text, lhs, rhs, tok.span)
        return lhs

    def _parse_add(self) -> Expr:
        e = self._parse_mul()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.next()
            e = BinOp(op.text, e, self._parse_mul(), op.span)
        return e

    def _parse_mul(self) -> Expr:
        e = self._parse_atom()
        while self.at("*"):
            op = self.next()
            e = BinOp(op.text, e, self._parse_atom(), op.span)
        return e

    def _parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return IntLit(int(tok.text), tok.span)
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.next()
            return Var(tok.text, tok.span)
        if self.accept("("):
            e = self._parse_expr()
            self.expect(")")
            return e
        raise ParseError(f"expected expression, got {tok.text!r}", tok.span)

    # base types

    def _parse_basetype(self) -> BaseType:
        tok = self.peek()
        n = self.universe.count
        if tok.kind == "ident":
            self.next()
            return embed(self._level(tok), self.lattice, n)
        self.expect("{")
        default: int | None = None
        explicit: dict[int, int] = {}
        while True:
            if self.accept("_"):
                self.expect(":")
                lvl = self._level(self.ident("level name"))
                if default is not None:
                    raise ParseError("duplicate default entry", tok.span)
                default = lvl
            else:
                self.expect("{")
                mask = 0
                if not self.at("}"):
                    for t in self.name_list():
                        if t.text not in self.universe.names:
                            raise UnknownReference(
                                f"unknown permission {t.text!r}", t.span
                            )
                        bit = 1 << self.universe.index(t.text)
                        if mask & bit:
                            raise DuplicateName(
                                f"permission {t.text!r} listed twice", t.span
                            )
                        mask |= bit
                self.expect("}")
                self.expect(":")
                lvl = self._level(self.ident("level name"))
                if mask in explicit:
                    raise ParseError(
                        f"permission set {self.universe.format_set(mask)} listed twice",
                        tok.span,
                    )
                explicit[mask] = lvl
            if not self.accept(","):
                break
        self.expect("}")
        if default is None and len(explicit) != 1 << n:
            raise ParseError(
                "base type literal needs a '_' default or all permission sets",
                tok.span,
            )
        table = tuple(
            explicit.get(pset, default) for pset in range(1 << n)
        )
        return BaseType(self.lattice, n, table)

    def _level(self, tok: Token) -> int:
        if tok.text not in self.lattice.names:
            raise UnknownReference(f"unknown level {tok.text!r}", tok.span)
        return self.lattice.level(tok.text)

    # cross-references

    def _resolve_calls(self, sys: System) -> None:
        for qname in sys.fun_order:
            decl = sys.fd[qname]

            def walk(c):
                if c is None:
                    return
                if isinstance(c, CallAssign):
                    if c.target not in sys.fd:
                        raise UnknownReference(
                            f"call to unknown function {c.target}", c.span
                        )
                    if c.app not in sys.theta:
                        raise UnknownReference(f"unknown app {c.app!r}", c.span)
                elif isinstance(c, Seq):
                    walk(c.first)
                    walk(c.second)
                elif isinstance(c, (If, Test)):
                    walk(c.then)
                    walk(c.els)
                elif isinstance(c, While):
                    walk(c.body)
                elif isinstance(c, LetVar):
                    walk(c.body)

            walk(decl.body)


def parse_system(text: str) -> System:
    return Parser(text).parse_system()
