"""Independent semantic constraint solver used as a differential oracle.

Treats every (variable, permission set) pair as an unknown lattice element
and runs Kleene iteration from bottom: each constraint is evaluated
pointwise through the semantic trace map P -> (P | pos) & ~neg, and the
right-hand side is raised just enough to cover the left. All term forms
are monotone in the unknowns, so the iteration reaches the least solution;
a ground upper bound violated at the fixpoint refutes the set.

This deliberately shares nothing with the symbolic pipeline beyond the
term evaluator's shape.
"""

from __future__ import annotations

from .basetypes import BaseType
from .constraints import (
    GenConstraint,
    TGround,
    TJoin,
    TMeet,
    TMerge,
    TProj,
    TVar,
    generalize,
)
from .lattice import Lattice

ORACLE_MAX_PERMISSIONS = 4


class UniverseTooLarge(ValueError):
    pass


class OracleUnsat(Exception):
    def __init__(self, constraint: GenConstraint, witness: int):
        super().__init__(
            f"constraint refuted at permission set {witness}: {constraint!r}"
        )
        self.constraint = constraint
        self.witness = witness


def _eval(term, pset: int, tables, lattice) -> int:
    if isinstance(term, TGround):
        return term.type.at(pset)
    if isinstance(term, TVar):
        return tables[term.vid][pset]
    if isinstance(term, TJoin):
        return lattice.join(
            _eval(term.lhs, pset, tables, lattice),
            _eval(term.rhs, pset, tables, lattice),
        )
    if isinstance(term, TMeet):
        return lattice.meet(
            _eval(term.lhs, pset, tables, lattice),
            _eval(term.rhs, pset, tables, lattice),
        )
    if isinstance(term, TMerge):
        branch = term.then if pset >> term.perm & 1 else term.els
        return _eval(branch, pset, tables, lattice)
    if isinstance(term, TProj):
        return _eval(term.term, term.pset, tables, lattice)
    raise TypeError(f"not a term: {term!r}")


def _raise_to(term, pset: int, level: int, tables, lattice) -> bool:
    """Raise variables under ``term`` so its value at ``pset`` covers ``level``."""
    if isinstance(term, TGround):
        return False  # a cap; the final pass reports violations
    if isinstance(term, TVar):
        old = tables[term.vid][pset]
        new = lattice.join(old, level)
        if new != old:
            tables[term.vid][pset] = new
            return True
        return False
    if isinstance(term, TMeet):
        a = _raise_to(term.lhs, pset, level, tables, lattice)
        b = _raise_to(term.rhs, pset, level, tables, lattice)
        return a or b
    if isinstance(term, TMerge):
        branch = term.then if pset >> term.perm & 1 else term.els
        return _raise_to(branch, pset, level, tables, lattice)
    if isinstance(term, TProj):
        return _raise_to(term.term, term.pset, level, tables, lattice)
    raise TypeError(f"join cannot appear on the right of a constraint: {term!r}")


def _collect_vars(term, out: set[int]) -> None:
    if isinstance(term, TVar):
        out.add(term.vid)
    elif isinstance(term, (TJoin, TMeet)):
        _collect_vars(term.lhs, out)
        _collect_vars(term.rhs, out)
    elif isinstance(term, TMerge):
        _collect_vars(term.then, out)
        _collect_vars(term.els, out)
    elif isinstance(term, TProj):
        _collect_vars(term.term, out)


def oracle_solve(
    constraints,
    lattice: Lattice,
    nperms: int,
    requested: tuple[int, ...] = (),
) -> dict[int, BaseType]:
    """Least solution by pointwise fixpoint iteration, or OracleUnsat."""
    if nperms > ORACLE_MAX_PERMISSIONS:
        raise UniverseTooLarge(
            f"oracle supports at most {ORACLE_MAX_PERMISSIONS} permissions"
        )
    gens = generalize(constraints)
    vids: set[int] = set(requested)
    for gc in gens:
        _collect_vars(gc.lhs, vids)
        _collect_vars(gc.rhs, vids)

    size = 1 << nperms
    tables = {v: [lattice.bottom] * size for v in vids}

    changed = True
    while changed:
        changed = False
        for gc in gens:
            for q in range(size):
                vl = _eval(gc.lhs, gc.lguard.remap(q), tables, lattice)
                rp = gc.rguard.remap(q)
                if not lattice.leq(vl, _eval(gc.rhs, rp, tables, lattice)):
                    if _raise_to(gc.rhs, rp, vl, tables, lattice):
                        changed = True

    for gc in gens:
        for q in range(size):
            vl = _eval(gc.lhs, gc.lguard.remap(q), tables, lattice)
            vr = _eval(gc.rhs, gc.rguard.remap(q), tables, lattice)
            if not lattice.leq(vl, vr):
                raise OracleUnsat(gc, q)

    return {
        v: BaseType(lattice, nperms, tuple(tbl)) for v, tbl in tables.items()
    }
