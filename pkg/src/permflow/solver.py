"""Symbolic constraint solving: decompose, saturate, merge, unify.

The pipeline works on generalized constraints (each side guarded by its own
trace) and reduces everything to atoms relating a variable or ground type
to a variable or ground type. Saturation closes the atom set under
transitivity through shared variables; because a guard's remap collapses
permission-set fibers, the transitive consequence of a lower and an upper
bound is a family of constraints, one per sign assignment of each side's
collapsed permissions. Self-guarded variables are regrouped into fresh
piece variables, one per sign assignment over the support of their guards.

Merging and unification run as one sweep in decreasing variable order: a
variable's least type is the pointwise join of its (by then ground) lower
bounds pushed through the guards, its upper bounds are checked against it,
and the result substitutes into the remaining variables' bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .basetypes import BaseType, embed
from .constraints import (
    GenConstraint,
    TGround,
    TJoin,
    TMeet,
    TMerge,
    TProj,
    TVar,
    Term,
    constraint_witness,
    generalize,
    term_vars,
)
from .lattice import Lattice
from .traces import Trace, apply_trace, minterms, trace_of_set

GROUND_VIOLATION = "GroundViolation"
EMPTY_INTERVAL = "EmptyInterval"


class UnsatError(Exception):
    def __init__(
        self,
        kind: str,
        message: str,
        constraint: GenConstraint | None = None,
        witness: int | None = None,
        var: int | None = None,
        guard: Trace | None = None,
        lo: BaseType | None = None,
        hi: BaseType | None = None,
        core: list | None = None,
    ):
        super().__init__(message)
        self.kind = kind
        self.constraint = constraint
        self.witness = witness
        self.var = var
        self.guard = guard
        self.lo = lo
        self.hi = hi
        self.core = core or []


@dataclass(frozen=True)
class Interval:
    var: int
    guard: Trace
    lo: BaseType
    hi: BaseType


@dataclass
class SolveResult:
    substitution: dict[int, BaseType]
    intervals: list[Interval]
    stage_timings: dict[str, float] = field(default_factory=dict)


class _Ctx:
    def __init__(self, lattice: Lattice, nperms: int, first_free_vid: int):
        self.lattice = lattice
        self.nperms = nperms
        self.next_vid = first_free_vid
        # split parent -> (support mask, {sigma pos mask -> piece vid})
        self.pieces: dict[int, tuple[int, dict[int, int]]] = {}

    def fresh_piece(self) -> int:
        vid = self.next_vid
        self.next_vid += 1
        return vid


# ---------------------------------------------------------------- decompose

def decompose(
    gens: list[GenConstraint], lattice: Lattice, nperms: int
) -> list[GenConstraint]:
    """Reduce constraints to atoms (variable/ground vs variable/ground)."""
    out: list[GenConstraint] = []
    seen: set[GenConstraint] = set()
    work = list(gens)
    while work:
        gc = work.pop()
        lhs, rhs = gc.lhs, gc.rhs

        if isinstance(rhs, TMeet):
            work.append(GenConstraint(gc.lguard, lhs, gc.rguard, rhs.lhs))
            work.append(GenConstraint(gc.lguard, lhs, gc.rguard, rhs.rhs))
            continue
        if isinstance(rhs, TMerge):
            bit = 1 << rhs.perm
            if gc.rguard.pos & bit:
                work.append(GenConstraint(gc.lguard, lhs, gc.rguard, rhs.then))
            elif gc.rguard.neg & bit:
                work.append(GenConstraint(gc.lguard, lhs, gc.rguard, rhs.els))
            else:
                work.append(GenConstraint(
                    gc.lguard.append(rhs.perm, True), lhs,
                    gc.rguard.append(rhs.perm, True), rhs.then))
                work.append(GenConstraint(
                    gc.lguard.append(rhs.perm, False), lhs,
                    gc.rguard.append(rhs.perm, False), rhs.els))
            continue
        if isinstance(rhs, TProj):
            work.append(GenConstraint(
                gc.lguard, lhs, trace_of_set(rhs.pset, nperms), rhs.term))
            continue
        if isinstance(lhs, TJoin):
            work.append(GenConstraint(gc.lguard, lhs.lhs, gc.rguard, rhs))
            work.append(GenConstraint(gc.lguard, lhs.rhs, gc.rguard, rhs))
            continue
        if isinstance(lhs, TProj):
            work.append(GenConstraint(
                trace_of_set(lhs.pset, nperms), lhs.term, gc.rguard, rhs))
            continue
        if isinstance(lhs, (TMeet, TMerge)) or isinstance(rhs, TJoin):
            raise ValueError(f"term violates the constraint grammar: {gc!r}")

        for atom in _atomic(gc, lattice, nperms):
            if atom not in seen:
                seen.add(atom)
                out.append(atom)
    return out


def _atomic(gc: GenConstraint, lattice: Lattice, nperms: int) -> list[GenConstraint]:
    """Discharge or keep an atom-shaped constraint; refute ground-ground."""
    lhs, rhs = gc.lhs, gc.rhs
    if isinstance(lhs, TGround) and isinstance(rhs, TGround):
        for q in range(1 << nperms):
            a = lhs.type.at(gc.lguard.remap(q))
            b = rhs.type.at(gc.rguard.remap(q))
            if not lattice.leq(a, b):
                raise UnsatError(
                    GROUND_VIOLATION,
                    f"ground constraint refuted at permission set {q}",
                    constraint=gc,
                    witness=q,
                )
        return []
    if (
        isinstance(lhs, TVar)
        and isinstance(rhs, TVar)
        and lhs.vid == rhs.vid
        and gc.lguard == gc.rguard
    ):
        return []
    return [gc]


# ----------------------------------------------------------------- saturate

def _derive(low: GenConstraint, up: GenConstraint, lattice, nperms) -> list[GenConstraint]:
    """Transitive consequences of a lower and an upper bound of one variable.

    low = (Λ1, T1 ≤ Λr, v) and up = (Λl, v ≤ Λ2, T2) relate T1 and T2
    through every pair of points the two remaps send to a common v-point,
    so each side's guard is completed by the other guard's surplus literals
    and then by every sign assignment over its own collapsed permissions.
    """
    lr, ll = low.rguard, up.lguard
    if not lr.compatible(ll):
        return []
    dlow = ll.diff(lr)
    dup = lr.diff(ll)
    base_l = low.lguard.extend(dlow)
    base_r = up.rguard.extend(dup)
    out = []
    for sigma in minterms(lr.support):
        lg = base_l.extend(sigma)
        for sigma2 in minterms(ll.support):
            rg = base_r.extend(sigma2)
            out.extend(_atomic(GenConstraint(lg, low.lhs, rg, up.rhs), lattice, nperms))
    return out


def saturate(atoms: list[GenConstraint], lattice: Lattice, nperms: int,
             ctx: _Ctx | None = None) -> list[GenConstraint]:
    """Close under transitivity; regroup self-guarded variables into pieces."""
    if ctx is None:
        vids = {v for a in atoms for v in term_vars(a.lhs) | term_vars(a.rhs)}
        ctx = _Ctx(lattice, nperms, max(vids, default=-1) + 1)
    while True:
        result, selfvar = _saturate_pass(atoms, lattice, nperms)
        if selfvar is None:
            return result
        atoms = _split_var(result, selfvar, ctx, lattice, nperms)


def _saturate_pass(atoms, lattice, nperms):
    seen: set[GenConstraint] = set()
    registered: list[GenConstraint] = []
    lowers: dict[int, list[GenConstraint]] = {}
    uppers: dict[int, list[GenConstraint]] = {}
    queue = list(reversed(atoms))
    while queue:
        a = queue.pop()
        if a in seen:
            continue
        if (
            isinstance(a.lhs, TVar)
            and isinstance(a.rhs, TVar)
            and a.lhs.vid == a.rhs.vid
        ):
            if a.lguard == a.rguard:
                continue
            # A self-guarded variable: hand it back for regrouping.
            return registered + [a] + list(reversed(queue)), a.lhs.vid
        seen.add(a)
        registered.append(a)
        if isinstance(a.rhs, TVar):
            v = a.rhs.vid
            lowers.setdefault(v, []).append(a)
            for up in uppers.get(v, ()):
                queue.extend(_derive(a, up, lattice, nperms))
        if isinstance(a.lhs, TVar):
            v = a.lhs.vid
            uppers.setdefault(v, []).append(a)
            for low in lowers.get(v, ()):
                queue.extend(_derive(low, a, lattice, nperms))
    return registered, None


def _split_var(atoms, vid, ctx: _Ctx, lattice, nperms) -> list[GenConstraint]:
    """Replace ``vid`` by one fresh piece variable per guard-support cell."""
    support = 0
    for a in atoms:
        if isinstance(a.lhs, TVar) and a.lhs.vid == vid:
            support |= a.lguard.support
        if isinstance(a.rhs, TVar) and a.rhs.vid == vid:
            support |= a.rguard.support
    cells = minterms(support)
    piece_of = {sigma.pos: ctx.fresh_piece() for sigma in cells}
    ctx.pieces[vid] = (support, piece_of)

    out: list[GenConstraint] = []
    for a in atoms:
        on_left = isinstance(a.lhs, TVar) and a.lhs.vid == vid
        on_right = isinstance(a.rhs, TVar) and a.rhs.vid == vid
        if not on_left and not on_right:
            out.append(a)
            continue
        if on_left and on_right:
            for q in cells:
                sl = a.lguard.extend(q)
                sr = a.rguard.extend(q)
                if sl.pos == sr.pos:
                    continue
                out.extend(_atomic(
                    GenConstraint(sl, TVar(piece_of[sl.pos]), sr, TVar(piece_of[sr.pos])),
                    lattice, nperms))
        elif on_right:
            for sigma in cells:
                if not sigma.compatible(a.rguard):
                    continue
                delta = sigma.diff(a.rguard)
                out.extend(_atomic(
                    GenConstraint(a.lguard.extend(delta), a.lhs, sigma,
                                  TVar(piece_of[sigma.pos])),
                    lattice, nperms))
        else:
            for sigma in cells:
                if not sigma.compatible(a.lguard):
                    continue
                delta = sigma.diff(a.lguard)
                out.extend(_atomic(
                    GenConstraint(sigma, TVar(piece_of[sigma.pos]),
                                  a.rguard.extend(delta), a.rhs),
                    lattice, nperms))
    return out


# -------------------------------------------------------------- merge/unify

def _bound_roles(atoms):
    """Assign every atom to the variable it bounds.

    Ground bounds attach to their variable; a variable-variable atom is a
    bound of the smaller-id side only, so bound terms always have larger
    ids and are already solved when the sweep reaches their owner.
    """
    lows: dict[int, list[GenConstraint]] = {}
    ups: dict[int, list[GenConstraint]] = {}
    for a in atoms:
        lv = isinstance(a.lhs, TVar)
        rv = isinstance(a.rhs, TVar)
        if lv and rv:
            if a.rhs.vid < a.lhs.vid:
                lows.setdefault(a.rhs.vid, []).append(a)
            else:
                ups.setdefault(a.lhs.vid, []).append(a)
        elif rv:
            lows.setdefault(a.rhs.vid, []).append(a)
        elif lv:
            ups.setdefault(a.lhs.vid, []).append(a)
    return lows, ups


def _sweep(atoms, lattice: Lattice, nperms: int, vids: set[int]):
    """Per-variable merge and unification in decreasing variable order."""
    lows, ups = _bound_roles(atoms)
    size = 1 << nperms
    bot = embed(lattice.bottom, lattice, nperms)
    top = embed(lattice.top, lattice, nperms)
    theta: dict[int, BaseType] = {}
    intervals: list[Interval] = []

    def ground_of(term: Term) -> BaseType:
        if isinstance(term, TGround):
            return term.type
        return theta[term.vid]

    for vid in sorted(vids, reverse=True):
        vlows = lows.get(vid, [])
        vups = ups.get(vid, [])
        table = list(bot.table)
        for a in vlows:
            g = ground_of(a.lhs)
            lg, rg = a.lguard, a.rguard
            for q in range(size):
                p = rg.remap(q)
                table[p] = lattice.join(table[p], g.at(lg.remap(q)))
        t = BaseType(lattice, nperms, tuple(table))
        for a in vups:
            g = ground_of(a.rhs)
            lg, rg = a.lguard, a.rguard
            for q in range(size):
                lo_v = t.at(lg.remap(q))
                hi_v = g.at(rg.remap(q))
                if not lattice.leq(lo_v, hi_v):
                    p = lg.remap(q)
                    raise UnsatError(
                        EMPTY_INTERVAL,
                        f"variable {vid} is forced above its bound at "
                        f"permission set {p}",
                        constraint=a,
                        witness=q,
                        var=vid,
                        guard=lg,
                        lo=t,
                        hi=g,
                    )
        theta[vid] = t
        intervals.extend(_intervals_for(vid, vlows, vups, ground_of, lattice, nperms, bot, top))
    return theta, intervals


def _intervals_for(vid, vlows, vups, ground_of, lattice, nperms, bot, top):
    """Guard-disjoint bound family for one variable, for reporting.

    Cells are the sign assignments over the support of the variable-side
    guards; per cell, active lower bounds join and active upper bounds meet
    after their guards are completed with the cell's surplus literals.
    """
    support = 0
    for a in vlows:
        support |= a.rguard.support
    for a in vups:
        support |= a.lguard.support
    out = []
    for sigma in minterms(support):
        lo = bot
        hi = top
        for a in vlows:
            if sigma.compatible(a.rguard):
                g = ground_of(a.lhs)
                lo = lo.join(apply_trace(g, a.lguard.extend(sigma.diff(a.rguard))))
        for a in vups:
            if sigma.compatible(a.lguard):
                g = ground_of(a.rhs)
                hi = hi.meet(apply_trace(g, a.rguard.extend(sigma.diff(a.lguard))))
        out.append(Interval(vid, sigma, lo, hi))
    return out


def merge_bounds(
    atoms: list[GenConstraint], lattice: Lattice, nperms: int
) -> list[Interval]:
    """Intervals of a saturated atom set (bound terms resolved in id order)."""
    vids = {v for a in atoms for v in term_vars(a.lhs) | term_vars(a.rhs)}
    _, intervals = _sweep(atoms, lattice, nperms, vids)
    return intervals


def unify(intervals: list[Interval], lattice: Lattice, nperms: int) -> dict[int, BaseType]:
    """Least substitution from a guard-disjoint interval family.

    Residual slack variables take the lattice bottom, so each cell
    contributes its lower bound.
    """
    by_var: dict[int, list[Interval]] = {}
    for iv in intervals:
        by_var.setdefault(iv.var, []).append(iv)
    theta = {}
    for vid, ivs in by_var.items():
        table = []
        for pset in range(1 << nperms):
            cell = next(iv for iv in ivs if iv.guard.entailed_by(pset))
            table.append(lattice.meet(cell.lo.at(pset), cell.hi.at(pset)))
        theta[vid] = BaseType(lattice, nperms, tuple(table))
    return theta


# -------------------------------------------------------------------- solve

def _pipeline(constraints, lattice, nperms, requested):
    gens = generalize(constraints)
    atoms = decompose(gens, lattice, nperms)
    vids = {v for a in atoms for v in term_vars(a.lhs) | term_vars(a.rhs)}
    vids |= set(requested)
    ctx = _Ctx(lattice, nperms, max(vids, default=-1) + 1)
    atoms = saturate(atoms, lattice, nperms, ctx)
    sweep_vids = {v for a in atoms for v in term_vars(a.lhs) | term_vars(a.rhs)}
    sweep_vids |= {v for v in vids}
    for _support, piece_of in ctx.pieces.values():
        sweep_vids |= set(piece_of.values())
    sweep_vids -= set(ctx.pieces)  # split parents are reconstituted below
    theta, intervals = _sweep(atoms, lattice, nperms, sweep_vids)

    # Reconstitute split variables cell-wise from their pieces.
    def resolve(vid: int) -> BaseType:
        if vid in theta:
            return theta[vid]
        support, piece_of = ctx.pieces[vid]
        table = []
        for pset in range(1 << nperms):
            piece = resolve(piece_of[pset & support])
            table.append(piece.at(pset))
        t = BaseType(lattice, nperms, tuple(table))
        theta[vid] = t
        return t

    for vid in set(requested) | vids:
        resolve(vid)
    return theta, intervals


def solve(
    constraints,
    lattice: Lattice,
    nperms: int,
    requested: tuple[int, ...] = (),
) -> SolveResult:
    """Least solution of a guarded constraint set, or UnsatError.

    The returned substitution is verified against the original constraints
    by direct evaluation before being handed back; an unsatisfiable set is
    reported with a greedily minimized core.
    """
    constraints = list(constraints)
    try:
        theta, intervals = _pipeline(constraints, lattice, nperms, requested)
    except UnsatError as err:
        err.core = _minimize_core(constraints, lattice, nperms)
        raise
    for c in constraints:
        witness = constraint_witness(c, theta, lattice, nperms)
        if witness is not None:
            raise AssertionError(
                f"solver bug: computed substitution violates {c!r} at {witness}"
            )
    return SolveResult(theta, intervals)


def _minimize_core(constraints, lattice, nperms):
    core = list(constraints)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if _is_unsat(trial, lattice, nperms):
            core = trial
        else:
            i += 1
    return core


def _is_unsat(constraints, lattice, nperms) -> bool:
    try:
        _pipeline(constraints, lattice, nperms, ())
        return False
    except UnsatError:
        return True
