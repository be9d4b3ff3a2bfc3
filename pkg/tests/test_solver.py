import os

import pytest

from permflow.basetypes import embed
from permflow.constraints import (
    Constraint,
    GenConstraint,
    TGround,
    TMerge,
    TVar,
    constraint_holds,
    gen_constraints,
    generalize,
)
from permflow.parser import parse_system
from permflow.solver import (
    EMPTY_INTERVAL,
    GROUND_VIOLATION,
    Interval,
    UnsatError,
    decompose,
    merge_bounds,
    saturate,
    solve,
    unify,
)
from permflow.system import validate_system
from permflow.traces import EPSILON, Trace

from .conftest import bt

PROGRAMS = os.path.join(os.path.dirname(__file__), "..", "programs")


def load(name: str):
    with open(os.path.join(PROGRAMS, name), "r", encoding="utf-8") as fh:
        return validate_system(parse_system(fh.read()))


def _ground(lat, name, nperms):
    return TGround(embed(lat.level(name), lat, nperms))


def test_decompose_illustrative(diamond):
    # splitting the joined write leaves four simple lower bounds on the
    # single variable; the reflexive part drops
    csys = load("illustrative.pf")
    gen = gen_constraints(csys)
    atoms = decompose(generalize(gen.by_function["A.f"]), csys.lattice, 2)
    shapes = set()
    for a in atoms:
        assert isinstance(a.rhs, TVar) and isinstance(a.lhs, TGround)
        shapes.add((
            a.lguard.format(("p", "q")),
            csys.lattice.name(a.lhs.type.at(0)),
            a.rguard.format(("p", "q")),
        ))
    assert shapes == {
        ("+p", "lp", "+p"),
        ("-p", "L", "-p"),
        ("+q", "lq", "+q"),
        ("-q", "L", "-q"),
    }


def test_decompose_refutes_ground(two_point):
    lat = two_point
    gc = GenConstraint(EPSILON, _ground(lat, "H", 1), EPSILON, _ground(lat, "L", 1))
    with pytest.raises(UnsatError) as err:
        decompose([gc], lat, 1)
    assert err.value.kind == GROUND_VIOLATION
    assert err.value.witness is not None


def test_decompose_splits_merge(two_point):
    lat = two_point
    t = _ground(lat, "L", 1)
    rhs = TMerge(0, TVar(0), TVar(1))
    atoms = decompose([GenConstraint(EPSILON, t, EPSILON, rhs)], lat, 1)
    guards = {(a.lguard, a.rguard, a.rhs.vid) for a in atoms}
    assert guards == {
        (Trace(pos=1), Trace(pos=1), 0),
        (Trace(neg=1), Trace(neg=1), 1),
    }


def test_decompose_merge_with_decided_guard(two_point):
    # a guard that already fixes p selects one branch outright
    lat = two_point
    t = _ground(lat, "L", 1)
    rhs = TMerge(0, TVar(0), TVar(1))
    atoms = decompose([GenConstraint(Trace(pos=1), t, Trace(pos=1), rhs)], lat, 1)
    assert len(atoms) == 1 and atoms[0].rhs == TVar(0)


def test_saturate_lower_bounds_only_unchanged():
    csys = load("illustrative.pf")
    gen = gen_constraints(csys)
    atoms = decompose(generalize(gen.by_function["A.f"]), csys.lattice, 2)
    saturated = saturate(list(atoms), csys.lattice, 2)
    assert set(saturated) == set(atoms)


def test_saturate_transitivity_refutes(two_point):
    lat = two_point
    atoms = [
        GenConstraint(EPSILON, _ground(lat, "H", 1), EPSILON, TVar(0)),
        GenConstraint(EPSILON, TVar(0), EPSILON, _ground(lat, "L", 1)),
    ]
    with pytest.raises(UnsatError) as err:
        saturate(atoms, lat, 1)
    assert err.value.kind == GROUND_VIOLATION


def test_saturate_incompatible_guards_add_nothing(two_point):
    lat = two_point
    atoms = [
        GenConstraint(EPSILON, _ground(lat, "H", 1), Trace(pos=1), TVar(0)),
        GenConstraint(Trace(neg=1), TVar(0), EPSILON, _ground(lat, "L", 1)),
    ]
    saturated = saturate(list(atoms), lat, 1)
    assert set(saturated) == set(atoms)


def test_merge_bounds_illustrative_golden():
    # four disjoint guard cells, lower bounds joining the active writes,
    # all upper bounds defaulting to top
    csys = load("illustrative.pf")
    lat = csys.lattice
    gen = gen_constraints(csys)
    atoms = saturate(
        decompose(generalize(gen.by_function["A.f"]), lat, 2), lat, 2
    )
    intervals = merge_bounds(atoms, lat, 2)
    top = embed(lat.top, lat, 2)
    cells = {}
    for iv in intervals:
        assert iv.hi == top
        assert iv.lo.is_constant()
        cells[iv.guard.format(("p", "q"))] = lat.name(iv.lo.at(0))
    assert cells == {
        "+p+q": "H",
        "+p-q": "lp",
        "-p+q": "lq",
        "-p-q": "L",
    }
    # the guard family is disjoint and exhaustive
    for pset in range(4):
        assert sum(iv.guard.entailed_by(pset) for iv in intervals) == 1


def test_merge_bounds_defaults(two_point):
    lat = two_point
    t = bt(lat, "L", "H")
    atoms = [GenConstraint(EPSILON, TGround(t), EPSILON, TVar(0))]
    (iv,) = merge_bounds(atoms, lat, 1)
    assert iv.guard == EPSILON
    assert iv.lo == t
    assert iv.hi == embed(lat.top, lat, 1)


def test_merge_bounds_empty_interval(two_point):
    lat = two_point
    atoms = [
        GenConstraint(EPSILON, _ground(lat, "H", 1), EPSILON, TVar(0)),
        GenConstraint(EPSILON, TVar(0), EPSILON, _ground(lat, "L", 1)),
    ]
    with pytest.raises(UnsatError) as err:
        merge_bounds(atoms, lat, 1)
    assert err.value.kind == EMPTY_INTERVAL
    assert err.value.var == 0 and err.value.witness is not None


def test_unify_from_intervals(two_point):
    lat = two_point
    t = bt(lat, "L", "H")
    ivs = [
        Interval(0, Trace(pos=1), t, embed(lat.top, lat, 1)),
        Interval(0, Trace(neg=1), embed(lat.bottom, lat, 1), embed(lat.top, lat, 1)),
    ]
    theta = unify(ivs, lat, 1)
    assert theta[0] == bt(lat, "L", "H")


def test_solve_illustrative(diamond):
    csys = load("illustrative.pf")
    gen = gen_constraints(csys)
    sig = gen.signatures["A.f"]
    res = solve(gen.all_constraints(), csys.lattice, 2, (sig.ret.vid,))
    assert res.substitution[sig.ret.vid] == bt(csys.lattice, "L", "lp", "lq", "H")


def test_solve_getinfo(diamond):
    csys = load("getinfo.pf")
    gen = gen_constraints(csys)
    sig = gen.signatures["Tracker.getInfo"]
    res = solve(gen.all_constraints(), csys.lattice, 2, (sig.ret.vid,))
    assert res.substitution[sig.ret.vid] == bt(csys.lattice, "L", "L", "H", "l1")


def test_solve_getcontactno(two_point):
    csys = load("getcontactno.pf")
    gen = gen_constraints(csys)
    sig = gen.signatures["Contacts.getContactNo"]
    res = solve(gen.all_constraints(), csys.lattice, 1,
                (sig.ret.vid, sig.params[0].vid))
    lat = csys.lattice
    assert res.substitution[sig.ret.vid] == bt(lat, "L", "H")
    assert res.substitution[sig.params[0].vid] == embed(lat.bottom, lat, 1)


def test_solve_unconstrained_variable(two_point):
    res = solve([], two_point, 1, (0,))
    assert res.substitution[0] == embed(two_point.bottom, two_point, 1)


def test_solve_laundering_variant_unsat():
    # B.g and C.getsecret keep their declared types, A.f is left to the
    # solver: the forwarding makes the set unsatisfiable
    src = open(os.path.join(PROGRAMS, "laundering.pf")).read()
    src = src.replace("fun f(x : { {p}: H, _: L }) : L {", "fun f(x) {")
    src = src.replace("fun main() : L {", "fun main() {")
    csys = validate_system(parse_system(src))
    gen = gen_constraints(csys)
    with pytest.raises(UnsatError) as err:
        solve(gen.all_constraints(), csys.lattice, 1)
    assert err.value.core  # a minimized inconsistent core is attached
    # the core alone is still unsatisfiable
    from permflow.solver import _is_unsat

    assert _is_unsat(err.value.core, csys.lattice, 1)


def test_solution_satisfies_original_set(rng):
    from .diffgen import random_instance
    from permflow.solver import UnsatError

    checked = 0
    for _ in range(120):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            res = solve(constraints, lat, nperms, tuple(range(nvars)))
        except UnsatError:
            continue
        checked += 1
        for c in constraints:
            assert constraint_holds(c, res.substitution, lat, nperms)
    assert checked > 20


def test_solve_idempotent(rng):
    from .diffgen import random_instance

    solved = 0
    for _ in range(60):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            res = solve(constraints, lat, nperms, tuple(range(nvars)))
        except UnsatError:
            continue
        solved += 1
        substituted = [
            Constraint(c.guard, _subst(c.lhs, res.substitution),
                       _subst(c.rhs, res.substitution))
            for c in constraints
        ]
        res2 = solve(substituted, lat, nperms)
        assert res2.substitution == {} or all(
            t == embed(lat.bottom, lat, nperms) for t in res2.substitution.values()
        )
    assert solved > 10


def _subst(term, theta):
    from permflow.constraints import TJoin, TMeet, TMerge, TProj

    if isinstance(term, TVar):
        return TGround(theta[term.vid])
    if isinstance(term, TGround):
        return term
    if isinstance(term, TJoin):
        return TJoin(_subst(term.lhs, theta), _subst(term.rhs, theta))
    if isinstance(term, TMeet):
        return TMeet(_subst(term.lhs, theta), _subst(term.rhs, theta))
    if isinstance(term, TMerge):
        return TMerge(term.perm, _subst(term.then, theta), _subst(term.els, theta))
    if isinstance(term, TProj):
        return TProj(_subst(term.term, theta), term.pset)
    raise TypeError


def test_least_solution_dominated_by_random_solutions(rng):
    # any sampled solution dominates the computed least one pointwise
    from .conftest import random_basetype
    from .diffgen import random_instance

    hits = 0
    for _ in range(150):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            res = solve(constraints, lat, nperms, tuple(range(nvars)))
        except UnsatError:
            continue
        for _ in range(10):
            cand = {v: random_basetype(rng, lat, nperms) for v in range(nvars)}
            if all(constraint_holds(c, cand, lat, nperms) for c in constraints):
                hits += 1
                for v in range(nvars):
                    assert res.substitution[v].leq(cand[v])
    assert hits > 20


def test_substitution_lies_within_reported_intervals(rng):
    # on each guard cell the solved type sits between the cell's bounds
    from .diffgen import random_instance

    solved = 0
    for _ in range(120):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            res = solve(constraints, lat, nperms, tuple(range(nvars)))
        except UnsatError:
            continue
        solved += 1
        for iv in res.intervals:
            t = res.substitution.get(iv.var)
            if t is None:
                continue  # piece variables of a split parent
            for pset in range(1 << nperms):
                if iv.guard.entailed_by(pset):
                    assert lat.leq(iv.lo.at(pset), t.at(pset))
                    assert lat.leq(t.at(pset), iv.hi.at(pset))
    assert solved > 20


def test_decompose_output_is_atomic_and_bounded(rng):
    from .diffgen import random_instance

    for _ in range(150):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            atoms = decompose(generalize(constraints), lat, nperms)
        except UnsatError:
            continue
        for a in atoms:
            assert isinstance(a.lhs, (TVar, TGround))
            assert isinstance(a.rhs, (TVar, TGround))
        # every rewrite strictly shrinks terms, so the atom count is
        # bounded by the total input term size times the merge splits
        assert len(atoms) <= 400


def test_saturation_bounded(rng):
    from .diffgen import random_instance

    for _ in range(60):
        constraints, lat, nperms, nvars = random_instance(rng)
        try:
            atoms = decompose(generalize(constraints), lat, nperms)
            saturated = saturate(atoms, lat, nperms)
        except UnsatError:
            continue
        # the canonical atom space is finite: sides x guard pairs
        assert len(set(saturated)) == len(saturated)
