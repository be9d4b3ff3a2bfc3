import os

import pytest

from permflow.inference import InferUnsat, infer_system
from permflow.parser import parse_system
from permflow.system import validate_system

PROGRAMS = os.path.join(os.path.dirname(__file__), "..", "programs")


def load(name: str):
    with open(os.path.join(PROGRAMS, name), "r", encoding="utf-8") as fh:
        return validate_system(parse_system(fh.read()))


def test_annotations_echo_unchanged():
    csys = load("getsecret.pf")
    result = infer_system(csys)
    assert result.ok
    (f,) = result.functions
    assert not f.inferred
    assert f.type == csys.ft["C.getsecret"]
    assert f.constraint_count == 0


def test_mixed_annotations():
    csys = load("mixed_annot.pf")
    result = infer_system(csys)
    assert result.ok
    by_name = {f.function: f for f in result.functions}
    assert not by_name["Lib.double"].inferred
    assert by_name["Use.quad"].inferred
    lat = csys.lattice
    quad = by_name["Use.quad"].type
    from permflow.basetypes import embed

    assert quad.params[0] == embed(lat.level("L"), lat, 1)
    assert quad.ret == embed(lat.level("L"), lat, 1)


def test_unsat_blames_involved_functions():
    src = open(os.path.join(PROGRAMS, "laundering.pf")).read()
    src = src.replace("fun f(x : { {p}: H, _: L }) : L {", "fun f(x) {")
    src = src.replace("fun main() : L {", "fun main() {")
    csys = validate_system(parse_system(src))
    with pytest.raises(InferUnsat) as exc:
        infer_system(csys)
    assert exc.value.functions  # attribution names the offending functions
    assert set(exc.value.functions) <= {"A.f", "M.main"}


def test_bad_annotation_surfaces_in_recheck():
    csys = load("leaky.pf")
    result = infer_system(csys)
    assert not result.ok
    assert [v.function for v in result.recheck.verdicts if not v.ok] == ["A.bad"]


def test_intervals_reported_for_inferred_functions():
    csys = load("illustrative.pf")
    result = infer_system(csys)
    (f,) = result.functions
    assert f.intervals
    # the guard family of the return variable is disjoint and exhaustive
    ret_ivs = [iv for iv in f.intervals]
    for pset in csys.universe.sets():
        assert sum(iv.guard.entailed_by(pset) for iv in ret_ivs) == 1


def test_nonmonotone_policy_inferred():
    csys = load("nonmono.pf")
    result = infer_system(csys)
    ret = result.types()["Ads.anon"].ret
    lat = csys.lattice
    assert ret.at(0) == lat.level("H")  # no permission: data flows
    assert ret.at(1) == lat.level("L")  # permission held: gated off


def test_stage_timings_present():
    csys = load("getinfo.pf")
    result = infer_system(csys)
    assert set(result.stage_timings) == {"generate", "solve", "recheck"}
