"""Executable noninterference oracle.

For each caller permission set and observer level, enumerates every pair of
initial environments that agree on the variables observable under the
projected typing environment, runs the function body on both, and compares
the returned values. Exhaustive over a small value domain, so a clean
verdict is a real guarantee relative to the fuel bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .basetypes import BaseType, embed
from .interp import DEFAULT_FUEL, ExecContext, Fuel, FuelExhausted, exec_cmd
from .system import CheckedSystem

DEFAULT_PAIR_CAP = 10**6


@dataclass
class NIConfig:
    observer: int  # level id
    domain: tuple[int, ...] = (0, 1, 2)
    fuel: int = DEFAULT_FUEL
    caller_perm_sets: tuple[int, ...] | None = None  # None: all of them
    pair_cap: int = DEFAULT_PAIR_CAP
    strict: bool = False  # also test cells whose return type is unobservable

    def __post_init__(self):
        if len(self.domain) < 2:
            raise ValueError("domain must offer at least two values")


@dataclass
class Violation:
    function: str
    perms: int
    observer: int
    env1: dict[str, int]
    env2: dict[str, int]
    out1: int
    out2: int


@dataclass
class CellVerdict:
    function: str
    perms: int
    observer: int
    pairs_tested: int
    verdict: str  # "ok" | "violation" | "inconclusive" | "skipped"
    witness: Violation | None = None
    note: str = ""


@dataclass
class NIReport:
    cells: list[CellVerdict] = field(default_factory=list)

    @property
    def violations(self) -> list[CellVerdict]:
        return [c for c in self.cells if c.verdict == "violation"]

    @property
    def ok(self) -> bool:
        return not self.violations


def indistinguishable(
    env1: dict[str, int],
    env2: dict[str, int],
    gamma: dict[str, BaseType],
    observer: int,
) -> bool:
    """Environments agree on every variable whose type the observer bounds.

    A variable is observable only when its type sits below the observer
    level at *every* permission set; agreement means both defined and equal
    or both undefined.
    """
    for name, t in gamma.items():
        lat = t.lattice
        bound = embed(observer, lat, t.nperms)
        if t.leq(bound):
            if (name in env1) != (name in env2):
                return False
            if name in env1 and env1[name] != env2[name]:
                return False
    return True


def _observable_split(gamma, perms, observer):
    obs, hidden = [], []
    for name, t in gamma.items():
        if t.lattice.leq(t.at(perms), observer):
            obs.append(name)
        else:
            hidden.append(name)
    return obs, hidden


def nitest_function(csys: CheckedSystem, qname: str, cfg: NIConfig) -> list[CellVerdict]:
    """One verdict per caller permission set for a single observer level."""
    decl = csys.fd[qname]
    ft = csys.ft[qname]
    if ft is None:
        raise ValueError(f"{qname} has no declared or inferred type")
    gamma = dict(zip(decl.params, ft.params))
    gamma[decl.ret_var] = ft.ret

    perm_sets = cfg.caller_perm_sets
    if perm_sets is None:
        perm_sets = tuple(csys.universe.sets())

    lat = csys.lattice
    cells = []
    for perms in perm_sets:
        if not cfg.strict and not lat.leq(ft.ret.at(perms), cfg.observer):
            cells.append(
                CellVerdict(qname, perms, cfg.observer, 0, "skipped",
                            note="return type not observable")
            )
            continue
        cells.append(_test_cell(csys, qname, decl, gamma, perms, cfg))
    return cells


def _test_cell(csys, qname, decl, gamma, perms, cfg: NIConfig) -> CellVerdict:
    obs, hidden = _observable_split(gamma, perms, cfg.observer)
    d = len(cfg.domain)
    pair_count = d ** len(obs) * d ** (2 * len(hidden))
    if pair_count > cfg.pair_cap:
        return CellVerdict(
            qname, perms, cfg.observer, 0, "inconclusive",
            note=f"{pair_count} pairs exceed the cap of {cfg.pair_cap}",
        )

    tested = 0
    inconclusive = 0
    for obs_vals in product(cfg.domain, repeat=len(obs)):
        for hid1 in product(cfg.domain, repeat=len(hidden)):
            for hid2 in product(cfg.domain, repeat=len(hidden)):
                env1 = dict(zip(obs, obs_vals)) | dict(zip(hidden, hid1))
                env2 = dict(zip(obs, obs_vals)) | dict(zip(hidden, hid2))
                tested += 1
                try:
                    out1 = _run(csys, decl, dict(env1), perms, cfg.fuel)
                    out2 = _run(csys, decl, dict(env2), perms, cfg.fuel)
                except FuelExhausted:
                    inconclusive += 1
                    continue
                if out1 != out2:
                    return CellVerdict(
                        qname, perms, cfg.observer, tested, "violation",
                        witness=Violation(
                            qname, perms, cfg.observer, env1, env2, out1, out2
                        ),
                    )
    if inconclusive:
        return CellVerdict(
            qname, perms, cfg.observer, tested, "inconclusive",
            note=f"{inconclusive} pair(s) ran out of fuel",
        )
    return CellVerdict(qname, perms, cfg.observer, tested, "ok")


def _run(csys, decl, env: dict[str, int], perms: int, fuel: int) -> int:
    ctx = ExecContext(decl.app, perms, Fuel(fuel))
    if decl.body is not None:
        exec_cmd(env, ctx, decl.body, csys.system)
    return env[decl.ret_var]


def nitest_system(
    csys: CheckedSystem,
    cfg: NIConfig | None = None,
    observers: tuple[int, ...] | None = None,
    functions: tuple[str, ...] | None = None,
    domain: tuple[int, ...] = (0, 1, 2),
    fuel: int = DEFAULT_FUEL,
    pair_cap: int = DEFAULT_PAIR_CAP,
    strict: bool = False,
) -> NIReport:
    """Test every function over a grid of observers and caller permissions."""
    report = NIReport()
    if observers is None and cfg is None:
        observers = tuple(range(len(csys.lattice)))
    elif observers is None:
        observers = (cfg.observer,)
    for qname in functions or csys.fun_order:
        for obs in observers:
            if cfg is None:
                cell_cfg = NIConfig(obs, domain, fuel, None, pair_cap, strict)
            else:
                cell_cfg = NIConfig(obs, cfg.domain, cfg.fuel,
                                    cfg.caller_perm_sets, cfg.pair_cap, cfg.strict)
            report.cells.extend(nitest_function(csys, qname, cell_cfg))
    return report
