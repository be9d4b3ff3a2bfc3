"""Permission-dependent information-flow analysis toolkit.

Security types map permission sets to lattice levels, so what a function
reveals can depend on the permissions of its caller. The package bundles a
type checker for annotated systems, a constraint-based inference engine
with an independent semantic oracle, a reference interpreter, and an
executable noninterference test harness, all behind the ``permflow`` CLI.
"""

from .basetypes import (
    BaseType,
    FunctionType,
    PermUniverse,
    UniverseMismatch,
    UnknownPermission,
    embed,
    format_function_type,
    format_type,
    merge,
)
from .inference import InferResult, InferUnsat, infer_system
from .interp import DEFAULT_FUEL, FuelExhausted, call_function, eval_expr, exec_cmd
from .lattice import (
    CycleInOrder,
    Lattice,
    LatticeError,
    NotALattice,
    UnknownLevelName,
    load_lattice,
)
from .nitest import NIConfig, NIReport, Violation, indistinguishable, nitest_function, nitest_system
from .oracle import OracleUnsat, UniverseTooLarge, oracle_solve
from .parser import ParseError, parse_system
from .solver import Interval, UnsatError, decompose, merge_bounds, saturate, solve, unify
from .system import (
    CheckedSystem,
    RecursiveCall,
    System,
    ValidationError,
    to_source,
    validate_system,
)
from .traces import EPSILON, InconsistentTrace, Trace, TraceFormula, apply_trace, trace_of_set
from .typecheck import CheckReport, TypeViolation, check_function, check_system

__all__ = [
    "BaseType", "FunctionType", "PermUniverse", "UniverseMismatch",
    "UnknownPermission", "embed", "merge", "format_type", "format_function_type",
    "InferResult", "InferUnsat", "infer_system",
    "DEFAULT_FUEL", "FuelExhausted", "call_function", "eval_expr", "exec_cmd",
    "CycleInOrder", "Lattice", "LatticeError", "NotALattice",
    "UnknownLevelName", "load_lattice",
    "NIConfig", "NIReport", "Violation", "indistinguishable",
    "nitest_function", "nitest_system",
    "OracleUnsat", "UniverseTooLarge", "oracle_solve",
    "ParseError", "parse_system",
    "Interval", "UnsatError", "decompose", "merge_bounds", "saturate",
    "solve", "unify",
    "CheckedSystem", "RecursiveCall", "System", "ValidationError",
    "to_source", "validate_system",
    "EPSILON", "InconsistentTrace", "Trace", "TraceFormula", "apply_trace",
    "trace_of_set",
    "CheckReport", "TypeViolation", "check_function", "check_system",
]

__version__ = "0.1.0"
