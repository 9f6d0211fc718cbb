"""Session-typed mini-Elixir with a runtime fidelity monitor."""

from .diagnostics import Diagnostic, ParseError, TypeCheckError
from .fidelity import fidelity_run, monitor_step
from .parser import parse_module, parse_session_type, print_module, print_session
from .runtime import explore_interleavings, run_session, session_start, system_step
from .semantics import match, reduce_expr, run_term, step_term
from .session import after_env, after_session, dual, session_equal, unfold, well_formed
from .syntax import FunId, Module, bound_vars, free_vars, pattern_vars, substitute, typeof
from .typechecker import check_expr, check_module, check_pattern, check_term

__all__ = [
    "Diagnostic",
    "FunId",
    "Module",
    "ParseError",
    "TypeCheckError",
    "after_env",
    "after_session",
    "bound_vars",
    "check_expr",
    "check_module",
    "check_pattern",
    "check_term",
    "dual",
    "explore_interleavings",
    "fidelity_run",
    "free_vars",
    "match",
    "monitor_step",
    "parse_module",
    "parse_session_type",
    "pattern_vars",
    "print_module",
    "print_session",
    "reduce_expr",
    "run_session",
    "run_term",
    "session_equal",
    "session_start",
    "step_term",
    "substitute",
    "system_step",
    "typeof",
    "unfold",
    "well_formed",
]
