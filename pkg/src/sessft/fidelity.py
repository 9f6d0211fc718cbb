"""Runtime monitor checking session fidelity on every transition.

Each process carries a :class:`MonitorState`. A transition is accepted when
``after`` is defined on its action and the continuation still typechecks
against the advanced session; otherwise a :class:`Violation` is recorded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .diagnostics import Diagnostic, TypeCheckError, error, warning
from .parser import print_session
from .runtime import (
    CLIENT_PID,
    CRASHED,
    FUEL_EXHAUSTED,
    SERVER_PID,
    System,
    Transition,
    action_to_json,
    initial_system,
    step_process,
    system_step_with,
    system_verdict,
)
from .semantics import REFERENCE, Semantics, Step
from .session import (
    Action,
    SessionRebindWarning,
    after_env,
    after_session,
    dual,
    session_equal,
)
from .syntax import END, ExprType, FunId, Module, Pid, SessionType, Term, free_vars, unify
from .typechecker import Checker, build_details, build_sessions, check_module

EnvUpdate = Callable[[Mapping[FunId, SessionType], Action, SessionType], dict]

AFTER_UNDEFINED = "after-undefined"
RETYPE_FAILED = "retype-failed"
CLOSEDNESS_FAILED = "closedness-failed"


@dataclass(frozen=True, slots=True)
class MonitorState:
    delta: tuple[tuple[FunId, SessionType], ...]
    session: SessionType
    type: ExprType
    final: SessionType
    peer: Pid

    @property
    def env(self) -> dict[FunId, SessionType]:
        return dict(self.delta)


@dataclass(frozen=True, slots=True)
class Violation:
    step: int
    action: Action
    reason: str
    diagnostic: Diagnostic | None = None
    message: str = ""


@dataclass(frozen=True, slots=True)
class FidelityReport:
    fun: FunId
    pid: int
    steps: int
    verdict: str  # holds | violated
    violation: Violation | None = None
    session: SessionType | None = None


@dataclass(frozen=True, slots=True)
class FidelityRun:
    reports: tuple[FidelityReport, ...]
    system_steps: int
    outcome: str | None
    warnings: tuple[Diagnostic, ...] = ()

    @property
    def holds(self) -> bool:
        return all(r.verdict == "holds" for r in self.reports)


class Monitor:
    """Fidelity monitor over one Σ; caches retyping results."""

    def __init__(self, sigma, env_update: EnvUpdate = after_env):
        self.checker = Checker(sigma)
        self.env_update = env_update
        self._cache: dict[tuple, Diagnostic | None] = {}

    def retype(self, ms: MonitorState, t: Term) -> Diagnostic | None:
        key = (t, ms.session, ms.delta)
        if key in self._cache:
            return self._cache[key]
        try:
            v = self.checker.check(ms.env, {}, ms.peer, ms.session, t)
            if unify(v.type, ms.type) is None:
                diag = error("TYPE-RETURN", f"term now has type {v.type}, expected {ms.type}")
            elif not session_equal(v.residual, ms.final):
                diag = error("TYPE-RESIDUAL", f"term now leaves {print_session(v.residual)}")
            else:
                diag = None
        except TypeCheckError as exc:
            diag = exc.diagnostic
        self._cache[key] = diag
        return diag

    def step(self, ms: MonitorState, index: int, step: Step) -> MonitorState | Violation:
        s2 = after_session(ms.session, step.action)
        if s2 is None:
            return Violation(index, step.action, AFTER_UNDEFINED, None, f"action not permitted by {print_session(ms.session)}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SessionRebindWarning)
            delta2 = self.env_update(ms.env, step.action, ms.session)
        free = free_vars(step.next)
        if free:
            return Violation(index, step.action, CLOSEDNESS_FAILED, None, "free variables " + ", ".join(sorted(free)))
        nxt = replace(ms, delta=tuple(sorted(delta2.items())), session=s2)
        diag = self.retype(nxt, step.next)
        if diag is not None:
            return Violation(index, step.action, RETYPE_FAILED, diag, diag.message)
        return nxt


def monitor_step(
    ms: MonitorState,
    t: Term,
    step: Step,
    sigma,
    index: int = 0,
    env_update: EnvUpdate = after_env,
) -> MonitorState | Violation:
    """Check one transition ``t --action--> next`` against ``ms``."""
    return Monitor(sigma, env_update).step(ms, index, step)


class IllTypedModule(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("module is not well typed")
        self.diagnostics = diagnostics


def fidelity_run(
    m: Module,
    server_fun: FunId,
    server_args,
    client_fun: FunId,
    client_args,
    seed: int = 0,
    fuel: int = 200,
    policy: str = "random",
    semantics: Semantics = REFERENCE,
    env_update: EnvUpdate = after_env,
) -> FidelityRun:
    """Run a session and monitor both processes on every step."""
    diags = check_module(m)
    if diags:
        raise IllTypedModule(diags)
    sigma = build_details(m.defs)
    delta = build_sessions(m.defs)
    for fid in (server_fun, client_fun):
        if fid not in delta:
            raise ValueError(f"{fid} is not an annotated public function")
    notes: list[Diagnostic] = []
    if not session_equal(delta[client_fun], dual(delta[server_fun])):
        notes.append(warning("WARN-NONDUAL", f"{client_fun} does not follow the dual of {server_fun}"))

    monitor = Monitor(sigma, env_update)
    items = tuple(sorted(delta.items()))
    state: dict[int, MonitorState | Violation] = {}
    steps = {SERVER_PID.n: 0, CLIENT_PID.n: 0}
    funs = {SERVER_PID.n: server_fun, CLIENT_PID.n: client_fun}
    for pid, peer, fid in ((SERVER_PID, CLIENT_PID, server_fun), (CLIENT_PID, SERVER_PID, client_fun)):
        state[pid.n] = MonitorState(items, delta[fid], sigma[fid].return_type, END, peer)

    def observe(tr: Transition) -> None:
        ms = state[tr.pid]
        if isinstance(ms, Violation) or tr.step is None:
            return
        steps[tr.pid] += 1
        state[tr.pid] = monitor.step(ms, steps[tr.pid], tr.step)

    sys: System = initial_system(sigma, server_fun, server_args, client_fun, client_args, seed, semantics)
    for pid in (SERVER_PID.n, CLIENT_PID.n):
        sys, tr = step_process(sys, pid)
        observe(tr)
    sys = replace(sys, steps=0, last=None)

    outcome = None
    for _ in range(fuel):
        nxt, tr = system_step_with(sys, policy)
        if isinstance(nxt, str):
            outcome = nxt
            break
        sys = nxt
        observe(tr)
        if system_verdict(sys) == CRASHED:
            outcome = CRASHED
            break
    else:
        outcome = system_verdict(sys) or FUEL_EXHAUSTED

    reports = []
    for pid in (SERVER_PID.n, CLIENT_PID.n):
        ms = state[pid]
        if isinstance(ms, Violation):
            reports.append(FidelityReport(funs[pid], pid, steps[pid], "violated", ms))
        else:
            reports.append(FidelityReport(funs[pid], pid, steps[pid], "holds", None, ms.session))
    return FidelityRun(tuple(reports), sys.steps, outcome, tuple(notes))


def report_to_json(r: FidelityReport) -> dict:
    out = {
        "fun": str(r.fun),
        "pid": r.pid,
        "steps": r.steps,
        "verdict": r.verdict,
        "violation": None,
    }
    if r.violation is not None:
        v = r.violation
        out["violation"] = {
            "step": v.step,
            "action": action_to_json(v.action),
            "reason": v.reason,
            "diagnostic": v.diagnostic.to_json() if v.diagnostic else None,
            "message": v.message,
        }
    return out
