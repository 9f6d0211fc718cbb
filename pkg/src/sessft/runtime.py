"""Two-process session simulator with mailboxes and seeded scheduling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from .semantics import (
    INTERNAL,
    REFERENCE,
    Deliver,
    RuntimeFault,
    Semantics,
    Step,
    pending_receive,
)
from .parser import print_expr
from .session import Action, CallAct, Input, Output, Tau
from .syntax import (
    Atom,
    Bool,
    Call,
    Cons,
    Expr,
    FunId,
    Nil,
    Num,
    Pid,
    Term,
    Tuple,
    ValueTypeError,
    is_value,
    list_items,
    typeof,
    unify,
)
from .typechecker import FunInfo

SERVER_PID = Pid(2)
CLIENT_PID = Pid(3)
MASK64 = (1 << 64) - 1

Message = tuple[str, tuple[Expr, ...]]


class SessionStartError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class ProcessState:
    pid: Pid
    fun: FunId
    term: Term
    mailbox: tuple[Message, ...] = ()
    status: str = "running"  # running | blocked | done | crashed
    crash: tuple[str, str] | None = None  # (code, message)

    @property
    def finished(self) -> bool:
        return self.status in ("done", "crashed")


@dataclass(frozen=True, slots=True)
class System:
    server: ProcessState
    client: ProcessState
    trace: tuple[tuple[int, Action], ...] = ()
    seed: int = 0
    steps: int = 0
    rng: int = 0
    last: int | None = None
    sigma: Mapping[FunId, FunInfo] = field(default_factory=dict, compare=False, repr=False)
    semantics: Semantics = field(default=REFERENCE, compare=False, repr=False)

    def process(self, pid: int) -> ProcessState:
        return self.server if pid == self.server.pid.n else self.client

    def peer(self, pid: int) -> ProcessState:
        return self.client if pid == self.server.pid.n else self.server

    def with_process(self, p: ProcessState) -> System:
        if p.pid == self.server.pid:
            return replace(self, server=p)
        return replace(self, client=p)


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------


def splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


POLICIES = ("random", "server-first", "client-first", "round-robin")


def choose(sys: System, candidates: list[ProcessState], policy: str) -> tuple[ProcessState, int]:
    """Pick a candidate; returns it and the new rng state."""
    if len(candidates) == 1 and policy != "random":
        return candidates[0], sys.rng
    match policy:
        case "random":
            rng, z = splitmix64(sys.rng)
            return candidates[z % len(candidates)], rng
        case "server-first":
            return candidates[0], sys.rng
        case "client-first":
            return candidates[-1], sys.rng
        case "round-robin":
            for c in candidates:
                if c.pid.n != sys.last:
                    return c, sys.rng
            return candidates[0], sys.rng
    raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _check_args(sigma, fid: FunId, args: tuple[Expr, ...]) -> FunInfo:
    info = sigma.get(fid)
    if info is None:
        raise SessionStartError(f"unknown function {fid}")
    if len(args) != fid.arity - 1:
        raise SessionStartError(f"{fid} expects {fid.arity - 1} arguments, {len(args)} given")
    for i, (v, want) in enumerate(zip(args, info.param_types), 2):
        try:
            ok = is_value(v) and unify(typeof(v), want) is not None
        except ValueTypeError:
            ok = False
        if not ok:
            raise SessionStartError(f"argument {i} of {fid} must be a value of type {want}")
    return info


def initial_system(
    sigma: Mapping[FunId, FunInfo],
    server_fun: FunId,
    server_args,
    client_fun: FunId,
    client_args,
    seed: int = 0,
    semantics: Semantics = REFERENCE,
) -> System:
    """Both processes poised to call their entry functions."""
    server_args, client_args = tuple(server_args), tuple(client_args)
    _check_args(sigma, server_fun, server_args)
    _check_args(sigma, client_fun, client_args)
    server = ProcessState(SERVER_PID, server_fun, Call(server_fun.name, (CLIENT_PID, *server_args)))
    client = ProcessState(CLIENT_PID, client_fun, Call(client_fun.name, (SERVER_PID, *client_args)))
    return System(server, client, seed=seed, rng=seed & MASK64, sigma=sigma, semantics=semantics)


def session_start(
    sigma: Mapping[FunId, FunInfo],
    server_fun: FunId,
    server_args,
    client_fun: FunId,
    client_args,
    seed: int = 0,
    semantics: Semantics = REFERENCE,
) -> System:
    """Spawn both sides with the peer pid instantiated; the two entry calls are traced."""
    sys = initial_system(sigma, server_fun, server_args, client_fun, client_args, seed, semantics)
    sys, _ = step_process(sys, SERVER_PID.n)
    sys, _ = step_process(sys, CLIENT_PID.n)
    return replace(sys, steps=0, last=None)


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


def _next_message(sys: System, p: ProcessState) -> tuple[int, Step] | None:
    for i, (label, payload) in enumerate(p.mailbox):
        out = sys.semantics.step(sys.sigma, p.term, Deliver(label, payload))
        if isinstance(out, Step):
            return i, out
    return None


def steppable(sys: System, p: ProcessState) -> bool:
    if p.finished:
        return False
    if pending_receive(p.term) is None:
        return True
    return _next_message(sys, p) is not None


def _settle(p: ProcessState) -> ProcessState:
    if p.status in ("crashed", "done"):
        return p
    if is_value(p.term):
        return replace(p, status="done")
    return p


def _refresh(sys: System) -> System:
    out = sys
    for p in (sys.server, sys.client):
        if p.finished:
            continue
        status = "running" if steppable(sys, p) else "blocked"
        if status != p.status:
            out = out.with_process(replace(p, status=status))
    return out


@dataclass(frozen=True, slots=True)
class Transition:
    """What one process did in a system step."""

    pid: int
    before: Term
    step: Step | None
    fault: RuntimeFault | None = None


def step_process(sys: System, pid: int) -> tuple[System, Transition]:
    """Step process ``pid`` once (it must be steppable)."""
    p = sys.process(pid)
    before = p.term
    mailbox = p.mailbox
    try:
        if pending_receive(p.term) is not None:
            found = _next_message(sys, p)
            if found is None:
                raise AssertionError(f"process {pid} is blocked")
            idx, out = found
            mailbox = mailbox[:idx] + mailbox[idx + 1 :]
        else:
            out = sys.semantics.step(sys.sigma, p.term, INTERNAL)
            if not isinstance(out, Step):
                return _refresh(sys.with_process(_settle(p))), Transition(pid, before, None)
        peer = sys.peer(pid)
        if isinstance(out.action, Output):
            if out.action.dest != peer.pid:
                raise RuntimeFault("RUN-BADPID", f"message sent to {out.action.dest} which is not the session peer", p.term)
            peer = replace(peer, mailbox=peer.mailbox + ((out.action.label, out.action.payload),))
    except RuntimeFault as exc:
        crashed = replace(p, status="crashed", crash=(exc.code, exc.message))
        sys = replace(sys.with_process(crashed), steps=sys.steps + 1, last=pid)
        return sys, Transition(pid, before, None, exc)
    p = _settle(replace(p, term=out.next, mailbox=mailbox))
    sys = sys.with_process(p).with_process(peer)
    sys = replace(sys, trace=sys.trace + ((pid, out.action),), steps=sys.steps + 1, last=pid)
    return _refresh(sys), Transition(pid, before, out)


FINISHED = "finished"
DEADLOCK = "deadlock"
CRASHED = "crashed"
FUEL_EXHAUSTED = "fuel_exhausted"


def candidates(sys: System) -> list[ProcessState]:
    return [p for p in (sys.server, sys.client) if steppable(sys, p)]


def system_verdict(sys: System) -> str | None:
    """Terminal verdict of ``sys``, or None while some process can move."""
    if sys.server.status == "crashed" or sys.client.status == "crashed":
        return CRASHED
    if candidates(sys):
        return None
    if sys.server.status == "done" and sys.client.status == "done":
        return FINISHED
    return DEADLOCK


def system_step(sys: System, policy: str = "random") -> System | str:
    """One scheduler step, or the terminal verdict string."""
    return system_step_with(sys, policy)[0]


def system_step_with(sys: System, policy: str = "random") -> tuple[System | str, Transition | None]:
    verdict = system_verdict(sys)
    if verdict is not None:
        return verdict, None
    chosen, rng = choose(sys, candidates(sys), policy)
    return step_process(replace(sys, rng=rng), chosen.pid.n)


def run_session(sys: System, policy: str = "random", fuel: int = 1000) -> tuple[System, str]:
    if fuel < 0:
        raise ValueError("fuel must be non-negative")
    for _ in range(fuel):
        nxt = system_step(sys, policy)
        if isinstance(nxt, str):
            return sys, nxt
        sys = nxt
        if system_verdict(sys) == CRASHED:
            return sys, CRASHED
    verdict = system_verdict(sys)
    return sys, verdict if verdict in (FINISHED, DEADLOCK, CRASHED) else FUEL_EXHAUSTED


def explore_interleavings(
    sigma: Mapping[FunId, FunInfo],
    server_fun: FunId,
    server_args,
    client_fun: FunId,
    client_args,
    depth: int,
) -> set[tuple[tuple[int, Action], ...]]:
    """Every trace reachable in at most ``depth`` scheduler choices.

    Traces start before the two entry calls, so the calls appear as steps.
    """
    if not 0 <= depth <= 20:
        raise ValueError("depth must be between 0 and 20")
    start = initial_system(sigma, server_fun, server_args, client_fun, client_args)
    results: set[tuple[tuple[int, Action], ...]] = set()
    frontier = [start]
    for _ in range(depth):
        nxt = []
        for sys in frontier:
            movers = candidates(sys)
            if not movers or system_verdict(sys) == CRASHED:
                results.add(sys.trace)
                continue
            for p in movers:
                nxt.append(step_process(sys, p.pid.n)[0])
        frontier = nxt
    results.update(s.trace for s in frontier)
    return results


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def value_to_json(v: Expr):
    match v:
        case Bool(b):
            return b
        case Num(x):
            return x
        case Atom(name):
            return {"atom": name}
        case Pid(n):
            return {"pid": n}
        case Nil() | Cons():
            items, _ = list_items(v)
            return [value_to_json(x) for x in items]
        case Tuple(items):
            return {"tuple": [value_to_json(x) for x in items]}
    raise TypeError(f"not a value: {v!r}")


def action_to_json(a: Action) -> dict:
    match a:
        case Output(dest, label, payload):
            return {"kind": "output", "dest": dest.n, "label": label, "payload": [value_to_json(v) for v in payload]}
        case Input(label, payload):
            return {"kind": "input", "label": label, "payload": [value_to_json(v) for v in payload]}
        case CallAct(fun):
            return {"kind": "call", "fun": str(fun)}
        case Tau():
            return {"kind": "tau"}
    raise TypeError(f"not an action: {a!r}")


def format_action(a: Action) -> str:
    match a:
        case Output(dest, label, payload):
            return f"!{print_expr(dest)}{{" + ", ".join([label] + [print_expr(v) for v in payload]) + "}"
        case Input(label, payload):
            return "?{" + ", ".join([label] + [print_expr(v) for v in payload]) + "}"
        case CallAct(fun):
            return f"call {fun}"
        case Tau():
            return "tau"
    raise TypeError(f"not an action: {a!r}")
