"""Operations on session types."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Union

from .diagnostics import Diagnostic, error
from .syntax import (
    Arm,
    Branch,
    Choice,
    End,
    Expr,
    FunId,
    Pid,
    Rec,
    SessionType,
    SVar,
    TList,
    TTuple,
    TUnknown,
    ExprType,
)

# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Output:
    dest: Pid
    label: str
    payload: tuple[Expr, ...] = ()


@dataclass(frozen=True, slots=True)
class Input:
    label: str
    payload: tuple[Expr, ...] = ()


@dataclass(frozen=True, slots=True)
class CallAct:
    fun: FunId


@dataclass(frozen=True, slots=True)
class Tau:
    pass


Action = Union[Output, Input, CallAct, Tau]
TAU = Tau()

SessionEnv = Mapping[FunId, SessionType]


class SessionRebindWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------


def dual(s: SessionType) -> SessionType:
    match s:
        case Branch(arms):
            return Choice(tuple(Arm(a.label, a.payloads, dual(a.cont)) for a in arms))
        case Choice(arms):
            return Branch(tuple(Arm(a.label, a.payloads, dual(a.cont)) for a in arms))
        case Rec(x, body):
            return Rec(x, dual(body))
        case SVar() | End():
            return s
    raise TypeError(f"not a session type: {s!r}")


def session_free_vars(s: SessionType) -> frozenset[str]:
    match s:
        case Branch(arms) | Choice(arms):
            return frozenset().union(*(session_free_vars(a.cont) for a in arms))
        case Rec(x, body):
            return session_free_vars(body) - {x}
        case SVar(name):
            return frozenset((name,))
        case End():
            return frozenset()
    raise TypeError(f"not a session type: {s!r}")


def subst_session(s: SessionType, name: str, replacement: SessionType) -> SessionType:
    """``s[replacement/name]``; ``replacement`` must be closed."""
    match s:
        case SVar(n):
            return replacement if n == name else s
        case End():
            return s
        case Rec(x, body):
            if x == name:
                return s
            return Rec(x, subst_session(body, name, replacement))
        case Branch(arms):
            return Branch(tuple(Arm(a.label, a.payloads, subst_session(a.cont, name, replacement)) for a in arms))
        case Choice(arms):
            return Choice(tuple(Arm(a.label, a.payloads, subst_session(a.cont, name, replacement)) for a in arms))
    raise TypeError(f"not a session type: {s!r}")


def unfold(s: SessionType) -> SessionType:
    """Unfold leading recursion until the head is a communication or ``end``.

    Requires ``s`` closed and contractive.
    """
    while isinstance(s, Rec):
        s = subst_session(s.body, s.var, s)
    if isinstance(s, SVar):
        raise ValueError(f"unbound session variable {s.name}")
    return s


_END_STATE = ("end",)


def _state_graph(s: SessionType) -> tuple[list, int]:
    """Number the nodes of closed ``s``; variables point back at their binder."""
    states: list = []

    def build(t: SessionType, scope: dict[str, int]) -> int:
        i = len(states)
        states.append(None)
        match t:
            case End():
                states[i] = _END_STATE
            case SVar(name):
                if name not in scope:
                    raise ValueError(f"unbound session variable {name}")
                states[i] = ("alias", scope[name])
            case Rec(x, body):
                states[i] = ("alias", build(body, {**scope, x: i}))
            case Branch(arms) | Choice(arms):
                states[i] = (type(t), {a.label: (a.payloads, build(a.cont, scope)) for a in arms})
            case _:
                raise TypeError(f"not a session type: {t!r}")
        return i

    return states, build(s, {})


def _head(states: list, i: int) -> tuple:
    seen = set()
    while states[i][0] == "alias":
        if i in seen:
            raise ValueError("session type is not contractive")
        seen.add(i)
        i = states[i][1]
    return i, states[i]


def session_equal(s1: SessionType, s2: SessionType) -> bool:
    """Equi-recursive equivalence (bisimilarity of the unfolded trees)."""
    g1, r1 = _state_graph(s1)
    g2, r2 = _state_graph(s2)
    assumed: set[tuple[int, int]] = set()
    todo = [(r1, r2)]
    while todo:
        a, b = todo.pop()
        (a, na), (b, nb) = _head(g1, a), _head(g2, b)
        if (a, b) in assumed:
            continue
        assumed.add((a, b))
        if na is _END_STATE or nb is _END_STATE:
            if na is not nb:
                return False
            continue
        if na[0] is not nb[0] or na[1].keys() != nb[1].keys():
            return False
        for label, (payloads, target) in na[1].items():
            other_payloads, other_target = nb[1][label]
            if payloads != other_payloads:
                return False
            todo.append((target, other_target))
    return True


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


def session_problems(s: SessionType) -> list[str]:
    """Well-formedness problems of ``s``, as messages."""
    problems: list[str] = []

    def walk(t: SessionType, bound: frozenset[str]) -> None:
        match t:
            case Branch(arms) | Choice(arms):
                if not arms:
                    problems.append("empty branch or choice")
                labels = [a.label for a in arms]
                for label in sorted({x for x in labels if labels.count(x) > 1}):
                    problems.append(f"duplicate label {label}")
                for a in arms:
                    for p in a.payloads:
                        if _has_unknown(p):
                            problems.append(f"payload type {p} is not concrete")
                    walk(a.cont, bound)
            case Rec(x, body):
                chain = {x}
                inner = body
                while isinstance(inner, Rec):
                    chain.add(inner.var)
                    inner = inner.body
                if isinstance(inner, SVar) and inner.name in chain:
                    problems.append(f"non-contractive recursion on {x}")
                walk(body, bound | {x})
            case SVar(name):
                if name not in bound:
                    problems.append(f"unbound recursion variable {name}")
            case End():
                pass
            case _:
                raise TypeError(f"not a session type: {t!r}")

    walk(s, frozenset())
    return problems


def _has_unknown(t: ExprType) -> bool:
    if isinstance(t, TUnknown):
        return True
    if isinstance(t, TList):
        return _has_unknown(t.elem)
    if isinstance(t, TTuple):
        return any(_has_unknown(x) for x in t.items)
    return False


def well_formed(s: SessionType) -> Diagnostic | None:
    """None if ``s`` is well formed, else a diagnostic naming the first problem."""
    problems = session_problems(s)
    if problems:
        return error("PARSE-SESSION", problems[0])
    return None


# ---------------------------------------------------------------------------
# after
# ---------------------------------------------------------------------------


def after_session(s: SessionType, action: Action) -> SessionType | None:
    """Advance ``s`` past ``action``; None when the action is not permitted."""
    match action:
        case Tau() | CallAct():
            return s
        case Output(_, label, _):
            u = unfold(s)
            if isinstance(u, Choice):
                arm = u.arm(label)
                if arm is not None:
                    return arm.cont
            return None
        case Input(label, _):
            u = unfold(s)
            if isinstance(u, Branch):
                arm = u.arm(label)
                if arm is not None:
                    return arm.cont
            return None
    raise TypeError(f"not an action: {action!r}")


def after_env(delta: SessionEnv, action: Action, s: SessionType) -> dict[FunId, SessionType]:
    """Extend ``delta`` with ``f/n : s`` on a call action; otherwise unchanged.

    Rebinding to an inequivalent session keeps the new binding and warns.
    """
    out = dict(delta)
    if isinstance(action, CallAct):
        old = out.get(action.fun)
        if old is not None and old != s and not session_equal(old, s):
            warnings.warn(
                f"{action.fun} rebound to an inequivalent session",
                SessionRebindWarning,
                stacklevel=2,
            )
        out[action.fun] = s
    return out
