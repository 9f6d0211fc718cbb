"""Deliberately broken semantics used to show the fidelity monitor has teeth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .semantics import Semantics, Step
from .session import after_env
from .syntax import (
    Branch,
    Case,
    CaseBranch,
    Choice,
    Let,
    Module,
    Pid,
    Rec,
    Receive,
    SessionType,
    Term,
)
from .typechecker import FunInfo


def module_labels(m: Module) -> list[str]:
    labels: set[str] = set()

    def walk(s: SessionType) -> None:
        if isinstance(s, (Branch, Choice)):
            for a in s.arms:
                labels.add(a.label)
                walk(a.cont)
        elif isinstance(s, Rec):
            walk(s.body)

    for d in m.defs:
        if d.session is not None:
            walk(d.session)
    return sorted(labels)


class SwapLabel(Semantics):
    """Sends go out under the next label (cyclically) instead of their own."""

    def __init__(self, labels: list[str]):
        self.labels = labels

    def output_label(self, label: str) -> str:
        if label not in self.labels or len(self.labels) < 2:
            return label + "_swapped"
        return self.labels[(self.labels.index(label) + 1) % len(self.labels)]


class DropBranch(Semantics):
    """Every step loses the last clause of the first receive in the next term."""

    def finish(self, step: Step) -> Step:
        return Step(step.action, _drop(step.next)[0])


def _drop(t: Term) -> tuple[Term, bool]:
    match t:
        case Receive(branches):
            return Receive(branches[:-1], span=t.span), True
        case Let(x, t1, t2):
            t1b, done = _drop(t1)
            if done:
                return Let(x, t1b, t2, span=t.span), True
            t2b, done = _drop(t2)
            return Let(x, t1, t2b, span=t.span), done
        case Case(e, branches):
            for i, b in enumerate(branches):
                body, done = _drop(b.body)
                if done:
                    nb = CaseBranch(b.pattern, body, span=b.span)
                    return Case(e, branches[:i] + (nb,) + branches[i + 1 :], span=t.span), True
    return t, False


class SkipLetSubst(Semantics):
    """The value bound by a let is thrown away instead of substituted."""

    def let_body(self, binder, value, body):
        return body


class WrongPid(Semantics):
    """Function calls receive a pid that belongs to nobody as their peer."""

    WRONG = Pid(1)

    def call_subst(self, info: FunInfo, args):
        return super().call_subst(info, (self.WRONG, *args[1:]))


def no_delta_extension(delta, action, s):
    return dict(delta)


@dataclass(frozen=True)
class Mutation:
    name: str
    description: str
    semantics: Callable[[Module], Semantics]
    env_update: Callable = after_env


MUTATIONS = (
    Mutation("swap-label", "swap the label of each outgoing message", lambda m: SwapLabel(module_labels(m))),
    Mutation("drop-branch", "drop the last clause of a receive", lambda m: DropBranch()),
    Mutation("skip-let-subst", "skip substitution when a let binds a value", lambda m: SkipLetSubst()),
    Mutation("wrong-pid", "instantiate the peer pid of a call with a wrong pid", lambda m: WrongPid()),
    Mutation(
        "no-delta-extension",
        "do not extend the session environment on calls",
        lambda m: Semantics(),
        no_delta_extension,
    ),
)
