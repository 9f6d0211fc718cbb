"""Small-step labelled transition semantics for closed terms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .session import TAU, Action, CallAct, Input, Output
from .syntax import (
    ARITHMETIC_OPS,
    BOOLEAN_OPS,
    Atom,
    BinOp,
    Bool,
    Call,
    Case,
    Cons,
    Expr,
    FunId,
    Let,
    Nil,
    Not,
    Num,
    Pattern,
    PCons,
    Pid,
    PLit,
    PTuple,
    PVar,
    Receive,
    Send,
    Subst,
    Term,
    Tuple,
    ValueTypeError,
    Var,
    is_finite_number,
    is_value,
    substitute,
    typeof,
    unify,
)
from .typechecker import FunInfo

# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Internal:
    pass


@dataclass(frozen=True, slots=True)
class Deliver:
    label: str
    payload: tuple[Expr, ...] = ()


Stimulus = Union[Internal, Deliver]
INTERNAL = Internal()


@dataclass(frozen=True, slots=True)
class Step:
    action: Action
    next: Term


@dataclass(frozen=True, slots=True)
class Blocked:
    pass


@dataclass(frozen=True, slots=True)
class Done:
    value: Expr


@dataclass(frozen=True, slots=True)
class FuelExhausted:
    pass


@dataclass(frozen=True, slots=True)
class Crashed:
    code: str
    message: str


BLOCKED = Blocked()
FUEL_EXHAUSTED = FuelExhausted()

StepOutcome = Union[Step, Blocked, Done]


class RuntimeFault(Exception):
    def __init__(self, code: str, message: str, term: Term | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.term = term


# ---------------------------------------------------------------------------
# Pattern matching
# ---------------------------------------------------------------------------


def match_one(p: Pattern, v: Expr) -> Subst | None:
    match p:
        case PVar(name):
            return ((name, v),)
        case PLit(b):
            return () if b == v else None
        case PCons(h, t):
            if not isinstance(v, Cons):
                return None
            return _concat((match_one(h, v.head), match_one(t, v.tail)))
        case PTuple(items):
            if not isinstance(v, Tuple) or len(v.items) != len(items):
                return None
            return _concat(match_one(w, x) for w, x in zip(items, v.items))
    raise TypeError(f"not a pattern: {p!r}")


def match(patterns: Iterable[Pattern], values: Iterable[Expr]) -> Subst | None:
    """Pair patterns with values; None when matching fails."""
    patterns, values = tuple(patterns), tuple(values)
    if len(patterns) != len(values):
        return None
    return _concat(match_one(p, v) for p, v in zip(patterns, values))


def _concat(parts) -> Subst | None:
    out: list[tuple[str, Expr]] = []
    for part in parts:
        if part is None:
            return None
        out.extend(part)
    return tuple(out)


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


def values_equal(a: Expr, b: Expr) -> bool:
    """Structural equality where numbers compare numerically."""
    if isinstance(a, Num) and isinstance(b, Num):
        return a.value == b.value
    if isinstance(a, Tuple) and isinstance(b, Tuple):
        return len(a.items) == len(b.items) and all(values_equal(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, Cons) and isinstance(b, Cons):
        return values_equal(a.head, b.head) and values_equal(a.tail, b.tail)
    return a == b


def _order_key(v: Expr):
    match v:
        case Num(x) | Pid(x):
            return (0, x)
        case Bool(x):
            return (0, int(x))
        case Atom(name):
            return (0, name)
        case Nil():
            return (0, ())
        case Cons():
            items = []
            while isinstance(v, Cons):
                items.append(_order_key(v.head))
                v = v.tail
            return (0, tuple(items))
        case Tuple(items):
            return (len(items), tuple(_order_key(x) for x in items))
    raise TypeError(f"not a value: {v!r}")


def _check_number(x: int | float, e: Expr) -> Num:
    if not is_finite_number(x):
        raise RuntimeFault("RUN-OVERFLOW", f"result {x} is out of range", e)
    return Num(x)


def apply_op(op: str, a: Expr, b: Expr) -> Expr:
    e = BinOp(op, a, b)
    if op in ARITHMETIC_OPS:
        if not (isinstance(a, Num) and isinstance(b, Num)):
            raise RuntimeFault("RUN-ARITH", f"{op} needs numbers", e)
        x, y = a.value, b.value
        try:
            if op == "+":
                r = x + y
            elif op == "-":
                r = x - y
            elif op == "*":
                r = x * y
            else:
                if y == 0:
                    raise RuntimeFault("RUN-ARITH", "division by zero", e)
                r = x / y
        except OverflowError:
            raise RuntimeFault("RUN-OVERFLOW", f"{op} overflowed", e) from None
        if isinstance(r, float) and math.isnan(r):
            raise RuntimeFault("RUN-OVERFLOW", f"{op} produced NaN", e)
        return _check_number(r, e)
    if op in BOOLEAN_OPS:
        if not (isinstance(a, Bool) and isinstance(b, Bool)):
            raise RuntimeFault("RUN-ARITH", f"{op} needs booleans", e)
        return Bool(a.value and b.value) if op == "and" else Bool(a.value or b.value)
    try:
        same = unify(typeof(a), typeof(b)) is not None
    except ValueTypeError:
        same = False
    if not same:
        raise RuntimeFault("RUN-COMPARE", f"cannot compare values of different types with {op}", e)
    if op == "==":
        return Bool(values_equal(a, b))
    if op == "!=":
        return Bool(not values_equal(a, b))
    ka, kb = _order_key(a), _order_key(b)
    return Bool({"<": ka < kb, ">": ka > kb, "<=": ka <= kb, ">=": ka >= kb}[op])


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


def pending_receive(t: Term) -> Receive | None:
    """The receive at the evaluation position of ``t``, if any."""
    while isinstance(t, Let) and not is_value(t.bound):
        t = t.bound
    return t if isinstance(t, Receive) else None


class Semantics:
    """The reference transition relation. Subclasses override the hooks."""

    def reduce_expr(self, e: Expr) -> Expr | None:
        """One leftmost step of ``e``; None when ``e`` is already a value."""
        if is_value(e):
            return None
        match e:
            case Var(name):
                raise RuntimeFault("RUN-FREEVAR", f"free variable {name}", e)
            case Not(x):
                if not is_value(x):
                    return Not(self.reduce_expr(x))
                if not isinstance(x, Bool):
                    raise RuntimeFault("RUN-ARITH", "not needs a boolean", e)
                return Bool(not x.value)
            case BinOp(op, l, r):
                if not is_value(l):
                    return BinOp(op, self.reduce_expr(l), r)
                if not is_value(r):
                    return BinOp(op, l, self.reduce_expr(r))
                return apply_op(op, l, r)
            case Cons(h, t):
                if not is_value(h):
                    return Cons(self.reduce_expr(h), t)
                if not is_value(t):
                    return Cons(h, self.reduce_expr(t))
                raise RuntimeFault("RUN-LIST", "improper or heterogeneous list", e)
            case Tuple(items):
                return Tuple(self._reduce_first(items))
        raise RuntimeFault("RUN-STUCK", f"cannot reduce {e!r}", e)

    def _reduce_first(self, items: tuple[Expr, ...]) -> tuple[Expr, ...]:
        for k, x in enumerate(items):
            if not is_value(x):
                return items[:k] + (self.reduce_expr(x),) + items[k + 1 :]
        raise AssertionError("all items are values")

    # hooks

    def let_body(self, binder: str, value: Expr, body: Term) -> Term:
        return substitute(body, ((binder, value),))

    def output_label(self, label: str) -> str:
        return label

    def call_subst(self, info: FunInfo, args: tuple[Expr, ...]) -> Subst:
        return ((info.dual, args[0]),) + tuple(zip(info.params, args[1:]))

    def finish(self, step: Step) -> Step:
        return step

    # relation

    def step(self, sigma: Mapping[FunId, FunInfo], t: Term, stim: Stimulus = INTERNAL) -> StepOutcome:
        out = self._step(sigma, t, stim)
        return self.finish(out) if isinstance(out, Step) else out

    def _step(self, sigma, t: Term, stim: Stimulus) -> StepOutcome:
        match t:
            case Let(x, t1, t2):
                if is_value(t1):
                    return Step(TAU, self.let_body(x, t1, t2))
                inner = self._step(sigma, t1, stim)
                if isinstance(inner, Step):
                    return Step(inner.action, Let(x, inner.next, t2, span=t.span))
                return BLOCKED
            case Send(dest, label, args):
                if not is_value(dest):
                    return Step(TAU, Send(self.reduce_expr(dest), label, args, span=t.span))
                if not all(is_value(a) for a in args):
                    return Step(TAU, Send(dest, label, self._reduce_first(args), span=t.span))
                if not isinstance(dest, Pid):
                    raise RuntimeFault("RUN-BADPID", "message destination is not a pid", t)
                label = self.output_label(label)
                return Step(Output(dest, label, args), Tuple((Atom(label), *args)))
            case Receive(branches):
                if not isinstance(stim, Deliver):
                    return BLOCKED
                for b in branches:
                    if b.label == stim.label:
                        sigma_ = match(b.patterns, stim.payload)
                        if sigma_ is not None:
                            return Step(Input(stim.label, stim.payload), substitute(b.body, sigma_))
                return BLOCKED
            case Call(name, args):
                if not all(is_value(a) for a in args):
                    return Step(TAU, Call(name, self._reduce_first(args), span=t.span))
                fid = FunId(name, len(args))
                info = sigma.get(fid)
                if info is None:
                    raise RuntimeFault("RUN-UNKNOWNFUN", f"unknown function {fid}", t)
                return Step(CallAct(fid), substitute(info.body, self.call_subst(info, args)))
            case Case(e, branches):
                if not is_value(e):
                    return Step(TAU, Case(self.reduce_expr(e), branches, span=t.span))
                for b in branches:
                    sigma_ = match_one(b.pattern, e)
                    if sigma_ is not None:
                        return Step(TAU, substitute(b.body, sigma_))
                raise RuntimeFault("RUN-MATCH", "no case clause matches", t)
        if is_value(t):
            return Done(t) if isinstance(stim, Internal) else BLOCKED
        return Step(TAU, self.reduce_expr(t))


REFERENCE = Semantics()


def reduce_expr(e: Expr) -> Expr | None:
    return REFERENCE.reduce_expr(e)


def step_term(sigma: Mapping[FunId, FunInfo], t: Term, stim: Stimulus = INTERNAL) -> StepOutcome:
    """One transition of closed ``t``; raises :class:`RuntimeFault` on errors."""
    return REFERENCE.step(sigma, t, stim)


def run_term(
    sigma: Mapping[FunId, FunInfo],
    t: Term,
    stimuli: Iterable[Stimulus] = (),
    fuel: int = 1000,
    semantics: Semantics = REFERENCE,
) -> tuple[list[Action], Done | Blocked | Crashed | FuelExhausted]:
    """Iterate steps; a pending receive consumes the next stimulus."""
    trace: list[Action] = []
    feed = iter(stimuli)
    for _ in range(fuel):
        stim: Stimulus = INTERNAL
        if pending_receive(t) is not None:
            stim = next(feed, INTERNAL)
        try:
            out = semantics.step(sigma, t, stim)
        except RuntimeFault as exc:
            return trace, Crashed(exc.code, exc.message)
        if not isinstance(out, Step):
            return trace, out
        trace.append(out.action)
        t = out.next
    if is_value(t):
        return trace, Done(t)
    return trace, FUEL_EXHAUSTED
