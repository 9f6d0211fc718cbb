"""Session typechecking of modules down to single patterns.

The judgement ``check_term(delta, gamma, sigma, y, S, t)`` returns the
expression type of ``t`` and the residual session left after running it.
``y`` names the variable holding the peer pid; for closed runtime terms it
may be the :class:`Pid` value itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .diagnostics import Diagnostic, TypeCheckError, error
from .parser import print_session
from .session import session_equal, unfold
from .syntax import (
    ARITHMETIC_OPS,
    ATOM,
    BOOLEAN,
    BOOLEAN_OPS,
    END,
    NUMBER,
    PID,
    SEQ_BINDER,
    UNKNOWN,
    Atom,
    BinOp,
    Bool,
    Branch,
    Call,
    Case,
    Choice,
    Cons,
    ExprType,
    Expr,
    FunDef,
    FunId,
    Let,
    Module,
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
    SessionType,
    Span,
    TList,
    TTuple,
    TUnknown,
    Term,
    Tuple,
    Var,
    typeof,
    unify,
)

VarEnv = Mapping[str, ExprType]
Identifier = str | Pid


@dataclass(frozen=True, slots=True)
class FunInfo:
    params: tuple[str, ...]
    param_types: tuple[ExprType, ...]
    body: Term
    return_type: ExprType
    dual: str


FunInfoEnv = Mapping[FunId, FunInfo]


@dataclass(frozen=True, slots=True)
class Verdict:
    type: ExprType
    residual: SessionType


def build_details(defs) -> dict[FunId, FunInfo]:
    return {
        d.fun_id: FunInfo(d.params, d.param_types, d.body, d.return_type, d.dual)
        for d in defs
    }


def build_sessions(defs) -> dict[FunId, SessionType]:
    return {d.fun_id: d.session for d in defs if d.public and d.session is not None}


def build_functions(defs) -> frozenset[FunId]:
    return frozenset(d.fun_id for d in defs if d.public)


def _fail(code: str, message: str, span: Span | None, rule: str | None = None):
    raise TypeCheckError(error(code, message, span, rule))


# ---------------------------------------------------------------------------
# Expressions and patterns
# ---------------------------------------------------------------------------


def check_expr(gamma: VarEnv, e: Expr, span: Span | None = None) -> ExprType:
    match e:
        case Nil():
            return TList(UNKNOWN)
        case Bool() | Num() | Atom() | Pid():
            return typeof(e)
        case Var(name):
            if name not in gamma:
                _fail("TYPE-UNBOUND", f"unbound variable {name}", e.span or span, "tVariable")
            return gamma[name]
        case Not(operand):
            t = check_expr(gamma, operand, span)
            if unify(t, BOOLEAN) is None:
                _fail("TYPE-EXPR", f"not expects boolean, got {t}", span, "tNot")
            return BOOLEAN
        case BinOp(op, left, right):
            lt = check_expr(gamma, left, span)
            rt = check_expr(gamma, right, span)
            if op in ARITHMETIC_OPS or op in BOOLEAN_OPS:
                want, rule = (NUMBER, "tArithmetic") if op in ARITHMETIC_OPS else (BOOLEAN, "tBoolean")
                if unify(lt, want) is None or unify(rt, want) is None:
                    _fail("TYPE-EXPR", f"{op} expects {want} operands, got {lt} and {rt}", span, rule)
                return want
            if unify(lt, rt) is None:
                _fail("TYPE-EXPR", f"{op} compares {lt} with {rt}", span, "tComparisons")
            return BOOLEAN
        case Tuple(items):
            return TTuple(tuple(check_expr(gamma, x, span) for x in items))
        case Cons(head, tail):
            ht = check_expr(gamma, head, span)
            tt = check_expr(gamma, tail, span)
            joined = unify(TList(ht), tt)
            if joined is None:
                _fail("TYPE-EXPR", f"cannot put {ht} in front of {tt}", span, "tList")
            return joined
    raise TypeError(f"not an expression: {e!r}")


def check_pattern(y: Identifier, p: Pattern, t: ExprType, span: Span | None = None) -> dict[str, ExprType]:
    """Bindings introduced by matching ``p`` against a value of type ``t``."""
    match p:
        case PVar(name):
            if isinstance(y, str) and name == y:
                _fail("TYPE-SHADOW", f"pattern rebinds the dual pid variable {name}", p.span or span, "tpVariable")
            return {name: t}
        case PLit(Nil()):
            if not isinstance(t, (TList, TUnknown)):
                _fail("TYPE-PATTERN", f"[] cannot match a value of type {t}", span, "tpEList")
            return {}
        case PLit(b):
            if unify(typeof(b), t) is None:
                _fail("TYPE-PATTERN", f"literal of type {typeof(b)} cannot match {t}", span, "tpLiteral")
            return {}
        case PTuple(items):
            if isinstance(t, TUnknown):
                t = TTuple((UNKNOWN,) * len(items))
            if not isinstance(t, TTuple) or len(t.items) != len(items):
                _fail("TYPE-PATTERN", f"tuple pattern of size {len(items)} cannot match {t}", span, "tpTuple")
            return _disjoint([check_pattern(y, w, ti, span) for w, ti in zip(items, t.items)], span)
        case PCons(head, tail):
            if isinstance(t, TUnknown):
                t = TList(UNKNOWN)
            if not isinstance(t, TList):
                _fail("TYPE-PATTERN", f"list pattern cannot match {t}", span, "tpList")
            return _disjoint([check_pattern(y, head, t.elem, span), check_pattern(y, tail, t, span)], span)
    raise TypeError(f"not a pattern: {p!r}")


def _disjoint(envs: list[dict[str, ExprType]], span: Span | None) -> dict[str, ExprType]:
    out: dict[str, ExprType] = {}
    for env in envs:
        for name, t in env.items():
            if name in out and name != "_":
                _fail("TYPE-PATTERN", f"variable {name} bound twice", span)
            out[name] = t
    return out


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


class Checker:
    """Term checker over a fixed Σ, caching private-function bodies."""

    def __init__(self, sigma: FunInfoEnv):
        self.sigma = sigma
        self._calls: dict[tuple, Verdict | Diagnostic] = {}

    def check(
        self,
        delta: Mapping[FunId, SessionType],
        gamma: VarEnv,
        y: Identifier,
        s: SessionType,
        t: Term,
        span: Span | None = None,
    ) -> Verdict:
        span = getattr(t, "span", None) or span
        match t:
            case Let(x, t1, t2):
                if isinstance(y, str) and x == y:
                    _fail("TYPE-SHADOW", f"let rebinds the dual pid variable {x}", span, "tLet")
                first = self.check(delta, gamma, y, s, t1, span)
                inner = gamma if x == SEQ_BINDER else {**gamma, x: first.type}
                return self.check(delta, inner, y, first.residual, t2, span)
            case Send(dest, label, args):
                return self._send(gamma, y, s, dest, label, args, span)
            case Receive(branches):
                return self._receive(delta, gamma, y, s, branches, span)
            case Call(name, args):
                return self._call(delta, gamma, y, s, name, args, span)
            case Case(scrutinee, branches):
                u = check_expr(gamma, scrutinee, span)
                verdicts = []
                for b in branches:
                    bspan = b.span or span
                    env = check_pattern(y, b.pattern, u, bspan)
                    verdicts.append(self.check(delta, {**gamma, **env}, y, s, b.body, bspan))
                return _join(verdicts, span, "tCase")
        return Verdict(check_expr(gamma, t, span), s)

    def _unfold(self, s: SessionType, span: Span | None) -> SessionType:
        try:
            return unfold(s)
        except ValueError as exc:
            _fail("TYPE-SESSION", str(exc), span)

    def _send(self, gamma, y, s, dest, label, args, span) -> Verdict:
        u = self._unfold(s, span)
        if not isinstance(u, Choice):
            _fail("TYPE-CHOICE", f"sending :{label} but the session expects {_describe(u)}", span, "tChoice")
        arm = u.arm(label)
        if arm is None:
            offered = ", ".join(a.label for a in u.arms)
            _fail("TYPE-CHOICE", f"label :{label} not offered by the session choice ({offered})", span, "tChoice")
        if not _is_identifier(dest, y):
            _fail("TYPE-ADDRESSEE", f"message must be sent to the dual pid {_show_id(y)}", span, "tChoice")
        if len(args) != len(arm.payloads):
            _fail(
                "TYPE-PAYLOAD",
                f":{label} carries {len(arm.payloads)} values, {len(args)} given",
                span,
                "tChoice",
            )
        for i, (e, want) in enumerate(zip(args, arm.payloads), 1):
            got = check_expr(gamma, e, span)
            if unify(got, want) is None:
                _fail("TYPE-PAYLOAD", f"payload {i} of :{label} has type {got}, expected {want}", span, "tChoice")
        return Verdict(TTuple((ATOM, *arm.payloads)), arm.cont)

    def _receive(self, delta, gamma, y, s, branches, span) -> Verdict:
        u = self._unfold(s, span)
        if not isinstance(u, Branch):
            _fail("TYPE-BRANCH", f"receive but the session expects {_describe(u)}", span, "tBranch")
        by_label = {b.label: b for b in branches}
        for b in branches:
            if u.arm(b.label) is None:
                _fail("TYPE-BRANCH", f"receive clause :{b.label} is not in the session branch", b.span or span, "tBranch")
        verdicts = []
        for arm in u.arms:
            b = by_label.get(arm.label)
            if b is None:
                _fail("TYPE-BRANCH", f"no receive clause for session branch ?{arm.label}", span, "tBranch")
            bspan = b.span or span
            if len(b.patterns) != len(arm.payloads):
                _fail(
                    "TYPE-PATTERN",
                    f"clause :{arm.label} has {len(b.patterns)} patterns, the session carries {len(arm.payloads)}",
                    bspan,
                    "tBranch",
                )
            env = _disjoint(
                [check_pattern(y, p, ti, bspan) for p, ti in zip(b.patterns, arm.payloads)], bspan
            )
            verdicts.append(self.check(delta, {**gamma, **env}, y, arm.cont, b.body, bspan))
        return _join(verdicts, span, "tBranch")

    def _call(self, delta, gamma, y, s, name, args, span) -> Verdict:
        fid = FunId(name, len(args))
        info = self.sigma.get(fid)
        if info is None:
            arities = sorted(f.arity for f in self.sigma if f.name == name)
            if arities:
                _fail("TYPE-ARITY", f"{name} takes {' or '.join(map(str, arities))} arguments, {len(args)} given", span)
            _fail("TYPE-UNKNOWNFUN", f"unknown function {fid}", span)
        known = fid in delta
        rule = "tRecKnownCall" if known else "tRecUnknownCall"
        if not _is_identifier(args[0], y):
            _fail("TYPE-ADDRESSEE", f"first argument of {fid} must be the dual pid {_show_id(y)}", span, rule)
        for i, (e, want) in enumerate(zip(args[1:], info.param_types), 2):
            got = check_expr(gamma, e, span)
            if unify(got, want) is None:
                _fail("TYPE-ARG", f"argument {i} of {fid} has type {got}, expected {want}", span, rule)
        if known:
            if not session_equal(s, delta[fid]):
                _fail("TYPE-KNOWNCALL", f"{fid} follows a different session than the one expected here", span, rule)
            return Verdict(info.return_type, END)
        key = (fid, s, frozenset(delta.items()))
        cached = self._calls.get(key)
        if cached is None:
            try:
                body = self.check(
                    {**delta, fid: s},
                    {info.dual: PID, **dict(zip(info.params, info.param_types))},
                    info.dual,
                    s,
                    info.body,
                    span,
                )
                if unify(body.type, info.return_type) is None:
                    _fail("TYPE-RETURN", f"{fid} returns {body.type}, declared {info.return_type}", span, rule)
                cached = Verdict(info.return_type, body.residual)
            except TypeCheckError as exc:
                cached = exc.diagnostic
            self._calls[key] = cached
        if isinstance(cached, Diagnostic):
            raise TypeCheckError(cached)
        return cached


def _is_identifier(e: Expr, y: Identifier) -> bool:
    if isinstance(y, Pid):
        return e == y
    return isinstance(e, Var) and e.name == y


def _show_id(y: Identifier) -> str:
    return y if isinstance(y, str) else f"#PID<{y.n}>"


def _describe(u: SessionType) -> str:
    match u:
        case Branch(arms):
            return "a receive of " + ", ".join(f"?{a.label}" for a in arms)
        case Choice(arms):
            return "a send of " + ", ".join(f"!{a.label}" for a in arms)
    return "no further communication"


def _join(verdicts: list[Verdict], span: Span | None, rule: str) -> Verdict:
    t = verdicts[0].type
    residual = verdicts[0].residual
    for v in verdicts[1:]:
        joined = unify(t, v.type)
        if joined is None:
            _fail("TYPE-JOIN", f"branches return {t} and {v.type}", span, rule)
        t = joined
        if not session_equal(residual, v.residual):
            _fail("TYPE-JOIN", "branches leave different residual sessions", span, rule)
    return Verdict(t, residual)


def check_term(
    delta: Mapping[FunId, SessionType],
    gamma: VarEnv,
    sigma: FunInfoEnv,
    y: Identifier,
    s: SessionType,
    t: Term,
) -> Verdict:
    """Type ``t`` against session ``s``; raises :class:`TypeCheckError`."""
    return Checker(sigma).check(delta, gamma, y, s, t)


def check_module(m: Module) -> list[Diagnostic]:
    """Check every public function; returns the diagnostics (empty when well typed)."""
    sigma = build_details(m.defs)
    delta = build_sessions(m.defs)
    checker = Checker(sigma)
    diags = []
    for d in m.defs:
        if d.fun_id not in build_functions(m.defs):
            continue
        try:
            diags.extend(_check_fundef(checker, delta, d))
        except TypeCheckError as exc:
            diags.append(exc.diagnostic)
    return diags


def _check_fundef(checker: Checker, delta, d: FunDef) -> list[Diagnostic]:
    gamma = {d.dual: PID, **dict(zip(d.params, d.param_types))}
    s = delta[d.fun_id]
    v = checker.check(delta, gamma, d.dual, s, d.body, d.span)
    out = []
    if unify(v.type, d.return_type) is None:
        out.append(error("TYPE-RETURN", f"{d.fun_id} returns {v.type}, declared {d.return_type}", d.span, "tModule"))
    if not session_equal(v.residual, END):
        out.append(
            error(
                "TYPE-RESIDUAL",
                f"{d.fun_id} leaves {print_session(v.residual)} unconsumed",
                d.span,
                "tModule",
            )
        )
    return out
