"""Abstract syntax for the session-annotated Elixir fragment.

Every node is a frozen dataclass. Values are the expressions in normal
form (see :func:`is_value`), so substitution can drop them straight into
terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union


class Span(NamedTuple):
    line: int
    col: int
    length: int = 1


def _span() -> Span | None:
    return field(default=None, compare=False, repr=False, kw_only=True)


# ---------------------------------------------------------------------------
# Expression types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TBool:
    def __str__(self) -> str:
        return "boolean"


@dataclass(frozen=True, slots=True)
class TNum:
    def __str__(self) -> str:
        return "number"


@dataclass(frozen=True, slots=True)
class TAtom:
    def __str__(self) -> str:
        return "atom"


@dataclass(frozen=True, slots=True)
class TPid:
    def __str__(self) -> str:
        return "pid"


@dataclass(frozen=True, slots=True)
class TTuple:
    items: tuple[ExprType, ...]

    def __str__(self) -> str:
        return "{" + ", ".join(str(t) for t in self.items) + "}"


@dataclass(frozen=True, slots=True)
class TList:
    elem: ExprType

    def __str__(self) -> str:
        return f"[{self.elem}]"


@dataclass(frozen=True, slots=True)
class TUnknown:
    """Element type of an empty list whose element type is not yet known."""

    def __str__(self) -> str:
        return "any"


ExprType = Union[TBool, TNum, TAtom, TPid, TTuple, TList, TUnknown]

BOOLEAN = TBool()
NUMBER = TNum()
ATOM = TAtom()
PID = TPid()
UNKNOWN = TUnknown()


def unify(a: ExprType, b: ExprType) -> ExprType | None:
    """Most specific type compatible with both, or None.

    ``TUnknown`` (from ``[]``) is compatible with everything.
    """
    if isinstance(a, TUnknown):
        return b
    if isinstance(b, TUnknown):
        return a
    if isinstance(a, TList) and isinstance(b, TList):
        elem = unify(a.elem, b.elem)
        return None if elem is None else TList(elem)
    if isinstance(a, TTuple) and isinstance(b, TTuple):
        if len(a.items) != len(b.items):
            return None
        items = []
        for x, y in zip(a.items, b.items):
            u = unify(x, y)
            if u is None:
                return None
            items.append(u)
        return TTuple(tuple(items))
    return a if a == b else None


# ---------------------------------------------------------------------------
# Expressions and values
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Bool:
    value: bool


@dataclass(frozen=True, slots=True, eq=False)
class Num:
    """Integer or float. Equality is strict: ``Num(1) != Num(1.0)``."""

    value: int | float

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise TypeError(f"Num expects int or float, got {self.value!r}")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Num)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((Num, type(self.value).__name__, self.value))


@dataclass(frozen=True, slots=True)
class Atom:
    name: str


@dataclass(frozen=True, slots=True)
class Pid:
    n: int


@dataclass(frozen=True, slots=True)
class Nil:
    pass


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class Not:
    operand: Expr


ARITHMETIC_OPS = ("+", "-", "*", "/")
BOOLEAN_OPS = ("and", "or")
COMPARISON_OPS = ("<", ">", "<=", ">=", "==", "!=")
OPERATORS = ARITHMETIC_OPS + BOOLEAN_OPS + COMPARISON_OPS


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True, slots=True)
class Cons:
    head: Expr
    tail: Expr


@dataclass(frozen=True, slots=True)
class Tuple:
    items: tuple[Expr, ...]


Basic = Union[Bool, Num, Atom, Pid, Nil]
Expr = Union[Bool, Num, Atom, Pid, Nil, Var, Not, BinOp, Cons, Tuple]
BASIC_TYPES = (Bool, Num, Atom, Pid, Nil)
EXPR_TYPES = (Bool, Num, Atom, Pid, Nil, Var, Not, BinOp, Cons, Tuple)

TRUE = Bool(True)
FALSE = Bool(False)
NIL = Nil()

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


def is_value(e: object) -> bool:
    """True for closed expressions in normal form (including well-formed lists)."""
    if isinstance(e, BASIC_TYPES):
        return True
    if isinstance(e, Tuple):
        return all(is_value(x) for x in e.items)
    if isinstance(e, Cons):
        if not (is_value(e.head) and is_value(e.tail)):
            return False
        if not isinstance(e.tail, (Nil, Cons)):
            return False
        try:
            typeof(e)
        except ValueTypeError:
            return False
        return True
    return False


def from_python(obj: object) -> Expr:
    """Build a value from Python data: lists become proper lists, tuples tuples.

    Strings are atoms; use :class:`Pid` directly for pids.
    """
    if isinstance(obj, bool):
        return Bool(obj)
    if isinstance(obj, (int, float)):
        return Num(obj)
    if isinstance(obj, str):
        return Atom(obj)
    if isinstance(obj, list):
        out: Expr = NIL
        for item in reversed(obj):
            out = Cons(from_python(item), out)
        return out
    if isinstance(obj, tuple):
        return Tuple(tuple(from_python(x) for x in obj))
    if isinstance(obj, BASIC_TYPES + (Cons, Tuple)):
        return obj
    raise TypeError(f"cannot convert {obj!r} to a value")


def list_items(e: Expr) -> tuple[list[Expr], Expr]:
    """Split a cons chain into its items and final tail."""
    items = []
    while isinstance(e, Cons):
        items.append(e.head)
        e = e.tail
    return items, e


# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class PVar:
    name: str
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class PLit:
    value: Basic


@dataclass(frozen=True, slots=True)
class PCons:
    head: PVar | PLit
    tail: PVar | PLit


@dataclass(frozen=True, slots=True)
class PTuple:
    items: tuple[PVar | PLit, ...]


Pattern = Union[PVar, PLit, PCons, PTuple]


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Let:
    binder: str
    bound: Term
    body: Term
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class Send:
    dest: Expr
    label: str
    args: tuple[Expr, ...]
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class RecvBranch:
    label: str
    patterns: tuple[Pattern, ...]
    body: Term
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class Receive:
    branches: tuple[RecvBranch, ...]
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class Call:
    name: str
    args: tuple[Expr, ...]
    span: Span | None = _span()

    @property
    def fun_id(self) -> FunId:
        return FunId(self.name, len(self.args))


@dataclass(frozen=True, slots=True)
class CaseBranch:
    pattern: Pattern
    body: Term
    span: Span | None = _span()


@dataclass(frozen=True, slots=True)
class Case:
    scrutinee: Expr
    branches: tuple[CaseBranch, ...]
    span: Span | None = _span()


Term = Union[Expr, Let, Send, Receive, Call, Case]

# Binder introduced by ``t1; t2`` sequencing. It cannot be read back.
SEQ_BINDER = "_"


# ---------------------------------------------------------------------------
# Session types
# ---------------------------------------------------------------------------


def _memo_hash(self) -> int:
    # Session types are deep and hashed often during equivalence checks.
    h = self._hash
    if h is None:
        h = hash((type(self).__name__, *(getattr(self, f) for f in self.__match_args__)))
        object.__setattr__(self, "_hash", h)
    return h


@dataclass(frozen=True, slots=True)
class Arm:
    label: str
    payloads: tuple[ExprType, ...]
    cont: SessionType
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)
    __hash__ = _memo_hash


@dataclass(frozen=True, slots=True)
class Branch:
    """External choice: ``&{?l(T...).S, ...}``."""

    arms: tuple[Arm, ...]
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)
    __hash__ = _memo_hash

    def arm(self, label: str) -> Arm | None:
        for a in self.arms:
            if a.label == label:
                return a
        return None


@dataclass(frozen=True, slots=True)
class Choice:
    """Internal choice: ``+{!l(T...).S, ...}``."""

    arms: tuple[Arm, ...]
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)
    __hash__ = _memo_hash

    def arm(self, label: str) -> Arm | None:
        for a in self.arms:
            if a.label == label:
                return a
        return None


@dataclass(frozen=True, slots=True)
class Rec:
    var: str
    body: SessionType
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)
    __hash__ = _memo_hash


@dataclass(frozen=True, slots=True)
class SVar:
    name: str


@dataclass(frozen=True, slots=True)
class End:
    pass


SessionType = Union[Branch, Choice, Rec, SVar, End]
END = End()


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------


class FunId(NamedTuple):
    name: str
    arity: int

    def __str__(self) -> str:
        return f"{self.name}/{self.arity}"

    @classmethod
    def parse(cls, text: str) -> FunId:
        name, sep, arity = text.rpartition("/")
        if not sep or not name or not arity.isdigit():
            raise ValueError(f"expected name/arity, got {text!r}")
        return cls(name, int(arity))


@dataclass(frozen=True, slots=True)
class FunDef:
    name: str
    public: bool
    dual: str
    params: tuple[str, ...]
    param_types: tuple[ExprType, ...]
    return_type: ExprType
    body: Term
    session: SessionType | None = None
    # Name of the @session this def's @dual annotation refers to.
    dual_of: str | None = None
    span: Span | None = _span()

    @property
    def arity(self) -> int:
        return 1 + len(self.params)

    @property
    def fun_id(self) -> FunId:
        return FunId(self.name, self.arity)


@dataclass(frozen=True, slots=True)
class Module:
    name: str
    defs: tuple[FunDef, ...] = ()

    def lookup(self, fid: FunId) -> FunDef | None:
        for d in self.defs:
            if d.fun_id == fid:
                return d
        return None


# ---------------------------------------------------------------------------
# Variables and substitution
# ---------------------------------------------------------------------------


def pattern_vars(p: Pattern | tuple[Pattern, ...] | list[Pattern]) -> tuple[str, ...]:
    """Variables of a pattern (or pattern list), left to right, first occurrence."""
    out: dict[str, None] = {}

    def walk(q: Pattern) -> None:
        match q:
            case PVar(name):
                out.setdefault(name)
            case PLit():
                pass
            case PCons(h, t):
                walk(h)
                walk(t)
            case PTuple(items):
                for w in items:
                    walk(w)
            case _:
                raise TypeError(f"not a pattern: {q!r}")

    for q in p if isinstance(p, (tuple, list)) else (p,):
        walk(q)
    return tuple(out)


def free_vars(t: Term) -> frozenset[str]:
    match t:
        case Var(name):
            return frozenset((name,))
        case Bool() | Num() | Atom() | Pid() | Nil():
            return frozenset()
        case Not(e):
            return free_vars(e)
        case BinOp(_, l, r):
            return free_vars(l) | free_vars(r)
        case Cons(h, tl):
            return free_vars(h) | free_vars(tl)
        case Tuple(items):
            return frozenset().union(*(free_vars(e) for e in items))
        case Let(x, t1, t2):
            return free_vars(t1) | (free_vars(t2) - {x})
        case Send(dest, _, args):
            return free_vars(dest).union(*(free_vars(e) for e in args))
        case Receive(branches):
            return frozenset().union(
                *(free_vars(b.body) - set(pattern_vars(b.patterns)) for b in branches)
            )
        case Call(_, args):
            return frozenset().union(*(free_vars(e) for e in args))
        case Case(e, branches):
            return free_vars(e).union(
                *(free_vars(b.body) - set(pattern_vars(b.pattern)) for b in branches)
            )
    raise TypeError(f"not a term: {t!r}")


def bound_vars(t: Term) -> frozenset[str]:
    match t:
        case Let(x, t1, t2):
            return frozenset((x,)) | bound_vars(t1) | bound_vars(t2)
        case Receive(branches):
            return frozenset().union(
                *(bound_vars(b.body) | set(pattern_vars(b.patterns)) for b in branches)
            )
        case Case(_, branches):
            return frozenset().union(
                *(bound_vars(b.body) | set(pattern_vars(b.pattern)) for b in branches)
            )
    if isinstance(t, EXPR_TYPES + (Send, Call)):
        return frozenset()
    raise TypeError(f"not a term: {t!r}")


Subst = tuple[tuple[str, Expr], ...]


def substitute(t: Term, sigma: Subst | dict[str, Expr]) -> Term:
    """Replace free occurrences of variables by closed values.

    Bindings are applied simultaneously; for a repeated name the leftmost
    binding wins. Binders shadow: a let or pattern that rebinds ``x`` stops
    substitution of ``x`` below it. Replacements are closed, so no capture
    can occur.
    """
    if isinstance(sigma, dict):
        mapping = dict(sigma)
    else:
        mapping = {}
        for name, v in sigma:
            mapping.setdefault(name, v)
    if not mapping:
        return t
    return _subst(t, mapping)


def _without(mapping: dict[str, Expr], names) -> dict[str, Expr]:
    if not any(n in mapping for n in names):
        return mapping
    return {k: v for k, v in mapping.items() if k not in names}


def _subst(t: Term, m: dict[str, Expr]) -> Term:
    if not m:
        return t
    match t:
        case Var(name):
            return m.get(name, t)
        case Bool() | Num() | Atom() | Pid() | Nil():
            return t
        case Not(e):
            return Not(_subst(e, m))
        case BinOp(op, l, r):
            return BinOp(op, _subst(l, m), _subst(r, m))
        case Cons(h, tl):
            return Cons(_subst(h, m), _subst(tl, m))
        case Tuple(items):
            return Tuple(tuple(_subst(e, m) for e in items))
        case Let(x, t1, t2):
            return Let(x, _subst(t1, m), _subst(t2, _without(m, (x,))), span=t.span)
        case Send(dest, label, args):
            return Send(
                _subst(dest, m), label, tuple(_subst(e, m) for e in args), span=t.span
            )
        case Receive(branches):
            return Receive(
                tuple(
                    RecvBranch(
                        b.label,
                        b.patterns,
                        _subst(b.body, _without(m, pattern_vars(b.patterns))),
                        span=b.span,
                    )
                    for b in branches
                ),
                span=t.span,
            )
        case Call(name, args):
            return Call(name, tuple(_subst(e, m) for e in args), span=t.span)
        case Case(e, branches):
            return Case(
                _subst(e, m),
                tuple(
                    CaseBranch(
                        b.pattern,
                        _subst(b.body, _without(m, pattern_vars(b.pattern))),
                        span=b.span,
                    )
                    for b in branches
                ),
                span=t.span,
            )
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Value typing
# ---------------------------------------------------------------------------


class ValueTypeError(Exception):
    """A value that has no expression type (e.g. a heterogeneous list)."""


def typeof(v: Expr) -> ExprType:
    """Type of a closed value. ``[]`` types as ``[any]``."""
    match v:
        case Bool():
            return BOOLEAN
        case Num():
            return NUMBER
        case Atom():
            return ATOM
        case Pid():
            return PID
        case Nil():
            return TList(UNKNOWN)
        case Tuple(items):
            return TTuple(tuple(typeof(x) for x in items))
        case Cons(h, tl):
            tail_type = typeof(tl)
            if not isinstance(tail_type, TList):
                raise ValueTypeError(f"improper list tail of type {tail_type}")
            elem = unify(typeof(h), tail_type.elem)
            if elem is None:
                raise ValueTypeError(
                    f"heterogeneous list: {typeof(h)} vs {tail_type.elem}"
                )
            return TList(elem)
    raise ValueTypeError(f"not a value: {v!r}")


def is_finite_number(x: int | float) -> bool:
    if isinstance(x, int):
        return INT_MIN <= x <= INT_MAX
    return math.isfinite(x)
