"""Independent oracles and seeded generators used across the test suite.

Nothing here calls into the implementation under test except for AST
constructors, so the oracles stay independent of the code they judge.
"""

from __future__ import annotations

import random
import string

from sessft.syntax import (
    ATOM,
    BOOLEAN,
    NIL,
    NUMBER,
    PID,
    Arm,
    Atom,
    BinOp,
    Bool,
    Branch,
    Call,
    Case,
    CaseBranch,
    Choice,
    Cons,
    End,
    FunDef,
    Let,
    Module,
    Nil,
    Not,
    Num,
    PCons,
    Pid,
    PLit,
    PTuple,
    PVar,
    Rec,
    Receive,
    RecvBranch,
    Send,
    SVar,
    TList,
    TTuple,
    Tuple,
    Var,
)

# ---------------------------------------------------------------------------
# Pattern matching, written clause by clause
# ---------------------------------------------------------------------------

FAIL = object()


def same_literal(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Num):
        return type(a.value) is type(b.value) and a.value == b.value
    if isinstance(a, Bool):
        return a.value is b.value
    if isinstance(a, Atom):
        return a.name == b.name
    if isinstance(a, Pid):
        return a.n == b.n
    return isinstance(a, Nil)


def brute_match_one(p, v):
    """Returns a list of (name, value) pairs or FAIL."""
    if isinstance(p, PLit):
        return [] if same_literal(p.value, v) else FAIL
    if isinstance(p, PVar):
        return [(p.name, v)]
    if isinstance(p, PCons):
        if not isinstance(v, Cons):
            return FAIL
        left = brute_match_one(p.head, v.head)
        right = brute_match_one(p.tail, v.tail)
        if left is FAIL or right is FAIL:
            return FAIL
        return left + right
    if isinstance(p, PTuple):
        if not isinstance(v, Tuple) or len(v.items) != len(p.items):
            return FAIL
        out = []
        for w, x in zip(p.items, v.items):
            r = brute_match_one(w, x)
            if r is FAIL:
                return FAIL
            out += r
        return out
    raise TypeError(p)


def brute_match(patterns, values):
    if len(patterns) != len(values):
        return FAIL
    out = []
    for p, v in zip(patterns, values):
        r = brute_match_one(p, v)
        if r is FAIL:
            return FAIL
        out += r
    return out


# ---------------------------------------------------------------------------
# Duality, structurally
# ---------------------------------------------------------------------------


def oracle_dual(s):
    if isinstance(s, Branch):
        return Choice(tuple(Arm(a.label, a.payloads, oracle_dual(a.cont)) for a in s.arms))
    if isinstance(s, Choice):
        return Branch(tuple(Arm(a.label, a.payloads, oracle_dual(a.cont)) for a in s.arms))
    if isinstance(s, Rec):
        return Rec(s.var, oracle_dual(s.body))
    return s


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

LABELS = ("a", "b", "c", "d", "ping", "pong", "ok")
REC_VARS = ("X", "Y", "Z")
BASE_TYPES = (BOOLEAN, NUMBER, ATOM, PID)


def gen_type(rng: random.Random, depth: int = 2):
    r = rng.random()
    if depth <= 0 or r < 0.6:
        return rng.choice(BASE_TYPES)
    if r < 0.8:
        return TList(gen_type(rng, depth - 1))
    return TTuple(tuple(gen_type(rng, depth - 1) for _ in range(rng.randint(0, 3))))


def gen_session(rng: random.Random, depth: int = 6, max_labels: int = 4):
    """Closed, contractive session with pairwise distinct labels per node."""

    def go(d: int, guarded: tuple[str, ...], unguarded: tuple[str, ...]):
        r = rng.random()
        if d <= 0 or r < 0.12:
            if guarded and rng.random() < 0.6:
                return SVar(rng.choice(guarded))
            return End()
        if r < 0.3:
            var = rng.choice(REC_VARS)
            inner_guarded = tuple(v for v in guarded if v != var)
            return Rec(var, go(d - 1, inner_guarded, unguarded + (var,)))
        labels = rng.sample(LABELS, rng.randint(1, max_labels))
        now_guarded = tuple(dict.fromkeys(guarded + unguarded))
        arms = tuple(
            Arm(l, tuple(gen_type(rng, 1) for _ in range(rng.randint(0, 2))), go(d - 1, now_guarded, ()))
            for l in labels
        )
        return Branch(arms) if rng.random() < 0.5 else Choice(arms)

    return go(depth, (), ())


def gen_basic(rng: random.Random, kind: int | None = None):
    k = rng.randrange(6) if kind is None else kind
    if k == 0:
        return Bool(rng.random() < 0.5)
    if k == 1:
        return Num(rng.randint(-3, 3))
    if k == 2:
        return Num(rng.choice((0.0, 1.5, -2.25, 1.0)))
    if k == 3:
        return Atom(rng.choice(("ok", "a", "b")))
    if k == 4:
        return Pid(rng.choice((2, 3)))
    return NIL


def kind_of(v) -> int | None:
    if isinstance(v, Bool):
        return 0
    if isinstance(v, Num):
        return 1
    if isinstance(v, Atom):
        return 3
    if isinstance(v, Pid):
        return 4
    if isinstance(v, Nil):
        return 5
    return None


def gen_list(rng: random.Random, kind: int | None = None, length: int | None = None):
    """Homogeneous proper list of basic values."""
    kind = rng.randrange(5) if kind is None else kind
    n = rng.randint(0, 3) if length is None else length
    out = NIL
    for _ in range(n):
        out = Cons(gen_basic(rng, kind), out)
    return out


def gen_value(rng: random.Random, depth: int = 2):
    r = rng.random()
    if depth <= 0 or r < 0.5:
        return gen_basic(rng)
    if r < 0.75:
        return Tuple(tuple(gen_value(rng, depth - 1) for _ in range(rng.randint(0, 3))))
    return gen_list(rng, length=rng.randint(1, 3))


def gen_identifier_pattern(rng: random.Random, names: list[str]):
    if rng.random() < 0.55:
        return PVar(names.pop())
    return PLit(gen_basic(rng))


def gen_pattern(rng: random.Random):
    """Pattern with pairwise distinct variables."""
    names = [f"v{i}" for i in range(8)]
    rng.shuffle(names)
    k = rng.randrange(4)
    if k == 0:
        return gen_identifier_pattern(rng, names)
    if k == 1:
        return PTuple(tuple(gen_identifier_pattern(rng, names) for _ in range(rng.randint(0, 3))))
    if k == 2:
        return PCons(gen_identifier_pattern(rng, names), gen_identifier_pattern(rng, names))
    return PLit(gen_basic(rng))


def value_like(rng: random.Random, p):
    """A value that often, but not always, fits the shape of ``p``."""
    if rng.random() < 0.25:
        return gen_value(rng)
    if isinstance(p, PLit):
        return p.value if rng.random() < 0.7 else gen_basic(rng)
    if isinstance(p, PVar):
        return gen_value(rng)
    if isinstance(p, PTuple):
        return Tuple(tuple(value_like(rng, w) for w in p.items))
    head = value_like(rng, p.head) if isinstance(p.head, PLit) else None
    kind = kind_of(head) if head is not None else rng.randrange(5)
    if kind is None:
        return Cons(head, NIL)
    if head is None:
        head = gen_basic(rng, kind)
    if isinstance(p.tail, PLit) and isinstance(p.tail.value, Nil) and rng.random() < 0.7:
        return Cons(head, NIL)
    return Cons(head, gen_list(rng, kind))


def gen_pattern_value_pair(rng: random.Random):
    p = gen_pattern(rng)
    return p, value_like(rng, p)


# -- modules -----------------------------------------------------------------

_IDENTS = [c for c in string.ascii_lowercase if c not in "y"]


class _ModuleGen:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def fresh(self, scope: set[str]) -> str:
        for _ in range(50):
            name = self.rng.choice(_IDENTS) + self.rng.choice(("", "1", "2", "x"))
            if name not in scope:
                return name
        return "z" + str(len(scope))

    def expr(self, scope: set[str], d: int = 2):
        rng = self.rng
        r = rng.random()
        if d <= 0 or r < 0.35:
            if scope and rng.random() < 0.5:
                return Var(rng.choice(sorted(scope)))
            k = rng.randrange(5)
            return (
                Bool(rng.random() < 0.5),
                Num(rng.randint(0, 9)),
                Num(rng.choice((0.5, 2.0, 10.25))),
                Atom(rng.choice(("ok", "done", "x"))),
                NIL,
            )[k]
        if r < 0.6:
            return BinOp(
                rng.choice(("+", "-", "*", "/", "and", "or", "<", ">", "<=", ">=", "==", "!=")),
                self.expr(scope, d - 1),
                self.expr(scope, d - 1),
            )
        if r < 0.7:
            return Not(self.expr(scope, d - 1))
        if r < 0.85:
            return Tuple(tuple(self.expr(scope, d - 1) for _ in range(rng.randint(0, 3))))
        return Cons(self.expr(scope, d - 1), rng.choice((NIL, Cons(self.expr(scope, 0), NIL))))

    def pattern(self, scope: set[str], taken: set[str]):
        rng = self.rng

        def ident():
            if rng.random() < 0.6:
                n = self.fresh(scope | taken)
                taken.add(n)
                return PVar(n)
            return PLit(rng.choice((Num(rng.randint(0, 5)), Atom("ok"), Bool(True), NIL)))

        k = rng.randrange(4)
        if k == 0:
            return ident()
        if k == 1:
            return PTuple(tuple(ident() for _ in range(rng.randint(0, 3))))
        if k == 2:
            return PCons(ident(), ident())
        return PLit(rng.choice((Num(rng.randint(0, 5)), Atom("ok"), Bool(False))))

    def term(self, y: str, scope: set[str], funs: list[tuple[str, int]], d: int):
        rng = self.rng
        r = rng.random()
        if d <= 0 or r < 0.2:
            return self.expr(scope)
        if r < 0.4:
            binder = rng.choice((self.fresh(scope | {y}), "_"))
            bound = self.term(y, scope, funs, d - 1)
            inner = scope | ({binder} if binder != "_" else set())
            return Let(binder, bound, self.term(y, inner, funs, d - 1))
        if r < 0.55:
            return Send(Var(y), rng.choice(LABELS), tuple(self.expr(scope, 1) for _ in range(rng.randint(0, 2))))
        if r < 0.7:
            labels = rng.sample(LABELS, rng.randint(1, 3))
            branches = []
            for l in labels:
                taken: set[str] = set()
                pats = tuple(self.pattern(scope | {y}, taken) for _ in range(rng.randint(0, 2)))
                branches.append(RecvBranch(l, pats, self.term(y, scope | taken, funs, d - 1)))
            return Receive(tuple(branches))
        if r < 0.85:
            branches = []
            for _ in range(rng.randint(1, 3)):
                taken = set()
                pat = self.pattern(scope | {y}, taken)
                branches.append(CaseBranch(pat, self.term(y, scope | taken, funs, d - 1)))
            return Case(self.expr(scope, 1), tuple(branches))
        name, arity = rng.choice(funs)
        return Call(name, (Var(y),) + tuple(self.expr(scope, 1) for _ in range(arity - 1)))

    def module(self) -> Module:
        rng = self.rng
        n = rng.randint(1, 4)
        names = rng.sample(("f", "g", "h", "go", "loop", "serve", "client"), n)
        sigs = [(name, rng.randint(1, 3)) for name in names]
        defs = []
        sessions: list[tuple[str, object]] = []
        for name, arity in sigs:
            public = rng.random() < 0.7
            params = []
            scope: set[str] = set()
            for _ in range(arity - 1):
                p = self.fresh(scope | {"y"})
                scope.add(p)
                params.append(p)
            ptypes = tuple(gen_type(rng, 1) for _ in params)
            body = self.term("y", set(scope), sigs, rng.randint(0, 4))
            session = dual_of = None
            if public:
                if sessions and rng.random() < 0.3:
                    dual_of = rng.choice(sessions)[0]
                    named = next(s for v, s in reversed(sessions) if v == dual_of)
                    session = oracle_dual(named)
                else:
                    session = gen_session(rng, rng.randint(1, 4), 3)
                    if rng.random() < 0.5:
                        session = Rec(rng.choice(REC_VARS), session)
                    if isinstance(session, Rec):
                        sessions.append((session.var, session))
            defs.append(
                FunDef(name, public, "y", tuple(params), ptypes, gen_type(rng, 1), body, session, dual_of)
            )
        return Module(rng.choice(("M", "Demo", "Ping.Pong")), tuple(defs))


def gen_module(rng: random.Random) -> Module:
    return _ModuleGen(rng).module()
