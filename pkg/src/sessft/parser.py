"""Recursive descent parsing and printing of ``.exst`` sources.

The surface language is a small subset of Elixir::

    defmodule Counter do
      @session "?inc(number).!total(number)"
      @spec serve(pid, number) :: atom
      def serve(pid, base) do
        receive do
          {:inc, n} ->
            send(pid, {:total, base + n})
            :ok
        end
      end
    end

Statements are separated by newlines or ``;``. ``x = t`` followed by more
statements becomes a let; a bare statement ``t`` followed by more becomes a
let with the unreadable binder ``_``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterator

from .diagnostics import Diagnostic, ParseError, error
from .session import dual, session_problems
from .syntax import (
    ATOM,
    BOOLEAN,
    NIL,
    NUMBER,
    PID,
    SEQ_BINDER,
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
    Expr,
    ExprType,
    FunDef,
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
    Rec,
    Receive,
    RecvBranch,
    Send,
    SessionType,
    Span,
    SVar,
    TBool,
    TList,
    TNum,
    TAtom,
    TPid,
    TTuple,
    TUnknown,
    Term,
    Tuple,
    Var,
    free_vars,
    is_value,
    list_items,
    pattern_vars,
)

KEYWORDS = frozenset(
    {
        "defmodule", "def", "defp", "do", "end", "receive", "case", "send",
        "true", "false", "and", "or", "not", "when", "fn", "nil", "after",
    }
)

TYPE_NAMES: dict[str, ExprType] = {
    "boolean": BOOLEAN,
    "number": NUMBER,
    "atom": ATOM,
    "pid": PID,
}

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # NAME MOD ATOM INT FLOAT STRING ATTR OP KW EOF
    text: str
    line: int
    col: int
    nl_before: bool = False

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, max(1, len(self.text)))


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<FLOAT>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<INT>\d+)
  | (?P<ATOM>:""" + IDENT + r""")
  | (?P<ATTR>@[a-z_]+)
  | (?P<STRING>"[^"\n]*")
  | (?P<MOD>[A-Z][A-Za-z0-9_]*(?:\.[A-Z][A-Za-z0-9_]*)*)
  | (?P<NAME>""" + IDENT + r""")
  | (?P<OP>->|::|==|!=|<=|>=|[|(){}\[\],=<>+\-*/;])
    """,
    re.VERBOSE,
)


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos, nl = 1, 0, 0, True
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(
                [error("PARSE-SYNTAX", f"unexpected character {src[pos]!r}", Span(line, col))]
            )
        kind = m.lastgroup
        text = m.group()
        pos = m.end()
        if kind == "nl":
            line, line_start, nl = line + 1, pos, True
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "NAME" and text in KEYWORDS:
            kind = "KW"
        tokens.append(Token(kind, text, line, col, nl))
        nl = False
    tokens.append(Token("EOF", "", line, pos - line_start + 1, True))
    return tokens


# ---------------------------------------------------------------------------
# Session type strings
# ---------------------------------------------------------------------------

_SESSION_TOKEN_RE = re.compile(r"\s*(?:(" + IDENT + r")|(.))")


class _SessionParser:
    def __init__(self, text: str, origin: Span | None):
        self.text = text
        self.origin = origin
        self.toks: list[tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            m = _SESSION_TOKEN_RE.match(text, pos)
            if m is None or m.lastindex is None:
                break
            self.toks.append((m.group(m.lastindex), m.start(m.lastindex)))
            pos = m.end()
        self.i = 0

    def span(self, offset: int | None = None) -> Span | None:
        if offset is None:
            offset = self.toks[self.i][1] if self.i < len(self.toks) else len(self.text)
        if self.origin is None:
            return Span(1, offset + 1)
        return Span(self.origin.line, self.origin.col + 1 + offset)

    def fail(self, msg: str) -> ParseError:
        return ParseError([error("PARSE-SESSION", msg, self.span())])

    def peek(self, k: int = 0) -> str | None:
        j = self.i + k
        return self.toks[j][0] if j < len(self.toks) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            want = expected or "a token"
            raise self.fail(f"expected {want}, found {tok or 'end of input'}")
        self.i += 1
        return tok

    def ident(self, what: str) -> str:
        tok = self.peek()
        if tok is None or not re.fullmatch(IDENT, tok):
            raise self.fail(f"expected {what}, found {tok or 'end of input'}")
        self.i += 1
        return tok

    def top(self) -> SessionType:
        if self.peek(1) == "=" and self.peek() not in ("end", "rec"):
            var = self.ident("recursion variable")
            self.take("=")
            s: SessionType = Rec(var, self.session())
        else:
            s = self.session()
        if self.peek() is not None:
            raise self.fail(f"unexpected {self.peek()!r}")
        return s

    def session(self) -> SessionType:
        tok = self.peek()
        if tok == "end":
            self.i += 1
            return End()
        if tok == "rec":
            self.i += 1
            var = self.ident("recursion variable")
            self.take(".")
            return Rec(var, self.session())
        if tok == "(":
            self.i += 1
            s = self.session()
            self.take(")")
            return s
        if tok in ("&", "+"):
            self.i += 1
            self.take("{")
            prefix = "?" if tok == "&" else "!"
            arms = [self.arm(prefix)]
            while self.peek() == ",":
                self.i += 1
                arms.append(self.arm(prefix))
            self.take("}")
            return Branch(tuple(arms)) if tok == "&" else Choice(tuple(arms))
        if tok == "?":
            return Branch((self.arm("?"),))
        if tok == "!":
            return Choice((self.arm("!"),))
        if tok is not None and re.fullmatch(IDENT, tok):
            self.i += 1
            return SVar(tok)
        raise self.fail(f"expected a session type, found {tok or 'end of input'}")

    def arm(self, prefix: str) -> Arm:
        self.take(prefix)
        label = self.ident("label")
        self.take("(")
        payloads: list[ExprType] = []
        if self.peek() != ")":
            payloads.append(self.type())
            while self.peek() == ",":
                self.i += 1
                payloads.append(self.type())
        self.take(")")
        cont: SessionType = End()
        if self.peek() == ".":
            self.i += 1
            cont = self.session()
        return Arm(label, tuple(payloads), cont)

    def type(self) -> ExprType:
        tok = self.peek()
        if tok == "[":
            self.i += 1
            elem = self.type()
            self.take("]")
            return TList(elem)
        if tok == "{":
            self.i += 1
            items: list[ExprType] = []
            if self.peek() != "}":
                items.append(self.type())
                while self.peek() == ",":
                    self.i += 1
                    items.append(self.type())
            self.take("}")
            return TTuple(tuple(items))
        if tok in TYPE_NAMES:
            self.i += 1
            if self.peek() == "(" and self.peek(1) == ")":
                self.i += 2
            return TYPE_NAMES[tok]
        raise self.fail(f"unknown payload type {tok or 'end of input'}")


def parse_session_type(text: str, origin: Span | None = None) -> SessionType:
    """Parse and validate a session type string; raises :class:`ParseError`."""
    p = _SessionParser(text, origin)
    s = p.top()
    problems = session_problems(s)
    if problems:
        raise ParseError([error("PARSE-SESSION", problems[0], p.span(0))])
    return s


# ---------------------------------------------------------------------------
# Source parser
# ---------------------------------------------------------------------------


class _Fail(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


BINARY_PREC = {
    "or": 1,
    "and": 2,
    "==": 3,
    "!=": 3,
    "<": 4,
    ">": 4,
    "<=": 4,
    ">=": 4,
    "+": 5,
    "-": 5,
    "*": 6,
    "/": 6,
}
UNARY_PREC = 7


@dataclass
class _Pending:
    session: tuple[str, str, Span] | None = None  # (kind, text, span)
    spec: tuple[str, tuple[ExprType, ...], ExprType, Span] | None = None


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind in ("OP", "KW") and tok.text == text

    def advance(self) -> Token:
        tok = self.peek()
        self.i = min(self.i + 1, len(self.toks) - 1)
        return tok

    def fail(self, msg: str, tok: Token | None = None) -> _Fail:
        tok = tok or self.peek()
        found = tok.text or "end of input"
        return _Fail(error("PARSE-SYNTAX", f"{msg}, found {found!r}", tok.span))

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail(f"expected {text!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.peek().kind != kind:
            raise self.fail(f"expected {what}")
        return self.advance()

    def attempt(self, fn: Callable[[], object]) -> object | None:
        save = self.i
        try:
            return fn()
        except _Fail:
            self.i = save
            return None

    # -- module ------------------------------------------------------------

    def module(self) -> tuple[str, list[tuple[FunDef | None, _Pending, Token, list]]]:
        self.expect("defmodule")
        name = self.expect_kind("MOD", "module name").text
        self.expect("do")
        items = []
        pending = _Pending()
        while not self.at("end"):
            tok = self.peek()
            if tok.kind == "ATTR":
                self.annotation(pending)
            elif self.at("def") or self.at("defp"):
                items.append(self.definition(pending))
                pending = _Pending()
            else:
                raise self.fail("expected def, defp or an annotation")
        if pending.session or pending.spec:
            raise self.fail("annotation not followed by a definition")
        self.expect("end")
        if self.peek().kind != "EOF":
            raise self.fail("expected end of input after module")
        return name, items

    def annotation(self, pending: _Pending) -> None:
        tok = self.advance()
        if tok.text in ("@session", "@dual"):
            s = self.expect_kind("STRING", "a string")
            if pending.session is not None:
                raise _Fail(error("PARSE-SYNTAX", "two session annotations on one definition", tok.span))
            pending.session = (tok.text[1:], s.text[1:-1], s.span)
        elif tok.text == "@spec":
            name = self.expect_kind("NAME", "function name").text
            self.expect("(")
            types = []
            if not self.at(")"):
                types.append(self.spec_type())
                while self.at(","):
                    self.advance()
                    types.append(self.spec_type())
            self.expect(")")
            self.expect("::")
            ret = self.spec_type()
            if pending.spec is not None:
                raise _Fail(error("PARSE-SYNTAX", "two @spec annotations on one definition", tok.span))
            pending.spec = (name, tuple(types), ret, tok.span)
        else:
            raise _Fail(error("PARSE-SYNTAX", f"unknown annotation {tok.text}", tok.span))

    def spec_type(self) -> ExprType:
        if self.at("["):
            self.advance()
            elem = self.spec_type()
            self.expect("]")
            return TList(elem)
        if self.at("{"):
            self.advance()
            items = []
            if not self.at("}"):
                items.append(self.spec_type())
                while self.at(","):
                    self.advance()
                    items.append(self.spec_type())
            self.expect("}")
            return TTuple(tuple(items))
        tok = self.peek()
        if tok.kind == "NAME" and tok.text in TYPE_NAMES:
            self.advance()
            if self.at("(") and self.at(")", 1):
                self.advance()
                self.advance()
            return TYPE_NAMES[tok.text]
        raise self.fail("expected a type")

    def definition(self, pending: _Pending):
        kw = self.advance()
        name_tok = self.expect_kind("NAME", "function name")
        self.expect("(")
        params: list[Token] = []
        if not self.at(")"):
            params.append(self.expect_kind("NAME", "parameter name"))
            while self.at(","):
                self.advance()
                params.append(self.expect_kind("NAME", "parameter name"))
        self.expect(")")
        self.expect("do")
        body = self.block()
        self.expect("end")
        return kw, name_tok, params, body, pending

    # -- blocks and terms --------------------------------------------------

    def block(self) -> Term:
        stmts = [self.statement()]
        while True:
            if self.at(";"):
                self.advance()
                stmts.append(self.statement())
                continue
            tok = self.peek()
            if tok.kind == "EOF" or self.at("end") or self.at(")"):
                break
            if not tok.nl_before:
                raise self.fail("expected a newline or ';'")
            save = self.i
            starts_clause = self.attempt(self.clause_head) is not None
            self.i = save
            if starts_clause:
                break
            stmts.append(self.statement())
        return _desugar(stmts)

    def clause_head(self) -> bool:
        save = self.i
        try:
            self.pattern()
        except _Fail:
            # Receive heads nest full patterns inside the message tuple.
            self.i = save
            self.expect("{")
            self.expect_kind("ATOM", "a message label atom")
            while self.at(","):
                self.advance()
                self.pattern()
            self.expect("}")
        self.expect("->")
        return True

    def statement(self) -> tuple[str | None, Term, Span]:
        tok = self.peek()
        if tok.kind == "NAME" and self.at("=", 1):
            self.advance()
            self.advance()
            return tok.text, self.term(), tok.span
        return None, self.term(), tok.span

    def term(self) -> Term:
        tok = self.peek()
        if self.at("send"):
            return self.send()
        if self.at("receive"):
            return self.receive()
        if self.at("case"):
            return self.case()
        if tok.kind == "NAME" and self.at("(", 1) and not self.peek(1).nl_before:
            return self.call()
        if self.at("("):
            save = self.i
            try:
                e = self.expr()
                if self.term_ends():
                    return e
            except _Fail:
                pass
            self.i = save
            self.advance()
            t = self.block()
            self.expect(")")
            return t
        return self.expr()

    def term_ends(self) -> bool:
        tok = self.peek()
        return tok.nl_before or tok.kind == "EOF" or self.at(";") or self.at("end") or self.at(")")

    def send(self) -> Send:
        kw = self.advance()
        self.expect("(")
        dest = self.expr()
        self.expect(",")
        self.expect("{")
        label = self.expect_kind("ATOM", "a message label atom").text[1:]
        args = []
        while self.at(","):
            self.advance()
            args.append(self.expr())
        self.expect("}")
        self.expect(")")
        return Send(dest, label, tuple(args), span=kw.span)

    def receive(self) -> Receive:
        kw = self.advance()
        self.expect("do")
        branches = []
        while not self.at("end"):
            head = self.expect("{")
            label = self.expect_kind("ATOM", "a message label atom").text[1:]
            pats = []
            while self.at(","):
                self.advance()
                pats.append(self.pattern())
            self.expect("}")
            self.expect("->")
            body = self.block()
            branches.append(RecvBranch(label, tuple(pats), body, span=head.span))
        if not branches:
            raise self.fail("receive needs at least one clause")
        self.expect("end")
        return Receive(tuple(branches), span=kw.span)

    def case(self) -> Case:
        kw = self.advance()
        scrutinee = self.expr()
        self.expect("do")
        branches = []
        while not self.at("end"):
            start = self.peek()
            pat = self.pattern()
            self.expect("->")
            body = self.block()
            branches.append(CaseBranch(pat, body, span=start.span))
        if not branches:
            raise self.fail("case needs at least one clause")
        self.expect("end")
        return Case(scrutinee, tuple(branches), span=kw.span)

    def call(self) -> Call:
        name = self.advance()
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expr())
            while self.at(","):
                self.advance()
                args.append(self.expr())
        self.expect(")")
        return Call(name.text, tuple(args), span=name.span)

    # -- patterns ----------------------------------------------------------

    def pattern(self) -> Pattern:
        if self.at("{"):
            self.advance()
            items = []
            if not self.at("}"):
                items.append(self.id_pattern())
                while self.at(","):
                    self.advance()
                    items.append(self.id_pattern())
            self.expect("}")
            return PTuple(tuple(items))
        if self.at("[") and not self.at("]", 1):
            self.advance()
            head = self.id_pattern()
            if self.at("|"):
                self.advance()
                tail = self.id_pattern()
            else:
                tail = PLit(NIL)
            self.expect("]")
            return PCons(head, tail)
        return self.id_pattern()

    def id_pattern(self) -> PVar | PLit:
        tok = self.peek()
        if tok.kind == "NAME":
            self.advance()
            return PVar(tok.text, span=tok.span)
        return PLit(self.literal())

    def literal(self) -> Expr:
        tok = self.peek()
        if self.at("-") and self.peek(1).kind in ("INT", "FLOAT"):
            self.advance()
            return _number(self.advance(), negate=True)
        if tok.kind in ("INT", "FLOAT"):
            return _number(self.advance())
        if tok.kind == "ATOM":
            self.advance()
            return Atom(tok.text[1:])
        if self.at("true") or self.at("false"):
            self.advance()
            return Bool(tok.text == "true")
        if self.at("[") and self.at("]", 1):
            self.advance()
            self.advance()
            return NIL
        raise self.fail("expected a pattern")

    # -- expressions -------------------------------------------------------

    def expr(self, min_prec: int = 1) -> Expr:
        left = self.unary()
        while True:
            tok = self.peek()
            prec = BINARY_PREC.get(tok.text) if tok.kind in ("OP", "KW") else None
            if prec is None or prec < min_prec or tok.nl_before:
                return left
            self.advance()
            right = self.expr(prec + 1)
            left = BinOp(tok.text, left, right)

    def unary(self) -> Expr:
        if self.at("not"):
            self.advance()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NAME":
            if tok.text == "_":
                raise self.fail("'_' cannot be used as a value")
            self.advance()
            return Var(tok.text, span=tok.span)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("{"):
            self.advance()
            items = []
            if not self.at("}"):
                items.append(self.expr())
                while self.at(","):
                    self.advance()
                    items.append(self.expr())
            self.expect("}")
            return Tuple(tuple(items))
        if self.at("[") and not self.at("]", 1):
            self.advance()
            items = [self.expr()]
            while self.at(","):
                self.advance()
                items.append(self.expr())
            tail: Expr = NIL
            if self.at("|"):
                self.advance()
                tail = self.expr()
            self.expect("]")
            for item in reversed(items):
                tail = Cons(item, tail)
            return tail
        return self.literal()


def _number(tok: Token, negate: bool = False) -> Num:
    value: int | float = int(tok.text) if tok.kind == "INT" else float(tok.text)
    return Num(-value if negate else value)


def _desugar(stmts: list[tuple[str | None, Term, Span]]) -> Term:
    binder, t, span = stmts[-1]
    out = t if binder is None else Let(binder, t, Var(binder), span=span)
    for binder, t, span in reversed(stmts[:-1]):
        out = Let(binder or SEQ_BINDER, t, out, span=span)
    return out


# ---------------------------------------------------------------------------
# Module assembly and validation
# ---------------------------------------------------------------------------


def _walk_terms(t: Term) -> Iterator[Term]:
    yield t
    match t:
        case Let(_, t1, t2):
            yield from _walk_terms(t1)
            yield from _walk_terms(t2)
        case Receive(branches):
            for b in branches:
                yield from _walk_terms(b.body)
        case Case(_, branches):
            for b in branches:
                yield from _walk_terms(b.body)


def _distinct_vars(pats) -> list[str]:
    seen: set[str] = set()
    dups: list[str] = []

    def walk(p: Pattern) -> None:
        match p:
            case PVar(name):
                if name != "_":
                    if name in seen and name not in dups:
                        dups.append(name)
                    seen.add(name)
            case PCons(h, tl):
                walk(h)
                walk(tl)
            case PTuple(items):
                for w in items:
                    walk(w)

    for p in pats:
        walk(p)
    return dups



def _first_free_span(t, bound: frozenset[str]) -> Span | None:
    """Span of the leftmost variable occurrence not covered by ``bound``."""
    match t:
        case Var(name):
            return None if name in bound else t.span
        case Not(e):
            return _first_free_span(e, bound)
        case BinOp(_, a, b) | Cons(a, b):
            return _first_free_span(a, bound) or _first_free_span(b, bound)
        case Tuple(items) | Send(_, _, items) | Call(_, items):
            if isinstance(t, Send):
                items = (t.dest, *items)
            for e in items:
                found = _first_free_span(e, bound)
                if found:
                    return found
            return None
        case Let(x, t1, t2):
            return _first_free_span(t1, bound) or _first_free_span(t2, bound | {x})
        case Receive(branches):
            for b in branches:
                found = _first_free_span(b.body, bound | set(pattern_vars(b.patterns)))
                if found:
                    return found
            return None
        case Case(e, branches):
            found = _first_free_span(e, bound)
            for b in branches:
                found = found or _first_free_span(b.body, bound | set(pattern_vars(b.pattern)))
            return found
    return None


def parse_module(src: str) -> Module:
    """Parse a module; raises :class:`ParseError` with every diagnostic found."""
    p = _Parser(tokenize(src))
    try:
        name, items = p.module()
    except _Fail as exc:
        raise ParseError([exc.diag]) from None

    diags: list[Diagnostic] = []
    defs: list[FunDef] = []
    named_sessions: dict[str, SessionType] = {}
    seen: dict[tuple[str, int], Span] = {}

    for kw, name_tok, param_toks, body, pending in items:
        public = kw.text == "def"
        fname = name_tok.text
        where = name_tok.span
        before = len(diags)
        if not param_toks:
            diags.append(error("PARSE-SPEC", f"{fname} needs the dual pid as its first parameter", where))
            continue
        key = (fname, len(param_toks))
        if key in seen:
            diags.append(error("PARSE-DUPFUN", f"{fname}/{len(param_toks)} is defined twice", where))
        seen[key] = where

        names = [t.text for t in param_toks]
        for i, t in enumerate(param_toks):
            if t.text in names[:i]:
                diags.append(error("PARSE-DUPPARAM", f"duplicate parameter {t.text}", t.span))
            if t.text == "_":
                diags.append(error("PARSE-SYNTAX", "'_' cannot be a parameter", t.span))

        if pending.spec is None:
            diags.append(error("PARSE-NOSPEC", f"{fname} has no @spec", where))
            param_types: tuple[ExprType, ...] = ()
            ret: ExprType = ATOM
        else:
            sname, stypes, ret, sspan = pending.spec
            param_types = stypes[1:]
            if sname != fname:
                diags.append(error("PARSE-SPEC", f"@spec names {sname} but the definition is {fname}", sspan))
            elif len(stypes) != len(param_toks):
                diags.append(
                    error("PARSE-SPEC", f"@spec has arity {len(stypes)} but {fname} has arity {len(param_toks)}", sspan)
                )
            elif stypes[0] != PID:
                diags.append(error("PARSE-SPEC", f"first parameter of {fname} must have type pid", sspan))

        session = None
        dual_of = None
        if pending.session is None:
            if public:
                diags.append(error("PARSE-NOSESSION", f"public function {fname} needs @session or @dual", where))
        elif not public:
            diags.append(error("PARSE-PRIVSESSION", f"private function {fname} cannot carry a session annotation", pending.session[2]))
        else:
            kind, text, sspan = pending.session
            if kind == "session":
                try:
                    session = parse_session_type(text, sspan)
                except ParseError as exc:
                    diags.extend(exc.diagnostics)
                else:
                    if isinstance(session, Rec):
                        named_sessions[session.var] = session
            else:
                ref = text.strip()
                if ref in named_sessions:
                    session = dual(named_sessions[ref])
                    dual_of = ref
                else:
                    diags.append(error("PARSE-DUAL", f"no earlier @session named {ref!r}", sspan))

        for t in _walk_terms(body):
            if isinstance(t, Receive):
                labels = [b.label for b in t.branches]
                for b in t.branches:
                    if labels.count(b.label) > 1:
                        diags.append(error("PARSE-DUPLABEL", f"label {b.label} appears twice in receive", b.span))
                        break
                for b in t.branches:
                    for d in _distinct_vars(b.patterns):
                        diags.append(error("PARSE-DUPVAR", f"variable {d} bound twice in one pattern list", b.span))
            elif isinstance(t, Case):
                for b in t.branches:
                    for d in _distinct_vars((b.pattern,)):
                        diags.append(error("PARSE-DUPVAR", f"variable {d} bound twice in one pattern", b.span))

        free = free_vars(body) - set(names)
        if free:
            at = _first_free_span(body, frozenset(names)) or where
            diags.append(error("PARSE-FREEVAR", f"unbound variables in {fname}: {', '.join(sorted(free))}", at))

        if len(diags) == before:
            defs.append(
                FunDef(
                    fname,
                    public,
                    names[0],
                    tuple(names[1:]),
                    param_types,
                    ret,
                    body,
                    session,
                    dual_of,
                    span=kw.span,
                )
            )
    if diags:
        raise ParseError(diags)
    return Module(name, tuple(defs))


def _parse_with(src: str, fn: Callable[[_Parser], object]) -> object:
    p = _Parser(tokenize(src))
    try:
        out = fn(p)
        if p.peek().kind != "EOF":
            raise p.fail("unexpected trailing input")
    except _Fail as exc:
        raise ParseError([exc.diag]) from None
    return out


def parse_term(src: str) -> Term:
    return _parse_with(src, _Parser.block)


def parse_expr(src: str) -> Expr:
    return _parse_with(src, _Parser.expr)


def parse_pattern(src: str) -> Pattern:
    return _parse_with(src, _Parser.pattern)


def parse_value(src: str) -> Expr:
    """Parse a closed value literal such as ``[1, 2]`` or ``{:ok, true}``."""
    e = parse_expr(src)
    if not is_value(e):
        raise ParseError([error("PARSE-SYNTAX", f"{src!r} is not a value literal", Span(1, 1))])
    return e


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def print_type(t: ExprType) -> str:
    match t:
        case TBool() | TNum() | TAtom() | TPid() | TUnknown():
            return str(t)
        case TList(elem):
            return f"[{print_type(elem)}]"
        case TTuple(items):
            return "{" + ", ".join(print_type(x) for x in items) + "}"
    raise TypeError(f"not a type: {t!r}")


def print_session(s: SessionType) -> str:
    if isinstance(s, Rec):
        return f"{s.var} = {_session(s.body)}"
    return _session(s)


def _session(s: SessionType) -> str:
    match s:
        case End():
            return "end"
        case SVar(name):
            return name
        case Rec(x, body):
            return f"rec {x}.{_session(body)}"
        case Branch(arms) | Choice(arms):
            prefix = "?" if isinstance(s, Branch) else "!"
            parts = [_arm(prefix, a) for a in arms]
            if len(parts) == 1:
                return parts[0]
            return ("&{" if prefix == "?" else "+{") + ", ".join(parts) + "}"
    raise TypeError(f"not a session type: {s!r}")


def _arm(prefix: str, a: Arm) -> str:
    head = f"{prefix}{a.label}(" + ", ".join(print_type(t) for t in a.payloads) + ")"
    if isinstance(a.cont, End):
        return head
    return f"{head}.{_session(a.cont)}"


def _float_text(x: float) -> str:
    text = repr(x)
    if "e" in text and "." not in text.split("e")[0]:
        mant, exp = text.split("e")
        text = f"{mant}.0e{exp}"
    return text


def print_expr(e: Expr, min_prec: int = 0) -> str:
    match e:
        case Bool(v):
            return "true" if v else "false"
        case Num(v):
            return _float_text(v) if isinstance(v, float) else str(v)
        case Atom(name):
            return f":{name}"
        case Pid(n):
            return f"#PID<{n}>"
        case Nil():
            return "[]"
        case Var(name):
            return name
        case Not(operand):
            return "not " + print_expr(operand, UNARY_PREC)
        case BinOp(op, left, right):
            prec = BINARY_PREC[op]
            text = f"{print_expr(left, prec)} {op} {print_expr(right, prec + 1)}"
            return f"({text})" if prec < min_prec else text
        case Tuple(items):
            return "{" + ", ".join(print_expr(x) for x in items) + "}"
        case Cons():
            items, tail = list_items(e)
            body = ", ".join(print_expr(x) for x in items)
            if isinstance(tail, Nil):
                return f"[{body}]"
            return f"[{body} | {print_expr(tail)}]"
    raise TypeError(f"not an expression: {e!r}")


def print_pattern(p: Pattern) -> str:
    match p:
        case PVar(name):
            return name
        case PLit(v):
            return print_expr(v)
        case PCons(h, t):
            return f"[{print_pattern(h)} | {print_pattern(t)}]"
        case PTuple(items):
            return "{" + ", ".join(print_pattern(w) for w in items) + "}"
    raise TypeError(f"not a pattern: {p!r}")


def _indent(lines: list[str], n: int = 2) -> list[str]:
    pad = " " * n
    return [pad + line if line else line for line in lines]


def _term_lines(t: Term) -> list[str]:
    match t:
        case Let(x, t1, t2):
            lines = _bound_lines(x, t1)
            if isinstance(t2, Var) and t2.name == x and x != SEQ_BINDER:
                return lines
            return lines + _term_lines(t2)
        case Send(dest, label, args):
            msg = ", ".join([f":{label}"] + [print_expr(a) for a in args])
            return [f"send({print_expr(dest)}, {{{msg}}})"]
        case Receive(branches):
            lines = ["receive do"]
            for b in branches:
                head = ", ".join([f":{b.label}"] + [print_pattern(p) for p in b.patterns])
                lines.append(f"  {{{head}}} ->")
                lines += _indent(_term_lines(b.body), 4)
            return lines + ["end"]
        case Call(name, args):
            return [f"{name}(" + ", ".join(print_expr(a) for a in args) + ")"]
        case Case(e, branches):
            lines = [f"case {print_expr(e)} do"]
            for b in branches:
                lines.append(f"  {print_pattern(b.pattern)} ->")
                lines += _indent(_term_lines(b.body), 4)
            return lines + ["end"]
    return [print_expr(t)]


def _bound_lines(x: str, t1: Term) -> list[str]:
    if isinstance(t1, Let):
        inner = ["("] + _indent(_term_lines(t1)) + [")"]
    else:
        inner = _term_lines(t1)
    if x == SEQ_BINDER:
        return inner
    return [f"{x} = {inner[0]}"] + inner[1:]


def print_term(t: Term) -> str:
    return "\n".join(_term_lines(t))


def print_fundef(d: FunDef) -> list[str]:
    lines = []
    if d.dual_of is not None:
        lines.append(f'@dual "{d.dual_of}"')
    elif d.session is not None:
        lines.append(f'@session "{print_session(d.session)}"')
    types = ", ".join(print_type(t) for t in (PID, *d.param_types))
    lines.append(f"@spec {d.name}({types}) :: {print_type(d.return_type)}")
    kw = "def" if d.public else "defp"
    lines.append(f"{kw} {d.name}(" + ", ".join((d.dual, *d.params)) + ") do")
    lines += _indent(_term_lines(d.body))
    lines.append("end")
    return lines


def print_module(m: Module) -> str:
    lines = [f"defmodule {m.name} do"]
    for i, d in enumerate(m.defs):
        if i:
            lines.append("")
        lines += _indent(print_fundef(d))
    lines.append("end")
    return "\n".join(lines) + "\n"
