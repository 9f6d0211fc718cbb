from __future__ import annotations

from dataclasses import dataclass

from .syntax import Span

# Fixed catalogue. Parse errors, type errors, runtime faults, warnings.
CODES = {
    "PARSE-SYNTAX": "syntax error",
    "PARSE-DUPFUN": "duplicate function name/arity",
    "PARSE-NOSESSION": "public function without @session or @dual",
    "PARSE-PRIVSESSION": "session annotation on a private function",
    "PARSE-NOSPEC": "function without @spec",
    "PARSE-SPEC": "@spec does not fit the definition",
    "PARSE-DUPPARAM": "duplicate parameter",
    "PARSE-DUPLABEL": "duplicate label in receive",
    "PARSE-DUPVAR": "duplicate variable in patterns",
    "PARSE-DUAL": "@dual refers to an unknown session",
    "PARSE-SESSION": "malformed session type",
    "PARSE-FREEVAR": "function body has free variables",
    "TYPE-EXPR": "ill-typed expression",
    "TYPE-UNBOUND": "unbound variable",
    "TYPE-SESSION": "term does not fit the session type",
    "TYPE-CHOICE": "label not offered by the session choice",
    "TYPE-BRANCH": "receive branches do not match the session branch",
    "TYPE-PAYLOAD": "payload does not match the session payload types",
    "TYPE-PATTERN": "pattern does not fit its type",
    "TYPE-SHADOW": "dual pid variable rebound",
    "TYPE-ADDRESSEE": "message or call not addressed to the dual pid",
    "TYPE-JOIN": "branches disagree on type or residual session",
    "TYPE-RESIDUAL": "session not fully consumed",
    "TYPE-RETURN": "return type does not match @spec",
    "TYPE-UNKNOWNFUN": "call to an unknown function",
    "TYPE-ARITY": "call with the wrong number of arguments",
    "TYPE-ARG": "call argument has the wrong type",
    "TYPE-KNOWNCALL": "session differs from the callee's declared session",
    "RUN-ARITH": "arithmetic on incompatible operands",
    "RUN-OVERFLOW": "numeric overflow",
    "RUN-COMPARE": "comparison of incompatible values",
    "RUN-MATCH": "no case branch matches",
    "RUN-BADPID": "message sent to a pid that is not the session peer",
    "RUN-LIST": "malformed list",
    "RUN-FREEVAR": "evaluation reached a free variable",
    "RUN-UNKNOWNFUN": "call to an unknown function",
    "RUN-STUCK": "expression cannot reduce",
    "WARN-NONDUAL": "client session is not the dual of the server session",
    "WARN-REBIND": "function rebound to an inequivalent session",
}


@dataclass(frozen=True, slots=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Span | None = None
    rule: str | None = None

    def __post_init__(self) -> None:
        if self.code not in CODES:
            raise ValueError(f"unknown diagnostic code {self.code}")
        if self.severity not in ("error", "warning"):
            raise ValueError(f"bad severity {self.severity}")

    def format(self, path: str = "<input>") -> str:
        line, col = (self.span.line, self.span.col) if self.span else (1, 1)
        return f"{path}:{line}:{col}: {self.severity} {self.code} {self.message}"

    def to_json(self) -> dict:
        span = None
        if self.span:
            span = {"line": self.span.line, "col": self.span.col, "length": self.span.length}
        return {
            "severity": self.severity,
            "code": self.code,
            "span": span,
            "message": self.message,
            "rule": self.rule,
        }


def error(code: str, message: str, span: Span | None = None, rule: str | None = None) -> Diagnostic:
    return Diagnostic("error", code, message, span, rule)


def warning(code: str, message: str, span: Span | None = None) -> Diagnostic:
    return Diagnostic("warning", code, message, span)


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(d.message for d in diagnostics))


class TypeCheckError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(f"{diagnostic.code}: {diagnostic.message}")

    @property
    def code(self) -> str:
        return self.diagnostic.code
