"""Command line front end.

Exit codes: 0 ok, 1 semantic failure, 2 input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from typing import Sequence

from .diagnostics import Diagnostic, ParseError
from .fidelity import IllTypedModule, fidelity_run, report_to_json
from .mutations import MUTATIONS
from .parser import parse_module, parse_session_type, parse_value, print_module, print_session
from .runtime import (
    CRASHED,
    DEADLOCK,
    POLICIES,
    SessionStartError,
    action_to_json,
    format_action,
    run_session,
    session_start,
)
from .semantics import REFERENCE
from .session import TAU, Action, CallAct, Input, Output, after_session
from .syntax import FunId, Module, Pid
from .typechecker import build_details, check_module

OK, FAILED, BAD_INPUT, RUNTIME_FAILURE = 0, 1, 2, 3


class InputError(Exception):
    def __init__(self, message: str, diagnostics: Sequence[Diagnostic] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


def _color(code: str, text: str) -> str:
    if os.environ.get("SESSFT_COLOR") == "0" or not sys.stdout.isatty():
        return text
    return f"\x1b[{code}m{text}\x1b[0m"


def _print_diags(path: str, diags: Sequence[Diagnostic], as_json: bool) -> None:
    if as_json:
        print(json.dumps([d.to_json() for d in diags], indent=2))
        return
    for d in diags:
        line = d.format(path)
        print(_color("31" if d.severity == "error" else "33", line))


def _load(path: str) -> Module:
    try:
        with open(path, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return parse_module(src)
    except ParseError as exc:
        raise InputError(f"{path}: parse failed", exc.diagnostics) from None


def _fun_id(text: str) -> FunId:
    try:
        return FunId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _values(texts: Sequence[str]) -> tuple:
    out = []
    for text in texts:
        try:
            out.append(parse_value(text))
        except ParseError:
            raise InputError(f"not a value literal: {text!r}") from None
    return tuple(out)


_ACTION_RE = re.compile(r"\s*([!?])\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$", re.S)


def parse_action(text: str) -> Action:
    """``tau``, ``call f/n``, ``!label(v, ...)`` or ``?label(v, ...)``."""
    text = text.strip()
    if text == "tau":
        return TAU
    if text.startswith("call "):
        try:
            return CallAct(FunId.parse(text[5:].strip()))
        except ValueError:
            raise InputError(f"bad call action: {text!r}") from None
    m = _ACTION_RE.match(text)
    if m is None:
        raise InputError(f"bad action: {text!r}")
    kind, label, body = m.groups()
    payload: tuple = ()
    if body.strip():
        try:
            tup = parse_value("{" + body + "}")
        except ParseError:
            raise InputError(f"bad action payload: {body!r}") from None
        payload = tup.items
    if kind == "!":
        return Output(Pid(0), label, payload)
    return Input(label, payload)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    m = _load(args.file)
    diags = check_module(m)
    if args.json:
        _print_diags(args.file, diags, True)
    elif diags:
        _print_diags(args.file, diags, False)
    else:
        print(f"{args.file}: ok")
    return FAILED if diags else OK


def _require_typed(args, m: Module) -> int | None:
    if getattr(args, "unchecked", False):
        return None
    diags = check_module(m)
    if diags:
        _print_diags(args.file, diags, args.json)
        return FAILED
    return None


def cmd_run(args) -> int:
    m = _load(args.file)
    refused = _require_typed(args, m)
    if refused is not None:
        return refused
    sigma = build_details(m.defs)
    try:
        sys_ = session_start(
            sigma, args.server, _values(args.server_arg), args.client, _values(args.client_arg), seed=args.seed
        )
    except SessionStartError as exc:
        raise InputError(str(exc)) from None
    final, verdict = run_session(sys_, args.policy, args.fuel)
    procs = [("server", final.server), ("client", final.client)]
    if args.json:
        if args.trace:
            for pid, action in final.trace:
                print(json.dumps({"pid": pid, "action": action_to_json(action)}))
        summary = {
            "verdict": verdict,
            "steps": final.steps,
            "processes": [
                {
                    "role": role,
                    "pid": p.pid.n,
                    "fun": str(p.fun),
                    "status": p.status,
                    "crash": None if p.crash is None else {"code": p.crash[0], "message": p.crash[1]},
                    "mailbox": len(p.mailbox),
                }
                for role, p in procs
            ],
        }
        print(json.dumps(summary))
    else:
        if args.trace:
            for pid, action in final.trace:
                print(f"#PID<{pid}> {format_action(action)}")
        for role, p in procs:
            extra = f" {p.crash[0]} {p.crash[1]}" if p.crash else ""
            print(f"{role} {p.fun} #PID<{p.pid.n}>: {p.status}{extra}")
        print(f"verdict: {verdict} after {final.steps} steps")
    return RUNTIME_FAILURE if verdict in (DEADLOCK, CRASHED) else OK


def cmd_fidelity(args) -> int:
    m = _load(args.file)
    refused = _require_typed(args, m)
    if refused is not None:
        return refused
    semantics, env_update = REFERENCE, None
    if args.mutation:
        mut = next(x for x in MUTATIONS if x.name == args.mutation)
        semantics, env_update = mut.semantics(m), mut.env_update
    server_args, client_args = _values(args.server_arg), _values(args.client_arg)
    runs = []
    all_hold = True
    for seed in range(args.seed, args.seed + args.seeds):
        kwargs = {} if env_update is None else {"env_update": env_update}
        try:
            run = fidelity_run(
                m, args.server, server_args, args.client, client_args,
                seed=seed, fuel=args.fuel, policy=args.policy, semantics=semantics, **kwargs,
            )
        except IllTypedModule as exc:
            _print_diags(args.file, exc.diagnostics, args.json)
            return FAILED
        except (SessionStartError, ValueError) as exc:
            raise InputError(str(exc)) from None
        all_hold &= run.holds
        runs.append((seed, run))
    if args.json:
        print(
            json.dumps(
                [
                    {
                        "seed": seed,
                        "outcome": run.outcome,
                        "system_steps": run.system_steps,
                        "warnings": [w.to_json() for w in run.warnings],
                        "reports": [report_to_json(r) for r in run.reports],
                    }
                    for seed, run in runs
                ],
                indent=2,
            )
        )
    else:
        for seed, run in runs:
            for w in run.warnings:
                print(_color("33", w.format(args.file)))
            for r in run.reports:
                line = f"seed {seed} {r.fun} #PID<{r.pid}>: {r.verdict} ({r.steps} steps)"
                if r.violation is not None:
                    v = r.violation
                    line += f" at step {v.step} on {format_action(v.action)}: {v.reason}"
                    if v.diagnostic is not None:
                        line += f" {v.diagnostic.code}"
                    line += f" {v.message}"
                print(_color("32" if r.verdict == "holds" else "31", line))
    return OK if all_hold else FAILED


def cmd_after(args) -> int:
    try:
        s = parse_session_type(args.session)
    except ParseError as exc:
        raise InputError("bad session type", exc.diagnostics) from None
    action = parse_action(args.action)
    out = after_session(s, action)
    if out is None:
        print("undefined")
        return FAILED
    print(print_session(out))
    return OK


def cmd_fmt(args) -> int:
    m = _load(args.file)
    sys.stdout.write(print_module(m))
    return OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sessft", description="Session-typed mini-Elixir toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="typecheck a module")
    c.add_argument("file")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_check)

    def session_flags(q: argparse.ArgumentParser, fuel: int) -> None:
        q.add_argument("file")
        q.add_argument("--server", type=_fun_id, required=True, metavar="F/N")
        q.add_argument("--client", type=_fun_id, required=True, metavar="G/M")
        q.add_argument("--server-arg", action="append", default=[], metavar="VALUE")
        q.add_argument("--client-arg", action="append", default=[], metavar="VALUE")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--fuel", type=int, default=fuel)
        q.add_argument("--policy", choices=POLICIES, default="random")
        q.add_argument("--json", action="store_true")

    r = sub.add_parser("run", help="run a two-process session")
    session_flags(r, 1000)
    r.add_argument("--trace", action="store_true")
    r.add_argument("--unchecked", action="store_true", help="run even if the module is ill typed")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fidelity", help="monitor session fidelity on every step")
    session_flags(f, 1000)
    f.add_argument("--seeds", type=int, default=1)
    f.add_argument(
        "--mutation",
        choices=[m.name for m in MUTATIONS],
        help="run under a deliberately broken semantics (testing aid)",
    )
    f.set_defaults(func=cmd_fidelity)

    a = sub.add_parser("after", help="advance a session type past an action")
    a.add_argument("session")
    a.add_argument("action")
    a.set_defaults(func=cmd_after)

    fm = sub.add_parser("fmt", help="pretty-print a module")
    fm.add_argument("file")
    fm.set_defaults(func=cmd_fmt)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    if getattr(args, "fuel", 0) < 0 or getattr(args, "seeds", 1) < 0:
        print("sessft: fuel and seeds must be non-negative", file=sys.stderr)
        return BAD_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        path = getattr(args, "file", "<input>")
        if exc.diagnostics:
            _print_diags(path, exc.diagnostics, getattr(args, "json", False))
        else:
            print(f"sessft: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
