import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus_util import load
from oracles import gen_module, gen_session
from sessft.diagnostics import ParseError
from sessft.parser import (
    parse_expr,
    parse_module,
    parse_session_type,
    parse_term,
    parse_value,
    print_expr,
    print_module,
    print_session,
    tokenize,
)
from sessft.syntax import (
    NUMBER,
    Arm,
    Atom,
    BinOp,
    Branch,
    Call,
    Choice,
    Cons,
    End,
    Let,
    Module,
    Nil,
    Num,
    Pid,
    Rec,
    Send,
    SVar,
    Tuple,
    Var,
)

PINGER = """\
defmodule Pinger do
  @session "X = !ping().?pong().X"
  @spec pinger(pid) :: atom
  def pinger(pid) do
    send(pid, {:ping})
    receive do
      {:pong} -> :ok
    end
    pinger(pid)
  end
end
"""

PING_PONG = Rec("X", Choice((Arm("ping", (), Branch((Arm("pong", (), SVar("X")),))),)))


def codes(src: str) -> list[str]:
    with pytest.raises(ParseError) as info:
        parse_module(src)
    return [d.code for d in info.value.diagnostics]


def test_pinger_module_parses_to_expected_session():
    m = parse_module(PINGER)
    (d,) = m.defs
    assert d.name == "pinger" and d.public and d.dual == "pid" and d.params == ()
    assert d.session == PING_PONG


def test_empty_module():
    assert parse_module("defmodule M do end") == Module("M", ())


def test_sequencing_desugars_to_let():
    d = parse_module(PINGER).defs[0]
    assert isinstance(d.body, Let) and d.body.binder == "_"
    assert isinstance(d.body.bound, Send)
    assert d.body.body.body == Call("pinger", (Var("pid"),))


def test_final_assignment_returns_the_bound_value():
    assert parse_term("x = 1 + 2") == Let("x", BinOp("+", Num(1), Num(2)), Var("x"))


def test_duplicate_parameter_is_rejected():
    src = "defmodule M do\n  @spec f(pid, number, number) :: number\n  defp f(pid, x, x) do\n    x\n  end\nend\n"
    assert "PARSE-DUPPARAM" in codes(src)


@pytest.mark.parametrize(
    "src, code",
    [
        ("defmodule M do\n  def f(pid) do\n    1\n  end\nend", "PARSE-NOSPEC"),
        ("defmodule M do\n  @spec f(pid) :: number\n  def f(pid) do\n    1\n  end\nend", "PARSE-NOSESSION"),
        (
            'defmodule M do\n  @session "end"\n  @spec f(pid) :: number\n  defp f(pid) do\n    1\n  end\nend',
            "PARSE-PRIVSESSION",
        ),
        ('defmodule M do\n  @dual "Q"\n  @spec f(pid) :: number\n  def f(pid) do\n    1\n  end\nend', "PARSE-DUAL"),
        (
            "defmodule M do\n  @spec f(pid) :: number\n  defp f(pid) do\n    1\n  end\n"
            "  @spec f(pid) :: number\n  defp f(pid) do\n    2\n  end\nend",
            "PARSE-DUPFUN",
        ),
        ("defmodule M do\n  @spec f(pid) :: number\n  defp f(pid) do\n    z\n  end\nend", "PARSE-FREEVAR"),
        ("defmodule M do\n  @spec f(number) :: number\n  defp f(x) do\n    x\n  end\nend", "PARSE-SPEC"),
        ("defmodule M do\n  @spec g(pid) :: number\n  defp f(pid) do\n    1\n  end\nend", "PARSE-SPEC"),
        (
            "defmodule M do\n  @spec f(pid) :: number\n  defp f(pid) do\n    receive do\n"
            "      {:a} -> 1\n      {:a} -> 2\n    end\n  end\nend",
            "PARSE-DUPLABEL",
        ),
        (
            "defmodule M do\n  @spec f(pid) :: number\n  defp f(pid) do\n    receive do\n"
            "      {:a, x, x} -> x\n    end\n  end\nend",
            "PARSE-DUPVAR",
        ),
        ('defmodule M do\n  @session "&{?a(), ?a()}"\n  @spec f(pid) :: number\n  def f(pid) do\n    1\n  end\nend', "PARSE-SESSION"),
        ("defmodule M do\n  def f(pid) do\n    1 +\n  end\nend", "PARSE-SYNTAX"),
        ("defmodule M do\n  def f(pid) do\n    $\n  end\nend", "PARSE-SYNTAX"),
    ],
)
def test_module_level_errors(src, code):
    assert code in codes(src)


def test_diagnostic_spans_lie_inside_the_input():
    src = "defmodule M do\n  @spec f(pid) :: number\n  defp f(pid) do\n    nope\n  end\nend"
    with pytest.raises(ParseError) as info:
        parse_module(src)
    lines = src.splitlines()
    for d in info.value.diagnostics:
        assert 1 <= d.span.line <= len(lines)
        assert 1 <= d.span.col <= len(lines[d.span.line - 1]) + 1
    assert info.value.diagnostics[0].span[:2] == (4, 5)


def test_dual_annotation_resolves_to_dual_of_named_session():
    src = (
        'defmodule M do\n  @session "X = !a()"\n  @spec f(pid) :: atom\n  def f(pid) do\n'
        "    send(pid, {:a})\n    :ok\n  end\n\n"
        '  @dual "X"\n  @spec g(pid) :: atom\n  def g(pid) do\n    receive do\n      {:a} -> :ok\n'
        "    end\n  end\nend\n"
    )
    g = parse_module(src).defs[1]
    assert g.dual_of == "X"
    assert g.session == Rec("X", Branch((Arm("a", (), End()),)))


def test_session_type_examples():
    assert parse_session_type("X = !ping().?pong().X") == PING_PONG
    assert parse_session_type("end") == End()
    assert parse_session_type("?l(number)") == Branch((Arm("l", (NUMBER,), End()),))
    assert parse_session_type("rec Y.+{!a().Y, !b(atom).end}") == parse_session_type("Y = +{!a().Y, !b(atom)}")


@pytest.mark.parametrize("bad", ["rec X.X", "&{?a(), ?a()}", "!a().Y", "?a(", "+{}", "X = rec Y.X"])
def test_malformed_session_strings(bad):
    with pytest.raises(ParseError) as info:
        parse_session_type(bad)
    assert info.value.diagnostics[0].code == "PARSE-SESSION"


def test_print_session_examples():
    assert print_session(End()) == "end"
    assert print_session(PING_PONG) == "X = !ping().?pong().X"


def test_expression_precedence_and_values():
    assert parse_expr("1 + 2 * 3") == BinOp("+", Num(1), BinOp("*", Num(2), Num(3)))
    assert parse_expr("(1 + 2) * 3") == BinOp("*", BinOp("+", Num(1), Num(2)), Num(3))
    assert parse_value("[1, 2]") == Cons(Num(1), Cons(Num(2), Nil()))
    assert parse_value("{:a, -3, 2.5}") == Tuple((Atom("a"), Num(-3), Num(2.5)))
    with pytest.raises(ParseError):
        parse_value("1 + 2")


def test_float_printing_keeps_a_decimal_point():
    assert print_expr(Num(2.0)) == "2.0"
    assert parse_expr(print_expr(Num(2.0))) == Num(2.0)
    assert print_expr(Pid(3)) == "#PID<3>"


def test_operator_on_a_new_line_ends_the_statement():
    t = parse_term("x = 1\n-2")
    assert t == Let("x", Num(1), Num(-2))


def test_tokenizer_tracks_lines_and_columns():
    toks = tokenize("def f\n  :ok")
    assert [(t.kind, t.line, t.col) for t in toks[:3]] == [("KW", 1, 1), ("NAME", 1, 5), ("ATOM", 2, 3)]
    assert toks[2].nl_before


@pytest.mark.parametrize("entry", load("well_typed") + load("ill_typed") + load("fidelity_gap"), ids=lambda e: e.name)
def test_corpus_round_trip(entry):
    m = entry.module()
    assert parse_module(print_module(m)) == m


def test_printing_is_idempotent_on_the_pinger_module():
    once = print_module(parse_module(PINGER))
    assert print_module(parse_module(once)) == once


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_generated_module_round_trip(seed):
    m = gen_module(random.Random(seed))
    assert parse_module(print_module(m)) == m


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**32))
def test_session_printer_output_always_parses_back(seed):
    s = gen_session(random.Random(seed))
    assert parse_session_type(print_session(s)) == s
