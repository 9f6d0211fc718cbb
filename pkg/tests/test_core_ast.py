import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gen_module, gen_value
from sessft.parser import parse_module, parse_term, print_module
from sessft.syntax import (
    ATOM,
    BOOLEAN,
    NIL,
    NUMBER,
    Atom,
    BinOp,
    Bool,
    Case,
    CaseBranch,
    Cons,
    Let,
    Num,
    PCons,
    Pid,
    PLit,
    PTuple,
    PVar,
    Send,
    TList,
    TTuple,
    Tuple,
    ValueTypeError,
    Var,
    bound_vars,
    free_vars,
    is_value,
    pattern_vars,
    substitute,
    typeof,
    unify,
)


def test_free_vars_let_removes_binder():
    assert free_vars(Let("x", Num(5), BinOp("+", Var("x"), Var("y")))) == {"y"}


def test_free_vars_send():
    assert free_vars(Send(Var("pid_var"), "a", (Var("z"),))) == {"pid_var", "z"}


def test_free_vars_receive_removes_pattern_vars():
    t = parse_term("receive do\n {:a, x} -> x + w\nend")
    assert free_vars(t) == {"w"}


def test_bound_vars_examples():
    assert bound_vars(Num(42)) == frozenset()
    assert bound_vars(Let("x", Num(1), Num(2))) == {"x"}
    t = Case(Var("e"), (CaseBranch(PTuple((PVar("a"), PVar("b"))), Let("c", Num(1), Var("c"))),))
    assert bound_vars(t) == {"a", "b", "c"}


def test_pattern_vars_examples():
    assert set(pattern_vars(PTuple((PVar("x"), PLit(Num(2)), PVar("y"))))) == {"x", "y"}
    assert set(pattern_vars(PCons(PVar("h"), PVar("t")))) == {"h", "t"}
    assert pattern_vars(PLit(Num(7))) == ()


def test_substitute_examples():
    assert substitute(BinOp("+", Var("x"), Num(1)), {"x": Num(3)}) == BinOp("+", Num(3), Num(1))
    assert substitute(Let("y", Var("x"), Var("y")), {"x": Num(5)}) == Let("y", Num(5), Var("y"))
    t = Send(Var("d"), "l", (Var("a"), Var("b")))
    assert substitute(t, (("d", Pid(1)), ("a", Num(2)))) == Send(Pid(1), "l", (Num(2), Var("b")))


def test_substitute_respects_shadowing():
    t = Let("x", Num(1), Var("x"))
    assert substitute(t, {"x": Num(9)}) == t


def test_substitute_leftmost_binding_wins():
    assert substitute(Var("x"), (("x", Num(1)), ("x", Num(2)))) == Num(1)


def test_typeof_examples():
    assert typeof(Bool(True)) == BOOLEAN
    assert typeof(Tuple((Num(1), Atom("ok")))) == TTuple((NUMBER, ATOM))
    with pytest.raises(ValueTypeError):
        typeof(Cons(Num(1), Cons(Bool(True), NIL)))


def test_typeof_empty_list_unifies_with_any_list():
    assert unify(typeof(NIL), TList(NUMBER)) == TList(NUMBER)


def test_num_equality_is_strict():
    assert Num(1) != Num(1.0)
    assert len({Num(1), Num(1.0)}) == 2
    with pytest.raises(TypeError):
        Num(True)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_empty_substitution_is_identity(seed):
    m = gen_module(random.Random(seed))
    for d in m.defs:
        assert substitute(d.body, {}) == d.body


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_substituting_a_value_removes_exactly_that_variable(seed):
    rng = random.Random(seed)
    m = gen_module(rng)
    v = gen_value(rng)
    for d in m.defs:
        fv = free_vars(d.body)
        for x in sorted(fv):
            assert free_vars(substitute(d.body, {x: v})) == fv - {x}


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_parsed_bodies_are_closed_over_their_parameters(seed):
    m = parse_module(print_module(gen_module(random.Random(seed))))
    for d in m.defs:
        assert free_vars(d.body) <= {d.dual, *d.params}


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 100_000))
def test_generated_values_are_values(seed):
    assert is_value(gen_value(random.Random(seed)))
