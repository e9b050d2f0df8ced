import pytest
from hypothesis import given, strategies as st

from speckernel.lang import (
    FALSE, INT_MAX, INT_MIN, INVALID, NULL, TRUE, Bool, Const, Ident, Int, OpApp, Reg, Regs,
    StructuralError, apply_op, eval_expr, expr_ids, expr_regs, mk_int, to_addr, to_bool,
    with_args,
)

ints = st.integers(min_value=INT_MIN, max_value=INT_MAX)


@given(ints, ints)
def test_add_wraps_to_64_bits(a, b):
    r = apply_op("add", (Int(a), Int(b)))
    assert INT_MIN <= r.n <= INT_MAX
    assert (r.n - (a + b)) % 2 ** 64 == 0


def test_overflow_wraps():
    assert apply_op("add", (Int(INT_MAX), Int(1))) == Int(INT_MIN)
    assert mk_int(2 ** 64 + 5) == Int(5)


def test_arithmetic_on_non_integers_is_null():
    assert apply_op("add", (NULL, Int(1))) == NULL
    assert apply_op("mul", (TRUE, Int(2))) == NULL
    assert apply_op("lt", (NULL, Int(1))) == FALSE


def test_equality_is_structural():
    assert apply_op("eq", (NULL, NULL)) == TRUE
    assert apply_op("eq", (Int(0), FALSE)) == FALSE
    assert apply_op("neq", (Int(1), Int(2))) == TRUE


def test_truthiness():
    assert to_bool(Int(3)) and not to_bool(Int(0))
    assert not to_bool(NULL)
    assert to_bool(TRUE) and not to_bool(FALSE)
    assert apply_op("not", (Int(0),)) == TRUE
    assert apply_op("and", (Int(1), NULL)) == FALSE


def test_arity_is_checked():
    with pytest.raises(StructuralError):
        apply_op("add", (Int(1),))
    with pytest.raises(StructuralError):
        apply_op("nope", (Int(1), Int(2)))


@given(st.integers(-5, 20))
def test_to_addr(n):
    a = to_addr(Int(n), 16)
    assert a == n if 0 <= n < 16 else a is INVALID


def test_to_addr_of_other_values():
    assert to_addr(NULL, 16) is INVALID
    assert to_addr(Bool(True), 16) is INVALID


def test_eval_expr_uses_registers_and_layout():
    e = OpApp("add", (Ident("buf"), OpApp("mul", (Reg("x1"), Const(Int(2))))))
    assert eval_expr(e, with_args([Int(3)]), {"buf": 10}) == Int(16)
    assert expr_ids(e) == {"buf"}
    assert expr_regs(e) == {"x1"}


def test_regs_default_null_and_compare_by_content():
    r = Regs()
    assert r.get("anything") == NULL
    r2 = r.set("a", Int(1)).set("a", NULL)
    assert r2 == r and hash(r2) == hash(r)
    assert r.set("a", Int(1)) != r


def test_with_args_fills_argument_registers():
    r = with_args([Int(1), Int(2)])
    assert r.get("x1") == Int(1) and r.get("x2") == Int(2) and r.get("x3") == NULL
    with pytest.raises(StructuralError):
        with_args([Int(0)] * 9)
