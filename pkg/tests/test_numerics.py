import itertools
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from rhdet.numerics import (EscalationCeiling, HPReal, IntPoly, PrecCtx, PrecisionExhausted, as_real,
                            det_exact, det_float, det_poly)

small_ints = st.integers(min_value=-50, max_value=50)


def leibniz(m):
    n = len(m)
    total = Fraction(0)
    for perm in itertools.permutations(range(n)):
        inv = sum(perm[i] > perm[j] for i in range(n) for j in range(i + 1, n))
        total += (-1) ** inv * math.prod(Fraction(m[i][perm[i]]) for i in range(n))
    return total


def square(n):
    return st.lists(st.lists(small_ints, min_size=n, max_size=n), min_size=n, max_size=n)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(square))
def test_det_exact_matches_leibniz(m):
    assert det_exact(m) == leibniz(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4).flatmap(square))
def test_det_float_encloses_exact(m):
    exact = leibniz(m)
    ctx = PrecCtx(digits=50)
    try:
        d = det_float(m, ctx)
    except PrecisionExhausted:
        # only singular or near-singular inputs may be refused
        assert exact == 0 or abs(exact) < 1
        return
    with mpmath.workdps(80):
        assert abs(d.value - mpf(exact.numerator) / exact.denominator) <= d.err + mpf(10) ** -60


def test_det_float_column_scaling_is_exact():
    # columns spread over 10^4000 would wreck a row-only Hadamard bound
    ctx = PrecCtx(digits=50)
    with ctx.work():
        big, tiny = mpf(10) ** 2000, mpf(10) ** -2000
        m = [[2 * big, 3 * tiny], [5 * big, 7 * tiny]]
        d = det_float(m, ctx)
        assert abs(d.value - (14 - 15)) <= d.err
        assert d.err < mpf(10) ** -40


def test_det_float_detects_cancellation():
    ctx = PrecCtx(digits=30)
    with ctx.work():
        m = [[1, 1], [1, 1 + mpf(10) ** -28]]
    with pytest.raises(PrecisionExhausted):
        det_float(m, ctx)


@settings(max_examples=40, deadline=None)
@given(st.lists(small_ints, max_size=6), st.lists(small_ints, max_size=6), st.integers(-9, 9))
def test_intpoly_ring_ops_match_evaluation(a, b, y):
    p, q = IntPoly(a), IntPoly(b)
    assert (p * q)(y) == p(y) * q(y)
    assert (p + q)(y) == p(y) + q(y)


def test_det_poly_two_by_two():
    m = [[IntPoly([1, 1]), IntPoly([0, 1])], [IntPoly([2]), IntPoly([1, 0, 1])]]
    # (1+y)(1+y^2) - 2y
    assert det_poly(m) == IntPoly([1, -1, 1, 1])


@settings(max_examples=60, deadline=None)
@given(st.fractions(min_value=-100, max_value=100, max_denominator=1000),
       st.fractions(min_value=-100, max_value=100, max_denominator=1000))
def test_hpreal_arithmetic_encloses_truth(x, y):
    with mpmath.workdps(30):
        a = HPReal.exact(as_real(x))
        b = HPReal.exact(as_real(y))
        exact = {"add": x + y, "sub": x - y, "mul": x * y}
        got = {"add": a + b, "sub": a - b, "mul": a * b}
        if y != 0:
            exact["div"] = x / y
            got["div"] = a / b
    with mpmath.workdps(60):
        for k, v in exact.items():
            assert abs(got[k].value - as_real(v)) <= got[k].err * (1 + mpf(10) ** -10), k


def test_negation_keeps_full_precision():
    with mpmath.workdps(60):
        x = HPReal(mpf(1) / 3)
    # at the default 15 digits a rounding negation would lose the tail
    y = -x
    with mpmath.workdps(60):
        assert y.value + x.value == 0


def test_as_real_does_not_round_to_global_precision():
    with mpmath.workdps(60):
        x = mpf(1) / 3
    assert as_real(x) is x
    assert as_real(HPReal(x)) is x
    with mpmath.workdps(60):
        assert as_real(Fraction(1, 3)) == x


def test_escalation_rounds_and_stops_at_ceiling():
    ctx = PrecCtx(digits=100, max_digits=400)
    assert ctx.escalate_for(30).digits == 150
    assert ctx.escalate_for(95).digits == 200
    assert ctx.escalate_for(None).digits == 200
    with pytest.raises(EscalationCeiling):
        ctx.escalate_for(500)
    with pytest.raises(ValueError):
        PrecCtx(digits=10)
