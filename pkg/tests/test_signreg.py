import random

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from oracles import hp, theta_phi
from rhdet.cvpoly import epsilon
from rhdet.signreg import (ETA_TABLE, MR_TABLE, GridSpec, SignScanResult, first_failures, hankel, k_lower, q_eval,
                           q_scan, scaled_wronskian_ratio, sign_scan, wronskian, wronskians)
from rhdet.numerics import PrecCtx

CTX = PrecCtx(digits=40)

# q(1/2, 1/2) from the theta series, mpmath.diff and mpmath.det at 60 digits (frozen)
Q_HALF_HALF = "1.60306701697845421313505066475508211507054281301605770733264e-71"


def theta_f(u, k):
    """k-th derivative of f = Phi' from the theta series."""
    return mpmath.diff(lambda t: theta_phi(t, None), u, k + 1)


def test_hankel_layout():
    assert hankel([1, 2, 3, 4, 5], 3) == [[1, 2, 3], [2, 3, 4], [3, 4, 5]]


@pytest.mark.parametrize("u", ["0", "0.3", "1"])
def test_low_order_wronskians(u):
    w1 = wronskian(hp(u), 1, 0, CTX)
    w2 = wronskian(hp(u), 2, 0, CTX)
    with mpmath.workdps(60):
        x = hp(u)
        d0 = theta_phi(x, None)
        d1 = mpmath.diff(lambda t: theta_phi(t, None), x, 1)
        d2 = mpmath.diff(lambda t: theta_phi(t, None), x, 2)
        assert abs(w1.value - d0) <= w1.err + abs(d0) * mpf(10) ** -35
        ref = d0 * d2 - d1 * d1
        assert abs(w2.value - ref) <= w2.err + abs(ref) * mpf(10) ** -25


def test_wronskians_share_derivatives():
    u = hp("0.7")
    batch = wronskians(u, 4, 0, CTX)
    for p, wv in batch:
        single = wronskian(u, p, 0, CTX.with_digits(wv.digits_used))
        with mpmath.workdps(80):
            assert abs(wv.value.value - single.value) <= wv.value.err + single.err


@pytest.mark.parametrize("r", sorted(MR_TABLE))
def test_eta_reference_is_k_lower_of_m(r):
    assert k_lower(MR_TABLE[r], r) == ETA_TABLE[r]


def test_grid_points_are_exact_decimals():
    pts = GridSpec(0, "0.3", "0.1").points()
    with mpmath.workdps(60):
        assert pts == [mpf(0), mpf("0.1"), mpf("0.2"), mpf("0.3")]
    with pytest.raises(ValueError):
        GridSpec(-1, 1, "0.1")


def test_sign_scan_low_orders_positive_fifth_fails_at_origin():
    res = sign_scan(5, 0, GridSpec(0, "0.5", "0.1", refine_near_failure=False), CTX)
    assert [r.all_positive for r in res] == [True, True, True, True, False]
    assert mpf(res[4].witness["u"]) == 0


def test_first_failures_m0():
    out = first_failures(6, 0, GridSpec(0, "0.2", "0.1"), CTX)
    assert out["first_failing_p"] == 5


def test_scan_result_invariant():
    with pytest.raises(ValueError):
        SignScanResult(1, 0, True, witness={"u": "0"})


@pytest.mark.parametrize("p", [1, 2, 3])
def test_scaled_ratio_tends_to_one(p):
    r = scaled_wronskian_ratio(hp("1.5"), p, CTX)
    assert abs(r.value - 1) < mpf("1e-3")


def test_q_half_half_oracle():
    q = q_eval(hp("0.5"), hp("0.5"), CTX)
    with mpmath.workdps(80):
        ref = mpf(Q_HALF_HALF)
        assert ref > 0
        assert abs(q.value - ref) <= q.err + ref * mpf(10) ** -35


def test_q_against_theta_determinant():
    u, v = hp("0.3"), hp("0.7")
    q = q_eval(u, v, CTX)
    with mpmath.workdps(60):
        s = u + v
        fv0, fv1, fu0, fu1 = theta_f(v, 0), theta_f(v, 1), theta_f(u, 0), theta_f(u, 1)
        fs0, fs1, fs2 = (theta_f(s, k) for k in range(3))
        # cofactor expansion along the first row (mpmath.det treats entries this small as singular)
        ref = -fv0 * (fu0 * fs2 - fs1 * fu1) + fv1 * (fu0 * fs1 - fs0 * fu1)
        assert abs(q.value - ref) <= q.err + abs(ref) * mpf(10) ** -20


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40))
def test_q_is_symmetric(i, j):
    with mpmath.workdps(60):
        u, v = mpf(i) / 20, mpf(j) / 20
    a, b = q_eval(u, v, CTX), q_eval(v, u, CTX)
    with mpmath.workdps(80):
        assert abs(a.value - b.value) <= a.err + b.err


def test_q_rejects_boundary():
    with pytest.raises(ValueError):
        q_eval(0, hp("0.5"), CTX)


def test_q_scan_small_grid_is_positive():
    g = GridSpec("0.1", "1", "0.3")
    rep = q_scan(g, g, CTX)
    # q is positive throughout: the scan does not certify the negativity the check asks for
    assert not rep.passed
    assert rep.params["certified_positive"] == rep.params["points"]


def test_epsilon_sign_pattern():
    rng = random.Random(1)
    for p in rng.sample(range(1, 40), 10):
        assert epsilon(p) in (1, -1)
