import json

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from oracles import cos_transform, moment_quad, theta_phi
from rhdet.minors import turan_check
from rhdet.moments import (BetaEntry, BetaTable, CacheCorrupt, beta, betas, cache_roundtrip, find_peak,
                           lambda_moment, raw_moments, shifted_moments)
from rhdet.numerics import PrecCtx

CTX = PrecCtx(digits=40)


@pytest.fixture(scope="module")
def table():
    t = BetaTable()
    betas(12, CTX, t)
    return t


def test_beta0_is_xi_half_over_8(table):
    b0 = beta(0, CTX, table)
    with mpmath.workdps(60):
        assert abs(b0.value - cos_transform(0, 60)) < mpf(10) ** -38


@pytest.mark.parametrize("n", [0, 1, 3, 6])
def test_raw_moments_match_mpmath_quad(n):
    b = raw_moments([n], CTX)[0]
    with mpmath.workdps(50):
        ref = moment_quad(n, 45)
        assert abs(b.value - ref) <= abs(ref) * mpf(10) ** -35


def test_beta_series_matches_xi(table):
    # sum beta_n (-t^2)^n is the cosine transform of Phi, here from zeta
    bs = betas(12, CTX, table)
    with mpmath.workdps(50):
        for t in [mpf(k) / 4 for k in range(1, 5)]:
            s = mpmath.fsum(bs[n].value * (-t * t) ** n for n in range(13))
            assert abs(s - cos_transform(t, 50)) < mpf(10) ** -20


def test_betas_positive_and_decreasing(table):
    bs = betas(12, CTX, table)
    assert all(b.value > 0 for b in bs)
    assert all(bs[n + 1].value < bs[n].value for n in range(12))


def test_error_estimates_are_small(table):
    for b in betas(12, CTX, table):
        assert b.err < abs(b.value) * mpf(10) ** -38


@pytest.mark.parametrize("n", [0, 1, 4])
def test_lambda_at_odd_integers_is_beta(n, table):
    lam = lambda_moment(2 * n + 1, CTX)
    b = beta(n, CTX, table)
    with mpmath.workdps(60):
        assert abs(lam.value - b.value) <= lam.err + b.err + abs(b.value) * mpf(10) ** -38


def test_lambda_rejects_small_argument():
    with pytest.raises(ValueError):
        lambda_moment(mpf("0.5"), CTX)


@pytest.mark.parametrize("n", [3, 10, 40])
def test_find_peak_is_a_critical_point(n):
    tau = find_peak(n, CTX)
    p = 2 * n - 2
    with mpmath.workdps(50):
        g = lambda t: mpmath.log(theta_phi(t, None)) + p * mpmath.log(t)
        assert abs(mpmath.diff(g, tau.value)) < mpf(10) ** -15
        assert mpmath.diff(g, tau.value, 2) < 0


def test_shifted_moment_eta0_is_raw_moment():
    n = 8
    tau = find_peak(n, CTX).value
    sm = shifted_moments(n, 2, tau, CTX)
    b = raw_moments([n - 1], CTX)[0]
    with mpmath.workdps(60):
        assert abs(sm[0].value - b.value) <= abs(b.value) * mpf(10) ** -35
        # first central moment vanishes to leading order only; it is small relative to tau b
        assert abs(sm[1].value) < tau * b.value


def test_turan_inequalities_hold(table):
    rep = turan_check(10, CTX, table)
    assert rep.passed
    assert rep.min_value.value > 0
    for row in rep.rows:
        assert mpf(row["ratio"]) > 1


def _entry(n, digits, v="1.5"):
    return BetaEntry(n=n, digits=digits, value_decimal_string=v, b_n_decimal_string=v,
                     err_decimal_string="1e-40", truncation_U="1.0", timestamp="2026-01-01T00:00:00Z")


def test_table_roundtrip_empty(tmp_path):
    t = cache_roundtrip(BetaTable(), tmp_path / "b.json")
    assert len(t) == 0


def test_table_roundtrip_preserves_strings(tmp_path):
    src = BetaTable()
    ctx = PrecCtx(digits=30)
    betas(29, ctx, src)
    back = cache_roundtrip(src, tmp_path / "b.json")
    assert len(back) == 30
    for n in range(30):
        assert back.get(n, 30) == src.get(n, 30)


def test_merge_keeps_higher_precision():
    a, b = BetaTable(), BetaTable()
    a.put(_entry(0, 50, "0.1"))
    a.put(_entry(1, 30, "0.2"))
    b.put(_entry(0, 40, "0.3"))
    b.put(_entry(1, 60, "0.4"))
    m = a.merge(b)
    assert m.get(0, 0).value_decimal_string == "0.1"
    assert m.get(1, 0).value_decimal_string == "0.4"
    assert m.get(0, 51) is None


def test_checksum_mismatch_raises(tmp_path):
    t = BetaTable()
    t.put(_entry(0, 40))
    doc = json.loads(t.to_json())
    doc["entries"][0]["value_decimal_string"] = "2.5"
    with pytest.raises(CacheCorrupt):
        BetaTable.from_json(json.dumps(doc))
    with pytest.raises(CacheCorrupt):
        BetaTable.from_json("not json")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(30, 200)), max_size=20))
def test_put_policy_keeps_maximum_digits(puts):
    t = BetaTable()
    for n, d in puts:
        t.put(_entry(n, d))
    best = {}
    for n, d in puts:
        best[n] = max(best.get(n, 0), d)
    assert {n: e.digits for n, e in t.entries.items()} == best


def test_beta_rejects_negative_index():
    with pytest.raises(ValueError):
        beta(-1, CTX, BetaTable())
