import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from rhdet.cvpoly import c_factor
from rhdet.numerics import PrecCtx
from rhdet.phi import (DerivativeCeiling, PhiSeriesParams, cumulants, cumulants_watson, integrate_phi_weighted,
                       kernel_derivs, omega_upsilon_split, phi, phi_derivs, upsilon_bound, watson_applies)

from oracles import hp, psi1_closed, theta_phi

CTX = PrecCtx(digits=50)
PARAMS = PhiSeriesParams(ctx=CTX)


@pytest.mark.parametrize("u", ["0", "0.1", "0.5", "1", "1.7"])
def test_phi_matches_theta_series(u):
    v = phi(hp(u), PARAMS)
    with mpmath.workdps(80):
        ref = theta_phi(u)
        assert abs(v.value - ref) <= v.err + abs(ref) * mpf(10) ** -48


@pytest.mark.parametrize("u", ["0.2", "0.6"])
def test_derivatives_match_numerical_differentiation(u):
    vals = phi_derivs(hp(u), 3, PARAMS)
    with mpmath.workdps(60):
        for j in range(1, 4):
            ref = mpmath.diff(lambda t: theta_phi(t, None), hp(u), j)
            assert abs(vals[j].value - ref) <= abs(ref) * mpf(10) ** -30


def test_phi_is_even_and_odd_derivative_vanishes_at_zero():
    vals = phi_derivs(mpf(0), 3, PARAMS)
    assert abs(vals[1].value) <= vals[1].err
    assert abs(vals[3].value) <= vals[3].err
    assert vals[0].value > 0 and vals[2].value < 0


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.01, max_value=2.0))
def test_phi_positive_and_decreasing(u):
    v = phi_derivs(hp(u), 1, PARAMS)
    assert v[0].sign() == 1
    assert v[1].sign() == -1


def test_derivative_ceiling():
    with pytest.raises(DerivativeCeiling):
        phi_derivs(mpf("0.5"), 500, PARAMS)


def test_omega_split_identity_and_bound():
    with mpmath.workdps(80):
        y = mpmath.pi * mpmath.exp(4 * hp("0.4"))
    for j in (0, 1, 2):
        s = omega_upsilon_split(y, j, PARAMS)
        with mpmath.workdps(80):
            diff = s.omega.value - s.p_value.value - s.upsilon.value
            assert abs(diff) <= s.omega.err + s.p_value.err + s.upsilon.err
            assert abs(s.upsilon.value) <= upsilon_bound(y, j, c_factor)


@pytest.mark.parametrize("u", ["0", "0.3", "1"])
def test_psi1_matches_incomplete_gamma_oracle(u):
    v = cumulants(hp(u), 1, PARAMS)[1]
    ref = psi1_closed(u)
    with mpmath.workdps(80):
        assert abs(v.value - ref) <= v.err + abs(ref) * mpf(10) ** -45


def test_psi_at_zero_is_beta0():
    # int_0^inf Phi = xi(1/2) / 8, with xi(s) = s(s-1) pi^{-s/2} Gamma(s/2) zeta(s) / 2
    v = cumulants(mpf(0), 1, PARAMS)[1]
    with mpmath.workdps(60):
        s = mpf(1) / 2
        xi = s * (s - 1) * mpmath.pi ** (-s / 2) * mpmath.gamma(s / 2) * mpmath.zeta(s) / 2
        assert abs(v.value - xi / 8) < mpf(10) ** -45


def test_higher_cumulants_by_direct_quadrature():
    u = hp("0.2")
    vals = cumulants(u, 3, PARAMS)
    with mpmath.workdps(40):
        for m in (2, 3):
            # Phi(t) < exp(-pi e^{12}) beyond u + 3, far below 40 digits
            ref = mpmath.quad(lambda t: theta_phi(t, None) * (t - u) ** (m - 1), [u, u + 1, u + 3]) / mpmath.factorial(m - 1)
            assert abs(vals[m].value - ref) <= abs(ref) * mpf(10) ** -25


@pytest.mark.parametrize("u", ["1.5", "2"])
def test_watson_series_matches_quadrature(u):
    ctx = PrecCtx(digits=50)
    uu = hp(u)
    assert watson_applies(uu, ctx.dps)
    w = cumulants_watson(uu, 3, ctx)
    maj = [[1], [0, 1], [0, 0, mpf(1) / 2]]
    q = integrate_phi_weighted(uu, lambda t, dt: [1, dt, dt * dt / 2], 3, maj, ctx)
    with mpmath.workdps(ctx.dps + 20):
        for m in range(3):
            assert abs(w[m].value - q.values[m]) <= w[m].err + q.errors[m]
            assert abs(w[m].value - q.values[m]) <= abs(q.values[m]) * mpf(10) ** -45


def test_watson_psi1_matches_incomplete_gamma():
    w = cumulants_watson(mpf(2), 1, CTX)[0]
    ref = psi1_closed("2", 120)
    with mpmath.workdps(120):
        assert abs(w.value - ref) <= w.err
        assert abs(w.value - ref) <= abs(ref) * mpf(10) ** -45


def test_kernel_derivative_signs():
    # d/du Psi_m = -Psi_{m-1}
    u = hp("0.4")
    kd = kernel_derivs(u, 2, 4, PARAMS)
    ps = cumulants(u, 2, PARAMS)
    ph = phi_derivs(u, 2, PARAMS)
    assert kd[0].value == ps[2].value
    assert kd[1].value == (-ps[1]).value
    assert kd[2].value == ps[0].value
    assert kd[3].value == ph[1].value
    assert kd[4].value == ph[2].value
