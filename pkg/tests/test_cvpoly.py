import mpmath
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from rhdet import cvpoly
from rhdet.cvpoly import (IntPoly, abs_coeff_sum, check_degree_sign, check_low_zeros, cv_coeff, cv_poly,
                          epsilon, gamma_mu_closed_form, lower_rep_coeff, mu, partition_count, r2_bounds,
                          s_table, upper_rep_coeff, wr_poly)


def test_p2_p3_printed():
    assert cv_poly(1).poly == IntPoly([-3, 2])
    assert cv_poly(2).poly == IntPoly([-15, 30, -8])
    assert cv_poly(3).poly == IntPoly([-75, 330, -224, 32])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25))
def test_differential_recurrence(k):
    # p_{k+1} = 4 y p_k' + (5 - 4y) p_k
    p = cv_poly(k).poly
    deriv = IntPoly([j * p[j] for j in range(1, k + 1)])
    assert cv_poly(k + 1).poly == IntPoly([0, 4]) * deriv + IntPoly([5, -4]) * p


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 30).flatmap(lambda k: st.tuples(st.integers(0, k), st.just(k))))
def test_representations_agree(jk):
    j, k = jk
    d = cv_coeff(j, k)
    assert lower_rep_coeff(j, k) == d
    assert upper_rep_coeff(j, k - j) == d


def test_phi_series_from_cv_polynomials():
    # Phi^(j)(u) = sum pi n^2 p_{j+1}(pi n^2 e^{4u}) exp(5u - pi n^2 e^{4u}); check j = 0 against the theta form
    with mpmath.workdps(40):
        u = mpf("0.3")
        p1 = cv_poly(1).poly
        series = mpmath.nsum(lambda n: mpmath.pi * n * n * p1(mpmath.pi * n * n * mpmath.exp(4 * u))
                             * mpmath.exp(5 * u - mpmath.pi * n * n * mpmath.exp(4 * u)), [1, mpmath.inf])
        theta = mpmath.nsum(lambda n: (2 * mpmath.pi ** 2 * n ** 4 * mpmath.exp(9 * u)
                                       - 3 * mpmath.pi * n * n * mpmath.exp(5 * u))
                            * mpmath.exp(-mpmath.pi * n * n * mpmath.exp(4 * u)), [1, mpmath.inf])
        assert abs(series - theta) < mpf(10) ** -35


def test_upper_table_closed_form_and_counts():
    for base in (5, 9):
        s = s_table(base)
        for i in range(1, 5):
            for j in range(0, 5):
                assert s(i, j) == s.closed_form(i, j)
    assert partition_count(3, 2) == len(list(cvpoly.compositions(3, 2)))


def test_abs_coeff_sum_bounds_polynomial():
    for k in range(1, 12):
        for y in (1, 2, 7):
            assert abs(cv_poly(k).poly(y)) <= abs_coeff_sum(k) * y ** k


def test_wr_exact_small_r():
    assert list(wr_poly(2).gamma) == [0, 240, -192, 64]
    assert list(wr_poly(3).gamma) == [0, 0, 0, -860160, 737280, -294912, 65536]
    assert list(wr_poly(4).gamma) == [0] * 6 + [190253629440, -169114337280, 72477573120,
                                                -19327352832, 3221225472]


def test_wr_eps_relation():
    for r in range(2, 6):
        w = wr_poly(r)
        assert list(w.w_poly().coeffs) == [epsilon(r) * g for g in w.gamma]


def test_low_zeros_degree_and_sign():
    for r in range(2, 9):
        ok, rep = check_low_zeros(r)
        assert ok and rep["lowest_nonzero_power"] == mu(r)
        ok, rep = check_degree_sign(r)
        assert ok and rep["degree"] == mu(r + 1)


def test_lowest_coefficient_closed_form():
    for r in range(2, 7):
        value, rep = gamma_mu_closed_form(r)
        assert rep["matches_with_eps"]
        assert epsilon(r) * value == wr_poly(r).gamma[mu(r)]


def test_r2_bounds_table():
    rep = r2_bounds()
    b = rep["bounds"]
    assert abs(b["T1"] - mpf("132.76")) <= 1.0
    assert abs(b["T2"] - mpf("8.30")) <= 0.3
    assert abs(b["T3"] - mpf("64.88")) <= 1.0
    assert abs(b["T4"] - mpf("0.17")) <= 0.02
    assert rep["W2_pi"] < -843
    assert rep["bound_sum"] < -600
    assert rep["W2_closed_form_ok"]
    # the printed entries do not add up to the printed total
    assert abs(rep["reference_table_sum"] - rep["reference_stated_sum"]) > 1
