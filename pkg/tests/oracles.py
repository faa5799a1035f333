"""Independent reference implementations shared by the tests.

Nothing here imports rhdet: these are the oracles the package is checked against.
"""

import mpmath
from mpmath import mpf


def hp(x):
    """Decimal input at high precision (mpf("0.1") at 15 digits is a different point)."""
    with mpmath.workdps(120):
        return mpf(x)


def theta_phi(u, dps=80):
    """Phi from its theta-series definition, independent of the CV polynomials.

    Terms n > 12 are below e^{-pi 169} relative to the first, past 80 digits.
    """
    with mpmath.workdps(dps or mpmath.mp.dps):
        u = mpf(u)
        e4, e5, e9 = mpmath.exp(4 * u), mpmath.exp(5 * u), mpmath.exp(9 * u)
        return mpmath.fsum((2 * mpmath.pi ** 2 * n ** 4 * e9 - 3 * mpmath.pi * n * n * e5)
                           * mpmath.exp(-mpmath.pi * n * n * e4) for n in range(1, 13))


def psi1_closed(u, dps=80):
    """Psi_1(u) = int_u^inf Phi via upper incomplete Gamma functions, termwise in n."""
    with mpmath.workdps(dps):
        def term(n):
            a = mpmath.pi * n * n
            x = a * mpmath.exp(4 * mpf(u))
            return a ** mpf("-0.25") * (mpmath.gammainc(mpf(9) / 4, x) / 2 - 3 * mpmath.gammainc(mpf(5) / 4, x) / 4)
        return mpmath.nsum(term, [1, mpmath.inf])


def riemann_xi(s):
    """xi(s) = s(s-1) pi^{-s/2} Gamma(s/2) zeta(s) / 2 at the current precision."""
    return s * (s - 1) * mpmath.pi ** (-s / 2) * mpmath.gamma(s / 2) * mpmath.zeta(s) / 2


def cos_transform(t, dps=50):
    """int_0^inf Phi(u) cos(ut) du = xi(1/2 + it/2) / 8, from zeta."""
    with mpmath.workdps(dps):
        return mpmath.re(riemann_xi(mpf(1) / 2 + 1j * mpf(t) / 2)) / 8


def moment_quad(n, dps=40):
    """b_n = int_0^inf Phi(t) t^{2n} dt by mpmath quadrature on [0, 3] (the tail is below e^{-pi e^{12}})."""
    with mpmath.workdps(dps):
        return mpmath.quad(lambda t: theta_phi(t, None) * t ** (2 * n), [0, mpf(1) / 2, 1, 3])
