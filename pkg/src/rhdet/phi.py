"""The kernel Phi(u), its derivatives, the n >= 2 split, and the cumulants Psi_m.

Phi(u) = sum_n (2 pi^2 n^4 e^{9u} - 3 pi n^2 e^{5u}) exp(-pi n^2 e^{4u}), and
termwise Phi^(j)(u) = sum_n pi n^2 p_{j+1}(pi n^2 e^{4u}) exp(5u - pi n^2 e^{4u}).

Integrals of Phi against a weight are done in x = Y (e^{4(t-u0)} - 1),
Y = pi e^{4 u0}, where exp(-pi n^2 e^{4t}) = exp(-n^2 (Y + x)) and the decay
becomes a plain exponential in x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import mpmath
from mpmath import mpf

from .cvpoly import abs_coeff_sum, cv_poly
from .numerics import DEFAULT_CTX, HPReal, PrecCtx, as_real, unit_roundoff
from .tanhsinh import QuadratureError, tanh_sinh_panels


class DerivativeCeiling(ValueError):
    """Requested derivative order exceeds the configured ceiling."""


@dataclass(frozen=True)
class PhiSeriesParams:
    ctx: PrecCtx = DEFAULT_CTX
    n_max_hard: int = 200
    j_max: int = 60


DEFAULT_PARAMS = PhiSeriesParams()


_mpf = as_real


@lru_cache(maxsize=None)
def _coeff_guard(k: int) -> int:
    # digits that Horner evaluation of p_k can lose to its own coefficients
    return len(str(abs_coeff_sum(k))) + 2


def exp_guard(u) -> int:
    """Digits lost in exp(-y), y = pi e^{4u}: the argument's rounding is scaled by y."""
    return int(float(u) * 4 * 0.4343 + 0.5) + 3


def _cv_coeffs(k: int) -> list[int]:
    return cv_poly(k).poly.coeffs


def _horner_abs(coeffs, y):
    """(p(y), sum |c_j| y^j) for integer coefficients."""
    v = mpf(0)
    a = mpf(0)
    for c in reversed(coeffs):
        v = v * y + c
        a = a * y + abs(c)
    return v, a


def phi_derivs(u, j_max: int, params: PhiSeriesParams = DEFAULT_PARAMS, n_terms: int | None = None) -> list[HPReal]:
    """[Phi^(0)(u), ..., Phi^(j_max)(u)] with tail and rounding in ``err``.

    The tail beyond the last term N is bounded by 2 * pi (N+1)^2 S_k
    y_{N+1}^k e^{5u - y_{N+1}}, valid once successive majorant terms shrink
    by at least half.  ``n_terms`` forces N (used to test truncation).
    """
    if j_max < 0:
        raise ValueError("derivative order must be nonnegative")
    if j_max > params.j_max:
        raise DerivativeCeiling(f"order {j_max} exceeds ceiling {params.j_max}")
    ctx = params.ctx
    u0 = _mpf(u)
    if u0 < 0:
        raise ValueError("phi_derivs needs u >= 0 (Phi is even)")
    ks = range(1, j_max + 2)
    guard = _coeff_guard(j_max + 1) + exp_guard(u0)
    with ctx.work(guard):
        u0 = +u0
        E = mpmath.exp(4 * u0)
        Y = mpmath.pi * E
        q = mpmath.exp(-Y)
        e5u = mpmath.exp(5 * u0)
        tol = mpf(10) ** (-ctx.tail_exponent)
        coeffs = [_cv_coeffs(k) for k in ks]
        S = [abs_coeff_sum(k) for k in ks]
        sums = [mpf(0)] * len(ks)
        abs_sums = [mpf(0)] * len(ks)
        qn = q  # q^{n^2}
        step = q ** 3  # q^{2n+1}
        q2 = q * q
        n = 1
        tails = None
        while True:
            y = Y * n * n
            pref = mpmath.pi * n * n * e5u * qn
            for i, c in enumerate(coeffs):
                v, a = _horner_abs(c, y)
                sums[i] += pref * v
                abs_sums[i] += pref * a
            # majorant of the next term and the ratio test beyond it
            n1 = n + 1
            y1 = Y * n1 * n1
            q_next = qn * step
            ratio_ok = True
            bounds = []
            for i, k in enumerate(ks):
                b = mpmath.pi * n1 * n1 * S[i] * y1 ** k * e5u * q_next
                bounds.append(b)
                r = (mpf(n1 + 1) / n1) ** (2 + 2 * k) * mpmath.exp(-mpmath.pi * (2 * n1 + 1) * E)
                if r > mpf(1) / 2:
                    ratio_ok = False
            if n_terms is not None:
                done = n >= n_terms
            else:
                done = ratio_ok and all(b <= tol * s for b, s in zip(bounds, abs_sums))
            if done:
                if not ratio_ok:
                    raise ArithmeticError("forced truncation before the tail bound applies")
                tails = [2 * b for b in bounds]
                break
            if n >= params.n_max_hard:
                raise ArithmeticError(f"series did not converge within {params.n_max_hard} terms")
            qn = q_next
            step *= q2
            n += 1
        rnd = unit_roundoff() * 8
        # Horner rounding plus the exp argument's rounding magnified by y_N
        amp = len(coeffs[-1]) + 4 + Y * n * n
        out = [(s, t + a * rnd * amp) for s, a, t in zip(sums, abs_sums, tails)]
    with ctx.work():
        return [HPReal.rounded(s, e) for s, e in out]


def phi_deriv(u, j: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> HPReal:
    return phi_derivs(u, j, params)[j]


def phi(u, params: PhiSeriesParams = DEFAULT_PARAMS) -> HPReal:
    return phi_derivs(u, 0, params)[0]


def phi_value_fast(t, n_max: int | None = None) -> mpf:
    """Phi(t) at the current mpmath precision, no error bookkeeping."""
    E = mpmath.exp(4 * t)
    q = mpmath.exp(-mpmath.pi * E)
    a = 2 * mpmath.pi ** 2 * mpmath.exp(9 * t)
    b = 3 * mpmath.pi * mpmath.exp(5 * t)
    tiny = mpmath.eps
    s = mpf(0)
    qn, step, q2 = q, q ** 3, q * q
    n = 1
    while True:
        nn = n * n
        term = (a * nn * nn - b * nn) * qn
        s += term
        if abs(term) <= tiny * abs(s) or (n_max and n >= n_max):
            return s
        qn *= step
        step *= q2
        n += 1


# ---------------------------------------------------------------------------
# Omega / Upsilon split at y = pi e^{4u}


@dataclass(frozen=True)
class OmegaSplit:
    y: HPReal
    j: int
    omega: HPReal
    p_value: HPReal
    upsilon: HPReal


def omega_upsilon_split(y, j: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> OmegaSplit:
    """Omega_j(y) = Phi^(j)(u) e^{-5u+y}/pi = p_{j+1}(y) + Upsilon_j(y).

    Upsilon_j is summed directly over n >= 2; Omega_j comes from the full
    derivative series, so the identity is a genuine cross-check.
    """
    if j not in (0, 1, 2):
        raise ValueError("split is defined for j = 0, 1, 2")
    ctx = params.ctx
    with ctx.work(10):
        yv = _mpf(y)
        if yv < mpmath.pi - mpf(10) ** (-ctx.dps):
            raise ValueError("omega_upsilon_split needs y >= pi")
        yv = max(yv, mpmath.pi) if yv < mpmath.pi else yv
        u = mpmath.log(yv / mpmath.pi) / 4
        coeffs = _cv_coeffs(j + 1)
        pj, _ = _horner_abs(coeffs, yv)
        tol = mpf(10) ** (-ctx.tail_exponent)
        ups = mpf(0)
        n = 2
        while True:
            y_n = n * n * yv
            term = n * n * _horner_abs(coeffs, y_n)[0] * mpmath.exp(yv - y_n)
            ups += term
            majorant = (n + 1) ** 2 * abs_coeff_sum(j + 1) * ((n + 1) ** 2 * yv) ** (j + 1) * mpmath.exp(yv - (n + 1) ** 2 * yv)
            if majorant <= tol * (abs(pj) + abs(ups)) / 4:
                ups_err = 2 * majorant
                break
            n += 1
        d = phi_derivs(u, j, params)[j]
        scale = mpmath.exp(-5 * u + yv) / mpmath.pi
        ov = d.value * scale
        # exp(y) magnifies the rounding of its argument by y
        omega = HPReal.rounded(ov, d.err * scale + abs(ov) * unit_roundoff() * (yv + 8))
        pv = HPReal(pj, abs(pj) * unit_roundoff() * 4)
        upsilon = HPReal(ups, ups_err + abs(ups) * unit_roundoff() * 16)
        return OmegaSplit(HPReal.exact(yv), j, omega, pv, upsilon)


def upsilon_bound(y, j: int, c_j: Callable) -> mpf:
    """2^{4j+5} C_j(y) y^{j+1} e^{-3y}."""
    y = as_real(y)
    return mpf(2) ** (4 * j + 5) * c_j(j, y) * y ** (j + 1) * mpmath.exp(-3 * y)


# ---------------------------------------------------------------------------
# integrals of Phi against weights


@dataclass
class WeightedIntegral:
    """Integral over t in [u0, inf) of Phi(t) w_c(t), one value per weight."""

    u0: mpf
    values: list
    errors: list
    cutoff_x: mpf
    level: int


def _phi_x_integrand(u0, n_terms: int):
    """Return g(x) with Phi(t) dt = e^{5 u0 - Y} g(x) dx, paired with t(x) - u0."""
    E = mpmath.exp(4 * u0)
    Y = mpmath.pi * E
    half_pi = mpmath.pi / 2
    # per-n constants, each carrying e^{-(n^2-1) Y}
    c1, c2 = [], []
    for n in range(1, n_terms + 1):
        nn = n * n
        shift = mpmath.exp(-(nn - 1) * Y)
        c1.append(half_pi * nn * nn * shift)
        c2.append(mpf(3) / 4 * nn / E * shift)
    eps = mpmath.eps

    def g(x):
        s = x / Y
        one_s = 1 + s
        ex = mpmath.exp(-x)
        total = c1[0] * one_s - c2[0]
        exn = ex
        step = ex ** 3
        e2 = ex * ex
        for n in range(1, n_terms):
            exn *= step
            step *= e2
            lead = c1[n] * exn
            if lead < eps * abs(total):
                break
            total += (lead * one_s - c2[n] * exn) / ex
        return total * ex * mpmath.root(one_s, 4), mpmath.log1p(s) / 4

    return g, Y


def _n_terms_for(Y, dps) -> int:
    # e^{-(n^2-1) Y} below 10^{-dps} relative to n = 1
    need = dps * math.log(10) / float(Y) + 1
    return max(2, int(math.isqrt(int(need) + 1)) + 2)


def integrate_phi_weighted(
    u0,
    weights: Callable,
    nvec: int,
    majorant: Sequence[Sequence],
    ctx: PrecCtx = DEFAULT_CTX,
    rel_tol=None,
    breakpoints_t: Sequence = (),
) -> WeightedIntegral:
    """Integrate Phi(t) * weights(t)[c] over [u0, inf).

    ``weights(t, dt)`` receives t and dt = t - u0 and returns ``nvec`` values.
    ``majorant[c]`` lists nonnegative a_i with |w_c(t)| <= sum_i a_i (t-u0)^i,
    which bounds the tail beyond the cutoff through upper incomplete Gamma
    functions.  Results are relative to the computed value (one digit slack).
    """
    extra = 15 + exp_guard(mpf(u0))
    with ctx.work(extra):
        u0 = +mpf(u0)
        Y = mpmath.pi * mpmath.exp(4 * u0)
        n_terms = _n_terms_for(Y, ctx.dps + extra)
        g, _ = _phi_x_integrand(u0, n_terms)
        tol = mpf(rel_tol) if rel_tol is not None else mpf(10) ** (-ctx.tail_exponent)
        a = 1 - mpf(5) / (4 * Y)
        # |integrand| <= 2 (pi/2) e^{-a x} (x/(4Y))^i per majorant power
        def tail(X, c):
            return mpmath.fsum(
                2 * (mpmath.pi / 2) * ai * (4 * Y) ** (-i) * mpmath.gammainc(i + 1, a * X) / a ** (i + 1)
                for i, ai in enumerate(majorant[c]) if ai
            )

        def f(x):
            gx, dt = g(x)
            w = weights(u0 + dt, dt)
            return [gx * wc for wc in w]

        bps = []
        for b in breakpoints_t:
            xb = Y * (mpmath.exp(4 * (as_real(b) - u0)) - 1)
            if xb > 0:
                bps.append(xb)
        # cheap rough pass fixes per-component magnitudes for the tail test
        reach = max([mpf(256)] + [4 * b for b in bps])
        with mpmath.workdps(30):
            rough = tanh_sinh_panels(f, sorted(set([mpf(0)] + bps + [reach])), nvec, mpf(10) ** -8,
                                     relative=True, dps=30, max_level=8)
        mags = [abs(v) for v in rough.values]
        X = mpf(64)
        while True:
            tails = [tail(X, c) for c in range(nvec)]
            if all(t <= tol * m / 100 for t, m in zip(tails, mags)):
                break
            X *= 2
            if X > 10 ** 7:
                raise QuadratureError("tail bound never fell below tolerance")
        pts = [mpf(0)] + [b for b in bps if b < X]
        # one panel is cheapest: the rule's endpoint clustering already
        # resolves the e^{-x} decay
        pts = sorted(set(pts)) + [X]
        res = tanh_sinh_panels(f, pts, nvec, tol / 10, relative=True, dps=mpmath.mp.dps)
        pref = mpmath.exp(5 * u0 - Y)
        vals = [pref * v for v in res.values]
        errs = [pref * (e + t) for e, t in zip(res.errors, tails)]
        for v, e in zip(vals, errs):
            if e > tol * abs(v) * 10:
                raise QuadratureError("weighted integral missed its tolerance")
        return WeightedIntegral(u0, vals, errs, X, res.level)


# ---------------------------------------------------------------------------
# cumulants


@dataclass(frozen=True)
class CumulantValue:
    m: int
    u: HPReal
    value: HPReal


_cum_cache: dict = {}
_watson_cache: dict = {}

# the expansion is used once e^{-Y} is below 10^{-WATSON_MARGIN * dps}
WATSON_MARGIN = 1.5


def _conv(a, b, n):
    return [mpmath.fsum(a[i] * b[j - i] for i in range(j + 1) if a[i] and b[j - i]) for j in range(n)]


def _watson_coeffs(k: int, n: int, dps: int):
    """j! [s^j] (1+s)^{e} (log1p(s)/4)^k / k! for e = 5/4 and e = 1/4, j < n."""
    hit = _watson_cache.get(k)
    if hit is not None and hit[0] >= dps and len(hit[1]) >= n:
        return hit[1], hit[2]
    with mpmath.workdps(dps):
        def binom(e):
            c = [mpf(1)]
            for j in range(1, n):
                c.append(c[-1] * (e - j + 1) / j)
            return c

        log4 = [mpf(0)] + [mpf((-1) ** (j + 1)) / (4 * j) for j in range(1, n)]
        lk = [mpf(1)] + [mpf(0)] * (n - 1)
        for i in range(1, k + 1):
            lk = [c / i for c in _conv(lk, log4, n)]
        fact = [mpf(1)]
        for j in range(1, n):
            fact.append(fact[-1] * j)
        a = [c * f for c, f in zip(_conv(binom(mpf(5) / 4), lk, n), fact)]
        b = [c * f for c, f in zip(_conv(binom(mpf(1) / 4), lk, n), fact)]
    _watson_cache[k] = (dps, a, b)
    return a, b


def watson_applies(u, dps: int) -> bool:
    """Whether Y = pi e^{4u} is large enough for the asymptotic cumulant series."""
    y = math.pi * math.exp(4 * float(u))
    return y >= WATSON_MARGIN * dps * math.log(10) + 50


def cumulants_watson(u, m_max: int, ctx: PrecCtx = DEFAULT_CTX) -> list[HPReal]:
    """[Psi_1(u), ..., Psi_{m_max}(u)] from the termwise-integrated expansion in x/Y.

    With x = Y (e^{4(t-u)} - 1) the n = 1 integrand is e^{-x} times a
    function of s = x/Y analytic for Re s > -1, so integrating its Taylor
    series term by term gives an asymptotic series whose optimal error is of
    order e^{-Y}.  The truncation error is estimated by twice the first
    omitted term; n >= 2 terms carry e^{-3Y} and are bounded, not summed.
    """
    u0 = _mpf(u)
    extra = 15 + exp_guard(u0)
    dps = ctx.dps + extra
    if not watson_applies(u0, dps):
        raise ValueError("Y too small for the asymptotic cumulant series")
    with mpmath.workdps(dps):
        u0 = +u0
        E = mpmath.exp(4 * u0)
        Y = mpmath.pi * E
        tol = mpf(10) ** (-ctx.tail_exponent - 2)
        pref = mpmath.exp(5 * u0 - Y)
        c1 = mpmath.pi / 2
        c2 = mpf(3) / (4 * E)
        out = []
        for k in range(m_max):
            n = 64
            while True:
                a, b = _watson_coeffs(k, n, dps)
                s = mpf(0)
                mag = mpf(0)
                z = mpf(1)
                done = None
                for j in range(n):
                    term = (c1 * a[j] - c2 * b[j]) * z
                    s += term
                    mag += abs(term)
                    if j > k + 1 and abs(term) <= tol * abs(s):
                        # one more term serves as the truncation estimate
                        nxt = (c1 * a[j + 1] - c2 * b[j + 1]) * z / Y if j + 1 < n else abs(term)
                        done = 2 * (abs(term) + abs(nxt))
                        break
                    z /= Y
                if done is not None:
                    break
                if n > Y / 4:
                    raise ArithmeticError("asymptotic cumulant series did not settle")
                n *= 2
            # n >= 2 contributions: |g_n| <= 2 pi n^4 e^{-(n^2-1)Y} e^{-n^2 x} (1+s)^{5/4+k}
            higher = 4 * mpmath.pi * mpmath.exp(-3 * Y)
            err = done + higher + mag * unit_roundoff() * (n + 8)
            out.append((pref * s, pref * err + abs(pref * s) * unit_roundoff() * (Y + 8)))
    with ctx.work():
        return [HPReal.rounded(v, e) for v, e in out]


def cumulants(u, m_max: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> list[HPReal]:
    """[Psi_0(u), ..., Psi_{m_max}(u)] with Psi_m = (1/(m-1)!) int_u^inf Phi(t)(t-u)^{m-1} dt.

    For large Y the asymptotic series is used; otherwise all orders share one
    vector quadrature.  Results are cached per (u, ctx) and reused for any
    lower m_max.
    """
    if m_max < 0:
        raise ValueError("cumulant order must be nonnegative")
    ctx = params.ctx
    u0 = _mpf(u)
    if u0 < 0:
        raise ValueError("cumulants need u >= 0")
    key = (u0._mpf_, ctx.digits, ctx.guard, ctx.tail_exponent)
    hit = _cum_cache.get(key)
    if hit is not None and len(hit) > m_max:
        return hit[: m_max + 1]
    out = [phi_derivs(u0, 0, params)[0]]
    if m_max >= 1 and watson_applies(u0, ctx.dps + 15 + exp_guard(u0)):
        out += cumulants_watson(u0, m_max, ctx)
    elif m_max >= 1:
        facts = [mpf(math.factorial(k)) for k in range(m_max)]

        def weights(t, dt):
            out, p = [], mpf(1)
            for k in range(m_max):
                out.append(p / facts[k])
                p *= dt
            return out

        maj = [[0] * k + [1 / facts[k]] for k in range(m_max)]
        wi = integrate_phi_weighted(u0, weights, m_max, maj, ctx)
        with ctx.work():
            out += [HPReal.rounded(v, e) for v, e in zip(wi.values, wi.errors)]
    if len(_cum_cache) > 20000:
        _cum_cache.clear()
    _cum_cache[key] = out
    return out


def cumulant(u, m: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> CumulantValue:
    vals = cumulants(u, m, params)
    with params.ctx.work():
        uu = u if isinstance(u, HPReal) else HPReal.exact(mpf(u))
    return CumulantValue(m, uu, vals[m])


def kernel_derivs(u, m: int, d_max: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> list[HPReal]:
    """d-th derivatives of Psi_m for d = 0..d_max.

    d <= m gives (-1)^d Psi_{m-d}(u); d > m gives (-1)^m Phi^(d-m)(u).
    """
    if m < 0 or d_max < 0:
        raise ValueError("orders must be nonnegative")
    psis = cumulants(u, m, params) if m else None
    phis = phi_derivs(u, max(0, d_max - m), params)
    out = []
    for d in range(d_max + 1):
        if d <= m:
            v = psis[m - d] if m else phis[0]
            out.append(v if d % 2 == 0 else -v)
        else:
            v = phis[d - m]
            out.append(v if m % 2 == 0 else -v)
    return out


def cumulant_kernel_deriv(u, m: int, d: int, params: PhiSeriesParams = DEFAULT_PARAMS) -> HPReal:
    return kernel_derivs(u, m, d, params)[d]
