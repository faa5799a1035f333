"""Exact large-n expansion of the normalised minors.

Each permutation k of 1..r contributes sign(k) Z(k,y) B(k), with
B(k) = prod_i b_{n+nu_i} written as a symmetrised moment of
prod_i t_i^{e_i}, e_i = 2(nu_i + r - 1).  Substituting t_i = tau(1 + x_i)
and expanding in symmetrised monomials mu(m, lambda) gives T(m,j,k); pairing
with the y-coefficients z(i,k) of Z(k,y) gives C(i;m,j).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mpf

from .minors import MinorSpec, _escalating_det, delta_bar_poly, perm_sign, z_poly
from .moments import find_peak, raw_moments, shifted_moments
from .numerics import DEFAULT_CTX, HPReal, PrecCtx
from .scanreport import dec

R_MAX = 4


def _check_r(r: int) -> None:
    if not 2 <= r <= R_MAX:
        raise ValueError(f"r must be in 2..{R_MAX}")


@dataclass(frozen=True)
class PermComponent:
    k: int  # 1-based position in lexicographic order
    q: tuple
    sign: int
    nu: tuple

    @property
    def exponents(self) -> tuple:
        r = len(self.q)
        return tuple(2 * (v + r - 1) for v in self.nu)


def components(r: int) -> list[PermComponent]:
    _check_r(r)
    out = []
    for k, q in enumerate(itertools.permutations(range(1, r + 1)), start=1):
        nu = tuple(qi - i for i, qi in enumerate(q, start=1))
        out.append(PermComponent(k, q, perm_sign(q), nu))
    return out


@dataclass(frozen=True)
class SymMonomial:
    """Orbit average of x^lambda, so that x_1 = ... = x_r = x gives x^m."""

    m: int
    j: int
    lam: tuple

    def __call__(self, xs) -> Fraction:
        r = len(xs)
        pad = self.lam + (0,) * (r - len(self.lam))
        orbit = set(itertools.permutations(pad))
        total = sum(math.prod(Fraction(x) ** a for x, a in zip(xs, alpha)) for alpha in orbit)
        return total / len(orbit)


def partitions(m: int, max_parts: int, max_part: int) -> list[tuple]:
    """Partitions of m with at most max_parts parts each <= max_part, reverse-lex order."""
    out = []

    def rec(rest, cap, acc):
        if rest == 0:
            out.append(tuple(acc))
            return
        if len(acc) == max_parts:
            return
        for a in range(min(rest, cap), 0, -1):
            rec(rest - a, a, acc + [a])

    rec(m, max_part, [])
    return out


def monomials(r: int) -> dict[int, list[SymMonomial]]:
    """mu(m, j) for m = 0..2r(r-1)."""
    cap = 4 * (r - 1)
    return {m: [SymMonomial(m, j, lam) for j, lam in enumerate(partitions(m, r, cap), start=1)]
            for m in range(2 * r * (r - 1) + 1)}


def np_count(r: int, m: int) -> int:
    return len(partitions(m, r, 4 * (r - 1)))


def expand_T(r: int) -> dict:
    """T[(m, j)] = [T(m,j,k) for k = 1..r!], exact integers."""
    _check_r(r)
    mons = monomials(r)
    index = {mu.lam: (mu.m, mu.j) for ms in mons.values() for mu in ms}
    comps = components(r)
    T = {key: [0] * len(comps) for key in index.values()}
    for c, comp in enumerate(comps):
        e = comp.exponents
        # prod (1 + x_i)^{e_i}, symmetrised: each x^alpha averages to mu(sorted alpha)
        for alpha in itertools.product(*(range(ei + 1) for ei in e)):
            lam = tuple(sorted((a for a in alpha if a), reverse=True))
            T[index[lam]][c] += math.prod(math.comb(ei, a) for ei, a in zip(e, alpha))
    return T


def z_components(r: int) -> list[list[int]]:
    """z[k-1][i] = coefficient of y^i in Z(k, y)."""
    _check_r(r)
    deg = r * (r - 1)
    out = []
    for comp in components(r):
        coeffs = list(z_poly(comp.q, r).coeffs)
        out.append(coeffs + [0] * (deg + 1 - len(coeffs)))
    return out


@dataclass
class CoeffArray:
    r: int
    comps: list
    T: dict
    z: list
    C: dict = field(default_factory=dict)  # (i, m, j) -> int

    def c(self, i: int, m: int, j: int) -> int:
        return self.C[(i, m, j)]


_carray_cache: dict = {}


def c_array(r: int) -> CoeffArray:
    _check_r(r)
    if r in _carray_cache:
        return _carray_cache[r]
    comps = components(r)
    T = expand_T(r)
    z = z_components(r)
    C = {}
    for i in range(r * (r - 1) + 1):
        for (m, j), tk in T.items():
            C[(i, m, j)] = sum(comp.sign * z[c][i] * tk[c] for c, comp in enumerate(comps))
    out = CoeffArray(r, comps, T, z, C)
    _carray_cache[r] = out
    return out


def check_c_zeros(r: int) -> tuple[bool, dict]:
    """C(i;m,j) = 0 for m <= r(r-1) - 2i - 2, i <= r(r-1)/2 - 1, and C(i;0,1) = delta(i)."""
    arr = c_array(r)
    required, violations = [], []
    for i in range(r * (r - 1) // 2):
        for m in range(r * (r - 1) - 2 * i - 1):
            for j in range(1, np_count(r, m) + 1):
                required.append([i, m, j])
                v = arr.c(i, m, j)
                if v != 0:
                    violations.append({"i": i, "m": m, "j": j, "value": str(v)})
    delta = delta_bar_poly(r).delta
    cross = [arr.c(i, 0, 1) == (delta[i] if i < len(delta) else 0) for i in range(r * (r - 1) + 1)]
    ok = not violations and all(cross)
    return ok, {
        "r": r,
        "required_zeros": required,
        "violations": violations,
        "cross_identity_ok": all(cross),
        "C00": str(arr.c(0, 0, 1)),
    }


# ---------------------------------------------------------------------------
# numerical diagnostic


def _bar_prefactor(n: int, r: int) -> Fraction:
    """y^{r(r-1)} prod_i g(i,n)^{r-i} (2n)!^r as an exact rational."""
    pref = Fraction(math.factorial(2 * n) ** r, (2 * n) ** (r * (r - 1)))
    for i in range(1, r):
        pref *= ((2 * n + 2 * i) * (2 * n + 2 * i - 1)) ** (r - i)
    return pref


def d_bar_direct(n: int, r: int, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """Normalised minor from raw moments: prefactor * det[b_{n+j-i}/(2(n+j-i))!]."""
    if n <= r:
        raise ValueError("need n > r")
    spec = MinorSpec(n, r)
    ks = list(range(n - r + 1, n + r))

    def build(c):
        bs = dict(zip(ks, raw_moments(ks, c)))
        with c.work():
            return [[bs[k] / math.factorial(2 * k) for k in row] for row in spec.indices()]

    d = _escalating_det(build, ctx).value
    pref = _bar_prefactor(n, r)
    with ctx.work():
        return d * HPReal.exact(pref)


def dominance_diagnostic(n: int, ctx: PrecCtx = DEFAULT_CTX, r: int = 2) -> dict:
    """Terms C(i;m,j) y^i I(m,j) at tau = peak, their sum against the direct minor,
    and the magnitude ratio of the (i,m) = (1,0) and (0,2) groups."""
    _check_r(r)
    if n < 10:
        raise ValueError("the diagnostic needs n >= 10")
    arr = c_array(r)
    tau = find_peak(n, ctx, r)
    top = 4 * (r - 1)
    M = shifted_moments(n, top, tau, ctx, r)
    with ctx.work():
        t = tau.value
        y = mpf(1) / (2 * n)
        mons = monomials(r)
        terms = {}
        total = HPReal(mpf(0))
        for (i, m, j), c in arr.C.items():
            if c == 0:
                continue
            lam = mons[m][j - 1].lam
            lam = lam + (0,) * (r - len(lam))
            I = HPReal.exact(t ** (2 * r * (r - 1) - m))
            for a in lam:
                I = I * M[a]
            term = I * (c * y ** i)
            terms[(i, m, j)] = term
            total = total + term
        direct = d_bar_direct(n, r, ctx)
        recon = abs(total.value - direct.value) / abs(direct.value)

        def group(i, m):
            return mpmath.fsum(v.value for (a, b, _), v in terms.items() if (a, b) == (i, m))

        g10, g02 = group(1, 0), group(0, 2)
        ratio = abs(g10) / abs(g02) if g02 else mpf("inf")
        groups = defaultdict(lambda: mpf(0))
        for (a, b, _), v in terms.items():
            groups[(a, b)] += v.value
        largest = sorted(groups, key=lambda k: -abs(groups[k]))[:4]
        return {
            "n": n,
            "r": r,
            "tau": dec(t, 20),
            "d_bar_direct": dec(direct),
            "d_bar_direct_err": dec(direct.err, 5),
            "expansion_sum": dec(total),
            "reconstruction_rel_error": dec(recon, 5),
            "term_1_0": dec(g10),
            "term_0_2": dec(g02),
            "ratio_1_0_over_0_2": dec(ratio, 20),
            "largest_groups": [[a, b, dec(groups[(a, b)], 10)] for a, b in largest],
            "_recon": recon,
            "_ratio": ratio,
            "_direct": direct,
        }
