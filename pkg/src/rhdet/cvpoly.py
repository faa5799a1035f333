"""CV polynomials p_k(y), their two coefficient representations, and W_r(y).

p_1(y) = 2y - 3 and p_{k+1}(y) = 4y p_k'(y) + (5 - 4y) p_k(y).  The
Hankel determinant W_r(y) = det[p_{i+j+1}(y)] (0-based) is the large-u
shape of the Wronskian of Phi.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mpf

from .numerics import IntPoly, PrecCtx, DEFAULT_CTX, det_exact, det_poly

_lock = threading.Lock()
_cv_cache: list[IntPoly] = [IntPoly([]), IntPoly([-3, 2])]


def mu(r: int) -> int:
    return r * (r - 1) // 2


def epsilon(r: int) -> int:
    return -1 if mu(r) % 2 else 1


@dataclass(frozen=True)
class CvPoly:
    k: int
    poly: IntPoly

    def __post_init__(self):
        if self.poly.degree != self.k:
            raise ValueError(f"p_{self.k} must have degree {self.k}")
        if self.poly[self.k] != (-1) ** (self.k + 1) * 2 * 4 ** (self.k - 1):
            raise ValueError("leading coefficient violates d(k,k) = (-1)^(k+1) 2 4^(k-1)")
        if self.poly[0] != -3 * 5 ** (self.k - 1):
            raise ValueError("constant term violates d(0,k) = -3 5^(k-1)")


def _cv_raw(k: int) -> IntPoly:
    if k < 1:
        raise ValueError("CV polynomials start at k = 1")
    with _lock:
        while len(_cv_cache) <= k:
            p = _cv_cache[-1]
            c = p.coeffs
            # d(j,k+1) = -4 d(j-1,k) + (4j+5) d(j,k)
            nxt = [(4 * j + 5) * (c[j] if j < len(c) else 0) - 4 * (c[j - 1] if j else 0)
                   for j in range(len(c) + 1)]
            _cv_cache.append(IntPoly(nxt))
        return _cv_cache[k]


def cv_poly(k: int) -> CvPoly:
    return CvPoly(k, _cv_raw(k))


def cv_coeff(j: int, k: int) -> int:
    """d(j,k) from the recurrence; zero for j > k."""
    return _cv_raw(k)[j]


@lru_cache(maxsize=None)
def abs_coeff_sum(k: int) -> int:
    """S_k = sum_j |d(j,k)|, so |p_k(y)| <= S_k y^k for y >= 1."""
    return _cv_raw(k).abs_coeff_sum()


# ---------------------------------------------------------------------------
# lower representation


def lower_c(j: int, eta: int) -> Fraction:
    """c(j, eta) = (-1)^(eta+1) (2 eta + 3) / (eta! (j - eta)!)."""
    if not 0 <= eta <= j:
        raise ValueError("need 0 <= eta <= j")
    return Fraction((-1) ** (eta + 1) * (2 * eta + 3), math.factorial(eta) * math.factorial(j - eta))


def lower_rep_coeff(j: int, k: int) -> Fraction:
    if j < 0 or k < 1:
        raise ValueError("need j >= 0, k >= 1")
    return sum((lower_c(j, eta) * (4 * eta + 5) ** (k - 1) for eta in range(j + 1)), Fraction(0))


# ---------------------------------------------------------------------------
# upper representation


@dataclass
class UpperRepTable:
    """s(i, j) for base k in {5, 9}, built from s(i,0)=1, s(1,j)=k^j and
    s(i+1,j) = s(i,j) + s(i+1,j-1)(k+4i)."""

    k_base: int
    s: dict = field(default_factory=dict)

    def __call__(self, i: int, j: int) -> int:
        if j < 0 or i <= 0:
            return 0
        if j == 0:
            return 1
        if i == 1:
            return self.k_base ** j
        key = (i, j)
        if key not in self.s:
            # iterate j upward to keep recursion shallow
            for jj in range(1, j + 1):
                if (i, jj) not in self.s:
                    self.s[(i, jj)] = self(i - 1, jj) + self(i, jj - 1) * (self.k_base + 4 * (i - 1))
        return self.s[key]

    def closed_form(self, i: int, j: int) -> int:
        """Sum over weak compositions nu of j into i parts of prod (k+4(a-1))^nu_a."""
        return sum(
            math.prod((self.k_base + 4 * a) ** nu for a, nu in enumerate(comp))
            for comp in compositions(i, j)
        )


_S5 = UpperRepTable(5)
_S9 = UpperRepTable(9)


def s_table(k_base: int) -> UpperRepTable:
    return {5: _S5, 9: _S9}[k_base]


def upper_rep_coeff(i: int, j: int) -> int:
    """d(i, i+j) = -3 (-4)^i s5(i+1, j-1) + 2 (-4)^(i-1) s9(i, j)."""
    if i < 0 or j < 0 or i + j < 1:
        raise ValueError("need i, j >= 0 and i + j >= 1")
    val = Fraction(-3 * (-4) ** i * _S5(i + 1, j - 1)) + 2 * Fraction(-4) ** (i - 1) * _S9(i, j)
    if val.denominator != 1:
        raise ArithmeticError(f"upper representation not integral at ({i},{j})")
    return val.numerator


def partition_count(i: int, j: int) -> int:
    """N(i,j) = (i+j-1)! / (j! (i-1)!)."""
    if i < 1 or j < 0:
        raise ValueError("need i >= 1, j >= 0")
    return math.factorial(i + j - 1) // (math.factorial(j) * math.factorial(i - 1))


def compositions(i: int, j: int):
    """All (nu_1..nu_i) with nu_a >= 0 summing to j."""
    if i == 1:
        yield (j,)
        return
    for first in range(j, -1, -1):
        for rest in compositions(i - 1, j - first):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Wronskian polynomial


@dataclass(frozen=True)
class WrPoly:
    r: int
    gamma: tuple  # coefficients of eps_r W_r(y)

    @property
    def degree(self) -> int:
        return len(self.gamma) - 1

    def lowest_nonzero(self) -> int:
        return next(i for i, g in enumerate(self.gamma) if g)

    def poly(self) -> IntPoly:
        return IntPoly(self.gamma)

    def w_poly(self) -> IntPoly:
        """W_r itself (without the eps_r factor)."""
        return IntPoly([epsilon(self.r) * g for g in self.gamma])


_wr_cache: dict[int, WrPoly] = {}


def wr_poly(r: int) -> WrPoly:
    if r < 1:
        raise ValueError("r must be >= 1")
    with _lock:
        hit = _wr_cache.get(r)
    if hit is not None:
        return hit
    mat = [[_cv_raw(a + b + 1) for b in range(r)] for a in range(r)]
    w = det_poly(mat)
    out = WrPoly(r, tuple(epsilon(r) * c for c in w.coeffs))
    with _lock:
        _wr_cache[r] = out
    return out


def check_low_zeros(r: int) -> tuple[bool, dict]:
    """gamma(j, r) = 0 for all j < mu(r)."""
    if r < 2:
        raise ValueError("r must be >= 2")
    w = wr_poly(r)
    nonzero = [j for j in range(min(mu(r), len(w.gamma))) if w.gamma[j] != 0]
    return not nonzero, {
        "r": r,
        "mu_r": mu(r),
        "lowest_nonzero_power": w.lowest_nonzero(),
        "violations": nonzero,
    }


def check_degree_sign(r: int) -> tuple[bool, dict]:
    """deg(eps_r W_r) == mu(r+1) with positive leading coefficient."""
    if r < 2:
        raise ValueError("r must be >= 2")
    w = wr_poly(r)
    lead = w.gamma[-1]
    ok = w.degree == mu(r + 1) and lead > 0
    return ok, {
        "r": r,
        "mu_r_plus_1": mu(r + 1),
        "degree": w.degree,
        "leading_gamma": str(lead),
        "leading_positive": lead > 0,
    }


def gamma_mu_closed_form(r: int) -> tuple[Fraction, dict]:
    """{prod_j c(j,j)} * det[(5+4i)^j]^2, and its comparison with gamma(mu(r), r).

    Direct evaluation reproduces the y^mu(r) coefficient of W_r, so the
    gamma coefficient carries one extra eps_r.
    """
    if r < 2:
        raise ValueError("r must be >= 2")
    c_prod = math.prod((lower_c(j, j) for j in range(r)), start=Fraction(1))
    vander = det_exact([[(5 + 4 * i) ** j for j in range(r)] for i in range(r)])
    value = c_prod * vander ** 2
    gamma = wr_poly(r).gamma[mu(r)]
    return value, {
        "r": r,
        "closed_form": str(value),
        "gamma_mu": str(gamma),
        "eps_r": epsilon(r),
        "matches_with_eps": epsilon(r) * value == gamma,
        "matches_without_eps": value == gamma,
    }


# ---------------------------------------------------------------------------
# bound constants for the r = 2 proof


def c_factor(j: int, y, doubled_exponent: bool = False):
    """C_j(y) = 1 / (1 - e^{-2y} 2^{j+2}).

    ``doubled_exponent=True`` gives the variant with 2^{2j+4}/2 in place of 2^{j+2}.
    """
    growth = mpf(2) ** (2 * j + 4) / 2 if doubled_exponent else mpf(2) ** (j + 2)
    return 1 / (1 - mpmath.exp(-2 * y) * growth)


def w2_closed(y):
    return 16 * y * (-15 + 12 * y - 4 * y * y)


def r2_bounds(ctx: PrecCtx = DEFAULT_CTX) -> dict:
    """Recompute the r = 2 bound table at y = pi and check W(y) < 0."""
    with ctx.work():
        y = mpmath.pi
        e3 = mpmath.exp(-3 * y)
        e6 = mpmath.exp(-6 * y)

        def table(doubled_exponent):
            C = lambda j: c_factor(j, y, doubled_exponent)
            return {
                "T1": 2 ** 14 * C(2) * y ** 4 * e3,
                "T2": 2 ** 10 * C(0) * y ** 4 * e3,
                "T3": 2 ** 13 * C(1) * y ** 4 * e3,
                "T4": 2 ** 18 * C(0) * C(2) * y ** 4 * e6,
                "T5": mpf(0),
            }

        w2_pi = w2_closed(y)
        w2_poly_ok = (
            _cv_raw(1) * _cv_raw(3) - _cv_raw(2) * _cv_raw(2) == IntPoly([0, -240, 192, -64])
        )
        used = table(False)
        alt = table(True)
        bound_sum = w2_pi + mpmath.fsum(used.values())
        alt_sum = w2_pi + mpmath.fsum(alt.values())
        ref_table = {"W2": -843.19, "T1": 132.76, "T2": 8.30, "T3": 64.88, "T4": 0.17, "T5": 0.0}
        return {
            "W2_pi": w2_pi,
            "W2_closed_form_ok": w2_poly_ok,
            "W2_below_minus_843": w2_pi < -843,
            "bounds": used,
            "bound_sum": bound_sum,
            "bound_sum_negative": bound_sum < 0,
            "alt_C_variant": {"bounds": alt, "bound_sum": alt_sum},
            "reference_table": ref_table,
            "reference_table_sum": sum(ref_table.values()),
            "reference_stated_sum": -635.80,
        }
