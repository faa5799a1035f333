"""Minors D(n,r) of the beta matrix, Turan margins, the Gamma-ratio determinant, and Xi.

D(n,r) = det[beta_{n+j-i}]_{i,j=1..r} with beta_k = 0 for k < 0.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import mpmath
from mpmath import mpf

from .numerics import (DEFAULT_CTX, HPReal, IntPoly, PrecCtx, PrecisionExhausted, as_real,
                       det_exact, det_float)
from .moments import BetaTable, b_moments, betas
from .phi import integrate_phi_weighted
from .scanreport import ScanReport, dec


@dataclass(frozen=True)
class MinorSpec:
    n: int
    r: int

    def __post_init__(self):
        if self.n < 0 or self.r < 1:
            raise ValueError("need n >= 0 and r >= 1")

    def index(self, i: int, j: int) -> int:
        """beta index of entry (i, j), 1-based."""
        return self.n + j - i

    def indices(self) -> list[list[int | None]]:
        return [[self.index(i, j) if self.index(i, j) >= 0 else None for j in range(1, self.r + 1)]
                for i in range(1, self.r + 1)]

    def zero_count(self) -> int:
        return sum(k is None for row in self.indices() for k in row)


@dataclass
class MinorValue:
    value: HPReal
    digits_used: int
    escalations: int

    def to_dict(self) -> dict:
        return {"value": dec(self.value), "err": dec(self.value.err, 5),
                "digits_used": self.digits_used, "escalations": self.escalations}


def _escalating_det(build, ctx: PrecCtx) -> MinorValue:
    """det of build(ctx) at rising precision until it clears 10x its error."""
    esc = 0
    while True:
        try:
            val = det_float(build(ctx), ctx)
            if abs(val.value) >= 10 * val.err:
                return MinorValue(val, ctx.digits, esc)
            ctx = ctx.escalate_for(None)
        except PrecisionExhausted as exc:
            ctx = ctx.escalate_for(exc.lost_digits)
        esc += 1


def minor_detail(spec: MinorSpec, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> MinorValue:
    def build(c):
        bs = betas(spec.n + spec.r - 1, c, table)
        return [[bs[k] if k is not None else HPReal(mpf(0)) for k in row] for row in spec.indices()]

    return _escalating_det(build, ctx)


def minor(spec: MinorSpec, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> HPReal:
    return minor_detail(spec, ctx, table).value


def minor_via_bn(spec: MinorSpec, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> HPReal:
    """D(n,r) assembled from raw moments and exact factorials; only for n > r."""
    if spec.n <= spec.r:
        raise ValueError("the raw-moment form is only used for n > r")

    def build(c):
        ks = sorted({k for row in spec.indices() for k in row})
        bs = dict(zip(ks, b_moments(ks, c, table)))
        with c.work():
            return [[bs[k] / math.factorial(2 * k) for k in row] for row in spec.indices()]

    return _escalating_det(build, ctx).value


def positivity_scan(r: int, n_values, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> ScanReport:
    rows, witnesses = [], []
    low = None
    for n in n_values:
        mv = minor_detail(MinorSpec(n, r), ctx, table)
        v = mv.value
        rows.append({"n": n, "r": r, **mv.to_dict()})
        if v.sign() <= 0:
            witnesses.append({"n": n, "r": r, "value": dec(v)})
        if low is None or v.value < low.value:
            low = v
    return ScanReport(f"D(n,{r}) > 0", not witnesses, {"r": r, "n": [rows[0]["n"], rows[-1]["n"]] if rows else []},
                      witnesses, min_value=low, rows=rows)


def turan_check(n_max: int, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> ScanReport:
    """beta_n^2 > ((n+1)/n) beta_{n-1} beta_{n+1} for n = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    bs = betas(n_max + 1, ctx, table)
    rows, witnesses = [], []
    low = None
    with ctx.work():
        for n in range(1, n_max + 1):
            rhs = bs[n - 1] * bs[n + 1] * HPReal(mpf(n + 1) / n, (mpf(n + 1) / n) * mpf(10) ** -ctx.dps)
            margin = bs[n] * bs[n] - rhs
            ratio = (bs[n] * bs[n]).value / rhs.value
            rows.append({"n": n, "margin": dec(margin), "err": dec(margin.err, 5), "ratio": dec(ratio, 20)})
            if margin.sign() <= 0:
                witnesses.append({"n": n, "margin": dec(margin)})
            rel = margin / (bs[n] * bs[n])
            if low is None or rel.value < low.value:
                low = rel
    return ScanReport("turan", not witnesses, {"n_max": n_max, "digits": ctx.digits}, witnesses,
                      min_value=low, rows=rows,
                      notes=["min_value is the smallest relative margin 1 - ((n+1)/n) beta_{n-1} beta_{n+1} / beta_n^2"])


def exceptional_scan(r_max: int = 6, ctx: PrecCtx = DEFAULT_CTX, eta: dict | None = None,
                     table: BetaTable | None = None, r_min: int = 2) -> ScanReport:
    """D(n,r) > 0 for n = 0..eta(r), r = r_min..r_max.

    ``eta`` maps r to eta(r), normally from a scanned m(r) table; missing
    entries fall back to the reference table.
    """
    from .signreg import ETA_TABLE

    if r_max > 6:
        raise ValueError("exceptional scan is limited to r <= 6")
    rows, witnesses, sources = [], [], {}
    for r in range(r_min, r_max + 1):
        if eta and r in eta:
            e, sources[r] = eta[r], "scan"
        else:
            e, sources[r] = ETA_TABLE[r], "reference"
        for n in range(e + 1):
            mv = minor_detail(MinorSpec(n, r), ctx, table)
            rows.append({"n": n, "r": r, **mv.to_dict()})
            if mv.value.sign() <= 0:
                witnesses.append({"n": n, "r": r, "value": dec(mv.value)})
    return ScanReport("exceptional", not witnesses, {"r_max": r_max, "eta_source": sources}, witnesses, rows=rows)


# ---------------------------------------------------------------------------
# Gamma-ratio determinant


def _linear_factor_counts(perm: tuple, r: int) -> Counter:
    """Multiset of a in prod (N + a), N = 2n, for one permutation's normalised term.

    The prefactor prod_i g(i,n)^{r-i} supplies (N+2i)(N+2i-1); the ratio
    (2n)!/(2n+2nu)! supplies 1/((N+1)...(N+2nu)) for nu > 0 and
    N(N-1)...(N-2|nu|+1) for nu < 0.
    """
    num: Counter = Counter()
    den: Counter = Counter()
    for i in range(1, r):
        num[2 * i] += r - i
        num[2 * i - 1] += r - i
    for i, q in enumerate(perm, start=1):
        nu = q - i
        if nu > 0:
            for a in range(1, 2 * nu + 1):
                den[a] += 1
        elif nu < 0:
            for a in range(0, -2 * nu):
                num[-a] += 1
    for a, c in den.items():
        if num[a] < c:
            raise ArithmeticError(f"factor N+{a} does not cancel for permutation {perm}")
        num[a] -= c
    return +num


def z_poly(perm: tuple, r: int) -> IntPoly:
    """Z(k, y) = prod (1 + a y) over the surviving factors, y = 1/(2n)."""
    counts = _linear_factor_counts(perm, r)
    if sum(counts.values()) != r * (r - 1):
        raise ArithmeticError("normalised component is not a polynomial of the expected size")
    out = IntPoly([1])
    for a, c in sorted(counts.items()):
        for _ in range(c):
            out = out * IntPoly([1, a])
    return out


def perm_sign(perm: tuple) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j] - 1
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class DeltaBarPoly:
    r: int
    delta: tuple
    components: tuple  # (perm, sign, Z IntPoly)

    def poly(self) -> IntPoly:
        return IntPoly(self.delta)

    def leading_zero_count(self) -> int:
        return next((i for i, d in enumerate(self.delta) if d), len(self.delta))

    def zero_pattern_ok(self) -> bool:
        m = self.r * (self.r - 1) // 2
        return all(self.delta[i] == 0 for i in range(min(m, len(self.delta))))

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "delta": [str(d) for d in self.delta],
            "degree": len(self.delta) - 1,
            "zero_pattern_ok": self.zero_pattern_ok(),
            "components": [{"perm": list(p), "sign": s, "z": [str(c) for c in z.coeffs]}
                           for p, s, z in self.components],
        }


def delta_bar_poly(r: int) -> DeltaBarPoly:
    if r < 2:
        raise ValueError("r must be >= 2")
    comps = []
    total = IntPoly([])
    for perm in itertools.permutations(range(1, r + 1)):
        s = perm_sign(perm)
        z = z_poly(perm, r)
        comps.append((perm, s, z))
        total = total + z * s
    return DeltaBarPoly(r, tuple(total.coeffs), tuple(comps))


def delta_bar_direct(n: int, r: int) -> Fraction:
    """Normalised Gamma-ratio determinant by exact evaluation at a given n > r."""
    if n <= r:
        raise ValueError("need n > r")
    f2n = math.factorial(2 * n)
    mat = [[Fraction(f2n, math.factorial(2 * (n + j - i))) for j in range(1, r + 1)] for i in range(1, r + 1)]
    pref = Fraction(1, (2 * n) ** (r * (r - 1)))
    for i in range(1, r):
        pref *= ((2 * n + 2 * i) * (2 * n + 2 * i - 1)) ** (r - i)
    return pref * det_exact(mat)


# ---------------------------------------------------------------------------
# Xi


def xi_eval(t, n_terms: int, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None,
            rel_tol=mpf("1e-10")) -> HPReal:
    """sum_{n < n_terms} beta_n (-t^2)^n with the first omitted term as tail bound."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    bs = betas(n_terms + 1, ctx, table)
    with ctx.work():
        t = as_real(t)
        z = -t * t
        s = HPReal(mpf(0))
        zp = mpf(1)
        for n in range(n_terms):
            s = s + bs[n] * zp
            zp *= z
        nxt = abs(bs[n_terms].value * zp)
        after = abs(bs[n_terms + 1].value * zp * z)
        if after > nxt:
            raise ValueError("terms still growing at the cutoff; raise n_terms")
        if s.value == 0 or nxt > rel_tol * abs(s.value):
            raise ValueError("series tail not small at this t; raise n_terms")
        # decreasing alternating tail: bounded by the first omitted term
        return HPReal(s.value, s.err + nxt)


def xi_quadrature(t, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """int_0^inf Phi(u) cos(u t) du by direct quadrature (oracle for xi_eval)."""
    with ctx.work():
        t = as_real(t)
    wi = integrate_phi_weighted(0, lambda u, du: [mpmath.cos(u * t)], 1, [[1]], ctx)
    with ctx.work():
        return HPReal.rounded(wi.values[0], wi.errors[0])
