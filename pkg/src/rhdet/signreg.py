"""Wronskian sign tests for Phi and the cumulant kernels, m(r)/eta(r), and q(u,v).

All scans are finite-grid evidence, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Sequence

import mpmath
from mpmath import mpf

from .cvpoly import epsilon, wr_poly
from .numerics import DEFAULT_CTX, HPReal, PrecCtx, PrecisionExhausted, as_real, det_float
from .phi import PhiSeriesParams, kernel_derivs, phi_derivs
from .scanreport import ScanReport, dec

NON_RIGOROUS = "finite grid scan: numerical evidence only, not a proof"


def _coord(x) -> str:
    """Grid coordinate for reports: up to 12 significant digits, trailing zeros dropped."""
    return mpmath.nstr(x, 12)


def _decimal(x) -> Decimal:
    """Grid parameters are decimals; an mpf is read back to 15 significant digits."""
    if isinstance(x, mpmath.mpf):
        x = mpmath.nstr(x, 15)
    try:
        return Decimal(str(x))
    except InvalidOperation as exc:
        raise ValueError(f"not a decimal: {x!r}") from exc


@dataclass(frozen=True)
class GridSpec:
    u_min: object = "0"
    u_max: object = "3"
    step: object = "0.01"
    refine_near_failure: bool = True

    def __post_init__(self):
        lo, hi, h = (_decimal(x) for x in (self.u_min, self.u_max, self.step))
        if lo < 0:
            raise ValueError("grid must start at u >= 0")
        if h <= 0:
            raise ValueError("grid step must be positive")
        if hi < lo:
            raise ValueError("u_max < u_min")

    def points(self) -> list:
        """Grid points as exact decimal multiples of the step, parsed at 60 digits."""
        lo, hi, h = (_decimal(x) for x in (self.u_min, self.u_max, self.step))
        count = int((hi - lo) // h)
        with mpmath.workdps(60):
            return [mpf(str(lo + i * h)) for i in range(count + 1)]


@dataclass
class SignScanResult:
    p: int
    m: int
    all_positive: bool
    witness: dict | None = None
    min_scaled_value: HPReal | None = None
    max_digits_used: int = 0
    sign_change: dict | None = None
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if self.all_positive != (self.witness is None):
            raise ValueError("verdict is failure iff a witness exists")

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "m": self.m,
            "verdict": "all-positive" if self.all_positive else "failure",
            "witness": self.witness,
            "min_scaled_value": None if self.min_scaled_value is None else dec(self.min_scaled_value),
            "max_digits_used": self.max_digits_used,
            "sign_change": self.sign_change,
            "note": NON_RIGOROUS,
        }


def _params(ctx: PrecCtx) -> PhiSeriesParams:
    return PhiSeriesParams(ctx=ctx)


def hankel(vals: Sequence, p: int) -> list:
    return [[vals[i + j] for j in range(p)] for i in range(p)]


@dataclass
class WronskianValue:
    value: HPReal
    digits_used: int
    escalations: int


def wronskian_detail(u, p: int, m: int = 0, ctx: PrecCtx = DEFAULT_CTX) -> WronskianValue:
    """w_p(u) = det[psi^(i+j)(u)] for psi = Psi_m, escalating precision on cancellation."""
    if p < 1:
        raise ValueError("p must be >= 1")
    esc = 0
    while True:
        derivs = kernel_derivs(u, m, 2 * p - 2, _params(ctx))
        try:
            val = det_float(hankel(derivs, p), ctx)
            return WronskianValue(val, ctx.digits, esc)
        except PrecisionExhausted as exc:
            ctx = ctx.escalate_for(exc.lost_digits)
            esc += 1


def wronskian(u, p: int, m: int = 0, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    return wronskian_detail(u, p, m, ctx).value


def wronskians(u, p_max: int, m: int = 0, ctx: PrecCtx = DEFAULT_CTX, stop_at_failure: bool = False):
    """[(p, WronskianValue) for p = 1..p_max], sharing derivative evaluations.

    Precision only ever rises along p, since larger orders cancel more.
    """
    out = []
    derivs_at = {}
    esc = 0
    for p in range(1, p_max + 1):
        while True:
            if ctx.digits not in derivs_at:
                derivs_at[ctx.digits] = kernel_derivs(u, m, 2 * p_max - 2, _params(ctx))
            try:
                val = det_float(hankel(derivs_at[ctx.digits], p), ctx)
                break
            except PrecisionExhausted as exc:
                ctx = ctx.escalate_for(exc.lost_digits)
                esc += 1
        out.append((p, WronskianValue(val, ctx.digits, esc)))
        if stop_at_failure and val.value * epsilon(p) < 0:
            break
    return out


def first_term_scale(u, p: int) -> mpf:
    """(e^{-5u+y}/pi)^p with y = pi e^{4u}; w_p times this is close to W_p(y)."""
    u = as_real(u)
    y = mpmath.pi * mpmath.exp(4 * u)
    return (mpmath.exp(-5 * u + y) / mpmath.pi) ** p


def scaled_wronskian_ratio(u, p: int, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """w_p(u) (e^{-5u+y}/pi)^p / W_p(y): tends to 1 as u grows."""
    w = wronskian(u, p, 0, ctx)
    with ctx.work(10):
        uu = as_real(u)
        y = mpmath.pi * mpmath.exp(4 * uu)
        wp = wr_poly(p).w_poly()(y)
        s = first_term_scale(uu, p)
        return HPReal(w.value * s / wp, w.err * s / abs(wp))


def _bisect_sign_change(u_lo, u_hi, p, m, ctx, iters: int = 20) -> dict:
    """Shrink [u_lo, u_hi] around a sign change of eps_p w_p."""
    e = epsilon(p)
    s_lo = e * wronskian(u_lo, p, m, ctx).value > 0
    with mpmath.workdps(40):
        lo, hi = +as_real(u_lo), +as_real(u_hi)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if (e * wronskian(mid, p, m, ctx).value > 0) == s_lo:
            lo = mid
        else:
            hi = mid
    return {"u_lo": dec(lo, 15), "u_hi": dec(hi, 15)}


def sign_scan(p_max: int, m: int, grid: GridSpec = GridSpec(), ctx: PrecCtx = DEFAULT_CTX,
              keep_rows: bool = False, stop_at_first_failure: bool = False) -> list[SignScanResult]:
    """Check eps_p w_p(u) > 0 over the grid for each p <= p_max."""
    pts = grid.points()
    state = {p: {"witness": None, "min": None, "prev": None, "change": None, "digits": 0, "rows": []}
             for p in range(1, p_max + 1)}
    work = ctx
    for u in pts:
        for p, wv in wronskians(u, p_max, m, work):
            # cancellation grows with u, so start the next point where this one ended
            if wv.digits_used > work.digits:
                work = work.with_digits(wv.digits_used)
            st = state[p]
            e = epsilon(p)
            val = wv.value
            with work.work():
                fs = first_term_scale(u, p)
                scaled = HPReal(e * val.value * fs, val.err * fs)
            st["digits"] = max(st["digits"], wv.digits_used)
            if st["min"] is None or scaled.value < st["min"].value:
                st["min"] = scaled
            positive = e * val.value > 0
            if keep_rows:
                st["rows"].append({"u": _coord(u), "p": p, "m": m, "value": dec(val), "sign": 1 if positive else -1})
            if not positive and st["witness"] is None:
                st["witness"] = {"u": _coord(u), "eps_w": dec(e * val.value), "err": dec(val.err, 5)}
                if grid.refine_near_failure and st["prev"] is not None:
                    st["change"] = _bisect_sign_change(st["prev"], u, p, m, ctx)
            if positive:
                st["prev"] = u
        if stop_at_first_failure and any(st["witness"] for st in state.values()):
            break
    return [
        SignScanResult(p, m, st["witness"] is None, st["witness"], st["min"], st["digits"], st["change"], st["rows"])
        for p, st in state.items()
    ]


# ---------------------------------------------------------------------------
# m(r), eta(r)


def k_lower(m: int, r: int) -> int:
    """k_L = n_L + r - 1 with n_L = m/2 (m even) or (m+1)/2 (m odd)."""
    n_l = m // 2 if m % 2 == 0 else (m + 1) // 2
    return n_l + r - 1


MR_TABLE = {r: m for r, m in zip(range(2, 21), (0, 0, 0, 1, 1, 1, 2, 4, 6, 7, 7, 7, 9, 11, 13, 15, 15, 15, 16))}
ETA_TABLE = {r: e for r, e in zip(range(2, 21), (1, 2, 3, 5, 6, 7, 8, 10, 12, 14, 15, 16, 18, 20, 22, 24, 25, 26, 27))}


class MrNotFound(RuntimeError):
    pass


def first_failures(p_max: int, m: int, grid: GridSpec, ctx: PrecCtx) -> dict:
    """Smallest failing p over the grid for kernel order m (None if all pass).

    Scanning stops at a point as soon as some p fails, so the work is
    bounded by the smallest failing order.
    """
    worst = None
    witness = None
    digits = 0
    work = ctx
    for u in grid.points():
        limit = p_max if worst is None else worst - 1
        if limit < 1:
            break
        for p, wv in wronskians(u, limit, m, work, stop_at_failure=True):
            digits = max(digits, wv.digits_used)
            if wv.digits_used > work.digits:
                work = work.with_digits(wv.digits_used)
            if epsilon(p) * wv.value.value < 0:
                worst, witness = p, {"u": _coord(u), "p": p, "eps_w": dec(epsilon(p) * wv.value.value)}
                break
    return {"m": m, "first_failing_p": worst, "witness": witness, "max_digits_used": digits}


def mr_table(r_max: int, m_cap: int, grid: GridSpec = GridSpec(), ctx: PrecCtx = DEFAULT_CTX) -> dict:
    """m(r) and eta(r) = k_L(m(r)) for r = 2..r_max from one pass per m."""
    scans = []
    m_of = {}
    remaining = set(range(2, r_max + 1))
    for m in range(m_cap + 1):
        if not remaining:
            break
        scan = first_failures(max(remaining), m, grid, ctx)
        scans.append(scan)
        fail = scan["first_failing_p"]
        for r in sorted(remaining):
            if fail is None or r < fail:
                m_of[r] = m
        remaining -= set(m_of)
    rows = []
    for r in range(2, r_max + 1):
        m = m_of.get(r)
        rows.append({
            "r": r,
            "m": m,
            "eta": None if m is None else k_lower(m, r),
            "reference_m": MR_TABLE.get(r),
            "reference_eta": ETA_TABLE.get(r),
        })
    return {"rows": rows, "scans": scans, "m_cap": m_cap, "note": NON_RIGOROUS}


def find_mr(r: int, m_cap: int, grid: GridSpec = GridSpec(), ctx: PrecCtx = DEFAULT_CTX) -> tuple[int, int]:
    if r < 2:
        raise ValueError("r must be >= 2")
    for m in range(m_cap + 1):
        if first_failures(r, m, grid, ctx)["first_failing_p"] is None:
            return m, k_lower(m, r)
    raise MrNotFound(f"no m <= {m_cap} makes every order up to {r} sign-regular on the grid")


# ---------------------------------------------------------------------------
# q(u, v)


def q_eval(u, v, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """3x3 determinant with zero corner in f = Phi' and its first two derivatives.

    | 0      f(v)      f'(v)    |
    | f(u)   f(u+v)    f'(u+v)  |
    | f'(u)  f'(u+v)   f''(u+v) |
    """
    uu = as_real(u)
    vv = as_real(v)
    if uu <= 0 or vv <= 0:
        raise ValueError("q(u, v) needs u, v > 0")
    while True:
        params = _params(ctx)
        fu = phi_derivs(uu, 2, params)[1:]
        fv = phi_derivs(vv, 2, params)[1:]
        with ctx.work(5):
            s = uu + vv
        fs = phi_derivs(s, 3, params)[1:]
        # every nonzero term of the expansion is of size f(u) f(v) f(u+v); exact
        # power-of-two row/column scaling brings all entries near that balance
        ev, es, eu = (mpmath.mag(x.value) for x in (fv[0], fs[0], fu[0]))
        row_shift = (-ev, -es, -es)
        col_shift = (es - eu, 0, 0)
        raw = [
            [HPReal(mpf(0)), fv[0], fv[1]],
            [fu[0], fs[0], fs[1]],
            [fu[1], fs[1], fs[2]],
        ]
        with ctx.work():
            mat = [[HPReal(mpmath.ldexp(x.value, rs + cs), mpmath.ldexp(x.err, rs + cs))
                    for x, cs in zip(row, col_shift)] for row, rs in zip(raw, row_shift)]
        try:
            d = det_float(mat, ctx)
            back = -sum(row_shift) - sum(col_shift)
            return HPReal(mpmath.ldexp(d.value, back), mpmath.ldexp(d.err, back))
        except PrecisionExhausted as exc:
            ctx = ctx.escalate_for(exc.lost_digits)


WITNESS_CAP = 20


def q_scan(u_grid: GridSpec, v_grid: GridSpec, ctx: PrecCtx = DEFAULT_CTX, symmetric: bool = True,
           keep_rows: bool = False) -> ScanReport:
    """Maximum of q over a positive grid; any q >= 0 is a witness.

    With ``symmetric`` only v <= u is evaluated, since q(u,v) = q(v,u).
    The first WITNESS_CAP witnesses are kept; the params carry the full
    count and how many points have a sign separated from the error.
    """
    us = [x for x in u_grid.points() if x > 0]
    vs = [x for x in v_grid.points() if x > 0]
    best = low = None
    arg = None
    witnesses, rows = [], []
    count = nonneg = certain_pos = certain_neg = 0
    for u in us:
        for v in vs:
            if symmetric and v > u and u in vs and v in us:
                continue
            q = q_eval(u, v, ctx)
            count += 1
            if best is None or q.value > best.value:
                best, arg = q, (u, v)
            if low is None or q.value < low.value:
                low = q
            certain_pos += q.value > q.err
            certain_neg += -q.value > q.err
            if keep_rows:
                rows.append({"u": _coord(u), "v": _coord(v), "p": 3, "m": 0, "value": dec(q),
                             "sign": 1 if q.value > 0 else -1})
            if q.value >= 0:
                nonneg += 1
                if len(witnesses) < WITNESS_CAP:
                    witnesses.append({"u": _coord(u), "v": _coord(v), "q": dec(q), "err": dec(q.err, 5)})
    return ScanReport(
        name="q-scan",
        passed=bool(best is not None and best.value < 0 and best.value + best.err < 0),
        params={"points": count, "argmax": None if arg is None else [_coord(arg[0]), _coord(arg[1])],
                "nonnegative_points": nonneg, "certified_positive": certain_pos,
                "certified_negative": certain_neg},
        witnesses=witnesses,
        min_value=low,
        max_value=best,
        rows=rows,
        notes=[NON_RIGOROUS],
    )
