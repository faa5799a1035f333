"""Moments of Phi: b_n, beta_n = b_n/(2n)!, peak-centred shifted moments, and the beta cache.

b_n = int_0^inf Phi(t) t^{2n} dt.  The shifted moments
int_0^inf Phi(t) t^{2n-2r+2} (t - tau)^eta dt feed the large-n expansion.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath
from mpmath import mpf

from .numerics import DEFAULT_CTX, HPReal, PrecCtx, as_real
from .phi import PhiSeriesParams, integrate_phi_weighted, phi_derivs


class CacheCorrupt(ValueError):
    """A persisted beta table failed its checksum or schema check."""


# ---------------------------------------------------------------------------
# peak location


def _peak_leading(p: int, dps: int) -> mpf:
    """Root of 9 - 4 pi e^{4t} + p/t = 0, the peak of the leading-term integrand."""
    with mpmath.workdps(dps):
        f = lambda t: 9 - 4 * mpmath.pi * mpmath.exp(4 * t) + p / t
        lo, hi = mpf(10) ** -6, mpf(1)
        while f(hi) > 0:
            hi *= 2
        if f(lo) < 0:
            raise ArithmeticError("peak bracket failed")
        for _ in range(dps * 4):
            mid = (lo + hi) / 2
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2


def find_peak(n: int, ctx: PrecCtx = DEFAULT_CTX, r: int = 2) -> HPReal:
    """Maximiser tau of log Phi(t) + (2n - 2r + 2) log t.

    Bisection on the leading-term approximation gives the start; Newton on
    Phi'/Phi + p/t with the full series finishes it.
    """
    p = 2 * n - 2 * r + 2
    if n < 2 or p <= 0:
        raise ValueError("find_peak needs n >= 2 and a positive weight power")
    params = PhiSeriesParams(ctx=ctx)
    t = _peak_leading(p, 30)
    with ctx.work(10):
        t = +t
        lo, hi = t / 2, t * 2
        target = mpf(10) ** (-(ctx.digits // 2) - 5)
        for _ in range(200):
            d0, d1, d2 = (x.value for x in phi_derivs(t, 2, params))
            g = d1 / d0 + p / t
            dg = (d2 * d0 - d1 * d1) / (d0 * d0) - p / (t * t)
            if g > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
            if abs(g) < target:
                break
            nt = t - g / dg
            # fall back to bisection when Newton leaves the bracket
            t = nt if lo < nt < hi else (lo + hi) / 2
        else:
            raise ArithmeticError("peak refinement did not converge")
        return HPReal(t, abs(g / dg))


def peak_window(tau, p: int, width: int = 6) -> list:
    """Breakpoints tau +- width sigma from the curvature of the leading-term integrand."""
    tau = as_real(tau)
    curv = 16 * mpmath.pi * mpmath.exp(4 * tau) + p / (tau * tau)
    sigma = 1 / mpmath.sqrt(curv)
    return [x for x in (tau - width * sigma, tau, tau + width * sigma) if x > 0]


# ---------------------------------------------------------------------------
# raw moments and beta


def raw_moments(ns: Sequence[int], ctx: PrecCtx = DEFAULT_CTX) -> list[HPReal]:
    """[b_n for n in ns] from one vector quadrature."""
    ns = list(ns)
    if not ns or min(ns) < 0:
        raise ValueError("moment indices must be nonnegative")
    top = max(ns)
    bps = peak_window(_peak_leading(2 * top, 30), 2 * top) if top >= 2 else []

    def weights(t, dt):
        return [t ** (2 * n) for n in ns]

    maj = [[0] * (2 * n) + [1] for n in ns]
    wi = integrate_phi_weighted(0, weights, len(ns), maj, ctx, breakpoints_t=bps)
    with ctx.work():
        out = [HPReal.rounded(v, e) for v, e in zip(wi.values, wi.errors)]
    for n, h in zip(ns, out):
        _last_cutoff[n] = wi.cutoff_x
    return out


_last_cutoff: dict = {}


def shifted_moments(n: int, eta_max: int, tau, ctx: PrecCtx = DEFAULT_CTX, r: int = 2) -> list[HPReal]:
    """[int Phi(t) t^{2n-2r+2} (t-tau)^eta dt for eta = 0..eta_max], one quadrature."""
    p = 2 * n - 2 * r + 2
    if n < 2 or p < 0:
        raise ValueError("shifted moments need n >= 2 and n >= r - 1")
    if eta_max < 0:
        raise ValueError("eta must be nonnegative")
    with ctx.work(10):
        tau = +as_real(tau)
    bps = peak_window(tau, max(p, 1))

    def weights(t, dt):
        base = t ** p
        d = t - tau
        out = [base]
        for _ in range(eta_max):
            out.append(out[-1] * d)
        return out

    # |t^p (t - tau)^eta| <= t^p (t + |tau|)^eta
    maj = []
    for eta in range(eta_max + 1):
        row = [mpf(0)] * (p + eta + 1)
        for i in range(eta + 1):
            row[p + i] = mpf(math.comb(eta, i)) * abs(tau) ** (eta - i)
        maj.append(row)
    wi = integrate_phi_weighted(0, weights, eta_max + 1, maj, ctx, breakpoints_t=bps)
    with ctx.work():
        return [HPReal.rounded(v, e) for v, e in zip(wi.values, wi.errors)]


def moment_integral(n: int, eta: int, tau, ctx: PrecCtx = DEFAULT_CTX, r: int = 2) -> HPReal:
    return shifted_moments(n, eta, tau, ctx, r)[eta]


def lambda_moment(t, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """lambda(t) = int_0^inf v^{t-1} Phi(v) dv / Gamma(t) for real t > 0."""
    with ctx.work():
        t = +as_real(t)
    if t <= 0:
        raise ValueError("lambda(t) needs t > 0")
    if t < 1:
        raise ValueError("lambda(t) is implemented for t >= 1 (bounded weight at 0)")
    k = int(mpmath.ceil(t - 1))

    def weights(v, dv):
        return [v ** (t - 1)]

    # v^{t-1} <= 1 + v^{k} for v >= 0 and 0 <= t-1 <= k
    maj = [[1] + [0] * (k - 1) + [1]] if k > 0 else [[1]]
    wi = integrate_phi_weighted(0, weights, 1, maj, ctx)
    with ctx.work():
        return HPReal.rounded(wi.values[0] / mpmath.gamma(t), wi.errors[0] / mpmath.gamma(t))


# ---------------------------------------------------------------------------
# beta cache


@dataclass(frozen=True)
class BetaEntry:
    """One cached beta_n; the decimal strings are the canonical values."""

    n: int
    digits: int
    value_decimal_string: str
    b_n_decimal_string: str
    err_decimal_string: str
    truncation_U: str
    timestamp: str

    def value(self) -> mpf:
        return mpf(self.value_decimal_string)

    def hp(self) -> HPReal:
        return HPReal.rounded(mpf(self.value_decimal_string), mpf(self.err_decimal_string))

    def b_hp(self) -> HPReal:
        f = math.factorial(2 * self.n)
        return HPReal.rounded(mpf(self.b_n_decimal_string), mpf(self.err_decimal_string) * f)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


_FIELDS = ("n", "digits", "value_decimal_string", "b_n_decimal_string", "err_decimal_string",
           "truncation_U", "timestamp")


def _checksum(entries: list[dict]) -> str:
    blob = json.dumps(entries, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class BetaTable:
    """beta_n keyed by n; an entry at higher precision replaces a lower one."""

    entries: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def get(self, n: int, digits: int) -> BetaEntry | None:
        e = self.entries.get(n)
        return e if e is not None and e.digits >= digits else None

    def put(self, entry: BetaEntry) -> bool:
        """Insert unless an entry at the same or higher precision exists."""
        with self._lock:
            old = self.entries.get(entry.n)
            if old is not None and old.digits >= entry.digits:
                return False
            self.entries = {**self.entries, entry.n: entry}
            return True

    def merge(self, other: "BetaTable") -> "BetaTable":
        out = BetaTable(dict(self.entries))
        for e in other.entries.values():
            out.put(e)
        return out

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> str:
        rows = [self.entries[n].to_dict() for n in sorted(self.entries)]
        return json.dumps({"format": "rhdet-beta-table", "version": 1, "entries": rows,
                           "sha256": _checksum(rows)}, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BetaTable":
        try:
            doc = json.loads(text)
            rows = doc["entries"]
            digest = doc["sha256"]
        except (ValueError, KeyError, TypeError) as exc:
            raise CacheCorrupt(f"unreadable beta table: {exc}") from exc
        if _checksum(rows) != digest:
            raise CacheCorrupt("beta table checksum mismatch")
        table = cls()
        for row in rows:
            if set(row) != set(_FIELDS):
                raise CacheCorrupt("beta table entry has unexpected fields")
            table.put(BetaEntry(**row))
        return table

    def save(self, path) -> None:
        """Write atomically: temp file in the same directory, then rename."""
        path = os.fspath(path)
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".beta-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(self.to_json())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "BetaTable":
        with open(path) as fh:
            return cls.from_json(fh.read())


def cache_roundtrip(table: BetaTable, path) -> BetaTable:
    table.save(path)
    return BetaTable.load(path)


DEFAULT_TABLE = BetaTable()


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def betas(n_max: int, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> list[HPReal]:
    """[beta_0, ..., beta_{n_max}], computing only entries missing at ctx.digits."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    table = DEFAULT_TABLE if table is None else table
    missing = [n for n in range(n_max + 1) if table.get(n, ctx.digits) is None]
    if missing:
        bs = raw_moments(missing, ctx)
        stamp = _timestamp()
        with ctx.work():
            for n, b in zip(missing, bs):
                f = math.factorial(2 * n)
                beta = b.value / f
                X = _last_cutoff.get(n, mpf(0))
                U = mpmath.log1p(X / mpmath.pi) / 4
                table.put(BetaEntry(
                    n=n,
                    digits=ctx.digits,
                    value_decimal_string=mpmath.nstr(beta, ctx.dps, strip_zeros=False),
                    b_n_decimal_string=mpmath.nstr(b.value, ctx.dps, strip_zeros=False),
                    err_decimal_string=mpmath.nstr(b.err / f + abs(beta) * mpf(10) ** (1 - ctx.dps), 5),
                    truncation_U=mpmath.nstr(U, 10),
                    timestamp=stamp,
                ))
    with ctx.work():
        return [table.get(n, ctx.digits).hp() for n in range(n_max + 1)]


def beta(n: int, ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> HPReal:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return betas(n, ctx, table)[n]


def b_moments(ns: Iterable[int], ctx: PrecCtx = DEFAULT_CTX, table: BetaTable | None = None) -> list[HPReal]:
    """Raw moments b_n through the cache (dense in 0..max(ns))."""
    ns = list(ns)
    table = DEFAULT_TABLE if table is None else table
    betas(max(ns), ctx, table)
    with ctx.work():
        return [table.get(n, ctx.digits).b_hp() for n in ns]
