"""Precision context, error-carrying reals, exact polynomials and determinants.

Everything floating goes through mpmath; everything exact uses Python ints
and ``fractions.Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
from mpmath import mpf


class PrecisionExhausted(ArithmeticError):
    """Cancellation consumed the working precision; retry with more digits."""

    def __init__(self, message: str, lost_digits: float | None = None):
        super().__init__(message)
        self.lost_digits = lost_digits


class EscalationCeiling(ArithmeticError):
    """Precision escalation hit its configured ceiling without a usable result."""


@dataclass(frozen=True)
class PrecCtx:
    digits: int = 100
    guard: int = 20
    tail_tol_exponent: int | None = None
    max_digits: int = 3200

    def __post_init__(self):
        if self.digits < 30:
            raise ValueError(f"digits must be >= 30, got {self.digits}")
        if self.guard < 10:
            raise ValueError(f"guard must be >= 10, got {self.guard}")

    @property
    def dps(self) -> int:
        return self.digits + self.guard

    @property
    def tail_exponent(self) -> int:
        if self.tail_tol_exponent is not None:
            return self.tail_tol_exponent
        return self.digits + self.guard

    @property
    def tol(self) -> mpf:
        with mpmath.workdps(self.dps):
            return mpf(10) ** (-self.tail_exponent)

    def work(self, extra: int = 0):
        return mpmath.workdps(self.dps + extra)

    def with_digits(self, digits: int) -> "PrecCtx":
        if digits > self.max_digits:
            raise EscalationCeiling(f"precision ceiling {self.max_digits} digits reached")
        return replace(self, digits=digits)

    def escalate_for(self, lost_digits: float | None) -> "PrecCtx":
        """Enough digits to survive ``lost_digits`` of cancellation.

        A loss close to the working precision is saturated (the result was
        noise), so the precision at least doubles in that case.
        """
        if lost_digits is None or not math.isfinite(lost_digits):
            return self.with_digits(2 * self.digits)
        need = int(lost_digits) + 40
        if lost_digits >= self.digits - 10:
            need = max(need, 2 * self.digits)
        need = max(need, self.digits + 20)
        # round up so repeated escalations land on a few reusable levels
        if need > self.max_digits:
            raise EscalationCeiling(f"precision ceiling {self.max_digits} digits reached")
        return self.with_digits(min(-(-need // 50) * 50, self.max_digits))

    def escalate(self, factor: int = 2) -> "PrecCtx":
        digits = self.digits * factor
        if digits > self.max_digits:
            raise EscalationCeiling(f"precision ceiling {self.max_digits} digits reached")
        return replace(self, digits=digits, tail_tol_exponent=None)


DEFAULT_CTX = PrecCtx()


def unit_roundoff() -> mpf:
    """Relative rounding bound of one mpmath operation at the current precision."""
    return mpmath.ldexp(mpf(1), 1 - mpmath.mp.prec)


def as_real(x) -> mpf:
    """x as an mpf without re-rounding an mpf that is already more precise.

    ``mpf(x)`` rounds to the global precision; this keeps mpf inputs intact
    and converts anything else at the current precision.
    """
    if isinstance(x, HPReal):
        return x.value
    if isinstance(x, mpf):
        return x
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpmath.mpmathify(x)


def _as_mpf(x) -> mpf:
    if isinstance(x, HPReal):
        return x.value
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


@dataclass(frozen=True)
class HPReal:
    """An mpmath real with a first-order absolute error estimate."""

    value: mpf
    err: mpf = mpf(0)

    def __post_init__(self):
        if not mpmath.isfinite(self.err) or self.err < 0:
            raise ValueError(f"err must be finite and nonnegative, got {self.err}")

    @classmethod
    def exact(cls, x) -> "HPReal":
        """Wrap ``x`` and charge the conversion rounding at the current precision."""
        if isinstance(x, HPReal):
            return x
        v = _as_mpf(x)
        if isinstance(x, int) and abs(x) < 2 ** mpmath.mp.prec:
            return cls(v, mpf(0))
        return cls(v, abs(v) * unit_roundoff())

    @classmethod
    def rounded(cls, value, err) -> "HPReal":
        """Round ``value`` to the current precision and charge that rounding to ``err``."""
        v = +mpf(value)
        return cls(v, +mpf(err) + abs(v) * unit_roundoff())

    @staticmethod
    def _lift(x) -> "HPReal":
        return x if isinstance(x, HPReal) else HPReal.exact(x)

    def _round(self, v: mpf, err: mpf) -> "HPReal":
        return HPReal(v, err + abs(v) * unit_roundoff())

    def __add__(self, other):
        o = self._lift(other)
        return self._round(self.value + o.value, self.err + o.err)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return self._round(self.value - o.value, self.err + o.err)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        # exact: must not round to whatever the global precision happens to be
        return HPReal(mpmath.fneg(self.value, exact=True), self.err)

    def __mul__(self, other):
        o = self._lift(other)
        err = abs(self.value) * o.err + abs(o.value) * self.err + self.err * o.err
        return self._round(self.value * o.value, err)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        denom = abs(o.value) - o.err
        if denom <= 0:
            raise ZeroDivisionError("divisor interval contains zero")
        v = self.value / o.value
        return self._round(v, (self.err + abs(v) * o.err) / denom)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __abs__(self):
        return -self if self.value < 0 else self

    def sign(self) -> int:
        """+1/-1 when the error bound excludes zero, else 0."""
        if self.value > self.err:
            return 1
        if self.value < -self.err:
            return -1
        return 0

    def rel_err(self) -> mpf:
        return self.err / abs(self.value) if self.value else mpf("inf")

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"HPReal({mpmath.nstr(self.value, 20)} ± {mpmath.nstr(self.err, 3)})"


# ---------------------------------------------------------------------------
# exact polynomials


class _DensePoly:
    __slots__ = ("coeffs",)
    _zero: object = 0

    def __init__(self, coeffs: Iterable = ()):
        cs = [self._coerce(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @staticmethod
    def _coerce(c):
        return c

    @classmethod
    def monomial(cls, power: int, coeff=1):
        return cls([0] * power + [coeff])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, i: int):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else self._zero

    def __len__(self):
        return len(self.coeffs)

    def __eq__(self, other):
        if isinstance(other, _DensePoly):
            return self.coeffs == other.coeffs
        if other == 0:
            return not self.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def _new(self, coeffs):
        return type(self)(coeffs)

    def __add__(self, other):
        if not isinstance(other, _DensePoly):
            other = self._new([other])
        n = max(len(self), len(other))
        return self._new([self[i] + other[i] for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return self._new([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, _DensePoly):
            return self._new([c * other for c in self.coeffs])
        if self.is_zero() or other.is_zero():
            return self._new([])
        out = [self._zero] * (len(self) + len(other) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return self._new(out)

    __rmul__ = __mul__

    def __call__(self, x):
        acc = self._zero
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self):
        return self._new([i * c for i, c in enumerate(self.coeffs)][1:])

    def divmod_exact(self, other: "_DensePoly"):
        """Quotient and remainder over the rationals."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = [Fraction(c) for c in self.coeffs]
        lead = Fraction(other.coeffs[-1])
        dq = len(rem) - len(other)
        if dq < 0:
            return RatPoly([]), RatPoly(rem)
        quot = [Fraction(0)] * (dq + 1)
        for k in range(dq, -1, -1):
            q = rem[k + other.degree] / lead
            quot[k] = q
            if q:
                for i, b in enumerate(other.coeffs):
                    rem[k + i] -= q * b
        return RatPoly(quot), RatPoly(rem[: other.degree])

    def abs_coeff_sum(self):
        return sum(abs(c) for c in self.coeffs)

    def __repr__(self):
        return f"{type(self).__name__}({list(self.coeffs)!r})"


class IntPoly(_DensePoly):
    """Dense polynomial with big-integer coefficients; index = power."""

    @staticmethod
    def _coerce(c):
        if isinstance(c, Fraction):
            if c.denominator != 1:
                raise ValueError(f"non-integer coefficient {c}")
            return c.numerator
        if not isinstance(c, int):
            raise TypeError(f"IntPoly coefficient must be int, got {type(c).__name__}")
        return c

    def __mul__(self, other):
        if isinstance(other, (Fraction, RatPoly)):
            return RatPoly(self.coeffs) * other
        return super().__mul__(other)

    __rmul__ = __mul__

    def exact_div(self, other: "IntPoly") -> "IntPoly":
        q, r = self.divmod_exact(other)
        if not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return IntPoly(q.coeffs)


class RatPoly(_DensePoly):
    """Dense polynomial with big-rational coefficients."""

    _zero = Fraction(0)

    @staticmethod
    def _coerce(c):
        return Fraction(c)

    def to_int(self) -> IntPoly:
        return IntPoly(self.coeffs)


# ---------------------------------------------------------------------------
# determinants


def _check_square(matrix: Sequence[Sequence]) -> int:
    n = len(matrix)
    if n == 0:
        raise ValueError("determinant of a 0x0 matrix is not supported")
    if any(len(row) != n for row in matrix):
        raise ValueError("matrix must be square")
    return n


def _bareiss(rows: list[list], exact_div) -> object:
    n = len(rows)
    sign = 1
    prev = None
    for k in range(n - 1):
        if rows[k][k] == 0:
            for i in range(k + 1, n):
                if rows[i][k] != 0:
                    rows[k], rows[i] = rows[i], rows[k]
                    sign = -sign
                    break
            else:
                return None
        pivot = rows[k][k]
        for i in range(k + 1, n):
            rik = rows[i][k]
            row_i, row_k = rows[i], rows[k]
            for j in range(k + 1, n):
                v = row_i[j] * pivot - rik * row_k[j]
                row_i[j] = v if prev is None else exact_div(v, prev)
        prev = pivot
    last = rows[n - 1][n - 1]
    return -last if sign < 0 else last


def det_exact(matrix: Sequence[Sequence]) -> Fraction:
    """Exact determinant of a rational matrix by fraction-free elimination."""
    n = _check_square(matrix)
    rows = []
    scale = Fraction(1)
    for row in matrix:
        fr = [Fraction(x) for x in row]
        lcm = 1
        for x in fr:
            lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
        rows.append([int(x * lcm) for x in fr])
        scale /= lcm
    if n == 1:
        return Fraction(rows[0][0]) * scale
    det = _bareiss(rows, lambda a, b: a // b)
    return Fraction(0) if det is None else det * scale


def det_poly(matrix: Sequence[Sequence[IntPoly]]) -> IntPoly:
    """Exact determinant of a matrix of integer polynomials (Bareiss over Z[y])."""
    n = _check_square(matrix)
    rows = [[p if isinstance(p, IntPoly) else IntPoly([p]) for p in row] for row in matrix]
    if n == 1:
        return rows[0][0]
    det = _bareiss(rows, lambda a, b: a.exact_div(b))
    return IntPoly([]) if det is None else det


def det_float(matrix: Sequence[Sequence], ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """Determinant by partially pivoted elimination with cancellation detection.

    The error estimate bounds the effect of entry errors and elimination
    rounding through Hadamard bounds on the cofactors.  When fewer than ten
    significant digits of ``ctx.digits`` survive the cancellation, or the
    result cannot be separated from its error, PrecisionExhausted is raised.
    """
    n = _check_square(matrix)
    with ctx.work():
        a = [[HPReal._lift(x) for x in row] for row in matrix]
        for row in a:
            for x in row:
                if not mpmath.isfinite(x.value):
                    raise ValueError("non-finite matrix entry")
        # exact power-of-two column scaling, so widely spread columns do not
        # inflate the Hadamard bound
        shifts = []
        for j in range(n):
            cmax = max(abs(a[i][j].value) for i in range(n))
            shifts.append(0 if cmax == 0 else -int(mpmath.floor(mpmath.log(cmax, 2))))
        a = [[HPReal(mpmath.ldexp(x.value, s), mpmath.ldexp(x.err, s)) for x, s in zip(row, shifts)]
             for row in a]
        unscale = -sum(shifts)
        vals = [[x.value for x in row] for row in a]
        row_norms = [mpmath.sqrt(mpmath.fsum(v * v for v in row)) for row in vals]
        if any(rn == 0 for rn in row_norms):
            raise PrecisionExhausted("zero row: determinant is exactly zero", mpf("inf"))
        hadamard = mpmath.fprod(row_norms)
        max_in = max(abs(v) for row in vals for v in row)

        m = [row[:] for row in vals]
        det = mpf(1)
        max_seen = max_in
        for k in range(n):
            p = max(range(k, n), key=lambda i: abs(m[i][k]))
            if m[p][k] == 0:
                raise PrecisionExhausted("singular at working precision", mpf("inf"))
            if p != k:
                m[k], m[p] = m[p], m[k]
                det = -det
            piv = m[k][k]
            det *= piv
            for i in range(k + 1, n):
                f = m[i][k] / piv
                if f:
                    row_i, row_k = m[i], m[k]
                    for j in range(k + 1, n):
                        row_i[j] -= f * row_k[j]
                        if abs(row_i[j]) > max_seen:
                            max_seen = abs(row_i[j])

        growth = max_seen / max_in
        u = unit_roundoff()
        input_part = mpmath.fsum(
            mpmath.fsum(x.err for x in a[i]) / row_norms[i] for i in range(n)
        )
        rounding_part = 3 * n * n * u * growth * n
        err = hadamard * (input_part + rounding_part)
        if det == 0:
            raise PrecisionExhausted("determinant rounded to zero", mpf("inf"))
        lost = float(mpmath.log10(hadamard / abs(det)))
        if lost > ctx.digits - 10 or err >= abs(det):
            raise PrecisionExhausted(
                f"cancellation lost {lost:.1f} of {ctx.digits} digits", lost
            )
        return HPReal(mpmath.ldexp(det, unscale), mpmath.ldexp(err, unscale))


def factorial(n: int) -> int:
    if n < 0:
        raise ValueError("factorial of a negative integer")
    return math.factorial(n)


def mpf_from_fraction(x: Fraction) -> mpf:
    return mpf(x.numerator) / x.denominator
