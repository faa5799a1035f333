"""Doubling tanh-sinh quadrature at arbitrary precision.

Panels are refined level-synchronously: level l uses step 2^-l and only the
new (odd) abscissae are evaluated.  Convergence is judged on the total over
all panels, so negligible panels never force extra levels.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import mpmath
from mpmath import mpf

from .numerics import HPReal, PrecCtx, DEFAULT_CTX, unit_roundoff


class QuadratureError(ArithmeticError):
    """Refinement did not meet the tolerance within the allowed levels."""


@dataclass(frozen=True)
class QuadSpec:
    """What to integrate over and how accurately.

    Either ``upper`` is given, or ``tail_bound(U)`` bounds the integral
    beyond U and the cutoff is found by doubling.  ``target_tol`` is
    absolute unless ``relative`` is set.
    """

    lower: object
    upper: object = None
    tail_bound: Optional[Callable] = None
    target_tol: object = None
    relative: bool = False
    breakpoints: Sequence = ()
    max_level: int = 14
    min_level: int = 3


_node_lock = threading.Lock()
_node_cache: dict = {}


def _level_nodes(level: int, dps: int):
    """(d_k, w_k) pairs new at ``level``: d = 1 - x is the distance to the
    right endpoint of [-1, 1], w the tanh-sinh weight without the step."""
    key = (level, dps)
    with _node_lock:
        hit = _node_cache.get(key)
    if hit is not None:
        return hit
    with mpmath.workdps(dps):
        h = mpf(2) ** (-level)
        cutoff = mpf(10) ** (-(dps + 10))
        half_pi = mpmath.pi / 2
        out = []
        start, stride = (0, 1) if level == 0 else (1, 2)
        i = start
        while True:
            t = i * h
            z = half_pi * mpmath.sinh(t)
            ez = mpmath.exp(z)
            cz = (ez + 1 / ez) / 2
            d = 2 / (ez * ez + 1)
            w = half_pi * mpmath.cosh(t) / (cz * cz)
            if w < cutoff:
                break
            out.append((d, w, i == 0))
            i += stride
    with _node_lock:
        _node_cache[key] = out
    return out


def _panel_level_sum(f, a, b, nodes, nvec):
    half = (b - a) / 2
    acc = [mpf(0)] * nvec
    for d, w, center in nodes:
        off = half * d
        if center:
            vals = f(a + off)
            for c in range(nvec):
                acc[c] += w * vals[c]
        else:
            v1 = f(a + off)
            v2 = f(b - off)
            for c in range(nvec):
                acc[c] += w * (v1[c] + v2[c])
    return acc


@dataclass
class QuadResult:
    values: list
    errors: list
    level: int
    history: list = field(default_factory=list)


def tanh_sinh_panels(
    f: Callable,
    points: Sequence,
    nvec: int,
    tol,
    relative: bool = True,
    dps: int | None = None,
    max_level: int = 14,
    min_level: int = 3,
) -> QuadResult:
    """Integrate the vector-valued ``f`` over consecutive panels of ``points``.

    ``tol`` may be a scalar or one tolerance per component.  The error
    estimate relies on the digits roughly doubling from level to level.
    """
    if dps is None:
        dps = mpmath.mp.dps
    pts = [mpf(p) for p in points]
    panels = list(zip(pts[:-1], pts[1:]))
    tols = list(tol) if isinstance(tol, (list, tuple)) else [tol] * nvec
    sums = [[mpf(0)] * nvec for _ in panels]
    frozen = [False] * len(panels)
    prev_panel = [None] * len(panels)
    history = []
    prev_total = None
    prev_diffs = None
    for level in range(max_level + 1):
        nodes = _level_nodes(level, dps)
        h = mpf(2) ** (-level)
        total = [mpf(0)] * nvec
        estimates = []
        for p, (a, b) in enumerate(panels):
            if not frozen[p]:
                add = _panel_level_sum(f, a, b, nodes, nvec)
                sums[p] = [s + x for s, x in zip(sums[p], add)]
            est = [(b - a) / 2 * h * s for s in sums[p]] if not frozen[p] else prev_panel[p]
            estimates.append(est)
            for c in range(nvec):
                total[c] += est[c]
        history.append(total)
        if prev_total is not None and level >= min_level:
            diffs = [abs(t - q) for t, q in zip(total, prev_total)]
            limits = [tl * abs(t) if relative else tl for tl, t in zip(tols, total)]
            rnd = unit_roundoff() * 10
            if prev_diffs is not None:
                # digits roughly double per level, so the next difference
                # (a bound on the current error) is about d_l^2 / d_{l-1}
                est = [
                    (dv * dv / pd if pd > dv else dv) * 10 + abs(t) * rnd
                    for dv, pd, t in zip(diffs, prev_diffs, total)
                ]
                if all(e <= lim for e, lim in zip(est, limits)):
                    # the estimate is heuristic; never claim better than asked
                    errs = [max(e, lim) for e, lim in zip(est, limits)]
                    return QuadResult(total, errs, level, history)
            prev_diffs = diffs
            # freeze panels that no longer matter at this tolerance
            for p in range(len(panels)):
                if frozen[p] or prev_panel[p] is None:
                    continue
                negligible = all(
                    abs(estimates[p][c]) + abs(prev_panel[p][c]) <= limits[c] * mpf(10) ** -5
                    for c in range(nvec)
                )
                if negligible:
                    frozen[p] = True
        elif prev_total is not None:
            prev_diffs = [abs(t - q) for t, q in zip(total, prev_total)]
        prev_panel = estimates
        prev_total = total
    raise QuadratureError(f"tanh-sinh did not converge within {max_level} levels")


def _find_cutoff(spec: QuadSpec, tol):
    lo = mpf(spec.lower)
    width = mpf(1)
    for _ in range(200):
        u = lo + width
        tb = mpf(spec.tail_bound(u))
        if tb <= tol / 10:
            return u, tb
        width *= 2
    raise QuadratureError("tail bound never fell below tolerance")


def integrate(f: Callable, spec: QuadSpec, ctx: PrecCtx = DEFAULT_CTX) -> HPReal:
    """Integrate a scalar function; err <= target_tol or QuadratureError."""
    res = integrate_many(lambda t: (f(t),), 1, spec, ctx)
    return res[0]


def integrate_many(f: Callable, nvec: int, spec: QuadSpec, ctx: PrecCtx = DEFAULT_CTX) -> list:
    with ctx.work(10):
        tol = mpf(spec.target_tol) if spec.target_tol is not None else ctx.tol
        tail = mpf(0)
        if spec.upper is not None:
            upper = mpf(spec.upper)
        elif spec.tail_bound is not None:
            if spec.relative:
                raise ValueError("tail-driven cutoff needs an absolute tolerance")
            upper, tail = _find_cutoff(spec, tol)
        else:
            raise ValueError("QuadSpec needs an upper limit or a tail bound")
        lower = mpf(spec.lower)
        inner = sorted(mpf(b) for b in spec.breakpoints if lower < mpf(b) < upper)
        if not inner and spec.upper is None:
            # geometric panels keep slowly decaying tails cheap
            w = mpf(1)
            while lower + w < upper:
                inner.append(lower + w)
                w *= 2
        points = [lower] + inner + [upper]
        quad_tol = tol / 2 if not spec.relative else tol
        res = tanh_sinh_panels(
            f, points, nvec, quad_tol, relative=spec.relative, dps=mpmath.mp.dps,
            max_level=spec.max_level, min_level=spec.min_level,
        )
        out = []
        for v, e in zip(res.values, res.errors):
            err = e + tail
            limit = tol * abs(v) if spec.relative else tol
            if err > limit:
                raise QuadratureError(f"error {mpmath.nstr(err, 3)} exceeds tolerance")
            out.append(HPReal(+v, err))
        return out


def refinement_history(f: Callable, a, b, ctx: PrecCtx = DEFAULT_CTX, levels: int = 7) -> list:
    """Successive level estimates of the integral of ``f`` on [a, b]."""
    with ctx.work(10):
        hist = []
        s = mpf(0)
        a, b = mpf(a), mpf(b)
        for level in range(levels + 1):
            s += _panel_level_sum(lambda t: (f(t),), a, b, _level_nodes(level, mpmath.mp.dps), 1)[0]
            hist.append((b - a) / 2 * mpf(2) ** (-level) * s)
        return hist
