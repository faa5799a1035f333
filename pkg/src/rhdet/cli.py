"""Command-line front end: every check writes one JSON (or CSV) report.

Exit codes: 0 success, 1 a checked inequality or table failed, 2 usage,
cache or precision-escalation error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
import time
from pathlib import Path

import mpmath

from . import __version__
from .numerics import EscalationCeiling, HPReal, PrecCtx
from .scanreport import dec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CACHE_ENV = "RHDET_CACHE"
CACHE_FILE = "beta_table.json"


class UsageError(ValueError):
    pass


def _hp(x: HPReal, digits: int) -> dict:
    return {"value": dec(x, digits), "err": dec(x.err, 5)}


def _num(text: str, ctx: PrecCtx):
    with ctx.work():
        try:
            return mpmath.mpmathify(text)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"not a number: {text!r}") from exc


def _grid(args, ctx, default_max="3", default_step="0.01"):
    from .signreg import GridSpec

    lo, hi, step = args.u_min or "0", args.u_max or default_max, args.step or default_step
    for text in (lo, hi, step):
        _num(text, ctx)
    try:
        return GridSpec(lo, hi, step)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cache_dir(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    if os.environ.get(CACHE_ENV):
        return Path(os.environ[CACHE_ENV])
    return Path.home() / ".cache" / "rhdet"


def _load_table(args):
    from .moments import BetaTable

    path = cache_dir(args.cache) / CACHE_FILE
    table = BetaTable.load(path) if path.exists() else BetaTable()
    return table, path, len(table)


# ---------------------------------------------------------------------------
# commands: each returns (ok, params, results, error_bounds)


def cmd_phi(args, ctx):
    from .phi import PhiSeriesParams, phi_derivs

    u = _num(args.u, ctx)
    vals = phi_derivs(u, args.j, PhiSeriesParams(ctx=ctx))
    res = {"derivatives": [{"j": j, **_hp(v, ctx.digits)} for j, v in enumerate(vals)]}
    return True, {"u": args.u, "j_max": args.j}, res, {f"phi^({j})": dec(v.err, 5) for j, v in enumerate(vals)}


def cmd_beta(args, ctx, table):
    from .moments import betas

    bs = betas(args.n, ctx, table)
    ok = all(b.sign() > 0 for b in bs)
    rows = [{"n": n, **_hp(b, ctx.digits), "positive": b.sign() > 0} for n, b in enumerate(bs)]
    return ok, {"n_max": args.n}, {"betas": rows}, {f"beta_{n}": dec(b.err, 5) for n, b in enumerate(bs)}


def cmd_det(args, ctx, table):
    from .minors import MinorSpec, minor_detail

    try:
        spec = MinorSpec(args.n, args.r)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    mv = minor_detail(spec, ctx, table)
    positive = mv.value.sign() > 0
    res = {"n": args.n, "r": args.r, "positive": positive, "structural_zeros": spec.zero_count(),
           **mv.to_dict()}
    return positive, {"n": args.n, "r": args.r}, res, {f"D({args.n},{args.r})": dec(mv.value.err, 5)}


def cmd_turan(args, ctx, table):
    from .minors import turan_check

    rep = turan_check(args.n, ctx, table)
    return rep.passed, {"n_max": args.n}, rep.to_dict(with_rows=True), {"min_relative_margin": rep.to_dict()["min_value"]}


def cmd_exceptional(args, ctx, table):
    from .minors import exceptional_scan

    if args.r_max > 6:
        raise UsageError("exceptional scan is limited to --r-max <= 6")
    rep = exceptional_scan(args.r_max, ctx, table=table)
    return rep.passed, {"r_max": args.r_max}, rep.to_dict(with_rows=True), {}


def cmd_wronskian_scan(args, ctx):
    from .signreg import sign_scan

    grid = _grid(args, ctx)
    res = sign_scan(args.r, args.m, grid, ctx, keep_rows=True)
    ok = all(r.all_positive for r in res)
    rows = [row for r in res for row in r.rows]
    out = {"scans": [r.to_dict() for r in res], "rows": rows}
    return ok, {"p_max": args.r, "m": args.m, "u_min": dec(grid.u_min, 10), "u_max": dec(grid.u_max, 10),
                "step": dec(grid.step, 10)}, out, {}


def cmd_mr_table(args, ctx):
    from .signreg import mr_table

    grid = _grid(args, ctx)
    if args.r_max < 2:
        raise UsageError("--r-max must be >= 2")
    res = mr_table(args.r_max, args.m_cap, grid, ctx)
    ok = all(row["m"] is not None and row["m"] == row["reference_m"] and row["eta"] == row["reference_eta"]
             for row in res["rows"] if row["reference_m"] is not None)
    return ok, {"r_max": args.r_max, "m_cap": args.m_cap, "step": dec(grid.step, 10)}, res, {}


def cmd_q_scan(args, ctx):
    from .signreg import q_scan

    grid = _grid(args, ctx, default_max="5", default_step="0.05")
    rep = q_scan(grid, grid, ctx, keep_rows=True)
    return rep.passed, {"u_max": dec(grid.u_max, 10), "step": dec(grid.step, 10)}, rep.to_dict(with_rows=True), {}


def cmd_cvpoly(args, ctx):
    from .cvpoly import cv_poly, lower_rep_coeff, upper_rep_coeff

    if args.k < 1:
        raise UsageError("--k must be >= 1")
    p = cv_poly(args.k).poly
    coeffs = [p[j] for j in range(args.k + 1)]
    reps_ok = all(lower_rep_coeff(j, args.k) == coeffs[j] and upper_rep_coeff(j, args.k - j) == coeffs[j]
                  for j in range(args.k + 1))
    return reps_ok, {"k": args.k}, {"coefficients": coeffs, "representations_agree": reps_ok}, {}


def cmd_wr_poly(args, ctx):
    from .cvpoly import check_degree_sign, check_low_zeros, epsilon, wr_poly

    if args.r < 2:
        raise UsageError("--r must be >= 2")
    w = wr_poly(args.r)
    low, low_rep = check_low_zeros(args.r)
    deg, deg_rep = check_degree_sign(args.r)
    res = {"r": args.r, "eps_r": epsilon(args.r), "gamma": list(w.gamma), "degree": w.degree,
           "lowest_nonzero_power": low_rep["lowest_nonzero_power"], "low_zeros_ok": low,
           "degree_and_sign_ok": deg}
    return low and deg, {"r": args.r}, res, {}


def cmd_delta_poly(args, ctx):
    from .minors import delta_bar_poly

    if args.r < 2:
        raise UsageError("--r must be >= 2")
    d = delta_bar_poly(args.r)
    return d.zero_pattern_ok(), {"r": args.r}, d.to_dict(), {}


def cmd_conj3(args, ctx):
    from .asymptotics import R_MAX, check_c_zeros

    if not 2 <= args.r <= R_MAX:
        raise UsageError(f"--r must be in 2..{R_MAX}")
    ok, rep = check_c_zeros(args.r)
    rep = dict(rep, required_zero_count=len(rep["required_zeros"]))
    return ok, {"r": args.r}, rep, {}


def cmd_bounds(args, ctx):
    from .cvpoly import r2_bounds

    rep = r2_bounds(ctx)
    d = 12

    def conv(x):
        if isinstance(x, dict):
            return {k: conv(v) for k, v in x.items()}
        if isinstance(x, mpmath.mpf):
            return dec(x, d)
        if isinstance(x, float):
            return repr(x)
        return x

    ok = bool(rep["W2_below_minus_843"] and rep["bound_sum_negative"] and rep["W2_closed_form_ok"])
    return ok, {}, conv(rep), {}


def cmd_xi(args, ctx, table):
    from .minors import xi_eval, xi_quadrature

    t = _num(args.t, ctx)
    try:
        series = xi_eval(t, args.n, ctx, table)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = {"t": args.t, "series": _hp(series, ctx.digits)}
    ok = True
    if args.check:
        quad = xi_quadrature(t, ctx)
        ok = abs(series.value - quad.value) <= series.err + quad.err
        res["quadrature"] = _hp(quad, ctx.digits)
        res["agree"] = bool(ok)
    return ok, {"t": args.t, "n_terms": args.n}, res, {"series": dec(series.err, 5)}


def cmd_verify_all(args, ctx):
    from .acceptance import CRITERIA, run_criterion

    numbers = sorted(CRITERIA) if not args.criteria else args.criteria
    bad = [n for n in numbers if n not in CRITERIA]
    if bad:
        raise UsageError(f"unknown criteria: {bad}")
    results, elapsed = [], {}
    for n in numbers:
        r = run_criterion(n)
        print(r.line(), file=sys.stderr, flush=True)
        d = r.to_dict()
        elapsed[str(n)] = d.pop("elapsed_s")
        results.append(d)
    ok = all(r["passed"] and r["within_budget"] for r in results)
    return ok, {"criteria": numbers}, {"criteria": results, "all_passed": ok}, {}, elapsed


# ---------------------------------------------------------------------------
# report emission


def _flatten(prefix, x, out):
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(x, list) and x and all(isinstance(v, dict) for v in x):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, json.dumps(x) if isinstance(x, list) else x))


SCAN_COLUMNS = ["u", "v", "p", "m", "value", "sign"]


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    rows = report["results"].get("rows") if isinstance(report["results"], dict) else None
    if rows and all("u" in r for r in rows):
        cols = [c for c in SCAN_COLUMNS if any(c in r for r in rows)]
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        flat = []
        _flatten("", report["results"], flat)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(flat)
    return buf.getvalue()


def build_report(command, params, ctx, results, error_bounds, elapsed) -> dict:
    return {
        "command": command,
        "params": params,
        "precision_used": ctx.digits,
        "results": results,
        "error_bounds": error_bounds,
        "timestamps": {
            "finished_utc": _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "elapsed_s": elapsed,
        },
        "tool_version": __version__,
    }


def render(report: dict, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(report)
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# parser


COMMANDS = {
    "phi": (cmd_phi, False), "beta": (cmd_beta, True), "det": (cmd_det, True),
    "turan": (cmd_turan, True), "exceptional": (cmd_exceptional, True),
    "wronskian-scan": (cmd_wronskian_scan, False), "mr-table": (cmd_mr_table, False),
    "q-scan": (cmd_q_scan, False), "cvpoly": (cmd_cvpoly, False), "wr-poly": (cmd_wr_poly, False),
    "delta-poly": (cmd_delta_poly, False), "conj3": (cmd_conj3, False),
    "bounds-lemma25": (cmd_bounds, False), "xi": (cmd_xi, True), "verify-all": (cmd_verify_all, False),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prec", type=int, default=100, help="working precision in decimal digits (default 100)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--cache", help=f"beta cache directory (default ${CACHE_ENV} or ~/.cache/rhdet)")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--u-min")
    grid.add_argument("--u-max")
    grid.add_argument("--step")

    p = argparse.ArgumentParser(prog="rhdet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rhdet {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phi", parents=[common], help="Phi and its derivatives at u")
    s.add_argument("--u", required=True)
    s.add_argument("--j", type=int, default=0, help="highest derivative order")
    s = sub.add_parser("beta", parents=[common], help="beta_0..beta_n")
    s.add_argument("--n", type=int, default=30)
    s = sub.add_parser("det", parents=[common], help="the minor D(n,r)")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s = sub.add_parser("turan", parents=[common], help="Turan inequalities for n = 1..N")
    s.add_argument("--n", type=int, default=30)
    s = sub.add_parser("exceptional", parents=[common], help="D(n,r) > 0 for n <= eta(r)")
    s.add_argument("--r-max", type=int, default=6)
    s = sub.add_parser("wronskian-scan", parents=[common, grid], help="sign of eps_p w_p over a u grid")
    s.add_argument("--r", type=int, default=4, help="highest order p")
    s.add_argument("--m", type=int, default=0, help="cumulant order (0 = Phi)")
    s = sub.add_parser("mr-table", parents=[common, grid], help="m(r) and eta(r) from grid scans")
    s.add_argument("--r-max", type=int, default=9)
    s.add_argument("--m-cap", type=int, default=6)
    sub.add_parser("q-scan", parents=[common, grid], help="q(u,v) over a square grid")
    s = sub.add_parser("cvpoly", parents=[common], help="CV polynomial p_k and both representations")
    s.add_argument("--k", type=int, default=3)
    s = sub.add_parser("wr-poly", parents=[common], help="eps_r W_r coefficients")
    s.add_argument("--r", type=int, required=True)
    s = sub.add_parser("delta-poly", parents=[common], help="normalised Gamma-ratio determinant")
    s.add_argument("--r", type=int, required=True)
    s = sub.add_parser("conj3", parents=[common], help="zero pattern of C(i;m,j)")
    s.add_argument("--r", type=int, required=True)
    sub.add_parser("bounds-lemma25", parents=[common], help="r = 2 bound constants at y = pi")
    s = sub.add_parser("xi", parents=[common], help="Xi(t) from the beta series")
    s.add_argument("--t", required=True)
    s.add_argument("--n", type=int, default=25, help="number of series terms")
    s.add_argument("--check", action="store_true", help="compare with direct quadrature")
    s = sub.add_parser("verify-all", parents=[common], help="run the acceptance criteria")
    s.add_argument("--criteria", type=int, nargs="*", help="subset of criterion numbers")
    return p


def run(argv=None) -> tuple[int, dict | None]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None
    fn, uses_table = COMMANDS[args.command]
    try:
        ctx = PrecCtx(digits=args.prec)
    except ValueError as exc:
        print(f"rhdet: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    t0 = time.perf_counter()
    try:
        if uses_table:
            table, path, before = _load_table(args)
            out = fn(args, ctx, table)
            if len(table) != before:
                table.save(path)
        else:
            out = fn(args, ctx)
    except (UsageError, EscalationCeiling, ValueError, OSError) as exc:
        print(f"rhdet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    ok, params, results, bounds = out[:4]
    elapsed = out[4] if len(out) > 4 else round(time.perf_counter() - t0, 2)
    report = build_report(args.command, params, ctx, results, bounds, elapsed)
    text = render(report, args.format)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return (EXIT_OK if ok else EXIT_FAIL), report


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
