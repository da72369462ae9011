"""Command-line runner: every check and simulation as a subcommand with a seeded, machine-readable report.

Exit status: 0 when all asserted tolerances hold, 1 on a tolerance failure,
2 on a usage error, 3 when the report cannot be written.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np

from . import duality, initdata, moments, process
from .lattice import HeightWindow, ParticleConfig, format_window, parse_window
from .qspecial import ModelParams, SeriesError, sumid_lhs, to_rational

SCHEMA_VERSION = "dynasep-report/1"

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

Q_GRID = (0.3, 0.5, 0.7)
ALPHA_GRID = (0.5, 1.0, 3.0)
EXACT_GRID = (("1/2", "1/3"), ("2/3", "2"), ("1/4", "5"))


def report_schema_version() -> str:
    return SCHEMA_VERSION


class UsageError(ValueError):
    pass


class ReportIOError(OSError):
    pass


@dataclass
class Report:
    command: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    ok: bool = True

    def fail_if(self, condition: bool, reason: str) -> None:
        if condition:
            self.ok = False
            self.summary.setdefault("failures", []).append(reason)


def _render(value):
    """Shortest round-trip text for floats, p/r for exact rationals."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        num, den = int(value.numerator), int(value.denominator)
        return str(num) if den == 1 else f"{num}/{den}"
    if isinstance(value, (list, tuple)):
        return " ".join(_render(v) for v in value)
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, str) or value is None:
        return value
    return _render(value)


def format_report(report: Report, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "schema": SCHEMA_VERSION,
            "command": report.command,
            "ok": report.ok,
            "summary": _jsonable(report.summary),
            "columns": report.columns,
            "rows": [_jsonable(list(r)) for r in report.rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    lines = [f"# schema: {SCHEMA_VERSION}", f"# command: {report.command}", f"# ok: {_render(report.ok)}"]
    for key, value in report.summary.items():
        lines.append(f"# {key}: {_render(value) if not isinstance(value, dict) else json.dumps(_jsonable(value))}")
    if report.columns:
        lines.append(",".join(report.columns))
        for row in report.rows:
            lines.append(",".join(_render(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- parameter parsing

def _number(text: str, backend: str):
    try:
        value = to_rational(text)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise UsageError(f"cannot parse number {text!r}: {exc}") from None
    return value if backend == "exact" else float(Fraction(int(value.numerator), int(value.denominator)))


def _params(q: str, alpha: str, backend: str) -> ModelParams:
    qv, av = _number(q, backend), _number(alpha, backend)
    try:
        return ModelParams.exact(qv, av) if backend == "exact" else ModelParams(qv, av)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _grid(args, backend: str) -> list[ModelParams]:
    """Parameters from --q/--alpha, or the default grid when both are omitted."""
    if args.q is not None or args.alpha is not None:
        return [_params(args.q or "1/2", args.alpha or "1", backend)]
    if backend == "exact":
        return [_params(q, a, backend) for q, a in EXACT_GRID]
    return [ModelParams(q, a) for q in Q_GRID for a in ALPHA_GRID]


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise UsageError(f"expected integers, got {text!r}") from None


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args) -> Report:
    params = _params(args.q, args.alpha, "float")
    if args.window:
        w = parse_window(args.window)
    elif args.init == "step":
        w = initdata.step_heights(args.xmin, args.xmax)
    elif args.init == "half":
        w = initdata.sample_half_stationary(args.xmin, args.xmax, params, [args.seed, 1])
    else:
        w = initdata.sample_stationary(args.xmin, args.xmax, params, [args.seed, 1])
    traj = process.simulate_dynamic_asep(w, args.t, params, args.seed)
    if args.dump:
        try:
            with open(args.dump, "w", encoding="utf-8") as fh:
                fh.write(traj.dump())
        except OSError as exc:
            raise ReportIOError(str(exc)) from None
    rep = Report("simulate", ["t", "site", "delta"], [list(e) for e in traj.events])
    rep.summary.update(initial=format_window(w), final=format_window(traj.final), horizon=args.t,
                       events=len(traj.events), seed=args.seed, q=params.q, alpha=params.alpha)
    return rep


def _tolerance_failed(value, exact: bool, tol: float) -> bool:
    return value != 0 if exact else not abs(float(value)) <= tol


def cmd_check_duality(args) -> Report:
    rep = Report("check-duality", ["q", "alpha", "n", "length", "window", "x", "residual"])
    exact = args.backend == "exact"
    ns = [args.n] if args.n else [1, 2, 3]
    lengths = [args.len] if args.len else list(range(3, 10))
    count = worst = 0
    for params in _grid(args, args.backend):
        for n, length in product(ns, lengths):
            for wid, x, res in duality.sweep_duality(n, length, params):
                count += 1
                worst = max(worst, abs(float(res)))
                if args.full or _tolerance_failed(res, exact, args.tol):
                    rep.rows.append([params.q, params.alpha, n, length, wid, list(x.positions), res])
                if rep.ok and _tolerance_failed(res, exact, args.tol):
                    rep.fail_if(True, "nonzero duality residual")
    rep.summary.update(cases=count, max_abs_residual=worst, backend=args.backend)
    return rep


def _check_sumid(args, rep):
    nmax = args.nmax or 12
    for params in _grid(args, "float"):
        worst = max(abs(float(sumid_lhs(n, params)) - 1) for n in range(nmax + 1))
        rep.rows.append(["sumid", params.q, params.alpha, nmax, worst])
        rep.fail_if(worst >= 1e-9, f"sumid at q={params.q}, alpha={params.alpha}")
    exact = ModelParams.from_roots(Fraction(1, 2), Fraction(2, 3))
    bad = [n for n in range(min(nmax, 6) + 1) if sumid_lhs(n, exact) != 1]
    rep.rows.append(["sumid-exact", exact.q, exact.alpha, min(nmax, 6), len(bad)])
    rep.fail_if(bool(bad), f"exact sumid differs from 1 at n={bad}")


def _check_eigen(args, rep):
    nmax = args.nmax or 8
    for params in _grid(args, "float"):
        worst = max(initdata.eigencheck_hermite(n, range(-20, 21), params) for n in range(nmax + 1))
        rep.rows.append(["eigen", params.q, params.alpha, nmax, worst])
        rep.fail_if(worst >= 1e-9, f"eigenrelation at q={params.q}, alpha={params.alpha}")


def _check_keyit(args, rep):
    lmax = min(args.nmax or 5, 5)
    for params in _grid(args, "float"):
        worst = max(initdata.keyit_check(ell, lag, range(-6, 7), params)
                    for ell in range(lmax + 1) for lag in range(0, 7))
        rep.rows.append(["keyit", params.q, params.alpha, lmax, worst])
        rep.fail_if(worst >= 1e-9, f"iteration identity at q={params.q}, alpha={params.alpha}")


def _check_step(args, rep):
    nmax = args.nmax or 4
    for params in _grid(args, "exact"):
        bad = 0
        cases = 0
        for n in range(1, nmax + 1):
            pref = duality.DualityObservable(n, params, "step-normalized")
            for xs in combinations(range(3, -7, -1), n):
                x = ParticleConfig(xs)
                w = initdata.step_heights(min(min(xs), 0) - 1, max(max(xs), 0) + 1)
                cases += 1
                if pref(x, w) != duality.step_closed_form(xs, params.q):
                    bad += 1
        rep.rows.append(["step", params.q, params.alpha, nmax, bad])
        rep.summary["step_cases"] = rep.summary.get("step_cases", 0) + cases
        rep.fail_if(bad > 0, f"step evaluation mismatch at q={params.q}, alpha={params.alpha}")


def _check_half(args, rep):
    nmax = args.nmax or 3
    alphas = [0.3, 1.0, 3.0] if args.alpha is None else [_number(args.alpha, "float")]
    q = _number(args.q, "float") if args.q else 0.5
    values: dict = {}
    worst = 0.0
    for alpha in alphas:
        params = ModelParams(q, alpha)
        for n in range(1, nmax + 1):
            for xs in combinations(range(3, -7, -1), n):
                x = ParticleConfig(xs)
                scaled = duality.DualityObservable(n, params, "half-normalized").prefactor \
                    * initdata.half_expectation_Z(x, params)
                worst = max(worst, abs(scaled - duality.half_closed_form(xs, q)))
                values.setdefault(xs, []).append(scaled)
    spread = max(max(v) - min(v) for v in values.values())
    rep.rows.append(["half", q, _render(alphas), nmax, worst])
    rep.rows.append(["half-alpha-spread", q, _render(alphas), nmax, spread])
    rep.fail_if(worst >= 1e-10, "half-stationary closed form")
    rep.fail_if(spread >= 1e-10, "half-stationary alpha dependence")


def _check_telescoping(args, rep):
    backend = args.backend
    tol = 0.0 if backend == "exact" else 1e-12
    for params in _grid(args, backend) if backend == "exact" else [ModelParams(0.5, 1 / 3), ModelParams(0.3, 3.0)]:
        worst, cases, degenerate = 0.0, 0, 0
        for _, res in duality.sweep_cluster_telescoping(params, max_width=args.nmax or 4):
            cases += 1
            if res is None:
                degenerate += 1
                continue
            worst = max(worst, abs(float(res.residual)))
        rep.rows.append(["telescoping", params.q, params.alpha, cases - degenerate, worst])
        rep.fail_if(worst > tol, f"cluster telescoping at q={params.q}, alpha={params.alpha}")


def _check_contour(args, rep):
    q = _number(args.q, "float") if args.q else 0.5
    spec = moments.ContourSpec.default(q)
    init_worst = 0.0
    for n in (1, 2, 3):
        for xs in combinations(range(2, -6, -1), n):
            init_worst = max(init_worst, abs(moments.contour_E_step(xs, 0.0, q) - duality.step_closed_form(xs, q)))
    stab = 0.0
    for xs, t in product([(-2,), (0, -3), (1, -1, -2)], (0.0, 0.5, 1.0)):
        base = moments.contour_E_step(xs, t, q, spec)
        stab = max(stab, abs(base - moments.contour_E_step(xs, t, q, moments.ContourSpec(spec.radius, 512))),
                   abs(base - moments.contour_E_step(xs, t, q, moments.ContourSpec(spec.radius / 2))))
    y_nodes = spec.nodes()[0][::37]
    free = max(moments.check_free_evolution(x, t, q, y) for x in range(-4, 4) for t in (0.0, 0.7, 1.5) for y in y_nodes)
    bc = max(moments.check_boundary_condition(xs, t, q, spec, i=i)
             for xs, i in [((0, -1), 0), ((3, 2), 0), ((2, 1, -1), 0), ((2, 0, -1), 1)] for t in (0.0, 1.0))
    ode = max(moments.evolution_residual(xs, 1.0, q, spec) for xs in [(-2,), (0, -1), (1, -3)])
    for name, value, tol in [("contour-initial", init_worst, 1e-8), ("contour-stability", stab, 1e-10),
                             ("contour-free", free, 1e-10), ("contour-boundary", bc, 1e-9),
                             ("contour-ode", ode, 1e-5)]:
        rep.rows.append([name, q, "", "", value])
        rep.fail_if(value >= tol, name)


IDENTITIES = {
    "sumid": _check_sumid,
    "eigen": _check_eigen,
    "keyit": _check_keyit,
    "step": _check_step,
    "half": _check_half,
    "telescoping": _check_telescoping,
    "contour": _check_contour,
}


def cmd_check_identities(args) -> Report:
    rep = Report("check-identities", ["identity", "q", "alpha", "size", "value"])
    names = list(IDENTITIES) if args.identity == "all" else [args.identity]
    for name in names:
        IDENTITIES[name](args, rep)
    return rep


def cmd_check_measure(args) -> Report:
    rep = Report("check-measure", ["q", "alpha", "check", "value"])
    for params in _grid(args, "float"):
        q = params.q
        rows = []
        total = initdata.stationary_measure(params).total
        rows.append(("sum", abs(total - 1), 1e-10))
        r1, r2 = initdata.marginal_propagation_residuals(params)
        rows.append(("marginal-odd", r1, 1e-12))
        rows.append(("marginal-even", r2, 1e-12))
        ortho = max(abs(initdata.orthogonality_check(a, b, params)) for a in range(6) for b in range(6))
        rows.append(("orthogonality", ortho, 1e-8))
        target = (1.0, 0.0, 1 / q - 1)
        zeta = max(abs(initdata.zeta_moment_from_measure(k, params) - target[k]) for k in range(3))
        rows.append(("zeta-moments", zeta, 1e-8))
        for name, value, tol in rows:
            rep.rows.append([params.q, params.alpha, name, value])
            rep.fail_if(not value < tol, f"{name} at q={params.q}, alpha={params.alpha}")
        rep.rows.append([params.q, params.alpha, "printed-zeta-ratio-k2",
                         initdata.printed_zeta_moment(2, q) / (1 / q - 1)])
    for params in _grid(args, "exact"):
        bad = [s for s in range(-6, 7) if initdata.detailed_balance_check(s, params) != 0]
        rep.rows.append([params.q, params.alpha, "detailed-balance-nonzero", len(bad)])
        rep.fail_if(bool(bad), f"detailed balance at q={params.q}, alpha={params.alpha}")
    return rep


def cmd_moments(args) -> Report:
    q = _number(args.q, "float")
    x = _int_list(args.x)
    if args.n is not None and args.n != len(x):
        raise UsageError(f"--n {args.n} does not match {len(x)} positions in --x")
    unverified = any(a <= b for a, b in zip(x, x[1:]))
    radius = _number(args.radius, "float") if args.radius else moments.ContourSpec.default(q).radius
    spec = moments.ContourSpec(radius, args.nodes)
    # half-stationary data is the step integral at x - 1
    shifted = tuple(v - 1 for v in x) if args.init == "half" else x
    value, imag = moments.contour_E_step(shifted, args.t, q, spec, return_imag=True)
    doubled = moments.contour_E_step(shifted, args.t, q, moments.ContourSpec(radius, 2 * args.nodes))
    rep = Report("moments", [])
    rep.summary.update(value=value, checks={"imag": abs(imag), "convergence": abs(value - doubled)},
                       x=list(x), t=args.t, q=q, init=args.init, nodes=args.nodes, radius=radius)
    if unverified:
        rep.summary["note"] = "unverified extension: positions not strictly decreasing"
    rep.fail_if(abs(value - doubled) >= 1e-10, "node doubling")
    if args.trials:
        if args.init == "stationary":
            raise UsageError("the contour integral covers step and half-stationary data only")
        params = _params(args.q, args.alpha or "1", "float")
        mc = moments.mc_duality_estimate(x, args.t, params, args.init, args.trials, args.seed)
        rep.summary.update(mc_estimate=mc.estimate, stderr=mc.stderr, trials=mc.trials, seed=mc.seed,
                           alpha=params.alpha, z=(mc.estimate - value) / mc.stderr if mc.stderr else 0.0)
        rep.fail_if(abs(mc.estimate - value) > 3 * mc.stderr + 1e-12, "Monte Carlo outside 3 stderr")
    return rep


def cmd_stationarity(args) -> Report:
    params = _params(args.q, args.alpha, "float")
    res = initdata.stationarity_test(params, args.t, args.trials, args.seed, length=args.length)
    rep = Report("stationarity", ["height", "count", "expected", "z"])
    rep.rows = [[int(h), int(c), e, z] for h, c, e, z in zip(res.heights, res.counts, res.expected, res.z_scores)]
    rep.summary.update(q=params.q, alpha=params.alpha, t=args.t, trials=args.trials, seed=args.seed,
                       length=args.length, max_abs_z=res.max_abs_z)
    rep.fail_if(not res.passes(3.0), "a bin lies outside 3 sigma")
    return rep


def cmd_sample_initdata(args) -> Report:
    params = _params(args.q, args.alpha, "float")
    rng = np.random.default_rng(args.seed)
    if args.init == "step":
        h = np.tile(np.array(initdata.step_heights(args.xmin, args.xmax).heights), (args.count, 1))
    elif args.init == "half":
        h = initdata.sample_half_stationary_batch(args.xmin, args.xmax, params, args.count, rng)
    else:
        h = initdata.sample_stationary_batch(args.xmin, args.xmax, params, args.count, rng)
    rep = Report("sample-initdata", ["sample", "window"])
    rep.rows = [[i, format_window(HeightWindow(args.xmin, tuple(int(v) for v in row)))] for i, row in enumerate(h)]
    rep.summary.update(init=args.init, q=params.q, alpha=params.alpha, seed=args.seed)
    return rep


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="-", help="report path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="default: json for moments, csv otherwise")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="accepted for compatibility; all reductions run in a fixed order")

    parser = argparse.ArgumentParser(prog="dynasep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one dynamic-ASEP trajectory")
    p.add_argument("--q", default="1/2")
    p.add_argument("--alpha", default="1")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--window", help="'x_left s_left ... s_right'")
    p.add_argument("--init", choices=moments.INITS, default="step")
    p.add_argument("--xmin", type=int, default=-10)
    p.add_argument("--xmax", type=int, default=10)
    p.add_argument("--dump", help="also write the trajectory in the plain-text event format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-duality", parents=[common], help="generator duality on every small window")
    p.add_argument("--n", type=int)
    p.add_argument("--len", type=int)
    p.add_argument("--q")
    p.add_argument("--alpha")
    p.add_argument("--backend", choices=("exact", "float"), default="exact")
    p.add_argument("--tol", type=float, default=1e-9, help="float backend only")
    p.add_argument("--full", action="store_true", help="list every case, not only failures")
    p.set_defaults(func=cmd_check_duality)

    p = sub.add_parser("check-identities", parents=[common], help="q-series and contour identities")
    p.add_argument("--identity", choices=("all", *IDENTITIES), default="all")
    p.add_argument("--nmax", type=int)
    p.add_argument("--q")
    p.add_argument("--alpha")
    p.add_argument("--backend", choices=("exact", "float"), default="exact")
    p.set_defaults(func=cmd_check_identities)

    p = sub.add_parser("check-measure", parents=[common], help="stationary one-point weights")
    p.add_argument("--q")
    p.add_argument("--alpha")
    p.set_defaults(func=cmd_check_measure)

    p = sub.add_parser("moments", parents=[common], help="contour-integral value, optionally against Monte Carlo")
    p.add_argument("--n", type=int)
    p.add_argument("--x", required=True, help="positions, e.g. --x=-1,-3")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--q", default="1/2")
    p.add_argument("--alpha")
    p.add_argument("--init", choices=moments.INITS, default="step")
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--nodes", type=int, default=256)
    p.add_argument("--radius")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("stationarity", parents=[common], help="centre-height law after running stationary data")
    p.add_argument("--q", default="1/2")
    p.add_argument("--alpha", default="1")
    p.add_argument("--t", type=float, default=5.0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--length", type=int, default=21)
    p.set_defaults(func=cmd_stationarity)

    p = sub.add_parser("sample-initdata", parents=[common], help="draw initial height functions")
    p.add_argument("--init", choices=moments.INITS, default="stationary")
    p.add_argument("--q", default="1/2")
    p.add_argument("--alpha", default="1")
    p.add_argument("--xmin", type=int, default=-10)
    p.add_argument("--xmax", type=int, default=10)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample_initdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "threads", 1) < 1:
        print("dynasep: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = args.func(args)
    except ReportIOError as exc:
        print(f"dynasep: cannot write trajectory: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, SeriesError, moments.ContourError) as exc:
        print(f"dynasep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fmt = args.format or ("json" if args.command == "moments" else "csv")
    text = format_report(report, fmt)
    try:
        if args.out == "-":
            sys.stdout.write(text)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"dynasep: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if report.ok else EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
