"""Command-line front end: ``pxem fit | compare | surface | efficient-da``.

Exit codes: 0 converged, 1 bad input or unreadable data, 2 iteration limit
reached, 3 divergence, 4 singular or rank-deficient design, 5 no interior
efficient-augmentation solution.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys

import numpy as np

from pxem import engine
from pxem.datasets import read_design_csv
from pxem.engine import StopReason, StopRule
from pxem.errors import DegenerateFitError, DomainError, PreconditionError, SingularMatrixError
from pxem.robit import ReductionVariant, RobitData, RobitModel
from pxem.toy import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_LAMBDA_GRID,
    ToyConfig,
    ToyModel,
    toy_e_step,
    toy_efficient_da,
    toy_expanded_e_step,
    toy_m_step,
    toy_px_m_step,
    toy_reduce,
    toy_surface_grid,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_DIVERGED = 3
EXIT_SINGULAR = 4
EXIT_NO_DA = 5

# limit used for the rate columns of `compare`
LIMIT_RULE = StopRule(loglik_tol=1e-13, param_tol=1e-13, max_iter=200000)


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for max_iter here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid_spec(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be LO,HI,N")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid spec {text!r}") from None


def _common(p: argparse.ArgumentParser, schedule_help: str, schedule_default: str | None) -> None:
    p.add_argument("--model", choices=["toy", "robit"], required=True)
    p.add_argument("--schedule", default=schedule_default, help=schedule_help)
    p.add_argument("--data", metavar="PATH",
                   help="robit dataset CSV ('y,x1..xp' or 'volume,rate,y'); 'finney' uses the bundled copy")
    p.add_argument("--nu", type=float, default=2.0, help="robit degrees of freedom (default 2)")
    p.add_argument("--x", type=int, dest="x_obs", help="toy observed count X")
    p.add_argument("--pi", type=float, help="toy binomial probability")
    p.add_argument("--start", type=_float_list, metavar="CSV-LIST",
                   help="starting parameter (toy: lambda, default 1; robit: beta, default zeros)")
    p.add_argument("--loglik-tol", type=float, default=StopRule.loglik_tol)
    p.add_argument("--param-tol", type=float, default=StopRule.param_tol)
    p.add_argument("--max-iter", type=int, default=StopRule.max_iter)
    p.add_argument("--out", metavar="PATH", help="CSV output path (default: standard output)")
    p.add_argument("--reduction", default="correct",
                   help="robit reduction: correct, alpha-over-sigma, alpha-over-sigma-sq "
                        "(compare accepts a comma list)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pxem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="run one schedule and write its trace")
    _common(p, "em, ecm or pxem", "em")

    p = sub.add_parser("compare", help="run several schedules from the same start")
    _common(p, "comma list of schedules", "em,pxem")

    p = sub.add_parser("surface", help="toy L* and Q surfaces over (lambda_star, alpha)")
    _common(p, argparse.SUPPRESS, None)
    p.add_argument("--lambda-grid", type=_grid_spec, metavar="LO,HI,N",
                   help="log-spaced lambda_star grid (default 1,60,60)")
    p.add_argument("--alpha-grid", type=_grid_spec, metavar="LO,HI,N",
                   help="evenly spaced alpha grid (default 0.02,0.98,49)")

    p = sub.add_parser("efficient-da", help="efficient augmentation step for the toy model")
    _common(p, argparse.SUPPRESS, None)
    return parser


def _stop_rule(args) -> StopRule:
    try:
        return StopRule(args.loglik_tol, args.param_tol, args.max_iter)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _toy_config(args) -> ToyConfig:
    if args.x_obs is None or args.pi is None:
        raise CliError("the toy model needs --x and --pi")
    try:
        return ToyConfig(args.x_obs, args.pi)
    except DomainError as exc:
        raise CliError(str(exc)) from None


def _toy_start(args) -> float:
    if not args.start:
        return 1.0
    if len(args.start) != 1:
        raise CliError("toy --start takes a single lambda")
    return args.start[0]


def _reductions(text: str) -> list[ReductionVariant]:
    try:
        return [ReductionVariant(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"unknown reduction in {text!r}; choose from "
                       f"{', '.join(v.value for v in ReductionVariant)}") from None


def _robit_data(args) -> RobitData:
    if not args.data:
        raise CliError("the robit model needs --data")
    try:
        x, y = read_design_csv(args.data)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read dataset {args.data}: {exc}") from None
    try:
        return RobitData(x, y, args.nu)
    except SingularMatrixError as exc:
        raise CliError(str(exc), EXIT_SINGULAR) from None
    except DomainError as exc:
        raise CliError(str(exc)) from None


def _setup(args, variant=ReductionVariant.CORRECT):
    """Model, starting value and a short description for the metadata lines."""
    if args.model == "toy":
        cfg = _toy_config(args)
        return ToyModel(cfg), np.array([_toy_start(args)]), [f"x={cfg.x_obs}", f"pi={_fmt(cfg.pi)}"]
    data = _robit_data(args)
    start = np.zeros(data.p) if not args.start else np.array(args.start)
    if start.shape != (data.p,):
        raise CliError(f"--start needs {data.p} values for this design")
    return RobitModel(data, variant), start, [f"data={args.data}", f"nu={_fmt(data.nu)}", f"n={data.n}", f"p={data.p}"]


def _run(schedule, model, start, rule):
    if schedule not in engine.SCHEDULES:
        raise CliError(f"unknown schedule {schedule!r}; choose from {', '.join(engine.SCHEDULES)}")
    try:
        return engine.run_schedule(schedule, model, start, rule)
    except PreconditionError as exc:
        raise CliError(str(exc)) from None
    except SingularMatrixError as exc:
        raise CliError(str(exc), EXIT_SINGULAR) from None
    except DegenerateFitError as exc:
        raise CliError(str(exc), EXIT_DIVERGED) from None


def _exit_for(traces) -> int:
    reasons = {t.stop_reason for t in traces}
    if StopReason.DIVERGENCE in reasons:
        return EXIT_DIVERGED
    if StopReason.MAX_ITER in reasons:
        return EXIT_MAX_ITER
    return EXIT_OK


@contextlib.contextmanager
def _output(path):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def cmd_fit(args) -> int:
    variants = _reductions(args.reduction)
    if len(variants) != 1:
        raise CliError("fit takes a single --reduction")
    model, start, meta = _setup(args, variants[0])
    trace = _run(args.schedule, model, start, _stop_rule(args))
    with _output(args.out) as fh:
        engine.write_trace_csv(trace, fh)
    summary = sys.stdout if args.out else sys.stderr
    lines = [
        f"model: {args.model}",
        f"schedule: {trace.schedule}",
        *(f"{m.split('=', 1)[0]}: {m.split('=', 1)[1]}" for m in meta),
        f"iterations: {trace.n_iter}",
        f"stop_reason: {trace.stop_reason.value}",
        f"loglik: {_fmt(trace.loglik)}",
        "theta: " + ", ".join(_fmt(v) for v in trace.theta),
    ]
    rate = engine.param_tail_rate(trace)
    if rate is not None:
        lines.append(f"tail_rate: {rate:.6g}")
    if trace.message:
        lines.append(f"message: {trace.message}")
    print("\n".join(lines), file=summary)
    return _exit_for([trace])


def cmd_compare(args) -> int:
    schedules = [s.strip() for s in args.schedule.split(",") if s.strip()]
    variants = _reductions(args.reduction) if args.model == "robit" else [ReductionVariant.CORRECT]
    runs = []
    for s in schedules:
        for v in variants if s != "em" else variants[:1]:
            label = s if v is ReductionVariant.CORRECT or s == "em" else f"{s}:{v.value}"
            runs.append((label, s, v))
    if len(runs) < 2:
        raise CliError("compare needs at least two schedule runs")
    rule = _stop_rule(args)
    traces, limits, meta = [], [], []
    for label, s, v in runs:
        model, start, meta = _setup(args, v)
        trace = _run(s, model, start, rule)
        tight = _run(s, model, start, LIMIT_RULE)
        traces.append((label, trace))
        limits.append((tight.loglik, tight.theta))
    p = len(traces[0][1].theta)
    with _output(args.out) as fh:
        fh.write(f"# model={args.model} " + " ".join(meta) + "\n")
        fh.write(f"# start={','.join(_fmt(v) for v in np.atleast_1d(traces[0][1].iterations[0].theta))} "
                 f"loglik_tol={_fmt(rule.loglik_tol)} param_tol={_fmt(rule.param_tol)} max_iter={rule.max_iter}\n")
        fh.write(f"# rate_loglik limit: final loglik of a rerun with loglik_tol={_fmt(LIMIT_RULE.loglik_tol)} "
                 f"param_tol={_fmt(LIMIT_RULE.param_tol)}\n")
        for (label, trace), (limit, _) in zip(traces, limits):
            fh.write(f"# {label}: iterations={trace.n_iter} stop_reason={trace.stop_reason.value} "
                     f"loglik_limit={_fmt(limit)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["schedule", "iter", "loglik", "rate_loglik"]
                   + [f"theta_{j + 1}" for j in range(p)]
                   + [f"rate_theta_{j + 1}" for j in range(p)])
        for (label, trace), (limit, theta_limit) in zip(traces, limits):
            rates = engine.rate_diagnostics(trace, per_coordinate=True, loglik_limit=limit,
                                            theta_limit=theta_limit) \
                if len(trace.iterations) >= 3 else None
            ll_rates = dict(rates.loglik) if rates else {}
            th_rates = [dict(c) for c in rates.theta] if rates else [{} for _ in range(p)]
            for r in trace.iterations:
                row = [label, r.t, _fmt(r.loglik), _fmt(ll_rates[r.t]) if r.t in ll_rates else ""]
                row += [_fmt(v) for v in r.theta]
                row += [_fmt(c[r.t]) if r.t in c else "" for c in th_rates]
                w.writerow(row)
    return _exit_for([t for _, t in traces])


def _grid(spec, default, log_spaced):
    if spec is None:
        return default
    lo, hi, n = spec
    if n < 1:
        raise CliError("grid size must be positive")
    return tuple(np.geomspace(lo, hi, n) if log_spaced else np.linspace(lo, hi, n))


def cmd_surface(args) -> int:
    if args.model != "toy":
        raise CliError("surface is only supported for the toy model")
    cfg = _toy_config(args)
    lam_t = _toy_start(args)
    try:
        rows = toy_surface_grid(cfg, lam_t, _grid(args.lambda_grid, DEFAULT_LAMBDA_GRID, True),
                                _grid(args.alpha_grid, DEFAULT_ALPHA_GRID, False))
    except DomainError as exc:
        raise CliError(str(exc)) from None
    with _output(args.out) as fh:
        fh.write(f"# x={cfg.x_obs}\n# pi={_fmt(cfg.pi)}\n# lambda_t={_fmt(lam_t)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda_star", "alpha", "L_star", "Q"])
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return EXIT_OK


def cmd_efficient_da(args) -> int:
    if args.model != "toy":
        raise CliError("efficient-da is only defined for the toy model")
    cfg = _toy_config(args)
    lam = _toy_start(args)
    try:
        xp = toy_efficient_da(cfg, lam)
    except PreconditionError as exc:
        raise CliError(str(exc), EXIT_NO_DA) from None
    except DomainError as exc:
        raise CliError(str(exc)) from None
    z_hat = toy_expanded_e_step(cfg, xp)
    lam_next = toy_m_step(cfg, z_hat)
    px_next = toy_reduce(cfg, toy_px_m_step(cfg, toy_e_step(cfg, lam)))
    lines = [
        f"x: {cfg.x_obs}",
        f"pi: {_fmt(cfg.pi)}",
        f"lambda_t: {_fmt(lam)}",
        f"lambda_star_tilde: {_fmt(xp.lambda_star)}",
        f"alpha_tilde: {_fmt(xp.alpha)}",
        f"level_set_residual: {_fmt(xp.alpha * xp.lambda_star - lam * cfg.pi)}",
        f"imputed_z: {_fmt(z_hat)}",
        f"target_z: {_fmt(cfg.x_obs / cfg.pi)}",
        f"lambda_next: {_fmt(lam_next)}",
        f"pxem_lambda_next: {_fmt(px_next)}",
    ]
    with _output(args.out) as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "compare": cmd_compare, "surface": cmd_surface,
            "efficient-da": cmd_efficient_da}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"pxem: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
