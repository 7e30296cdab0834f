"""``swarmctl`` command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(non-Hurwitz dynamics, diverged or unconverged run).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .errors import ConfigError, NumericalError
from .scenario import Scenario, load_scenario
from .wireless import MIN_MC_TRIALS

log = logging.getLogger("swarmctl")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario JSON (defaults used when omitted)")
    p.add_argument("--seed", type=_seed, help="override the scenario seed")
    p.add_argument("--out", type=Path, help="output file")
    p.add_argument("-v", "--verbose", action="store_true")


def _sim_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--step-ms", type=float, help="integration step in ms")
    p.add_argument("--horizon-s", type=float, help="simulated time in s")
    p.add_argument("--report", type=Path, help="write the scalar report as JSON")


def _sweep_opts(p: argparse.ArgumentParser, mc_default: int) -> None:
    p.add_argument("--densities", type=_float_list, default=[0.01, 0.05, 0.10],
                   help="interferer densities per m^2, comma separated")
    p.add_argument("--spacing-min", type=float, default=1.0)
    p.add_argument("--spacing-max", type=float, default=10.0)
    p.add_argument("--spacing-step", type=float, default=0.5)
    p.add_argument("--mc-trials", type=int, default=mc_default,
                   help=f"Monte Carlo trials per point (0 disables; otherwise >= {MIN_MC_TRIALS})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("delay-bound", help="maximum tolerable follower-to-follower delay")
    _common(p)
    p.add_argument("--m1-variant", choices=("derived", "printed"), default="derived")

    p = sub.add_parser("simulate", help="integrate the delayed formation dynamics")
    _common(p)
    _sim_opts(p)
    p.add_argument("--delay-ms", type=float, help="upper end of the delay range (0 = no delay)")

    for name, mc_default, text in (("reliability", 0, "reliability versus spacing sweep"),
                                   ("montecarlo", 100_000, "reliability sweep with Monte Carlo column")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _sweep_opts(p, mc_default)
        p.add_argument("--delay-ms", type=float, help="delay requirement (default: the stability bound)")

    p = sub.add_parser("joint", help="control loop driven by sampled wireless delays")
    _common(p)
    _sim_opts(p)
    p.add_argument("--delay-ms", type=float, help="delay requirement (default: the stability bound)")
    return parser


def _scenario(args) -> Scenario:
    sc = load_scenario(args.config) if args.config else Scenario()
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _sim_kwargs(args) -> dict:
    kw = {}
    if args.step_ms is not None:
        kw["step"] = args.step_ms * 1e-3
    if args.horizon_s is not None:
        kw["horizon"] = args.horizon_s
    return kw


def _print_kv(items: dict, stream=None) -> None:
    stream = stream or sys.stdout
    for k, v in items.items():
        if isinstance(v, float):
            v = ex.fmt(v)
        elif isinstance(v, bool):
            v = str(v).lower()
        print(f"{k}: {v}", file=stream)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_delay_bound(args) -> int:
    sc = _scenario(args)
    rep = ex.delay_bound_report(sc, args.m1_variant)
    _print_kv({"tau_max_ms": round(rep["tau_max_ms"], 1), "tau_max_s": rep["tau_max_s"],
               "lambda_max": rep["lambda_max"], "lyapunov_residual": rep["lyapunov_residual"],
               "k": rep["k"], "m1_variant": rep["m1_variant"]})
    if args.out:
        _write_json(args.out, rep)
    return EXIT_OK


def _convergence_items(report) -> dict:
    return {"converged": report.converged, "diverged": report.diverged,
            "settle_time_s": report.settle_time, "max_overshoot": report.max_overshoot}


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    if args.delay_ms is not None and args.delay_ms < 0:
        raise ConfigError("--delay-ms: must be >= 0")
    res = ex.simulate(sc, args.delay_ms, **_sim_kwargs(args))
    if args.out:
        ex.write_trajectory_csv(res.trajectory, args.out)
    items = {"tau_max_ms": res.tau_max * 1e3, "status": res.trajectory.status,
             "steps": len(res.trajectory) - 1, **_convergence_items(res.report)}
    _print_kv(items)
    if args.report:
        _write_json(args.report, items)
    return EXIT_OK if res.report.converged else EXIT_NUMERIC


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    if args.mc_trials and args.mc_trials < MIN_MC_TRIALS:
        raise ConfigError(f"--mc-trials: must be 0 or >= {MIN_MC_TRIALS}")
    if args.command == "montecarlo" and not args.mc_trials:
        raise ConfigError("--mc-trials: montecarlo needs a positive trial count")
    if args.delay_ms is not None and not args.delay_ms > 0:
        raise ConfigError("--delay-ms: must be > 0")
    try:
        grid = ex.spacing_grid(args.spacing_min, args.spacing_max, args.spacing_step)
    except ValueError as exc:
        raise ConfigError(f"--spacing-*: {exc}") from None
    if any(d < 0 for d in args.densities):
        raise ConfigError("--densities: must be >= 0")
    required = ex.required_delay(sc, args.delay_ms)
    rows = ex.reliability_sweep(sc, args.densities, grid, required, args.mc_trials)
    if args.out:
        ex.write_sweep_csv(rows, args.out)
    else:
        buf = io.StringIO()
        ex.write_sweep_csv(rows, buf)
        sys.stdout.write(buf.getvalue())
    log.info("required delay %.6g ms, %d grid points", required * 1e3, len(rows))
    return EXIT_OK


def cmd_joint(args) -> int:
    sc = _scenario(args)
    if args.delay_ms is not None and not args.delay_ms > 0:
        raise ConfigError("--delay-ms: must be > 0")
    rec = ex.joint_run(sc, args.delay_ms, **_sim_kwargs(args))
    if args.out:
        ex.write_joint_csv(rec, args.out)
        ex.write_trajectory_csv(rec.trajectory, ex.trajectory_path_for(args.out))
    items = {"tau_max_ms": rec.tau_max * 1e3, "status": rec.trajectory.status,
             "periods": len(rec.periods), "lost_packets": sum(r.lost for r in rec.periods),
             "delay_met_fraction": rec.met_fraction, "analytic_reliability": rec.analytic_reliability,
             **_convergence_items(rec.report)}
    _print_kv(items)
    if args.report:
        _write_json(args.report, items)
    return EXIT_OK if rec.report.converged else EXIT_NUMERIC


COMMANDS = {"delay-bound": cmd_delay_bound, "simulate": cmd_simulate, "reliability": cmd_sweep,
            "montecarlo": cmd_sweep, "joint": cmd_joint}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"swarmctl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"swarmctl: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"swarmctl: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
