"""Command line entry point: ``reinsdiv {solve,simulate,counterexample,verify}``.

Exit codes: 0 success, 1 internal failure, 2 config error, 3 assumption
violation, 4 solver non-convergence, 5 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import csvio
from .config import ConfigError, RunConfig, load_config
from .hjb import AssumptionError, FeedbackPolicy, control_grid, extract_policy, solve
from .model import validate_assumptions
from .simulate import (ScriptedStrategy, counterexample_collective, default_horizon, estimate_value,
                       paired_paths, path_events_rows, path_rng, simulate_path)
from . import verify as vfy

log = logging.getLogger("reinsdiv")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _prepare(args) -> tuple[RunConfig, Path]:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG)
    if args.seed is not None:
        cfg.mc.seed = args.seed
    if args.grid_n is not None:
        cfg.grid.n = args.grid_n
    if args.jump_formula is not None:
        cfg.solver.jump_formula = args.jump_formula
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _params(cfg: RunConfig):
    try:
        return cfg.params()
    except ConfigError as exc:
        raise CliError(f"config error: {exc}", EXIT_CONFIG)


def _solve(cfg: RunConfig, params):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return solve(params, cfg.solver_config())
    except AssumptionError as exc:
        raise CliError(f"assumption violated: {exc}", EXIT_ASSUMPTION)


def _policy(vg, params) -> FeedbackPolicy:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return extract_policy(vg, params)


def cmd_solve(args) -> int:
    cfg, out = _prepare(args)
    params = _params(cfg)
    for msg in validate_assumptions(params).messages:
        log.warning(msg)
    vg, rep = _solve(cfg, params)
    policy = _policy(vg, params)
    csvio.write_value_grid(out / "value_policy.csv", vg)
    csvio.write_solve_report(out / "solve_report.csv", rep, policy.barrier)
    log.info("solve: %d iterations, residual %.3e, barrier %g, %d dividend nodes",
             rep.iterations, rep.sup_residual, policy.barrier, int(vg.dividend_flag.sum()))
    if not rep.converged:
        raise CliError(f"policy iteration did not converge after {rep.iterations} iterations "
                       f"(residual {rep.sup_residual:.3e})", EXIT_NONCONVERGED)
    return EXIT_OK


def _load_grid(path: Path, cfg: RunConfig, params):
    controls = control_grid(params, cfg.grid.control_points)
    try:
        return csvio.read_value_grid(path, controls, cfg.solver.jump_formula)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read value grid {path}: {exc}", EXIT_CONFIG)


def cmd_simulate(args) -> int:
    cfg, out = _prepare(args)
    params = _params(cfg)
    if args.retention is not None or args.barrier is not None:
        if args.retention is None or args.barrier is None:
            raise CliError("--retention and --barrier must be given together", EXIT_CONFIG)
        policy = FeedbackPolicy.constant(args.retention, args.barrier, params)
    else:
        src = out / "value_policy.csv"
        if not src.exists():
            raise CliError(f"no policy source: run 'solve' first ({src} missing) or pass --retention/--barrier",
                           EXIT_CONFIG)
        policy = _policy(_load_grid(src, cfg, params), params)
    horizon = cfg.mc.t_max_override or default_horizon(params)
    rows = []
    for x0 in args.x0 or [1.0]:
        est = estimate_value(params, policy, x0, cfg.mc.paths, cfg.mc.seed, horizon)
        rows.append((x0, est.mean, est.std_error, est.paths, est.seed))
    csvio.write_rows(out / "estimate_summary.csv", ["x0", "mean", "std_error", "paths", "seed"], rows)
    if args.dump_paths:
        x0 = (args.x0 or [1.0])[0]
        events = []
        for k in range(args.dump_paths):
            rec = simulate_path(params, policy, x0, horizon, path_rng(cfg.mc.seed, k), record_events=True)
            events.extend(path_events_rows(k, rec))
        csvio.write_rows(out / "paths.csv", ["path_id", "time", "event", "reserve_after", "amount"], events)
    return EXIT_OK


def cmd_counterexample(args) -> int:
    cfg, out = _prepare(args)
    params = _params(cfg)
    x0 = (args.x0 or [1e-3])[0]
    res = counterexample_collective(params.r, cfg.mc.paths, cfg.mc.seed, x0=x0)
    vg, rep = _solve(cfg, params)
    ratios = vg.V[1:] / vg.x[1:]
    row = (params.r, x0, res.analytic, res.estimate.mean, res.estimate.std_error, res.estimate.paths,
           res.estimate.seed, res.no_claim_probability.mean, res.no_claim_probability.std_error,
           vg.x[1], vg.V[1], float(ratios.max()))
    csvio.write_rows(out / "counterexample.csv",
                     ["r", "x0", "analytic", "mc_mean", "std_error", "paths", "seed", "no_claim_prob",
                      "no_claim_se", "grid_x1", "grid_v_x1", "grid_K"], [row])
    return EXIT_OK


def run_verify_suite(cfg: RunConfig, params, grid_path: Path | None = None, test_points=(1.0, 5.0, 9.0),
                     audit_paths: int = 20_000, pairs: int = 10_000) -> list[vfy.PropertyReport]:
    if grid_path is not None:
        vg = _load_grid(grid_path, cfg, params)
    else:
        vg, rep = _solve(cfg, params)
    reports = vfy.check_value_structure(vg)
    reports.append(vfy.check_vi_residual(vg, params))
    if grid_path is not None:
        return reports
    reports.append(vfy.check_dpp_oracle(params, formula=cfg.solver.jump_formula))
    study = vfy.refinement_study(params, config=cfg.solver_config())
    ok = study.at_roundoff or all(r >= 1.5 for r in study.ratios)
    reports.append(vfy.PropertyReport("refinement", ok, max(study.diffs), None,
                                      f"diffs {study.diffs}, ratios {study.ratios}"))
    policy = _policy(vg, params)
    grid_error = study.constant / cfg.grid.n
    reports.append(vfy.check_cross_validation(params, vg, policy, test_points, cfg.mc.paths, cfg.mc.seed,
                                              grid_error, audit_paths=min(audit_paths, cfg.mc.paths)))
    cmp_ = paired_paths(params, ScriptedStrategy(params.u_max, ((1.0, 0.05), (2.0, 0.05))), 1.0, 2.0,
                        pairs, cfg.mc.seed)
    reports.append(vfy.PropertyReport.from_violation("comparison", cmp_.violations, 0, None,
                                                     f"{cmp_.pairs} pairs, raw reversals {cmp_.raw_violations}"))
    return reports


def cmd_verify(args) -> int:
    cfg, out = _prepare(args)
    params = _params(cfg)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            reports = run_verify_suite(cfg, params, Path(args.grid) if args.grid else None,
                                       tuple(args.x0) if args.x0 else (1.0, 5.0, 9.0))
    except CliError:
        raise
    except Exception as exc:
        raise CliError(f"verification infrastructure failed: {exc!r}", EXIT_INTERNAL)
    vfy.write_report(reports, out / "verify_report.csv")
    for rep in reports:
        log.info("%-22s %s  worst=%.3e  at %s", rep.name, "PASS" if rep.passed else "FAIL",
                 rep.worst_violation, rep.location)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="fig1", help="YAML config path or bundled name (fig1, fig2)")
    common.add_argument("--out", help="output directory (default: output.directory from config)")
    common.add_argument("--seed", type=int, help="override mc.seed")
    common.add_argument("--grid-n", type=int, help="override grid.n")
    common.add_argument("--jump-formula", choices=["derived", "printed"], help="override solver.jump_formula")
    common.add_argument("--x0", type=_float_list, help="comma-separated initial reserves")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="reinsdiv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the discrete HJB inequality").set_defaults(func=cmd_solve)
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo value of a policy")
    sim.add_argument("--retention", type=float, help="constant retention (with --barrier)")
    sim.add_argument("--barrier", type=float, help="dividend barrier (with --retention)")
    sim.add_argument("--dump-paths", type=int, default=0, help="write events of the first N paths to paths.csv")
    sim.set_defaults(func=cmd_simulate)
    sub.add_parser("counterexample", parents=[common],
                   help="single-contract model with positive value at zero capital").set_defaults(func=cmd_counterexample)
    ver = sub.add_parser("verify", parents=[common], help="run the property checks")
    ver.add_argument("--grid", help="check an existing value_policy.csv instead of solving")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
