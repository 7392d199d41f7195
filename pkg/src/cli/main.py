"""
Command-line entry point: `python -m src.cli.main <subcommand> ...`.

Subcommands:
- synth          synthetic order log
- estimate       order log -> instance.json
- inspect        ironed envelopes of an instance
- solve-static   instance -> plan.json + certificate.json
- solve-dynamic  instance + horizon -> plan.json + certificate.json
- kkt-check      verify a plan/certificate pair
- simulate       run pricing policies on an instance
- report         compare saved traces
- run            the whole pipeline

Every subcommand writes manifest.json next to its outputs. Exit codes:
0 success, 2 validation failure, 3 non-certified solve, 4 KKT failure.
"""

import argparse
import hashlib
import json
import logging
import sys
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src.core.instance import load_instance, normalize_instance, save_instance
from src.duality.kkt import kkt_check
from src.duality.report import marginal_report
from src.ingestion.estimation import EstimationConfig, estimate_instance
from src.ingestion.filtering import compute_durations, frequency_table
from src.ingestion.loader import orders_frame, parse_orders
from src.ingestion.synth import five_region_config, load_synth_config, synth_generate, write_orders
from src.simulator.compare import compare_policies, comparison_table, report_from_traces, revenue_curves, write_trace
from src.simulator.policies import DynamPolicy, parse_policy
from src.solver.drivers import SolveOutcome, solve_dynamic, solve_static
from src.solver.plan import SupplyConstraint, load_certificate, load_plan, save_model
from src.solver.programs import SolverConfig, build_envelopes
from src.transform.expansion import expand
from src.utils.config import get_settings
from src.utils.errors import CertificationError, FleetFlowError, SolveError, ValidationError
from src.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)

PACKAGES = ("numpy", "scipy", "pandas", "networkx", "pydantic", "langgraph", "python-dotenv")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def package_versions() -> Dict[str, Optional[str]]:
    versions = {"python": sys.version.split()[0]}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def write_manifest(out_dir: Path, args: argparse.Namespace, inputs: Sequence[str]) -> Path:
    """Subcommand, arguments, package versions and input digests."""
    options = {k: v for k, v in vars(args).items() if k != "handler"}
    payload = {
        "subcommand": args.command,
        "arguments": options,
        "settings": get_settings().model_dump(),
        "versions": package_versions(),
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, default=str), encoding="utf-8")
    return path


def collect_inputs(args: argparse.Namespace) -> List[str]:
    """Every file argument of a subcommand, dynam plan files included."""
    paths = [getattr(args, name, None) for name in ("config", "orders", "instance", "plan", "certificate", "w1")]
    paths.extend(getattr(args, "traces", None) or [])
    for spec in getattr(args, "policy", None) or []:
        for item in spec.partition(":")[2].split(","):
            key, _, value = item.partition("=")
            if key.strip() == "plan":
                paths.append(value)
    return [p for p in paths if p and Path(p).is_file()]


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig.from_settings(
        grid_size=args.grid_size,
        max_segments=args.max_segments,
        dynamic_max_segments=args.dynamic_max_segments,
        feasibility_tol=args.feasibility_tol,
        stationarity_tol=args.stationarity_tol,
        max_pivots=args.max_pivots,
    )


def _read_distribution(value: Optional[str]) -> Optional[Dict[str, float]]:
    """A JSON object inline or the path of a JSON file."""
    if value is None:
        return None
    path = Path(value)
    text = path.read_text(encoding="utf-8") if path.is_file() else value
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"initial distribution is neither a JSON object nor a JSON file: {value!r}") from e
    if not isinstance(data, dict):
        raise ValidationError("initial distribution must map regions to masses")
    return {str(k): float(v) for k, v in data.items()}


def _parse_marginal_costs(items: Optional[List[str]]):
    """`width:cost` pieces; width `inf` marks the unbounded last piece."""
    pieces = []
    for item in items or []:
        width, sep, cost = item.partition(":")
        if not sep:
            raise ValidationError(f"marginal-cost piece {item!r} is not width:cost")
        try:
            pieces.append((None if width.strip().lower() == "inf" else float(width), float(cost)))
        except ValueError as e:
            raise ValidationError(f"marginal-cost piece {item!r} is not numeric") from e
    return pieces or [(None, 0.0)]


def _write_solve(outcome: SolveOutcome, out: Path) -> None:
    save_model(outcome.plan, out / "plan.json")
    save_model(outcome.certificate, out / "certificate.json")
    save_model(outcome.result, out / "solve.json")
    marginals = marginal_report(outcome.certificate, outcome.mapping.real_nodes, outcome.instance.drivers)
    (out / "marginals.txt").write_text(marginals.text + "\n", encoding="utf-8")
    print(marginals.text)
    print(f"objective {outcome.plan.objective_value:.9g} (money {outcome.money_value:.6g}), "
          f"status {outcome.result.status}, certified {outcome.result.certified}")
    if not outcome.result.certified:
        raise SolveError(f"solve not certified: status {outcome.result.status}, residuals {outcome.result.residuals}")


# Handlers


def cmd_synth(args: argparse.Namespace) -> None:
    config = load_synth_config(args.config) if args.config else five_region_config(args.requests, args.imbalance)
    frame = synth_generate(config, seed=args.seed)
    out = _out_dir(args)
    write_orders(frame, out / "orders.csv")
    (out / "synth_config.json").write_text(config.model_dump_json(indent=2), encoding="utf-8")
    print(f"wrote {len(frame)} orders to {out / 'orders.csv'}")


def cmd_estimate(args: argparse.Namespace) -> None:
    parsed = parse_orders(args.orders)
    frame = orders_frame(parsed.records)
    config = EstimationConfig(step_minutes=args.step_minutes, hourly=args.hourly, supply=args.supply,
                              lower_quantile=args.lower_quantile, upper_quantile=args.upper_quantile)
    result = estimate_instance(frame, config)
    out = _out_dir(args)
    save_instance(result.to_instance(), out / "instance.json")
    (out / "estimation.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    frequency_table(compute_durations(frame)).to_csv(out / "frequency.csv", index=False)
    if parsed.problems:
        problems = [p.model_dump() for p in parsed.problems]
        (out / "rejected_rows.json").write_text(json.dumps(problems, indent=2), encoding="utf-8")
    print(f"alpha {result.alpha:.4f} per minute, {len(result.edges)} edges, {result.drivers:.4g} drivers")


def cmd_inspect(args: argparse.Namespace) -> None:
    instance = normalize_instance(load_instance(args.instance))
    _, mapping = expand(instance)
    config = SolverConfig.from_settings(grid_size=args.grid_size)
    envelopes = build_envelopes(instance, config)
    payload = {}
    for edge_id, per_period in envelopes.items():
        payload[edge_id] = [
            {
                "breakpoints": list(env.breakpoints),
                "values": list(env.values),
                "ironed_intervals": env.ironed_intervals(),
            }
            for env in per_period
        ]
    out = _out_dir(args)
    (out / "envelopes.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    virtual = len(mapping.virtual)
    print(f"{len(instance.nodes)} regions, {len(instance.edges)} edges, {instance.periods} demand period(s), "
          f"{virtual} virtual node(s) after travel-time unification")
    for edge_id, per_period in payload.items():
        ironed = sum(len(p["ironed_intervals"]) for p in per_period)
        print(f"  {edge_id}: {len(per_period[0]['breakpoints'])} breakpoints, {ironed} ironed interval(s)")


def cmd_solve_static(args: argparse.Namespace) -> None:
    outcome = solve_static(load_instance(args.instance), _solver_config(args), period=args.period)
    _write_solve(outcome, _out_dir(args))


def cmd_solve_dynamic(args: argparse.Namespace) -> None:
    try:
        supply = SupplyConstraint(kind=args.supply, budget=args.budget,
                                  marginal_costs=_parse_marginal_costs(args.marginal_cost))
    except ValueError as e:
        raise ValidationError(f"bad supply constraint: {e}") from e
    outcome = solve_dynamic(load_instance(args.instance), T=args.horizon, w1=_read_distribution(args.w1),
                            supply=supply, config=_solver_config(args))
    _write_solve(outcome, _out_dir(args))


def cmd_kkt_check(args: argparse.Namespace) -> None:
    instance = load_instance(args.instance)
    report = kkt_check(instance, None, load_plan(args.plan), load_certificate(args.certificate),
                       args.feasibility_tol, args.stationarity_tol)
    out = _out_dir(args)
    (out / "kkt.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(f"passed {report.passed}: gap {report.duality_gap:.3e}, max stationarity {report.max_stationarity:.3e}, "
          f"complementary slackness {report.complementary_slackness:.3e}")
    for reason in report.reasons:
        print(f"  {reason}")
    if not report.passed:
        raise CertificationError("; ".join(report.reasons))


def cmd_simulate(args: argparse.Namespace) -> None:
    instance = load_instance(args.instance)
    cert = load_certificate(args.certificate) if args.certificate else None
    policies = []
    for spec in args.policy:
        policy = parse_policy(spec)
        if isinstance(policy, DynamPolicy) and cert is not None:
            update = {}
            if policy.grid_size is None:
                update.update(grid_size=cert.grid_size, max_segments=cert.max_segments)
            if "period" not in policy.model_fields_set:
                update["period"] = cert.period
            policy = policy.model_copy(update=update)
        policies.append(policy)
    traces = compare_policies(instance, policies, steps=args.steps, step_minutes=args.step_minutes)
    out = _out_dir(args)
    for name, trace in traces.items():
        write_trace(trace, out / name.lower() if len(traces) > 1 else out)
    if len(traces) > 1:
        comparison_table(traces).to_csv(out / "comparison.csv")
        revenue_curves(traces).to_csv(out / "revenue_curves.csv")
    for name, trace in traces.items():
        print(f"{name}: time-average revenue {trace.time_average_revenue():.6g}, "
              f"supply-ratio deviation {trace.supply_ratio_deviation():.4f}")


def cmd_report(args: argparse.Namespace) -> None:
    table, curves = report_from_traces(args.traces)
    out = _out_dir(args)
    table.to_csv(out / "comparison.csv")
    curves.to_csv(out / "revenue_curves.csv")
    print(table.to_string())


def cmd_run(args: argparse.Namespace) -> None:
    from src.pipeline.workflow import run_pipeline

    final = run_pipeline(args.out, orders_path=args.orders, instance_path=args.instance, mode=args.mode,
                         steps=args.steps, alpha=args.alpha, beta_max=args.beta_max, config=_solver_config(args))
    for s in final["summaries"]:
        print(f"{s['policy']}: time-average revenue {s['time_average_revenue']:.6g}, "
              f"supply-ratio deviation {s['supply_ratio_deviation']:.4f}")
    if not final["certified"]:
        raise SolveError(f"solve not certified: status {final['solve_status']}")
    if not final["kkt_passed"]:
        raise CertificationError("; ".join(final["kkt_reasons"]))


# Parser


def _solver_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--grid-size", type=int, default=None, help="Throughput samples per envelope")
    group.add_argument("--max-segments", type=int, default=None, help="Envelope segments per edge (static)")
    group.add_argument("--dynamic-max-segments", type=int, default=None, help="Envelope segments per edge and step")
    group.add_argument("--feasibility-tol", type=float, default=None)
    group.add_argument("--stationarity-tol", type=float, default=None)
    group.add_argument("--max-pivots", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="fleetflow", description="Network pricing and dispatch for ride-hailing fleets.")
    parser.add_argument("--log-level", default=None, help="Overrides FLEETFLOW_LOG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic order log")
    p.add_argument("--config", default=None, help="Synthetic generator config JSON (default: five regions)")
    p.add_argument("--requests", type=int, default=2000, help="Requests per edge for the default config")
    p.add_argument("--imbalance", type=float, default=0.0, help="Extra share of requests into R1 and missing share out of it")
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("estimate", help="Estimate an instance from an order log")
    p.add_argument("orders")
    p.add_argument("--hourly", action="store_true", help="One demand curve per hour of day")
    p.add_argument("--supply", type=float, default=None, help="Drivers in request units (default: from busy time)")
    p.add_argument("--step-minutes", type=int, default=settings.step_minutes)
    p.add_argument("--lower-quantile", type=float, default=0.05)
    p.add_argument("--upper-quantile", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("inspect", help="Write the ironed envelopes of an instance")
    p.add_argument("instance")
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("solve-static", help="Solve the stationary program")
    p.add_argument("instance")
    p.add_argument("--period", type=int, default=0, help="Demand period for multi-period instances")
    p.add_argument("--out", required=True)
    _solver_options(p)
    p.set_defaults(handler=cmd_solve_static)

    p = sub.add_parser("solve-dynamic", help="Solve the finite-horizon program")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=settings.steps)
    p.add_argument("--w1", default=None, help="Initial distribution: JSON object or file")
    p.add_argument("--supply", choices=["per_step", "total_accumulated", "soft"], default="per_step")
    p.add_argument("--budget", type=float, default=None, help="Driver-steps for total_accumulated")
    p.add_argument("--marginal-cost", action="append", default=None, metavar="WIDTH:COST",
                   help="Soft supply piece; repeat, last width may be inf")
    p.add_argument("--out", required=True)
    _solver_options(p)
    p.set_defaults(handler=cmd_solve_dynamic)

    p = sub.add_parser("kkt-check", help="Certify a plan against its multipliers")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("certificate")
    p.add_argument("--feasibility-tol", type=float, default=None)
    p.add_argument("--stationarity-tol", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_kkt_check)

    p = sub.add_parser("simulate", help="Simulate pricing policies")
    p.add_argument("instance")
    p.add_argument("--policy", action="append", required=True,
                   help="fixed:alpha=0.5117 | surge:alpha=0.5117,beta=1..5 | dynam:plan=plan.json; repeatable")
    p.add_argument("--certificate", default=None, help="Envelope resolution for dynam plans")
    p.add_argument("--steps", type=int, default=settings.steps)
    p.add_argument("--step-minutes", type=int, default=settings.step_minutes)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("report", help="Compare saved traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("run", help="Estimate (or load), solve, certify, simulate and report")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--orders", default=None)
    source.add_argument("--instance", default=None)
    p.add_argument("--mode", choices=["auto", "static", "dynamic"], default="auto")
    p.add_argument("--steps", type=int, default=settings.steps)
    p.add_argument("--alpha", type=float, default=None, help="Fixed price per minute (default: estimated)")
    p.add_argument("--beta-max", type=float, default=5.0)
    p.add_argument("--out", required=True)
    _solver_options(p)
    p.set_defaults(handler=cmd_run)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    status = 0
    try:
        args.handler(args)
    except FleetFlowError as e:
        logger.error(f"{args.command} failed: {e}")
        status = e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        status = ValidationError.exit_code
    write_manifest(_out_dir(args), args, collect_inputs(args))
    return status


if __name__ == "__main__":
    sys.exit(main())
