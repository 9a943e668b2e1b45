"""Command-line front end: mission runs and offline trajectory planning."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .simulation import Simulation, load_event_script
from .trajectory import discretize, load_waypoints_csv, plan_spline, save_samples_csv


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    script = load_event_script(args.script) if args.script else None
    server = None
    on_telemetry = None
    inbox = None
    if args.serve is not None:
        from .server import TelemetryServer
        server = TelemetryServer(port=args.serve)
        server.start()
        inbox = server.inbox
        on_telemetry = server.publish
        print(f"serving telemetry on ws://127.0.0.1:{args.serve}")
    sim = Simulation(
        config, script=script, out_dir=args.out, inbox=inbox,
        on_telemetry=on_telemetry, pace_realtime=not args.headless,
    )
    try:
        metrics = sim.run()
    finally:
        if server is not None:
            server.stop()
    print(f"final state: {metrics.final_state}  sim time: {metrics.sim_time:.2f} s")
    if metrics.tracking_records:
        print(f"tracking RMSE: {metrics.rmse_pos:.4f} m "
              f"(max {metrics.max_pos_error:.4f} m over {metrics.tracking_records} ticks)")
    if args.out:
        print(f"logs written to {Path(args.out).resolve()}")
    return metrics.exit_code


def _cmd_plan(args: argparse.Namespace) -> int:
    waypoints = load_waypoints_csv(args.waypoints)
    spline = plan_spline(waypoints)
    samples = discretize(spline, args.rate)
    save_samples_csv(args.out, samples)
    print(f"planned {len(waypoints)} waypoints -> {len(samples)} samples at {args.rate} Hz")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoppersim",
                                     description="Thrust-vectored hopper simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a closed-loop mission")
    run.add_argument("--config", type=str, default=None, help="YAML config file")
    run.add_argument("--script", type=str, default=None, help="scripted event file")
    run.add_argument("--serve", type=int, default=None, metavar="PORT",
                     help="serve the telemetry/command protocol on this port")
    run.add_argument("--headless", action="store_true",
                     help="run as fast as possible instead of real-time pacing")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", type=str, default=None, help="output directory for logs")
    run.set_defaults(func=_cmd_run)

    plan = sub.add_parser("plan", help="plan and discretize a waypoint trajectory")
    plan.add_argument("--waypoints", type=str, required=True, help="CSV with header t,x,y,z")
    plan.add_argument("--rate", type=float, required=True, help="sampling rate, Hz")
    plan.add_argument("--out", type=str, required=True, help="output CSV path")
    plan.set_defaults(func=_cmd_plan)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
