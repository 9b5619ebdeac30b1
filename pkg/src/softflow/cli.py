"""Command-line entry point.

    softflow <command> --scenario scenario.json [--out DIR] [--seed N]

Commands: solve, simulate, sweep, demo, enumerate, mocap, serve.  On failure
the process exits nonzero and prints a machine-readable JSON error object on
stderr.  The random seed only feeds noise-injection utilities (synthetic
measurement noise); every solver path is deterministic.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

from . import runs
from .circuit import ConvergenceError, NetworkValidationError, OpenCircuitError, SolverOptions
from .fluids import default_fluid_library
from .mocap import NoDeformationError, ParseError, UnsettledError
from .scenario import Scenario, ScenarioError, load_scenario


def _common(parser: argparse.ArgumentParser, scenario_required: bool = True):
    parser.add_argument("--scenario", required=scenario_required,
                        help="path to the scenario JSON file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for noise-injection utilities")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("solve", "steady-state solve of the scenario subject"),
        ("simulate", "transient run with the scenario schedule"),
        ("sweep", "supply-pressure sweep of an actuator rig"),
        ("demo", "run a gripper/quadruped preset sequence"),
        ("enumerate", "enumerate gripper control configurations"),
    ):
        p = sub.add_parser(name, help=help_text)
        _common(p)

    p = sub.add_parser("mocap", help="analyse a tracked-marker CSV")
    _common(p, scenario_required=False)
    p.add_argument("--input", required=True, help="marker track CSV")

    p = sub.add_parser("serve", help="start the interactive steering service")
    _common(p)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7350)
    p.add_argument("--record", default=None, help="JSON-lines replay log")
    return parser


def _load(args) -> Scenario:
    if args.scenario is None:
        return Scenario(fluids=default_fluid_library(), solver=SolverOptions())
    return load_scenario(args.scenario)


async def _serve(args, scenario: Scenario):
    from .teleop import TeleopServer

    server = TeleopServer(scenario, host=args.bind, port=args.port,
                          record_path=args.record)
    await server.start()
    if scenario.subject is not None:
        # pre-create a session for the scenario subject so panels can join s1
        with open(args.scenario) as fh:
            subject_doc = json.load(fh)["subject"]
        server.create_session(subject_doc)
    print(json.dumps({"serving": {"host": server.host, "port": server.port},
                      "sessions": sorted(server.sessions)}), flush=True)
    try:
        while True:
            await asyncio.sleep(3600)
    except (KeyboardInterrupt, asyncio.CancelledError):
        pass
    finally:
        await server.stop()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = _load(args)
        out = Path(args.out)
        if args.command == "solve":
            summary = runs.run_solve(scenario, out)
        elif args.command == "simulate":
            summary = runs.run_simulate(scenario, out)
        elif args.command == "sweep":
            summary = runs.run_sweep(scenario, out, seed=args.seed)
        elif args.command == "demo":
            summary = runs.run_demo(scenario, out)
        elif args.command == "enumerate":
            summary = runs.run_enumerate(scenario, out)
        elif args.command == "mocap":
            summary = runs.run_mocap(args.input, scenario, out)
        elif args.command == "serve":
            asyncio.run(_serve(args, scenario))
            return 0
        else:  # pragma: no cover
            raise ScenarioError(f"unknown command {args.command!r}")
    except (ScenarioError, NetworkValidationError, OpenCircuitError, ConvergenceError,
            ParseError, NoDeformationError, UnsettledError, OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
