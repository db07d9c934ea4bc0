"""Command line: ``ecotable <subcommand>``.

Exit codes: 0 success, 1 input error, 2 infeasible, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .generate import GenerationError, generate_instance
from .graph import GraphInfeasibleError
from .lp import SolverFailure
from .network import InfeasibleSeedError, InfeasibleTimetableError, check_timetable, enumerate_constraints, validate
from .pipeline import PipelineConfig, StageError, bundled, run_pipeline
from .profile import InfeasibleTripError, TripTooLongError, energy_of_profile, simulate_profile, write_power_csv
from .step_one import InfeasibleError

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 1, 2, 3


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, (InfeasibleSeedError, InfeasibleTimetableError, GraphInfeasibleError, InfeasibleError,
                        InfeasibleTripError, TripTooLongError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, SolverFailure):
        return EXIT_SOLVER
    return EXIT_INPUT


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", type=Path, default=bundled("sample_network.json"))
    p.add_argument("--limits", type=Path, default=bundled("speed_limits.csv"))
    p.add_argument("--physics", type=Path, default=bundled("physics.json"))
    p.add_argument("--seed-timetable", type=Path, default=bundled("sample_seed.csv"))
    p.add_argument("--r", type=float, default=120.0, help="pairing window, seconds")
    p.add_argument("--fit-width", type=int, default=20)
    p.add_argument("--fit-step", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.1, help="profile sampling step, seconds")
    p.add_argument("--backend", choices=["simplex", "highs"], default="simplex")
    p.add_argument("--out", type=Path, default=Path("out"))


def _config(a) -> PipelineConfig:
    return PipelineConfig(network=a.network, limits=a.limits, physics=a.physics, seed_timetable=a.seed_timetable,
                          r=a.r, fit_width=a.fit_width, fit_step=a.fit_step, dt=a.dt, out_dir=a.out,
                          backend=a.backend)


def cmd_validate(a) -> int:
    net = io.load_network(a.network)
    bad = validate(net)
    if not bad and a.seed_timetable:
        seed = io.read_timetable(a.seed_timetable)
        try:
            recs = enumerate_constraints(net, seed)
        except InfeasibleSeedError as exc:
            print(f"seed timetable: {exc}")
            return EXIT_INFEASIBLE
        bad_t = check_timetable(seed, recs, net.horizon_m, net.events())
        for v in bad_t:
            print(f"timetable: {v}")
        if bad_t:
            return EXIT_INFEASIBLE
        print(f"{len(recs)} constraint records")
    for v in bad:
        print(v)
    if bad:
        return EXIT_INPUT
    print("valid")
    return EXIT_OK


def cmd_simulate(a) -> int:
    limits = io.load_limits(a.limits)
    physics = io.load_physics(a.physics)
    if a.link not in limits:
        raise io.InputError(f"no speed limits for link {a.link!r}")
    if a.train_class not in physics:
        raise io.InputError(f"unknown physics class {a.train_class!r}")
    prof = simulate_profile(None, limits[a.link], physics[a.train_class], a.trip_time, dt=a.dt)
    consumed, regen = energy_of_profile(prof)
    print(json.dumps({"link": a.link, "trip_time": a.trip_time, "duration": round(prof.duration, 4),
                      "hold_speed_ms": round(prof.v_hold, 4), "consumed_kwh": round(consumed / 3.6e6, 6),
                      "regenerated_kwh": round(regen / 3.6e6, 6),
                      "phases": {k: v and [round(v[0], 3), round(v[1], 3)]
                                 for k, v in prof.phase_boundaries.items()}}, indent=1))
    if a.out:
        write_power_csv(prof, a.out)
    return EXIT_OK


def cmd_stage(until: str):
    def run(a) -> int:
        state = run_pipeline(_config(a), until)
        print(json.dumps(state.manifest, indent=1, sort_keys=True))
        return EXIT_OK
    return run


def cmd_generate(a) -> int:
    try:
        inst = generate_instance(a.stations, a.trains, a.headway, a.seed, physics=a.train_class)
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    io.save_network(inst.network, out / "network.json")
    io.write_timetable(inst.network, inst.seed, out / "seed_timetable.csv")
    io.save_physics(inst.physics, out / "physics.json")
    io.save_limits(inst.limits, out / "speed_limits.csv")
    print(f"wrote {inst.network.name} to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ecotable", description="Energy-efficient metro timetables.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a network (and optionally a seed timetable)")
    p.add_argument("--network", type=Path, default=bundled("sample_network.json"))
    p.add_argument("--seed-timetable", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate one run and print its energy")
    p.add_argument("--limits", type=Path, default=bundled("speed_limits.csv"))
    p.add_argument("--physics", type=Path, default=bundled("physics.json"))
    p.add_argument("--link", required=True)
    p.add_argument("--trip-time", type=float, required=True)
    p.add_argument("--train-class", default="average")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--out", type=Path, help="power graph CSV")
    p.set_defaults(func=cmd_simulate)

    for name, until, help_ in (("fit", "fit", "fit energy models of all trips"),
                               ("step1", "step1", "solve the energy-minimizing timetable"),
                               ("step2", "step2", "solve the synchronized final timetable"),
                               ("evaluate", "evaluate", "full run plus effective-energy report"),
                               ("run", "evaluate", "full pipeline")):
        p = sub.add_parser(name, help=help_)
        _pipeline_args(p)
        p.set_defaults(func=cmd_stage(until))

    p = sub.add_parser("generate", help="write a generated test instance")
    p.add_argument("--stations", type=int, default=14)
    p.add_argument("--trains", type=int, default=100)
    p.add_argument("--headway", type=int, default=1200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-class", default="average")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except Exception as exc:  # map every failure onto the documented exit codes
        code = exit_code(exc)
        if code == EXIT_INPUT and not isinstance(exc, (io.InputError, StageError, ValueError, KeyError, OSError)):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
