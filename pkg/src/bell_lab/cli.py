"""bell-lab command line.

Every subcommand prints one JSON document on stdout (CSV with ``--csv``
where offered) and logs to stderr. Exit codes: 0 ok, 2 validation error,
3 numerical failure, 4 desk-scale exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, serialization
from .correlations import Behavior, BellLabError, Scenario
from .harness import (
    ExperimentConfig,
    PrBoxSource,
    VCausalGhzConfig,
    detection_loophole_run,
    ghz_events,
    ghz_vcausal_run,
    local_default_model,
    run,
)
from .lhv import DEFAULT_CAP, BellFunctional, DeskScaleExceeded, MembershipSolverError, check_cap, is_local, local_max
from .nonlocal_box import clone_signaling_demo
from .quantum import TSIRELSON_ANGLES, QuantumSetup, max_entangled_state
from .relativity import C_SI, ScanGeometry, VCausalModel, delayed_outcome_viable, lab_events, load_preset, scan_speed_bound

log = logging.getLogger("bell_lab")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_DESK_SCALE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _default_seed() -> int:
    raw = os.environ.get("BELL_LAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise CliError(EXIT_VALIDATION, "validation", f"BELL_LAB_SEED={raw!r} is not an integer") from None


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_VALIDATION, "io_error", f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, "parse_error", f"{path}: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc


def _emit(doc: dict) -> None:
    sys.stdout.write(serialization.dumps(doc) + "\n")


def _positive_rounds(n: int) -> int:
    if n < 1:
        raise CliError(EXIT_VALIDATION, "validation", "--rounds must be >= 1")
    return n


def cmd_chsh(args) -> dict:
    rounds = _positive_rounds(args.rounds)
    if args.source == "pr":
        source = PrBoxSource()
    elif args.source == "quantum":
        angles = TSIRELSON_ANGLES
        if args.angles is not None:
            angles = ((args.angles[0], args.angles[1]), (args.angles[2], args.angles[3]))
        source = QuantumSetup.from_angles(max_entangled_state(), angles)
    elif args.source == "local":
        source = local_default_model()
    else:
        if not args.behavior:
            raise CliError(EXIT_VALIDATION, "validation", "--source file needs --behavior FILE")
        source = Behavior.from_dict(_read_json(args.behavior))
    cfg = ExperimentConfig(source, rounds, args.seed, workers=args.workers)
    report = run(cfg)
    if args.tally_out:
        Path(args.tally_out).write_text(report.tally.to_csv())
        report.tallies_ref = args.tally_out
    doc = report.to_dict()
    if args.source == "quantum":
        doc["config_echo"]["angles"] = [list(a) for a in angles]
    if args.source == "file":
        doc["config_echo"]["behavior"] = args.behavior
    return doc


def _parse_scenario(text: str) -> Scenario:
    try:
        parties, inputs, outputs = (int(v) for v in text.split(","))
    except ValueError:
        raise CliError(EXIT_VALIDATION, "validation", f"--scenario wants parties,inputs,outputs, got {text!r}") from None
    if parties < 1 or inputs < 1 or outputs < 1:
        raise CliError(EXIT_VALIDATION, "validation", "scenario cardinalities must be >= 1")
    return Scenario((inputs,) * parties, (outputs,) * parties)


def cmd_localbound(args) -> dict:
    if args.functional:
        f = BellFunctional.from_dict(_read_json(args.functional))
    else:
        s = _parse_scenario(args.scenario)
        check_cap(s, args.cap)
        if args.zero:
            f = BellFunctional(s, np.zeros(s.shape))
        else:
            f = BellFunctional.chsh_s(s)
    result = local_max(f, cap=args.cap)
    doc = result.to_dict()
    doc["config_echo"] = {
        "scenario": f.scenario.to_dict(),
        "functional": args.functional or ("zero" if args.zero else "chsh_s"),
        "cap": args.cap,
    }
    return doc


def cmd_membership(args) -> dict:
    b = Behavior.from_dict(_read_json(args.behavior))
    result = is_local(b, tol=args.tol, cap=args.cap)
    doc = result.to_dict()
    doc["config_echo"] = {"behavior": args.behavior, "tol": args.tol, "cap": args.cap}
    return doc


def cmd_ghz(args) -> dict:
    rounds = _positive_rounds(args.rounds)
    arm = {"on": True, "off": False, "random": None}[args.alice]
    events = ghz_events(args.alice_distance, args.bc_distance, args.alice_lead_us * 1e-6, args.charlie_delay_us * 1e-6)
    cfg = VCausalGhzConfig(VCausalModel(v=args.v), events, arm)
    doc = ghz_vcausal_run(cfg, rounds, args.seed).to_dict()
    doc["config_echo"] = {
        "alice": args.alice,
        "v_over_c": args.v,
        "rounds": rounds,
        "seed": args.seed,
        "alice_distance_m": args.alice_distance,
        "bc_distance_m": args.bc_distance,
        "alice_lead_us": args.alice_lead_us,
        "charlie_delay_us": args.charlie_delay_us,
    }
    return doc


def cmd_speed_scan(args) -> dict | str:
    if args.sync_ns is not None and not args.sync_ns > 0:
        raise CliError(EXIT_VALIDATION, "validation", "--sync-ns must be > 0")
    if args.geometry:
        path = Path(args.geometry)
        raw = _read_json(args.geometry) if path.suffix == ".json" or path.exists() else load_preset(args.geometry)
    else:
        raw = load_preset("geneva-18km")
    geometry = ScanGeometry.from_dict(raw)
    sync_ns = args.sync_ns if args.sync_ns is not None else geometry.sync_ns
    if sync_ns is None:
        raise CliError(EXIT_VALIDATION, "validation", "no --sync-ns given and the geometry has no sync_ns")
    if not sync_ns > 0:
        raise CliError(EXIT_VALIDATION, "validation", "sync uncertainty must be > 0")
    result = scan_speed_bound(geometry, sync_ns * 1e-9)
    if args.csv_out:
        Path(args.csv_out).write_text(result.to_csv())
    worst = result.worst_frame
    doc = {
        "config_echo": {
            "geometry": args.geometry or "geneva-18km",
            "sync_ns": sync_ns,
            "distance_m": geometry.distance,
            "rho_m": geometry.rho,
            "z_m": geometry.z,
            "phase_rad": geometry.phase,
            "omega_rad_s": geometry.omega,
            "session_hours": geometry.duration / 3600.0,
            "azimuth_grid_deg": {"first": geometry.azimuths_deg[0], "last": geometry.azimuths_deg[-1], "count": len(geometry.azimuths_deg)},
            "elevations_deg": list(geometry.elevations_deg),
            "betas": list(geometry.betas),
            "n_frames": len(result.frames),
        },
        "overall_bound_over_c": result.overall,
        "exceeds_cap": result.exceeds_cap,
        "worst_frame": {
            "frame_azimuth_deg": worst.azimuth_deg,
            "frame_elevation_deg": worst.elevation_deg,
            "frame_beta": worst.beta,
            "best_time_s": worst.best_time,
        },
        "csv_ref": args.csv_out,
    }
    if args.csv:
        # the per-frame table goes to stdout; the summary still has to be seen
        sys.stderr.write(serialization.dumps(doc, indent=None) + "\n")
        return result.to_csv()
    return doc


def cmd_detection(args) -> dict:
    rounds = _positive_rounds(args.rounds)
    doc = detection_loophole_run(rounds, args.seed, args.report_efficiency).to_dict()
    doc["config_echo"] = {"rounds": rounds, "seed": args.seed, "report_efficiency": args.report_efficiency}
    return doc


def cmd_delayed(args) -> dict:
    if args.delay_us < 0:
        raise CliError(EXIT_VALIDATION, "validation", "--delay-us must be >= 0")
    res = delayed_outcome_viable(lab_events(args.distance), args.delay_us * 1e-6)
    return {
        "config_echo": {"distance_m": args.distance, "delay_us": args.delay_us},
        "viable": res.viable,
        "required_speed_m_s": res.required_speed if np.isfinite(res.required_speed) else None,
        "required_speed_over_c": res.required_speed / C_SI if np.isfinite(res.required_speed) else None,
    }


def cmd_clone(args) -> dict:
    t = clone_signaling_demo(args.y1, args.y2, args.seed)
    return {
        "config_echo": {"y1": args.y1, "y2": args.y2, "seed": args.seed},
        "signaling": t.signaling,
        "message": t.message,
        "rows": list(t.rows),
    }


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="bell-lab", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"bell-lab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    seed_help = "master seed (default from BELL_LAB_SEED, else 0)"

    c = sub.add_parser("chsh", help="sample a CHSH experiment and estimate S", formatter_class=fmt)
    c.add_argument("--source", choices=["pr", "quantum", "local", "file"], required=True)
    c.add_argument("--rounds", type=int, default=100_000, help="number of rounds")
    c.add_argument("--seed", type=int, default=None, help=seed_help)
    c.add_argument("--angles", type=float, nargs=4, metavar=("A0", "A1", "B0", "B1"), default=None,
                   help="quantum measurement angles in radians (default: Tsirelson angles)")
    c.add_argument("--behavior", help="behavior JSON for --source file")
    c.add_argument("--tally-out", help="write the tally CSV here")
    c.add_argument("--workers", type=int, default=1, help="worker threads")
    c.set_defaults(func=cmd_chsh)

    lb = sub.add_parser("localbound", help="maximum of a Bell functional over deterministic strategies", formatter_class=fmt)
    lb.add_argument("--scenario", default="2,2,2", help="parties,inputs,outputs")
    lb.add_argument("--functional", help="functional JSON (default: S on the scenario)")
    lb.add_argument("--zero", action="store_true", help="use the zero functional")
    lb.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap")
    lb.set_defaults(func=cmd_localbound)

    m = sub.add_parser("membership", help="local model or separating functional for a behavior", formatter_class=fmt)
    m.add_argument("--behavior", required=True, help="behavior JSON file")
    m.add_argument("--tol", type=float, default=1e-9, help="feasibility tolerance")
    m.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap")
    m.set_defaults(func=cmd_membership)

    g = sub.add_parser("ghz-signal", help="GHZ experiment under pure hidden communication", formatter_class=fmt)
    g.add_argument("--alice", choices=["on", "off", "random"], default="random")
    g.add_argument("--v", type=float, default=1e4, help="influence speed in units of c")
    g.add_argument("--rounds", type=int, default=100_000, help="number of rounds")
    g.add_argument("--seed", type=int, default=None, help=seed_help)
    g.add_argument("--alice-distance", type=float, default=100e3, help="meters")
    g.add_argument("--bc-distance", type=float, default=1e3, help="meters")
    g.add_argument("--alice-lead-us", type=float, default=10.0, help="Alice measures this early (microseconds)")
    g.add_argument("--charlie-delay-us", type=float, default=0.0, help="Charlie measures this late (microseconds)")
    g.set_defaults(func=cmd_ghz)

    s = sub.add_parser("speed-scan", help="hidden-influence speed bound over candidate frames", formatter_class=fmt)
    s.add_argument("--geometry", help="geometry JSON file or preset name (default preset geneva-18km)")
    s.add_argument("--sync-ns", type=float, default=None, help="synchronization uncertainty in ns (default from geometry)")
    s.add_argument("--csv", action="store_true", help="print per-frame CSV instead of JSON")
    s.add_argument("--csv-out", help="also write the per-frame CSV here")
    s.set_defaults(func=cmd_speed_scan)

    d = sub.add_parser("detection", help="detection-loophole local model, full vs post-selected", formatter_class=fmt)
    d.add_argument("--rounds", type=int, default=1_000_000, help="number of rounds")
    d.add_argument("--seed", type=int, default=None, help=seed_help)
    d.add_argument("--report-efficiency", action=argparse.BooleanOptionalAction, default=True,
                   help="include per-party detection efficiencies")
    d.set_defaults(func=cmd_detection)

    dl = sub.add_parser("delayed-outcome", help="can delayed outcomes restore a light-speed explanation", formatter_class=fmt)
    dl.add_argument("--distance", type=float, default=18e3, help="meters")
    dl.add_argument("--delay-us", type=float, default=100.0, help="outcome delay in microseconds")
    dl.set_defaults(func=cmd_delayed)

    cl = sub.add_parser("clone-demo", help="a cloned PR box port would signal", formatter_class=fmt)
    cl.add_argument("--y1", type=int, choices=[0, 1], default=0, help="first clone input")
    cl.add_argument("--y2", type=int, choices=[0, 1], default=1, help="second clone input")
    cl.add_argument("--seed", type=int, default=None, help=seed_help)
    cl.set_defaults(func=cmd_clone)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "seed", "absent") is None:
            args.seed = _default_seed()
        out = args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except DeskScaleExceeded as exc:
        return _fail(EXIT_DESK_SCALE, "desk_scale_exceeded", str(exc))
    except MembershipSolverError as exc:
        return _fail(EXIT_NUMERIC, "numerical_failure", str(exc))
    except (BellLabError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        _emit(out)
    return EXIT_OK


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
