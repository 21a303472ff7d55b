"""Command-line interface: generate, track, experiment, validate-config."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import evaluation, seqio, sim
from .pipeline import FollowPipeline
from .reid import ReidConfig, ReidError
from .sim import DEFAULT_INTRINSICS, ScenarioError
from .tracker import TrackerConfig

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_USAGE = 3
EXIT_RUNTIME = 4


class CliError(Exception):
    def __init__(self, category, message, code):
        super().__init__(message)
        self.category = category
        self.code = code


def _resolve_scenario(name_or_path):
    builtins = sim.builtin_scenarios()
    if name_or_path in builtins:
        return builtins[name_or_path]
    if not os.path.exists(name_or_path):
        raise CliError("usage",
                       f"unknown scenario '{name_or_path}' (built-ins: "
                       f"{', '.join(sorted(builtins))})", EXIT_USAGE)
    try:
        return seqio.load_scenario(name_or_path)
    except seqio.SchemaError as e:
        raise CliError("schema", str(e), EXIT_SCHEMA)


def _out_dir(args):
    return args.out_dir or os.environ.get("MPFOLLOW_OUT_DIR", ".")


def _tracker_config(args):
    kwargs = {}
    if getattr(args, "delta_iou", None) is not None:
        kwargs["delta_iou"] = args.delta_iou
    if getattr(args, "r_body", None) is not None:
        kwargs["r_body"] = args.r_body
    return TrackerConfig(**kwargs)


def _reid_config(args):
    kwargs = {}
    for flag, name in (("delta_switch", "delta_switch"),
                       ("delta_id", "delta_id"), ("n_id", "n_id"),
                       ("capacity", "capacity"), ("mode", "mode"),
                       ("lam", "lam")):
        v = getattr(args, flag, None)
        if v is not None:
            kwargs[name] = v
    try:
        return ReidConfig(**kwargs)
    except ReidError as e:
        raise CliError("config", str(e), EXIT_USAGE)


def _print_config(args, tracker_cfg, reid_cfg):
    if getattr(args, "print_config", False):
        resolved = {"tracker": vars(tracker_cfg) | {
            "process_noise_std": list(tracker_cfg.process_noise_std)},
            "reid": vars(reid_cfg), "seed": getattr(args, "seed", 0)}
        print(json.dumps(resolved, indent=2, sort_keys=True))


def cmd_generate(args):
    scenario = _resolve_scenario(args.scenario)
    try:
        frames = sim.generate(scenario, args.seed)
    except ScenarioError as e:
        raise CliError("schema", str(e), EXIT_SCHEMA)
    seqio.write_sequence(frames, args.out)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def cmd_track(args):
    try:
        frames = seqio.read_sequence(args.sequence)
    except seqio.SchemaError as e:
        raise CliError("schema", str(e), EXIT_SCHEMA)
    tracker_cfg = _tracker_config(args)
    reid_cfg = _reid_config(args)
    _print_config(args, tracker_cfg, reid_cfg)

    if not args.no_reid:
        missing = all(d.descriptor is None
                      for f in frames for d in f.detections)
        if missing and any(f.detections for f in frames):
            raise CliError(
                "config",
                "re-ID enabled but the sequence carries no descriptors "
                "(rerun with --no-reid or provide descriptors)", EXIT_USAGE)

    intr = DEFAULT_INTRINSICS
    if args.calibration:
        try:
            intr, _ = seqio.load_calibration(args.calibration)
        except seqio.SchemaError as e:
            raise CliError("schema", str(e), EXIT_SCHEMA)

    pipe = FollowPipeline(intr, tracker_cfg, reid_cfg,
                          target_person_id=args.target_person,
                          reid_enabled=not args.no_reid, seed=args.seed)
    rows = []
    for record in frames:
        result = pipe.process_frame(record)
        for tid, x, y, box in result.tracks:
            rows.append({
                "frame_index": record.frame_index,
                "track_id": tid,
                "x": round(x, 6), "y": round(y, 6),
                "box": [round(v, 3) for v in box.as_array().tolist()]
                if box is not None else None,
                "is_target": (not args.no_reid
                              and tid == result.target_track_id) or None,
            })
    out = args.out or os.path.join(_out_dir(args), "tracks.jsonl")
    seqio.write_tracks(rows, out)
    print(f"wrote {len(rows)} track rows to {out}")
    return EXIT_OK


def _run_named(scenario, out_dir, seed, tracker_cfg, reid_cfg, label,
               reid_enabled=True):
    reid_result, stats, _ = evaluation.run_experiment(
        scenario, tracker_cfg, reid_cfg, seed=seed, reid_enabled=reid_enabled,
        out_dir=os.path.join(out_dir, label))
    return reid_result, stats


def cmd_experiment(args):
    out_dir = _out_dir(args)
    tracker_cfg = _tracker_config(args)
    seed = args.seed
    scenarios = sim.builtin_scenarios()
    name = args.name

    if name == "st-sweep":
        print("scenario=room_like mode=ST capacity sweep")
        for cap in (16, 32, 64, 128):
            cfg = ReidConfig(mode="ST", capacity=cap)
            r, _ = _run_named(scenarios["room_like"], out_dir, seed,
                              tracker_cfg, cfg, f"st_{cap}")
            print(f"GRR_ST_{cap} precision@50px {r.ap:.3f}")
    elif name == "slt-vs-st":
        print("scenario=corridor1_like GRR_SLT_64 vs GRR_ST_64")
        for mode in ("ST", "SLT"):
            cfg = ReidConfig(mode=mode, capacity=64)
            r, _ = _run_named(scenarios["corridor1_like"], out_dir, seed,
                              tracker_cfg, cfg, f"{mode.lower()}_64")
            print(f"GRR_{mode}_64 precision@50px {r.ap:.3f}")
    elif name == "range-accuracy":
        cfg = TrackerConfig(measurement_noise_std=0.3, gate_distance=2.0)
        _, stats = _run_named(scenarios["range_sweep"], out_dir, seed,
                              cfg, ReidConfig(), "range_accuracy",
                              reid_enabled=False)
        print("bin_lo bin_hi count mae")
        for b in stats.bins:
            print(f"{b['lo']:g} {b['hi']:g} {b['count']} "
                  f"{b['mean_abs_error']:.4f}")
    elif name in scenarios:
        reid_cfg = _reid_config(args)
        _print_config(args, tracker_cfg, reid_cfg)
        r, stats = _run_named(scenarios[name], out_dir, seed, tracker_cfg,
                              reid_cfg, name)
        print(f"{name} precision@50px {r.ap:.3f}")
    else:
        raise CliError("usage", f"unknown experiment '{name}'", EXIT_USAGE)
    return EXIT_OK


def cmd_validate_config(args):
    path = args.path
    try:
        if args.kind == "scenario":
            seqio.load_scenario(path)
        elif args.kind == "calibration":
            seqio.load_calibration(path)
        else:
            raise CliError("usage", f"unknown kind '{args.kind}'", EXIT_USAGE)
    except seqio.SchemaError as e:
        raise CliError("schema", str(e), EXIT_SCHEMA)
    print(f"{path}: valid {args.kind}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="mpfollow",
        description="Width-based monocular person following toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a scenario to a sequence file")
    g.add_argument("scenario", help="built-in name or scenario YAML path")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("track", help="run the tracker over a sequence file")
    t.add_argument("sequence")
    t.add_argument("--calibration")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--no-reid", action="store_true",
                   help="disable re-identification (pure tracking)")
    t.add_argument("--target-person", type=int, default=0)
    t.add_argument("--delta-iou", type=float)
    t.add_argument("--r-body", type=float)
    t.add_argument("--delta-switch", type=float)
    t.add_argument("--delta-id", type=float)
    t.add_argument("--n-id", type=int)
    t.add_argument("--capacity", type=int)
    t.add_argument("--mode", choices=("ST", "SLT"))
    t.add_argument("--lam", type=float)
    t.add_argument("-o", "--out")
    t.add_argument("--out-dir")
    t.add_argument("--print-config", action="store_true")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("experiment", help="run a named experiment")
    e.add_argument("name", help="st-sweep | slt-vs-st | range-accuracy | "
                                "<built-in scenario name>")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out-dir")
    e.add_argument("--delta-iou", type=float)
    e.add_argument("--r-body", type=float)
    e.add_argument("--delta-switch", type=float)
    e.add_argument("--delta-id", type=float)
    e.add_argument("--n-id", type=int)
    e.add_argument("--capacity", type=int)
    e.add_argument("--mode", choices=("ST", "SLT"))
    e.add_argument("--lam", type=float)
    e.add_argument("--print-config", action="store_true")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate-config", help="validate a config file")
    v.add_argument("kind", choices=("scenario", "calibration"))
    v.add_argument("path")
    v.set_defaults(func=cmd_validate_config)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return e.code
    except FileNotFoundError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
