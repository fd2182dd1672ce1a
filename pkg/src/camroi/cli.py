"""camroi command line: synth, offline, online and sweep."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .association import Trace, TraceError, read_trace, write_trace
from .grouping import read_groupings, write_groupings
from .optimizer import write_instance
from .pipeline import PipelineConfig, compute_masks, evaluate, read_config
from .simulate.replay import ConsistencyError, ReplayReport, full_frame_baseline, write_report
from .simulate.scene import SceneConfigError, generate_scene, read_scene_config, write_error_log
from .tiling import TilingError, read_masks, write_masks

log = logging.getLogger("camroi")

EXIT_OK, EXIT_INPUT, EXIT_CONSISTENCY = 0, 2, 3

# flag name -> PipelineConfig override key
_OVERRIDES = {
    "tile_size": "tile_size_px", "gamma": "gamma", "theta": "theta", "solver": "solver",
    "time_budget": "time_budget_s", "segment_len": "segment_len_s", "bandwidth": "bandwidth_bps",
    "rtt": "rtt_s", "profile_split": "profile_split", "seed": "seed",
}

SWEEPS = {
    "gamma": ("gamma", float, True), "theta": ("theta", float, True),
    "tile-size": ("tile_size_px", int, True), "segment-len": ("segment_len_s", float, False),
    "bandwidth": ("bandwidth_bps", float, False), "rtt": ("rtt_s", float, False),
}


def demo_scene_path() -> Path:
    return Path(str(resources.files("camroi") / "data" / "demo_scene.json"))


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_config(args) -> PipelineConfig:
    cfg = read_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    kw = {key: getattr(args, flag) for flag, key in _OVERRIDES.items() if hasattr(args, flag)}
    if getattr(args, "no_filters", False):
        kw["use_filters"] = False
    return cfg.with_overrides(**kw)


def _window(trace: Trace, cfg: PipelineConfig, which: str) -> Trace:
    if which == "all":
        return trace
    profile, replay = trace.split(cfg.profile_split)
    return profile if which == "profile" else replay


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    path = Path(args.scene) if args.scene != "demo" else demo_scene_path()
    scene = read_scene_config(path)
    if args.seed is not None:
        scene = replace(scene, seed=args.seed)
    trace, errors = generate_scene(scene)
    out = Path(args.out)
    write_trace(out, trace)
    errors_path = Path(args.errors) if args.errors else out.with_suffix(".errors.jsonl")
    write_error_log(errors_path, errors)
    print(f"{len(trace.records)} records over {trace.frame_count} frames, "
          f"{len(errors)} injected errors -> {out}")
    return EXIT_OK


def run_offline(trace: Trace, cfg: PipelineConfig, out_dir: Path, window: str = "profile",
                dump_instance: bool = False):
    out_dir.mkdir(parents=True, exist_ok=True)
    part = _window(trace, cfg, window)
    result = compute_masks(part, cfg)
    write_masks(out_dir / "masks.json", result.grids, result.masks)
    write_groupings(out_dir / "groups.json", result.groupings, result.grids)
    report = result.filter_report.to_dict() if result.filter_report else {"pairs": [], "totals": None,
                                                                          "note": "filters disabled"}
    _dump(out_dir / "filter_report.json", report)
    stats = result.stats()
    stats["elapsed_s"] = None          # wall time would break byte-identical reruns
    stats["config"] = cfg.to_dict()
    _dump(out_dir / "stats.json", stats)
    if dump_instance:
        write_instance(out_dir / "instance.json", result.instance)
    return result


def cmd_offline(args) -> int:
    cfg = load_config(args)
    trace = read_trace(args.trace)
    result = run_offline(trace, cfg, Path(args.out), args.window, args.dump_instance)
    sol = result.solution
    print(f"{sol.objective} tiles ({sol.status}) over {len(result.instance.demands)} demands -> {args.out}")
    return EXIT_OK


def _check_grids(trace: Trace, grids) -> Trace:
    tile = {g.frame.tile_size_px for g in grids.values()}
    if len(tile) > 1:
        raise ConsistencyError("masks use more than one tile size")
    if tile:
        trace = trace.with_tile_size(tile.pop())
    mine = trace.grids()
    if set(mine) != set(grids):
        raise ConsistencyError(f"trace cameras {sorted(mine)} differ from mask cameras {sorted(grids)}")
    for c, g in grids.items():
        if g.frame != mine[c].frame:
            raise ConsistencyError(f"camera {c}: trace frame {mine[c].frame} differs from mask frame {g.frame}")
    return trace


def run_online(trace: Trace, masks_path, groups_path, cfg: PipelineConfig, window: str = "replay") -> ReplayReport:
    grids, masks = read_masks(masks_path)
    groupings = read_groupings(groups_path)
    trace = _check_grids(_window(trace, cfg, window), grids)
    return evaluate(trace, masks, groupings, replace(cfg, tile_size_px=trace.cameras[0].tile_size_px)
                    if trace.cameras else cfg)


def cmd_online(args) -> int:
    cfg = load_config(args)
    trace = read_trace(args.trace)
    report = run_online(trace, args.masks, args.groups, cfg, args.window)
    extra = {}
    if args.baseline:
        part = _window(trace, cfg, args.window).with_tile_size(cfg.tile_size_px)
        net = replace(cfg.net, frame_rate_hz=part.frame_rate_hz)
        extra["full_frame_baseline"] = full_frame_baseline(part, cfg.compression_model(), net).to_dict()
    write_report(args.out, report, extra)
    print(report.summary())
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.param not in SWEEPS:
        raise ValueError(f"cannot sweep {args.param!r}; choose from {sorted(SWEEPS)}")
    key, cast, offline = SWEEPS[args.param]
    values = [cast(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("--values is empty")
    base = load_config(args)
    trace = read_trace(args.trace)
    rows = []
    cached = None
    for v in values:
        cfg = base.with_overrides(**{key: v})
        profile, replay = trace.split(cfg.profile_split)
        if offline or cached is None:
            cached = compute_masks(profile, cfg)
        res = cached
        report = evaluate(replay, res.masks, res.groupings, cfg)
        rows.append({"param": args.param, "value": v, "tiles": res.solution.objective,
                     "status": res.solution.status, "accuracy": report.accuracy,
                     "bandwidth_bps": report.total_bandwidth_bps, "latency_s": report.modeled_latency_s,
                     "inference_hz": report.modeled_inference_hz})
        print(f"{args.param}={v}: tiles {res.solution.objective}  {report.summary()}")
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config JSON; flags override it")
    p.add_argument("--tile-size", type=int, help="tile edge in pixels (default 64)")
    p.add_argument("--gamma", type=float, help="SVM RBF width per squared pixel (default 1e-4)")
    p.add_argument("--theta", type=float, help="RANSAC threshold multiplier of MAD (default 0.01)")
    p.add_argument("--solver", choices=["exact", "greedy"])
    p.add_argument("--time-budget", type=float, help="exact solver budget in seconds (default 60)")
    p.add_argument("--segment-len", type=float, help="streaming segment length in seconds (default 1)")
    p.add_argument("--bandwidth", type=float, help="link bandwidth in bit/s (default 30e6)")
    p.add_argument("--rtt", type=float, help="round-trip time in seconds (default 0.01)")
    p.add_argument("--profile-split", type=float, help="leading share of the trace used for profiling (default 1/3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-filters", action="store_true", help="skip the regression and SVM filters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camroi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trace from a scene config")
    p.add_argument("scene", help="scene config JSON, or 'demo' for the bundled scene")
    p.add_argument("-o", "--out", required=True, help="trace JSONL to write")
    p.add_argument("--errors", help="error log JSONL (default: next to the trace)")
    p.add_argument("--seed", type=int, help="override the scene seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("offline", help="filters, mask optimisation and tile grouping")
    p.add_argument("trace")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--window", choices=["profile", "all"], default="profile",
                   help="profile on the leading split (default) or the whole trace")
    p.add_argument("--dump-instance", action="store_true", help="also write the cover instance")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="replay a trace through masks and report costs")
    p.add_argument("trace")
    p.add_argument("--masks", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("-o", "--out", required=True, help="report JSON to write")
    p.add_argument("--window", choices=["replay", "profile", "all"], default="replay")
    p.add_argument("--baseline", action="store_true", help="add the full-frame baseline to the report")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("sweep", help="metric vs one parameter, as CSV")
    p.add_argument("trace")
    p.add_argument("--param", required=True, choices=sorted(SWEEPS))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("-o", "--out", required=True, help="CSV to write")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConsistencyError as e:
        print(f"camroi: consistency error: {e}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except (TraceError, SceneConfigError, TilingError, ValueError, KeyError, OSError) as e:
        print(f"camroi: input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
