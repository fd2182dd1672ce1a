"""Offline mask generation and online replay, end to end."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

from .association import Trace, build_lookup_table
from .filters import FilterConfig, FilterReport, run_filter_pipeline
from .grouping import Grouping, group_tiles
from .optimizer import CoverInstance, Solution, build_cover_instance, solve
from .simulate.compression import CompressionModel, NetConfig, calibrate_reference
from .simulate.replay import ReplayReport, replay_evaluate
from .tiling import RoiMask, TileGrid


@dataclass(frozen=True)
class PipelineConfig:
    tile_size_px: int = 64
    filter: FilterConfig = field(default_factory=FilterConfig)
    use_filters: bool = True
    solver: str = "exact"
    time_budget_s: float = 60.0
    net: NetConfig = field(default_factory=NetConfig)
    profile_split: float = 1 / 3
    seed: int = 0
    compression_reference: int = 1

    def __post_init__(self):
        if not 0 < self.profile_split < 1:
            raise ValueError("profile_split must lie in (0, 1)")
        if self.solver not in ("exact", "greedy"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.tile_size_px <= 0:
            raise ValueError("tile_size_px must be positive")
        if self.time_budget_s <= 0:
            raise ValueError("time_budget_s must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PipelineConfig":
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown pipeline settings: {sorted(unknown)}")
        if "filter" in d:
            d["filter"] = FilterConfig.from_dict(d["filter"])
        if "net" in d:
            d["net"] = NetConfig(**d["net"])
        return cls(**d)

    def with_overrides(self, **kw) -> "PipelineConfig":
        """Apply flat overrides; gamma/theta go to the filter, segment/bandwidth/rtt to the net."""
        filt, net, top = {}, {}, {}
        for k, v in kw.items():
            if v is None:
                continue
            if k in ("gamma", "theta", "svm_cost", "regression_degree", "ransac_iterations"):
                filt[k] = v
            elif k in ("segment_len_s", "bandwidth_bps", "rtt_s", "inference_base_hz", "gather_scatter_overhead"):
                net[k] = v
            else:
                top[k] = v
        cfg = replace(self, **top)
        if "seed" in top:
            filt.setdefault("seed", top["seed"])
        if filt:
            cfg = replace(cfg, filter=replace(cfg.filter, **filt))
        if net:
            cfg = replace(cfg, net=replace(cfg.net, **net))
        return cfg

    def compression_model(self) -> CompressionModel:
        return calibrate_reference(self.compression_reference)


@dataclass
class OfflineResult:
    grids: dict[int, TileGrid]
    masks: dict[int, RoiMask]
    groupings: dict[int, Grouping]
    solution: Solution
    instance: CoverInstance
    filter_report: FilterReport | None
    profile: Trace

    def stats(self) -> dict:
        return {**self.solution.stats(), "demands": len(self.instance.demands),
                "profile_window": list(self.profile.window), "profile_records": len(self.profile.records),
                "groups_per_camera": {str(c): len(g.rects) for c, g in sorted(self.groupings.items())}}


def compute_masks(trace: Trace, config: PipelineConfig) -> OfflineResult:
    """Filters, lookup table, cover instance, solver and grouping on a profiling trace."""
    trace = trace.with_tile_size(config.tile_size_px)
    grids = trace.grids()
    report = None
    filtered = trace
    if config.use_filters and trace.records:
        filtered, report = run_filter_pipeline(trace, config.filter)
    table = build_lookup_table(filtered, grids)
    instance = build_cover_instance(table, grids)
    solution = solve(instance, config.solver, config.time_budget_s)
    masks = {c: solution.masks.get(c, RoiMask(c)) for c in grids}
    groupings = {c: group_tiles(masks[c], grids[c]) for c in grids}
    return OfflineResult(grids, masks, groupings, solution, instance, report, trace)


def profile_part(trace: Trace, config: PipelineConfig) -> Trace:
    return trace.split(config.profile_split)[0]


def holdout_part(trace: Trace, config: PipelineConfig) -> Trace:
    return trace.split(config.profile_split)[1]


def evaluate(trace: Trace, masks: Mapping[int, RoiMask], groupings: Mapping[int, Grouping],
             config: PipelineConfig) -> ReplayReport:
    trace = trace.with_tile_size(config.tile_size_px)
    net = replace(config.net, frame_rate_hz=trace.frame_rate_hz)
    return replay_evaluate(trace, masks, groupings, config.compression_model(), net)


def read_config(path: str | Path) -> PipelineConfig:
    return PipelineConfig.from_dict(json.loads(Path(path).read_text()))
