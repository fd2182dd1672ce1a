"""Replay an evaluation trace through fixed masks and report accuracy and modelled costs."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..association import Trace, TraceError
from ..grouping import Grouping, check_grouping, group_tiles
from ..tiling import RoiMask, TileGrid, appearance_region, full_mask, mask_area_fraction
from .compression import CompressionModel, NetConfig, estimate_segment_size, modeled_inference_hz


class ConsistencyError(ValueError):
    pass


@dataclass
class ReplayReport:
    accuracy: float
    detected: int
    total: int
    per_frame_missed: dict[int, int]               # missed objects in a frame -> number of frames
    modeled_bandwidth_bps: dict[int, float]
    total_bandwidth_bps: float
    modeled_latency_s: float
    mask_area_fractions: dict[int, float]
    modeled_inference_hz: float
    segment_bytes: dict[int, float] = field(default_factory=dict)
    group_counts: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "detected": self.detected,
            "total": self.total,
            "per_frame_missed": {str(k): v for k, v in sorted(self.per_frame_missed.items())},
            "modeled_bandwidth_bps": {str(k): v for k, v in sorted(self.modeled_bandwidth_bps.items())},
            "total_bandwidth_bps": self.total_bandwidth_bps,
            "modeled_latency_s": self.modeled_latency_s,
            "mask_area_fractions": {str(k): v for k, v in sorted(self.mask_area_fractions.items())},
            "modeled_inference_hz": self.modeled_inference_hz,
            "segment_bytes": {str(k): v for k, v in sorted(self.segment_bytes.items())},
            "group_counts": {str(k): v for k, v in sorted(self.group_counts.items())},
        }

    def summary(self) -> str:
        return (f"accuracy {self.accuracy:.3f}  bandwidth {self.total_bandwidth_bps / 1e6:.2f} Mbps  "
                f"latency {self.modeled_latency_s:.3f} s")


def coverage(trace: Trace, masks: Mapping[int, RoiMask], grids: Mapping[int, TileGrid]):
    """(detected, total, per-frame missed counts) over unique (gt object, frame) pairs."""
    if not trace.has_ground_truth():
        raise TraceError("replay needs gt ids on every record")
    detected = total = 0
    missed_hist: Counter = Counter()
    lo, hi = trace.window
    frames = trace.by_frame()
    for f in range(lo, hi + 1):
        seen: dict[int, bool] = {}
        for r in frames.get(f, ()):
            ok = appearance_region(grids[r.camera_id], r.box) <= masks[r.camera_id].tiles
            seen[r.gt_id] = seen.get(r.gt_id, False) or ok
        total += len(seen)
        hit = sum(seen.values())
        detected += hit
        missed_hist[len(seen) - hit] += 1
    return detected, total, dict(missed_hist)


def _check_consistent(trace: Trace, masks, groupings, grids) -> None:
    cams = set(grids)
    if set(masks) != cams:
        raise ConsistencyError(f"masks cover cameras {sorted(masks)}, trace has {sorted(cams)}")
    if set(groupings) != cams:
        raise ConsistencyError(f"groupings cover cameras {sorted(groupings)}, trace has {sorted(cams)}")
    for c in cams:
        try:
            masks[c].check(grids[c])
            check_grouping(groupings[c], masks[c], grids[c])
        except ValueError as e:
            raise ConsistencyError(str(e)) from e


def replay_evaluate(eval_trace: Trace, masks: Mapping[int, RoiMask], groupings: Mapping[int, Grouping],
                    model: CompressionModel, net: NetConfig) -> ReplayReport:
    grids = eval_trace.grids()
    _check_consistent(eval_trace, masks, groupings, grids)
    detected, total, hist = coverage(eval_trace, masks, grids)
    accuracy = 1.0 - (total - detected) / total if total else 1.0

    seg_bytes = {c: estimate_segment_size(model, groupings[c], grids[c], net) for c in sorted(grids)}
    bandwidth = {c: b * 8.0 / net.segment_len_s for c, b in seg_bytes.items()}
    fractions = {c: mask_area_fraction(grids[c], masks[c]) for c in sorted(grids)}
    mean_fraction = sum(fractions.values()) / len(fractions) if fractions else 0.0
    hz = modeled_inference_hz(net, mean_fraction)
    per_segment_bits = sum(seg_bytes.values()) * 8.0
    frames = net.frames_per_segment * len(grids)
    latency = net.segment_len_s + per_segment_bits / net.bandwidth_bps + net.rtt_s + frames / hz
    return ReplayReport(accuracy, detected, total, hist, bandwidth, sum(bandwidth.values()), latency,
                        fractions, hz, seg_bytes, {c: len(g.rects) for c, g in groupings.items()})


def full_frame_baseline(eval_trace: Trace, model: CompressionModel, net: NetConfig) -> ReplayReport:
    grids = eval_trace.grids()
    masks = {c: full_mask(g) for c, g in grids.items()}
    groups = {c: group_tiles(masks[c], grids[c]) for c in grids}
    return replay_evaluate(eval_trace, masks, groups, model, net)


def write_report(path: str | Path, report: ReplayReport, extra: Mapping | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
