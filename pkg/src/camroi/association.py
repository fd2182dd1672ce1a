"""Detection traces, the cross-camera region lookup table and pairwise ID labels."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .tiling import BBox, FrameSpec, TileGrid, appearance_region, grids_for


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionRecord:
    camera_id: int
    frame_index: int
    box: BBox
    reid_id: int
    gt_id: Optional[int] = None

    def __post_init__(self):
        if self.frame_index < 0:
            raise TraceError(f"negative frame index in {self}")
        if self.reid_id < 0:
            raise TraceError(f"negative reid id in {self}")

    def sort_key(self):
        return (self.frame_index, self.camera_id)


@dataclass(frozen=True)
class Trace:
    frame_rate_hz: float
    records: tuple[DetectionRecord, ...]
    window: tuple[int, int]
    cameras: tuple[FrameSpec, ...] = ()

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=DetectionRecord.sort_key))
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "cameras", tuple(sorted(self.cameras, key=lambda f: f.camera_id)))
        lo, hi = self.window
        for r in recs:
            if not lo <= r.frame_index <= hi:
                raise TraceError(f"record at frame {r.frame_index} outside window {self.window}")

    @classmethod
    def build(cls, frame_rate_hz: float, records: Iterable[DetectionRecord],
              cameras: Iterable[FrameSpec] = (), window: tuple[int, int] | None = None) -> "Trace":
        records = tuple(records)
        if window is None:
            frames = [r.frame_index for r in records]
            window = (min(frames), max(frames)) if frames else (0, 0)
        return cls(frame_rate_hz, records, tuple(window), tuple(cameras))

    @property
    def frame_count(self) -> int:
        return self.window[1] - self.window[0] + 1

    def frame_spec(self, camera_id: int) -> FrameSpec:
        for f in self.cameras:
            if f.camera_id == camera_id:
                return f
        raise TraceError(f"unknown camera {camera_id}")

    def grids(self) -> dict[int, TileGrid]:
        return grids_for(self.cameras)

    def camera_ids(self) -> list[int]:
        return [f.camera_id for f in self.cameras]

    def with_records(self, records: Iterable[DetectionRecord]) -> "Trace":
        return replace(self, records=tuple(records))

    def with_tile_size(self, tile_size_px: int) -> "Trace":
        cams = tuple(replace(f, tile_size_px=tile_size_px) for f in self.cameras)
        return replace(self, cameras=cams)

    def slice(self, first: int, last: int) -> "Trace":
        """Records with first <= frame_index <= last, window narrowed accordingly."""
        recs = [r for r in self.records if first <= r.frame_index <= last]
        return Trace(self.frame_rate_hz, tuple(recs), (first, last), self.cameras)

    def split(self, fraction: float) -> tuple["Trace", "Trace"]:
        """Split the window into a leading profile part and the held-out remainder."""
        if not 0 < fraction < 1:
            raise TraceError("split fraction must lie in (0, 1)")
        lo, hi = self.window
        n_profile = max(1, min(self.frame_count, round(self.frame_count * fraction)))
        cut = lo + n_profile - 1
        replay = self.slice(cut + 1, hi) if cut < hi else Trace(self.frame_rate_hz, (), (hi, hi), self.cameras)
        return self.slice(lo, cut), replay

    def timestamp(self, frame_index: int) -> float:
        return (frame_index - self.window[0]) / self.frame_rate_hz

    def by_frame(self) -> dict[int, list[DetectionRecord]]:
        out: dict[int, list[DetectionRecord]] = defaultdict(list)
        for r in self.records:
            out[r.frame_index].append(r)
        return dict(out)

    def max_reid(self) -> int:
        return max((r.reid_id for r in self.records), default=-1)

    def has_ground_truth(self) -> bool:
        return all(r.gt_id is not None for r in self.records)


# -- trace file (JSON lines) -------------------------------------------------

def record_to_json(r: DetectionRecord) -> dict:
    return {"camera": r.camera_id, "frame": r.frame_index, "bbox": list(r.box.as_tuple()),
            "reid": r.reid_id, "gt": r.gt_id}


def dumps_trace(trace: Trace) -> str:
    header = {"frame_rate": trace.frame_rate_hz,
              "cameras": [f.to_dict() for f in trace.cameras],
              "window": list(trace.window)}
    lines = [json.dumps(header)]
    lines.extend(json.dumps(record_to_json(r)) for r in trace.records)
    return "\n".join(lines) + "\n"


def write_trace(path: str | Path, trace: Trace) -> None:
    Path(path).write_text(dumps_trace(trace))


def loads_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceError("line 1: missing header")
    try:
        header = json.loads(lines[0])
        rate = float(header["frame_rate"])
        cameras = [FrameSpec.from_dict(c) for c in header["cameras"]]
    except (ValueError, KeyError, TypeError) as e:
        raise TraceError(f"line 1: malformed header ({e})") from e
    known = {f.camera_id for f in cameras}
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            left, top, w, h = (float(v) for v in d["bbox"])
            gt = d.get("gt")
            rec = DetectionRecord(int(d["camera"]), int(d["frame"]), BBox(left, top, w, h),
                                  int(d["reid"]), None if gt is None else int(gt))
        except (ValueError, KeyError, TypeError) as e:
            raise TraceError(f"line {lineno}: malformed record ({e})") from e
        if rec.camera_id not in known:
            raise TraceError(f"line {lineno}: unknown camera {rec.camera_id}")
        records.append(rec)
    window = header.get("window")
    try:
        return Trace.build(rate, records, cameras, tuple(window) if window else None)
    except TraceError as e:
        raise TraceError(f"trace window: {e}") from e


def read_trace(path: str | Path) -> Trace:
    return loads_trace(Path(path).read_text())


# -- lookup table ------------------------------------------------------------

Region = tuple[int, frozenset[int]]   # (camera_id, tile set)


@dataclass
class AssociationTable:
    """frame_index -> object id -> appearance regions (at most one per camera)."""
    frames: dict[int, dict[int, list[Region]]] = field(default_factory=dict)

    def entry_count(self) -> int:
        return sum(len(regs) for objs in self.frames.values() for regs in objs.values())

    def objects(self, frame_index: int) -> dict[int, list[Region]]:
        return self.frames.get(frame_index, {})

    def __len__(self):
        return len(self.frames)


def build_lookup_table(trace: Trace, grids: Mapping[int, TileGrid]) -> AssociationTable:
    """Group detections by (frame, reid) into objects with per-camera appearance regions.

    A reid seen twice in one camera at one frame cannot be told apart, so every
    detection of that reid at that frame becomes its own object.
    """
    next_id = trace.max_reid() + 1
    table: dict[int, dict[int, list[Region]]] = {}
    for frame, recs in sorted(trace.by_frame().items()):
        by_reid: dict[int, list[DetectionRecord]] = defaultdict(list)
        for r in recs:
            if r.camera_id not in grids:
                raise TraceError(f"record references unknown camera {r.camera_id}")
            by_reid[r.reid_id].append(r)
        objs: dict[int, list[Region]] = {}
        split_later = []
        for reid in sorted(by_reid):
            group = by_reid[reid]
            cams = [r.camera_id for r in group]
            regions = [(r.camera_id, appearance_region(grids[r.camera_id], r.box)) for r in group]
            if len(set(cams)) == len(cams):
                objs[reid] = sorted(regions, key=lambda x: x[0])
            else:
                split_later.extend(regions)
        for region in split_later:
            objs[next_id] = [region]
            next_id += 1
        table[frame] = objs
    return AssociationTable(table)


# -- pairwise labels ---------------------------------------------------------

@dataclass(frozen=True)
class PairLabelCounts:
    source_camera: int
    dest_camera: int
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def label_record(rec: DetectionRecord, dest_records: list[DetectionRecord]) -> str:
    """One of 'tp', 'fp', 'fn', 'tn' for a source record against same-frame dest records."""
    counterparts = [d for d in dest_records if d.gt_id == rec.gt_id]
    if any(d.reid_id == rec.reid_id for d in counterparts):
        return "tp"
    if any(d.reid_id == rec.reid_id for d in dest_records):
        return "fp"
    return "fn" if counterparts else "tn"


def label_records(trace: Trace, source: int, dest: int) -> list[tuple[DetectionRecord, str]]:
    if not trace.has_ground_truth():
        raise TraceError("pairwise labelling needs gt ids on every record")
    out = []
    for _, recs in sorted(trace.by_frame().items()):
        dest_recs = [r for r in recs if r.camera_id == dest]
        for r in recs:
            if r.camera_id == source:
                out.append((r, label_record(r, dest_recs)))
    return out


def label_pairwise(trace: Trace, source: int, dest: int) -> PairLabelCounts:
    counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for _, label in label_records(trace, source, dest):
        counts[label] += 1
    return PairLabelCounts(source, dest, **counts)


def label_matrix(trace: Trace) -> dict[tuple[int, int], PairLabelCounts]:
    cams = trace.camera_ids()
    return {(s, d): label_pairwise(trace, s, d) for s in cams for d in cams if s != d}
