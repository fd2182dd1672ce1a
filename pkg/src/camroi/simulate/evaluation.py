"""Scoring the filters against the generator's error log."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from ..association import Trace, label_records
from .scene import InjectedError

RecordKey = tuple[int, int, int]      # (camera, frame, gt id)


def record_key(r) -> RecordKey:
    return (r.camera_id, r.frame_index, r.gt_id)


def clean_record_keys(trace: Trace) -> set[RecordKey]:
    """Records labelled TP or TN against every other camera."""
    bad = set()
    cams = trace.camera_ids()
    for s in cams:
        for d in cams:
            if s != d:
                for r, label in label_records(trace, s, d):
                    if label in ("fp", "fn"):
                        bad.add(record_key(r))
    return {record_key(r) for r in trace.records} - bad


@dataclass
class FilterEfficacy:
    planted_fn: int
    fn_removed: int
    planted_fp: int
    fp_rectified: int
    clean: int
    clean_disturbed: int

    @property
    def fn_removed_share(self) -> float:
        return self.fn_removed / self.planted_fn if self.planted_fn else 1.0

    @property
    def fp_rectified_share(self) -> float:
        return self.fp_rectified / self.planted_fp if self.planted_fp else 1.0

    @property
    def clean_disturbed_share(self) -> float:
        return self.clean_disturbed / self.clean if self.clean else 0.0

    def to_dict(self) -> dict:
        return {**asdict(self), "fn_removed_share": self.fn_removed_share,
                "fp_rectified_share": self.fp_rectified_share,
                "clean_disturbed_share": self.clean_disturbed_share}


def filter_efficacy(before: Trace, after: Trace, errors: Sequence[InjectedError]) -> FilterEfficacy:
    """Planted FNs removed, planted FPs given a new id, clean records removed or relabelled.

    Generated traces hold one record per (camera, frame, object), so records
    are matched across the filter by that key.
    """
    old = {record_key(r): r for r in before.records}
    new = {record_key(r): r for r in after.records}
    fn = {(e.camera, e.frame, e.object) for e in errors if e.kind == "fn"}
    fp = {(e.camera, e.frame, e.object): e.reid for e in errors if e.kind == "fp"}
    fn_removed = sum(1 for k in fn if k not in new)
    fp_rect = sum(1 for k, reid in fp.items() if k in new and new[k].reid_id != reid)
    clean = clean_record_keys(before)
    disturbed = sum(1 for k in clean if k not in new or new[k].reid_id != old[k].reid_id)
    return FilterEfficacy(len(fn), fn_removed, len(fp), fp_rect, len(clean), disturbed)
