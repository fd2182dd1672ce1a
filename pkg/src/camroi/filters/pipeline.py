"""Regression filter, SVM filter and the two run back to back."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..association import DetectionRecord, Trace
from .config import FilterConfig
from .ransac import InsufficientDataError, RankDeficiencyError, RegressionModel, fit_ransac
from .svm import DegenerateTrainingError, SvmModel, box_features, kernel_gamma, rbf_kernel, train_svm

log = logging.getLogger(__name__)

Pair = tuple[int, int]


def pair_seed(seed: int, source: int, dest: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, source, dest])


def ordered_pairs(trace: Trace) -> list[Pair]:
    cams = trace.camera_ids()
    return [(s, d) for s in cams for d in cams if s != d]


def positive_pairs(trace: Trace, source: int, dest: int) -> list[tuple[int, int]]:
    """Index pairs (source record, dest record) sharing a reid at the same frame."""
    out = []
    idx_by_frame: dict[int, list[int]] = {}
    for i, r in enumerate(trace.records):
        idx_by_frame.setdefault(r.frame_index, []).append(i)
    recs = trace.records
    for frame in sorted(idx_by_frame):
        ids = idx_by_frame[frame]
        dest_by_reid: dict[int, list[int]] = {}
        for i in ids:
            if recs[i].camera_id == dest:
                dest_by_reid.setdefault(recs[i].reid_id, []).append(i)
        for i in ids:
            if recs[i].camera_id == source:
                for j in dest_by_reid.get(recs[i].reid_id, ()):
                    out.append((i, j))
    return out


def source_labels(trace: Trace, source: int, dest: int) -> tuple[list[int], np.ndarray]:
    """Indices of source-camera records and whether each has a same-reid match in dest."""
    matched = {i for i, _ in positive_pairs(trace, source, dest)}
    idx = [i for i, r in enumerate(trace.records) if r.camera_id == source]
    return idx, np.array([1 if i in matched else 0 for i in idx], dtype=int)


# -- regression filter -------------------------------------------------------

def fit_regression_models(trace: Trace, config: FilterConfig) -> tuple[dict[Pair, RegressionModel], dict[Pair, str]]:
    models, skipped = {}, {}
    for s, d in ordered_pairs(trace):
        pairs = positive_pairs(trace, s, d)
        if len(pairs) < config.min_positive_pairs:
            skipped[(s, d)] = f"{len(pairs)} positive pairs"
            continue
        data = [(trace.records[i].box, trace.records[j].box) for i, j in pairs]
        try:
            models[(s, d)] = fit_ransac(data, config, s, d, seed=pair_seed(config.seed, s, d))
        except (InsufficientDataError, RankDeficiencyError) as e:
            skipped[(s, d)] = str(e)
    return models, skipped


def regression_outliers(trace: Trace, models: Mapping[Pair, RegressionModel]) -> dict[Pair, set[int]]:
    """Source records whose every same-reid partner in the dest camera is an outlier.

    A source record with one consistent partner keeps its id; a second,
    inconsistent partner is the dest side's error and is caught by the
    reverse pair.
    """
    flagged: dict[Pair, set[int]] = {}
    for (s, d), model in sorted(models.items()):
        pairs = positive_pairs(trace, s, d)
        if not pairs:
            flagged[(s, d)] = set()
            continue
        src = np.array([trace.records[i].box.as_tuple() for i, _ in pairs])
        dst = np.array([trace.records[j].box.as_tuple() for _, j in pairs])
        out = model.is_outlier(src, dst)
        bad = {pairs[k][0] for k in np.flatnonzero(out)}
        good = {pairs[k][0] for k in np.flatnonzero(~out)}
        flagged[(s, d)] = bad - good
    return flagged


def _reassign(trace: Trace, indices) -> Trace:
    next_id = trace.max_reid() + 1
    recs = list(trace.records)
    for i in sorted(indices):
        r = recs[i]
        recs[i] = DetectionRecord(r.camera_id, r.frame_index, r.box, next_id, r.gt_id)
        next_id += 1
    return trace.with_records(recs)


def apply_regression_filter(trace: Trace, models: Mapping[Pair, RegressionModel]) -> Trace:
    """Give every source record of an outlier positive pair a fresh reid."""
    flagged = regression_outliers(trace, models)
    indices = set().union(*flagged.values()) if flagged else set()
    return _reassign(trace, indices) if indices else trace


# -- SVM filter --------------------------------------------------------------

def train_svm_models(trace: Trace, config: FilterConfig) -> tuple[dict[Pair, SvmModel], dict[Pair, str]]:
    models, skipped = {}, {}
    gram_cache: dict[int, tuple[list[int], np.ndarray]] = {}
    for s, d in ordered_pairs(trace):
        idx, labels = source_labels(trace, s, d)
        if len(set(labels.tolist())) < 2:
            skipped[(s, d)] = "single-class samples"
            continue
        frame = trace.frame_spec(s)
        if s not in gram_cache:
            x = box_features([trace.records[i].box for i in idx], frame)
            gram_cache[s] = rbf_kernel(x, x, kernel_gamma(config, frame))
        samples = [(trace.records[i].box, lab) for i, lab in zip(idx, labels)]
        try:
            models[(s, d)] = train_svm(samples, config, frame, kernel=gram_cache[s])
        except DegenerateTrainingError as e:
            skipped[(s, d)] = str(e)
    return models, skipped


def svm_negative_outliers(trace: Trace, models: Mapping[Pair, SvmModel]) -> dict[Pair, set[int]]:
    flagged: dict[Pair, set[int]] = {}
    for (s, d), model in sorted(models.items()):
        idx, labels = source_labels(trace, s, d)
        if not idx:
            flagged[(s, d)] = set()
            continue
        pred = model.predict_boxes([trace.records[i].box for i in idx])
        flagged[(s, d)] = {i for i, lab, p in zip(idx, labels, pred) if lab == 0 and p == 1}
    return flagged


def apply_svm_filter(trace: Trace, models: Mapping[Pair, SvmModel]) -> Trace:
    """Drop source records labelled negative that the pair's SVM places on the positive side."""
    flagged = svm_negative_outliers(trace, models)
    drop = set().union(*flagged.values()) if flagged else set()
    if not drop:
        return trace
    return trace.with_records(r for i, r in enumerate(trace.records) if i not in drop)


# -- pipeline ----------------------------------------------------------------

@dataclass
class PairReport:
    source: int
    dest: int
    positives: int = 0
    outliers_rectified: int = 0
    negatives_removed: int = 0
    ransac_inlier_ratio: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"source": self.source, "dest": self.dest, "positives": self.positives,
             "outliers_rectified": self.outliers_rectified, "negatives_removed": self.negatives_removed,
             "ransac_inlier_ratio": None if self.ransac_inlier_ratio is None else round(self.ransac_inlier_ratio, 6)}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class FilterReport:
    pairs: list[PairReport] = field(default_factory=list)
    rectified: int = 0
    removed: int = 0
    records_in: int = 0
    records_out: int = 0

    def to_dict(self) -> dict:
        return {"pairs": [p.to_dict() for p in self.pairs],
                "totals": {"records_in": self.records_in, "records_out": self.records_out,
                           "outliers_rectified": self.rectified, "negatives_removed": self.removed}}


def run_filter_pipeline(trace: Trace, config: FilterConfig) -> tuple[Trace, FilterReport]:
    if not trace.records:
        raise ValueError("filter pipeline needs a non-empty trace")
    reports = {p: PairReport(*p) for p in ordered_pairs(trace)}
    for p in reports:
        reports[p].positives = len(positive_pairs(trace, *p))

    reg_models, reg_skipped = fit_regression_models(trace, config)
    flagged = regression_outliers(trace, reg_models)
    for p, model in reg_models.items():
        reports[p].ransac_inlier_ratio = model.inlier_ratio
        reports[p].outliers_rectified = len(flagged[p])
    for p, why in reg_skipped.items():
        reports[p].note = f"regression skipped: {why}"
    rect_idx = set().union(*flagged.values()) if flagged else set()
    rectified = _reassign(trace, rect_idx) if rect_idx else trace

    svm_models, svm_skipped = train_svm_models(rectified, config)
    removed_by = svm_negative_outliers(rectified, svm_models)
    for p, idx in removed_by.items():
        reports[p].negatives_removed = len(idx)
    for p, why in svm_skipped.items():
        note = f"svm skipped: {why}"
        reports[p].note = f"{reports[p].note}; {note}" if reports[p].note else note
    drop = set().union(*removed_by.values()) if removed_by else set()
    out = rectified.with_records(r for i, r in enumerate(rectified.records) if i not in drop)

    report = FilterReport([reports[p] for p in sorted(reports)], len(rect_idx), len(drop),
                          len(trace.records), len(out.records))
    log.info("filters: %d rectified, %d removed of %d records", report.rectified, report.removed, report.records_in)
    return out, report
