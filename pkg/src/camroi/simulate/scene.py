"""Synthetic multi-camera traffic scenes with injected ReID errors."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import shapely

from ..association import DetectionRecord, Trace, TraceError, label_matrix
from ..tiling import BBox, FrameSpec
from .geometry import Homography, ProjectionError, homography_from_points, project_many

log = logging.getLogger(__name__)


class SceneConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CameraSetup:
    frame: FrameSpec
    homography: Homography
    visible_polygon: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {"frame": self.frame.to_dict(), "homography": self.homography.to_list(),
                "visible_polygon": [list(p) for p in self.visible_polygon]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CameraSetup":
        frame = FrameSpec.from_dict(d["frame"])
        try:
            h = Homography.from_list(d["homography"])
        except (ProjectionError, ValueError) as e:
            raise SceneConfigError(f"camera {frame.camera_id}: invalid homography ({e})") from e
        poly = d.get("visible_polygon")
        if poly is None:
            poly = ground_footprint(frame, h)
        return cls(frame, h, tuple(tuple(float(v) for v in p) for p in poly))


@dataclass(frozen=True)
class Lane:
    waypoints: tuple[tuple[float, float], ...]
    speed: float       # ground units per second

    @property
    def length(self) -> float:
        pts = np.array(self.waypoints)
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())

    def locate(self, dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Positions and unit headings at distances along the polyline."""
        pts = np.array(self.waypoints, dtype=float)
        seg = np.diff(pts, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        k = np.clip(np.searchsorted(cum, dist, side="right") - 1, 0, len(seg) - 1)
        t = (dist - cum[k]) / seg_len[k]
        pos = pts[k] + seg[k] * t[:, None]
        heading = seg[k] / seg_len[k][:, None]
        return pos, heading


@dataclass(frozen=True)
class Footprint:
    length: float = 4.5
    width: float = 1.9
    scale_jitter: float = 0.0


@dataclass(frozen=True)
class SceneConfig:
    cameras: tuple[CameraSetup, ...]
    lanes: tuple[Lane, ...]
    object_count: int
    duration_frames: int
    frame_rate_hz: float = 10.0
    footprint: Footprint = Footprint()
    error_rates: Mapping[tuple[int, int], tuple[float, float]] = field(default_factory=dict)  # (fp, fn)
    seed: int = 0
    jitter_px: float = 0.0

    def __post_init__(self):
        if self.duration_frames < 1:
            raise SceneConfigError("duration_frames must be >= 1")
        if self.object_count < 0:
            raise SceneConfigError("object_count must be >= 0")
        if self.frame_rate_hz <= 0:
            raise SceneConfigError("frame_rate_hz must be positive")
        if self.object_count and not self.lanes:
            raise SceneConfigError("objects need at least one lane")
        ids = {c.frame.camera_id for c in self.cameras}
        for (s, d), rates in self.error_rates.items():
            if s not in ids or d not in ids or s == d:
                raise SceneConfigError(f"error rates for unknown camera pair ({s}, {d})")
            if not all(0.0 <= r <= 1.0 for r in rates):
                raise SceneConfigError(f"error rates for ({s}, {d}) must lie in [0, 1]")

    @property
    def frames(self) -> list[FrameSpec]:
        return [c.frame for c in self.cameras]

    def with_error_rates(self, rates: Mapping[tuple[int, int], tuple[float, float]]) -> "SceneConfig":
        return _replace(self, error_rates=dict(rates))

    def to_dict(self) -> dict:
        return {
            "frame_rate_hz": self.frame_rate_hz,
            "duration_frames": self.duration_frames,
            "object_count": self.object_count,
            "seed": self.seed,
            "jitter_px": self.jitter_px,
            "footprint": {"length": self.footprint.length, "width": self.footprint.width,
                          "scale_jitter": self.footprint.scale_jitter},
            "cameras": [c.to_dict() for c in self.cameras],
            "lanes": [{"waypoints": [list(p) for p in ln.waypoints], "speed": ln.speed} for ln in self.lanes],
            "error_rates": [{"source": s, "dest": d, "fp_rate": fp, "fn_rate": fn}
                            for (s, d), (fp, fn) in sorted(self.error_rates.items())],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneConfig":
        try:
            cams = tuple(CameraSetup.from_dict(c) for c in d["cameras"])
            lanes = tuple(Lane(tuple(tuple(float(v) for v in p) for p in ln["waypoints"]), float(ln["speed"]))
                          for ln in d.get("lanes", []))
            fp = d.get("footprint", {})
            rates = {(int(e["source"]), int(e["dest"])): (float(e.get("fp_rate", 0.0)), float(e.get("fn_rate", 0.0)))
                     for e in d.get("error_rates", [])}
            return cls(cams, lanes, int(d["object_count"]), int(d["duration_frames"]),
                       float(d.get("frame_rate_hz", 10.0)),
                       Footprint(float(fp.get("length", 4.5)), float(fp.get("width", 1.9)),
                                 float(fp.get("scale_jitter", 0.0))),
                       rates, int(d.get("seed", 0)), float(d.get("jitter_px", 0.0)))
        except (KeyError, TypeError) as e:
            raise SceneConfigError(f"malformed scene config ({e})") from e


def _replace(cfg: SceneConfig, **kw) -> SceneConfig:
    from dataclasses import replace
    return replace(cfg, **kw)


def read_scene_config(path: str | Path) -> SceneConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SceneConfigError(f"{path}: not valid JSON ({e})") from e
    return SceneConfig.from_dict(doc)


def write_scene_config(path: str | Path, config: SceneConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1) + "\n")


def ground_footprint(frame: FrameSpec, h: Homography, inset: float = 0.0) -> list[list[float]]:
    """Ground quadrilateral seen by the camera (frame corners pulled back through h)."""
    w, ht = frame.width_px, frame.height_px
    corners = np.array([[inset, inset], [w - inset, inset], [w - inset, ht - inset], [inset, ht - inset]])
    ground, ok = project_many(h.inverse(), corners)
    if not ok.all():
        raise SceneConfigError(f"camera {frame.camera_id}: frame corner beyond the horizon; give visible_polygon")
    return ground.round(6).tolist()


# -- generation --------------------------------------------------------------

@dataclass(frozen=True)
class InjectedError:
    kind: str          # "fn" or "fp"
    frame: int
    camera: int
    object: int        # ground-truth id of the affected record
    dest: int
    reid: int          # reid written into the record

    def to_dict(self) -> dict:
        return {"kind": self.kind, "frame": self.frame, "camera": self.camera,
                "object": self.object, "dest": self.dest, "reid": self.reid}


def _object_plan(config: SceneConfig, rng: np.random.Generator):
    duration_s = config.duration_frames / config.frame_rate_hz
    plan = []
    for k in range(config.object_count):
        lane = config.lanes[k % len(config.lanes)]
        speed = lane.speed * rng.uniform(0.9, 1.1)
        travel = lane.length / speed
        spawn = rng.uniform(-travel, duration_s)
        scale = 1.0 + rng.uniform(-config.footprint.scale_jitter, config.footprint.scale_jitter)
        plan.append((lane, speed, spawn, scale))
    return plan


def _clean_records(config: SceneConfig, rng: np.random.Generator) -> list[DetectionRecord]:
    plan = _object_plan(config, rng)
    polys = {c.frame.camera_id: shapely.Polygon(c.visible_polygon) for c in config.cameras}
    fl, fw = config.footprint.length / 2, config.footprint.width / 2
    records = []
    seen_objects = set()
    for f in range(config.duration_frames):
        t = f / config.frame_rate_hz
        ids, centers, corners = [], [], []
        for gid, (lane, speed, spawn, scale) in enumerate(plan):
            dist = (t - spawn) * speed
            if not 0.0 <= dist <= lane.length:
                continue
            pos, head = lane.locate(np.array([dist]))
            p, u = pos[0], head[0]
            n = np.array([-u[1], u[0]])
            a, b = u * fl * scale, n * fw * scale
            ids.append(gid)
            centers.append(p)
            corners.append([p + a + b, p + a - b, p - a - b, p - a + b])
        if not ids:
            continue
        centers = np.array(centers)
        corners = np.array(corners).reshape(-1, 2)
        for cam in config.cameras:
            cid = cam.frame.camera_id
            inside = shapely.contains_xy(polys[cid], centers[:, 0], centers[:, 1])
            if not inside.any():
                continue
            px, ok = project_many(cam.homography, corners)
            px = px.reshape(-1, 4, 2)
            ok = ok.reshape(-1, 4).all(axis=1)
            for k in np.flatnonzero(inside & ok):
                lo = px[k].min(axis=0)
                hi = px[k].max(axis=0)
                if config.jitter_px > 0:
                    noise = rng.normal(0.0, config.jitter_px, 4)
                    lo, hi = lo + noise[:2], hi + noise[2:]
                left, top = max(lo[0], 0.0), max(lo[1], 0.0)
                right, bottom = min(hi[0], cam.frame.width_px), min(hi[1], cam.frame.height_px)
                left, top, right, bottom = (round(float(v), 2) for v in (left, top, right, bottom))
                if right - left <= 0 or bottom - top <= 0:
                    continue
                gid = ids[k]
                seen_objects.add(gid)
                records.append(DetectionRecord(cid, f, BBox(left, top, right - left, bottom - top), gid, gid))
    unseen = config.object_count - len(seen_objects)
    if unseen:
        log.warning("%d of %d objects never enter any camera view", unseen, config.object_count)
    return records


def _inject_errors(config: SceneConfig, records: list[DetectionRecord],
                   rng: np.random.Generator) -> tuple[list[DetectionRecord], list[InjectedError]]:
    if not config.error_rates:
        return records, []
    records = sorted(records, key=lambda r: (r.frame_index, r.camera_id, r.gt_id))
    by_frame: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        by_frame.setdefault(r.frame_index, []).append(i)
    next_id = config.object_count
    recs = list(records)
    touched: set[int] = set()   # victims, and FP anchors that must keep their id
    log_: list[InjectedError] = []
    pairs = sorted(config.error_rates)

    # splits first, so that FP victims copy the final id of their partner
    for frame in sorted(by_frame):
        idx = by_frame[frame]
        visible = {}
        for i in idx:
            visible.setdefault(recs[i].camera_id, set()).add(recs[i].gt_id)
        for i in idx:
            r = recs[i]
            for s, d in pairs:
                if s != r.camera_id:
                    continue
                if r.gt_id in visible.get(d, ()) and rng.random() < config.error_rates[(s, d)][1]:
                    recs[i] = DetectionRecord(r.camera_id, r.frame_index, r.box, next_id, r.gt_id)
                    log_.append(InjectedError("fn", frame, s, r.gt_id, d, next_id))
                    touched.add(i)
                    next_id += 1
                    break
    for frame in sorted(by_frame):
        idx = by_frame[frame]
        for i in idx:
            if i in touched:
                continue
            r = recs[i]
            for s, d in pairs:
                if s != r.camera_id:
                    continue
                in_d = [j for j in idx if recs[j].camera_id == d]
                if r.gt_id in {recs[j].gt_id for j in in_d}:
                    continue
                if rng.random() >= config.error_rates[(s, d)][0]:
                    continue
                in_s = {recs[j].gt_id for j in idx if recs[j].camera_id == s}
                cands = [j for j in in_d if recs[j].gt_id not in in_s and j not in touched]
                if not cands:
                    cands = [j for j in in_d if recs[j].gt_id != r.gt_id and j not in touched]
                if not cands:
                    continue
                j = cands[int(rng.integers(len(cands)))]
                reid = recs[j].reid_id
                recs[i] = DetectionRecord(r.camera_id, r.frame_index, r.box, reid, r.gt_id)
                log_.append(InjectedError("fp", frame, s, r.gt_id, d, reid))
                touched.update((i, j))
                break
    return recs, log_


# Pairwise (tp, fp, fn, tn) counts of a raw ReID run over five real cameras.
REFERENCE_LABEL_COUNTS = {
    (1, 2): (335, 253, 263, 7542), (1, 3): (358, 22, 560, 7453), (1, 4): (162, 15, 336, 7880),
    (1, 5): (101, 0, 642, 7650), (2, 1): (333, 253, 291, 4317), (2, 3): (161, 81, 397, 4551),
    (2, 4): (242, 56, 401, 4497), (2, 5): (50, 2, 773, 4371), (3, 1): (358, 22, 977, 8246),
    (3, 2): (161, 81, 868, 8558), (3, 4): (434, 40, 951, 8243), (3, 5): (155, 24, 1871, 7618),
    (4, 1): (162, 15, 512, 6784), (4, 2): (242, 56, 917, 6258), (4, 3): (434, 40, 809, 6190),
    (4, 5): (138, 22, 1402, 8583), (5, 1): (101, 0, 694, 8568), (5, 2): (50, 2, 1074, 8237),
    (5, 3): (155, 24, 1552, 7632), (5, 4): (138, 22, 1328, 7875),
}


HARDEST_PAIRS = ((1, 2), (2, 1))


def reference_error_shares(max_fp_share: float = 0.43, hardest_fn_share: float = 0.44,
                           other_fn_share: float = 0.2) -> dict[tuple[int, int], tuple[float, float]]:
    """Per-pair target (fp/(tp+fp), fn/(tp+fn)) shaped after the reference counts.

    False-positive shares follow the reference counts (largest on cameras 1/2).
    Most reference pairs miss more matches than they find, which no
    position-based filter can undo, so missed-match shares are capped: the
    hardest pairs at `hardest_fn_share`, the rest at `other_fn_share`.
    """
    out = {}
    for pair, (tp, fp, fn, _) in REFERENCE_LABEL_COUNTS.items():
        cap = hardest_fn_share if pair in HARDEST_PAIRS else other_fn_share
        out[pair] = (min(fp / (tp + fp), max_fp_share), min(fn / (tp + fn), cap))
    return out


def measured_error_shares(trace: Trace) -> dict[tuple[int, int], tuple[float, float]]:
    out = {}
    for pair, c in label_matrix(trace).items():
        fp_share = c.fp / (c.tp + c.fp) if c.tp + c.fp else 0.0
        fn_share = c.fn / (c.tp + c.fn) if c.tp + c.fn else 0.0
        out[pair] = (fp_share, fn_share)
    return out


def tune_error_rates(config: SceneConfig, shares: Mapping[tuple[int, int], tuple[float, float]],
                     rounds: int = 6) -> SceneConfig:
    """Adjust injection rates until the generated trace shows the target label shares.

    A split or a stolen id shows up on several pairs at once, so the rates
    are refined by multiplicative updates against measured shares.
    """
    pairs = [p for p in shares if p[0] != p[1]]
    rates = {p: (shares[p][0] * 0.5, shares[p][1] * 0.5) for p in pairs}
    best = config.with_error_rates(rates)
    for _ in range(rounds):
        cfg = config.with_error_rates(rates)
        trace, _ = generate_scene(cfg)
        got = measured_error_shares(trace)
        best = cfg
        new = {}
        for p in pairs:
            fp_t, fn_t = shares[p]
            fp_g, fn_g = got.get(p, (0.0, 0.0))
            fp_r, fn_r = rates[p]
            fp_r = fp_r * fp_t / fp_g if fp_g > 0 else (fp_r * 2 if fp_t > 0 else 0.0)
            fn_r = fn_r * fn_t / fn_g if fn_g > 0 else (fn_r * 2 if fn_t > 0 else 0.0)
            new[p] = (min(max(fp_r, 0.0), 1.0), min(max(fn_r, 0.0), 1.0))
        rates = new
    return best


def generate_scene(config: SceneConfig) -> tuple[Trace, list[InjectedError]]:
    """Deterministic trace (with gt ids) plus the log of every injected ReID error."""
    geo_seq, err_seq = np.random.SeedSequence(config.seed).spawn(2)
    records = _clean_records(config, np.random.default_rng(geo_seq))
    records, errors = _inject_errors(config, records, np.random.default_rng(err_seq))
    try:
        trace = Trace.build(config.frame_rate_hz, records, config.frames, (0, config.duration_frames - 1))
    except TraceError as e:
        raise SceneConfigError(str(e)) from e
    return trace, errors


def write_error_log(path: str | Path, errors: Sequence[InjectedError]) -> None:
    Path(path).write_text("".join(json.dumps(e.to_dict()) + "\n" for e in errors))


def read_error_log(path: str | Path) -> list[InjectedError]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            d = json.loads(line)
            out.append(InjectedError(d["kind"], d["frame"], d["camera"], d["object"], d["dest"], d["reid"]))
    return out


def overlap_fraction(trace: Trace) -> float:
    """Share of records whose object is seen by another camera in the same frame."""
    if not trace.records:
        return 0.0
    hits = 0
    for recs in trace.by_frame().values():
        cams: dict[int, set[int]] = {}
        for r in recs:
            cams.setdefault(r.gt_id, set()).add(r.camera_id)
        hits += sum(1 for r in recs if len(cams[r.gt_id]) > 1)
    return hits / len(trace.records)


# -- bundled demo ------------------------------------------------------------

def camera_from_quad(frame: FrameSpec, quad) -> CameraSetup:
    """Camera whose frame corners (TL, TR, BR, BL) see the given ground points."""
    w, h = frame.width_px, frame.height_px
    hom = homography_from_points(quad, [[0, 0], [w, 0], [w, h], [0, h]])
    return CameraSetup(frame, hom, tuple(tuple(float(v) for v in p) for p in quad))


def demo_scene_config(seed: int = 7, duration_frames: int = 1800, object_count: int = 160,
                      tile_size_px: int = 64) -> SceneConfig:
    """Five cameras around a four-way intersection; camera 5 has a smaller frame."""
    quads = {
        1: [[12, 28], [12, -28], [-62, -11], [-62, 11]],      # west, looking east
        2: [[-12, -28], [-12, 28], [62, 11], [62, -11]],      # east, looking west
        3: [[-28, 14], [28, 14], [11, -62], [-11, -62]],      # south, looking north
        4: [[28, -14], [-28, -14], [-11, 62], [11, 62]],      # north, looking south
        5: [[-24, 18], [24, 18], [24, -18], [-24, -18]],      # overhead
    }
    cams = []
    for cid, quad in quads.items():
        w, h = (1280, 960) if cid == 5 else (1920, 1080)
        cams.append(camera_from_quad(FrameSpec(cid, w, h, tile_size_px), quad))
    lanes = []
    for off in (-5.25, -1.75):
        lanes.append(Lane(((-80.0, off), (80.0, off)), 10.0))
        lanes.append(Lane(((80.0, -off), (-80.0, -off)), 10.0))
        lanes.append(Lane(((-off, -80.0), (-off, 80.0)), 9.0))
        lanes.append(Lane(((off, 80.0), (off, -80.0)), 9.0))
    return SceneConfig(tuple(cams), tuple(lanes), object_count, duration_frames, 10.0,
                       Footprint(4.5, 1.9, 0.05), {}, seed, 0.0)
