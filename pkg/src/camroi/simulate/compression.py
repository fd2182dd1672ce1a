"""Analytic cost model for tile-grouped video segments and the network/inference path."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from ..grouping import Grouping
from ..tiling import TileGrid


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CompressionModel:
    """bytes per segment = sum over groups of (F + c * pixels * duration_factor)."""
    per_group_overhead_bytes_per_segment: float       # F
    payload_bytes_per_pixel_per_segment: float        # c, at 1 s segments
    fit_residual: float = 0.0                         # max relative error of the calibration
    kappa: float = 0.5                                # segment-length efficiency knob

    def __post_init__(self):
        if self.per_group_overhead_bytes_per_segment < 0:
            raise CalibrationError("per-group overhead must be non-negative")
        if self.payload_bytes_per_pixel_per_segment <= 0:
            raise CalibrationError("payload rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "CompressionModel":
        return cls(**d)


@dataclass(frozen=True)
class NetConfig:
    bandwidth_bps: float = 30e6
    rtt_s: float = 0.010
    segment_len_s: float = 1.0
    inference_base_hz: float = 50.0
    gather_scatter_overhead: float = 0.25
    frame_rate_hz: float = 10.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{name} must be positive")
        frames = self.segment_len_s * self.frame_rate_hz
        if abs(frames - round(frames)) > 1e-9:
            raise ValueError(f"segment length {self.segment_len_s}s is not a whole number of frames")

    @property
    def frames_per_segment(self) -> int:
        return int(round(self.segment_len_s * self.frame_rate_hz))

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_compression(measurements: Sequence[tuple[float, float]], frame_pixels: float,
                          segments: float = 1.0, kappa: float = 0.5) -> CompressionModel:
    """Least-squares fit of total_bytes = (c * frame_pixels + F * groups) * segments.

    `measurements` are (group_count, total_bytes) for the same clip, so
    `segments` is the clip length in 1 s segments.
    """
    g = np.array([m[0] for m in measurements], dtype=float)
    y = np.array([m[1] for m in measurements], dtype=float)
    if len(np.unique(g)) < 2:
        raise CalibrationError("calibration needs at least two distinct group counts")
    a = np.column_stack([np.full_like(g, frame_pixels * segments), g * segments])
    (c, f), *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ np.array([c, f])
    resid = float(np.max(np.abs(pred - y) / np.abs(y)))
    if c <= 0:
        raise CalibrationError("fitted payload rate is not positive")
    return CompressionModel(max(float(f), 0.0), float(c), resid, kappa)


def duration_factor(segment_len_s: float, kappa: float) -> float:
    """Relative bytes per second of content; 1 at 1 s, falling for longer segments."""
    return (1.0 + kappa / segment_len_s) / (1.0 + kappa)


def estimate_segment_size(model: CompressionModel, grouping: Grouping, grid: TileGrid, net: NetConfig) -> float:
    """Modelled bytes of one segment for a camera streaming the given groups."""
    if not grouping.rects:
        return 0.0
    factor = duration_factor(net.segment_len_s, model.kappa) * net.segment_len_s
    pixels = sum(r.pixel_area(grid) for r in grouping.rects)
    return (len(grouping.rects) * model.per_group_overhead_bytes_per_segment
            + model.payload_bytes_per_pixel_per_segment * pixels * factor)


def modeled_inference_hz(net: NetConfig, area_fraction: float) -> float:
    """Detector frame rate when it only looks at the masked area.

    Cost per frame is the masked share plus a fixed gather/scatter overhead;
    large masks fall back to the plain detector, so the rate never drops below
    the base rate.
    """
    hz = net.inference_base_hz / (net.gather_scatter_overhead + area_fraction)
    return min(max(hz, net.inference_base_hz), net.inference_base_hz / net.gather_scatter_overhead)


# Measured H.264 clip sizes (MB) of five 3-minute feeds split evenly into 1, 4, 8, 16, 32 and 64 tiles.
SPLIT_GROUP_COUNTS = (1, 4, 8, 16, 32, 64)
SPLIT_CLIP_MB = {
    1: (82.7, 85.9, 86.2, 89.0, 90.4, 97.3),
    2: (121.2, 124.5, 124.8, 127.6, 129.6, 136.2),
    3: (102.2, 103.3, 103.6, 105.2, 106.4, 112.9),
    4: (97.9, 99.3, 99.5, 100.0, 101.7, 108.6),
    5: (40.9, 41.1, 41.4, 42.0, 43.2, 47.4),
}
SPLIT_FRAME_PIXELS = {1: 1920 * 1080, 2: 1920 * 1080, 3: 1920 * 1080, 4: 1920 * 1080, 5: 1280 * 960}
SPLIT_CLIP_SECONDS = 180.0


def split_measurements(camera: int) -> list[tuple[int, float]]:
    return [(g, mb * 1e6) for g, mb in zip(SPLIT_GROUP_COUNTS, SPLIT_CLIP_MB[camera])]


def calibrate_reference(camera: int) -> CompressionModel:
    return calibrate_compression(split_measurements(camera), SPLIT_FRAME_PIXELS[camera], SPLIT_CLIP_SECONDS)
