"""Cross-camera RoI masks from multi-camera detection traces."""

from .association import (
    AssociationTable,
    DetectionRecord,
    PairLabelCounts,
    Trace,
    TraceError,
    build_lookup_table,
    label_pairwise,
    read_trace,
    write_trace,
)
from .grouping import Grouping, Rect, group_tiles, largest_rectangle
from .optimizer import CoverInstance, Solution, build_cover_instance, solve_exact, solve_greedy, verify_cover
from .tiling import BBox, FrameSpec, RoiMask, TileGrid, TileRef, appearance_region, build_grid, mask_area_fraction

__version__ = "0.1.0"

__all__ = [
    "AssociationTable", "DetectionRecord", "PairLabelCounts", "Trace", "TraceError", "build_lookup_table",
    "label_pairwise", "read_trace", "write_trace", "Grouping", "Rect", "group_tiles", "largest_rectangle",
    "CoverInstance", "Solution", "build_cover_instance", "solve_exact", "solve_greedy", "verify_cover",
    "BBox", "FrameSpec", "RoiMask", "TileGrid", "TileRef", "appearance_region", "build_grid", "mask_area_fraction",
]
