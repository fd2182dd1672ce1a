"""Frame tiling, bounding boxes, appearance regions and RoI masks.

Tiles are numbered from 1, left-to-right within a row and rows top-to-bottom.
Pixel rectangles are half-open: ``[left, left + width) x [top, top + height)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping


class TilingError(ValueError):
    pass


class EmptyIntersectionError(TilingError):
    """The box does not intersect the frame at all."""


@dataclass(frozen=True)
class FrameSpec:
    camera_id: int
    width_px: int
    height_px: int
    tile_size_px: int = 64

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0 or self.tile_size_px <= 0:
            raise TilingError(f"non-positive frame dimension in {self}")

    @property
    def area(self) -> int:
        return self.width_px * self.height_px

    def to_dict(self) -> dict:
        return {
            "camera_id": self.camera_id,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "tile_size_px": self.tile_size_px,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FrameSpec":
        return cls(int(d["camera_id"]), int(d["width_px"]), int(d["height_px"]),
                   int(d.get("tile_size_px", 64)))


@dataclass(frozen=True)
class BBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise TilingError(f"bbox must have positive extent: {self}")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)

    def clamp(self, frame: FrameSpec) -> "BBox":
        """Clip to the frame. Raises EmptyIntersectionError if nothing is left."""
        left = max(self.left, 0.0)
        top = max(self.top, 0.0)
        right = min(self.right, float(frame.width_px))
        bottom = min(self.bottom, float(frame.height_px))
        if right <= left or bottom <= top:
            raise EmptyIntersectionError(f"{self} lies outside frame of camera {frame.camera_id}")
        return BBox(left, top, right - left, bottom - top)


@dataclass(frozen=True)
class TileRef:
    camera_id: int
    tile_index: int


@dataclass(frozen=True)
class TileGrid:
    frame: FrameSpec
    cols: int
    rows: int

    @property
    def camera_id(self) -> int:
        return self.frame.camera_id

    @property
    def tile_count(self) -> int:
        return self.cols * self.rows

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise TilingError(f"tile (row={row}, col={col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col + 1

    def row_col(self, index: int) -> tuple[int, int]:
        self.check_index(index)
        return divmod(index - 1, self.cols)

    def check_index(self, index: int) -> None:
        if not (1 <= index <= self.tile_count):
            raise TilingError(f"tile index {index} out of range 1..{self.tile_count} "
                              f"for camera {self.camera_id}")

    def tile_rect(self, index: int) -> tuple[int, int, int, int]:
        """Pixel rectangle (left, top, width, height) of a tile; edge tiles are clipped."""
        row, col = self.row_col(index)
        return self.cell_rect(row, col, 1, 1)

    def cell_rect(self, row0: int, col0: int, rows: int, cols: int) -> tuple[int, int, int, int]:
        t = self.frame.tile_size_px
        left, top = col0 * t, row0 * t
        right = min((col0 + cols) * t, self.frame.width_px)
        bottom = min((row0 + rows) * t, self.frame.height_px)
        return (left, top, right - left, bottom - top)

    def tile_area(self, index: int) -> int:
        _, _, w, h = self.tile_rect(index)
        return w * h


def build_grid(frame: FrameSpec) -> TileGrid:
    t = frame.tile_size_px
    return TileGrid(frame, math.ceil(frame.width_px / t), math.ceil(frame.height_px / t))


def appearance_region(grid: TileGrid, box: BBox) -> frozenset[int]:
    """Smallest tile set covering the (clamped) box."""
    b = box.clamp(grid.frame)
    t = grid.frame.tile_size_px
    c0 = int(math.floor(b.left / t))
    c1 = int(math.ceil(b.right / t)) - 1
    r0 = int(math.floor(b.top / t))
    r1 = int(math.ceil(b.bottom / t)) - 1
    c1 = min(c1, grid.cols - 1)
    r1 = min(r1, grid.rows - 1)
    return frozenset(r * grid.cols + c + 1 for r in range(r0, r1 + 1) for c in range(c0, c1 + 1))


@dataclass(frozen=True)
class RoiMask:
    camera_id: int
    tiles: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "tiles", frozenset(self.tiles))

    def sorted_tiles(self) -> list[int]:
        return sorted(self.tiles)

    def check(self, grid: TileGrid) -> None:
        if grid.camera_id != self.camera_id:
            raise TilingError(f"mask for camera {self.camera_id} checked against grid "
                              f"of camera {grid.camera_id}")
        for j in self.tiles:
            grid.check_index(j)


def full_mask(grid: TileGrid) -> RoiMask:
    return RoiMask(grid.camera_id, frozenset(range(1, grid.tile_count + 1)))


def mask_area_fraction(grid: TileGrid, mask: RoiMask) -> float:
    mask.check(grid)
    return sum(grid.tile_area(j) for j in mask.tiles) / grid.frame.area


def grids_for(frames: Iterable[FrameSpec]) -> dict[int, TileGrid]:
    return {f.camera_id: build_grid(f) for f in frames}


# -- mask file ---------------------------------------------------------------

def masks_to_json(grids: Mapping[int, TileGrid], masks: Mapping[int, RoiMask]) -> dict:
    cams = []
    for cam in sorted(grids):
        g = grids[cam]
        m = masks.get(cam, RoiMask(cam))
        m.check(g)
        cams.append({**g.frame.to_dict(), "cols": g.cols, "rows": g.rows,
                     "tile_base": 1, "tiles": m.sorted_tiles()})
    return {"cameras": cams}


def masks_from_json(doc: Mapping) -> tuple[dict[int, TileGrid], dict[int, RoiMask]]:
    grids, masks = {}, {}
    for c in doc["cameras"]:
        frame = FrameSpec.from_dict(c)
        g = build_grid(frame)
        if (g.cols, g.rows) != (int(c.get("cols", g.cols)), int(c.get("rows", g.rows))):
            raise TilingError(f"camera {frame.camera_id}: stored grid shape does not match frame")
        if int(c.get("tile_base", 1)) != 1:
            raise TilingError("only 1-based tile indices are supported")
        m = RoiMask(frame.camera_id, frozenset(int(j) for j in c["tiles"]))
        m.check(g)
        grids[frame.camera_id] = g
        masks[frame.camera_id] = m
    return grids, masks


def write_masks(path: str | Path, grids: Mapping[int, TileGrid], masks: Mapping[int, RoiMask]) -> None:
    Path(path).write_text(json.dumps(masks_to_json(grids, masks), indent=1) + "\n")


def read_masks(path: str | Path) -> tuple[dict[int, TileGrid], dict[int, RoiMask]]:
    return masks_from_json(json.loads(Path(path).read_text()))
