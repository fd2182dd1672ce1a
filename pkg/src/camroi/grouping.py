"""Merge the tiles of a mask into larger rectangles, largest first."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .tiling import RoiMask, TileGrid


class EmptyMaskError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    camera_id: int
    col0: int
    row0: int
    cols: int
    rows: int

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError(f"degenerate rect {self}")

    @property
    def area(self) -> int:
        return self.cols * self.rows

    def cells(self):
        for r in range(self.row0, self.row0 + self.rows):
            for c in range(self.col0, self.col0 + self.cols):
                yield r, c

    def tiles(self, grid: TileGrid) -> set[int]:
        return {grid.index(r, c) for r, c in self.cells()}

    def pixel_rect(self, grid: TileGrid) -> tuple[int, int, int, int]:
        return grid.cell_rect(self.row0, self.col0, self.rows, self.cols)

    def pixel_area(self, grid: TileGrid) -> int:
        _, _, w, h = self.pixel_rect(grid)
        return w * h


@dataclass(frozen=True)
class Grouping:
    camera_id: int
    rects: tuple[Rect, ...]

    def tile_count(self) -> int:
        return sum(r.area for r in self.rects)


def _rect_key(area: int, row0: int, col0: int, cols: int):
    return (-area, row0, col0, -cols)


def largest_rectangle(grid_mask, camera_id: int = 0) -> Rect:
    """Maximum-area all-true rectangle of a 2-D boolean map, rows x cols.

    Runs the histogram/stack scan once per row. Among equal areas the smallest
    row0 wins, then the smallest col0, then the wider rectangle.
    """
    cells = np.asarray(grid_mask, dtype=bool)
    if cells.ndim != 2 or not cells.any():
        raise EmptyMaskError("largest_rectangle needs at least one true cell")
    n_rows, n_cols = cells.shape
    heights = [0] * n_cols
    best = None
    for r in range(n_rows):
        row = cells[r]
        for c in range(n_cols):
            heights[c] = heights[c] + 1 if row[c] else 0
        stack: list[int] = []
        for c in range(n_cols + 1):
            h = heights[c] if c < n_cols else 0
            while stack and heights[stack[-1]] >= h:
                top = stack.pop()
                height = heights[top]
                if height == 0:
                    continue
                left = stack[-1] + 1 if stack else 0
                width = c - left
                key = _rect_key(height * width, r - height + 1, left, width)
                if best is None or key < best[0]:
                    best = (key, (left, r - height + 1, width, height))
            stack.append(c)
    col0, row0, cols, rows = best[1]
    return Rect(camera_id, col0, row0, cols, rows)


def mask_cells(mask: RoiMask, grid: TileGrid) -> np.ndarray:
    mask.check(grid)
    cells = np.zeros((grid.rows, grid.cols), dtype=bool)
    for j in mask.tiles:
        r, c = grid.row_col(j)
        cells[r, c] = True
    return cells


def group_tiles(mask: RoiMask, grid: TileGrid) -> Grouping:
    cells = mask_cells(mask, grid)
    rects = []
    while cells.any():
        rect = largest_rectangle(cells, mask.camera_id)
        cells[rect.row0:rect.row0 + rect.rows, rect.col0:rect.col0 + rect.cols] = False
        rects.append(rect)
    return Grouping(mask.camera_id, tuple(rects))


def per_tile_grouping(mask: RoiMask, grid: TileGrid) -> Grouping:
    """One rect per tile (no merging)."""
    rects = []
    for j in sorted(mask.tiles):
        r, c = grid.row_col(j)
        rects.append(Rect(mask.camera_id, c, r, 1, 1))
    return Grouping(mask.camera_id, tuple(rects))


def check_grouping(grouping: Grouping, mask: RoiMask, grid: TileGrid) -> None:
    covered: set[int] = set()
    for rect in grouping.rects:
        if rect.col0 < 0 or rect.row0 < 0 or rect.col0 + rect.cols > grid.cols or rect.row0 + rect.rows > grid.rows:
            raise ValueError(f"{rect} exceeds the grid")
        tiles = rect.tiles(grid)
        if tiles & covered:
            raise ValueError(f"{rect} overlaps an earlier rect")
        covered |= tiles
    if covered != set(mask.tiles):
        raise ValueError(f"grouping of camera {grouping.camera_id} does not reproduce its mask")


# -- groups file -------------------------------------------------------------

def groupings_to_json(groupings: Mapping[int, Grouping], grids: Mapping[int, TileGrid]) -> dict:
    cams = []
    for cam in sorted(groupings):
        g = grids[cam]
        cams.append({"camera_id": cam, "rects": [
            {"col0": r.col0, "row0": r.row0, "cols": r.cols, "rows": r.rows, "px": list(r.pixel_rect(g))}
            for r in groupings[cam].rects]})
    return {"cameras": cams}


def groupings_from_json(doc: Mapping) -> dict[int, Grouping]:
    entries: Sequence = doc["cameras"] if "cameras" in doc else [doc]
    out = {}
    for c in entries:
        cam = int(c["camera_id"])
        out[cam] = Grouping(cam, tuple(Rect(cam, int(r["col0"]), int(r["row0"]), int(r["cols"]), int(r["rows"]))
                                       for r in c["rects"]))
    return out


def write_groupings(path: str | Path, groupings: Mapping[int, Grouping], grids: Mapping[int, TileGrid]) -> None:
    Path(path).write_text(json.dumps(groupings_to_json(groupings, grids), indent=1) + "\n")


def read_groupings(path: str | Path) -> dict[int, Grouping]:
    return groupings_from_json(json.loads(Path(path).read_text()))
