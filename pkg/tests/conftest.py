"""Shared fixtures: the two-camera toy frame and small synthetic scenes."""
from __future__ import annotations

import random

import pytest

from camroi.association import DetectionRecord, Trace
from camroi.optimizer import CoverInstance, ObjectDemand
from camroi.tiling import BBox, FrameSpec, TileRef

TILE = 64
TOY_COLS, TOY_ROWS = 6, 4

# object id -> [(camera, tiles)] for the toy frame at t1
TOY_REGIONS = {
    1: [(1, {9, 10, 15, 16}), (2, {7, 8, 13, 14})],
    2: [(1, {3, 4, 9, 10})],
    3: [(1, {4, 5, 10, 11})],
    4: [(1, {11})],
    5: [(2, {2, 8})],
    6: [(2, {3})],
    7: [(2, {3, 9})],
}
TOY_SOLUTION = {1: {3, 4, 5, 9, 10, 11, 15, 16}, 2: {2, 3, 8, 9}}


def box_for_tiles(tiles, cols: int = TOY_COLS, tile: int = TILE, inset: float = 5.0) -> BBox:
    """A box strictly inside the bounding rectangle of a rectangular tile set."""
    rows = [(j - 1) // cols for j in tiles]
    cs = [(j - 1) % cols for j in tiles]
    left, top = min(cs) * tile + inset, min(rows) * tile + inset
    right, bottom = (max(cs) + 1) * tile - inset, (max(rows) + 1) * tile - inset
    return BBox(left, top, right - left, bottom - top)


def toy_frames(tile: int = TILE) -> list[FrameSpec]:
    return [FrameSpec(c, TOY_COLS * TILE, TOY_ROWS * TILE, tile) for c in (1, 2)]


def toy_trace() -> Trace:
    recs = [DetectionRecord(cam, 0, box_for_tiles(tiles), oid, oid)
            for oid, regions in TOY_REGIONS.items() for cam, tiles in regions]
    return Trace.build(10.0, recs, toy_frames(), (0, 0))


@pytest.fixture
def fig2_trace() -> Trace:
    return toy_trace()


def random_instance(rng: random.Random, max_tiles: int = 14, max_demands: int = 6, max_alts: int = 3,
                    cameras: int = 2) -> CoverInstance:
    n = rng.randint(1, max_tiles)
    universe = tuple(TileRef(1 + i % cameras, 1 + i // cameras) for i in range(n))
    demands = []
    for k in range(rng.randint(0, max_demands)):
        alts = []
        for _ in range(rng.randint(1, max_alts)):
            size = rng.randint(1, min(4, n))
            alts.append(frozenset(rng.sample(universe, size)))
        demands.append(ObjectDemand(0, k, tuple(alts)))
    return CoverInstance(universe, tuple(demands))


def brute_force_min(instance: CoverInstance) -> int:
    tiles = list(instance.universe)
    best = len(tiles)
    for m in range(1 << len(tiles)):
        size = m.bit_count()
        if size >= best:
            continue
        chosen = {t for i, t in enumerate(tiles) if m >> i & 1}
        if all(any(a <= chosen for a in d.alternatives) for d in instance.demands):
            best = size
    return best


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
