"""Minimal multi-camera RoI mask as a set-cover style integer program.

Every (frame, object) demand lists the object's appearance regions; a tile set
``M`` is feasible when each demand has at least one region ``R`` with ``R <= M``.
The solver minimises ``|M|``.

Internally tiles are bit positions ordered by (camera_id, tile_index), so a
tile set is a Python int.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .association import AssociationTable
from .tiling import RoiMask, TileGrid, TileRef, TilingError

OPTIMAL = "optimal"
GREEDY = "feasible-greedy"
TIME_LIMITED = "time-limited"


@dataclass(frozen=True)
class ObjectDemand:
    frame_index: int
    object_id: int
    alternatives: tuple[frozenset[TileRef], ...]


@dataclass(frozen=True)
class CoverInstance:
    universe: tuple[TileRef, ...]
    demands: tuple[ObjectDemand, ...]

    def __post_init__(self):
        uni = set(self.universe)
        for d in self.demands:
            if not d.alternatives:
                raise ValueError(f"demand {d.frame_index}/{d.object_id} has no alternatives")
            for alt in d.alternatives:
                if not alt <= uni:
                    raise ValueError(f"demand {d.frame_index}/{d.object_id} uses tiles outside the universe")

    def cameras(self) -> list[int]:
        return sorted({t.camera_id for t in self.universe})


@dataclass
class Solution:
    masks: dict[int, RoiMask]
    objective: int
    status: str
    elapsed_s: float = 0.0
    nodes: int = 0
    canonical: bool = True

    def tiles(self) -> set[TileRef]:
        return {TileRef(c, j) for c, m in self.masks.items() for j in m.tiles}

    def stats(self) -> dict:
        return {"objective": self.objective, "status": self.status, "nodes": self.nodes,
                "canonical_tie_break": self.canonical, "elapsed_s": round(self.elapsed_s, 6),
                "tiles_per_camera": {str(c): len(m.tiles) for c, m in sorted(self.masks.items())}}


def _alt_camera(alt: frozenset[TileRef]) -> int:
    return min(t.camera_id for t in alt)


def build_cover_instance(table: AssociationTable, grids: Mapping[int, TileGrid]) -> CoverInstance:
    universe = tuple(TileRef(c, j) for c in sorted(grids) for j in range(1, grids[c].tile_count + 1))
    seen = set()
    demands = []
    for frame in sorted(table.frames):
        objs = table.frames[frame]
        for oid in sorted(objs):
            alts = []
            for cam, tiles in objs[oid]:
                if cam not in grids:
                    raise TilingError(f"region on unknown camera {cam}")
                for j in tiles:
                    grids[cam].check_index(j)
                alts.append(frozenset(TileRef(cam, j) for j in tiles))
            alts = _prune_dominated(alts)
            key = frozenset(alts)
            if key in seen:
                continue
            seen.add(key)
            demands.append(ObjectDemand(frame, oid, tuple(alts)))
    return CoverInstance(universe, tuple(demands))


def _prune_dominated(alts: Sequence[frozenset]) -> list[frozenset]:
    uniq = sorted(set(alts), key=lambda a: (len(a), sorted((t.camera_id, t.tile_index) for t in a)))
    kept: list[frozenset] = []
    for a in uniq:
        if not any(k <= a for k in kept):
            kept.append(a)
    return sorted(kept, key=lambda a: (_alt_camera(a), sorted((t.camera_id, t.tile_index) for t in a)))


# -- bitmask encoding --------------------------------------------------------

class _Encoded:
    def __init__(self, instance: CoverInstance):
        self.tiles = sorted(instance.universe, key=lambda t: (t.camera_id, t.tile_index))
        self.bit = {t: i for i, t in enumerate(self.tiles)}
        self.demands = [[self.mask(a) for a in d.alternatives] for d in instance.demands]

    def mask(self, tiles) -> int:
        m = 0
        for t in tiles:
            m |= 1 << self.bit[t]
        return m

    def decode(self, m: int) -> list[TileRef]:
        out = []
        i = 0
        while m:
            if m & 1:
                out.append(self.tiles[i])
            m >>= 1
            i += 1
        return out


def _satisfied(alts: list[int], s: int) -> bool:
    return any(a & ~s == 0 for a in alts)


def _lex_less(x: int, y: int) -> bool:
    """Equal-size tile sets: x precedes y iff the lowest differing tile is in x."""
    d = x ^ y
    return bool(x & (d & -d))


def _to_masks(instance: CoverInstance, enc: _Encoded, s: int) -> dict[int, RoiMask]:
    per_cam: dict[int, set[int]] = {c: set() for c in instance.cameras()}
    for t in enc.decode(s):
        per_cam[t.camera_id].add(t.tile_index)
    return {c: RoiMask(c, frozenset(v)) for c, v in per_cam.items()}


# -- reduction ---------------------------------------------------------------

def _reduce(demands: list[list[int]], forced: int) -> tuple[int, list[list[int]]]:
    """Force single-choice demands, drop satisfied/implied ones, prune dominated choices."""
    while True:
        rest = []
        new_forced = forced
        for alts in demands:
            if _satisfied(alts, forced):
                continue
            marg = sorted({a & ~forced for a in alts}, key=lambda m: (m.bit_count(), m))
            kept: list[int] = []
            for m in marg:
                if not any(k & ~m == 0 for k in kept):
                    kept.append(m)
            if len(kept) == 1:
                new_forced |= kept[0]
            else:
                rest.append(kept)
        if new_forced == forced:
            break
        forced = new_forced
        demands = rest
    uniq = sorted({tuple(sorted(r)) for r in rest}, key=lambda r: (len(r), r))
    # a demand is implied by another when each choice of the other contains one of its choices
    kept_d: list[tuple[int, ...]] = []
    for i, di in enumerate(uniq):
        implied = False
        for j, dj in enumerate(uniq):
            if i == j:
                continue
            if all(any(a & ~b == 0 for a in di) for b in dj):
                if not (all(any(a & ~b == 0 for a in dj) for b in di) and j > i):
                    implied = True
                    break
        if not implied:
            kept_d.append(di)
    return forced, [list(d) for d in kept_d]


def _components(demands: list[list[int]]) -> list[list[list[int]]]:
    foot = [0] * len(demands)
    for i, alts in enumerate(demands):
        for a in alts:
            foot[i] |= a
    parent = list(range(len(demands)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for i, f in enumerate(foot):
        m = f
        while m:
            low = m & -m
            b = low.bit_length() - 1
            if b in owner:
                ri, rj = find(i), find(owner[b])
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
            else:
                owner[b] = i
            m ^= low
    groups: dict[int, list[list[int]]] = {}
    for i in range(len(demands)):
        groups.setdefault(find(i), []).append(demands[i])
    return [groups[k] for k in sorted(groups)]


# -- branch and bound --------------------------------------------------------

class _Timeout(Exception):
    pass


class _BranchAndBound:
    def __init__(self, demands: list[list[int]], deadline: float):
        self.demands = demands
        self.deadline = deadline
        self.nodes = 0

    def lower_bound(self, open_: list[list[int]]) -> int:
        """Sum of cheapest costs over demands whose choices share no tiles."""
        ranked = sorted(open_, key=lambda m: -m[0].bit_count())
        used = 0
        total = 0
        for marg in ranked:
            foot = 0
            for a in marg:
                foot |= a
            if foot & used == 0:
                total += marg[0].bit_count()
                used |= foot
        return total

    def open_demands(self, s: int) -> list[list[int]]:
        out = []
        for alts in self.demands:
            if _satisfied(alts, s):
                continue
            marg = sorted({a & ~s for a in alts}, key=lambda m: (m.bit_count(), m))
            out.append(marg)
        return out

    def solve(self, incumbent: int, ties: bool) -> int:
        """Best completion of the empty set; `ties` also explores equal-cost subtrees."""
        self.best = incumbent
        self.best_cost = incumbent.bit_count()
        self.ties = ties
        self.seen: set[int] = set()
        self._search(0)
        return self.best

    def _search(self, s: int) -> None:
        self.nodes += 1
        if self.nodes & 255 == 0 and time.monotonic() > self.deadline:
            raise _Timeout
        if s in self.seen:
            return
        self.seen.add(s)
        open_ = self.open_demands(s)
        cost = s.bit_count()
        if not open_:
            if cost < self.best_cost or (cost == self.best_cost and _lex_less(s, self.best)):
                self.best, self.best_cost = s, cost
            return
        lb = cost + self.lower_bound(open_)
        if lb > self.best_cost or (lb == self.best_cost and not self.ties):
            return
        # most constrained demand first
        pick = min(open_, key=lambda m: (len(m), -m[0].bit_count()))
        for m in pick:
            self._search(s | m)


def _greedy_bits(demands: list[list[int]], start: int = 0) -> int:
    s = start
    open_ = [alts for alts in demands if not _satisfied(alts, s)]
    while open_:
        best = None
        for alts in open_:
            for a in alts:
                c = (a & ~s).bit_count()
                if best is None or c < best[0]:
                    best = (c, a)
        s |= best[1]
        open_ = [alts for alts in open_ if not _satisfied(alts, s)]
    return s


class _LpBranchAndBound:
    """Branch on tiles under the LP relaxation (choices x_a, tiles y_t, x_a <= y_t).

    Used for components too large for the combinatorial search; an integral
    tile vector is always a cover, so only tiles are branched on.
    """

    def __init__(self, demands: list[list[int]], deadline: float):
        self.demands = demands
        self.deadline = deadline
        self.nodes = 0
        foot = 0
        for alts in demands:
            for a in alts:
                foot |= a
        self.bits = [b for b in range(foot.bit_length()) if foot >> b & 1]
        col = {b: i for i, b in enumerate(self.bits)}
        nt = len(self.bits)
        alts = [(d, a) for d, al in enumerate(demands) for a in al]
        rows, cols, vals = [], [], []
        for k, (d, a) in enumerate(alts):
            rows.append(d)
            cols.append(nt + k)
            vals.append(-1.0)
        r = len(demands)
        for k, (_, a) in enumerate(alts):
            for b in _bits(a):
                rows += [r, r]
                cols += [nt + k, col[b]]
                vals += [1.0, -1.0]
                r += 1
        self.a_ub = coo_matrix((vals, (rows, cols)), shape=(r, nt + len(alts))).tocsr()
        self.b_ub = np.concatenate([-np.ones(len(demands)), np.zeros(r - len(demands))])
        self.cost = np.concatenate([np.ones(nt), np.zeros(len(alts))])
        self.nt = nt
        self.n_alts = len(alts)

    def to_bits(self, y) -> int:
        s = 0
        for i, v in enumerate(y):
            if v > 0.5:
                s |= 1 << self.bits[i]
        return s

    def lp(self, lo: np.ndarray, hi: np.ndarray):
        self.nodes += 1
        if time.monotonic() > self.deadline:
            raise _Timeout
        bounds = np.column_stack([np.concatenate([lo, np.zeros(self.n_alts)]),
                                  np.concatenate([hi, np.ones(self.n_alts)])])
        res = linprog(self.cost, A_ub=self.a_ub, b_ub=self.b_ub, bounds=bounds, method="highs")
        return res if res.status == 0 else None

    def search(self, lo, hi, limit: int, strict: bool) -> int | None:
        """A cover under the fixings with cost < limit (strict) or <= limit, else None."""
        res = self.lp(lo, hi)
        if res is None:
            return None
        bound = math.ceil(res.fun - 1e-6)
        if bound > limit or (strict and bound == limit):
            return None
        y = res.x[:self.nt]
        frac = np.abs(y - np.round(y))
        if frac.max() < 1e-6:
            return self.to_bits(y)
        rounded = _greedy_bits(self.demands, self.to_bits(np.where(y > 1 - 1e-6, 1.0, 0.0)))
        if self._fits(rounded, lo, hi) and (rounded.bit_count() < limit or
                                            (not strict and rounded.bit_count() == limit)):
            return rounded
        t = int(np.argmin(np.abs(y - 0.5)))
        for v in (1.0, 0.0):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[t] = hi2[t] = v
            found = self.search(lo2, hi2, limit, strict)
            if found is not None:
                return found
        return None

    def _fits(self, s: int, lo, hi) -> bool:
        for i, b in enumerate(self.bits):
            on = s >> b & 1
            if (on and hi[i] < 0.5) or (not on and lo[i] > 0.5):
                return False
        return True

    def solve(self, incumbent: int) -> tuple[int, bool]:
        """Optimal cover, then the lexicographically least one among optima.

        Returns (cover, canonical); a timeout in the tie pass keeps the optimum
        found so far with canonical False.
        """
        lo, hi = np.zeros(self.nt), np.ones(self.nt)
        best = self.best = incumbent
        while True:
            found = self.search(lo, hi, best.bit_count(), strict=True)
            if found is None:
                break
            best = self.best = found
        opt = best.bit_count()
        try:
            root = self.lp(lo, hi)
            reduced = root.lower.marginals[:self.nt]
            for i in range(self.nt):
                if root.x[i] < 1e-9 and root.fun + reduced[i] > opt + 1e-6:
                    hi[i] = 0.0
            for i, b in enumerate(self.bits):
                if hi[i] < 0.5:
                    continue
                if best >> b & 1:
                    lo[i] = 1.0
                    continue
                lo[i] = 1.0
                found = self.search(lo, hi, opt, strict=False)
                if found is None:
                    lo[i] = 0.0
                    hi[i] = 0.0
                else:
                    best = found
        except _Timeout:
            return best, False
        return best, True


def _bits(m: int):
    while m:
        low = m & -m
        yield low.bit_length() - 1
        m ^= low


# components with more demands than this go to the LP-bounded search
LP_COMPONENT_THRESHOLD = 40


def solve_exact(instance: CoverInstance, time_budget: float = 60.0, engine: str = "auto") -> Solution:
    """Exact minimum cover; `engine` is auto, combinatorial or lp."""
    if engine not in ("auto", "combinatorial", "lp"):
        raise ValueError(f"unknown engine {engine!r}")
    t0 = time.monotonic()
    deadline = t0 + time_budget
    enc = _Encoded(instance)
    forced, rest = _reduce(enc.demands, 0)
    total = forced
    status = OPTIMAL
    canonical = True
    nodes = 0
    for comp in _components(rest):
        incumbent = _greedy_bits(comp)
        use_lp = engine == "lp" or (engine == "auto" and len(comp) > LP_COMPONENT_THRESHOLD)
        if use_lp:
            lp = _LpBranchAndBound(comp, deadline)
            try:
                best, canon = lp.solve(incumbent)
                canonical = canonical and canon
            except _Timeout:
                best = lp.best
                status = TIME_LIMITED
                canonical = False
            nodes += lp.nodes
            total |= best
            continue
        bb = _BranchAndBound(comp, deadline)
        try:
            best = bb.solve(incumbent, ties=False)
        except _Timeout:
            best = bb.best
            status = TIME_LIMITED
            canonical = False
        else:
            # the optimum is proven; now settle ties among optimal sets
            bb2 = _BranchAndBound(comp, deadline)
            try:
                best = bb2.solve(best, ties=True)
            except _Timeout:
                best = bb2.best
                canonical = False
            nodes += bb2.nodes
        nodes += bb.nodes
        total |= best
    return Solution(_to_masks(instance, enc, total), total.bit_count(), status,
                    time.monotonic() - t0, nodes, canonical)


def solve_greedy(instance: CoverInstance) -> Solution:
    """Repeatedly commit the open demand whose cheapest region adds the fewest tiles.

    Ties go to the lowest frame, then object id, then camera id.
    """
    t0 = time.monotonic()
    enc = _Encoded(instance)
    order = []
    for d, alts in zip(instance.demands, enc.demands):
        cams = [_alt_camera(a) for a in d.alternatives]
        order.append((d.frame_index, d.object_id, list(zip(cams, alts))))
    s = 0
    open_ = [o for o in order if not _satisfied([a for _, a in o[2]], s)]
    while open_:
        best_key, best_alt = None, 0
        for frame, oid, alts in open_:
            for cam, a in alts:
                key = ((a & ~s).bit_count(), frame, oid, cam)
                if best_key is None or key < best_key:
                    best_key, best_alt = key, a
        s |= best_alt
        open_ = [o for o in open_ if not _satisfied([a for _, a in o[2]], s)]
    return Solution(_to_masks(instance, enc, s), s.bit_count(), GREEDY, time.monotonic() - t0)


def verify_cover(instance: CoverInstance, masks: Mapping[int, RoiMask]) -> list[ObjectDemand]:
    selected = {TileRef(c, j) for c, m in masks.items() for j in m.tiles}
    return [d for d in instance.demands if not any(a <= selected for a in d.alternatives)]


def solve(instance: CoverInstance, solver: str = "exact", time_budget: float = 60.0) -> Solution:
    if solver == "exact":
        return solve_exact(instance, time_budget)
    if solver == "greedy":
        return solve_greedy(instance)
    raise ValueError(f"unknown solver {solver!r}")


# -- instance dump -----------------------------------------------------------

def instance_to_json(instance: CoverInstance) -> dict:
    def tiles(ts):
        return [[t.camera_id, t.tile_index] for t in sorted(ts, key=lambda t: (t.camera_id, t.tile_index))]
    return {"universe": tiles(instance.universe),
            "demands": [{"frame": d.frame_index, "object": d.object_id,
                         "alternatives": [tiles(a) for a in d.alternatives]}
                        for d in instance.demands]}


def instance_from_json(doc: Mapping) -> CoverInstance:
    universe = tuple(TileRef(int(c), int(j)) for c, j in doc["universe"])
    demands = tuple(
        ObjectDemand(int(d["frame"]), int(d["object"]),
                     tuple(frozenset(TileRef(int(c), int(j)) for c, j in a) for a in d["alternatives"]))
        for d in doc["demands"])
    return CoverInstance(universe, demands)


def write_instance(path: str | Path, instance: CoverInstance) -> None:
    Path(path).write_text(json.dumps(instance_to_json(instance)) + "\n")


def read_instance(path: str | Path) -> CoverInstance:
    return instance_from_json(json.loads(Path(path).read_text()))
