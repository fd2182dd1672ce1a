import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camroi.association import AssociationTable, build_lookup_table
from camroi.optimizer import (
    GREEDY,
    OPTIMAL,
    CoverInstance,
    ObjectDemand,
    build_cover_instance,
    read_instance,
    solve_exact,
    solve_greedy,
    verify_cover,
    write_instance,
)
from camroi.tiling import RoiMask, TileRef, TilingError

from conftest import TOY_SOLUTION, brute_force_min, random_instance


def _toy_instance(trace):
    grids = trace.grids()
    return build_cover_instance(build_lookup_table(trace, grids), grids)


def _tiles(sol):
    return {c: set(m.tiles) for c, m in sol.masks.items() if m.tiles}


def test_toy_instance_shape(fig2_trace):
    inst = _toy_instance(fig2_trace)
    assert len(inst.demands) == 7
    assert [len(d.alternatives) for d in inst.demands] == [2, 1, 1, 1, 1, 1, 1]
    assert len(inst.universe) == 48


def test_empty_table():
    inst = build_cover_instance(AssociationTable(), {})
    assert inst.demands == () and inst.universe == ()
    sol = solve_exact(inst)
    assert sol.objective == 0 and sol.status == OPTIMAL


def test_dominated_alternative_pruned(fig2_trace):
    grids = fig2_trace.grids()
    table = AssociationTable({0: {1: [(1, frozenset({1})), (1, frozenset({1, 2}))]}})
    inst = build_cover_instance(table, grids)
    assert inst.demands[0].alternatives == (frozenset({TileRef(1, 1)}),)
    # same tiles on different cameras are distinct, so nothing is pruned
    table = AssociationTable({0: {1: [(1, frozenset({1, 2})), (2, frozenset({1}))]}})
    assert len(build_cover_instance(table, grids).demands[0].alternatives) == 2


def test_duplicate_demands_dropped(fig2_trace):
    grids = fig2_trace.grids()
    region = [(1, frozenset({5}))]
    table = AssociationTable({0: {1: region}, 1: {1: region}, 2: {3: region}})
    assert len(build_cover_instance(table, grids).demands) == 1


def test_out_of_grid_region_rejected(fig2_trace):
    table = AssociationTable({0: {1: [(1, frozenset({99}))]}})
    with pytest.raises(TilingError):
        build_cover_instance(table, fig2_trace.grids())


def test_toy_exact_solution(fig2_trace):
    inst = _toy_instance(fig2_trace)
    sol = solve_exact(inst)
    assert sol.status == OPTIMAL and sol.canonical
    assert sol.objective == 12
    assert _tiles(sol) == TOY_SOLUTION
    assert verify_cover(inst, sol.masks) == []


def test_toy_solution_from_paper_is_feasible(fig2_trace):
    inst = _toy_instance(fig2_trace)
    masks = {c: RoiMask(c, t) for c, t in TOY_SOLUTION.items()}
    assert verify_cover(inst, masks) == []


def test_toy_greedy(fig2_trace):
    inst = _toy_instance(fig2_trace)
    sol = solve_greedy(inst)
    assert sol.status == GREEDY
    assert sol.objective >= 12
    assert verify_cover(inst, sol.masks) == []


def test_forced_tiles_only():
    u = tuple(TileRef(1, j) for j in range(1, 9))
    demands = (ObjectDemand(0, 0, (frozenset(u[:3]),)), ObjectDemand(0, 1, (frozenset(u[2:5]),)))
    sol = solve_exact(CoverInstance(u, demands))
    assert sol.objective == 5
    assert _tiles(sol) == {1: {1, 2, 3, 4, 5}}


def test_empty_masks_violate_everything(fig2_trace):
    inst = _toy_instance(fig2_trace)
    assert verify_cover(inst, {}) == list(inst.demands)


def test_greedy_on_empty_instance():
    sol = solve_greedy(CoverInstance((), ()))
    assert sol.objective == 0 and sol.masks == {}


def test_alternatives_outside_universe_rejected():
    with pytest.raises(ValueError):
        CoverInstance((TileRef(1, 1),), (ObjectDemand(0, 0, (frozenset({TileRef(1, 2)}),)),))


def test_exact_matches_brute_force():
    rng = random.Random(1234)
    for _ in range(200):
        inst = random_instance(rng)
        sol = solve_exact(inst)
        assert sol.status == OPTIMAL
        assert sol.objective == brute_force_min(inst)
        assert verify_cover(inst, sol.masks) == []


def test_engines_agree():
    rng = random.Random(99)
    for _ in range(150):
        inst = random_instance(rng, max_tiles=30, max_demands=25, max_alts=3, cameras=3)
        a = solve_exact(inst, engine="combinatorial")
        b = solve_exact(inst, engine="lp")
        assert a.objective == b.objective
        assert a.tiles() == b.tiles()


def test_greedy_bounds():
    rng = random.Random(7)
    within = 0
    for _ in range(500):
        inst = random_instance(rng)
        exact = solve_exact(inst).objective
        greedy = solve_greedy(inst)
        assert verify_cover(inst, greedy.masks) == []
        assert greedy.objective >= exact
        within += greedy.objective <= 2 * exact
    assert within >= 475


def test_exact_solution_is_minimal():
    rng = random.Random(5)
    for _ in range(100):
        inst = random_instance(rng)
        sol = solve_exact(inst)
        for c, m in sol.masks.items():
            for j in m.tiles:
                smaller = dict(sol.masks)
                smaller[c] = RoiMask(c, m.tiles - {j})
                assert verify_cover(inst, smaller)


def test_tie_break_prefers_lower_tiles():
    u = tuple(TileRef(c, j) for c in (1, 2) for j in (1, 2))
    d = ObjectDemand(0, 0, (frozenset({TileRef(2, 1)}), frozenset({TileRef(1, 2)})))
    sol = solve_exact(CoverInstance(u, (d,)))
    assert sol.tiles() == {TileRef(1, 2)}


def test_instance_file_round_trip(tmp_path, fig2_trace):
    inst = _toy_instance(fig2_trace)
    write_instance(tmp_path / "i.json", inst)
    assert read_instance(tmp_path / "i.json") == inst


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_exact_never_worse_than_greedy(seed):
    inst = random_instance(random.Random(seed), max_tiles=40, max_demands=30, cameras=2)
    exact = solve_exact(inst)
    assert verify_cover(inst, exact.masks) == []
    assert exact.objective <= solve_greedy(inst).objective
    assert exact.objective == sum(len(m.tiles) for m in exact.masks.values())


def test_time_limit_still_feasible():
    rng = random.Random(3)
    inst = random_instance(rng, max_tiles=120, max_demands=200, max_alts=3, cameras=4)
    sol = solve_exact(inst, time_budget=1e-4)
    assert verify_cover(inst, sol.masks) == []
