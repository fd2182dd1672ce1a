import pytest

from camroi.association import (
    DetectionRecord,
    Trace,
    TraceError,
    build_lookup_table,
    dumps_trace,
    label_pairwise,
    loads_trace,
)
from camroi.simulate.scene import demo_scene_config, generate_scene
from camroi.tiling import BBox, FrameSpec

from conftest import TOY_REGIONS, box_for_tiles, toy_frames


def test_toy_lookup_table(fig2_trace):
    table = build_lookup_table(fig2_trace, fig2_trace.grids())
    row = table.objects(0)
    assert sorted(row) == list(range(1, 8))
    for oid, regions in TOY_REGIONS.items():
        assert row[oid] == [(c, frozenset(t)) for c, t in regions]
    assert table.entry_count() == 8


def test_empty_trace_gives_empty_table():
    trace = Trace.build(10.0, [], toy_frames())
    assert len(build_lookup_table(trace, trace.grids())) == 0


def test_duplicate_reid_in_one_camera_is_split():
    frames = toy_frames()
    recs = [DetectionRecord(1, 0, box_for_tiles({1}), 5, 1), DetectionRecord(1, 0, box_for_tiles({24}), 5, 2),
            DetectionRecord(2, 0, box_for_tiles({1}), 5, 1)]
    trace = Trace.build(10.0, recs, frames)
    table = build_lookup_table(trace, trace.grids())
    regions = sorted(table.objects(0).values())
    assert len(regions) == 3
    assert all(len(r) == 1 for r in regions)


def test_toy_labels(fig2_trace):
    c = label_pairwise(fig2_trace, 1, 2)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 3)
    c = label_pairwise(fig2_trace, 2, 1)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 3)


def test_label_taxonomy():
    frames = toy_frames()
    recs = [
        # gt 1 seen by both, same reid: tp
        DetectionRecord(1, 0, box_for_tiles({1}), 1, 1), DetectionRecord(2, 0, box_for_tiles({1}), 1, 1),
        # gt 2 seen by both, split ids: fn
        DetectionRecord(1, 0, box_for_tiles({2}), 2, 2), DetectionRecord(2, 0, box_for_tiles({2}), 20, 2),
        # gt 3 only in camera 1 but shares an id with gt 4 in camera 2: fp
        DetectionRecord(1, 0, box_for_tiles({3}), 4, 3), DetectionRecord(2, 0, box_for_tiles({4}), 4, 4),
        # gt 5 only in camera 1: tn
        DetectionRecord(1, 0, box_for_tiles({5}), 5, 5),
    ]
    c = label_pairwise(Trace.build(10.0, recs, frames), 1, 2)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)


def test_source_without_detections():
    recs = [DetectionRecord(2, 0, box_for_tiles({1}), 1, 1)]
    c = label_pairwise(Trace.build(10.0, recs, toy_frames()), 1, 2)
    assert c.total == 0


def test_labels_need_ground_truth():
    recs = [DetectionRecord(1, 0, box_for_tiles({1}), 1)]
    with pytest.raises(TraceError):
        label_pairwise(Trace.build(10.0, recs, toy_frames()), 1, 2)


def test_perfect_reid_overlap_objects_have_two_regions():
    cfg = demo_scene_config(duration_frames=60, object_count=20)
    trace, errors = generate_scene(cfg)
    assert errors == []
    table = build_lookup_table(trace, trace.grids())
    for frame, recs in trace.by_frame().items():
        cams = {}
        for r in recs:
            cams.setdefault(r.gt_id, set()).add(r.camera_id)
        row = table.objects(frame)
        for gt, cs in cams.items():
            assert len(row[gt]) == len(cs)


def test_split_errors_show_up_as_fn():
    base = demo_scene_config(duration_frames=150, object_count=30)
    clean, _ = generate_scene(base)
    trace, errors = generate_scene(base.with_error_rates({(1, 2): (0.0, 0.3)}))
    k = sum(1 for e in errors if e.kind == "fn")
    assert k > 0
    assert label_pairwise(clean, 1, 2).fn == 0
    assert label_pairwise(trace, 1, 2).fn == k


def test_trace_round_trip(fig2_trace):
    assert loads_trace(dumps_trace(fig2_trace)) == fig2_trace


def test_malformed_line_names_line_number(fig2_trace):
    lines = dumps_trace(fig2_trace).splitlines()
    lines[3] = '{"camera": 1, "frame": 0}'
    with pytest.raises(TraceError, match="line 4"):
        loads_trace("\n".join(lines))


def test_unknown_camera_rejected(fig2_trace):
    text = dumps_trace(fig2_trace) + '{"camera": 9, "frame": 0, "bbox": [1, 1, 2, 2], "reid": 1, "gt": 1}\n'
    with pytest.raises(TraceError, match="unknown camera"):
        loads_trace(text)


def test_split_keeps_every_record():
    recs = [DetectionRecord(1, f, BBox(1, 1, 5, 5), 1, 1) for f in range(9)]
    trace = Trace.build(10.0, recs, [FrameSpec(1, 64, 64)])
    a, b = trace.split(1 / 3)
    assert a.window == (0, 2) and b.window == (3, 8)
    assert len(a.records) + len(b.records) == 9
