import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camroi.association import DetectionRecord, build_lookup_table, label_pairwise
from camroi.grouping import Grouping, Rect, group_tiles, per_tile_grouping
from camroi.optimizer import build_cover_instance, solve_exact
from camroi.simulate import (
    CalibrationError,
    ConsistencyError,
    Footprint,
    Homography,
    Lane,
    NetConfig,
    ProjectionError,
    SceneConfig,
    SceneConfigError,
    calibrate_compression,
    calibrate_reference,
    demo_scene_config,
    estimate_segment_size,
    full_frame_baseline,
    generate_scene,
    homography_from_points,
    measured_error_shares,
    modeled_inference_hz,
    overlap_fraction,
    project_ground_to_camera,
    reference_error_shares,
    replay_evaluate,
    tune_error_rates,
)
from camroi.simulate.compression import duration_factor, split_measurements
from camroi.simulate.scene import camera_from_quad, read_error_log, write_error_log
from camroi.tiling import FrameSpec, RoiMask, build_grid, full_mask

# -- geometry ----------------------------------------------------------------


def test_identity_projection():
    assert project_ground_to_camera(Homography(np.eye(3)), (2.5, -1.0)) == (2.5, -1.0)


def test_scaling_projection():
    assert project_ground_to_camera(Homography(np.diag([2.0, 2.0, 1.0])), (3, 4)) == (6, 8)


def test_singular_homography_rejected():
    with pytest.raises(ProjectionError):
        Homography(np.zeros((3, 3)))


def test_point_at_infinity():
    h = Homography(np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, 0.0001]]))
    with pytest.raises(ProjectionError):
        project_ground_to_camera(h, (-0.0001, 0.0))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), x=st.floats(-50, 50), y=st.floats(-50, 50))
def test_projection_round_trip(seed, x, y):
    rng = np.random.default_rng(seed)
    m = np.eye(3) + rng.normal(0, 0.3, (3, 3))
    if abs(np.linalg.det(m)) < 1e-3:
        return
    h = Homography(m)
    try:
        u = project_ground_to_camera(h, (x, y))
        back = project_ground_to_camera(h.inverse(), u)
    except ProjectionError:
        return
    scale = max(1.0, abs(x), abs(y))
    assert back == pytest.approx((x, y), abs=1e-6 * scale)


def test_four_point_homography():
    src = [[0, 0], [10, 0], [10, 5], [0, 5]]
    dst = [[100, 50], [900, 80], [850, 600], [120, 640]]
    h = homography_from_points(src, dst)
    for s, d in zip(src, dst):
        assert project_ground_to_camera(h, s) == pytest.approx(tuple(d))


# -- scene -------------------------------------------------------------------


def _two_camera_static(tmp_rates=None):
    frames = [FrameSpec(1, 640, 480), FrameSpec(2, 640, 480)]
    cams = (camera_from_quad(frames[0], [[-10, 10], [10, 10], [10, -10], [-10, -10]]),
            camera_from_quad(frames[1], [[0, 10], [20, 10], [20, -10], [0, -10]]))
    lane = Lane(((4.0, 0.0), (4.001, 0.0)), 1e-6)      # a parked object in the shared view
    return SceneConfig(cams, (lane,), 1, 30, 10.0, Footprint(), tmp_rates or {}, seed=3)


def test_no_objects_no_records():
    trace, errors = generate_scene(demo_scene_config(duration_frames=20, object_count=0))
    assert trace.records == () and errors == []
    assert trace.frame_count == 20


def test_static_object_in_overlap():
    cfg = _two_camera_static()
    trace, _ = generate_scene(cfg)
    # the spawn time is random, so only count frames where the object exists
    frames = trace.by_frame()
    assert frames
    for recs in frames.values():
        assert sorted(r.camera_id for r in recs) == [1, 2]
        assert len({r.reid_id for r in recs}) == 1


def test_generation_is_deterministic():
    cfg = demo_scene_config(duration_frames=100, object_count=20).with_error_rates({(1, 2): (0.2, 0.2)})
    assert generate_scene(cfg) == generate_scene(cfg)


def test_error_log_round_trip(tmp_path):
    cfg = demo_scene_config(duration_frames=100, object_count=20).with_error_rates({(1, 2): (0.3, 0.3)})
    _, errors = generate_scene(cfg)
    write_error_log(tmp_path / "e.jsonl", errors)
    assert read_error_log(tmp_path / "e.jsonl") == errors


def test_error_log_matches_labels():
    base = demo_scene_config(duration_frames=200, object_count=30)
    trace, errors = generate_scene(base.with_error_rates({(2, 1): (0.4, 0.0)}))
    fps = [e for e in errors if e.kind == "fp"]
    assert fps
    assert label_pairwise(trace, 2, 1).fp == len(fps)


def test_scene_config_validation():
    cfg = demo_scene_config(duration_frames=10, object_count=1)
    with pytest.raises(SceneConfigError):
        cfg.with_error_rates({(1, 9): (0.1, 0.1)})
    with pytest.raises(SceneConfigError):
        cfg.with_error_rates({(1, 2): (1.5, 0.1)})
    with pytest.raises(SceneConfigError):
        SceneConfig.from_dict({"cameras": [{"frame": {"camera_id": 1, "width_px": 10, "height_px": 10},
                                             "homography": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}],
                               "object_count": 0, "duration_frames": 1})


def test_scene_config_round_trip():
    cfg = demo_scene_config(duration_frames=50, object_count=5).with_error_rates({(1, 2): (0.1, 0.2)})
    again = SceneConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert generate_scene(again)[0] == generate_scene(cfg)[0]


def test_demo_scene_has_overlap():
    trace, _ = generate_scene(demo_scene_config(duration_frames=300, object_count=40))
    assert overlap_fraction(trace) >= 0.3
    assert trace.camera_ids() == [1, 2, 3, 4, 5]


def test_tuned_rates_hit_hardest_pair_shares():
    cfg = tune_error_rates(demo_scene_config(duration_frames=600, object_count=60), reference_error_shares(),
                           rounds=4)
    trace, _ = generate_scene(cfg)
    fp_share, fn_share = measured_error_shares(trace)[(1, 2)]
    assert fp_share == pytest.approx(253 / 588, rel=0.2)
    assert fn_share == pytest.approx(263 / 598, rel=0.2)


def test_reference_shares_respect_caps():
    shares = reference_error_shares()
    assert shares[(1, 2)] == pytest.approx((0.43, 263 / 598))
    assert all(fp <= 0.43 and fn <= 0.44 for fp, fn in shares.values())


# -- compression -------------------------------------------------------------


def test_reference_calibration_first_camera():
    model = calibrate_reference(1)
    f_mb = model.per_group_overhead_bytes_per_segment * 180 / 1e6
    assert f_mb == pytest.approx((97.3 - 82.7) / 63, rel=0.25)
    assert model.fit_residual <= 0.05


def test_two_point_fit_is_exact():
    model = calibrate_compression([(1, 1000.0), (2, 1250.0)], frame_pixels=100.0)
    assert model.per_group_overhead_bytes_per_segment == pytest.approx(250.0)
    assert model.payload_bytes_per_pixel_per_segment == pytest.approx(7.5)
    assert model.fit_residual == pytest.approx(0.0, abs=1e-12)


def test_plant_and_recover():
    rng = np.random.default_rng(11)
    f_true, c_true, pixels, seconds = 40_000.0, 0.25, 1920 * 1080, 180.0
    groups = [1, 4, 8, 16, 32, 64]
    meas = [(g, (c_true * pixels + f_true * g) * seconds * (1 + rng.normal(0, 0.01))) for g in groups]
    model = calibrate_compression(meas, pixels, seconds)
    assert model.per_group_overhead_bytes_per_segment == pytest.approx(f_true, rel=0.05)
    assert model.payload_bytes_per_pixel_per_segment == pytest.approx(c_true, rel=0.05)


def test_calibration_needs_two_group_counts():
    with pytest.raises(CalibrationError):
        calibrate_compression([(4, 1.0), (4, 2.0)], 100.0)


def test_split_measurements_units():
    assert split_measurements(1)[0] == (1, 82.7e6)


def test_empty_grouping_costs_nothing():
    g = build_grid(FrameSpec(1, 1920, 1080))
    assert estimate_segment_size(calibrate_reference(1), Grouping(1, ()), g, NetConfig()) == 0.0


def test_split_into_64_costs_63_overheads():
    frame = FrameSpec(1, 1024, 1024, 128)
    g = build_grid(frame)
    model = calibrate_reference(1)
    net = NetConfig()
    whole = Grouping(1, (Rect(1, 0, 0, 8, 8),))
    split = per_tile_grouping(full_mask(g), g)
    assert len(split.rects) == 64
    diff = estimate_segment_size(model, split, g, net) - estimate_segment_size(model, whole, g, net)
    assert diff == pytest.approx(63 * model.per_group_overhead_bytes_per_segment)


@pytest.mark.parametrize("seg", [0.1, 0.5, 1.0, 2.0, 4.0])
def test_longer_segments_compress_better(seg):
    g = build_grid(FrameSpec(1, 1920, 1080))
    model = calibrate_reference(1)
    grouping = group_tiles(full_mask(g), g)
    rate = [estimate_segment_size(model, grouping, g, NetConfig(segment_len_s=s)) / s for s in (seg, 2 * seg)]
    assert rate[1] < rate[0]
    assert duration_factor(1.0, 0.5) == 1.0


def test_segment_must_hold_whole_frames():
    with pytest.raises(ValueError):
        NetConfig(segment_len_s=0.25, frame_rate_hz=10.0)


def test_inference_model():
    net = NetConfig()
    assert modeled_inference_hz(net, 1.0) == net.inference_base_hz
    assert modeled_inference_hz(net, 0.2) >= 1.2 * net.inference_base_hz
    assert modeled_inference_hz(net, 0.0) == net.inference_base_hz / net.gather_scatter_overhead


# -- replay ------------------------------------------------------------------


def _small_scene(errors=None):
    cfg = demo_scene_config(duration_frames=150, object_count=25)
    if errors:
        cfg = cfg.with_error_rates(errors)
    return generate_scene(cfg)[0]


def test_full_frame_replay():
    trace = _small_scene()
    model, net = calibrate_reference(1), NetConfig()
    report = full_frame_baseline(trace, model, net)
    assert report.accuracy == 1.0
    grids = trace.grids()
    expected = sum(estimate_segment_size(model, Grouping(c, (Rect(c, 0, 0, g.cols, g.rows),)), g, net)
                   for c, g in grids.items()) * 8
    assert report.total_bandwidth_bps == pytest.approx(expected)
    assert report.total_bandwidth_bps == pytest.approx(sum(report.modeled_bandwidth_bps.values()))


def _solve(trace):
    grids = trace.grids()
    sol = solve_exact(build_cover_instance(build_lookup_table(trace, grids), grids))
    masks = {c: sol.masks.get(c, RoiMask(c)) for c in grids}
    return masks, {c: group_tiles(masks[c], grids[c]) for c in grids}


@pytest.mark.parametrize("seed", range(5))
def test_coverage_theorem(seed):
    cfg = demo_scene_config(seed=seed, duration_frames=90, object_count=25)
    trace, _ = generate_scene(cfg)
    profile, _ = trace.split(0.5)
    masks, groups = _solve(profile)
    report = replay_evaluate(profile, masks, groups, calibrate_reference(1), NetConfig())
    assert report.accuracy == 1.0


def test_accuracy_ignores_reid_labels():
    trace = _small_scene()
    masks, groups = _solve(trace.split(0.3)[0])
    relabeled = trace.with_records(DetectionRecord(r.camera_id, r.frame_index, r.box, 7, r.gt_id)
                                   for r in trace.records)
    model, net = calibrate_reference(1), NetConfig()
    a = replay_evaluate(trace, masks, groups, model, net)
    b = replay_evaluate(relabeled, masks, groups, model, net)
    assert a.to_dict() == b.to_dict()


def test_bandwidth_grows_with_mask():
    trace = _small_scene()
    grids = trace.grids()
    model, net = calibrate_reference(1), NetConfig()
    masks, groups = _solve(trace.split(0.3)[0])
    before = replay_evaluate(trace, masks, groups, model, net)
    bigger = dict(masks)
    c = 1
    extra = next(j for j in range(1, grids[c].tile_count + 1) if j not in masks[c].tiles)
    bigger[c] = RoiMask(c, masks[c].tiles | {extra})
    after = replay_evaluate(trace, bigger, {k: group_tiles(bigger[k], grids[k]) for k in grids}, model, net)
    assert after.modeled_bandwidth_bps[c] >= before.modeled_bandwidth_bps[c]


def test_grouping_never_costs_more():
    rng = np.random.default_rng(12)
    g = build_grid(FrameSpec(1, 1920, 1080))
    model, net = calibrate_reference(1), NetConfig()
    for _ in range(50):
        mask = RoiMask(1, {j for j in range(1, g.tile_count + 1) if rng.random() < 0.4})
        grouped = group_tiles(mask, g)
        single = per_tile_grouping(mask, g)
        diff = estimate_segment_size(model, single, g, net) - estimate_segment_size(model, grouped, g, net)
        f = model.per_group_overhead_bytes_per_segment
        assert diff == pytest.approx(f * (len(single.rects) - len(grouped.rects)))


def test_replay_rejects_mismatched_masks():
    trace = _small_scene()
    grids = trace.grids()
    masks = {c: full_mask(g) for c, g in grids.items() if c != 5}
    groups = {c: group_tiles(m, grids[c]) for c, m in masks.items()}
    with pytest.raises(ConsistencyError):
        replay_evaluate(trace, masks, groups, calibrate_reference(1), NetConfig())


def test_latency_formula():
    trace = _small_scene()
    model, net = calibrate_reference(1), NetConfig()
    r = full_frame_baseline(trace, model, net)
    bits = sum(r.segment_bytes.values()) * 8
    expected = net.segment_len_s + bits / net.bandwidth_bps + net.rtt_s + 10 * 5 / r.modeled_inference_hz
    assert r.modeled_latency_s == pytest.approx(expected)
