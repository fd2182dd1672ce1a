from .compression import (
    CalibrationError,
    CompressionModel,
    NetConfig,
    calibrate_compression,
    calibrate_reference,
    estimate_segment_size,
    modeled_inference_hz,
)
from .evaluation import FilterEfficacy, clean_record_keys, filter_efficacy, record_key
from .geometry import Homography, ProjectionError, homography_from_points, project_ground_to_camera
from .replay import ConsistencyError, ReplayReport, full_frame_baseline, replay_evaluate
from .scene import (
    CameraSetup,
    Footprint,
    InjectedError,
    Lane,
    SceneConfig,
    SceneConfigError,
    demo_scene_config,
    generate_scene,
    measured_error_shares,
    overlap_fraction,
    reference_error_shares,
    tune_error_rates,
)

__all__ = [
    "CalibrationError", "CompressionModel", "NetConfig", "calibrate_compression", "calibrate_reference",
    "estimate_segment_size", "modeled_inference_hz", "FilterEfficacy", "clean_record_keys",
    "filter_efficacy", "record_key", "Homography", "ProjectionError",
    "homography_from_points", "project_ground_to_camera", "ConsistencyError", "ReplayReport",
    "full_frame_baseline", "replay_evaluate", "CameraSetup", "Footprint", "InjectedError", "Lane",
    "SceneConfig", "SceneConfigError", "demo_scene_config", "generate_scene", "overlap_fraction",
    "measured_error_shares", "reference_error_shares", "tune_error_rates",
]
