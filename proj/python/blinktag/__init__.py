"""LED blink marker codec, rolling-shutter simulator and detector."""

from ._core import (
    BlinkAssignment,
    CameraModel,
    DecodeResult,
    DetectionResult,
    DetectorConfig,
    Dictionary,
    MarkerMap,
    MarkerMapEntry,
    NoiseModel,
    PoseEstimate,
    RecognitionError,
    ScenePose,
    SquareWave,
    Threshold,
    assign_frequencies,
    band_width,
    decode,
    detect,
    encode,
    estimate_pose,
    generate_dictionary,
    hamming,
    localize,
    otsu_level,
    project_corners,
    read_pgm,
    render_frame,
    rotate,
    run_sweep_json,
    write_pgm,
)

__all__ = [
    "BlinkAssignment",
    "CameraModel",
    "DecodeResult",
    "DetectionResult",
    "DetectorConfig",
    "Dictionary",
    "MarkerMap",
    "MarkerMapEntry",
    "NoiseModel",
    "PoseEstimate",
    "RecognitionError",
    "ScenePose",
    "SquareWave",
    "Threshold",
    "assign_frequencies",
    "band_width",
    "decode",
    "detect",
    "encode",
    "estimate_pose",
    "generate_dictionary",
    "hamming",
    "localize",
    "otsu_level",
    "project_corners",
    "read_pgm",
    "render_frame",
    "rotate",
    "run_sweep_json",
    "write_pgm",
]
