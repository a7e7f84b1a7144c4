"""Single-shot anomaly detection on 1-D spectrum captures (RxMER per sub-carrier)."""

from ._ad1d import (
    Annotation,
    ConfigError,
    Detection,
    DetectorConfig,
    InputError,
    Model,
    NmsMode,
    NumericError,
    Sample,
    binning_min_downsample,
    compute_anchors,
    generate_synthetic,
    iou_1d,
    load_dataset,
    prepare_input,
    save_dataset,
    train,
)

CLASS_NAMES = ("lte_ingress", "wave", "roll_off", "suck_out", "spike")

__all__ = [
    "Annotation",
    "CLASS_NAMES",
    "ConfigError",
    "Detection",
    "DetectorConfig",
    "InputError",
    "Model",
    "NmsMode",
    "NumericError",
    "Sample",
    "binning_min_downsample",
    "compute_anchors",
    "generate_synthetic",
    "iou_1d",
    "load_dataset",
    "prepare_input",
    "save_dataset",
    "train",
]
