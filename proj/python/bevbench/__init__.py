"""Cross-view top-down semantic segmentation workbench."""

from bevbench._core import (  # noqa: F401
    FLOOR,
    NUM_CLASSES,
    PALETTE,
    UNKNOWN,
    WALL,
    AdaptConfig,
    BevbenchError,
    CorruptionSpec,
    GenConfig,
    SceneParams,
    Tape,
    Tensor,
    TrainConfig,
    adapt,
    add,
    baseline_predict,
    bce_with_logits,
    confusion,
    conv2d,
    dataset_size,
    evaluate,
    generate_dataset,
    leaky_relu,
    load_sample,
    matmul,
    mean_iou,
    mul,
    mul_scalar,
    per_class_iou,
    pixel_accuracy,
    predict_topdown,
    relu,
    softmax_channels,
    softmax_cross_entropy,
    sub,
    sum,
    train,
)

__all__ = [
    "FLOOR",
    "NUM_CLASSES",
    "PALETTE",
    "UNKNOWN",
    "WALL",
    "AdaptConfig",
    "BevbenchError",
    "CorruptionSpec",
    "GenConfig",
    "SceneParams",
    "Tape",
    "Tensor",
    "TrainConfig",
    "adapt",
    "add",
    "baseline_predict",
    "bce_with_logits",
    "confusion",
    "conv2d",
    "dataset_size",
    "evaluate",
    "generate_dataset",
    "leaky_relu",
    "load_sample",
    "matmul",
    "mean_iou",
    "mul",
    "mul_scalar",
    "per_class_iou",
    "pixel_accuracy",
    "predict_topdown",
    "relu",
    "softmax_channels",
    "softmax_cross_entropy",
    "sub",
    "sum",
    "train",
]
