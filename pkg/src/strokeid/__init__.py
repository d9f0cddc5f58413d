"""Fine-grained script identification for cropped text-line images.

Single-layer convolutional features learned with k-means over whitened
receptive fields, pooled into dense stroke-part descriptors and classified
with a (weighted) Naive Bayes Nearest Neighbor decision rule.
"""

from .encoder import (
    FilterBank,
    ZcaTransform,
    apply_zca,
    contrast_normalize,
    encode_line,
    encode_patch,
    encode_patches,
    fit_zca,
    learn_dictionary,
    spherical_kmeans,
    triangle_activation,
)
from .evaluation import (
    BBox,
    DetLine,
    GTLine,
    Metrics,
    cross_domain_report,
    iou,
    joint_eval,
    line_accuracy,
)
from .kdforest import KdForest
from .model_io import ModelFile, ModelFormatError, load_model, save_model
from .nbnn import (
    ClassEntry,
    I2CReport,
    IndexParams,
    TemplateStore,
    build_kdforest,
    build_store,
    classify,
    compute_weights,
    i2c_distance,
    nn_in_class,
)
from .pixelio import (
    ImageDecodeError,
    extract_strokeparts,
    load_image,
    resize_to_height,
    sample_random_subpatches,
    strokepart_count,
)
from .synth import SynthSpec, generate_corpus, generate_scene_corpus

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "ClassEntry",
    "DetLine",
    "FilterBank",
    "GTLine",
    "I2CReport",
    "ImageDecodeError",
    "IndexParams",
    "KdForest",
    "Metrics",
    "ModelFile",
    "ModelFormatError",
    "SynthSpec",
    "TemplateStore",
    "ZcaTransform",
    "apply_zca",
    "build_kdforest",
    "build_store",
    "classify",
    "compute_weights",
    "contrast_normalize",
    "cross_domain_report",
    "encode_line",
    "encode_patch",
    "encode_patches",
    "extract_strokeparts",
    "fit_zca",
    "generate_corpus",
    "generate_scene_corpus",
    "i2c_distance",
    "iou",
    "joint_eval",
    "learn_dictionary",
    "line_accuracy",
    "load_image",
    "load_model",
    "nn_in_class",
    "resize_to_height",
    "sample_random_subpatches",
    "save_model",
    "spherical_kmeans",
    "strokepart_count",
    "triangle_activation",
]
