"""Training-free eye detection with complex symmetry filters, periocular and iris matching, and evaluation tools."""

__version__ = "0.1.0"

from .errors import (
    DataError,
    DegenerateCalibration,
    EmptyOverlap,
    FlatImage,
    ManifestError,
    NoEyeFound,
    ParameterError,
    SymeyeError,
    ZeroVector,
)
from .evalfusion import compute_eer, fuse_mean, generate_protocol, load_manifest, tanh_normalize
from .freqest import WidthCalibration, calibrate_width_polynomial, estimate_edge_width, local_frequency_map
from .imgcore import GrayImage, load_image, save_image
from .irismatch import Circle, EyeAnnotation, IrisCode, hamming_distance, iris_code
from .periocular import GaborBankSpec, build_gabor_bank, build_grid, chi2_distance, extract_template
from .pipeline import PipelineConfig, run_pipeline, scenario_detect
from .preprocess import adaptive_rank_filter, rank_filter_1d, resize_bicubic
from .symmetry import build_symmetry_filter, detect_eye, i20_response, orientation_field

__all__ = [
    "Circle",
    "DataError",
    "DegenerateCalibration",
    "EmptyOverlap",
    "EyeAnnotation",
    "FlatImage",
    "GaborBankSpec",
    "GrayImage",
    "IrisCode",
    "ManifestError",
    "NoEyeFound",
    "ParameterError",
    "PipelineConfig",
    "SymeyeError",
    "WidthCalibration",
    "ZeroVector",
    "adaptive_rank_filter",
    "build_gabor_bank",
    "build_grid",
    "build_symmetry_filter",
    "calibrate_width_polynomial",
    "chi2_distance",
    "compute_eer",
    "detect_eye",
    "estimate_edge_width",
    "extract_template",
    "fuse_mean",
    "generate_protocol",
    "hamming_distance",
    "i20_response",
    "iris_code",
    "load_image",
    "load_manifest",
    "local_frequency_map",
    "orientation_field",
    "rank_filter_1d",
    "resize_bicubic",
    "run_pipeline",
    "save_image",
    "scenario_detect",
    "tanh_normalize",
]
