"""ABCD dermoscopy feature quantification, dataset labeling and evolution tools."""

from .errors import (
    AbcdError,
    DegenerateDataError,
    DimensionError,
    DivergenceError,
    EmptyBackgroundError,
    InputError,
    NoLesionFound,
    TinyLesionError,
)
from .features import (
    DEFAULT_P6MM_PX,
    AbcdScores,
    BorderBreakdown,
    CalibrationParams,
    ColorBreakdown,
    LesionAnalysis,
    analyze_lesion,
    asymmetry_score,
    border_score,
    calibrate_p6mm,
    color_score,
    diameter_score,
    score_lesion,
)
from .imaging import (
    SegmentationResult,
    luminance,
    normalize_colors,
    reflect_mask,
    remove_hair,
    resize_image,
    segment_lesion,
)

__version__ = "0.1.0"

__all__ = [
    "AbcdError",
    "AbcdScores",
    "BorderBreakdown",
    "CalibrationParams",
    "ColorBreakdown",
    "DEFAULT_P6MM_PX",
    "DegenerateDataError",
    "DimensionError",
    "DivergenceError",
    "EmptyBackgroundError",
    "InputError",
    "LesionAnalysis",
    "NoLesionFound",
    "SegmentationResult",
    "TinyLesionError",
    "analyze_lesion",
    "asymmetry_score",
    "border_score",
    "calibrate_p6mm",
    "color_score",
    "diameter_score",
    "luminance",
    "normalize_colors",
    "reflect_mask",
    "remove_hair",
    "resize_image",
    "score_lesion",
    "segment_lesion",
]
