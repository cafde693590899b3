"""Metaphase-to-karyogram toolkit: thresholding and object extraction,
overlap detection on skeletons, seeded watershed separation, score-based
class assignment, synthetic data, and a session-backed HTTP service."""

from .classify import (
    Assignment,
    DistributionResult,
    ExpectedCounts,
    FileScoreProvider,
    ScoreMatrix,
    ToyGeometricProvider,
    argmax_assign,
    distribute,
    expected_counts,
    score_units,
)
from .config import PipelineConfig
from .errors import (
    ConflictError,
    DanglingIntersectionError,
    DecodeError,
    DegenerateHistogramError,
    InvalidArgumentError,
    KaryosegError,
    LayoutFailureError,
    MissingScoreError,
    NotFoundError,
    UnfillableGapError,
)
from .filters import (
    canny_edges,
    median_blur,
    morphological_gradient,
    morphology,
    otsu_threshold,
)
from .overlap import (
    BranchPoint,
    Skeleton,
    analyze_crop,
    classify_crop,
    crossing_number,
    detect_intersections,
    prune_spurs,
    skeletonize,
)
from .raster import BinaryMask, GrayImage, Kernel, decode_gray, encode_png, load_gray, save_gray
from .segmentation import (
    Contour,
    CropRecord,
    ExtractionResult,
    RotatedRect,
    extract_objects,
    filter_contours,
    find_contours,
    label_components,
    min_area_rect,
)
from .session import Session, load_session, run_pipeline, session_id_for
from .synth import (
    GroundTruth,
    GroupSpec,
    ObjectSpec,
    SynthSpec,
    class_geometry,
    class_template,
    generate,
    metaphase_spec,
    pair_crossing_spec,
    write_ground_truth,
)
from .watershed import (
    Seed,
    SeedSet,
    SegmentMap,
    SeparatedChromosome,
    baseline_gap_fill,
    separate_method1,
    separate_method2,
    watershed,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BinaryMask",
    "BranchPoint",
    "ConflictError",
    "Contour",
    "CropRecord",
    "DanglingIntersectionError",
    "DecodeError",
    "DegenerateHistogramError",
    "DistributionResult",
    "ExpectedCounts",
    "ExtractionResult",
    "FileScoreProvider",
    "GrayImage",
    "GroundTruth",
    "GroupSpec",
    "InvalidArgumentError",
    "KaryosegError",
    "Kernel",
    "LayoutFailureError",
    "MissingScoreError",
    "NotFoundError",
    "ObjectSpec",
    "PipelineConfig",
    "RotatedRect",
    "ScoreMatrix",
    "Seed",
    "SeedSet",
    "SegmentMap",
    "SeparatedChromosome",
    "Session",
    "Skeleton",
    "SynthSpec",
    "ToyGeometricProvider",
    "UnfillableGapError",
    "analyze_crop",
    "argmax_assign",
    "baseline_gap_fill",
    "canny_edges",
    "class_geometry",
    "class_template",
    "classify_crop",
    "crossing_number",
    "decode_gray",
    "detect_intersections",
    "distribute",
    "encode_png",
    "expected_counts",
    "extract_objects",
    "filter_contours",
    "find_contours",
    "generate",
    "label_components",
    "load_gray",
    "load_session",
    "median_blur",
    "metaphase_spec",
    "min_area_rect",
    "morphological_gradient",
    "morphology",
    "otsu_threshold",
    "pair_crossing_spec",
    "prune_spurs",
    "run_pipeline",
    "save_gray",
    "score_units",
    "separate_method1",
    "separate_method2",
    "session_id_for",
    "skeletonize",
    "watershed",
    "write_ground_truth",
]
