"""Counterfactual explanations for image classifiers by segment removal.

Feed in an image, a segmentation, and any scoring function; get back the
smallest set of segments the search can find whose removal makes the
classifier change its mind — either to any other class (`sedc`) or to one
you name (`sedc_t`).

    >>> import cfseg
    >>> segmap = cfseg.segment(image, cfseg.Slic(n_segments=40))
    >>> outcome = cfseg.sedc(image, classifier, segmap)
    >>> outcome.explanation.segments
    (3, 17)
"""

from .core import (
    Image,
    SegmentMap,
    SegmentSet,
    predicted_class,
    segment_pixel_mask,
    segment_set,
    validate_pair,
)
from .errors import (
    BackendUnavailable,
    CfsegError,
    DimensionMismatch,
    EmptyFrontier,
    MalformedResponse,
    NonContiguousLabels,
    ScoreTimeout,
    SegmentIdOutOfRange,
    TargetEqualsPredicted,
)
from .perturbation import (
    SET_INDEPENDENT_STRATEGIES,
    Blur,
    ConstantColor,
    ImageMean,
    ImageMode,
    NeighborMean,
    RandomPixels,
    ReplacementStrategy,
    SegmentMean,
    blur_image,
    parse_replacement,
    remove_segments,
    replacement_from_spec,
    replacement_spec,
)
from .segmentation import (
    Grid,
    QuickShift,
    SegmentationParams,
    Slic,
    grid_segment,
    parse_segmentation,
    quickshift_segment,
    relabel_contiguous,
    segment,
    segmentation_from_spec,
    segmentation_spec,
    slic_segment,
)
from .fileio import (
    UnsupportedImage,
    boundary_overlay,
    explanation_render,
    load_image,
    load_label_png,
    load_mask_png,
    save_image,
    save_label_png,
    save_mask_png,
    save_segmap_sidecar,
)
from .classifiers import (
    BuiltinLinear,
    ClassifierHandle,
    ExternalProcess,
    LinearModel,
    build_classifier,
    score,
    score_after_removal,
)
from .search import (
    Explanation,
    Frontier,
    NotFoundInfo,
    SearchConfig,
    SearchOutcome,
    irreducibility_search,
    refine,
    sedc,
    sedc_t,
)
from .metrics import (
    BenchReport,
    StabilityReport,
    counterfactual_rate,
    jaccard_stability,
    run_bench,
    stability_report,
)
from .records import (
    RECORD_VERSION,
    ExplanationRecord,
    notfound_payload,
    parse_record,
    read_record,
    record_from_explanation,
    segment_sets_from_json,
    serialize_record,
    stats_payload,
    write_record,
)

__version__ = "0.1.0"

__all__ = [
    "Image",
    "SegmentMap",
    "SegmentSet",
    "predicted_class",
    "segment_pixel_mask",
    "segment_set",
    "validate_pair",
    "CfsegError",
    "DimensionMismatch",
    "NonContiguousLabels",
    "SegmentIdOutOfRange",
    "TargetEqualsPredicted",
    "EmptyFrontier",
    "BackendUnavailable",
    "MalformedResponse",
    "ScoreTimeout",
    "UnsupportedImage",
    "ConstantColor",
    "ImageMean",
    "ImageMode",
    "SegmentMean",
    "NeighborMean",
    "Blur",
    "RandomPixels",
    "ReplacementStrategy",
    "SET_INDEPENDENT_STRATEGIES",
    "blur_image",
    "remove_segments",
    "parse_replacement",
    "replacement_spec",
    "replacement_from_spec",
    "Grid",
    "Slic",
    "QuickShift",
    "SegmentationParams",
    "segment",
    "grid_segment",
    "slic_segment",
    "quickshift_segment",
    "relabel_contiguous",
    "parse_segmentation",
    "segmentation_spec",
    "segmentation_from_spec",
    "load_image",
    "save_image",
    "save_mask_png",
    "load_mask_png",
    "save_label_png",
    "load_label_png",
    "save_segmap_sidecar",
    "boundary_overlay",
    "explanation_render",
    "ClassifierHandle",
    "score",
    "LinearModel",
    "BuiltinLinear",
    "ExternalProcess",
    "build_classifier",
    "score_after_removal",
    "SearchConfig",
    "Explanation",
    "Frontier",
    "NotFoundInfo",
    "SearchOutcome",
    "sedc",
    "sedc_t",
    "irreducibility_search",
    "refine",
    "StabilityReport",
    "BenchReport",
    "jaccard_stability",
    "stability_report",
    "counterfactual_rate",
    "run_bench",
    "ExplanationRecord",
    "RECORD_VERSION",
    "notfound_payload",
    "stats_payload",
    "record_from_explanation",
    "serialize_record",
    "parse_record",
    "write_record",
    "read_record",
    "segment_sets_from_json",
    "__version__",
]
