"""Circle representation for round-object detection.

Detections are circles (center, radius, score); the library provides the
exact circle-overlap metric, Gaussian heatmap target encoding at an output
stride, the focal/L1 loss stack with analytic gradients, peak-based
decoding, a circle-aware evaluation suite (AP family, FROC, rotation
consistency, mask-detection ratio, displacement study), deterministic
synthetic scenes, and a reference trainer that fits output maps directly.
"""

from .decode import DecodeConfig, Peak, decode_circles, extract_peaks
from .encode import (
    EncodeError,
    EncoderConfig,
    FixedSigma,
    HeatmapTargets,
    Keypoint,
    SizeAdaptiveSigma,
    encode,
    gaussian_sigma,
)
from .evaluation import (
    DisplacementRow,
    EvalReport,
    FrocPoint,
    MatchConfig,
    Matching,
    MdtReport,
    average_precision,
    displacement_study,
    evaluate,
    froc,
    mask_detection_ratio,
    match_detections,
    rotation_consistency,
    rotation_consistency_pooled,
)
from .geometry import (
    Box,
    Circle,
    Point2,
    PolygonMask,
    box_iou,
    circle_nms,
    circle_to_tight_box,
    ciou,
    ciou_monte_carlo,
    polygon_area,
    rotate90,
)
from .losses import (
    LossReport,
    LossWeights,
    OutputMaps,
    focal_loss,
    offset_loss,
    radius_loss,
    squash,
    total_loss,
)
from .synth import (
    PerturbConfig,
    Scene,
    SceneConfig,
    SceneError,
    circle_polygon,
    generate_scene,
    perturb_detections,
)
from .trainer import (
    DivergenceError,
    FitConfig,
    FitResult,
    end_to_end_check,
    fit_maps,
    optimal_maps,
)

__version__ = "0.1.0"
