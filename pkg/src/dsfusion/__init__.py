"""Dempster-Shafer multi-classifier fusion with credibility-weighted evidence."""

from .core import (
    Frame,
    FrameMismatchError,
    MassFunction,
    TotalConflictError,
    belief,
    combine,
    combine_many,
    conflict_k,
    plausibility,
)
from .evidence import (
    BodyOfEvidence,
    ConfusionMatrix,
    ScoreMatrix,
    WeightScheme,
    WeightVector,
    accuracy,
    build_boe,
    build_weight,
    precision_per_class,
    recall_per_class,
    scalar_dempster,
)
from .fusion import Combination, FusionResult, PipelineConfig, fuse, fuse_dataset
from .metrics import (
    DisagreementConfig,
    EvidenceDistanceWeighting,
    bjs_divergence,
    boe_centers,
    deng_entropy,
    disagreement_degree,
    evidence_distance,
    shannon_entropy,
)

__version__ = "0.1.0"
