"""Transductive label propagation for semi-supervised video object segmentation.

Given the annotated first frame of a video, every later frame is labeled by
propagating soft labels from a cached history of earlier frames through an
appearance-and-locality similarity graph.
"""

__version__ = "0.1.0"

from .ablation import run_ablation
from .config import RunConfig
from .embedding import HandcraftedEmbedder, PrecomputedEmbedder, ProjectionHead, TrainConfig
from .flow import DisplacementField, displacement_field
from .metrics import EvalReport, boundary_f, evaluate_masks, region_j
from .propagation import (HistoryBank, PropagationConfig, SequenceTracker,
                          TransductiveSegmenter, propagate_frame, run_sequence)
from .sampling import SamplingStrategy, parse_strategy, select_references
from .similarity import FeatureGrid, SpatialParams, similarity_rows
from .synth import ScenePreset, generate
from .transduction import (TransductionParams, TransductiveLabelSpreading, solve_closed_form,
                           solve_iterative)

__all__ = [
    "__version__",
    "DisplacementField",
    "EvalReport",
    "FeatureGrid",
    "HandcraftedEmbedder",
    "HistoryBank",
    "PrecomputedEmbedder",
    "ProjectionHead",
    "PropagationConfig",
    "RunConfig",
    "SamplingStrategy",
    "ScenePreset",
    "SequenceTracker",
    "SpatialParams",
    "TrainConfig",
    "TransductionParams",
    "TransductiveLabelSpreading",
    "TransductiveSegmenter",
    "boundary_f",
    "displacement_field",
    "evaluate_masks",
    "generate",
    "parse_strategy",
    "propagate_frame",
    "region_j",
    "run_ablation",
    "run_sequence",
    "select_references",
    "similarity_rows",
    "solve_closed_form",
    "solve_iterative",
]
