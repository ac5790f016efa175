"""Patch-wise, layer-wise memory-bank anomaly detection engine.

Builds per-patch, per-layer memory banks of nominal feature vectors,
compresses them with extent-adaptive greedy coreset sampling, and scores
test images by exact per-patch nearest-neighbor search.
"""

from .errors import (
    FormatError,
    GridMismatchError,
    IncompatibilityError,
    PatchmemError,
    UndefinedMetricError,
    UnsupportedEncodingError,
    ValidationError,
    WriteError,
)
from .evaluation import EvalReport, bench, evaluate, roc_auc
from .kernels import active_backend
from .memory import MemoryBank, PatchCell, PatchGrid, build_memory, partition_patches
from .pipeline import PRESETS, RunConfig
from .sampling import (
    SampledBank,
    SampledPatchBank,
    SamplerConfig,
    adaptive_sample,
    assign_clusters,
    cluster_extent,
    greedy_coreset,
    sample_bank,
)
from .scoring import (
    AnomalyResult,
    ScorerConfig,
    baseline_score_image,
    gaussian_blur,
    patch_nn_distances,
    score_image,
)
from .synthetic import LayerSpec, SyntheticSpec, generate_synthetic
from .tensors import DatasetManifest, FeatureTensor, ManifestEntry, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AnomalyResult",
    "DatasetManifest",
    "EvalReport",
    "FeatureTensor",
    "FormatError",
    "GridMismatchError",
    "IncompatibilityError",
    "LayerSpec",
    "ManifestEntry",
    "MemoryBank",
    "PRESETS",
    "PatchCell",
    "PatchGrid",
    "PatchmemError",
    "RunConfig",
    "SampledBank",
    "SampledPatchBank",
    "SamplerConfig",
    "ScorerConfig",
    "SyntheticSpec",
    "UndefinedMetricError",
    "UnsupportedEncodingError",
    "ValidationError",
    "WriteError",
    "active_backend",
    "adaptive_sample",
    "assign_clusters",
    "baseline_score_image",
    "bench",
    "build_memory",
    "cluster_extent",
    "evaluate",
    "gaussian_blur",
    "generate_synthetic",
    "greedy_coreset",
    "partition_patches",
    "patch_nn_distances",
    "read_tensor",
    "roc_auc",
    "sample_bank",
    "score_image",
    "write_tensor",
]
