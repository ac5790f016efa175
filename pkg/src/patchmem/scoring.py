"""Per-patch nearest-neighbor scoring, layer fusion, and anomaly maps.

Every test vector searches only its own patch's sampled keys, exactly and
exhaustively. Min-distances are realigned into a native-resolution grid
per layer; the per-layer image score comes from the largest distance,
discounted by how dense the memory is around it (softmax weight over the
b nearest keys); layers fuse by normalized weighted sum. The pixel map is
the same fusion bilinearly upsampled and Gaussian-smoothed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, npyio
from .errors import ValidationError
from .memory import partition_patches, apply_aggregation
from .sampling import SampledBank, SampledPatchBank
from .tensors import FeatureTensor


@dataclass(frozen=True)
class ScorerConfig:
    neighbors: int = 4
    layer_weights: dict[int, float] | None = None  # None -> uniform
    blur_sigma: float = 4.0
    top_t: int = 1
    output_size: tuple[int, int] = (224, 224)

    def validate(self) -> "ScorerConfig":
        if self.neighbors < 1:
            raise ValidationError("neighbors must be positive")
        if self.blur_sigma < 0:
            raise ValidationError("blur_sigma must be non-negative")
        if self.top_t < 1:
            raise ValidationError("top_t must be positive")
        if any(s <= 0 for s in self.output_size):
            raise ValidationError("output_size must be positive")
        if self.layer_weights is not None:
            if any(w < 0 for w in self.layer_weights.values()):
                raise ValidationError("layer weights must be non-negative")
            if sum(self.layer_weights.values()) <= 0:
                raise ValidationError("layer weights must sum to a positive value")
        return self

    def weight_for(self, layer_id: int) -> float:
        if self.layer_weights is None:
            return 1.0
        return float(self.layer_weights.get(layer_id, 0.0))

    def to_json(self) -> dict:
        return {
            "neighbors": self.neighbors,
            "layer_weights": (
                None
                if self.layer_weights is None
                else {str(k): v for k, v in sorted(self.layer_weights.items())}
            ),
            "blur_sigma": self.blur_sigma,
            "top_t": self.top_t,
            "output_size": list(self.output_size),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScorerConfig":
        doc = dict(doc)
        if doc.get("layer_weights") is not None:
            doc["layer_weights"] = {int(k): float(v) for k, v in doc["layer_weights"].items()}
        if "output_size" in doc:
            doc["output_size"] = tuple(int(x) for x in doc["output_size"])
        return cls(**doc).validate()


@dataclass
class AnomalyResult:
    image_id: str
    image_score: float
    anomaly_map: np.ndarray  # (out_h, out_w) float64, finite, non-negative
    per_layer_raw: dict[int, np.ndarray] = field(default_factory=dict)
    comparison_count: int = 0  # vector-pair distance evaluations
    element_ops: int = 0  # scalar ops: pairs weighted by vector dimension


def patch_nn_distances(
    test_vectors: np.ndarray, bank: SampledPatchBank, b: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact exhaustive search of a patch's test vectors against its keys.

    Returns (min_dist (m,), neighbors (m, min(b, K))) with neighbor rows
    sorted ascending. Cost bookkeeping is the caller's: this evaluates
    exactly m * K vector pairs.
    """
    if bank.key_count == 0:
        raise ValidationError("sampled cell has no keys")
    test_vectors = np.ascontiguousarray(test_vectors, dtype=np.float64)
    keys = np.ascontiguousarray(bank.keys, dtype=np.float64)
    if test_vectors.shape[1] != keys.shape[1]:
        raise ValidationError(
            f"test vectors are {test_vectors.shape[1]}-d, keys are {keys.shape[1]}-d"
        )
    return kernels.nn_search(test_vectors, keys, b)


def reweight_score(peak: float, neighbor_dists: np.ndarray) -> float:
    """Density discount for the image score.

    With the b' nearest key distances d_1..d_b' at the peak location
    (d_1 == peak), returns (1 - exp(peak) / sum_j exp(d_j)) * peak,
    evaluated with the max subtracted so large distances cannot overflow.
    Degenerates to the raw peak when fewer than two neighbors exist.
    """
    d = np.asarray(neighbor_dists, dtype=np.float64)
    d = d[np.isfinite(d)]
    if d.size < 2:
        return float(peak)
    m = float(d.max())
    factor = 1.0 - np.exp(peak - m) / np.exp(d - m).sum()
    return float(factor * peak)


def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing, kernel truncated at radius ceil(4*sigma),
    renormalized to sum 1, reflect padding. sigma == 0 is the identity."""
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    return kernels.gaussian_blur(np.ascontiguousarray(grid, dtype=np.float64), float(sigma))


def top_locations(grid: np.ndarray, count: int) -> list[tuple[int, int]]:
    """Locations of the ``count`` largest grid values, deterministic: ties
    resolve to the lowest flat (row-major) index."""
    flat = grid.reshape(-1)
    order = np.argsort(-flat, kind="stable")[:count]
    w = grid.shape[1]
    return [(int(i) // w, int(i) % w) for i in order]


def score_image(
    image_id: str,
    test_tensors: dict[int, FeatureTensor],
    bank: SampledBank,
    config: ScorerConfig,
) -> AnomalyResult:
    """Score one test image against the sampled bank.

    Per layer: apply the bank's aggregation, partition with the bank's
    grid, search each patch cell, realign min-distances to the native
    grid. The per-layer score reweights the top_t largest distances; the
    image score and pixel map are the weighted layer fusion, the map
    blurred after upsampling to config.output_size.
    """
    config.validate()
    if sorted(test_tensors) != sorted(bank.layers):
        raise ValidationError(
            f"test layers {sorted(test_tensors)} do not match bank layers {sorted(bank.layers)}"
        )

    out_h, out_w = config.output_size
    fused_map = np.zeros((out_h, out_w))
    weight_total = 0.0
    score_acc = 0.0
    per_layer_raw: dict[int, np.ndarray] = {}
    comparisons = 0
    element_ops = 0

    for lid in bank.layers:
        t = test_tensors[lid]
        if bank.aggregation:
            t = apply_aggregation(t)
        grid_scores = np.zeros((t.height, t.width))
        neigh_store = np.full((t.height, t.width, config.neighbors), np.nan)
        for patch_index, vectors, origins in partition_patches(t, bank.grid):
            cell = bank.cell(lid, patch_index)
            min_d, neigh = patch_nn_distances(vectors, cell, config.neighbors)
            comparisons += vectors.shape[0] * cell.key_count
            element_ops += vectors.shape[0] * cell.key_count * vectors.shape[1]
            rr, cc = origins[:, 0], origins[:, 1]
            grid_scores[rr, cc] = min_d
            neigh_store[rr, cc, : neigh.shape[1]] = neigh

        per_layer_raw[lid] = grid_scores
        peaks = top_locations(grid_scores, config.top_t)
        layer_score = float(
            np.mean(
                [reweight_score(grid_scores[r, c], neigh_store[r, c]) for r, c in peaks]
            )
        )

        w = config.weight_for(lid)
        weight_total += w
        score_acc += w * layer_score
        fused_map += w * kernels.bilinear_resize(grid_scores, out_h, out_w)

    if weight_total <= 0:
        raise ValidationError("layer weights sum to zero over the bank's layers")
    image_score = score_acc / weight_total
    anomaly_map = gaussian_blur(fused_map / weight_total, config.blur_sigma)
    return AnomalyResult(
        image_id=image_id,
        image_score=image_score,
        anomaly_map=anomaly_map,
        per_layer_raw=per_layer_raw,
        comparison_count=comparisons,
        element_ops=element_ops,
    )


def baseline_score_image(
    image_id: str,
    test_tensors: dict[int, FeatureTensor],
    single_bank: SampledBank,
    config: ScorerConfig,
) -> AnomalyResult:
    """Location-agnostic baseline: the identical scoring pipeline over a
    bank whose patches were merged before sampling (a 1x1 grid), so every
    test vector searches the layer's whole key set."""
    if single_bank.grid.patch_count != 1:
        raise ValidationError(
            f"baseline bank must have a 1x1 grid, got "
            f"{single_bank.grid.rows}x{single_bank.grid.cols}"
        )
    return score_image(image_id, test_tensors, single_bank, config)


def save_result(result: AnomalyResult, out_dir: str | Path, heatmap: bool = False) -> None:
    """Persist one image's score record and map; optionally a PGM render."""
    import json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "image_id": result.image_id,
        "image_score": float(result.image_score),
        "comparison_count": int(result.comparison_count),
        "element_ops": int(result.element_ops),
    }
    (out_dir / f"{result.image_id}.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n"
    )
    npyio.write_f32_2d(result.anomaly_map.astype(np.float32), out_dir / f"{result.image_id}_map.npy")
    if heatmap:
        write_pgm(result.anomaly_map, out_dir / f"{result.image_id}_map.pgm")


def write_pgm(grid: np.ndarray, path: str | Path) -> None:
    """8-bit binary PGM render, normalized per image to the full range."""
    g = np.asarray(grid, dtype=np.float64)
    peak = g.max()
    scaled = np.zeros_like(g) if peak <= 0 else g / peak
    img = np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())
