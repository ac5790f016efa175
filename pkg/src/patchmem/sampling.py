"""Per-cell coreset selection with extent-driven ratio escalation.

Each cell is downsampled by minimax facility-location greedy selection.
The selected keys partition the cell into clusters; a cluster's extent is
the sigmoid-squashed squared distance from its key to its farthest member,

    extent = 1 - 2 / (1 + exp(s))  =  tanh(s / 2),   s = max ||far - key||^2

which lives in [0, 1). Cells whose largest extent exceeds the threshold
rerun selection at an escalated ratio, so high-spread patches keep more
keys than tight ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, npyio
from .errors import FormatError, ValidationError
from .memory import MemoryBank, PatchCell, PatchGrid

INIT_FIRST_INDEX = "first_index"
INIT_SEEDED_RANDOM = "seeded_random"


@dataclass(frozen=True)
class SamplerConfig:
    base_ratio: float = 0.10
    extent_threshold: float = 0.5
    escalation_factor: float = 2.0
    max_escalations: int = 1
    rng_seed: int = 0
    init_mode: str = INIT_FIRST_INDEX

    def validate(self) -> "SamplerConfig":
        if not 0.0 < self.base_ratio <= 1.0:
            raise ValidationError(f"base_ratio must be in (0, 1], got {self.base_ratio}")
        if self.escalation_factor <= 0:
            raise ValidationError("escalation_factor must be positive")
        if self.max_escalations < 0:
            raise ValidationError("max_escalations must be non-negative")
        # cannot request more keys than vectors even fully escalated
        if self.base_ratio * self.escalation_factor**self.max_escalations > 1.0 + 1e-12:
            raise ValidationError(
                "base_ratio * escalation_factor^max_escalations must not exceed 1"
            )
        if self.init_mode not in (INIT_FIRST_INDEX, INIT_SEEDED_RANDOM):
            raise ValidationError(f"unknown init_mode {self.init_mode!r}")
        return self

    def to_json(self) -> dict:
        return {
            "base_ratio": self.base_ratio,
            "extent_threshold": self.extent_threshold,
            "escalation_factor": self.escalation_factor,
            "max_escalations": self.max_escalations,
            "rng_seed": self.rng_seed,
            "init_mode": self.init_mode,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SamplerConfig":
        return cls(**doc).validate()


@dataclass
class SampledPatchBank:
    """Coreset keys for one cell plus the sampling diagnostics."""

    layer_id: int
    patch_index: int
    keys: np.ndarray  # (K, d) float32
    indices: np.ndarray  # original cell indices, selection order
    max_extent: float  # largest cluster extent of the initial clustering
    escalated: bool
    clamped: bool = False  # requested K exceeded the cell size

    @property
    def key_count(self) -> int:
        return self.keys.shape[0]


@dataclass
class SampledBank:
    """All sampled cells plus the metadata scoring needs."""

    grid: PatchGrid
    layers: list[int]
    aggregation: bool
    cells: dict[tuple[int, int], SampledPatchBank]

    def cell(self, layer_id: int, patch_index: int) -> SampledPatchBank:
        return self.cells[(layer_id, patch_index)]

    def total_keys(self) -> int:
        return sum(c.key_count for c in self.cells.values())


def ratio_key_count(ratio: float, n: int) -> int:
    """ceil(ratio * n) with a floor of 1, robust to float noise so that an
    exactly-integral product never rounds up (0.1 * 160 stays 16)."""
    return max(1, math.ceil(ratio * n - 1e-9))


def greedy_coreset(
    vectors: np.ndarray, k: int, config: SamplerConfig = SamplerConfig()
) -> tuple[np.ndarray, bool]:
    """Minimax facility-location greedy selection of k indices.

    The first pick is index 0 (``first_index`` mode) or a seeded draw;
    every later step adds the unselected vector maximizing its minimum
    Euclidean distance to the selected set, ties to the lowest index.
    Returns (indices in selection order, clamped flag); k > n clamps to n
    rather than failing, since escalation may overshoot small cells.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if n == 0:
        raise ValidationError("cannot sample an empty cell")
    if k < 1:
        raise ValidationError(f"key count must be positive, got {k}")
    clamped = k > n
    k = min(k, n)
    if config.init_mode == INIT_SEEDED_RANDOM:
        start = int(np.random.default_rng(config.rng_seed).integers(0, n))
    else:
        start = 0
    return kernels.greedy_select(vectors, k, start), clamped


def assign_clusters(vectors: np.ndarray, key_indices: np.ndarray) -> np.ndarray:
    """Nearest-key position for every vector; ties to the lowest position.

    A vector that *is* a key (by original index) is assigned to its own
    key, which matters only when duplicate vectors were selected.
    """
    if len(key_indices) == 0:
        raise ValidationError("assign_clusters needs at least one key")
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    keys = vectors[np.asarray(key_indices, dtype=np.int64)]
    assign = kernels.assign_nearest(vectors, np.ascontiguousarray(keys))
    for pos, idx in enumerate(key_indices):
        assign[idx] = pos
    return assign


def cluster_extent(key_vector: np.ndarray, members: np.ndarray) -> float:
    """Extent of one cluster: tanh(s/2) for s the largest squared Euclidean
    distance from the key to a member. Evaluates 1 - 2/(1 + exp(s))
    overflow-safely: finite for any finite s, saturating toward 1."""
    key = np.asarray(key_vector, dtype=np.float64)
    mem = np.atleast_2d(np.asarray(members, dtype=np.float64))
    s = float(((mem - key) ** 2).sum(axis=1).max())
    return float(np.tanh(0.5 * s))


def max_cluster_extent(vectors: np.ndarray, key_indices: np.ndarray) -> float:
    """Largest extent over the clusters induced by the given keys."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    assign = assign_clusters(vectors, key_indices)
    worst = 0.0
    for pos, idx in enumerate(key_indices):
        members = vectors[assign == pos]
        if members.shape[0] == 0:
            continue
        worst = max(worst, cluster_extent(vectors[idx], members))
    return worst


def adaptive_sample(cell: PatchCell, config: SamplerConfig) -> SampledPatchBank:
    """Sample one cell, escalating the ratio when the initial clustering is
    too spread out.

    The initial pass selects ceil(base_ratio * n) keys and records the
    clustering's largest extent. If that exceeds the threshold and
    escalations remain, selection reruns from scratch at the escalated
    ratio and those keys replace the originals; the reported max_extent is
    always the initial one. Extents are only recomputed when a further
    escalation must be decided (max_escalations > 1).
    """
    config.validate()
    n = cell.count
    if n == 0:
        raise ValidationError(f"cell ({cell.layer_id}, {cell.patch_index}) is empty")
    vectors = np.ascontiguousarray(cell.vectors, dtype=np.float64)

    k0 = ratio_key_count(config.base_ratio, n)
    indices, clamped = greedy_coreset(vectors, k0, config)
    initial_extent = max_cluster_extent(vectors, indices)

    extent = initial_extent
    escalations = 0
    while extent > config.extent_threshold and escalations < config.max_escalations:
        escalations += 1
        k = ratio_key_count(config.base_ratio * config.escalation_factor**escalations, n)
        indices, clamped = greedy_coreset(vectors, k, config)
        if escalations < config.max_escalations:
            extent = max_cluster_extent(vectors, indices)

    return SampledPatchBank(
        layer_id=cell.layer_id,
        patch_index=cell.patch_index,
        keys=cell.vectors[indices].copy(),
        indices=np.asarray(indices, dtype=np.int64),
        max_extent=initial_extent,
        escalated=escalations > 0,
        clamped=clamped,
    )


def sample_bank(bank: MemoryBank, config: SamplerConfig) -> SampledBank:
    """Sample every cell independently; deterministic regardless of order."""
    config.validate()
    cells = {
        key: adaptive_sample(cell, config) for key, cell in sorted(bank.cells.items())
    }
    return SampledBank(bank.grid, list(bank.layers), bank.aggregation, cells)


# --- persistence ----------------------------------------------------------
#
# Alongside the bank directory:
#   sampled.json                        index (config, hashes)
#   sampled/layer{j}_patch{i:04d}.npy   key vectors, rows in selection order
#   sampled/layer{j}_patch{i:04d}.json  {key_count, max_extent, escalated,
#                                        config_hash, indices, clamped}


def _cell_stem(layer_id: int, patch_index: int) -> str:
    return f"layer{layer_id}_patch{patch_index:04d}"


def save_sampled(
    sampled: SampledBank,
    bank_dir: str | Path,
    config: SamplerConfig,
    config_hash: str = "",
) -> None:
    bank_dir = Path(bank_dir)
    out = bank_dir / "sampled"
    out.mkdir(parents=True, exist_ok=True)
    index = {
        "config": config.to_json(),
        "config_hash": config_hash,
        "total_keys": sampled.total_keys(),
    }
    (bank_dir / "sampled.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    for (lid, patch_index), cell in sorted(sampled.cells.items()):
        stem = _cell_stem(lid, patch_index)
        npyio.write_f32_2d(cell.keys, out / f"{stem}.npy")
        sidecar = {
            "key_count": int(cell.key_count),
            "max_extent": float(cell.max_extent),
            "escalated": bool(cell.escalated),
            "clamped": bool(cell.clamped),
            "config_hash": config_hash,
            "indices": [int(i) for i in cell.indices],
        }
        (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_sampled(bank_dir: str | Path) -> tuple[SampledBank, dict]:
    """Load sampled cells plus the index document (config, hashes)."""
    from .memory import load_bank_header

    bank_dir = Path(bank_dir)
    header = load_bank_header(bank_dir)
    index_path = bank_dir / "sampled.json"
    try:
        index = json.loads(index_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{index_path}: cannot read sample index: {exc}") from None
    grid = PatchGrid(header["grid"]["rows"], header["grid"]["cols"])
    layers = [int(x) for x in header["layers"]]
    cells = {}
    for lid in layers:
        for patch_index in range(1, grid.patch_count + 1):
            stem = _cell_stem(lid, patch_index)
            keys = npyio.read_f32_2d(bank_dir / "sampled" / f"{stem}.npy")
            meta = json.loads((bank_dir / "sampled" / f"{stem}.json").read_text())
            cells[(lid, patch_index)] = SampledPatchBank(
                layer_id=lid,
                patch_index=patch_index,
                keys=keys,
                indices=np.asarray(meta["indices"], dtype=np.int64),
                max_extent=float(meta["max_extent"]),
                escalated=bool(meta["escalated"]),
                clamped=bool(meta.get("clamped", False)),
            )
    sampled = SampledBank(grid, layers, bool(header["aggregation"]), cells)
    return sampled, index
