"""Patch-wise, layer-wise memory construction.

Feature maps are partitioned into a fixed spatial grid; every location
contributes its channel vector to the cell of its patch, one cell per
(layer, patch) pair. Layers never mix: no cross-layer concatenation and no
upsampling happens here. The optional fused single-layer mode used by the
ablation baselines lives in :func:`fuse_layers` and is applied *before*
the bank ever sees the data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import kernels, npyio
from .errors import FormatError, GridMismatchError, ValidationError
from .tensors import DatasetManifest, FeatureTensor, ManifestEntry

FUSED_LAYER_ID = 0


@dataclass(frozen=True)
class PatchGrid:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValidationError(f"grid must be positive, got {self.rows}x{self.cols}")

    @property
    def patch_count(self) -> int:
        return self.rows * self.cols

    def block_shape(self, height: int, width: int) -> tuple[int, int]:
        if height % self.rows or width % self.cols:
            raise GridMismatchError(
                f"{self.rows}x{self.cols} grid does not evenly divide a "
                f"{height}x{width} feature map"
            )
        return height // self.rows, width // self.cols


@dataclass
class PatchCell:
    """All nominal vectors landing in one (layer, patch) cell.

    ``vectors`` is (n, d) float32; ``origins`` holds each vector's source
    (row, col) in its feature map; ``image_ids`` its source image.
    """

    layer_id: int
    patch_index: int
    vectors: np.ndarray
    origins: np.ndarray
    image_ids: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class MemoryBank:
    grid: PatchGrid
    layers: list[int]
    image_count: int
    aggregation: bool
    cells: dict[tuple[int, int], PatchCell]

    def cell(self, layer_id: int, patch_index: int) -> PatchCell:
        return self.cells[(layer_id, patch_index)]

    def layer_dim(self, layer_id: int) -> int:
        return self.cells[(layer_id, 1)].dim

    def canonicalized(self) -> "MemoryBank":
        """Copy with every cell's vectors sorted by (image_id, row, col).

        Construction appends in manifest order; this is the canonical order
        used to compare banks built from reordered manifests.
        """
        cells = {}
        for key, c in self.cells.items():
            order = sorted(
                range(c.count),
                key=lambda i: (c.image_ids[i], int(c.origins[i, 0]), int(c.origins[i, 1])),
            )
            cells[key] = PatchCell(
                c.layer_id,
                c.patch_index,
                c.vectors[order].copy(),
                c.origins[order].copy(),
                [c.image_ids[i] for i in order],
            )
        return MemoryBank(self.grid, list(self.layers), self.image_count, self.aggregation, cells)


def partition_patches(
    t: FeatureTensor, grid: PatchGrid
) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Split a feature map into grid patches.

    Returns one (patch_index, vectors, origins) triple per patch, patch
    indices row-major starting at 1. Location (h, w) lands in patch
    ``(h // bh) * cols + (w // bw) + 1`` and contributes the vector
    ``t.data[:, h, w]``; within a patch, vectors are ordered row-major.
    The union over patches covers every location exactly once.
    """
    bh, bw = grid.block_shape(t.height, t.width)
    # (C,H,W) -> (rows, bh, cols, bw, C) so each patch is a contiguous block
    blocks = t.data.transpose(1, 2, 0).reshape(grid.rows, bh, grid.cols, bw, t.channels)
    rows_idx = np.arange(t.height)
    cols_idx = np.arange(t.width)
    out = []
    for pr in range(grid.rows):
        for pc in range(grid.cols):
            patch_index = pr * grid.cols + pc + 1
            vectors = blocks[pr, :, pc].reshape(bh * bw, t.channels)
            rr = np.repeat(rows_idx[pr * bh : (pr + 1) * bh], bw)
            cc = np.tile(cols_idx[pc * bw : (pc + 1) * bw], bh)
            origins = np.stack([rr, cc], axis=1)
            out.append((patch_index, np.ascontiguousarray(vectors), origins))
    return out


def apply_aggregation(t: FeatureTensor) -> FeatureTensor:
    """Local 3x3 average pooling (stride 1, reflect padding)."""
    return FeatureTensor(t.layer_id, kernels.avg_pool3x3(t.data))


def fuse_layers(tensors: dict[int, FeatureTensor], layer_order: Iterable[int]) -> FeatureTensor:
    """Single-bank baseline fusion: bilinearly upsample every layer to the
    first layer's resolution and concatenate channels per location."""
    order = list(layer_order)
    base = tensors[order[0]]
    parts = [base.data]
    for lid in order[1:]:
        t = tensors[lid]
        if (t.height, t.width) == (base.height, base.width):
            parts.append(t.data)
            continue
        up = np.empty((t.channels, base.height, base.width), dtype=np.float32)
        for c in range(t.channels):
            up[c] = kernels.bilinear_resize(
                t.data[c].astype(np.float64), base.height, base.width
            ).astype(np.float32)
        parts.append(up)
    return FeatureTensor(FUSED_LAYER_ID, np.concatenate(parts, axis=0))


def default_loader(
    manifest: DatasetManifest, layer_wise: bool = True, aggregation: bool = True
) -> Callable[[ManifestEntry], dict[int, FeatureTensor]]:
    """Entry -> per-layer tensors, with pooling and optional fusion applied.

    Pooling runs per layer before fusion, mirroring how the bank and the
    scorer must see identical preprocessing.
    """

    def load(entry: ManifestEntry) -> dict[int, FeatureTensor]:
        tensors = manifest.load_tensors(entry)
        if aggregation:
            tensors = {lid: apply_aggregation(t) for lid, t in tensors.items()}
        if not layer_wise:
            fused = fuse_layers(tensors, manifest.layers)
            return {FUSED_LAYER_ID: fused}
        return tensors

    return load


def build_memory(
    manifest: DatasetManifest,
    grid: PatchGrid,
    aggregation: bool = True,
    loader: Callable[[ManifestEntry], dict[int, FeatureTensor]] | None = None,
) -> MemoryBank:
    """Accumulate every training image's vectors into per-(layer, patch) cells.

    Entries are processed in manifest order; within a cell, vectors carry
    their image id and spatial origin so banks can be canonicalized. All
    images must share layer shapes.
    """
    manifest.validate()
    if manifest.split != "train":
        raise ValidationError("memory is built from the train split only")
    if not manifest.entries:
        raise ValidationError("cannot build memory from an empty manifest")
    if loader is None:
        loader = default_loader(manifest, layer_wise=True, aggregation=aggregation)

    staged: dict[tuple[int, int], list[tuple[np.ndarray, np.ndarray, str]]] = {}
    layer_ids: list[int] | None = None
    shapes: dict[int, tuple[int, int, int]] = {}
    for entry in manifest.entries:
        tensors = loader(entry)
        if layer_ids is None:
            layer_ids = sorted(tensors)
            shapes = {lid: tensors[lid].data.shape for lid in layer_ids}
        elif sorted(tensors) != layer_ids:
            raise ValidationError(f"entry {entry.image_id!r}: inconsistent layer set")
        for lid in layer_ids:
            t = tensors[lid]
            if t.data.shape != shapes[lid]:
                raise ValidationError(
                    f"entry {entry.image_id!r} layer {lid}: shape {t.data.shape} "
                    f"differs from {shapes[lid]}"
                )
            for patch_index, vectors, origins in partition_patches(t, grid):
                staged.setdefault((lid, patch_index), []).append(
                    (vectors, origins, entry.image_id)
                )

    assert layer_ids is not None
    cells = {}
    for (lid, patch_index), parts in staged.items():
        vectors = np.concatenate([p[0] for p in parts], axis=0)
        origins = np.concatenate([p[1] for p in parts], axis=0)
        ids: list[str] = []
        for p in parts:
            ids.extend([p[2]] * p[0].shape[0])
        cells[(lid, patch_index)] = PatchCell(lid, patch_index, vectors, origins, ids)
    return MemoryBank(grid, layer_ids, len(manifest.entries), aggregation, cells)


# --- persistence ----------------------------------------------------------
#
# Bank directory layout:
#   bank.json                      header (grid, layers, N, aggregation, hash)
#   cells/layer{j}_patch{i:04d}.npy  one (n, d) float32 matrix per cell


def _cell_name(layer_id: int, patch_index: int) -> str:
    return f"layer{layer_id}_patch{patch_index:04d}.npy"


def save_bank(bank: MemoryBank, bank_dir: str | Path, build_hash: str = "") -> None:
    bank_dir = Path(bank_dir)
    cell_dir = bank_dir / "cells"
    cell_dir.mkdir(parents=True, exist_ok=True)
    header = {
        "grid": {"rows": bank.grid.rows, "cols": bank.grid.cols},
        "layers": bank.layers,
        "image_count": bank.image_count,
        "aggregation": bank.aggregation,
        "build_hash": build_hash,
    }
    (bank_dir / "bank.json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    for (lid, patch_index), cell in sorted(bank.cells.items()):
        mat = cell.vectors
        npyio.write_f32_2d(mat, cell_dir / _cell_name(lid, patch_index))


def load_bank_header(bank_dir: str | Path) -> dict:
    path = Path(bank_dir) / "bank.json"
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: cannot read bank header: {exc}") from None


def load_bank(bank_dir: str | Path) -> MemoryBank:
    """Rehydrate a persisted bank. Origins and image ids are not persisted,
    so loaded cells carry empty provenance (sampling does not need it)."""
    bank_dir = Path(bank_dir)
    header = load_bank_header(bank_dir)
    grid = PatchGrid(header["grid"]["rows"], header["grid"]["cols"])
    layers = [int(x) for x in header["layers"]]
    cells = {}
    for lid in layers:
        for patch_index in range(1, grid.patch_count + 1):
            mat = npyio.read_f32_2d(bank_dir / "cells" / _cell_name(lid, patch_index))
            cells[(lid, patch_index)] = PatchCell(
                lid, patch_index, mat, np.zeros((mat.shape[0], 2), dtype=np.int64), []
            )
    return MemoryBank(grid, layers, int(header["image_count"]), bool(header["aggregation"]), cells)
