"""Synthetic aligned-feature datasets for desk-scale testing.

Each (layer, patch) cell draws its vectors from a per-patch Gaussian
mixture, so different patches can carry different mode counts — the
distribution-imbalance scenario the adaptive sampler targets. Anomalous
test images are a normal draw plus a fixed-direction offset in designated
patches, with pixel masks marking the planted blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import npyio
from .errors import ValidationError
from .tensors import (
    LABEL_ANOMALOUS,
    LABEL_NORMAL,
    DatasetManifest,
    FeatureTensor,
    ManifestEntry,
    save_manifest,
    write_tensor,
)


@dataclass(frozen=True)
class LayerSpec:
    layer_id: int
    channels: int
    height: int
    width: int


@dataclass
class SyntheticSpec:
    layers: list[LayerSpec]
    grid_rows: int = 7
    grid_cols: int = 7
    train_count: int = 10
    test_normal_count: int = 5
    test_anomaly_count: int = 5
    # mixture shape per patch; scalars broadcast, lists are indexed by
    # patch (1-based patch i -> value[i-1])
    modes_per_patch: int | list[int] = 1
    mode_spread: float | list[float] = 0.1
    mode_separation: float = 5.0
    anomaly_patches: tuple[int, ...] = (1,)
    anomaly_offset: float = 1.0
    mask_height: int = 0  # 0 -> 32 * grid_rows
    mask_width: int = 0
    rng_seed: int = 0

    @property
    def patch_count(self) -> int:
        return self.grid_rows * self.grid_cols

    def modes_for(self, patch_index: int) -> int:
        if isinstance(self.modes_per_patch, int):
            return self.modes_per_patch
        return self.modes_per_patch[patch_index - 1]

    def spread_for(self, patch_index: int) -> float:
        if isinstance(self.mode_spread, (int, float)):
            return float(self.mode_spread)
        return float(self.mode_spread[patch_index - 1])

    def mask_shape(self) -> tuple[int, int]:
        h = self.mask_height or 32 * self.grid_rows
        w = self.mask_width or 32 * self.grid_cols
        return h, w

    def validate(self) -> "SyntheticSpec":
        if not self.layers:
            raise ValidationError("synthetic spec needs at least one layer")
        if self.grid_rows <= 0 or self.grid_cols <= 0:
            raise ValidationError("grid dimensions must be positive")
        for ls in self.layers:
            if ls.channels <= 0 or ls.height <= 0 or ls.width <= 0:
                raise ValidationError(f"layer {ls.layer_id}: non-positive shape")
            if ls.height % self.grid_rows or ls.width % self.grid_cols:
                raise ValidationError(
                    f"layer {ls.layer_id}: {ls.height}x{ls.width} not divisible by "
                    f"{self.grid_rows}x{self.grid_cols} grid"
                )
        if min(self.train_count, self.test_normal_count, self.test_anomaly_count) < 0:
            raise ValidationError("image counts must be non-negative")
        if not isinstance(self.modes_per_patch, int):
            if len(self.modes_per_patch) != self.patch_count:
                raise ValidationError("modes_per_patch list must cover every patch")
        if not isinstance(self.mode_spread, (int, float)):
            if len(self.mode_spread) != self.patch_count:
                raise ValidationError("mode_spread list must cover every patch")
        for p in self.anomaly_patches:
            if not 1 <= p <= self.patch_count:
                raise ValidationError(f"planted patch {p} outside 1..{self.patch_count}")
        spreads = [self.spread_for(p) for p in range(1, self.patch_count + 1)]
        if min(spreads) < 0 or self.mode_separation < 0 or self.anomaly_offset < 0:
            raise ValidationError("spread, separation and offset must be non-negative")
        return self

    def to_json(self) -> dict:
        return {
            "layers": [
                {"layer_id": ls.layer_id, "channels": ls.channels,
                 "height": ls.height, "width": ls.width}
                for ls in self.layers
            ],
            "grid_rows": self.grid_rows,
            "grid_cols": self.grid_cols,
            "train_count": self.train_count,
            "test_normal_count": self.test_normal_count,
            "test_anomaly_count": self.test_anomaly_count,
            "modes_per_patch": self.modes_per_patch,
            "mode_spread": self.mode_spread,
            "mode_separation": self.mode_separation,
            "anomaly_patches": list(self.anomaly_patches),
            "anomaly_offset": self.anomaly_offset,
            "mask_height": self.mask_height,
            "mask_width": self.mask_width,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        layers = [
            LayerSpec(int(d["layer_id"]), int(d["channels"]), int(d["height"]), int(d["width"]))
            for d in doc["layers"]
        ]
        kwargs = {k: doc[k] for k in doc if k != "layers"}
        if "anomaly_patches" in kwargs:
            kwargs["anomaly_patches"] = tuple(kwargs["anomaly_patches"])
        if isinstance(kwargs.get("modes_per_patch"), list):
            kwargs["modes_per_patch"] = [int(m) for m in kwargs["modes_per_patch"]]
        if isinstance(kwargs.get("mode_spread"), list):
            kwargs["mode_spread"] = [float(s) for s in kwargs["mode_spread"]]
        return cls(layers=layers, **kwargs).validate()


def load_spec(path: str | Path) -> SyntheticSpec:
    return SyntheticSpec.from_json(json.loads(Path(path).read_text()))


class _PatchModel:
    """Frozen mixture parameters for one (layer, patch) cell."""

    def __init__(self, centers: np.ndarray):
        self.centers = centers  # (modes, channels)


def _build_models(spec: SyntheticSpec, rng: np.random.Generator) -> dict[tuple[int, int], _PatchModel]:
    models = {}
    for ls in spec.layers:
        for p in range(1, spec.patch_count + 1):
            modes = spec.modes_for(p)
            centers = spec.mode_separation * rng.standard_normal((modes, ls.channels))
            models[(ls.layer_id, p)] = _PatchModel(centers)
    return models


def _draw_image(
    spec: SyntheticSpec,
    models: dict[tuple[int, int], _PatchModel],
    rng: np.random.Generator,
) -> dict[int, np.ndarray]:
    """One image's per-layer maps.

    Aligned images are regionally coherent, so each patch draws one mode
    per image (shared across layers) and every location in the patch is
    that mode's center plus noise.
    """
    mode_choice = {
        p: int(rng.integers(0, spec.modes_for(p))) for p in range(1, spec.patch_count + 1)
    }
    maps = {}
    for ls in spec.layers:
        bh = ls.height // spec.grid_rows
        bw = ls.width // spec.grid_cols
        out = np.empty((ls.channels, ls.height, ls.width), dtype=np.float32)
        for p in range(1, spec.patch_count + 1):
            pr, pc = divmod(p - 1, spec.grid_cols)
            center = models[(ls.layer_id, p)].centers[mode_choice[p]]
            noise = spec.spread_for(p) * rng.standard_normal((bh, bw, ls.channels))
            block = center[None, None, :] + noise  # (bh, bw, C)
            out[:, pr * bh : (pr + 1) * bh, pc * bw : (pc + 1) * bw] = (
                block.transpose(2, 0, 1).astype(np.float32)
            )
        maps[ls.layer_id] = out
    return maps


def _plant_anomaly(spec: SyntheticSpec, maps: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Add the fixed-direction offset to every planted patch, all layers."""
    planted = {}
    for ls in spec.layers:
        out = maps[ls.layer_id].copy()
        shift = np.float32(spec.anomaly_offset / np.sqrt(ls.channels))
        bh = ls.height // spec.grid_rows
        bw = ls.width // spec.grid_cols
        for p in spec.anomaly_patches:
            pr, pc = divmod(p - 1, spec.grid_cols)
            out[:, pr * bh : (pr + 1) * bh, pc * bw : (pc + 1) * bw] += shift
        planted[ls.layer_id] = out
    return planted


def _anomaly_mask(spec: SyntheticSpec) -> np.ndarray:
    h, w = spec.mask_shape()
    mask = np.zeros((h, w), dtype=np.uint8)
    bh = h / spec.grid_rows
    bw = w / spec.grid_cols
    for p in spec.anomaly_patches:
        pr, pc = divmod(p - 1, spec.grid_cols)
        r0, r1 = round(pr * bh), round((pr + 1) * bh)
        c0, c1 = round(pc * bw), round((pc + 1) * bw)
        mask[r0:r1, c0:c1] = 1
    return mask


def generate_synthetic(
    spec: SyntheticSpec, out_dir: str | Path
) -> tuple[DatasetManifest, DatasetManifest]:
    """Write tensors, masks, and both manifests; pure function of the spec.

    Returns (train_manifest, test_manifest). Anomalous test images are a
    normal draw from the same stream plus the planted offset, so offset 0
    makes them statistically identical to normal draws.
    """
    spec.validate()
    out_dir = Path(out_dir)
    tensor_dir = out_dir / "tensors"
    mask_dir = out_dir / "masks"
    tensor_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(spec.rng_seed)
    models = _build_models(spec, rng)
    layer_ids = [ls.layer_id for ls in spec.layers]

    def write_image(image_id: str, maps: dict[int, np.ndarray]) -> dict[int, Path]:
        paths = {}
        for lid in layer_ids:
            p = tensor_dir / f"{image_id}_layer{lid}.npy"
            write_tensor(FeatureTensor.from_array(lid, maps[lid]), p)
            paths[lid] = p
        return paths

    train_entries = []
    for i in range(spec.train_count):
        image_id = f"train_{i:04d}"
        paths = write_image(image_id, _draw_image(spec, models, rng))
        train_entries.append(ManifestEntry(image_id, paths, label=LABEL_NORMAL))

    test_entries = []
    for i in range(spec.test_normal_count):
        image_id = f"test_normal_{i:04d}"
        paths = write_image(image_id, _draw_image(spec, models, rng))
        test_entries.append(ManifestEntry(image_id, paths, label=LABEL_NORMAL))

    mask = _anomaly_mask(spec)
    for i in range(spec.test_anomaly_count):
        image_id = f"test_anom_{i:04d}"
        maps = _plant_anomaly(spec, _draw_image(spec, models, rng))
        paths = write_image(image_id, maps)
        mask_path = mask_dir / f"{image_id}.npy"
        npyio.write_mask(mask, mask_path)
        test_entries.append(
            ManifestEntry(image_id, paths, label=LABEL_ANOMALOUS, mask_path=mask_path)
        )

    train = DatasetManifest("train", layer_ids, train_entries)
    test = DatasetManifest("test", layer_ids, test_entries)
    save_manifest(train, out_dir / "train.json")
    save_manifest(test, out_dir / "test.json")
    return train, test
