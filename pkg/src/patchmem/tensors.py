"""Feature tensors and dataset manifests.

A FeatureTensor is one image's feature map for one backbone stage, shape
(channels, height, width), float32. A DatasetManifest declares a split's
images, the tensor file per layer, labels, and ground-truth mask paths.
Manifest JSON schema::

    {"split": "train"|"test",
     "layers": [int, ...],
     "entries": [{"image_id": str,
                  "tensors": {"<layer_id>": "relative/path.npy"},
                  "label": "normal"|"anomalous"|null,
                  "mask": "relative/path.npy"|null}]}

Paths are resolved relative to the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import npyio
from .errors import FormatError, ValidationError

LABEL_NORMAL = "normal"
LABEL_ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class FeatureTensor:
    layer_id: int
    data: np.ndarray  # (C, H, W) float32, C-order

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def validate(self) -> "FeatureTensor":
        if self.data.ndim != 3 or any(s <= 0 for s in self.data.shape):
            raise ValidationError(f"feature tensor must be 3-D positive, got {self.data.shape}")
        if self.data.dtype != np.float32:
            raise ValidationError(f"feature tensor must be float32, got {self.data.dtype}")
        if not np.isfinite(self.data).all():
            raise ValidationError("feature tensor contains NaN or Inf")
        return self

    @classmethod
    def from_array(cls, layer_id: int, data: np.ndarray) -> "FeatureTensor":
        return cls(layer_id, np.ascontiguousarray(data, dtype=np.float32)).validate()


def read_tensor(path: str | Path, layer_id: int = 0) -> FeatureTensor:
    """Read a tensor file; bit-exact with respect to write_tensor."""
    return FeatureTensor(layer_id, npyio.read_f32_3d(path))


def write_tensor(t: FeatureTensor, path: str | Path) -> None:
    t.validate()
    npyio.write_f32_3d(t.data, path)


@dataclass
class ManifestEntry:
    image_id: str
    tensor_paths: dict[int, Path]
    label: str | None = None
    mask_path: Path | None = None


@dataclass
class DatasetManifest:
    split: str
    layers: list[int]
    entries: list[ManifestEntry] = field(default_factory=list)

    def validate(self) -> "DatasetManifest":
        if self.split not in ("train", "test"):
            raise ValidationError(f"split must be train or test, got {self.split!r}")
        layer_set = set(self.layers)
        if len(layer_set) != len(self.layers) or not self.layers:
            raise ValidationError("layers must be a non-empty list of distinct ids")
        seen = set()
        for e in self.entries:
            if e.image_id in seen:
                raise ValidationError(f"duplicate image_id {e.image_id!r}")
            seen.add(e.image_id)
            if set(e.tensor_paths) != layer_set:
                raise ValidationError(
                    f"entry {e.image_id!r} references layers {sorted(e.tensor_paths)}, "
                    f"manifest declares {sorted(layer_set)}"
                )
            if e.label not in (None, LABEL_NORMAL, LABEL_ANOMALOUS):
                raise ValidationError(f"entry {e.image_id!r} has unknown label {e.label!r}")
            if self.split == "train" and e.label == LABEL_ANOMALOUS:
                raise ValidationError(
                    f"train entry {e.image_id!r} is labelled anomalous (one-class training)"
                )
        return self

    def load_tensors(self, entry: ManifestEntry) -> dict[int, FeatureTensor]:
        return {lid: read_tensor(entry.tensor_paths[lid], lid) for lid in self.layers}

    def load_mask(self, entry: ManifestEntry) -> np.ndarray | None:
        if entry.mask_path is None:
            return None
        return npyio.read_mask(entry.mask_path)


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: cannot parse manifest: {exc}") from None
    try:
        layers = [int(x) for x in doc["layers"]]
        entries = []
        for raw in doc["entries"]:
            tensors = {int(k): (path.parent / v) for k, v in raw["tensors"].items()}
            mask = raw.get("mask")
            entries.append(
                ManifestEntry(
                    image_id=str(raw["image_id"]),
                    tensor_paths=tensors,
                    label=raw.get("label"),
                    mask_path=(path.parent / mask) if mask else None,
                )
            )
        manifest = DatasetManifest(split=str(doc["split"]), layers=layers, entries=entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: manifest schema violation: {exc!r}") from None
    return manifest.validate()


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest with paths relative to its own directory."""
    path = Path(path)
    manifest.validate()
    root = path.parent.resolve()

    def rel(p: Path) -> str:
        return Path(p).resolve().relative_to(root).as_posix()

    doc = {
        "split": manifest.split,
        "layers": list(manifest.layers),
        "entries": [
            {
                "image_id": e.image_id,
                "tensors": {str(k): rel(v) for k, v in sorted(e.tensor_paths.items())},
                "label": e.label,
                "mask": rel(e.mask_path) if e.mask_path else None,
            }
            for e in manifest.entries
        ],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
