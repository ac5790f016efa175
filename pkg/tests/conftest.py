import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchmem import npyio
from patchmem.memory import PatchCell
from patchmem.synthetic import LayerSpec, SyntheticSpec, generate_synthetic
from patchmem.tensors import DatasetManifest, FeatureTensor, ManifestEntry, write_tensor


def write_dataset(root, split, images, labels=None, masks=None) -> DatasetManifest:
    """Write tensors (and masks) to disk and return the manifest.

    images: {image_id: {layer_id: (C,H,W) array}}; labels: {image_id: str};
    masks: {image_id: 2-D array}. The manifest is also saved as <split>.json.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    labels = labels or {}
    masks = masks or {}
    entries = []
    layer_ids = None
    for image_id, layer_arrays in images.items():
        if layer_ids is None:
            layer_ids = sorted(layer_arrays)
        paths = {}
        for lid, arr in layer_arrays.items():
            p = root / f"{image_id}_l{lid}.npy"
            write_tensor(FeatureTensor.from_array(lid, np.asarray(arr, dtype=np.float32)), p)
            paths[lid] = p
        mask_path = None
        if image_id in masks:
            mask_path = root / f"{image_id}_mask.npy"
            npyio.write_mask(masks[image_id], mask_path)
        entries.append(
            ManifestEntry(image_id, paths, label=labels.get(image_id), mask_path=mask_path)
        )
    manifest = DatasetManifest(split, layer_ids or [], entries)
    from patchmem.tensors import save_manifest

    save_manifest(manifest, root / f"{split}.json")
    return manifest


def make_cell(vectors, layer_id=1, patch_index=1) -> PatchCell:
    """PatchCell from raw vectors, origins filled row-major."""
    v = np.asarray(vectors, dtype=np.float32)
    if v.ndim == 1:
        v = v[:, None]
    n = v.shape[0]
    origins = np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1)
    return PatchCell(layer_id, patch_index, v, origins, [f"img_{i}" for i in range(n)])


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two-layer synthetic dataset, 7x7 grid, strong planted anomaly."""
    out = tmp_path_factory.mktemp("small_ds")
    spec = SyntheticSpec(
        layers=[LayerSpec(1, 8, 28, 28), LayerSpec(2, 16, 14, 14)],
        grid_rows=7,
        grid_cols=7,
        train_count=6,
        test_normal_count=3,
        test_anomaly_count=3,
        modes_per_patch=1,
        mode_spread=0.1,
        anomaly_patches=(17, 25),
        anomaly_offset=1.0,
        rng_seed=7,
    )
    train, test = generate_synthetic(spec, out)
    return spec, out, train, test
