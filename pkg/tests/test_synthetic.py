import numpy as np
import pytest

from patchmem import npyio
from patchmem.errors import ValidationError
from patchmem.synthetic import LayerSpec, SyntheticSpec, generate_synthetic


def _spec(**overrides):
    base = dict(
        layers=[LayerSpec(1, 3, 8, 8), LayerSpec(2, 5, 4, 4)],
        grid_rows=2,
        grid_cols=2,
        train_count=3,
        test_normal_count=2,
        test_anomaly_count=2,
        modes_per_patch=1,
        mode_spread=0.2,
        anomaly_patches=(4,),
        anomaly_offset=2.0,
        rng_seed=11,
    )
    base.update(overrides)
    return SyntheticSpec(**base)


def _tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_same_seed_byte_identical(tmp_path):
    generate_synthetic(_spec(), tmp_path / "a")
    generate_synthetic(_spec(), tmp_path / "b")
    a = _tree_bytes(tmp_path / "a")
    b = _tree_bytes(tmp_path / "b")
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == b[k], k


def test_different_seed_differs(tmp_path):
    generate_synthetic(_spec(), tmp_path / "a")
    generate_synthetic(_spec(rng_seed=12), tmp_path / "b")
    a = _tree_bytes(tmp_path / "a")
    b = _tree_bytes(tmp_path / "b")
    assert any(a[k] != b[k] for k in a if k.endswith(".npy"))


def test_zero_offset_equals_normal_draw(tmp_path):
    # with the same seed, the only difference an offset makes is the shift
    # inside the planted patches: offset-0 anomalies ARE the normal draws
    generate_synthetic(_spec(anomaly_offset=0.0), tmp_path / "zero")
    generate_synthetic(_spec(anomaly_offset=2.0), tmp_path / "two")
    zero = npyio.read_f32_3d(tmp_path / "zero/tensors/test_anom_0000_layer1.npy")
    two = npyio.read_f32_3d(tmp_path / "two/tensors/test_anom_0000_layer1.npy")
    # patch 4 of a 2x2 grid on an 8x8 map is the bottom-right 4x4 block
    shift = 2.0 / np.sqrt(3)
    delta = two - zero
    assert np.allclose(delta[:, 4:, 4:], shift, atol=1e-6)
    assert np.all(delta[:, :4, :4] == 0)
    assert np.all(delta[:, :4, 4:] == 0)
    assert np.all(delta[:, 4:, :4] == 0)


def test_masks_mark_planted_blocks(tmp_path):
    generate_synthetic(_spec(), tmp_path / "d")
    mask = npyio.read_mask(tmp_path / "d/masks/test_anom_0000.npy")
    assert mask.shape == (64, 64)  # 32 * grid
    assert np.all(mask[32:, 32:] == 1)
    assert mask.sum() == 32 * 32


def test_manifest_labels(tmp_path):
    train, test = generate_synthetic(_spec(), tmp_path / "d")
    assert all(e.label == "normal" for e in train.entries)
    normals = [e for e in test.entries if e.label == "normal"]
    anoms = [e for e in test.entries if e.label == "anomalous"]
    assert len(normals) == 2 and len(anoms) == 2
    assert all(e.mask_path is not None for e in anoms)
    assert all(e.mask_path is None for e in normals)


def test_out_of_grid_plant_rejected():
    with pytest.raises(ValidationError):
        _spec(anomaly_patches=(5,)).validate()


def test_indivisible_grid_rejected():
    with pytest.raises(ValidationError):
        _spec(layers=[LayerSpec(1, 3, 9, 8)]).validate()


def test_per_patch_spread_list():
    spec = _spec(mode_spread=[0.1, 0.1, 2.0, 2.0])
    spec.validate()
    assert spec.spread_for(1) == 0.1
    assert spec.spread_for(3) == 2.0
    with pytest.raises(ValidationError):
        _spec(mode_spread=[0.1]).validate()


def test_spec_json_roundtrip():
    spec = _spec(modes_per_patch=[1, 2, 1, 3], mode_spread=[0.1, 0.2, 0.3, 0.4])
    doc = spec.to_json()
    back = SyntheticSpec.from_json(doc)
    assert back == spec
