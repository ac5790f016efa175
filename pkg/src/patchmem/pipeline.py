"""Run configuration and end-to-end orchestration.

A RunConfig ties together paths, the patch grid, sampler and scorer
settings, and the three ablation switches (patch-wise memory, layer-wise
memory, adaptive sampling). Artifacts embed a hash of the settings that
determine their content, and stages refuse to combine artifacts built
under a different hash.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import FormatError, IncompatibilityError, ValidationError
from .memory import MemoryBank, PatchGrid, build_memory, default_loader, load_bank, save_bank
from .sampling import SampledBank, SamplerConfig, load_sampled, sample_bank, save_sampled
from .scoring import AnomalyResult, ScorerConfig, save_result, score_image
from .tensors import DatasetManifest, load_manifest

# Ablation presets: (patch_wise, layer_wise, adaptive)
PRESETS = {
    "A": {"patch_wise": False, "layer_wise": False, "adaptive": False},
    "B": {"patch_wise": True, "layer_wise": False, "adaptive": False},
    "C": {"patch_wise": False, "layer_wise": True, "adaptive": False},
    "D": {"patch_wise": True, "layer_wise": True, "adaptive": False},
    "E": {"patch_wise": True, "layer_wise": True, "adaptive": True},
}


@dataclass(frozen=True)
class RunConfig:
    train_manifest: Path
    test_manifest: Path
    bank_dir: Path
    output_dir: Path
    grid_rows: int = 7
    grid_cols: int = 7
    sampler: SamplerConfig = SamplerConfig()
    scorer: ScorerConfig = ScorerConfig()
    patch_wise: bool = True
    layer_wise: bool = True
    adaptive: bool = True
    aggregation: bool = True
    threads: int = 1

    def normalized(self) -> "RunConfig":
        """Apply the mode-flag invariants: patch_wise off forces a 1x1
        grid; adaptive off forces zero escalations."""
        cfg = self
        if not cfg.patch_wise and (cfg.grid_rows, cfg.grid_cols) != (1, 1):
            cfg = replace(cfg, grid_rows=1, grid_cols=1)
        if not cfg.adaptive and cfg.sampler.max_escalations != 0:
            cfg = replace(cfg, sampler=replace(cfg.sampler, max_escalations=0))
        return cfg

    def with_modes(self, **modes: bool) -> "RunConfig":
        return replace(self, **modes).normalized()

    def with_preset(self, name: str) -> "RunConfig":
        if name not in PRESETS:
            raise ValidationError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}")
        return self.with_modes(**PRESETS[name])

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.grid_rows, self.grid_cols)

    def validate(self) -> "RunConfig":
        self.sampler.validate()
        self.scorer.validate()
        if self.threads < 1:
            raise ValidationError("threads must be positive")
        _ = self.grid
        return self

    # -- hashing ------------------------------------------------------------

    def _build_fields(self) -> dict:
        cfg = self.normalized()
        return {
            "grid": [cfg.grid_rows, cfg.grid_cols],
            "aggregation": cfg.aggregation,
            "patch_wise": cfg.patch_wise,
            "layer_wise": cfg.layer_wise,
        }

    def build_hash(self) -> str:
        return _digest(self._build_fields())

    def pipeline_hash(self) -> str:
        cfg = self.normalized()
        doc = self._build_fields()
        doc["sampler"] = cfg.sampler.to_json()
        doc["adaptive"] = cfg.adaptive
        return _digest(doc)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "train_manifest": str(self.train_manifest),
            "test_manifest": str(self.test_manifest),
            "bank_dir": str(self.bank_dir),
            "output_dir": str(self.output_dir),
            "grid": {"rows": self.grid_rows, "cols": self.grid_cols},
            "sampler": self.sampler.to_json(),
            "scorer": self.scorer.to_json(),
            "modes": {
                "patch_wise": self.patch_wise,
                "layer_wise": self.layer_wise,
                "adaptive": self.adaptive,
            },
            "aggregation": self.aggregation,
            "threads": self.threads,
        }

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        def path_of(key: str) -> Path:
            p = Path(doc[key])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return p

        try:
            modes = doc.get("modes", {})
            cfg = cls(
                train_manifest=path_of("train_manifest"),
                test_manifest=path_of("test_manifest"),
                bank_dir=path_of("bank_dir"),
                output_dir=path_of("output_dir"),
                grid_rows=int(doc.get("grid", {}).get("rows", 7)),
                grid_cols=int(doc.get("grid", {}).get("cols", 7)),
                sampler=SamplerConfig.from_json(doc.get("sampler", {})),
                scorer=ScorerConfig.from_json(doc.get("scorer", {})),
                patch_wise=bool(modes.get("patch_wise", True)),
                layer_wise=bool(modes.get("layer_wise", True)),
                adaptive=bool(modes.get("adaptive", True)),
                aggregation=bool(doc.get("aggregation", True)),
                threads=int(doc.get("threads", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"run config schema violation: {exc!r}") from None
        return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: cannot parse config: {exc}") from None
    return RunConfig.from_json(doc, base_dir=path.parent)


def _digest(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# --- stage orchestration ----------------------------------------------------


def build_bank(config: RunConfig) -> MemoryBank:
    cfg = config.normalized().validate()
    manifest = load_manifest(cfg.train_manifest)
    loader = default_loader(manifest, layer_wise=cfg.layer_wise, aggregation=cfg.aggregation)
    # In fused mode pooling happens per raw layer before fusion, so it is
    # baked into the stored vectors; the bank flag tells the scorer whether
    # it still has to pool incoming test tensors itself.
    bank_aggregation = cfg.aggregation and cfg.layer_wise
    return build_memory(manifest, cfg.grid, aggregation=bank_aggregation, loader=loader)


def sample_from(bank: MemoryBank, config: RunConfig) -> SampledBank:
    cfg = config.normalized()
    return sample_bank(bank, cfg.sampler)


def load_test_manifest(config: RunConfig) -> DatasetManifest:
    return load_manifest(config.test_manifest)


def _entry_tensors(manifest: DatasetManifest, entry, config: RunConfig):
    """Per-layer tensors for scoring.

    Layer-wise mode hands over raw tensors and score_image pools them per
    the bank flag. Fused mode must replicate the bank build exactly —
    pool each raw layer, then upsample and concatenate — because pooling
    and bilinear upsampling do not commute.
    """
    if not config.layer_wise:
        loader = default_loader(manifest, layer_wise=False, aggregation=config.aggregation)
        return loader(entry)
    return manifest.load_tensors(entry)


def score_manifest(
    manifest: DatasetManifest,
    sampled: SampledBank,
    config: RunConfig,
) -> list[AnomalyResult]:
    """Score every manifest entry; parallel across images when threads > 1,
    results in manifest order regardless of scheduling."""
    cfg = config.normalized()

    def one(entry) -> AnomalyResult:
        tensors = _entry_tensors(manifest, entry, cfg)
        return score_image(entry.image_id, tensors, sampled, cfg.scorer)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(one, manifest.entries))
    return [one(entry) for entry in manifest.entries]


# --- persisted-artifact commands -------------------------------------------


def cmd_build(config: RunConfig) -> Path:
    """Build and persist the memory bank and its sampled coreset.

    Writes into a temporary sibling directory and swaps it in only once
    complete, so a failed build leaves no partial bank behind.
    """
    cfg = config.normalized().validate()
    bank = build_bank(cfg)
    sampled = sample_from(bank, cfg)

    bank_dir = Path(cfg.bank_dir)
    tmp = bank_dir.parent / (bank_dir.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    try:
        save_bank(bank, tmp, build_hash=cfg.build_hash())
        save_sampled(sampled, tmp, cfg.sampler, config_hash=cfg.pipeline_hash())
        if bank_dir.exists():
            shutil.rmtree(bank_dir)
        tmp.replace(bank_dir)
    except BaseException:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
        raise
    return bank_dir


def cmd_sample(config: RunConfig) -> Path:
    """Re-sample an existing persisted bank under the current sampler."""
    cfg = config.normalized().validate()
    from .memory import load_bank_header

    header = load_bank_header(cfg.bank_dir)
    if header.get("build_hash") != cfg.build_hash():
        raise IncompatibilityError(
            f"bank at {cfg.bank_dir} was built under hash {header.get('build_hash')!r}, "
            f"config requires {cfg.build_hash()!r}"
        )
    bank = load_bank(cfg.bank_dir)
    sampled = sample_bank(bank, cfg.sampler)
    save_sampled(sampled, cfg.bank_dir, cfg.sampler, config_hash=cfg.pipeline_hash())
    return Path(cfg.bank_dir)


def load_sampled_checked(config: RunConfig) -> SampledBank:
    """Load the sampled bank, refusing on any configuration mismatch."""
    cfg = config.normalized()
    from .memory import load_bank_header

    header = load_bank_header(cfg.bank_dir)
    if header.get("build_hash") != cfg.build_hash():
        raise IncompatibilityError(
            f"bank build hash {header.get('build_hash')!r} does not match "
            f"config hash {cfg.build_hash()!r}"
        )
    sampled, index = load_sampled(cfg.bank_dir)
    if index.get("config_hash") != cfg.pipeline_hash():
        raise IncompatibilityError(
            f"sampled bank hash {index.get('config_hash')!r} does not match "
            f"config hash {cfg.pipeline_hash()!r}"
        )
    return sampled


def cmd_score(config: RunConfig, heatmaps: bool = False) -> list[AnomalyResult]:
    """Score the test manifest against the persisted bank; one JSON record
    and one NPY map per image under output_dir/scores."""
    cfg = config.normalized().validate()
    sampled = load_sampled_checked(cfg)
    manifest = load_test_manifest(cfg)
    results = score_manifest(manifest, sampled, cfg)
    out = Path(cfg.output_dir) / "scores"
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        save_result(r, out, heatmap=heatmaps)
    meta = {
        "pipeline_hash": cfg.pipeline_hash(),
        "image_ids": [r.image_id for r in results],
        "comparison_count": int(sum(r.comparison_count for r in results)),
        "element_ops": int(sum(r.element_ops for r in results)),
    }
    (out / "score_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return results


def load_results(config: RunConfig) -> list[AnomalyResult]:
    """Rehydrate persisted score records for evaluation, refusing scores
    produced under a different pipeline configuration."""
    from . import npyio

    cfg = config.normalized()
    out = Path(cfg.output_dir) / "scores"
    meta_path = out / "score_meta.json"
    try:
        meta = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{meta_path}: cannot read score metadata: {exc}") from None
    if meta.get("pipeline_hash") != cfg.pipeline_hash():
        raise IncompatibilityError(
            f"scores were produced under hash {meta.get('pipeline_hash')!r}, "
            f"config requires {cfg.pipeline_hash()!r}"
        )
    results = []
    for image_id in meta["image_ids"]:
        record = json.loads((out / f"{image_id}.json").read_text())
        amap = npyio.read_f32_2d(out / f"{image_id}_map.npy").astype(float)
        results.append(
            AnomalyResult(
                image_id=image_id,
                image_score=float(record["image_score"]),
                anomaly_map=amap,
                comparison_count=int(record["comparison_count"]),
                element_ops=int(record.get("element_ops", 0)),
            )
        )
    return results
