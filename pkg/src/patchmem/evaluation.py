"""Image/pixel AUROC and the throughput/cost benchmark.

AUROC is the Mann-Whitney statistic with half credit for ties, computed
from average ranks — identical to trapezoidal ROC integration. The
benchmark runs the patch-wise engine and the merged single-bank baseline
on the same data and budget, counts vector comparisons exactly, and times
the scoring stage over repeated runs.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import UndefinedMetricError, ValidationError
from .scoring import AnomalyResult
from .tensors import LABEL_ANOMALOUS, LABEL_NORMAL, DatasetManifest


@dataclass
class EvalReport:
    image_auroc: float = float("nan")
    pixel_auroc: float | None = None
    per_image: list[dict] = field(default_factory=list)
    stage_ms: dict[str, float] = field(default_factory=dict)
    fps: float | None = None
    comparison_count: int | None = None
    baseline_comparison_count: int | None = None
    cost_ratio: float | None = None

    def to_json(self) -> dict:
        return {
            "image_auroc": self.image_auroc,
            "pixel_auroc": self.pixel_auroc,
            "per_image": self.per_image,
            "stage_ms": self.stage_ms,
            "fps": self.fps,
            "comparison_count": self.comparison_count,
            "baseline_comparison_count": self.baseline_comparison_count,
            "cost_ratio": self.cost_ratio,
        }


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic.

    Equals (# correctly ordered positive/negative pairs + 0.5 * ties)
    divided by P*N. Requires both classes present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValidationError("scores and labels must be 1-D and congruent")
    pos = int((y == 1).sum())
    neg = int((y == 0).sum())
    if pos + neg != y.size:
        raise ValidationError("labels must be 0 or 1")
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def _entry_label(entry) -> int:
    if entry.label == LABEL_ANOMALOUS:
        return 1
    if entry.label == LABEL_NORMAL:
        return 0
    raise ValidationError(f"test entry {entry.image_id!r} is unlabelled")


def evaluate(
    results: list[AnomalyResult],
    manifest: DatasetManifest,
    pixel: bool = True,
) -> EvalReport:
    """Compute image-level (and optionally pixel-level) AUROC.

    Every test entry must have a result. Pixel AUROC pools all pixels of
    all test images into one ranking: anomaly maps are bilinearly resized
    to the mask resolution; normal entries count as all-zero masks;
    anomalous entries must carry a mask.
    """
    manifest.validate()
    by_id = {r.image_id: r for r in results}
    missing = [e.image_id for e in manifest.entries if e.image_id not in by_id]
    if missing:
        raise ValidationError(f"missing results for {missing[:3]}{'...' if len(missing) > 3 else ''}")

    labels = [_entry_label(e) for e in manifest.entries]
    scores = [by_id[e.image_id].image_score for e in manifest.entries]
    report = EvalReport(image_auroc=roc_auc(scores, labels))
    report.per_image = [
        {"image_id": e.image_id, "score": float(s), "label": int(l)}
        for e, s, l in zip(manifest.entries, scores, labels)
    ]

    if pixel:
        mask_shape = None
        for e in manifest.entries:
            if _entry_label(e) == 1:
                if e.mask_path is None:
                    raise ValidationError(
                        f"pixel AUROC requested but anomalous entry {e.image_id!r} has no mask"
                    )
                m = manifest.load_mask(e)
                if mask_shape is None:
                    mask_shape = m.shape
                elif m.shape != mask_shape:
                    raise ValidationError("masks must share one resolution")
        if mask_shape is None:
            raise UndefinedMetricError("pixel AUROC needs at least one anomalous mask")
        pixel_scores = []
        pixel_labels = []
        for e in manifest.entries:
            r = by_id[e.image_id]
            resized = kernels.bilinear_resize(
                np.ascontiguousarray(r.anomaly_map, dtype=np.float64),
                mask_shape[0],
                mask_shape[1],
            )
            mask = manifest.load_mask(e) if _entry_label(e) == 1 else np.zeros(mask_shape, np.uint8)
            pixel_scores.append(resized.reshape(-1))
            pixel_labels.append(mask.reshape(-1))
        report.pixel_auroc = roc_auc(
            np.concatenate(pixel_scores), np.concatenate(pixel_labels).astype(np.int64)
        )
    return report


def bench(config, repeats: int = 3, pixel: bool = False) -> tuple[EvalReport, EvalReport]:
    """Run the patch-wise engine and the single-bank baseline on one dataset.

    Both engines share the sampler budget (same ratio, escalation disabled
    for the baseline comparison is the caller's choice via config). Returns
    (engine_report, baseline_report); both carry the exact comparison
    counts, the cost ratio baseline/engine, and scoring FPS measured as the
    median over ``repeats`` timed passes.
    """
    from . import pipeline  # local import: pipeline builds on this module's types

    engine_cfg = config.normalized()
    # the baseline is the plain merged-bank method: no spatial partition and
    # no adaptive escalation (escalation is the patch-wise engine's feature)
    base_cfg = engine_cfg.with_modes(patch_wise=False, adaptive=False)

    reports = []
    counts = []
    for cfg in (engine_cfg, base_cfg):
        t0 = time.perf_counter()
        bank = pipeline.build_bank(cfg)
        t1 = time.perf_counter()
        sampled = pipeline.sample_from(bank, cfg)
        t2 = time.perf_counter()

        manifest = pipeline.load_test_manifest(cfg)
        elapsed = []
        results = None
        for _ in range(max(1, repeats)):
            s0 = time.perf_counter()
            results = pipeline.score_manifest(manifest, sampled, cfg)
            elapsed.append(time.perf_counter() - s0)
        assert results is not None
        median_s = float(np.median(elapsed))

        report = evaluate(results, manifest, pixel=pixel)
        report.stage_ms = {
            "build": (t1 - t0) * 1000.0,
            "sample": (t2 - t1) * 1000.0,
            "score": median_s * 1000.0,
        }
        report.fps = len(manifest.entries) / median_s if median_s > 0 else float("inf")
        total = sum(r.comparison_count for r in results)
        report.comparison_count = total
        counts.append(total)
        reports.append(report)

    ratio = counts[1] / counts[0]
    for r in reports:
        r.baseline_comparison_count = counts[1]
        r.cost_ratio = ratio
    return reports[0], reports[1]


def save_report(report: EvalReport, path: str | Path, csv_path: str | Path | None = None) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    if csv_path is not None:
        lines = ["image_id,score,label"]
        lines += [f"{r['image_id']},{r['score']},{r['label']}" for r in report.per_image]
        Path(csv_path).write_text("\n".join(lines) + "\n")


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) triples for external plotting, one per
    distinct score, descending."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = float((y == 1).sum())
    neg = float((y == 0).sum())
    if pos == 0 or neg == 0:
        raise UndefinedMetricError("ROC needs both classes")
    points = []
    for thr in np.unique(s)[::-1]:
        predicted = s >= thr
        tpr = float((predicted & (y == 1)).sum()) / pos
        fpr = float((predicted & (y == 0)).sum()) / neg
        points.append((float(thr), fpr, tpr))
    return points
