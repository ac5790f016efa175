"""Command-line entry point.

Subcommands wire the pipeline end to end:

  synth   generate a synthetic aligned-feature dataset from a spec file
  build   construct and persist the memory bank + sampled coreset
  sample  re-sample an existing bank under the current sampler settings
  score   score the test manifest against the persisted bank
  eval    compute AUROC metrics from persisted scores
  bench   run the engine and the single-bank baseline, report cost/FPS

Exit codes: 0 success, 2 input error, 3 incompatible artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import evaluation, pipeline, synthetic
from .errors import IncompatibilityError, PatchmemError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INCOMPATIBLE = 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path, help="run config JSON")
    p.add_argument("--preset", choices=sorted(pipeline.PRESETS), default=None,
                   help="ablation preset overriding the mode flags")
    p.add_argument("--threads", type=int, default=None, help="worker thread cap")
    p.add_argument("--seed", type=int, default=None, help="sampler seed override")


def _load_config(args: argparse.Namespace) -> pipeline.RunConfig:
    cfg = pipeline.load_config(args.config)
    if args.preset:
        cfg = cfg.with_preset(args.preset)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.seed is not None:
        cfg = replace(cfg, sampler=replace(cfg.sampler, rng_seed=args.seed))
    return cfg.normalized().validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchmem",
        description="patch-wise memory-bank anomaly detection engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, type=Path, help="synthetic spec JSON")
    p.add_argument("--out", required=True, type=Path, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="rng seed override")

    for name, help_text in (
        ("build", "build the memory bank and sampled coreset"),
        ("sample", "re-sample an existing bank"),
        ("score", "score the test manifest"),
        ("eval", "evaluate persisted scores"),
        ("bench", "compare the engine against the single-bank baseline"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        if name == "score":
            p.add_argument("--heatmaps", action="store_true", help="emit PGM renders")
        if name == "eval":
            p.add_argument("--no-pixel", action="store_true", help="skip pixel AUROC")
            p.add_argument("--csv", type=Path, default=None, help="per-image score CSV")
            p.add_argument("--roc", type=Path, default=None, help="ROC point dump JSON")
        if name == "bench":
            p.add_argument("--repeats", type=int, default=3, help="timed scoring passes")
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = synthetic.load_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace as dc_replace

        spec = dc_replace(spec, rng_seed=args.seed)
    train, test = synthetic.generate_synthetic(spec, args.out)
    print(f"wrote {len(train.entries)} train / {len(test.entries)} test images under {args.out}")
    return EXIT_OK


def _cmd_build(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    bank_dir = pipeline.cmd_build(cfg)
    print(f"bank written to {bank_dir}")
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    bank_dir = pipeline.cmd_sample(cfg)
    print(f"re-sampled bank at {bank_dir}")
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    results = pipeline.cmd_score(cfg, heatmaps=args.heatmaps)
    total = sum(r.comparison_count for r in results)
    print(f"scored {len(results)} images ({total} vector comparisons)")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    results = pipeline.load_results(cfg)
    manifest = pipeline.load_test_manifest(cfg)
    report = evaluation.evaluate(results, manifest, pixel=not args.no_pixel)
    out = Path(cfg.output_dir) / "eval_report.json"
    evaluation.save_report(report, out, csv_path=args.csv)
    if args.roc is not None:
        scores = [r["score"] for r in report.per_image]
        labels = [r["label"] for r in report.per_image]
        points = evaluation.roc_points(scores, labels)
        args.roc.write_text(json.dumps(points) + "\n")
    pixel = "n/a" if report.pixel_auroc is None else f"{report.pixel_auroc:.4f}"
    print(f"image AUROC {report.image_auroc:.4f}  pixel AUROC {pixel}  -> {out}")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    engine, baseline = evaluation.bench(cfg, repeats=args.repeats)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.save_report(engine, out_dir / "bench_engine.json")
    evaluation.save_report(baseline, out_dir / "bench_baseline.json")
    print(
        f"engine: {engine.comparison_count} comparisons, {engine.fps:.2f} fps | "
        f"baseline: {baseline.comparison_count} comparisons, {baseline.fps:.2f} fps | "
        f"cost ratio {engine.cost_ratio:.3f}"
    )
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "build": _cmd_build,
    "sample": _cmd_sample,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except IncompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (PatchmemError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
