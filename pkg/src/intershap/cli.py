"""Command line: ``intershap gen-data | train | explain | compare``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
numerical error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BaselineScores, UnsupportedModalitiesError, emap_gap, shape_score
from .data import ProvenanceError, load_dataset, manifest_hash, save_dataset
from .models import FcnnSpec, TrainConfig, XorOracle, load_model, predict_split, save_model, train_fcnn
from .models.oracle import UnsupportedSettingError
from .models.training import TrainingDiverged, default_epochs
from .metrics import f1_macro
from .report import build_report, render_force_plot
from .scores import global_intershap
from .synthgen import SynthConfig, generate
from .value_function import MaskingConfig, TargetRule, game_values, thread_count

log = logging.getLogger("intershap")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad seed list {text!r}") from exc


def _load_data(path: str):
    try:
        return load_dataset(path)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load dataset {path!r}: {exc}") from exc


def _predictor(args, dataset):
    """Returns ``(predictor, provenance dict)``."""
    if args.oracle:
        setting = dataset.config.get("setting")
        try:
            oracle = XorOracle(setting, dataset.config.get("unique_modality") or 0)
        except UnsupportedSettingError as exc:
            raise UsageError(str(exc)) from exc
        if dataset.latent_bits is None:
            raise UsageError("dataset has no latent bits; the XOR oracle cannot be used")
        return oracle, {"predictor": "xor_oracle", "setting": setting}
    if not args.model:
        raise UsageError("give --model or --oracle")
    path = Path(args.model)
    manifest = path if path.is_file() else path / "model_manifest.json"
    if not manifest.is_file():
        raise UsageError(f"no model manifest at {path}")
    model = load_model(path)
    if model.spec.dims != dataset.dims:
        raise UsageError(f"model dims {model.spec.dims} do not match dataset dims {dataset.dims}")
    return model, {"predictor": "fcnn", "model_manifest_sha256": manifest_hash(manifest)}


def cmd_gen_data(args) -> int:
    try:
        cfg = SynthConfig.from_file(args.config)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config {args.config!r}: {exc}") from exc
    ds = generate(cfg)
    manifest = save_dataset(ds, args.out)
    sizes = manifest["split_sizes"]
    print(
        f"{manifest['method']}/{manifest['setting']}: N={manifest['N']} M={manifest['M']} "
        f"dims={tuple(manifest['dims'])} train/val/test={sizes['train']}/{sizes['val']}/{sizes['test']} "
        f"label-1 fraction={float(np.mean(ds.labels)):.3f} -> {args.out}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load_data(args.data)
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise UsageError("no seeds given")
    spec = FcnnSpec(args.fusion, ds.dims, ds.class_count)
    epochs = args.epochs if args.epochs is not None else default_epochs(ds.modality_count)
    out = Path(args.out)
    rows = []
    for seed in seeds:
        cfg = TrainConfig(epochs=epochs, batch_size=args.batch_size, seed=seed, learning_rate=args.lr)
        model, history = train_fcnn(spec, ds, cfg)
        metrics = {}
        for split in ("train", "val", "test"):
            pred, _ = predict_split(model, ds, split)
            metrics[split] = f1_macro(pred, ds.labels[ds.indices(split)], ds.class_count)
        save_model(model, out / f"seed_{seed}", {
            "dataset_manifest_sha256": manifest_hash(Path(args.data) / "manifest.json"),
            "metrics_f1": metrics,
        })
        rows.append({"seed": seed, **metrics})
        print(f"seed {seed}: F1 train {metrics['train']:.1f} val {metrics['val']:.1f} test {metrics['test']:.1f}")
    summary = {
        split: {"mean": float(np.mean([r[split] for r in rows])), "sd": float(np.std([r[split] for r in rows]))}
        for split in ("train", "val", "test")
    }
    (out / "metrics.json").write_text(json.dumps({"fusion": args.fusion, "runs": rows, "summary": summary}, indent=2) + "\n")
    print(" | ".join(f"{s} {v['mean']:.1f} ± {v['sd']:.1f}" for s, v in summary.items()))
    return EXIT_OK


def _masking(args) -> MaskingConfig:
    try:
        return MaskingConfig(repetitions=args.mask_reps, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _explained_ids(ds, split: str, limit: int | None) -> np.ndarray:
    ids = ds.indices(split)
    if ids.size == 0:
        raise UsageError(f"split {split!r} is empty")
    return ids[:limit] if limit else ids


def cmd_explain(args) -> int:
    ds = _load_data(args.data)
    predictor, pred_prov = _predictor(args, ds)
    cfg = _masking(args)
    ids = _explained_ids(ds, args.split, args.limit)
    games = game_values(ds, ids, predictor, cfg, TargetRule(args.target), threads=args.threads)
    provenance = {
        "dataset_manifest_sha256": manifest_hash(Path(args.data) / "manifest.json"),
        **pred_prov,
        "masking": {"repetitions": cfg.repetitions, "seed": cfg.seed, "pool": "train", "donors": "joint"},
        "target": args.target,
        "split": args.split,
        "sample_count": int(len(ids)),
        "tool_version": __version__,
    }
    timestamp = "" if args.no_timestamp else None
    report = build_report(games.values, games.anchor, ds.modality_count, provenance, timestamp=timestamp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "force_plot.svg").write_text(render_force_plot(report.force_plot, "all samples"))
    for c, spec in sorted(report.class_force_plots.items()):
        (out / f"force_plot_class_{c}.svg").write_text(render_force_plot(spec, f"predicted class {c}"))
    g, l = report.global_, report.local
    print(f"InterSHAP {100 * g.intershap:.1f}%  local {100 * l.mean_local:.1f}%  "
          f"modalities {', '.join(f'M{i + 1} {100 * s:.1f}%' for i, s in enumerate(g.modality_share))}"
          + ("  [degenerate: zero behaviour]" if g.degenerate else ""))
    return EXIT_OK


def cmd_compare(args) -> int:
    ds = _load_data(args.data)
    predictor, pred_prov = _predictor(args, ds)
    cfg = _masking(args)
    which = {"all": ("emap", "shape"), "emap": ("emap",), "shape": ("shape",)}[args.which]
    scores = BaselineScores()
    if "emap" in which:
        if ds.modality_count != 2:
            raise UsageError(f"EMAP is defined for two modalities; dataset has {ds.modality_count}")
        scores = emap_gap(predictor, ds, args.split, cap=args.emap_cap, seed=args.seed)
    if "shape" in which:
        scores.shape_score = shape_score(predictor, ds, args.split, cfg, limit=args.limit)
    ids = _explained_ids(ds, args.split, args.limit)
    games = game_values(ds, ids, predictor, cfg, threads=args.threads)
    table = {
        "provenance": {
            "dataset_manifest_sha256": manifest_hash(Path(args.data) / "manifest.json"),
            **pred_prov,
            "masking": {"repetitions": cfg.repetitions, "seed": cfg.seed},
            "split": args.split,
        },
        "intershap": global_intershap(games.values).intershap,
        **scores.to_dict(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "baselines.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    for key in ("intershap", "model_f1", "emap_f1", "emap_gap", "shape_score"):
        if table.get(key) is not None:
            scale = 100.0 if key == "intershap" else 1.0
            print(f"{key:12s} {scale * table[key]:8.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="intershap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $INTERSHAP_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)
    # accepted after the subcommand as well
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    g = sub.add_parser("gen-data", parents=[common], help="generate a synthetic dataset directory")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", parents=[common], help="train FCNNs, one per seed")
    t.add_argument("--data", required=True)
    t.add_argument("--fusion", choices=("early", "intermediate", "late"), default="early")
    t.add_argument("--seeds", default="1,42,113")
    t.add_argument("--epochs", type=int, default=None, help="default 200, or 250 for four or more modalities")
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("explain", cmd_explain, "global and local InterSHAP with force plots"),
        ("compare", cmd_compare, "EMAP gap and SHAPE next to InterSHAP"),
    ):
        e = sub.add_parser(name, parents=[common], help=helptext)
        e.add_argument("--data", required=True)
        src = e.add_mutually_exclusive_group(required=True)
        src.add_argument("--model")
        src.add_argument("--oracle", action="store_true", help="use the XOR generating function")
        e.add_argument("--mask-reps", type=int, default=64)
        e.add_argument("--seed", type=int, default=0)
        e.add_argument("--split", choices=("train", "val", "test"), default="test")
        e.add_argument("--limit", type=int, default=None, help="explain only the first N samples of the split")
        e.add_argument("--out", required=True)
        if name == "explain":
            e.add_argument("--target", choices=("anchored", "max_per_coalition"), default="anchored")
            e.add_argument("--no-timestamp", action="store_true", help="leave the report's created field empty")
        else:
            e.add_argument("--which", choices=("emap", "shape", "all"), default="all")
            e.add_argument("--emap-cap", type=int, default=1000)
        e.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    args.threads = thread_count(args.threads)
    try:
        return args.func(args)
    except (UsageError, UnsupportedModalitiesError, UnsupportedSettingError, ProvenanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
