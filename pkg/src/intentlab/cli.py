"""Command-line entry point wiring the pipeline into reproducible runs.

Every command writes its primary artifacts plus a run stamp (seed, config
hash, package version) into the output directory; nothing written contains
timestamps, so identical inputs and flags yield byte-identical outputs.

Exit codes: 0 success, 1 validation failure, 2 numeric failure, 3 I/O
failure. Failures print one "error:<category>: <message>" line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
from sklearn.exceptions import NotFittedError

from . import __version__
from .curation import (
    collect_candidates,
    curation_report,
    kept_records,
    load_annotations,
    load_catalog,
    load_keywords,
    resolve_annotations,
)
from .errors import ConfigError, NumericError, ValidationError
from .evaluation import (
    ExperimentConfig,
    ablate_modalities,
    compute_metrics,
    confusion,
    cross_validate,
    fold_hash,
    write_confusion_csv,
)
from .folds import assign_folds, load_folds, save_folds
from .manifest import class_stats, filter_subset, load_manifest, write_manifest
from .models.checkpoint import save_checkpoint
from .models.classifiers import write_history_csv
from .models.contrastive import CONTRAST_PAIRS, MODALITIES, ContrastiveAligner
from .numerics.gradcheck import run_suite
from .taxonomy import N_CLASSES, binary_collapse, class_by_name

_MODALITY_ALIASES = {"v": "video", "a": "audio", "t": "text",
                     "video": "video", "audio": "audio", "text": "text"}


def _parse_modalities(text: str) -> tuple[str, ...]:
    picked = []
    for token in text.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token not in _MODALITY_ALIASES:
            raise ConfigError(f"unknown modality {token!r}; use v,a,t")
        name = _MODALITY_ALIASES[token]
        if name not in picked:
            picked.append(name)
    if not picked:
        raise ConfigError("no modalities selected")
    return tuple(m for m in MODALITIES if m in picked)


def _write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _stamp(out_dir: Path, command: str, seed, config_obj) -> None:
    canonical = json.dumps(config_obj, sort_keys=True)
    _write_json({
        "command": command,
        "seed": seed,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "version": __version__,
    }, out_dir / "run.json")


def _load_manifest_arg(args, check_features: bool):
    manifest = load_manifest(args.manifest, check_features=check_features)
    if getattr(args, "filter", None):
        manifest = filter_subset(manifest, args.filter)
    return manifest


def _experiment_config(args) -> ExperimentConfig:
    config = ExperimentConfig(seed=args.seed)
    if getattr(args, "arch", None):
        config.arch = args.arch
    if getattr(args, "modalities", None):
        config.modalities = _parse_modalities(args.modalities)
    if getattr(args, "binary", False):
        config.binary = True
    if getattr(args, "include_variants", False):
        config.include_variants = True
    for flag, attr in (("epochs", "n_epochs"), ("batch", "batch_size"),
                       ("lr", "lr"), ("tau", "temperature"),
                       ("weight_decay", "weight_decay"),
                       ("model_dim", "model_dim"), ("ff_dim", "ff_dim"),
                       ("n_heads", "n_heads"), ("n_blocks", "n_blocks"),
                       ("embed_dim", "embed_dim"),
                       ("dropout", "dropout_rate"),
                       ("pretrain_epochs", "pretrain_epochs"),
                       ("pretrain_batch", "pretrain_batch"),
                       ("pretrain_lr", "pretrain_lr")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attr, value)
    return config


def _resolve_folds(args, manifest):
    if getattr(args, "folds", None):
        return load_folds(args.folds), False
    return assign_folds(manifest, k=getattr(args, "k", 5) or 5,
                        seed=args.seed), True


def cmd_stats(args) -> int:
    manifest = _load_manifest_arg(args, check_features=False)
    stats = class_stats(manifest)
    print(f"records: {stats['total_records']} "
          f"(originals {stats['total_originals']}, variants {stats['n_variants']})")
    print(f"benign: {stats['benign']}  malicious: {stats['malicious']}  "
          f"hours: {stats['hours']:.1f}")
    for group, count in stats["per_group"].items():
        print(f"  group {group}: {count}")
    for name, count in stats["per_class"].items():
        print(f"    {name}: {count}")
    if stats["replica_range_warnings"] and stats["total_originals"]:
        print("classes outside the 220-230 replica range: "
              + ", ".join(stats["replica_range_warnings"]))
    if args.out:
        out = Path(args.out)
        _write_json(stats, out / "stats.json")
        _stamp(out, "stats", None, {"filter": getattr(args, "filter", None)})
    return 0


def cmd_curate(args) -> int:
    catalog = load_catalog(args.catalog)
    keywords = load_keywords(args.keywords)
    annotations = load_annotations(args.annotations)
    pool = collect_candidates(catalog, keywords)
    for category, keyword in pool.unmatched_keywords:
        print(f"warning: keyword {keyword!r} ({category}) matched nothing",
              file=sys.stderr)
    resolution = resolve_annotations(pool, annotations)
    report = curation_report(pool, resolution)
    out = Path(args.out)
    write_manifest(kept_records(catalog, resolution), out / "manifest.jsonl")
    _write_json(report, out / "curation_report.json")
    _stamp(out, "curate", None, {"catalog": str(args.catalog),
                                 "keywords": str(args.keywords),
                                 "annotations": str(args.annotations)})
    totals = report["totals"]
    print(f"collected {totals['collected']}  kept {totals['kept']}  "
          f"relabeled {totals['relabeled']}  discarded {totals['discarded']}")
    return 0


def cmd_split(args) -> int:
    manifest = _load_manifest_arg(args, check_features=False)
    folds = assign_folds(manifest, k=args.k, seed=args.seed)
    out = Path(args.out)
    save_folds(folds, out / "folds.json")
    _stamp(out, "split", args.seed, {"k": args.k, "seed": args.seed,
                                     "filter": getattr(args, "filter", None)})
    print(f"assigned {len(folds.fold_of)} records to {folds.k} folds "
          f"({fold_hash(folds)[:12]})")
    return 0


def cmd_pretrain(args) -> int:
    from .evaluation import pooled_views
    from .features import FeatureStore

    manifest = _load_manifest_arg(args, check_features=True)
    if not manifest.variants():
        print("warning: manifest has no augmentation variants; "
              "pretraining on originals only", file=sys.stderr)
    store = FeatureStore(manifest.root)
    views = pooled_views(store, manifest.records)
    aligner = ContrastiveAligner(
        embed_dim=args.embed_dim, temperature=args.tau,
        learnable_temperature=args.learnable_tau, symmetric=args.symmetric,
        n_epochs=args.epochs, batch_size=args.batch, lr=args.lr,
        weight_decay=args.weight_decay, seed=args.seed)
    aligner.fit(views)
    out = Path(args.out)
    arrays = {}
    for head in aligner.heads_.values():
        arrays.update({k: p.data for k, p in head.parameters().items()})
    if aligner.log_inv_temperature_ is not None:
        arrays["log_inv_temperature"] = np.array(aligner.log_inv_temperature_,
                                                 dtype=np.float32)
    save_checkpoint(out / "heads.ihqc", arrays)
    with open(out / "pretrain_loss.csv", "w", encoding="utf-8") as f:
        pair_keys = [f"{a}_{c}" for a, c in CONTRAST_PAIRS]
        f.write("epoch," + ",".join(pair_keys) + ",total\n")
        for row in aligner.history_:
            f.write(",".join([str(row["epoch"]),
                              *(f"{row[k]:.6f}" for k in pair_keys),
                              f"{row['loss']:.6f}"]) + "\n")
    _stamp(out, "pretrain", args.seed, aligner.get_params())
    print(f"pretrained {args.epochs} epochs; "
          f"final loss {aligner.history_[-1]['loss']:.4f}")
    return 0


def _write_cv_outputs(report, out: Path, save_models: bool) -> None:
    models = report.pop("_models", [])
    _write_json(report, out / "metrics.json")
    write_confusion_csv(np.array(report["confusion"], dtype=np.int64),
                        out / "confusion.csv",
                        class_names=(["benign", "malicious"]
                                     if report["config"]["binary"] else None))
    if save_models:
        for fold, model in enumerate(models):
            arrays = model.export_weights()
            if hasattr(model, "aligner") and model.aligner is not None:
                for head in model.aligner.heads_.values():
                    arrays.update({f"heads.{k}": p.data
                                   for k, p in head.parameters().items()})
            save_checkpoint(out / f"fold{fold}.ihqc", arrays)
            write_history_csv(model.history_, out / f"history_fold{fold}.csv")


def _run_cv_command(args, command: str) -> int:
    manifest = _load_manifest_arg(args, check_features=True)
    config = _experiment_config(args)
    if command == "finetune":
        config.arch = "finetune"
    folds, created = _resolve_folds(args, manifest)
    out = Path(args.out)
    if created:
        save_folds(folds, out / "folds.json")
    report = cross_validate(manifest, folds, config, keep_models=True)
    _write_cv_outputs(report, out, save_models=True)
    _stamp(out, command, args.seed, config.to_json_obj())
    mean = report["mean"]
    print(f"{config.arch} mean accuracy {mean['accuracy']:.4f} "
          f"macro-F1 {mean['macro_f1']:.4f} over {folds.k} folds "
          f"({report['n_eval']} originals)")
    return 0


def cmd_train(args) -> int:
    return _run_cv_command(args, "train")


def cmd_finetune(args) -> int:
    return _run_cv_command(args, "finetune")


def _parse_label(value, binary: bool) -> int:
    if isinstance(value, str):
        class_id = class_by_name(value).class_id
    else:
        class_id = int(value)
    if binary:
        return 1 if binary_collapse(class_id) == "malicious" else 0
    return class_id


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    if args.preds:
        labels = []
        preds = []
        with open(args.preds, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                labels.append(_parse_label(obj["true"], args.binary))
                preds.append(_parse_label(obj["pred"], args.binary))
        n_classes = 2 if args.binary else N_CLASSES
        names = ["benign", "malicious"] if args.binary else None
        metrics = compute_metrics(preds, labels, n_classes,
                                  class_names=names)
        cm = confusion(np.asarray(preds), np.asarray(labels), n_classes)
        _write_json(metrics, out / "metrics.json")
        write_confusion_csv(cm, out / "confusion.csv", class_names=names)
        _stamp(out, "evaluate", args.seed, {"preds": str(args.preds),
                                            "binary": args.binary})
        print(f"accuracy {metrics['accuracy']:.4f} "
              f"macro-F1 {metrics['macro_f1']:.4f} "
              f"({metrics['n_samples']} samples)")
        return 0
    if not args.manifest:
        raise ConfigError("evaluate needs --preds or --manifest")
    manifest = _load_manifest_arg(args, check_features=True)
    config = _experiment_config(args)
    folds, created = _resolve_folds(args, manifest)
    if created:
        save_folds(folds, out / "folds.json")
    report = cross_validate(manifest, folds, config)
    _write_cv_outputs(report, out, save_models=False)
    _stamp(out, "evaluate", args.seed, config.to_json_obj())
    print(f"{config.arch} mean accuracy {report['mean']['accuracy']:.4f} "
          f"macro-F1 {report['mean']['macro_f1']:.4f}")
    return 0


def cmd_ablate(args) -> int:
    manifest = _load_manifest_arg(args, check_features=True)
    config = _experiment_config(args)
    folds, created = _resolve_folds(args, manifest)
    out = Path(args.out)
    if created:
        save_folds(folds, out / "folds.json")
    result = ablate_modalities(manifest, folds, config)
    summary = {
        "fold_hash": result["fold_hash"],
        "arms": {tag: {"mean": arm["mean"], "n_eval": arm["n_eval"],
                       "config_hash": arm["config_hash"]}
                 for tag, arm in result["arms"].items()},
    }
    _write_json(summary, out / "ablation.json")
    for tag, arm in result["arms"].items():
        _write_json(arm, out / f"metrics_{tag}.json")
    _stamp(out, "ablate", args.seed, config.to_json_obj())
    for tag, arm in result["arms"].items():
        print(f"{tag:>3}: accuracy {arm['mean']['accuracy']:.4f} "
              f"macro-F1 {arm['mean']['macro_f1']:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    dtypes = ([np.float32, np.float64] if args.dtype == "both"
              else [np.float32 if args.dtype == "float32" else np.float64])
    all_ok = True
    for dtype in dtypes:
        results = run_suite(dtype)
        for name, err, ok in results:
            all_ok &= ok
            print(f"{np.dtype(dtype).name} {name}: rel_err={err:.3e} "
                  f"{'PASS' if ok else 'FAIL'}")
    if not all_ok:
        raise NumericError("finite-difference gradient check failed")
    return 0


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which collides with the
    # numeric-failure exit code; remap to the validation code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error:validation: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common_training_flags(p, arch_choices=("mlp", "xattn")):
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", help="fold assignment JSON; computed if absent")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=int, default=5, help="fold count when computing folds")
    if arch_choices:
        p.add_argument("--arch", choices=arch_choices, default=arch_choices[0])
    p.add_argument("--modalities", help="comma list of v,a,t")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--model-dim", dest="model_dim", type=int)
    p.add_argument("--ff-dim", dest="ff_dim", type=int)
    p.add_argument("--n-heads", dest="n_heads", type=int)
    p.add_argument("--n-blocks", dest="n_blocks", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    p.add_argument("--pretrain-batch", dest="pretrain_batch", type=int)
    p.add_argument("--pretrain-lr", dest="pretrain_lr", type=float)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--include-variants", dest="include_variants",
                   action="store_true")
    p.add_argument("--filter", choices=["english_only", "clear_audio"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intentlab",
                     description="tri-modal intent recognition pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset composition report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--filter", choices=["english_only", "clear_audio"])
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("curate", help="collect candidates and resolve annotations")
    p.add_argument("--catalog", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="assign stratified cross-validation folds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--filter", choices=["english_only", "clear_audio"])
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("pretrain", help="contrastive alignment pretraining")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=0.0)
    p.add_argument("--tau", type=float, default=0.07)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=768)
    p.add_argument("--learnable-tau", dest="learnable_tau", action="store_true")
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--filter", choices=["english_only", "clear_audio"])
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="supervised cross-validation training")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune",
                       help="contrastive pretraining plus frozen-head classifier")
    _add_common_training_flags(p, arch_choices=None)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="score predictions or run full CV")
    p.add_argument("--preds", help="JSONL of {true, pred} to score directly")
    p.add_argument("--manifest")
    p.add_argument("--folds")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--arch", choices=["mlp", "xattn", "finetune"], default="mlp")
    p.add_argument("--modalities")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--include-variants", dest="include_variants",
                   action="store_true")
    p.add_argument("--filter", choices=["english_only", "clear_audio"])
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="7-way modality ablation")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--dtype", choices=["float32", "float64", "both"],
                   default="float32")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, NotFittedError) as e:
        print(f"error:validation: {e}", file=sys.stderr)
        return 1
    except NumericError as e:
        print(f"error:numeric: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error:io: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
