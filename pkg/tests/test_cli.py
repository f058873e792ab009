"""Command-line interface: artifacts, exit codes, reproducibility."""
import json

import numpy as np
import pytest

from intentlab.cli import main
from intentlab.models.checkpoint import load_checkpoint

from synth import write_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-corpus")
    write_corpus(root, n_per_class=6, dim=6, margin=6.0, noise=0.4,
                 with_variants=True, token_range=(2, 3))
    return root


def manifest_arg(corpus):
    return str(corpus / "manifest.jsonl")


def test_stats_prints_and_writes(corpus, tmp_path, capsys):
    out = tmp_path / "stats"
    code = main(["stats", "--manifest", manifest_arg(corpus),
                 "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "records: 552" in printed
    assert "originals 138" in printed
    stats = json.loads((out / "stats.json").read_text())
    assert stats["total_originals"] == 138
    stamp = json.loads((out / "run.json").read_text())
    assert set(stamp) == {"command", "seed", "config_hash", "version"}
    assert stamp["command"] == "stats"


def test_stats_filter(corpus, capsys):
    code = main(["stats", "--manifest", manifest_arg(corpus),
                 "--filter", "english_only"])
    assert code == 0
    assert "originals 92" in capsys.readouterr().out


def test_missing_manifest_is_io_error(tmp_path, capsys):
    code = main(["stats", "--manifest", str(tmp_path / "nope.jsonl")])
    assert code == 3
    assert "error:io:" in capsys.readouterr().err


def test_bad_manifest_is_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"video_id": "a"}\n')
    code = main(["stats", "--manifest", str(bad)])
    assert code == 1
    assert "error:validation:" in capsys.readouterr().err


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["split", "--out", "/tmp/x"])  # missing --manifest and --seed
    assert exc.value.code == 1
    assert "error:validation:" in capsys.readouterr().err


def test_unknown_filter_choice_exits_1(corpus, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["stats", "--manifest", manifest_arg(corpus),
              "--filter", "german_only"])
    assert exc.value.code == 1


def test_split_outputs_and_determinism(corpus, tmp_path, capsys):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["split", "--manifest", manifest_arg(corpus),
                 "--out", str(out1), "--seed", "3"]) == 0
    assert main(["split", "--manifest", manifest_arg(corpus),
                 "--out", str(out2), "--seed", "3"]) == 0
    f1 = (out1 / "folds.json").read_bytes()
    f2 = (out2 / "folds.json").read_bytes()
    assert f1 == f2
    assert (out1 / "run.json").read_bytes() == (out2 / "run.json").read_bytes()
    folds = json.loads(f1)
    assert folds["k"] == 5 and folds["seed"] == 3
    assert len(folds["assignment"]) == 552


def test_split_infeasible_k(corpus, tmp_path, capsys):
    code = main(["split", "--manifest", manifest_arg(corpus),
                 "--out", str(tmp_path / "s"), "--seed", "0", "--k", "7"])
    assert code == 1
    assert "error:validation:" in capsys.readouterr().err


def test_curate_pipeline(tmp_path, capsys):
    catalog = tmp_path / "catalog.jsonl"
    with open(catalog, "w") as fh:
        for vid, title, human in (
            ("a1", "funny cats", True),
            ("a2", "more funny cats", True),
            ("a3", "funny but long", True),
            ("b1", "deep dive story", False),
        ):
            fh.write(json.dumps({
                "video_id": vid, "title": title, "description": "",
                "tags": [], "duration_s": 500.0 if vid == "a3" else 90.0,
                "human_centric": human,
            }) + "\n")
    (tmp_path / "keywords.tsv").write_text(
        "Comedy\tfunny\nDrama / storytelling\tstory\nDrama / storytelling\tghost\n")
    with open(tmp_path / "annotations.jsonl", "w") as fh:
        fh.write(json.dumps({"video_id": "a1", "decisions": [
            {"action": "keep"}, {"action": "keep"}, {"action": "keep"}]}) + "\n")
        fh.write(json.dumps({"video_id": "a2", "decisions": [
            {"action": "change", "to": "Financial fraud"},
            {"action": "change", "to": "Financial fraud"},
            {"action": "remove"}]}) + "\n")
    out = tmp_path / "curated"
    code = main(["curate", "--catalog", str(catalog),
                 "--keywords", str(tmp_path / "keywords.tsv"),
                 "--annotations", str(tmp_path / "annotations.jsonl"),
                 "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "ghost" in captured.err  # unmatched keyword warning
    assert "collected 2  kept 1  relabeled 1  discarded 0" in captured.out
    lines = (out / "manifest.jsonl").read_text().splitlines()
    kept = [json.loads(x) for x in lines]
    assert [r["video_id"] for r in kept] == ["a1", "a2"]
    assert kept[1]["class"] == "Financial fraud"
    report = json.loads((out / "curation_report.json").read_text())
    assert report["totals"]["collected"] == 2
    assert report["unmatched_keywords"] == [["Drama / storytelling", "ghost"]]


def test_pretrain_outputs(corpus, tmp_path, capsys):
    out = tmp_path / "pre"
    code = main(["pretrain", "--manifest", manifest_arg(corpus),
                 "--out", str(out), "--seed", "0", "--epochs", "2",
                 "--batch", "64", "--embed-dim", "16", "--lr", "1e-3"])
    assert code == 0
    arrays = load_checkpoint(out / "heads.ihqc")
    assert any(k.startswith("head_video") for k in arrays)
    csv_lines = (out / "pretrain_loss.csv").read_text().splitlines()
    assert csv_lines[0] == "epoch,text_video,video_audio,audio_text,total"
    assert len(csv_lines) == 3


def test_pretrain_warns_without_variants(tmp_path, capsys):
    write_corpus(tmp_path, n_per_class=2, dim=6, with_variants=False)
    out = tmp_path / "pre"
    code = main(["pretrain", "--manifest", str(tmp_path / "manifest.jsonl"),
                 "--out", str(out), "--seed", "0", "--epochs", "1",
                 "--embed-dim", "8"])
    assert code == 0
    assert "no augmentation variants" in capsys.readouterr().err


def test_train_writes_full_artifact_set(corpus, tmp_path, capsys):
    out = tmp_path / "train"
    code = main(["train", "--manifest", manifest_arg(corpus),
                 "--out", str(out), "--seed", "0", "--arch", "mlp",
                 "--epochs", "2", "--batch", "8", "--lr", "2e-3"])
    assert code == 0
    assert (out / "metrics.json").exists()
    assert (out / "confusion.csv").exists()
    assert (out / "folds.json").exists()
    for fold in range(5):
        assert (out / f"fold{fold}.ihqc").exists()
        header = (out / f"history_fold{fold}.csv").read_text().splitlines()[0]
        assert header == "epoch,split,loss,accuracy,lr"
    report = json.loads((out / "metrics.json").read_text())
    assert report["n_eval"] == 138
    assert "_models" not in report
    stamp = json.loads((out / "run.json").read_text())
    assert stamp["command"] == "train" and stamp["seed"] == 0


def test_train_reruns_byte_identical(corpus, tmp_path):
    args = ["--manifest", manifest_arg(corpus), "--seed", "1",
            "--arch", "mlp", "--epochs", "2", "--batch", "8", "--lr", "2e-3"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["train", "--out", str(out1), *args]) == 0
    assert main(["train", "--out", str(out2), *args]) == 0
    for name in ("metrics.json", "confusion.csv", "folds.json", "run.json",
                 "fold0.ihqc", "history_fold0.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_train_with_existing_folds(corpus, tmp_path):
    split_out = tmp_path / "split"
    assert main(["split", "--manifest", manifest_arg(corpus),
                 "--out", str(split_out), "--seed", "5"]) == 0
    out = tmp_path / "train"
    code = main(["train", "--manifest", manifest_arg(corpus),
                 "--out", str(out), "--seed", "5",
                 "--folds", str(split_out / "folds.json"),
                 "--epochs", "1", "--batch", "8"])
    assert code == 0
    assert not (out / "folds.json").exists()  # supplied, not recreated
    report = json.loads((out / "metrics.json").read_text())
    folds = json.loads((split_out / "folds.json").read_text())
    assert folds["seed"] == 5
    assert report["fold_hash"]


def test_finetune_command(corpus, tmp_path, capsys):
    out = tmp_path / "ft"
    code = main(["finetune", "--manifest", manifest_arg(corpus),
                 "--out", str(out), "--seed", "0",
                 "--epochs", "2", "--batch", "16", "--lr", "1e-3",
                 "--embed-dim", "16", "--pretrain-epochs", "2",
                 "--pretrain-batch", "64", "--pretrain-lr", "2e-3"])
    assert code == 0
    arrays = load_checkpoint(out / "fold0.ihqc")
    assert any(k.startswith("heads.") for k in arrays)
    assert any(k.startswith("clf.") for k in arrays)


def test_ablate_writes_all_arms(corpus, tmp_path, capsys):
    out = tmp_path / "abl"
    code = main(["ablate", "--manifest", manifest_arg(corpus),
                 "--out", str(out), "--seed", "0",
                 "--epochs", "1", "--batch", "16", "--lr", "2e-3"])
    assert code == 0
    summary = json.loads((out / "ablation.json").read_text())
    assert set(summary["arms"]) == {"v", "a", "t", "va", "vt", "at", "vat"}
    for tag in summary["arms"]:
        arm = json.loads((out / f"metrics_{tag}.json").read_text())
        assert arm["fold_hash"] == summary["fold_hash"]


def test_evaluate_preds_hand_case(tmp_path, capsys):
    preds = tmp_path / "preds.jsonl"
    rows = [
        {"true": "Comedy", "pred": "Comedy"},
        {"true": "Comedy", "pred": "Financial fraud"},
        {"true": 1, "pred": 1},
        {"true": "Pseudoscience", "pred": "Pseudoscience"},
    ]
    with open(preds, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    out = tmp_path / "eval"
    code = main(["evaluate", "--preds", str(preds), "--out", str(out)])
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["accuracy"] == pytest.approx(3 / 4)
    assert "accuracy 0.7500" in capsys.readouterr().out


def test_evaluate_preds_binary_collapse(tmp_path, capsys):
    preds = tmp_path / "preds.jsonl"
    rows = [
        # Comedy is benign; Financial fraud malicious: the collapse makes
        # the second row a correct binary call despite the 23-way miss
        {"true": "Financial fraud", "pred": "Financial fraud"},
        {"true": "Pseudoscience", "pred": "Financial fraud"},
        {"true": "Comedy", "pred": "Drama / storytelling"},
        {"true": "Comedy", "pred": "Fear-mongering"},
    ]
    with open(preds, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    out = tmp_path / "eval-b"
    code = main(["evaluate", "--preds", str(preds), "--out", str(out),
                 "--binary"])
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["accuracy"] == pytest.approx(3 / 4)
    assert set(metrics["per_class"]) == {"benign", "malicious"}


def test_evaluate_needs_input(tmp_path, capsys):
    code = main(["evaluate", "--out", str(tmp_path / "e")])
    assert code == 1
    assert "error:validation:" in capsys.readouterr().err


def test_gradcheck_passes_float32(capsys):
    code = main(["gradcheck", "--dtype", "float32"])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
