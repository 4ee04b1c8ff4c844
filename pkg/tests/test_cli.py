"""Command-line workflows, exit codes, and artifact determinism."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from chatlinks.cli import main


runner = CliRunner()


def run(*args, expect=0):
    result = runner.invoke(main, [str(a) for a in args])
    if result.exit_code != expect:  # pragma: no cover - debugging aid
        raise AssertionError(
            f"exit {result.exit_code} (wanted {expect}) for {args}:\n{result.output}"
            + (f"\n{result.exception}" if result.exception else "")
        )
    return result


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small synthetic corpus with annotations, generated via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    run(
        "synth",
        "--out-corpus", root / "corpus.jsonl",
        "--out-annotations", root / "annots.jsonl",
        "--theta-out", root / "theta.json",
        "--synth-chats", 12,
        "--seed", 3,
    )
    return root


class TestSynthAndIngest:
    def test_synth_artifacts_exist(self, workspace):
        assert (workspace / "corpus.jsonl").exists()
        assert (workspace / "annots.jsonl").exists()
        assert (workspace / "corpus.jsonl.meta.json").exists()

    def test_ingest_normalizes(self, workspace, tmp_path):
        result = run(
            "ingest",
            "--corpus", workspace / "corpus.jsonl",
            "--out", tmp_path / "norm.jsonl",
            "--vocab-out", tmp_path / "vocab.json",
        )
        assert "ingested 12 chats" in result.output
        vocab = json.loads((tmp_path / "vocab.json").read_text())
        assert vocab["config"]["seed"] == 0  # effective config echoed
        assert vocab["words"]

    def test_stats(self, workspace, tmp_path):
        run("stats", "--corpus", workspace / "corpus.jsonl", "--out", tmp_path / "s.json")
        stats = json.loads((tmp_path / "s.json").read_text())
        assert stats["n_chats"] == 12
        assert sum(stats["length_histogram"].values()) == 12
        assert 0.0 <= stats["mean_exchange_ratio"] <= 1.0


class TestTrainPredictEval:
    def test_round_trip(self, workspace, tmp_path):
        model = tmp_path / "model.json"
        run(
            "train",
            "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl",
            "--out", model, "--l2", 0.5,
        )
        preds = tmp_path / "preds.jsonl"
        run("predict", "--corpus", workspace / "corpus.jsonl", "--model", model,
            "--out", preds)
        report_path = tmp_path / "report.json"
        run(
            "eval",
            "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl",
            "--preds", f"Discriminative={preds}",
            "--out", report_path,
        )
        report = json.loads(report_path.read_text())
        names = [row["name"] for row in report["rows"]]
        assert names == ["Rule1", "Rule2", "Discriminative"]
        by_name = {row["name"]: row for row in report["rows"]}
        assert by_name["Discriminative"]["accuracy"] > by_name["Rule1"]["accuracy"]

    def test_eval_on_annotations_as_predictions_is_perfect(self, workspace, tmp_path):
        # synthetic annotators are identical, so the annotation file itself
        # decodes to accuracy 1.0
        report_path = tmp_path / "perfect.json"
        run(
            "eval",
            "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl",
            "--preds", f"Gold={workspace / 'annots.jsonl'}",
            "--out", report_path,
        )
        report = json.loads(report_path.read_text())
        gold_row = [r for r in report["rows"] if r["name"] == "Gold"][0]
        assert gold_row["accuracy"] == 1.0
        assert gold_row["weighted_f1"] == 1.0


class TestKappaCommand:
    def test_identical_annotators(self, workspace, tmp_path):
        out = tmp_path / "kappa.json"
        run("kappa", "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl", "--out", out)
        payload = json.loads(out.read_text())
        assert payload["kappa"] == 1.0
        assert payload["unanimous_share"] == 1.0
        assert payload["human_performance"] == {"mean": 1.0, "std": 0.0}
        assert payload["agreement_upper_bound"] == 1.0

    def test_noisy_annotators_lower_kappa(self, tmp_path):
        run(
            "synth",
            "--out-corpus", tmp_path / "c.jsonl",
            "--out-annotations", tmp_path / "a.jsonl",
            "--synth-chats", 10,
            "--synth-disagreement", 0.4,
            "--seed", 4,
        )
        out = tmp_path / "kappa.json"
        run("kappa", "--corpus", tmp_path / "c.jsonl",
            "--annotations", tmp_path / "a.jsonl", "--out", out)
        payload = json.loads(out.read_text())
        assert payload["kappa"] < 0.9
        assert payload["unanimous_share"] < 1.0
        assert payload["agreement_upper_bound"] >= payload["human_performance"]["mean"]


class TestGradcheck:
    def test_passes_at_default_tolerance(self):
        result = run("gradcheck", "--seed", 11, "--trials", 1)
        assert "max relative gradient error" in result.output

    def test_fails_with_impossible_tolerance(self):
        run("gradcheck", "--seed", 11, "--trials", 1, "--tolerance", 1e-18, expect=1)


class TestCrossval:
    def test_fold_rows_match_direct_split(self, workspace, tmp_path):
        out = tmp_path / "cv.json"
        run(
            "crossval",
            "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl",
            "--out", out, "--folds", 3, "--l2", 0.5, "--seed", 9,
        )
        payload = json.loads(out.read_text())
        assert len(payload["folds"]) == 3
        assert [r["name"] for r in payload["mean"]] == [
            "Rule1", "Rule2", "Discriminative",
        ]

        # recompute one fold's Rule1 accuracy directly
        from chatlinks import (
            corpus_accuracy,
            kfold_split,
            load_annotations,
            load_corpus,
            rule1,
        )

        chats, _ = load_corpus(workspace / "corpus.jsonl")
        annots = {
            a.chat_id: a
            for a in load_annotations(workspace / "annots.jsonl", chats)
        }
        _, test_chats = kfold_split(chats, k=3, seed=9)[0]
        preds = {c.chat_id: [l.distance for l in rule1(c)] for c in test_chats}
        expected = corpus_accuracy(preds, [annots[c.chat_id] for c in test_chats])
        fold0 = payload["folds"][0]["rows"][0]
        assert fold0["name"] == "Rule1"
        assert fold0["accuracy"] == pytest.approx(expected)


class TestValidationErrors:
    def test_missing_corpus_exits_one(self, tmp_path):
        run("stats", "--corpus", tmp_path / "nope.jsonl",
            "--out", tmp_path / "s.json", expect=1)

    def test_unknown_config_key_rejected(self, workspace, tmp_path):
        config = tmp_path / "config.json"
        config.write_text('{"not_a_key": 1}')
        result = run(
            "stats", "--config", config,
            "--corpus", workspace / "corpus.jsonl",
            "--out", tmp_path / "s.json", expect=1,
        )
        assert "unknown config keys" in result.output

    def test_config_file_applies_and_options_override(self, workspace, tmp_path):
        config = tmp_path / "config.json"
        config.write_text('{"seed": 42, "synth_chats": 3}')
        run(
            "synth", "--config", config,
            "--out-corpus", tmp_path / "c.jsonl",
            "--seed", 43,
        )
        meta = json.loads((tmp_path / "c.jsonl.meta.json").read_text())
        assert meta["config"]["seed"] == 43  # option beats file
        assert meta["config"]["synth_chats"] == 3

    def test_base_model_with_lda_flag_rejected(self, workspace, tmp_path):
        model = tmp_path / "model.json"
        run(
            "train",
            "--corpus", workspace / "corpus.jsonl",
            "--annotations", workspace / "annots.jsonl",
            "--out", model,
        )
        lda = tmp_path / "lda.json"
        run(
            "lda-train", "--corpus", workspace / "corpus.jsonl", "--out", lda,
            "--lda-topics", 2, "--lda-iterations", 12, "--lda-burn-in", 6,
            "--lda-sample-lag", 2,
        )
        result = run(
            "predict", "--corpus", workspace / "corpus.jsonl",
            "--model", model, "--lda", lda,
            "--out", tmp_path / "p.jsonl", expect=1,
        )
        assert "mode mismatch" in result.output


class TestDeterminism:
    def test_repeat_runs_byte_identical(self, workspace, tmp_path):
        first = tmp_path / "one"
        second = tmp_path / "two"
        first.mkdir()
        second.mkdir()
        for target in (first, second):
            run(
                "synth",
                "--out-corpus", target / "corpus.jsonl",
                "--out-annotations", target / "annots.jsonl",
                "--synth-chats", 8, "--seed", 21,
            )
            run(
                "train",
                "--corpus", target / "corpus.jsonl",
                "--annotations", target / "annots.jsonl",
                "--out", target / "model.json", "--l2", 0.5,
            )
        for name in ("corpus.jsonl", "annots.jsonl", "model.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
