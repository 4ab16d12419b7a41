import json
import logging

import pytest

from parascope.cli import main
from synth import write_demo_workspace, write_vectors_file, write_corpus, make_vectors

FAST = dict(n_train=60, n_test=20, dim=12, n_topic=16, n_pairs=6, n_planted=8)


@pytest.fixture()
def workspace(tmp_path):
    return write_demo_workspace(tmp_path, seed=19, domains=("demo",), **FAST)


def run(config, *args):
    return main(["-c", str(config), *args])


class TestTrainMappingCommand:
    def test_writes_model_and_logs_losses(self, workspace, caplog):
        with caplog.at_level(logging.INFO):
            assert run(workspace, "train-mapping") == 0
        model = workspace.parent / "out" / "demo" / "mapping.model"
        assert model.is_file()
        assert "epoch 1 mean loss" in caplog.text

    def test_rerun_is_byte_identical(self, workspace):
        model = workspace.parent / "out" / "demo" / "mapping.model"
        assert run(workspace, "train-mapping") == 0
        first = model.read_bytes()
        assert run(workspace, "train-mapping") == 0
        assert model.read_bytes() == first

    def test_export_table(self, workspace):
        assert run(workspace, "train-mapping", "--export-table") == 0
        exported = workspace.parent / "out" / "demo" / "domain_vectors.txt"
        assert exported.is_file()
        header = exported.read_text().splitlines()[0]
        assert header.split()[1] == str(FAST["dim"])

    def test_missing_vectors_is_usage_error(self, workspace):
        (workspace.parent / "vectors.txt").unlink()
        assert run(workspace, "train-mapping") == 2


class TestEncodeCommand:
    def test_cbow_produces_one_record_per_sentence(self, workspace):
        assert run(workspace, "encode", "--scheme", "cbow", "--splits", "test") == 0
        path = workspace.parent / "out" / "demo" / "encoded" / "cbow_test.jsonl"
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(records) == 2 * FAST["n_test"]
        assert all(r["scheme"] == "cbow" for r in records)

    def test_surprise_without_model_is_runtime_error(self, workspace):
        assert run(workspace, "encode", "--scheme", "surprise") == 1

    def test_skipped_sentences_recorded_in_sidecar(self, tmp_path):
        vectors = make_vectors(["alpha", "beta"], 4, seed=2)
        write_vectors_file(tmp_path / "vectors.txt", vectors)
        records = [
            {"id": "ok", "text": "alpha beta", "predicates": ["core"], "split": "train"},
            {"id": "gone", "text": "zz qq", "predicates": ["core"], "split": "train"},
            {"id": "ok2", "text": "beta alpha", "predicates": ["core"], "split": "train"},
            {"id": "t1", "text": "alpha", "predicates": ["core"], "split": "test"},
            {"id": "t2", "text": "beta", "predicates": ["planted"], "split": "test"},
        ]
        write_corpus(tmp_path / "c.jsonl", records)
        config = tmp_path / "run.toml"
        config.write_text(
            '[paths]\nvectors = "vectors.txt"\noutput_dir = "out"\n'
            "[hyperparams]\nseed = 1\ndev_fraction = 0.4\n"
            '[domains.demo]\ncorpus = "c.jsonl"\nexcluded_predicates = ["planted"]\n',
            encoding="utf-8",
        )
        assert run(config, "encode", "--scheme", "cbow", "--splits", "train") == 0
        sidecar = tmp_path / "out" / "demo" / "encoded" / "cbow_train.skipped.jsonl"
        skipped = [json.loads(line) for line in sidecar.read_text().splitlines()]
        assert any(r["id"] == "gone" for r in skipped)


class TestScoreCommand:
    def test_scores_file_has_threshold_metadata(self, workspace):
        assert run(workspace, "train-mapping") == 0
        assert run(workspace, "encode", "--scheme", "surprise") == 0
        assert run(workspace, "score", "--scheme", "surprise") == 0
        path = workspace.parent / "out" / "demo" / "scores" / "surprise.jsonl"
        lines = path.read_text().splitlines()
        meta = json.loads(lines[0])["meta"]
        assert meta["scheme"] == "surprise"
        assert 0 < meta["threshold"]["calibration_fraction"] < 1
        rows = [json.loads(line) for line in lines[1:]]
        assert len(rows) == 2 * FAST["n_test"]
        assert all(set(r) == {"id", "score", "flagged"} for r in rows)

    def test_score_without_encoded_artifacts_fails(self, workspace):
        assert run(workspace, "score", "--scheme", "cbow") == 1


class TestEvaluateCommand:
    def test_auc_mode_writes_reports(self, workspace):
        assert (
            run(workspace, "evaluate", "--mode", "auc", "--end-to-end",
                "--methods", "surprise", "cbow")
            == 0
        )
        reports = workspace.parent / "out" / "reports"
        tsv = (reports / "auc_results.tsv").read_text().splitlines()
        assert tsv[0] == "method\tdomain\tmetric\tvalue"
        methods = {line.split("\t")[0] for line in tsv[1:]}
        assert methods == {"surprise", "cbow"}
        assert (reports / "auc_table.txt").is_file()
        assert (reports / "roc_demo.png").is_file()
        assert (reports / "auc_summary.png").is_file()

    def test_downstream_mode_always_has_nofilter_and_oracle(self, workspace):
        assert (
            run(workspace, "evaluate", "--mode", "downstream", "--end-to-end",
                "--methods", "cbow")
            == 0
        )
        tsv = workspace.parent / "out" / "reports" / "downstream_results.tsv"
        methods = {line.split("\t")[0] for line in tsv.read_text().splitlines()[1:]}
        assert {"nofilter", "oracle", "cbow"} <= methods

    def test_evaluate_without_artifacts_and_without_end_to_end_fails(self, workspace):
        assert run(workspace, "evaluate", "--mode", "auc") == 1

    def test_staged_equals_end_to_end(self, workspace):
        root = workspace.parent
        staged = ("--output-dir", str(root / "staged"))
        assert run(workspace, *staged, "train-mapping") == 0
        for scheme in ("surprise", "cbow"):
            assert run(workspace, *staged, "encode", "--scheme", scheme) == 0
            assert run(workspace, *staged, "score", "--scheme", scheme) == 0
        assert (
            run(workspace, *staged, "evaluate", "--mode", "auc",
                "--methods", "surprise", "cbow")
            == 0
        )
        e2e = ("--output-dir", str(root / "e2e"))
        assert (
            run(workspace, *e2e, "evaluate", "--mode", "auc", "--end-to-end",
                "--methods", "surprise", "cbow")
            == 0
        )
        for rel in (
            "demo/scores/surprise.jsonl",
            "demo/scores/cbow.jsonl",
            "demo/mapping.model",
            "reports/auc_results.tsv",
            "reports/auc_table.txt",
        ):
            assert (root / "staged" / rel).read_bytes() == (root / "e2e" / rel).read_bytes(), rel

    def test_jobs_flag_does_not_change_outputs(self, tmp_path):
        config = write_demo_workspace(tmp_path, seed=23, domains=("one", "two"), **FAST)
        assert (
            run(config, "--output-dir", str(tmp_path / "serial"),
                "evaluate", "--mode", "auc", "--end-to-end", "--methods", "cbow")
            == 0
        )
        assert (
            run(config, "--output-dir", str(tmp_path / "parallel"), "--jobs", "2",
                "evaluate", "--mode", "auc", "--end-to-end", "--methods", "cbow")
            == 0
        )
        for rel in ("one/scores/cbow.jsonl", "two/scores/cbow.jsonl", "reports/auc_results.tsv"):
            assert (tmp_path / "serial" / rel).read_bytes() == (
                tmp_path / "parallel" / rel
            ).read_bytes()


class TestAblateCommand:
    def test_emits_four_method_report(self, workspace):
        assert run(workspace, "ablate", "--end-to-end") == 0
        tsv = workspace.parent / "out" / "reports" / "ablation_auc_results.tsv"
        rows = [line.split("\t") for line in tsv.read_text().splitlines()[1:]]
        methods = {row[0] for row in rows if row[2] == "auc"}
        assert methods == {"cbow", "frequency", "pretrained-weights", "surprise"}
        for row in rows:
            if row[2] == "auc":
                assert 0.0 <= float(row[3]) <= 1.0


class TestConfigHandling:
    def test_missing_config_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.delenv("PARASCOPE_CONFIG", raising=False)
        assert main(["train-mapping"]) == 2

    def test_env_var_supplies_config(self, workspace, monkeypatch):
        monkeypatch.setenv("PARASCOPE_CONFIG", str(workspace))
        assert main(["train-mapping"]) == 0

    def test_unknown_domain_selection_is_usage_error(self, workspace):
        assert run(workspace, "--domains", "nope", "--seed", "19", "train-mapping") == 2

    def test_flag_overrides_win(self, workspace):
        assert run(workspace, "--epochs", "1", "train-mapping") == 0
        from parascope.mapping import load_mapping

        mapping = load_mapping(workspace.parent / "out" / "demo" / "mapping.model")
        assert mapping.params.epochs == 1

    def test_downstream_requires_outcomes(self, tmp_path):
        config = write_demo_workspace(tmp_path, seed=3, domains=("demo",), **FAST)
        text = config.read_text().replace('parse_outcomes = "demo_outcomes.jsonl"\n', "")
        config.write_text(text, encoding="utf-8")
        assert run(config, "evaluate", "--mode", "downstream", "--end-to-end") == 2
