import json

import numpy as np
import pytest

from flowxai.cli import main
from flowxai.config import RunConfig, config_from_dict, load_config
from flowxai.errors import ConfigInvalid, SampleTooLarge
from flowxai.pipeline import RunPaths, select_explain_instances, run_stages


class TestConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        cfg = RunConfig(seed=5)
        cfg.synth.total_records = 777
        cfg.to_json(path)
        loaded = load_config(path)
        assert loaded.seed == 5
        assert loaded.synth.total_records == 777
        assert loaded.explain.judge.model_name == "llama3.3:70b"

    def test_default_generators_are_the_four_reference_models(self):
        names = [g.model_name for g in RunConfig().explain.generators]
        assert names == ["qwen2.5:14b", "llama3.1:8b", "phi4:14b", "gemma3:27b"]

    def test_unknown_key_is_field_level_error(self):
        with pytest.raises(ConfigInvalid, match="unknown keys.*bogus"):
            config_from_dict({"bogus": 1})
        with pytest.raises(ConfigInvalid, match="train"):
            config_from_dict({"train": {"nope": 2}})

    def test_invalid_values_name_the_field(self):
        with pytest.raises(ConfigInvalid, match="test_fraction"):
            config_from_dict({"split": {"test_fraction": 1.5}})
        with pytest.raises(ConfigInvalid, match="n_runs"):
            config_from_dict({"n_runs": 0})
        with pytest.raises(ConfigInvalid, match="generators"):
            config_from_dict({"explain": {"generators": []}})

    def test_missing_file_and_bad_json(self, tmp_path):
        with pytest.raises(ConfigInvalid, match="not found"):
            load_config(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigInvalid, match="not valid JSON"):
            load_config(bad)


class TestSelectInstances:
    def test_n_equals_rows_gives_all_ids(self):
        assert select_explain_instances(5, 5, seed=0) == [0, 1, 2, 3, 4]

    def test_seeded_and_sorted(self):
        a = select_explain_instances(100, 10, seed=3)
        b = select_explain_instances(100, 10, seed=3)
        assert a == b == sorted(a)
        assert len(set(a)) == 10

    def test_too_large_rejected(self):
        with pytest.raises(SampleTooLarge):
            select_explain_instances(5, 6, seed=0)


def tiny_config(out_dir, seed=21):
    cfg = RunConfig(seed=seed, out_dir=str(out_dir), mock_llm=True)
    cfg.synth.total_records = 700
    cfg.model.d_model = 16
    cfg.model.n_layers = 1
    cfg.model.n_heads = 2
    cfg.train.batch_size = 128
    cfg.train.max_epochs = 2
    cfg.train.patience = 2
    cfg.train.learning_rate = 1e-3
    cfg.tree.min_samples_leaf = 10
    cfg.attribution.steps = 8
    cfg.attribution.sample_size = 20
    cfg.explain.n_instances = 5
    cfg.explain.steps = 8
    cfg.bench.n_samples = 20
    cfg.bench.warmup = 3
    return cfg


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_run")
    cfg = tiny_config(out)
    paths = run_stages(cfg, ["synth", "ingest", "train", "attribute", "rules",
                             "explain", "validate", "bench", "report"])
    return cfg, paths


class TestStageArtifacts:
    def test_all_artifacts_exist(self, tiny_run):
        _, paths = tiny_run
        for artifact in (paths.synth_csv, paths.vocabulary, paths.scaler,
                         paths.checkpoint, paths.history, paths.test_logits,
                         paths.global_importance, paths.attribute_instances,
                         paths.tree, paths.rules, paths.rules_text, paths.pruning,
                         paths.requests, paths.explanations, paths.audit,
                         paths.validation_records, paths.validation_summary_csv,
                         paths.validation_summary_json, paths.latency,
                         paths.report_md, paths.report_json, paths.manifest,
                         paths.run_meta):
            assert artifact.exists(), artifact

    def test_manifest_covers_artifacts_with_hashes(self, tiny_run):
        _, paths = tiny_run
        manifest = json.loads(paths.manifest.read_text())["artifacts"]
        assert "data/synth.csv" in manifest
        assert all(len(h) == 64 for h in manifest.values())
        assert "manifest.json" not in manifest
        assert "run_meta.json" not in manifest

    def test_requests_have_five_features_and_matching_clause(self, tiny_run):
        _, paths = tiny_run
        lines = [json.loads(l) for l in paths.requests.read_text().splitlines()]
        assert len(lines) == 5
        for raw in lines:
            assert len(raw["top5"]) == 5
            assert raw["clause"].startswith("class(")

    def test_validation_summary_has_all_generators(self, tiny_run):
        cfg, paths = tiny_run
        summaries = json.loads(paths.validation_summary_json.read_text())
        assert [s["generator"] for s in summaries] == sorted(
            g.model_name for g in cfg.explain.generators)
        for s in summaries:
            assert s["attribution_faithfulness"] == 1.0
            assert s["struct_valid_pct"] == 100.0

    def test_attribute_instances_report_raw_values_and_residual(self, tiny_run):
        _, paths = tiny_run
        first = json.loads(paths.attribute_instances.read_text().splitlines()[0])
        assert set(first) == {"record_id", "predicted_class", "residual", "features"}
        assert len(first["features"]) == 29
        from flowxai import schema
        assert first["predicted_class"] in schema.CLASS_NAMES

    def test_report_mentions_core_sections(self, tiny_run):
        _, paths = tiny_run
        text = paths.report_md.read_text()
        for heading in ("## Per-class performance", "## Extracted rules",
                        "## Pruning curve", "## Explanation quality",
                        "## Inference latency"):
            assert heading in text

    def test_history_csv_shape(self, tiny_run):
        _, paths = tiny_run
        lines = paths.history.read_text().splitlines()
        assert lines[0] == "epoch,loss,macro_f1"
        assert len(lines) >= 2


class TestMissingArtifacts:
    def test_rules_without_checkpoint(self, tmp_path):
        cfg = tiny_config(tmp_path / "partial")
        run_stages(cfg, ["synth", "ingest"])
        code = main(["--out-dir", str(tmp_path / "partial"), "rules"])
        assert code == 3

    def test_ingest_without_synth(self, tmp_path):
        code = main(["--out-dir", str(tmp_path / "empty"), "ingest"])
        assert code == 3


class TestCliExitCodes:
    def test_bad_config_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"n_runs": 0}')
        assert main(["--config", str(bad), "synth"]) == 2

    def test_unknown_stage_exits_2(self, tmp_path):
        assert main(["--out-dir", str(tmp_path), "pipeline",
                     "--stages", "synth,warp"]) == 2

    def test_synth_stage_exits_0(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg = tiny_config(tmp_path / "out")
        cfg.to_json(cfg_path)
        assert main(["--config", str(cfg_path), "synth"]) == 0
        assert (tmp_path / "out" / "data" / "synth.csv").exists()

    def test_seed_and_outdir_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        tiny_config(tmp_path / "ignored", seed=1).to_json(cfg_path)
        out = tmp_path / "other"
        assert main(["--config", str(cfg_path), "--out-dir", str(out),
                     "--seed", "9", "synth"]) == 0
        assert (out / "data" / "synth.csv").exists()

    def test_show_config(self, capsys, tmp_path):
        assert main(["show-config"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["mock_llm"] is True


class TestExternalFailureExitCode:
    def test_unreachable_endpoint_exits_4(self, tmp_path, tiny_run):
        import copy
        from flowxai.config import LlmSection
        cfg, paths = tiny_run
        cfg2 = copy.deepcopy(cfg)
        cfg2.mock_llm = False
        cfg2.explain.generators = [LlmSection(
            model_name="real", endpoint_url="http://127.0.0.1:9/unreachable",
            retries=0, timeout_s=2.0)]
        cfg_path = tmp_path / "real_llm.json"
        cfg2.to_json(cfg_path)
        assert main(["--config", str(cfg_path), "--out-dir", str(paths.root),
                     "explain"]) == 4


class TestMultiRun:
    def test_two_runs_aggregate_fidelity_and_f1(self, tmp_path):
        cfg = tiny_config(tmp_path / "multi")
        cfg.n_runs = 2
        from flowxai.pipeline import run_pipeline
        paths = run_pipeline(cfg, ["synth", "ingest", "train", "attribute",
                                   "rules", "explain", "validate", "report"])
        assert (paths.root / "runs" / "run_00" / "manifest.json").exists()
        assert (paths.root / "runs" / "run_01" / "manifest.json").exists()
        report = json.loads((paths.root / "report" / "report.json").read_text())
        agg = report["aggregate"]
        assert agg["n_runs"] == 2
        assert 0.0 <= agg["fidelity_mean"] <= 1.0
        assert agg["fidelity_std"] >= 0.0
        text = (paths.root / "report" / "report.md").read_text()
        assert "±" in text  # mean +/- std formatting

    def test_run_seeds_differ(self, tmp_path):
        cfg = tiny_config(tmp_path / "multi2")
        cfg.n_runs = 2
        from flowxai.pipeline import run_pipeline
        paths = run_pipeline(cfg, ["synth"])
        a = (paths.root / "runs" / "run_00" / "data" / "synth.csv").read_bytes()
        b = (paths.root / "runs" / "run_01" / "data" / "synth.csv").read_bytes()
        assert a != b


class TestLexiconOverride:
    def test_custom_lexicon_file_is_honored(self, tmp_path, tiny_run):
        cfg, paths = tiny_run
        # A lexicon with swapped vocabulary: mock bullets use standard terms,
        # none of which appear here, so every bullet is excluded and the
        # no-directional-language rule yields score 1.0 with n_checked 0.
        lexicon = tmp_path / "lexicon.json"
        lexicon.write_text(json.dumps({"positive_terms": ["skyrocketing"],
                                       "negative_terms": ["plummeting"]}))
        import copy
        cfg2 = copy.deepcopy(cfg)
        cfg2.lexicon_path = str(lexicon)
        from flowxai.pipeline import stage_validate
        stage_validate(cfg2, paths)
        records = [json.loads(l) for l in
                   paths.validation_records.read_text().splitlines()]
        assert all(r["faithfulness_n_checked"] == 0 for r in records)
        assert all(r["attribution_faithfulness"] == 1.0 for r in records)
        # Restore the artifacts written with the default lexicon.
        from flowxai.pipeline import stage_validate as restore
        restore(cfg, paths)
