import csv
import json

import numpy as np
import pytest

from wbclab.cli import main
from wbclab.data import load_dataset
from wbclab.ensemble import read_logits_csv, read_predictions_csv


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run(["gen-synth", "--out", str(out), "--seed", "0", "--dim", "8",
                "--largest", "240", "--ratio", "0.62", "--floor", "12"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("train")
    cfg = {
        "manifest": str(synth_dir / "manifest.json"),
        "family": "mlp",
        "seed": 0,
        "lr_scale": 400.0,
        "batch_size": 32,
        "stages": [
            {"name": "S1", "epochs": 2, "lr_head": 5e-3, "lr_trunk": 1e-3,
             "warmup_epochs": 1, "batch_size": 32,
             "loss": {"kind": "focal", "gamma": 2.0, "smoothing": 0.1,
                      "mixup_prob": 0.1}},
            {"name": "S2", "epochs": 1, "lr_head": 2e-3, "lr_trunk": 4e-4,
             "batch_size": 32},
        ],
    }
    cfg_path = out / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    code = run(["train", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    return out


class TestGenSynth:
    def test_outputs_exist(self, synth_dir):
        for name in ("manifest.json", "features.bin", "labels.txt", "splits.txt",
                     "ids.txt", "run_manifest.json"):
            assert (synth_dir / name).exists()

    def test_run_manifest_records_seed_and_hash(self, synth_dir):
        manifest = json.loads((synth_dir / "run_manifest.json").read_text())
        assert manifest["seeds"] == {"dataset": 0}
        assert len(manifest["config_hash"]) == 64

    def test_determinism_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["gen-synth", "--out", str(out), "--seed", "5",
                        "--dim", "4", "--largest", "64", "--floor", "8"]) == 0
        assert (a / "features.bin").read_bytes() == (b / "features.bin").read_bytes()
        assert (a / "labels.txt").read_text() == (b / "labels.txt").read_text()


class TestTrain:
    def test_artifacts(self, trained_dir):
        assert (trained_dir / "ckpt_S1.hfck").exists()
        assert (trained_dir / "ckpt_S2.hfck").exists()
        assert (trained_dir / "ckpt_final.hfck").exists()
        assert (trained_dir / "training_curves.png").exists()
        records = [json.loads(ln) for ln in
                   (trained_dir / "training_log.ndjson").read_text().splitlines()]
        assert len(records) == 3
        expected_keys = {"stage", "epoch", "train_loss", "val_macro_f1",
                         "val_tail_macro_f1", "val_tail_composite",
                         "lr_head", "lr_trunk"}
        assert all(set(r) == expected_keys for r in records)

    def test_missing_config_is_config_error(self, tmp_path, capsys):
        code = run(["train", "--config", str(tmp_path / "none.json"),
                    "--out", str(tmp_path)])
        assert code == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["exit_code"] == 3


class TestPredictEvaluate:
    def test_predict_then_evaluate(self, synth_dir, trained_dir, tmp_path):
        pred_out = tmp_path / "pred"
        assert run(["predict", "--checkpoint", str(trained_dir / "ckpt_final.hfck"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--split", "test", "--out", str(pred_out)]) == 0
        assert (pred_out / "logits.csv").exists()
        assert (pred_out / "preds.csv").exists()

        eval_out = tmp_path / "eval"
        assert run(["evaluate", "--pred", str(pred_out / "logits.csv"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--out", str(eval_out)]) == 0
        report = json.loads((eval_out / "report.json").read_text())
        assert 0.0 <= report["macro_f1"] <= 1.0
        assert (eval_out / "confusion.csv").exists()
        assert (eval_out / "confusion_matrix.png").exists()

    def test_evaluate_perfect_predictions(self, synth_dir, tmp_path):
        ds = load_dataset(synth_dir / "manifest.json")
        idx = ds.indices("test")
        pred_path = tmp_path / "perfect.csv"
        with open(pred_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "pred", "true"])
            for i in idx:
                name = ds.registry.names[ds.labels[i]]
                writer.writerow([ds.ids[i], name, name])
        out = tmp_path / "eval"
        assert run(["evaluate", "--pred", str(pred_path),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["macro_f1"] == 1.0

    def test_tta_views_and_average(self, synth_dir, trained_dir, tmp_path):
        pred_out = tmp_path / "views"
        assert run(["predict", "--checkpoint", str(trained_dir / "ckpt_final.hfck"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--split", "val", "--views", "3", "--view-sigma", "0.05",
                    "--seed", "1", "--out", str(pred_out)]) == 0
        files = [pred_out / f"logits_view{k}.csv" for k in range(3)]
        assert all(f.exists() for f in files)
        avg_out = tmp_path / "avg"
        assert run(["tta-average", "--inputs", *map(str, files),
                    "--out", str(avg_out)]) == 0
        merged = read_logits_csv(avg_out / "logits.csv")
        views = [read_logits_csv(f) for f in files]
        expect = sum(v.logits for v in views) / 3
        assert np.allclose(merged.logits, expect, atol=1e-12)


class TestEnsembleCommands:
    @pytest.fixture()
    def triple(self, synth_dir, trained_dir, tmp_path):
        outs = []
        for split in ("val", "test"):
            for k in (0, 1, 2):
                out = tmp_path / f"pred{split}{k}"
                sigma = [0.0, 0.3, 0.35][k]
                args = ["predict", "--checkpoint", str(trained_dir / "ckpt_final.hfck"),
                        "--manifest", str(synth_dir / "manifest.json"),
                        "--split", split, "--out", str(out)]
                if sigma:
                    # jittered views stand in for diverse advisors
                    args += ["--views", "2", "--view-sigma", str(sigma), "--seed", str(k)]
                assert run(args) == 0
                outs.append(out)
        return outs

    def test_discover_then_ensemble(self, synth_dir, triple, tmp_path):
        val0, val1, val2 = triple[0], triple[1], triple[2]
        test0, test1, test2 = triple[3], triple[4], triple[5]
        val_files = [val0 / "logits.csv", val1 / "logits_view1.csv",
                     val2 / "logits_view1.csv"]
        pairs_out = tmp_path / "pairs"
        assert run(["discover-pairs", "--primary", str(val_files[0]),
                    "--a1", str(val_files[1]), "--a2", str(val_files[2]),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--out", str(pairs_out)]) == 0
        pairs = json.loads((pairs_out / "pairs.json").read_text())
        for item in pairs:
            assert item["delta"] > 0
            assert item["support"] >= 1

        ens_out = tmp_path / "ens"
        assert run(["ensemble", "--primary", str(test0 / "logits.csv"),
                    "--a1", str(test1 / "logits_view1.csv"),
                    "--a2", str(test2 / "logits_view1.csv"),
                    "--pairs", str(pairs_out / "pairs.json"),
                    "--out", str(ens_out)]) == 0
        assert (ens_out / "final_predictions.csv").exists()
        assert (ens_out / "override_log.ndjson").exists()

    def test_empty_pairs_identity(self, synth_dir, triple, tmp_path):
        test0 = triple[3]
        pairs_path = tmp_path / "empty_pairs.json"
        pairs_path.write_text("[]")
        out = tmp_path / "ens_empty"
        assert run(["ensemble", "--primary", str(test0 / "logits.csv"),
                    "--a1", str(test0 / "logits.csv"),
                    "--a2", str(test0 / "logits.csv"),
                    "--pairs", str(pairs_path), "--out", str(out)]) == 0
        assert (out / "final_predictions.csv").read_text() == \
               (test0 / "preds.csv").read_text()
        last = (out / "override_log.ndjson").read_text().splitlines()[-1]
        assert json.loads(last)["modified"] == 0


class TestDecoupledCommand:
    def test_retrain_decoupled(self, synth_dir, trained_dir, tmp_path):
        out = tmp_path / "dec"
        assert run(["retrain-decoupled",
                    "--checkpoint", str(trained_dir / "ckpt_final.hfck"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--epochs", "2", "--lr", "0.002", "--batch-size", "32",
                    "--out", str(out)]) == 0
        assert (out / "ckpt_decoupled.hfck").exists()


class TestAuditCommands:
    @pytest.fixture()
    def audit_setup(self, synth_dir, trained_dir, tmp_path):
        pred_out = tmp_path / "pred"
        assert run(["predict", "--checkpoint", str(trained_dir / "ckpt_final.hfck"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--split", "val", "--out", str(pred_out)]) == 0
        return pred_out

    def test_extract_sample_summarize_heatmap(self, synth_dir, audit_setup, tmp_path):
        out = tmp_path / "audit"
        assert run(["audit", "extract", "--logits", str(audit_setup / "logits.csv"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--split", "val", "--out", str(out)]) == 0
        discordant = out / "cases_discordant_val.json"
        assert discordant.exists()
        payload = json.loads(discordant.read_text())
        margins = [c["margin"] for c in payload["cases"]]
        assert margins == sorted(margins)

        assert run(["audit", "sample", "--logits", str(audit_setup / "logits.csv"),
                    "--manifest", str(synth_dir / "manifest.json"),
                    "--split", "val", "--per-class", "2", "--seed", "3",
                    "--out", str(out)]) == 0
        agreement = out / "cases_agreement_val.json"
        assert agreement.exists()

        verdicts = out / "verdicts.ndjson"
        record = {"case_id": payload["cases"][0]["id"], "category": "ambiguous",
                  "reviewer": "r1", "ts": 1.0}
        verdicts.write_text(json.dumps(record) + "\n")

        sum_out = tmp_path / "summary"
        assert run(["audit", "summarize", "--cases", str(discordant), str(agreement),
                    "--verdicts", str(verdicts), "--out", str(sum_out)]) == 0
        summary = json.loads((sum_out / "summary.json").read_text())
        discordant_rows = [r for r in summary["rows"] if r["origin"] == "discordant"]
        assert discordant_rows[0]["n_reviewed"] == 1

        heat_out = tmp_path / "heat"
        assert run(["audit", "heatmap", "--cases", str(discordant),
                    "--verdicts", str(verdicts), "--out", str(heat_out)]) == 0
        assert (heat_out / "heatmap.json").exists()
        assert (heat_out / "directional_matrix.png").exists()


class TestFreezeConfig:
    def test_head_only_training_via_freeze(self, synth_dir, tmp_path):
        """Linear head-only staging: trunk and stem pinned through the config."""
        from wbclab.checkpoint import load_checkpoint
        from wbclab.model import parameters
        cfg = {
            "manifest": str(synth_dir / "manifest.json"),
            "family": "linear",
            "seed": 0,
            "freeze": ["trunk.weight", "trunk.bias", "stem.gamma", "stem.beta"],
            "stages": [{"name": "S1", "epochs": 1, "lr_head": 1e-2,
                        "lr_trunk": 1e-3, "batch_size": 32,
                        "loss": {"mixup_prob": 0.0}}],
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        assert run(["train", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        model, _ = load_checkpoint(tmp_path / "ckpt_final.hfck")
        params = parameters(model)
        assert np.array_equal(params["trunk.weight"], np.eye(8))
        assert np.array_equal(params["stem.gamma"], np.ones(8))
        assert not np.allclose(params["head.weight"], 0.0)


class TestExitCodes:
    def test_unknown_subcommand_exit_2(self, capsys):
        assert run(["frobnicate"]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["exit_code"] == 2

    def test_installed_entry_point_subprocess(self, tmp_path):
        import subprocess
        import sys
        result = subprocess.run(
            [sys.executable, "-m", "wbclab.cli", "gen-synth", "--out",
             str(tmp_path / "d"), "--dim", "4", "--largest", "24", "--floor", "8"],
            capture_output=True, text=True)
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "d/manifest.json").exists()

    def test_runtime_error_json_on_stderr(self, tmp_path):
        import subprocess
        import sys
        result = subprocess.run(
            [sys.executable, "-m", "wbclab.cli", "evaluate", "--pred",
             str(tmp_path / "missing.csv"), "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert result.returncode == 3
        payload = json.loads(result.stderr)
        assert payload["error"]["type"] == "ConfigError"

    def test_out_root_env(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("WBCLAB_OUT_ROOT", str(tmp_path))
        assert run(["gen-synth", "--out", "nested/run", "--seed", "1",
                    "--dim", "4", "--largest", "32", "--floor", "8"]) == 0
        assert (tmp_path / "nested/run/manifest.json").exists()
