"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines interleaved; without ``-s`` they appear in captured output on failure.
"""

import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from helpers import (brute_force_macro_f1, brute_force_prf,
                     exhaustive_pair_search, finite_diff_grads,
                     frozen_mask_loss, max_rel_error)
from wbclab.audit import Verdict, VerdictStore, summarize
from wbclab.checkpoint import load_checkpoint, save_checkpoint
from wbclab.cli import main
from wbclab.data import DEFAULT_REGISTRY, read_features, write_features
from wbclab.ensemble import (PairSet, PredictionSet, apply_override,
                             default_pairs, discover_pairs, gated_override,
                             read_logits_csv, write_logits_csv)
from wbclab.metrics import (confusion, macro_f1, per_class_prf, tail_composite,
                            tail_indices, tail_macro_f1)
from wbclab.model import backward, forward_batch, init_model, parameters
from wbclab.objective import (LossConfig, focal_alpha, focal_loss,
                              smooth_targets, weighted_cross_entropy)
from wbclab.synthetic import SyntheticConfig, generate_synthetic
from wbclab.trainer import decoupled_retrain, evaluate_split


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


class TestGradientFidelity:
    def test_gradient_fidelity_all_families(self):
        with criterion("gradient-fidelity (analytic vs central differences, <=1e-5)"):
            start = time.monotonic()
            for family in ("linear", "cosine", "mlp"):
                worst = 0.0
                for seed in range(10):
                    rng = np.random.default_rng(5000 + seed)
                    d = int(rng.integers(3, 9))
                    n = int(rng.integers(2, 6))
                    C = 13
                    model = init_model(family, d=d, C=C,
                                       hidden=int(rng.integers(2, 8)), seed=seed,
                                       stem_dropout=0.3, hidden_dropout=0.25,
                                       with_trunk=True)
                    for p in parameters(model).values():
                        p += rng.normal(0, 0.3, p.shape)
                    feats = rng.normal(size=(n, d))
                    labels = rng.integers(0, C, n)
                    alpha = focal_alpha(rng.integers(1, 64, C))
                    cfg = LossConfig(kind="focal", gamma=2.0, smoothing=0.1,
                                     alpha=alpha, mixup_prob=0.0)
                    targets = smooth_targets(labels, 0.1, C)
                    _, cache = forward_batch(model, feats, mode="train",
                                             rng=np.random.default_rng(seed + 99))
                    masks = cache["masks"]
                    _, analytic = backward(model, feats, targets, cfg,
                                           mode="train", masks=masks)
                    loss_fn = frozen_mask_loss(
                        model, feats,
                        lambda lg: focal_loss(lg, targets, alpha, 2.0), masks)
                    numeric = finite_diff_grads(model, feats, loss_fn, h=1e-5)
                    worst = max(worst, max_rel_error(analytic, numeric))
                assert worst <= 1e-5, f"{family}: max rel error {worst}"
            elapsed = time.monotonic() - start
            assert elapsed < 10.0, f"gradient check took {elapsed:.1f}s"


class TestLossReductions:
    def test_focal_gamma0_equals_cross_entropy(self):
        with criterion("loss-reduction (focal gamma=0 == CE within 1e-12; "
                       "eps=0 smoothing == one-hot)"):
            rng = np.random.default_rng(42)
            for _ in range(100):
                n = int(rng.integers(1, 16))
                C = int(rng.integers(2, 14))
                logits = rng.normal(0, 3, (n, C))
                targets = smooth_targets(rng.integers(0, C, n),
                                         float(rng.uniform(0, 0.5)), C)
                fl = focal_loss(logits, targets, alpha=None, gamma=0.0)
                ce = weighted_cross_entropy(logits, targets, weights=None)
                assert abs(fl - ce) <= 1e-12
            labels = rng.integers(0, 13, 50)
            q = smooth_targets(labels, 0.0, 13)
            onehot = np.zeros((50, 13))
            onehot[np.arange(50), labels] = 1.0
            assert np.array_equal(q, onehot)


class TestMetricOracle:
    def test_metrics_match_brute_force_exactly(self):
        with criterion("metric-oracle (exact equality on 1000 draws; "
                       "composite midpoint identity)"):
            rng = np.random.default_rng(777)
            tail_idx = tail_indices(DEFAULT_REGISTRY)
            for _ in range(1000):
                y_true = rng.integers(0, 13, 200)
                y_pred = rng.integers(0, 13, 200)
                cm = confusion(y_true, y_pred, 13)
                _, _, f1 = per_class_prf(cm)
                bf_p, bf_r, bf_f1 = brute_force_prf(y_true, y_pred, 13)
                assert [float(x) for x in f1] == bf_f1
                macro = macro_f1(cm)
                assert macro == brute_force_macro_f1(y_true, y_pred, 13)
                tail = tail_macro_f1(cm, tail_idx)
                bf_tail = sum(bf_f1[i] for i in tail_idx) / len(tail_idx)
                assert tail == bf_tail
                composite = tail_composite(macro, tail)
                assert abs(composite - (macro + tail) / 2.0) == 0.0


class TestOverrideConformance:
    def test_eq2_on_500_random_triples(self):
        with criterion("override-rule conformance (500 triples, locality + "
                       "double application)"):
            pairs = default_pairs(DEFAULT_REGISTRY)
            lookup = pairs.as_lookup()
            rng = np.random.default_rng(2024)
            for _ in range(500):
                n = 100
                ids = [f"s{i}" for i in range(n)]
                def rand_pset():
                    return PredictionSet(ids, rng.normal(0, 1, (n, 13)))
                primary, a1, a2 = rand_pset(), rand_pset(), rand_pset()
                final, log = gated_override(primary, a1, a2, pairs)
                p_lab, a1_lab, a2_lab = primary.top1, a1.top1, a2.top1
                for i in range(n):
                    gate = (a1_lab[i] == a2_lab[i]
                            and (int(p_lab[i]), int(a1_lab[i])) in lookup)
                    if gate:
                        assert final[i] == a1_lab[i]
                    else:
                        assert final[i] == p_lab[i]
                changed = (final != p_lab)
                assert int(changed.sum()) == log.modified
                twice = apply_override(final, a1_lab, a2_lab, pairs)
                assert np.array_equal(twice, final)


class TestPairDiscoveryOracle:
    def test_discovery_matches_exhaustive_search_100_trials(self):
        with criterion("pair-discovery oracle (exhaustive equality, C=4 n=50 "
                       "x100; joint application never lowers MacroF1)"):
            for seed in range(100):
                rng = np.random.default_rng(seed)
                n, C = 50, 4
                ids = [f"s{i}" for i in range(n)]
                y = rng.integers(0, C, n)
                def pull_pset():
                    logits = rng.normal(0, 1, (n, C))
                    logits[np.arange(n), y] += rng.uniform(0, 2)
                    return PredictionSet(ids, logits)
                primary, a1, a2 = pull_pset(), pull_pset(), pull_pset()
                found = discover_pairs(primary, a1, a2, y)
                oracle = exhaustive_pair_search(
                    primary.top1.tolist(), a1.top1.tolist(), a2.top1.tolist(),
                    y.tolist(), C)
                assert {(q.src, q.dst) for q in found} == set(oracle)
                for q in found:
                    delta, support = oracle[(q.src, q.dst)]
                    assert q.delta == pytest.approx(delta, abs=1e-12)
                    assert q.support == support
                base = macro_f1(confusion(y, primary.top1, C))
                joint = apply_override(primary.top1, a1.top1, a2.top1, found)
                assert macro_f1(confusion(y, joint, C)) >= base


def _e2e_pipeline(root: Path) -> None:
    """gen-synth -> MLP + cosine multistage -> decoupled -> pairs -> ensemble -> evaluate."""
    cfg_dir = root.parent / f"{root.name}-configs"
    cfg_dir.mkdir(parents=True, exist_ok=True)
    data = root / "data"
    assert main(["gen-synth", "--out", str(data)]) == 0
    manifest = str(data / "manifest.json")

    mlp_cfg = {"manifest": manifest, "family": "mlp", "seed": 0,
               "lr_scale": 400.0, "batch_size": 256}
    cos_cfg = {"manifest": manifest, "family": "cosine", "seed": 1,
               "lr_scale": 800.0, "batch_size": 256}
    (cfg_dir / "mlp.json").write_text(json.dumps(mlp_cfg))
    (cfg_dir / "cos.json").write_text(json.dumps(cos_cfg))
    assert main(["train", "--config", str(cfg_dir / "mlp.json"),
                 "--out", str(root / "mlp")]) == 0
    assert main(["train", "--config", str(cfg_dir / "cos.json"),
                 "--out", str(root / "cos")]) == 0
    assert main(["retrain-decoupled",
                 "--checkpoint", str(root / "mlp/ckpt_final.hfck"),
                 "--manifest", manifest, "--epochs", "8", "--lr", "2e-4",
                 "--batch-size", "256", "--seed", "2",
                 "--out", str(root / "dec")]) == 0

    checkpoints = {
        "mlp": root / "mlp/ckpt_final.hfck",
        "cos": root / "cos/ckpt_final.hfck",
        "dec": root / "dec/ckpt_decoupled.hfck",
    }
    for split in ("val", "test"):
        for tag, ckpt in checkpoints.items():
            assert main(["predict", "--checkpoint", str(ckpt),
                         "--manifest", manifest, "--split", split,
                         "--out", str(root / f"pred_{tag}_{split}")]) == 0

    assert main(["discover-pairs",
                 "--primary", str(root / "pred_mlp_val/logits.csv"),
                 "--a1", str(root / "pred_cos_val/logits.csv"),
                 "--a2", str(root / "pred_dec_val/logits.csv"),
                 "--manifest", manifest, "--out", str(root / "pairs")]) == 0
    assert main(["ensemble",
                 "--primary", str(root / "pred_mlp_test/logits.csv"),
                 "--a1", str(root / "pred_cos_test/logits.csv"),
                 "--a2", str(root / "pred_dec_test/logits.csv"),
                 "--pairs", str(root / "pairs/pairs.json"),
                 "--out", str(root / "ens")]) == 0
    assert main(["evaluate", "--pred", str(root / "ens/final_predictions.csv"),
                 "--manifest", manifest, "--out", str(root / "eval")]) == 0


def _tree_bytes(root: Path) -> dict[str, bytes]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name != "run_manifest.json":
            out[str(path.relative_to(root))] = path.read_bytes()
    return out


class TestEndToEnd:
    def test_full_synthetic_pipeline_reproducible(self, tmp_path):
        with criterion("end-to-end synthetic run (< 10 min; byte-identical reruns)"):
            start = time.monotonic()
            _e2e_pipeline(tmp_path / "run1")
            first = time.monotonic() - start
            assert first < 600.0, f"pipeline took {first:.0f}s"
            _e2e_pipeline(tmp_path / "run2")

            a = _tree_bytes(tmp_path / "run1")
            b = _tree_bytes(tmp_path / "run2")
            assert a.keys() == b.keys()
            for rel in a:
                assert a[rel] == b[rel], f"artifact differs between runs: {rel}"

            report = json.loads((tmp_path / "run1/eval/report.json").read_text())
            assert 0.0 < report["macro_f1"] <= 1.0
            assert (tmp_path / "run1/eval/confusion_matrix.png").exists()
            assert (tmp_path / "run1/mlp/training_log.ndjson").exists()
            records = [json.loads(ln) for ln in
                       (tmp_path / "run1/mlp/training_log.ndjson").read_text().splitlines()]
            assert [r["stage"] for r in records] == \
                ["S1"] * 11 + ["S2"] * 5 + ["S3"] * 5


class TestDecoupledTailProperty:
    def test_tail_gain_on_100_to_1_imbalance(self):
        with criterion("decoupled-retraining tail property (>=4 of 5 seeds)"):
            head = {0, 1, 2, 3, 4, 10}
            counts = tuple(2000 if c in head else 20 for c in range(13))
            wins = 0
            for seed in range(5):
                ds = generate_synthetic(SyntheticConfig(d=8, counts=counts, seed=seed))
                model = init_model("mlp", d=8, C=13, seed=seed)
                from wbclab.trainer import StageConfig, train_stage
                stage = StageConfig(
                    name="S3proxy", epochs=4, lr_head=5e-3, lr_trunk=1e-3,
                    batch_size=128,
                    loss=LossConfig(kind="focal", gamma=2.0, smoothing=0.0,
                                    mixup_prob=0.0))
                s3 = train_stage(model, ds, stage, seed=seed)
                _, tail_before, _ = evaluate_split(s3.best_model, ds, "val")
                retrained = decoupled_retrain(s3.best_model, ds, epochs=6,
                                              lr_head=2e-3, batch_size=128,
                                              seed=seed)
                _, tail_after, _ = evaluate_split(retrained.best_model, ds, "val")
                wins += int(tail_after >= tail_before)
            assert wins >= 4, f"tail improved in only {wins} of 5 seeds"


class TestTable1Fixture:
    def test_summary_percentages(self):
        with criterion("audit-summary arithmetic (Table-style percentages "
                       "within 0.05pp)"):
            from test_audit import make_case
            store = VerdictStore()
            cases = {}
            i = 0
            def fill(origin, split, outcome_counts):
                nonlocal i
                for category, count in outcome_counts.items():
                    for _ in range(count):
                        cid = f"{origin[:1]}{split}{i}"
                        if origin == "discordant":
                            cases[cid] = make_case(cid, origin=origin, split=split)
                        else:
                            cases[cid] = make_case(cid, origin=origin, split=split,
                                                   assigned=1, top=1)
                        corrected = "LY" if category == "label_error" else None
                        store.append(Verdict(cid, category, "rev", ts=float(i),
                                             corrected_label=corrected))
                        i += 1
            fill("discordant", "train",
                 {"label_error": 803, "model_error": 484, "ambiguous": 170})
            fill("discordant", "val",
                 {"label_error": 172, "model_error": 140, "ambiguous": 20})
            fill("agreement_sample", "train",
                 {"label_error": 156, "ambiguous": 125, "confirmed_correct": 1673})

            rows = {(r.origin, r.split): r
                    for r in summarize(store, list(cases.values()))}
            expected = {
                ("discordant", "train"): (1457, {"label_error": 55.1,
                                                 "model_error": 33.2,
                                                 "ambiguous": 11.7}),
                ("discordant", "val"): (332, {"label_error": 51.8,
                                              "model_error": 42.2,
                                              "ambiguous": 6.0}),
                ("discordant", "combined"): (1789, {"label_error": 54.5,
                                                    "model_error": 34.9,
                                                    "ambiguous": 10.6}),
                ("agreement_sample", "train"): (1954, {"label_error": 8.0,
                                                       "ambiguous": 6.4,
                                                       "confirmed_correct": 85.6}),
            }
            for key, (n, pct) in expected.items():
                row = rows[key]
                assert row.n_reviewed == n
                for category, target in pct.items():
                    got = row.pct[category] * 100.0
                    assert got == pytest.approx(target, abs=0.05), (key, category, got)


class TestRoundTrips:
    def test_all_file_formats_bit_exact(self, tmp_path):
        with criterion("file round-trips bit-exact (EMB1, HFCK, logits CSV)"):
            rng = np.random.default_rng(31)
            feats = rng.normal(size=(10, 8)).astype(np.float32)
            f1 = tmp_path / "a.bin"
            f2 = tmp_path / "b.bin"
            write_features(f1, feats)
            write_features(f2, read_features(f1))
            assert f1.read_bytes() == f2.read_bytes()

            for family in ("linear", "cosine", "mlp"):
                model = init_model(family, d=6, C=13, hidden=5, seed=1)
                for p in parameters(model).values():
                    p += rng.normal(size=p.shape)
                c1 = tmp_path / f"{family}1.hfck"
                c2 = tmp_path / f"{family}2.hfck"
                save_checkpoint(model, c1, stage="S3")
                loaded, stage = load_checkpoint(c1)
                save_checkpoint(loaded, c2, stage=stage)
                assert c1.read_bytes() == c2.read_bytes()

            pset = PredictionSet(ids=[f"s{i}" for i in range(9)],
                                 logits=rng.normal(size=(9, 13)))
            l1 = tmp_path / "l1.csv"
            l2 = tmp_path / "l2.csv"
            write_logits_csv(pset, DEFAULT_REGISTRY, l1)
            write_logits_csv(read_logits_csv(l1, DEFAULT_REGISTRY),
                             DEFAULT_REGISTRY, l2)
            assert l1.read_bytes() == l2.read_bytes()
