"""Command-line gateway for every pipeline step.

Each subcommand resolves its output directory (honoring WBCLAB_OUT_ROOT for
relative paths), runs, and writes a ``run_manifest.json`` recording the
resolved config, its hash, the seeds, and sha256 digests of every input file.
Failures print machine-readable JSON to stderr: exit 2 for usage, 3 for
config validation, 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import ensemble as ens
from .checkpoint import load_checkpoint, save_checkpoint
from .data import ClassRegistry, load_dataset, save_dataset
from .errors import ConfigError, WorkbenchError
from .metrics import (DEFAULT_BOUNDARY_PAIRS, boundary_report, build_report,
                      write_confusion_csv, write_report_json)
from .model import init_model, predict_logits
from .objective import LossConfig
from .synthetic import SyntheticConfig, generate_synthetic, long_tail_counts
from .trainer import (StageConfig, decoupled_retrain, default_stages,
                      run_multistage, write_training_log)

OUT_ROOT_ENV = "WBCLAB_OUT_ROOT"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems as machine-readable JSON."""

    def error(self, message):
        _emit_error("UsageError", message, EXIT_USAGE)
        raise SystemExit(EXIT_USAGE)


def _emit_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps(
        {"error": {"type": kind, "message": message, "exit_code": code}}) + "\n")


def _resolve_out(out: str) -> Path:
    root = os.environ.get(OUT_ROOT_ENV)
    path = Path(out)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} does not exist: {p}")
    return p


def write_run_manifest(out: Path, command: str, config: dict,
                       seeds: dict, inputs: list[Path]) -> None:
    canonical = json.dumps(config, sort_keys=True)
    manifest = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "created_unix": int(time.time()),
    }
    (out / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synth(args) -> int:
    out = _resolve_out(args.out)
    counts = long_tail_counts(args.largest, args.ratio, args.floor)
    config = SyntheticConfig(
        d=args.dim, counts=counts, chain_step=args.chain_step,
        noise=args.noise, seed=args.seed,
    )
    dataset = generate_synthetic(config)
    manifest_path = save_dataset(dataset, out)
    write_run_manifest(out, "gen-synth", {
        "dim": args.dim, "largest": args.largest, "ratio": args.ratio,
        "floor": args.floor, "chain_step": args.chain_step, "noise": args.noise,
    }, seeds={"dataset": args.seed}, inputs=[])
    print(f"wrote {dataset.n} samples to {manifest_path}")
    return EXIT_OK


def _loss_from_dict(raw: dict) -> LossConfig:
    known = {"kind", "gamma", "smoothing", "mixup_prob", "mixup_beta", "effective_beta"}
    bad = set(raw) - known
    if bad:
        raise ConfigError(f"unknown loss config keys: {sorted(bad)}")
    return LossConfig(**raw)


def _stage_from_dict(raw: dict, loss_default: LossConfig,
                     freeze_default: frozenset[str] = frozenset()) -> StageConfig:
    known = {"name", "epochs", "lr_head", "lr_trunk", "warmup_epochs",
             "batch_size", "grad_accum_steps", "sampler", "freeze", "loss"}
    bad = set(raw) - known
    if bad:
        raise ConfigError(f"unknown stage config keys: {sorted(bad)}")
    raw = dict(raw)
    loss = _loss_from_dict(raw.pop("loss")) if "loss" in raw else loss_default
    freeze = frozenset(raw.pop("freeze")) if "freeze" in raw else freeze_default
    stage = StageConfig(loss=loss, freeze=freeze, **raw)
    stage.validate()
    return stage


def load_run_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"run config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("run config must be a JSON object")
    if "manifest" not in cfg or "family" not in cfg:
        raise ConfigError("run config requires 'manifest' and 'family'")
    return cfg


def cmd_train(args) -> int:
    out = _resolve_out(args.out)
    cfg_path = _require(args.config, "run config")
    cfg = load_run_config(cfg_path)
    manifest_path = _require(cfg["manifest"], "dataset manifest")
    dataset = load_dataset(manifest_path)

    loss_default = _loss_from_dict(cfg.get("loss", {}))
    freeze_default = frozenset(cfg.get("freeze", ()))
    if "stages" in cfg:
        stages = [_stage_from_dict(s, loss_default, freeze_default)
                  for s in cfg["stages"]]
    else:
        stages = default_stages(
            lr_scale=float(cfg.get("lr_scale", 1.0)),
            batch_size=int(cfg.get("batch_size", 128)),
            loss=loss_default,
            freeze=freeze_default,
        )
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    init_seed = int(cfg.get("init_seed", seed))
    model = init_model(
        cfg["family"], d=dataset.d, C=dataset.registry.C,
        hidden=cfg.get("hidden"), seed=init_seed,
        stem_dropout=float(cfg.get("stem_dropout", 0.1)),
        hidden_dropout=float(cfg.get("hidden_dropout", 0.1)),
        cosine_scale=float(cfg.get("cosine_scale", 1.0)),
        with_trunk=bool(cfg.get("trunk", True)),
    )

    results = run_multistage(model, dataset, stages, seed)
    records = [rec for res in results for rec in res.history]
    write_training_log(records, out / "training_log.ndjson")
    for stage_cfg, res in zip(stages, results):
        save_checkpoint(res.best_model, out / f"ckpt_{stage_cfg.name}.hfck",
                        stage=stage_cfg.name)
    final = results[-1]
    save_checkpoint(final.best_model, out / "ckpt_final.hfck",
                    stage=stages[-1].name)

    from .figures import render_training_curves
    render_training_curves(records, out / "training_curves.png")

    write_run_manifest(out, "train", cfg, seeds={"train": seed, "init": init_seed},
                       inputs=[cfg_path, manifest_path])
    best = final.history[final.best_epoch]
    print(f"final stage best epoch {final.best_epoch}: val MacroF1 {best.val_macro_f1:.4f}")
    return EXIT_OK


def cmd_retrain_decoupled(args) -> int:
    out = _resolve_out(args.out)
    ckpt_path = _require(args.checkpoint, "checkpoint")
    manifest_path = _require(args.manifest, "dataset manifest")
    dataset = load_dataset(manifest_path)
    model, _ = load_checkpoint(ckpt_path)
    result = decoupled_retrain(
        model, dataset, epochs=args.epochs, lr_head=args.lr,
        batch_size=args.batch_size, seed=args.seed,
        effective_beta=args.effective_beta,
    )
    save_checkpoint(result.best_model, out / "ckpt_decoupled.hfck", stage="decoupled")
    write_training_log(result.history, out / "training_log.ndjson")
    write_run_manifest(out, "retrain-decoupled", {
        "checkpoint": str(ckpt_path), "manifest": str(manifest_path),
        "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size,
        "effective_beta": args.effective_beta,
    }, seeds={"train": args.seed}, inputs=[ckpt_path, manifest_path])
    best = result.history[result.best_epoch]
    print(f"decoupled best epoch {result.best_epoch}: val MacroF1 {best.val_macro_f1:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    out = _resolve_out(args.out)
    ckpt_path = _require(args.checkpoint, "checkpoint")
    manifest_path = _require(args.manifest, "dataset manifest")
    dataset = load_dataset(manifest_path)
    model, stage = load_checkpoint(ckpt_path)
    feats, labels, ids = dataset.subset_arrays(args.split)
    tag = args.tag or f"{model.family}-{stage or 'ckpt'}"

    if args.views > 1:
        views = ens.jitter_views(feats.astype(np.float64), args.views,
                                 args.view_sigma, args.seed)
        for k, view in enumerate(views):
            logits = predict_logits(model, view)
            pset = ens.PredictionSet(ids=ids, logits=logits, source=f"{tag}-view{k}")
            ens.write_logits_csv(pset, dataset.registry, out / f"logits_view{k}.csv")
        logits = predict_logits(model, feats.astype(np.float64))
    else:
        logits = predict_logits(model, feats.astype(np.float64))
        pset = ens.PredictionSet(ids=ids, logits=logits, source=tag)
        ens.write_logits_csv(pset, dataset.registry, out / "logits.csv")
    preds = np.argmax(logits, axis=1)
    ens.write_predictions_csv(ids, preds, dataset.registry, out / "preds.csv")
    write_run_manifest(out, "predict", {
        "checkpoint": str(ckpt_path), "manifest": str(manifest_path),
        "split": args.split, "views": args.views, "view_sigma": args.view_sigma,
        "tag": tag,
    }, seeds={"views": args.seed}, inputs=[ckpt_path, manifest_path])
    print(f"wrote logits for {len(ids)} samples ({args.split})")
    return EXIT_OK


def cmd_tta_average(args) -> int:
    out = _resolve_out(args.out)
    paths = [_require(p, "logits file") for p in args.inputs]
    sets = [ens.read_logits_csv(p) for p in paths]
    weights = None
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
    merged = ens.average_logits(sets, weights)
    registry = ClassRegistry(tuple(_logits_class_names(paths[0])))
    ens.write_logits_csv(merged, registry, out / "logits.csv")
    write_run_manifest(out, "tta-average", {
        "inputs": [str(p) for p in paths],
        "weights": weights,
    }, seeds={}, inputs=paths)
    print(f"averaged {len(sets)} logit sets over {merged.n} samples")
    return EXIT_OK


def _logits_class_names(path: Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
    return header[1:]


def _truth_for_ids(dataset, ids: list[str]) -> np.ndarray:
    lookup = {sample_id: int(lab) for sample_id, lab in zip(dataset.ids, dataset.labels)}
    missing = [i for i in ids if i not in lookup]
    if missing:
        raise ConfigError(f"{len(missing)} prediction ids missing from manifest "
                          f"(first: {missing[0]!r})")
    return np.array([lookup[i] for i in ids], dtype=np.int64)


def cmd_evaluate(args) -> int:
    out = _resolve_out(args.out)
    pred_path = _require(args.pred, "prediction file")
    inputs = [pred_path]

    with open(pred_path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
    is_logits = header[:1] == ["id"] and header[1:2] != ["pred"]

    if args.manifest:
        manifest_path = _require(args.manifest, "dataset manifest")
        dataset = load_dataset(manifest_path)
        registry = dataset.registry
        inputs.append(manifest_path)
    else:
        dataset = None
        registry = ClassRegistry(tuple(header[1:])) if is_logits else None

    if is_logits:
        pset = ens.read_logits_csv(pred_path, registry)
        ids = pset.ids
        preds = pset.top1
        y_true = None
    else:
        if registry is None:
            # predictions csv without manifest: need truth column and registry
            raise ConfigError("evaluating a predictions CSV requires --manifest")
        ids, preds, y_true = ens.read_predictions_csv(pred_path, registry)

    if y_true is None:
        if dataset is None:
            raise ConfigError("no ground truth available: pass --manifest")
        y_true = _truth_for_ids(dataset, ids)

    report = build_report(y_true, preds, registry)
    boundaries = []
    for a_name, b_name in DEFAULT_BOUNDARY_PAIRS:
        if a_name in registry.names and b_name in registry.names:
            a, b = registry.index(a_name), registry.index(b_name)
            mask_any = np.isin(y_true, [a, b]).any()
            if mask_any:
                boundaries.append(boundary_report(y_true, preds, a, b, registry))
    write_report_json(report, out / "report.json", boundaries)
    write_confusion_csv(report.cm, registry, out / "confusion.csv")
    from .figures import render_confusion_matrix
    render_confusion_matrix(report.cm, registry, out / "confusion_matrix.png")
    write_run_manifest(out, "evaluate", {
        "pred": str(pred_path),
        "manifest": str(args.manifest) if args.manifest else None,
        "split": args.split,
    }, seeds={}, inputs=inputs)
    print(f"macro_f1 {report.macro_f1:.4f} tail {report.tail_macro_f1:.4f} "
          f"composite {report.tail_composite:.4f} (n={int(report.cm.sum())})")
    return EXIT_OK


def _load_triple(args) -> tuple[ens.PredictionSet, ens.PredictionSet, ens.PredictionSet, list[Path]]:
    paths = [_require(p, "logits file") for p in (args.primary, args.a1, args.a2)]
    primary = ens.read_logits_csv(paths[0], source="primary")
    a1 = ens.read_logits_csv(paths[1], source="a1")
    a2 = ens.read_logits_csv(paths[2], source="a2")
    return primary, a1, a2, paths


def cmd_discover_pairs(args) -> int:
    out = _resolve_out(args.out)
    primary, a1, a2, paths = _load_triple(args)
    manifest_path = _require(args.manifest, "dataset manifest")
    dataset = load_dataset(manifest_path)
    y_true = _truth_for_ids(dataset, primary.ids)
    pairs = ens.discover_pairs(primary, a1, a2, y_true)
    ens.write_pairs_json(pairs, dataset.registry, out / "pairs.json")
    write_run_manifest(out, "discover-pairs", {
        "primary": str(paths[0]), "a1": str(paths[1]), "a2": str(paths[2]),
        "manifest": str(manifest_path), "split": args.split,
    }, seeds={}, inputs=paths + [manifest_path])
    print(f"kept {len(pairs)} ordered pairs")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    out = _resolve_out(args.out)
    primary, a1, a2, paths = _load_triple(args)
    pairs_path = _require(args.pairs, "pair file")
    registry = ClassRegistry(tuple(_logits_class_names(paths[0])))
    pairs = ens.read_pairs_json(pairs_path, registry)
    outcome = ens.head_diverse_pipeline(primary, a1, a2, pairs)
    ens.write_predictions_csv(primary.ids, outcome.final_labels, registry,
                              out / "final_predictions.csv")
    ens.write_override_log(outcome.log, registry, out / "override_log.ndjson")
    write_run_manifest(out, "ensemble", {
        "primary": str(paths[0]), "a1": str(paths[1]), "a2": str(paths[2]),
        "pairs": str(pairs_path),
    }, seeds={}, inputs=paths + [pairs_path])
    print(f"modified {outcome.log.modified} of {outcome.log.total} predictions "
          f"(rate {outcome.log.rate:.5f})")
    return EXIT_OK


def _read_images_map(path: Path | None) -> dict[str, str]:
    if path is None:
        return {}
    mapping = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sample_id, _, ref = line.partition("\t")
        mapping[sample_id] = ref
    return mapping


def cmd_audit_extract(args) -> int:
    out = _resolve_out(args.out)
    logits_path = _require(args.logits, "logits file")
    manifest_path = _require(args.manifest, "dataset manifest")
    dataset = load_dataset(manifest_path)
    pset = ens.read_logits_csv(logits_path, dataset.registry)
    y_true = _truth_for_ids(dataset, pset.ids)
    images = _read_images_map(Path(args.images_map) if args.images_map else None)
    refs = [images.get(i, "") for i in pset.ids]
    cases = audit_mod.build_cases(pset, y_true, refs, args.split)
    path = out / f"cases_discordant_{args.split}.json"
    audit_mod.write_cases_json(cases, dataset.registry, path)
    write_run_manifest(out, "audit-extract", {
        "logits": str(logits_path), "manifest": str(manifest_path),
        "split": args.split,
    }, seeds={}, inputs=[logits_path, manifest_path])
    print(f"extracted {len(cases)} discordant cases -> {path}")
    return EXIT_OK


def cmd_audit_sample(args) -> int:
    out = _resolve_out(args.out)
    logits_path = _require(args.logits, "logits file")
    manifest_path = _require(args.manifest, "dataset manifest")
    dataset = load_dataset(manifest_path)
    pset = ens.read_logits_csv(logits_path, dataset.registry)
    y_true = _truth_for_ids(dataset, pset.ids)
    images = _read_images_map(Path(args.images_map) if args.images_map else None)
    refs = [images.get(i, "") for i in pset.ids]
    cases = audit_mod.sample_agreement_cases(
        pset, y_true, refs, args.split, args.per_class, args.seed)
    path = out / f"cases_agreement_{args.split}.json"
    audit_mod.write_cases_json(cases, dataset.registry, path)
    write_run_manifest(out, "audit-sample", {
        "logits": str(logits_path), "manifest": str(manifest_path),
        "split": args.split, "per_class": args.per_class,
    }, seeds={"sample": args.seed}, inputs=[logits_path, manifest_path])
    print(f"sampled {len(cases)} agreement cases -> {path}")
    return EXIT_OK


def _load_cases(case_paths: list[str]) -> tuple[ClassRegistry, list[audit_mod.AuditCase]]:
    registry = None
    cases: list[audit_mod.AuditCase] = []
    for raw in case_paths:
        reg, chunk = audit_mod.read_cases_json(_require(raw, "case file"))
        if registry is None:
            registry = reg
        elif registry.names != reg.names:
            raise ConfigError("case files use different class registries")
        cases.extend(chunk)
    assert registry is not None
    return registry, cases


def cmd_audit_summarize(args) -> int:
    out = _resolve_out(args.out)
    registry, cases = _load_cases(args.cases)
    store = audit_mod.VerdictStore(args.verdicts)
    rows = audit_mod.summarize(store, cases)
    payload = {
        "classes": list(registry.names),
        "rows": [r.to_dict() for r in rows],
        "agreement_per_class": audit_mod.per_class_noise_rates(store, cases, registry),
    }
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    write_run_manifest(out, "audit-summarize", {
        "cases": args.cases, "verdicts": str(args.verdicts),
    }, seeds={}, inputs=[Path(p) for p in args.cases])
    print(f"summarized {len(cases)} cases into {len(rows)} rows")
    return EXIT_OK


def cmd_audit_heatmap(args) -> int:
    out = _resolve_out(args.out)
    registry, cases = _load_cases(args.cases)
    store = audit_mod.VerdictStore(args.verdicts)
    matrix = audit_mod.directional_matrix(store, cases, registry.C)
    (out / "heatmap.json").write_text(
        json.dumps(matrix.to_dict(registry), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    from .figures import render_directional_matrix
    render_directional_matrix(matrix, registry, out / "directional_matrix.png")
    write_run_manifest(out, "audit-heatmap", {
        "cases": args.cases, "verdicts": str(args.verdicts),
    }, seeds={}, inputs=[Path(p) for p in args.cases])
    print(f"rendered directional matrix over {int(matrix.reviewed.sum())} reviewed cases")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import AuditService, serve_forever

    registry, cases = _load_cases(args.cases)
    store = audit_mod.VerdictStore(args.verdicts)
    service = AuditService(cases, registry, store,
                           images_root=args.images_root, ui_root=args.ui_root)
    serve_forever(service, host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="wbclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic embedding dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--largest", type=int, default=8192)
    p.add_argument("--ratio", type=float, default=0.62)
    p.add_argument("--floor", type=int, default=16)
    p.add_argument("--chain-step", type=float, default=1.5)
    p.add_argument("--noise", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="multistage training from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the run config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("retrain-decoupled",
                       help="frozen-representation head retraining from an MLP checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--effective-beta", type=float, default=0.999)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retrain_decoupled)

    p = sub.add_parser("predict", help="emit logits CSV for a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--views", type=int, default=1,
                   help="feature-jitter TTA views (view 0 is clean)")
    p.add_argument("--view-sigma", type=float, default=0.1)
    p.add_argument("--tag", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tta-average", help="weighted average of aligned logits files")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--weights", default=None, help="comma-separated, defaults to equal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tta_average)

    p = sub.add_parser("evaluate", help="metric report + confusion CSV + figure")
    p.add_argument("--pred", required=True, help="logits CSV or predictions CSV")
    p.add_argument("--manifest", default=None)
    p.add_argument("--split", default=None, help="recorded in the manifest only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("discover-pairs", help="exhaustive ordered-pair search on validation")
    p.add_argument("--primary", required=True)
    p.add_argument("--a1", required=True)
    p.add_argument("--a2", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="val")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_discover_pairs)

    p = sub.add_parser("ensemble", help="agreement-gated override of the primary predictions")
    p.add_argument("--primary", required=True)
    p.add_argument("--a1", required=True)
    p.add_argument("--a2", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    audit_parser = sub.add_parser("audit", help="label-audit workflow steps")
    audit_sub = audit_parser.add_subparsers(dest="audit_command", required=True)

    p = audit_sub.add_parser("extract", help="discordant cases from logits + truth")
    p.add_argument("--logits", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--images-map", default=None,
                   help="optional TSV mapping sample id -> image ref")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit_extract)

    p = audit_sub.add_parser("sample", help="stratified sample of agreement cases")
    p.add_argument("--logits", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--images-map", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit_sample)

    p = audit_sub.add_parser("summarize", help="verdict summary table")
    p.add_argument("--cases", nargs="+", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit_summarize)

    p = audit_sub.add_parser("heatmap", help="directional label-noise matrix + figure")
    p.add_argument("--cases", nargs="+", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit_heatmap)

    p = sub.add_parser("serve", help="HTTP service for the review UI")
    p.add_argument("--cases", nargs="+", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--images-root", default=None)
    p.add_argument("--ui-root", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except WorkbenchError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_RUNTIME)
        return EXIT_RUNTIME
    except OSError as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_RUNTIME)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
