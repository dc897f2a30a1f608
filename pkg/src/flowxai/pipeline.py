"""Pipeline stages: each reads its predecessors' artifacts and writes its
own, so any stage can be re-run in isolation. Artifacts are deterministic
for a fixed config and seed; wall-clock metadata lives only in the
`run_meta.json` sidecar and measured latency only under `bench/`.
"""

from __future__ import annotations

import concurrent.futures
import copy
import datetime
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import schema
from .attribution import (AttributionConfig, InstanceAttribution,
                          instances_to_jsonl, integrated_gradients,
                          global_importance, ranking_to_csv)
from .classifier import FlowTransformerClassifier
from .config import RunConfig
from .errors import MissingArtifact, SampleTooLarge
from .explain import (AuditLog, Explanation, ExplanationRequest, LlmConfig,
                      build_generator_prompt, make_provider, parse_explanation)
from .ingest import CategoricalEncoder, Dataset, FlowScaler, load_csv, stratified_split
from .metrics import class_report, latency_bench, report_to_csv, roc_pr_points, curves_to_csv
from .surrogate import (SurrogateTreeClassifier, extract_rules, pruning_curve,
                        rules_to_json, rules_to_text)
from .synth import SynthConfig, generate_table, write_csv
from .validate import (DirectionLexicon, TermFrequencyEmbedder, RemoteEmbedder,
                       evaluate_explanation, records_to_jsonl, summaries_to_csv,
                       summaries_to_json, summarize)

STAGES = ("synth", "ingest", "train", "attribute", "rules", "explain",
          "validate", "bench", "report")


@dataclass
class RunPaths:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def synth_csv(self): return self.root / "data" / "synth.csv"
    @property
    def vocabulary(self): return self.root / "ingest" / "vocabulary.json"
    @property
    def scaler(self): return self.root / "ingest" / "scaler.json"
    @property
    def ingest_meta(self): return self.root / "ingest" / "meta.json"
    @property
    def checkpoint(self): return self.root / "train" / "checkpoint.json"
    @property
    def history(self): return self.root / "train" / "history.csv"
    @property
    def test_logits(self): return self.root / "train" / "test_logits.npy"
    @property
    def global_importance(self): return self.root / "attribute" / "global_importance.csv"
    @property
    def attribute_instances(self): return self.root / "attribute" / "instances.jsonl"
    @property
    def tree(self): return self.root / "rules" / "tree.json"
    @property
    def rules(self): return self.root / "rules" / "rules.json"
    @property
    def rules_text(self): return self.root / "rules" / "rules.txt"
    @property
    def pruning(self): return self.root / "rules" / "pruning_curve.csv"
    @property
    def requests(self): return self.root / "explain" / "requests.jsonl"
    @property
    def explanations(self): return self.root / "explain" / "explanations.jsonl"
    @property
    def audit(self): return self.root / "explain" / "audit.jsonl"
    @property
    def validation_records(self): return self.root / "validate" / "records.jsonl"
    @property
    def validation_summary_csv(self): return self.root / "validate" / "summary.csv"
    @property
    def validation_summary_json(self): return self.root / "validate" / "summary.json"
    @property
    def latency(self): return self.root / "bench" / "latency.json"
    @property
    def report_md(self): return self.root / "report" / "report.md"
    @property
    def report_json(self): return self.root / "report" / "report.json"
    @property
    def manifest(self): return self.root / "manifest.json"
    @property
    def run_meta(self): return self.root / "run_meta.json"

    def split_array(self, split: str, which: str) -> Path:
        return self.root / "ingest" / f"{split}_{which}.npy"


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(producer, str(path))
    return path


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2))


def _save_array(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, arr)


def _load_split(paths: RunPaths, split: str) -> Dataset:
    x = np.load(_require(paths.split_array(split, "x"), "ingest"))
    y = np.load(_require(paths.split_array(split, "y"), "ingest"))
    return Dataset(x, y, provenance=split)


# -- stages ---------------------------------------------------------------------


def stage_synth(cfg: RunConfig, paths: RunPaths) -> None:
    weights = cfg.synth.class_weights
    rules = cfg.synth.planted_rules
    kwargs = {}
    if weights is not None:
        kwargs["class_weights"] = dict(weights)
    if rules is not None:
        kwargs["planted_rules"] = tuple((c, f, float(t)) for c, f, t in rules)
    synth_cfg = SynthConfig(total_records=cfg.synth.total_records,
                            seed=cfg.seed, **kwargs)
    table = generate_table(synth_cfg)
    paths.synth_csv.parent.mkdir(parents=True, exist_ok=True)
    write_csv(table, paths.synth_csv)


def stage_ingest(cfg: RunConfig, paths: RunPaths) -> None:
    csv_path = Path(cfg.data_csv) if cfg.data_csv else paths.synth_csv
    if cfg.data_csv:
        if not csv_path.exists():
            raise MissingArtifact("external data", str(csv_path))
    else:
        _require(csv_path, "synth")
    table = load_csv(csv_path)

    encoder = CategoricalEncoder().fit(table)
    data = encoder.transform(table)
    trainval, test = stratified_split(data, 1.0 - cfg.split.test_fraction,
                                      seed=cfg.seed)
    train, val = stratified_split(trainval, 1.0 - cfg.split.val_fraction,
                                  seed=cfg.seed + 1)
    test.provenance = "test"

    scaler = FlowScaler().fit(train.x)
    for split_name, split in (("train", train), ("val", val), ("test", test)):
        _save_array(paths.split_array(split_name, "x"), scaler.transform(split.x))
        _save_array(paths.split_array(split_name, "y"), split.y)

    encoder.to_json(paths.vocabulary)
    scaler.to_json(paths.scaler)
    _write_json(paths.ingest_meta, {
        "rows": len(data),
        "unknown_category_counts": encoder.unknown_counts_,
        "class_counts": {schema.class_name(c): int(n)
                         for c, n in enumerate(np.bincount(data.y, minlength=schema.N_CLASSES))},
        "split_sizes": {"train": len(train), "val": len(val), "test": len(test)},
    })


def _build_classifier(cfg: RunConfig) -> FlowTransformerClassifier:
    weights = cfg.train.class_weights
    if isinstance(weights, list):
        weights = tuple(weights)
    return FlowTransformerClassifier(
        d_model=cfg.model.d_model, n_layers=cfg.model.n_layers,
        n_heads=cfg.model.n_heads, n_classes=schema.N_CLASSES,
        learning_rate=cfg.train.learning_rate, weight_decay=cfg.train.weight_decay,
        batch_size=cfg.train.batch_size, max_epochs=cfg.train.max_epochs,
        patience=cfg.train.patience, class_weights=weights, seed=cfg.seed)


def stage_train(cfg: RunConfig, paths: RunPaths) -> None:
    train = _load_split(paths, "train")
    val = _load_split(paths, "val")
    test = _load_split(paths, "test")

    clf = _build_classifier(cfg)
    clf.fit(train.x, train.y, val.x, val.y)
    paths.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    clf.save(paths.checkpoint)
    clf.history_.to_csv(paths.history)
    _save_array(paths.test_logits, clf.decision_function(test.x))


def _load_classifier(paths: RunPaths) -> FlowTransformerClassifier:
    return FlowTransformerClassifier.load(_require(paths.checkpoint, "train"))


def stage_attribute(cfg: RunConfig, paths: RunPaths) -> None:
    clf = _load_classifier(paths)
    test = _load_split(paths, "test")
    scaler = FlowScaler.from_json(_require(paths.scaler, "ingest"))
    att_cfg = AttributionConfig(steps=cfg.attribution.steps,
                                sample_size=cfg.attribution.sample_size,
                                seed=cfg.seed)
    ranking = global_importance(clf, test.x, att_cfg)
    paths.global_importance.parent.mkdir(parents=True, exist_ok=True)
    ranking_to_csv(ranking, paths.global_importance)

    rng = np.random.default_rng(att_cfg.seed)
    chosen = np.sort(rng.choice(len(test.x), size=att_cfg.sample_size, replace=False))
    instances = []
    for record_id in chosen:
        vec = integrated_gradients(clf, test.x[record_id], att_cfg)
        # Reports show the original feature values, not the standardized
        # ones the model consumed.
        raw_row = scaler.inverse_transform(test.x[record_id])
        instances.append(InstanceAttribution.from_vector(int(record_id),
                                                         raw_row, vec))
    instances_to_jsonl(instances, paths.attribute_instances)


def stage_rules(cfg: RunConfig, paths: RunPaths) -> None:
    clf = _load_classifier(paths)
    train = _load_split(paths, "train")
    test = _load_split(paths, "test")
    scaler = FlowScaler.from_json(_require(paths.scaler, "ingest"))
    test_logits = np.load(_require(paths.test_logits, "train"))

    pseudolabels = clf.predict(train.x)
    test_preds = np.argmax(test_logits, axis=1)

    # The surrogate trains in raw feature units so extracted thresholds
    # read like flow quantities; splits are invariant to the (monotone)
    # standardization, and the classifier pseudolabels are unaffected.
    tree = SurrogateTreeClassifier(max_depth=cfg.tree.max_depth,
                                   min_samples_leaf=cfg.tree.min_samples_leaf)
    tree.fit(scaler.inverse_transform(train.x), pseudolabels)
    rules, metrics = extract_rules(tree, scaler.inverse_transform(test.x), test_preds)
    curve = pruning_curve(rules, test_preds, len(test.x))

    paths.tree.parent.mkdir(parents=True, exist_ok=True)
    _write_json(paths.tree, tree.to_dict())
    rules_to_json(rules, metrics, paths.rules)
    rules_to_text(rules, paths.rules_text)
    with open(paths.pruning, "w", newline="") as fh:
        fh.write("k,coverage,fidelity\n")
        for k, cov, fid in curve:
            fh.write(f"{k},{repr(cov)},{repr(fid)}\n")


def select_explain_instances(n_test: int, n: int, seed: int) -> list[int]:
    """Seeded uniform sample without replacement, ascending."""
    if n > n_test:
        raise SampleTooLarge(f"requested {n} of {n_test} test rows")
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n_test, size=n, replace=False))


def _triggered_clause(tree: SurrogateTreeClassifier, rules_payload: dict,
                      row: np.ndarray) -> str:
    leaf = int(tree.apply(row[None, :])[0])
    for rule in rules_payload["rules"]:
        if rule["leaf_index"] == leaf:
            conds = ", ".join(f"{c['feature']} {c['op']} {c['threshold']:.4f}"
                              for c in rule["conditions"])
            conds = conds if conds else "true"
            return f"class({rule['class']}) :- {conds}"
    raise ValueError(f"no rule for leaf {leaf}")


def build_requests(cfg: RunConfig, paths: RunPaths) -> list[ExplanationRequest]:
    clf = _load_classifier(paths)
    test = _load_split(paths, "test")
    scaler = FlowScaler.from_json(_require(paths.scaler, "ingest"))
    tree = SurrogateTreeClassifier.from_dict(
        json.loads(_require(paths.tree, "rules").read_text()))
    rules_payload = json.loads(_require(paths.rules, "rules").read_text())

    att_cfg = AttributionConfig(steps=cfg.explain.steps, seed=cfg.seed)
    chosen = select_explain_instances(len(test.x), cfg.explain.n_instances, cfg.seed)
    requests = []
    for record_id in chosen:
        x = test.x[record_id]
        raw_row = scaler.inverse_transform(x)
        vec = integrated_gradients(clf, x, att_cfg)
        inst = InstanceAttribution.from_vector(record_id, raw_row, vec)
        requests.append(ExplanationRequest(
            record_id=record_id,
            cls_name=schema.class_name(vec.predicted_class),
            clause=_triggered_clause(tree, rules_payload, raw_row),
            top5=tuple(inst.top_features(5)),
        ))
    return requests


def _generator_configs(cfg: RunConfig) -> list[LlmConfig]:
    return [LlmConfig(endpoint_url=g.endpoint_url, model_name=g.model_name,
                      temperature=g.temperature, max_tokens=g.max_tokens,
                      timeout_s=g.timeout_s, retries=g.retries,
                      mock=cfg.mock_llm)
            for g in cfg.explain.generators]


def stage_explain(cfg: RunConfig, paths: RunPaths) -> None:
    requests = build_requests(cfg, paths)
    paths.requests.parent.mkdir(parents=True, exist_ok=True)
    with open(paths.requests, "w") as fh:
        for req in requests:
            fh.write(json.dumps({
                "record_id": req.record_id, "cls_name": req.cls_name,
                "clause": req.clause,
                "top5": [{"name": n, "value": v, "attribution": a}
                         for n, v, a in req.top5],
            }, sort_keys=True) + "\n")

    audit = AuditLog(paths.audit)
    explanations: list[Explanation] = []
    for gen_cfg in _generator_configs(cfg):
        provider = make_provider(gen_cfg, seed=cfg.seed)
        prompts = {req.record_id: build_generator_prompt(req) for req in requests}

        def call(req):
            return req.record_id, provider.complete(prompts[req.record_id])

        with concurrent.futures.ThreadPoolExecutor(
                max_workers=cfg.explain.max_in_flight) as pool:
            replies = dict(pool.map(call, requests))

        for req in requests:  # deterministic merge order by request list
            raw = replies[req.record_id]
            audit.record(req.record_id, gen_cfg.model_name,
                         prompts[req.record_id], raw)
            explanations.append(parse_explanation(raw, req,
                                                  generator=gen_cfg.model_name))
    audit.flush()
    with open(paths.explanations, "w") as fh:
        for expl in explanations:
            fh.write(json.dumps(expl.to_dict(), sort_keys=True) + "\n")


def _load_requests(paths: RunPaths) -> dict[int, ExplanationRequest]:
    out = {}
    for line in _require(paths.requests, "explain").read_text().splitlines():
        raw = json.loads(line)
        out[raw["record_id"]] = ExplanationRequest(
            record_id=raw["record_id"], cls_name=raw["cls_name"],
            clause=raw["clause"],
            top5=tuple((f["name"], f["value"], f["attribution"])
                       for f in raw["top5"]))
    return out


def stage_validate(cfg: RunConfig, paths: RunPaths) -> None:
    requests = _load_requests(paths)
    judge_cfg = LlmConfig(endpoint_url=cfg.explain.judge.endpoint_url,
                          model_name=cfg.explain.judge.model_name,
                          temperature=cfg.explain.judge.temperature,
                          max_tokens=cfg.explain.judge.max_tokens,
                          timeout_s=cfg.explain.judge.timeout_s,
                          retries=cfg.explain.judge.retries,
                          mock=cfg.mock_llm)
    judge = make_provider(judge_cfg, seed=cfg.seed)
    if cfg.embedding and cfg.embedding.endpoint_url and not cfg.mock_llm:
        embedder = RemoteEmbedder(cfg.embedding.endpoint_url, cfg.embedding.model_name)
    else:
        embedder = TermFrequencyEmbedder()
    lexicon = (DirectionLexicon.from_json(cfg.lexicon_path)
               if cfg.lexicon_path else DirectionLexicon.default())

    records = []
    for line in _require(paths.explanations, "explain").read_text().splitlines():
        raw = json.loads(line)
        req = requests[raw["record_id"]]
        expl = Explanation(raw_text=raw["raw_text"], bullets=raw["bullets"],
                           generator=raw["generator"], request=req)
        records.append(evaluate_explanation(expl, judge, embedder, lexicon))

    paths.validation_records.parent.mkdir(parents=True, exist_ok=True)
    records_to_jsonl(records, paths.validation_records)
    summaries = summarize(records)
    summaries_to_csv(summaries, paths.validation_summary_csv)
    summaries_to_json(summaries, paths.validation_summary_json)


def stage_bench(cfg: RunConfig, paths: RunPaths) -> None:
    clf = _load_classifier(paths)
    test = _load_split(paths, "test")
    report = latency_bench(lambda row: clf.predict(row[None, :]),
                           test.x, n=cfg.bench.n_samples, warmup=cfg.bench.warmup)
    paths.latency.parent.mkdir(parents=True, exist_ok=True)
    report.to_json(paths.latency)


# -- report ----------------------------------------------------------------------


def _fmt_pct(mean: float, std: float | None = None) -> str:
    if std is None:
        return f"{100 * mean:.2f}%"
    return f"{100 * mean:.2f}% ± {100 * std:.2f}%"


def stage_report(cfg: RunConfig, paths: RunPaths,
                 run_roots: list[RunPaths] | None = None) -> None:
    test = _load_split(paths, "test")
    logits = np.load(_require(paths.test_logits, "train"))
    preds = np.argmax(logits, axis=1)
    report = class_report(test.y, preds, schema.N_CLASSES)
    report_dir = paths.report_md.parent
    report_dir.mkdir(parents=True, exist_ok=True)
    report_to_csv(report, report_dir / "class_report.csv")

    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    curves, curve_flags = roc_pr_points(test.y, probs)
    curves_to_csv(curves, report_dir / "roc_pr_points.csv")

    rules_payload = json.loads(_require(paths.rules, "rules").read_text())
    metrics = rules_payload["metrics"]

    curve_rows = []
    for line in _require(paths.pruning, "rules").read_text().splitlines()[1:]:
        k, cov, fid = line.split(",")
        curve_rows.append((int(k), float(cov), float(fid)))
    k99 = next((k for k, cov, _ in curve_rows if cov >= 0.99), None)

    summaries = json.loads(_require(paths.validation_summary_json,
                                    "validate").read_text())

    latency = None
    if paths.latency.exists():
        latency = json.loads(paths.latency.read_text())

    aggregate = None
    if run_roots:
        fidelities, f1s = [], []
        for rp in run_roots:
            rm = json.loads(_require(rp.rules, "rules").read_text())["metrics"]
            fidelities.append(rm["fidelity"])
            rows = _require(rp.history, "train").read_text().splitlines()[1:]
            f1s.append(max(float(r.split(",")[2]) for r in rows))
        aggregate = {
            "n_runs": len(run_roots),
            "fidelity_mean": float(np.mean(fidelities)),
            "fidelity_std": float(np.std(fidelities)),
            "macro_f1_mean": float(np.mean(f1s)),
            "macro_f1_std": float(np.std(f1s)),
        }

    payload = {
        "seed": cfg.seed,
        "test_rows": int(len(test.y)),
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "weighted_f1": report.weighted_f1,
        "per_class": {schema.class_name(c): vars(m)
                      for c, m in report.per_class.items()},
        "roc_auc": {schema.class_name(c): curve.roc_auc
                    for c, curve in curves.items()},
        "curve_flags": curve_flags,
        "rule_metrics": metrics,
        "pruning_curve": curve_rows,
        "rules_for_99pct_coverage": k99,
        "generator_summaries": summaries,
        "latency": latency,
        "aggregate": aggregate,
    }
    _write_json(paths.report_json, payload)

    lines = ["# Pipeline report", ""]
    lines += [f"- seed: {cfg.seed}",
              f"- test rows: {len(test.y)}",
              f"- accuracy: {_fmt_pct(report.accuracy)}",
              f"- macro F1: {report.macro_f1:.4f}", ""]
    lines += ["## Per-class performance", "",
              "| class | precision | recall | f1 | support |",
              "|---|---|---|---|---|"]
    for c in schema.REPORT_CLASS_ORDER:
        m = report.per_class[c]
        lines.append(f"| {schema.class_name(c)} | {m.precision:.3f} | "
                     f"{m.recall:.3f} | {m.f1:.3f} | {m.support} |")
    lines.append(f"| macro avg | {report.macro_precision:.3f} | "
                 f"{report.macro_recall:.3f} | {report.macro_f1:.3f} | {report.n_samples} |")
    lines.append(f"| weighted avg | {report.weighted_precision:.3f} | "
                 f"{report.weighted_recall:.3f} | {report.weighted_f1:.3f} | {report.n_samples} |")

    lines += ["", "## Extracted rules", "",
              f"- rules: {metrics['n_rules']} "
              f"({metrics['n_rules_nonzero_support']} with nonzero test support)",
              f"- coverage: {_fmt_pct(metrics['coverage'])}",
              f"- fidelity: {_fmt_pct(metrics['fidelity'])}",
              f"- redundancy: {metrics['redundancy']:.4f}",
              f"- rules needed for >= 99% coverage: {k99}", ""]
    lines += ["```"] + _require(paths.rules_text, "rules").read_text().splitlines() + ["```"]

    lines += ["", "## Pruning curve", "", "| k | coverage | fidelity |", "|---|---|---|"]
    for k, cov, fid in curve_rows:
        lines.append(f"| {k} | {cov:.4f} | {fid:.4f} |")

    lines += ["", "## Explanation quality (per generator)", "",
              "| generator | struct. valid (%) | semantic similarity | "
              "attribution faithfulness | actionability (1-5) |",
              "|---|---|---|---|---|"]
    for s in summaries:
        act = "n/a" if s["actionability"] is None else f"{s['actionability']:.1f}"
        lines.append(f"| {s['generator']} | {s['struct_valid_pct']:.0f}% | "
                     f"{s['semantic_similarity']:.3f} | "
                     f"{s['attribution_faithfulness']:.2f} | {act} |")

    lines += ["", "## Inference latency", ""]
    if latency:
        lines += [f"- median: {latency['median_ms']:.2f} ms",
                  f"- p95: {latency['p95_ms']:.2f} ms",
                  f"- samples: {latency['n_samples']}"]
    else:
        lines.append("- not measured (bench stage not run)")

    if aggregate:
        lines += ["", "## Repeated runs", "",
                  f"- runs: {aggregate['n_runs']}",
                  "- fidelity: "
                  + _fmt_pct(aggregate["fidelity_mean"], aggregate["fidelity_std"]),
                  f"- best val macro F1: {aggregate['macro_f1_mean']:.4f} "
                  f"± {aggregate['macro_f1_std']:.4f}"]

    paths.report_md.write_text("\n".join(lines) + "\n")


# -- manifest & orchestration ------------------------------------------------------


def write_manifest(paths: RunPaths) -> dict[str, str]:
    """Content hash of every artifact below the run root (excluding the
    manifest itself and the timestamp sidecar)."""
    skip = {paths.manifest.name, paths.run_meta.name}
    hashes = {}
    for file in sorted(paths.root.rglob("*")):
        if not file.is_file() or file.name in skip:
            continue
        digest = hashlib.sha256(file.read_bytes()).hexdigest()
        hashes[str(file.relative_to(paths.root))] = digest
    _write_json(paths.manifest, {"artifacts": hashes})
    return hashes


_STAGE_FUNCS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "train": stage_train,
    "attribute": stage_attribute,
    "rules": stage_rules,
    "explain": stage_explain,
    "validate": stage_validate,
    "bench": stage_bench,
    "report": stage_report,
}


def run_stages(cfg: RunConfig, stages: list[str], out_dir: str | Path | None = None
               ) -> RunPaths:
    """Run the requested stages in canonical order under one directory."""
    cfg.validate()
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stages: {unknown}")
    paths = RunPaths(Path(out_dir if out_dir is not None else cfg.out_dir))
    paths.root.mkdir(parents=True, exist_ok=True)

    meta = {}
    if paths.run_meta.exists():
        meta = json.loads(paths.run_meta.read_text())
    for stage in STAGES:
        if stage not in stages:
            continue
        _STAGE_FUNCS[stage](cfg, paths)
        meta[stage] = {"completed_at": datetime.datetime.now(
            datetime.timezone.utc).isoformat()}
        paths.run_meta.write_text(json.dumps(meta, sort_keys=True, indent=2))
    write_manifest(paths)
    return paths


def run_pipeline(cfg: RunConfig, stages: list[str] | None = None) -> RunPaths:
    """Full pipeline; with n_runs > 1 every run re-executes the seed-
    dependent stages under runs/run_XX with seed + run_index, and the
    report aggregates fidelity / macro-F1 across runs."""
    cfg.validate()
    stages = list(stages) if stages else list(STAGES)
    if cfg.n_runs == 1:
        return run_stages(cfg, stages)

    root = RunPaths(Path(cfg.out_dir))
    run_roots = []
    for run_index in range(cfg.n_runs):
        run_cfg = copy.deepcopy(cfg)
        run_cfg.seed = cfg.seed + run_index
        run_cfg.n_runs = 1
        run_dir = root.root / "runs" / f"run_{run_index:02d}"
        run_stages(run_cfg, [s for s in stages if s != "report"], run_dir)
        run_roots.append(RunPaths(run_dir))

    if "report" in stages:
        stage_report(cfg, run_roots[0], run_roots=run_roots)
        # The aggregate report lands at the top level for discoverability.
        top_report = root.root / "report"
        top_report.mkdir(parents=True, exist_ok=True)
        for name in ("report.md", "report.json", "class_report.csv",
                     "roc_pr_points.csv"):
            src = run_roots[0].report_md.parent / name
            if src.exists():
                (top_report / name).write_bytes(src.read_bytes())
    write_manifest(root)
    return root
