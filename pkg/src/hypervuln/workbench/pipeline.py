"""End-to-end training and batch detection."""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import detector
from ..clustering import Hyperedge, assign_new, build_hyperedges, kmeans
from ..cpg import pdg_view
from ..embedding import build_corpus, train_skipgram
from ..errors import HypervulnError, PipelineError
from ..ggnn import encode_behaviors, encode_functions, fit_intra
from ..hypergraph import incidence
from ..metrics import Metrics
from ..slicing import BehaviorSubgraph, behaviors_of, load_api_list
from .bundle import ModelBundle
from .config import PipelineConfig
from .manifest import DatasetManifest, split_dataset

log = logging.getLogger(__name__)

REPORT_VERSION = 1
PREDICTION_VERSION = 1


@dataclass
class RunReport:
    config: dict
    metrics: dict
    baseline: dict | None
    counts: dict
    training: dict
    bundle_sha256: str
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "format_version": REPORT_VERSION,
            "config": self.config,
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
            "baseline": None if self.baseline is None else {k: v.to_dict() for k, v in self.baseline.items()},
            "counts": self.counts,
            "training": self.training,
            "bundle_sha256": self.bundle_sha256,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self) -> str:
        """Canonical report text. Wall-clock timings are left out so reruns match byte for byte."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "RunReport":
        def metrics(block):
            return {k: Metrics(v["tp"], v["fp"], v["fn"], v["tn"]) for k, v in block.items()}

        return cls(
            config=raw["config"],
            metrics=metrics(raw["metrics"]),
            baseline=None if raw.get("baseline") is None else metrics(raw["baseline"]),
            counts=raw["counts"],
            training=raw["training"],
            bundle_sha256=raw["bundle_sha256"],
            timings=raw.get("timings", {}),
        )


def emit_report(report: RunReport, path, timings_path=None) -> Path:
    path = Path(path)
    try:
        path.write_text(report.to_json(), "utf-8")
        if timings_path is not None:
            Path(timings_path).write_text(json.dumps(report.timings, sort_keys=True, indent=2) + "\n", "utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return path


def load_report(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text("utf-8")))


class _Timer(dict):
    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        yield
        self[name] = round(time.perf_counter() - start, 4)


def ingest(manifest: DatasetManifest):
    """Load every record; returns ``(graphs, errors)`` with errors keyed by record id."""
    graphs, errors = [], {}
    for record in manifest.records:
        try:
            graphs.append(manifest.load_graph(record))
        except (HypervulnError, OSError) as exc:
            graphs.append(None)
            errors[record.id] = f"{type(exc).__name__}: {exc}"
    return graphs, errors


def extract_behaviors(graphs, api_list):
    subs = []
    for cpg in graphs:
        subs.extend(behaviors_of(pdg_view(cpg), cpg, api_list))
    return subs


def run_pipeline(manifest: DatasetManifest, config: PipelineConfig = PipelineConfig()):
    """Train every stage on ``manifest``; returns ``(ModelBundle, RunReport)``."""
    timer = _Timer()
    manifest.require_labels()
    with timer.stage("ingest"):
        graphs, errors = ingest(manifest)
    if errors:
        raise PipelineError("ingest", sorted(errors), "; ".join(errors[k] for k in sorted(errors)))
    ids = manifest.ids
    labels = manifest.labels
    split = split_dataset(manifest, config.ratios, config.seed, config.stratified)
    api_list = load_api_list(config.api_list)

    with timer.stage("embed"):
        vocab, table = train_skipgram(build_corpus(graphs), config.skipgram)
    with timer.stage("intra_train"):
        try:
            intra = fit_intra(graphs, labels, split, vocab, table, config.steps, config.intra)
        except HypervulnError as exc:
            raise PipelineError("intra_train", [ids[i] for i in np.flatnonzero(split == "train")], exc) from exc
    with timer.stage("intra_encode"):
        X = encode_functions(graphs, vocab, table, intra.params)
        scaler = detector.FeatureScaler.fit(X[split == "train"])
        Xs = scaler.apply(X)
    with timer.stage("slice"):
        subs = extract_behaviors(graphs, api_list)
    with timer.stage("behavior_encode"):
        vectors = encode_behaviors(subs, {g.function_id: g for g in graphs}, vocab, table, intra.params)
    with timer.stage("cluster"):
        if subs:
            centroids, assignment = kmeans(vectors, config.K, config.seed, config.kmeans_max_iters,
                                           [s.function_id for s in subs])
            hyperedges = build_hyperedges(assignment, config.min_members)
        else:
            centroids, hyperedges = np.zeros((0, config.d)), []
        hg = incidence(hyperedges, ids)
    with timer.stage("hgnn_train"):
        fit = detector.fit(Xs, hg, labels, split, config.hgnn, config.layers, config.threshold)
        p = detector.forward(Xs, hg, fit.params)
    baseline = None
    if config.baseline:
        with timer.stage("baseline_train"):
            base_fit = detector.fit(Xs, hg, labels, split, config.hgnn, 0, config.threshold)
            baseline = detector.split_metrics(detector.forward(Xs, hg, base_fit.params), labels, split,
                                              config.threshold)

    bundle = ModelBundle(config, vocab, table, intra.params, centroids, hyperedges, ids, X, scaler,
                         fit.params, api_list)
    report = RunReport(
        config=config.to_dict(),
        metrics=detector.split_metrics(p, labels, split, config.threshold),
        baseline=baseline,
        counts={
            "functions": len(ids),
            "behaviors": len(subs),
            "hyperedges": len(hyperedges),
            "singleton_hyperedges": int(np.sum(hg.edge_clusters < 0)),
            "vocabulary": len(vocab),
            "split": {name: int(np.sum(split == name)) for name in ("train", "val", "test")},
        },
        training={"intra_best_epoch": intra.best_epoch, "hgnn_best_epoch": fit.best_epoch},
        bundle_sha256=bundle.checksum(),
        timings=dict(timer),
    )
    return bundle, report


def training_probabilities(bundle: ModelBundle) -> np.ndarray:
    """Probabilities of the stored functions on the stored hypergraph."""
    hg = incidence(bundle.hyperedges, bundle.function_ids)
    return detector.forward(bundle.scaler.apply(bundle.features), hg, bundle.hgnn)


def detect(functions, bundle: ModelBundle, threshold: float | None = None) -> list[dict]:
    """Score new functions against the trained hypergraph.

    ``functions`` is a :class:`DatasetManifest` or a list of Cpgs. New
    functions join the stored hypergraph as extra vertices: each joins the
    hyperedges of the clusters its behaviors fall into, and functions without
    any get a singleton hyperedge. Stored memberships are reused unchanged.
    Records that fail to load produce an error record instead of a score.
    """
    threshold = bundle.config.threshold if threshold is None else threshold
    if isinstance(functions, DatasetManifest):
        loaded, errors = ingest(functions)
        order = functions.ids
    else:
        loaded, errors = list(functions), {}
        order = [g.function_id for g in loaded]
    graphs = [g for g in loaded if g is not None]
    out = {fid: {"format_version": PREDICTION_VERSION, "id": fid, "error": msg} for fid, msg in errors.items()}
    if graphs:
        X_new = encode_functions(graphs, bundle.vocab, bundle.table, bundle.ggnn)
        owner, vectors = _behavior_vectors(graphs, bundle)
        members = {e.cluster: [("train", m) for m in e.members] for e in bundle.hyperedges}
        if len(owner) and len(bundle.centroids):
            for j, c in zip(owner, assign_new(vectors, bundle.centroids).tolist()):
                # clusters dropped at training time stay dropped
                if c in members and ("new", j) not in members[c]:
                    members[c].append(("new", j))
        vertex_keys = [("train", fid) for fid in bundle.function_ids] + [("new", j) for j in range(len(graphs))]
        hyperedges = [Hyperedge(e.cluster, tuple(members[e.cluster])) for e in bundle.hyperedges]
        hg = incidence(hyperedges, vertex_keys)
        X = bundle.scaler.apply(np.vstack([bundle.features, X_new]))
        p = detector.forward(X, hg, bundle.hgnn)[len(bundle.function_ids):]
        for j, g in enumerate(graphs):
            prob = float(p[j])
            out[g.function_id] = {
                "format_version": PREDICTION_VERSION,
                "id": g.function_id,
                "probability": prob,
                "label": "vulnerable" if prob >= threshold else "clean",
            }
    return [out[fid] for fid in order if fid in out]


def _behavior_vectors(graphs, bundle):
    """Behavior vectors of new graphs, keyed by graph position since ids may repeat."""
    subs, owner, cpg_of = [], [], {}
    for j, g in enumerate(graphs):
        key = f"#{j}"
        cpg_of[key] = g
        for s in extract_behaviors([g], bundle.api_list):
            subs.append(BehaviorSubgraph(key, s.interest_point, s.node_ids, s.edges))
            owner.append(j)
    return owner, encode_behaviors(subs, cpg_of, bundle.vocab, bundle.table, bundle.ggnn)


def write_predictions(predictions, path) -> Path:
    path = Path(path)
    path.write_text("".join(json.dumps(p, sort_keys=True) + "\n" for p in predictions), "utf-8")
    return path


def read_predictions(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text("utf-8").splitlines() if line.strip()]
