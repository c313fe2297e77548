"""Command-line entry point: ``hypervuln <verb> ...``.

Verbs: ``parse``, ``slice``, ``train``, ``detect``, ``eval``, ``report`` and
``generate`` (writes a planted benchmark manifest). Library errors exit with
status 1 and a one-line message; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..cpg import pdg_view, save_cpg
from ..errors import HypervulnError
from ..metrics import evaluate
from ..minic import parse_function
from ..slicing import behaviors_of, load_api_list
from .bundle import load_bundle, save_bundle
from .config import PipelineConfig
from .manifest import DatasetManifest, load_manifest
from .pipeline import detect, emit_report, ingest, load_report, read_predictions, run_pipeline, write_predictions

log = logging.getLogger("hypervuln")


def _graphs(args):
    """CPGs from ``--manifest`` or from positional mini-C files."""
    if args.manifest:
        manifest = load_manifest(args.manifest)
        graphs, errors = ingest(manifest)
        for fid, msg in sorted(errors.items()):
            print(f"{fid}: {msg}", file=sys.stderr)
        return [g for g in graphs if g is not None], bool(errors)
    if not args.sources:
        raise SystemExit("error: give mini-C files or --manifest")
    out, failed = [], False
    for path in args.sources:
        try:
            out.append(parse_function(Path(path).read_text("utf-8"), Path(path).stem))
        except HypervulnError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            failed = True
    return out, failed


def _write(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, "utf-8")


def cmd_parse(args) -> int:
    graphs, failed = _graphs(args)
    if args.manifest or len(args.sources) > 1:
        # several functions: one document each, named by function id
        if not args.out:
            raise SystemExit("error: parsing several functions needs --out DIR")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for g in graphs:
            (out_dir / f"{g.function_id}.json").write_text(save_cpg(g), "utf-8")
    elif graphs:
        _write(save_cpg(graphs[0]), args.out)
    return 1 if failed else 0


def cmd_slice(args) -> int:
    graphs, failed = _graphs(args)
    api_list = load_api_list(args.api_list)
    lines = []
    for g in graphs:
        for sub in behaviors_of(pdg_view(g), g, api_list):
            lines.append(json.dumps({
                "function_id": sub.function_id,
                "interest_point": {"node_id": sub.interest_point.node_id, "category": sub.interest_point.category},
                "nodes": sorted(sub.node_ids),
                "edges": [[e.src, e.dst, e.kind] for e in sorted(sub.edges)],
            }, sort_keys=True))
    _write("".join(line + "\n" for line in lines), args.out)
    return 1 if failed else 0


def _config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def cmd_train(args) -> int:
    if not args.manifest:
        raise SystemExit("error: train needs --manifest")
    config = _config(args)
    out_dir = Path(args.out or "run")
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle, report = run_pipeline(load_manifest(args.manifest), config)
    bundle_path = Path(args.bundle) if args.bundle else out_dir / "model.hvb"
    save_bundle(bundle, bundle_path)
    emit_report(report, out_dir / "report.json", out_dir / "timings.json")
    test = report.metrics["test"]
    print(f"bundle {bundle_path} sha256 {report.bundle_sha256[:12]}")
    print(f"test F-measure {test.f_measure:.4f} recall {test.recall:.4f}")
    return 0


def cmd_detect(args) -> int:
    if not args.manifest or not args.bundle:
        raise SystemExit("error: detect needs --manifest and --bundle")
    bundle = load_bundle(args.bundle)
    predictions = detect(load_manifest(args.manifest), bundle, args.threshold)
    if args.out:
        write_predictions(predictions, args.out)
    else:
        sys.stdout.write("".join(json.dumps(p, sort_keys=True) + "\n" for p in predictions))
    return 1 if any("error" in p for p in predictions) else 0


def cmd_eval(args) -> int:
    if not args.manifest:
        raise SystemExit("error: eval needs --manifest for the labels")
    manifest = load_manifest(args.manifest)
    by_id = {p["id"]: p for p in read_predictions(args.predictions) if "error" not in p}
    missing = [r.id for r in manifest.records if r.id not in by_id]
    if missing:
        print(f"no prediction for {len(missing)} records, e.g. {missing[:3]}", file=sys.stderr)
    rows = [r for r in manifest.records if r.id in by_id and r.label in ("vulnerable", "clean")]
    if args.threshold is None:
        predicted = [by_id[r.id]["label"] == "vulnerable" for r in rows]
    else:
        predicted = [by_id[r.id]["probability"] >= args.threshold for r in rows]
    metrics = evaluate(predicted, [r.y for r in rows])
    _write(json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_report(args) -> int:
    report = load_report(args.report)
    lines = [f"bundle sha256  {report.bundle_sha256}"]
    counts = report.counts
    lines.append(f"functions {counts.get('functions')}  behaviors {counts.get('behaviors')}  "
                 f"hyperedges {counts.get('hyperedges')}  split {counts.get('split')}")
    lines.append(f"{'split':<6} {'model':<9} {'TP':>5} {'FP':>5} {'FN':>5} {'TN':>5} {'recall':>7} {'F':>7}")
    blocks = [("hgnn", report.metrics)] + ([("baseline", report.baseline)] if report.baseline else [])
    for name in ("train", "val", "test"):
        for model, block in blocks:
            m = block[name]
            lines.append(f"{name:<6} {model:<9} {m.tp:>5} {m.fp:>5} {m.fn:>5} {m.tn:>5} "
                         f"{m.recall:>7.4f} {m.f_measure:>7.4f}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_generate(args) -> int:
    from ..synthetic import manifest_records, planted_corpus

    seed = 0 if args.seed is None else args.seed
    manifest = DatasetManifest.from_records(manifest_records(planted_corpus(args.n, seed)),
                                            provenance=f"planted benchmark, n={args.n}, seed={seed}")
    _write("\n".join(manifest.to_lines()) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypervuln", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, *flags):
        if "manifest" in flags:
            p.add_argument("--manifest", help="line-delimited JSON manifest")
        if "bundle" in flags:
            p.add_argument("--bundle", help="model bundle path")
        if "config" in flags:
            p.add_argument("--config", help="pipeline config JSON")
        if "seed" in flags:
            p.add_argument("--seed", type=int, help="reseed every stage")
        if "threshold" in flags:
            p.add_argument("--threshold", type=float, help="decision threshold on the probability")
        p.add_argument("--out", help="output path (stdout when omitted)")

    p = sub.add_parser("parse", help="mini-C to CPG exchange documents")
    p.add_argument("sources", nargs="*")
    common(p, "manifest")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("slice", help="emit behavior subgraphs as JSON lines")
    p.add_argument("sources", nargs="*")
    p.add_argument("--api-list", help="sensitive API list (one name per line)")
    common(p, "manifest")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("train", help="run the full pipeline; --out is a directory")
    common(p, "manifest", "config", "seed", "bundle")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score a manifest with a trained bundle")
    common(p, "manifest", "bundle", "threshold")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="metrics from a predictions file and a labeled manifest")
    p.add_argument("predictions")
    common(p, "manifest", "threshold")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="pretty-print a run report")
    p.add_argument("report")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("generate", help="write a planted benchmark manifest")
    p.add_argument("-n", type=int, default=400)
    common(p, "seed")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (HypervulnError, OSError, ValueError) as exc:
        print(f"hypervuln {args.verb}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
