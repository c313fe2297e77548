"""Dataset manifests and the train/val/test split.

A manifest is line-delimited JSON. An optional first line without an ``id``
is the header (``format_version``, ``provenance``). Every other line is a
record with an ``id``, a ``label`` and exactly one of ``source`` (mini-C
text) or ``cpg`` (path to a CPG exchange document, relative to the manifest)::

    {"format_version": 1, "provenance": "planted benchmark, seed 0"}
    {"id": "f1", "label": "vulnerable", "source": "int f(char *s) { ... }"}
    {"id": "f2", "label": "clean", "cpg": "cpgs/f2.json"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..cpg import Cpg, load_cpg
from ..errors import SchemaError, TooFewRecords
from ..minic import parse_function

FORMAT_VERSION = 1
LABELS = ("vulnerable", "clean", "unknown")


@dataclass(frozen=True)
class Record:
    id: str
    label: str = "unknown"
    source: str | None = None
    cpg_path: str | None = None

    @property
    def y(self) -> int:
        return 1 if self.label == "vulnerable" else 0


@dataclass
class DatasetManifest:
    records: list[Record]
    provenance: str = ""
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaError("id", f"duplicate ids {dupes}")

    def __len__(self):
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.y for r in self.records], dtype=np.int64)

    def require_labels(self):
        bad = [r.id for r in self.records if r.label not in ("vulnerable", "clean")]
        if bad:
            raise SchemaError("label", f"records without a vulnerable/clean label: {bad[:5]}")

    def load_graph(self, record: Record) -> Cpg:
        if record.source is not None:
            return parse_function(record.source, record.id, record.label)
        path = Path(record.cpg_path)
        if not path.is_absolute():
            path = self.base_dir / path
        cpg = load_cpg(path.read_text("utf-8"))
        return Cpg(record.id, cpg.nodes, cpg.edges, record.label)

    @classmethod
    def from_records(cls, raw_records, provenance="", base_dir=".") -> "DatasetManifest":
        return cls([_record(r, i) for i, r in enumerate(raw_records)], provenance, Path(base_dir))

    def to_lines(self) -> list[str]:
        lines = [json.dumps({"format_version": FORMAT_VERSION, "provenance": self.provenance}, sort_keys=True)]
        for r in self.records:
            rec = {"id": r.id, "label": r.label}
            if r.source is not None:
                rec["source"] = r.source
            else:
                rec["cpg"] = r.cpg_path
            lines.append(json.dumps(rec, sort_keys=True))
        return lines

    def save(self, path):
        Path(path).write_text("\n".join(self.to_lines()) + "\n", "utf-8")


def _record(raw, lineno) -> Record:
    where = f"record {lineno}"
    if not isinstance(raw, dict) or not isinstance(raw.get("id"), str):
        raise SchemaError(f"{where}.id", "missing or not a string")
    label = raw.get("label", "unknown")
    if label not in LABELS:
        raise SchemaError(f"{where}.label", f"unknown label {label!r}")
    has_src, has_cpg = "source" in raw, "cpg" in raw
    if has_src == has_cpg:
        raise SchemaError(f"{where}", "needs exactly one of 'source' or 'cpg'")
    return Record(raw["id"], label, raw.get("source"), raw.get("cpg"))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    provenance = ""
    records = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}", f"invalid JSON ({exc.msg})") from None
        if isinstance(raw, dict) and "id" not in raw:
            version = raw.get("format_version", FORMAT_VERSION)
            if version != FORMAT_VERSION:
                raise SchemaError("format_version", f"unsupported manifest version {version!r}")
            provenance = raw.get("provenance", "")
            continue
        records.append(raw)
    return DatasetManifest.from_records(records, provenance, path.parent)


def _cut(n, ratios):
    n_train = int(np.floor(n * ratios[0] + 1e-9))
    rest = n - n_train
    tail = ratios[1] + ratios[2]
    n_val = int(np.floor(rest * ratios[1] / tail)) if tail > 0 else 0
    return n_train, n_val


def split_dataset(manifest: DatasetManifest, ratios=(0.8, 0.1, 0.1), seed: int = 0, stratified: bool = False) -> np.ndarray:
    """Seeded shuffle, then contiguous cuts: ``floor`` for train, the rest shared by val and test.

    Returns one of ``"train"``/``"val"``/``"test"`` per record, in manifest order.
    """
    n = len(manifest)
    if n < 10:
        raise TooFewRecords(f"need at least 10 records to split, got {n}")
    rng = np.random.default_rng(seed)
    mask = np.empty(n, dtype=object)
    groups = [np.arange(n)]
    if stratified:
        labels = manifest.labels
        groups = [np.flatnonzero(labels == c) for c in (1, 0)]
    for group in groups:
        order = group[rng.permutation(len(group))]
        n_train, n_val = _cut(len(group), ratios)
        mask[order[:n_train]] = "train"
        mask[order[n_train:n_train + n_val]] = "val"
        mask[order[n_train + n_val:]] = "test"
    return mask.astype(str)
