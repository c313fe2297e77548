"""Code property graph types, the JSON exchange format, and the PDG view.

A :class:`Cpg` holds one function. Nodes are the function entry, statements,
branch/loop conditions and syntax-only nodes; edges carry one of four kinds:

* ``AST`` syntax tree, a forest rooted at the entry node
* ``CFG`` control flow between entry, statement and condition nodes
* ``DDG`` reaching-definition data dependence (definition -> use)
* ``CDG`` control dependence (condition -> statement in its body)

Exchange documents are UTF-8 JSON objects::

    {"format_version": 1, "function_id": "f1", "label": "clean",
     "nodes": [{"node_id": 0, "kind": "entry", "tokens": [], "line": 1}, ...],
     "edges": [{"src": 0, "dst": 1, "kind": "AST"}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DanglingEdge, SchemaError

FORMAT_VERSION = 1

NODE_KINDS = ("entry", "statement", "condition", "syntax")
EDGE_KINDS = ("AST", "CFG", "DDG", "CDG")
LABELS = ("vulnerable", "clean", "unknown")
CFG_NODE_KINDS = frozenset({"entry", "statement", "condition"})


@dataclass(frozen=True)
class CpgNode:
    node_id: int
    kind: str
    tokens: tuple[str, ...]
    line: int


@dataclass(frozen=True, order=True)
class CpgEdge:
    src: int
    dst: int
    kind: str


@dataclass
class Cpg:
    function_id: str
    nodes: list[CpgNode]
    edges: list[CpgEdge]
    label: str = "unknown"

    def __post_init__(self):
        self._by_id = {n.node_id: n for n in self.nodes}

    def node(self, node_id) -> CpgNode:
        return self._by_id[node_id]

    def has_node(self, node_id) -> bool:
        return node_id in self._by_id

    @property
    def entry_ids(self) -> list[int]:
        return [n.node_id for n in self.nodes if n.kind == "entry"]

    def edges_of(self, *kinds) -> list[CpgEdge]:
        return [e for e in self.edges if e.kind in kinds]

    def successors(self, node_id, kind="CFG") -> list[int]:
        return sorted(e.dst for e in self.edges if e.src == node_id and e.kind == kind)

    def validate(self) -> "Cpg":
        """Check every structural invariant; raise on the first violation."""
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise SchemaError("nodes", "duplicate node_id")
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise SchemaError("nodes.kind", f"unknown node kind {n.kind!r}")
            if n.kind in ("statement", "condition") and not n.tokens:
                raise SchemaError("nodes.tokens", f"node {n.node_id} has no tokens")
        if not self.entry_ids:
            raise SchemaError("nodes", "no entry node")
        if self.label not in LABELS:
            raise SchemaError("label", f"unknown label {self.label!r}")
        seen = set()
        ast_parent = {}
        for e in self.edges:
            if e.kind not in EDGE_KINDS:
                raise SchemaError("edges.kind", f"unknown edge kind {e.kind!r}")
            for end in (e.src, e.dst):
                if end not in self._by_id:
                    raise DanglingEdge(end)
            key = (e.src, e.dst, e.kind)
            if key in seen:
                raise SchemaError("edges", f"duplicate edge {key}")
            seen.add(key)
            if e.kind == "CFG":
                for end in (e.src, e.dst):
                    if self._by_id[end].kind not in CFG_NODE_KINDS:
                        raise SchemaError("edges", f"CFG edge touches {self._by_id[end].kind} node {end}")
            if e.kind == "AST":
                if e.dst in ast_parent:
                    raise SchemaError("edges", f"node {e.dst} has two AST parents")
                if self._by_id[e.dst].kind == "entry":
                    raise SchemaError("edges", "entry node cannot have an AST parent")
                ast_parent[e.dst] = e.src
        for start in ast_parent:
            walk, cur = set(), start
            while cur in ast_parent:
                if cur in walk:
                    raise SchemaError("edges", "AST edges contain a cycle")
                walk.add(cur)
                cur = ast_parent[cur]
        return self


@dataclass(frozen=True)
class Pdg:
    """Dependence-only view of a Cpg.

    ``nodes`` holds the statement and condition nodes plus the entry node,
    which is where parameters are defined.
    """

    function_id: str
    nodes: tuple[int, ...]
    edges: tuple[CpgEdge, ...] = field(default=())

    def successors(self) -> dict[int, list[int]]:
        out = {v: [] for v in self.nodes}
        for e in self.edges:
            out[e.src].append(e.dst)
        return out

    def predecessors(self) -> dict[int, list[int]]:
        out = {v: [] for v in self.nodes}
        for e in self.edges:
            out[e.dst].append(e.src)
        return out


def pdg_view(cpg: Cpg) -> Pdg:
    nodes = tuple(sorted(n.node_id for n in cpg.nodes if n.kind in CFG_NODE_KINDS))
    edges = tuple(sorted(e for e in cpg.edges if e.kind in ("DDG", "CDG")))
    return Pdg(cpg.function_id, nodes, edges)


def pdg_as_cpg(pdg: Pdg, cpg: Cpg) -> Cpg:
    """Embed a PDG back into a Cpg carrying only its nodes and dependence edges."""
    keep = set(pdg.nodes)
    return Cpg(cpg.function_id, [n for n in cpg.nodes if n.node_id in keep], list(pdg.edges), cpg.label)


# -- exchange format -----------------------------------------------------


def _require(obj, key, types, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}{key}", "missing")
    value = obj[key]
    # bool is a subclass of int; JSON true/false is never a valid id or line
    if not isinstance(value, types) or (types is int and isinstance(value, bool)):
        raise SchemaError(f"{where}{key}", f"expected {types}, got {type(value).__name__}")
    return value


def cpg_from_dict(doc: dict) -> Cpg:
    if not isinstance(doc, dict):
        raise SchemaError("document", "expected a JSON object")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError("format_version", f"unsupported version {version!r}")
    function_id = _require(doc, "function_id", str, "")
    label = doc.get("label", "unknown")
    if label not in LABELS:
        raise SchemaError("label", f"unknown label {label!r}")
    nodes = []
    for i, raw in enumerate(_require(doc, "nodes", list, "")):
        where = f"nodes[{i}]."
        node_id = _require(raw, "node_id", int, where)
        kind = _require(raw, "kind", str, where)
        if kind not in NODE_KINDS:
            raise SchemaError(where + "kind", f"unknown node kind {kind!r}")
        tokens = _require(raw, "tokens", list, where)
        if not all(isinstance(t, str) for t in tokens):
            raise SchemaError(where + "tokens", "tokens must be strings")
        line = _require(raw, "line", int, where)
        nodes.append(CpgNode(node_id, kind, tuple(tokens), line))
    edges = []
    for i, raw in enumerate(_require(doc, "edges", list, "")):
        where = f"edges[{i}]."
        src = _require(raw, "src", int, where)
        dst = _require(raw, "dst", int, where)
        kind = _require(raw, "kind", str, where)
        if kind not in EDGE_KINDS:
            raise SchemaError(where + "kind", f"unknown edge kind {kind!r}")
        edges.append(CpgEdge(src, dst, kind))
    return Cpg(function_id, nodes, edges, label).validate()


def load_cpg(document: str) -> Cpg:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError("document", f"not valid JSON ({exc.msg})") from None
    return cpg_from_dict(doc)


def cpg_to_dict(cpg: Cpg) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "function_id": cpg.function_id,
        "label": cpg.label,
        "nodes": [
            {"node_id": n.node_id, "kind": n.kind, "tokens": list(n.tokens), "line": n.line}
            for n in sorted(cpg.nodes, key=lambda n: n.node_id)
        ],
        "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind} for e in sorted(cpg.edges)],
    }


def save_cpg(cpg: Cpg) -> str:
    """Serialize to canonical JSON: nodes by id, edges by (src, dst, kind)."""
    return json.dumps(cpg_to_dict(cpg), sort_keys=True, ensure_ascii=False)


def canonicalize(document: str) -> str:
    """Canonical form of a valid exchange document, for comparisons."""
    return save_cpg(load_cpg(document))
