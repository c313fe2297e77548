"""Interest-point detection and bidirectional PDG slicing.

An interest point is a PDG node whose tokens match one of four rules, checked
in this order (the first rule that fires names the category):

1. ``sensitive_api``: calls a name from the configured API list
2. ``array``: contains an array subscript
3. ``integer``: applies an arithmetic operator to a variable declared ``int``
4. ``pointer``: dereferences a pointer or takes an address

A behavior subgraph is everything the point depends on plus everything that
depends on it, following DDG and CDG edges alike.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .cpg import Cpg, CpgEdge, Pdg
from .errors import UnknownNode

CATEGORIES = ("sensitive_api", "array", "integer", "pointer")

_TYPES = frozenset({"int", "char", "float", "void"})
_ARITH = frozenset({"+", "-", "*", "/", "%", "+=", "-=", "*=", "/=", "%=", "++", "--"})
_OPERAND_END = frozenset({")", "]", "++", "--"})


@dataclass(frozen=True)
class InterestPoint:
    node_id: int
    category: str


@dataclass(frozen=True)
class BehaviorSubgraph:
    function_id: str
    interest_point: InterestPoint
    node_ids: frozenset
    edges: tuple[CpgEdge, ...]


def load_api_list(path=None) -> frozenset:
    """Read an API list: one name per line, ``#`` starts a comment.

    Without a path the packaged default list is used.
    """
    if path is None:
        text = resources.files("hypervuln").joinpath("data/sensitive_apis.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    names = []
    for line in text.splitlines():
        name = line.split("#", 1)[0].strip()
        if name:
            names.append(name)
    return frozenset(names)


def _is_ident(tok):
    return (tok[:1].isalpha() or tok[:1] == "_") and tok not in _TYPES and tok != "return"


def _scan_declaration(tokens):
    """Walk a declaration's tokens.

    Returns ``(marks, declarators)``: indices of ``*``/``[`` tokens that belong
    to declarators, and ``(name, is_pointer, is_array)`` per declarator.
    """
    marks, declarators = set(), []
    if not tokens or tokens[0] not in _TYPES:
        return marks, declarators
    depth, state, pointer = 0, "decl", False
    for j, tok in enumerate(tokens[1:], start=1):
        if depth == 0 and state == "name" and tok == "[":
            marks.add(j)
            name, ptr, _ = declarators[-1]
            declarators[-1] = (name, ptr, True)
        if tok in ("(", "["):
            depth += 1
        elif tok in (")", "]"):
            depth -= 1
        elif depth > 0:
            continue
        elif tok == ",":
            state, pointer = "decl", False
        elif tok == "=":
            state = "init"
        elif state == "decl" and tok == "*":
            marks.add(j)
            pointer = True
        elif state == "decl" and _is_ident(tok):
            declarators.append((tok, pointer, False))
            state = "name"
    return marks, declarators


def _declarator_marks(tokens):
    return _scan_declaration(tokens)[0]


def _unary_position(tokens, j):
    if j == 0:
        return True
    prev = tokens[j - 1]
    if prev == "return":
        return True
    return not (_is_ident(prev) or prev[:1].isdigit() or prev[:1] in "\"'." or prev in _OPERAND_END)


def declared_integers(cpg: Cpg) -> frozenset:
    """Plain ``int`` scalars declared in the function or its parameters."""
    names = set()
    for node in cpg.nodes:
        if node.tokens[:1] == ("int",) and node.kind in ("statement", "syntax"):
            _, declarators = _scan_declaration(node.tokens)
            names.update(name for name, ptr, arr in declarators if not ptr and not arr)
    return frozenset(names)


def classify_tokens(tokens, api_list, integers) -> str | None:
    """Return the interest-point category for one node's tokens, or None."""
    tokens = list(tokens)
    marks = _declarator_marks(tokens)
    for j, tok in enumerate(tokens):
        if tok in api_list and j + 1 < len(tokens) and tokens[j + 1] == "(":
            return "sensitive_api"
    if any(tok == "[" and j not in marks and j > 0 for j, tok in enumerate(tokens)):
        return "array"
    for j, tok in enumerate(tokens):
        if tok not in _ARITH or j in marks:
            continue
        if tok == "*" and _unary_position(tokens, j):
            continue
        neighbours = [tokens[k] for k in (j - 1, j + 1) if 0 <= k < len(tokens)]
        if any(n in integers for n in neighbours):
            return "integer"
    for j, tok in enumerate(tokens):
        if tok == "&" or (tok == "*" and j not in marks and _unary_position(tokens, j)):
            return "pointer"
    return None


def find_interest_points(pdg: Pdg, cpg: Cpg, api_list) -> list[InterestPoint]:
    integers = declared_integers(cpg)
    points = []
    for node_id in sorted(pdg.nodes):
        node = cpg.node(node_id)
        if node.kind not in ("statement", "condition"):
            continue
        category = classify_tokens(node.tokens, api_list, integers)
        if category is not None:
            points.append(InterestPoint(node_id, category))
    return points


def _closure(start, neighbours):
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in neighbours[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def slice(pdg: Pdg, point: InterestPoint) -> BehaviorSubgraph:
    """Forward and backward closure of ``point`` over dependence edges."""
    if point.node_id not in pdg.nodes:
        raise UnknownNode(point.node_id)
    node_ids = _closure(point.node_id, pdg.successors()) | _closure(point.node_id, pdg.predecessors())
    edges = tuple(e for e in pdg.edges if e.src in node_ids and e.dst in node_ids)
    return BehaviorSubgraph(pdg.function_id, point, frozenset(node_ids), edges)


def behaviors_of(pdg: Pdg, cpg: Cpg, api_list) -> list[BehaviorSubgraph]:
    """One subgraph per interest point, dropping slices with an already-seen node set."""
    seen, out = set(), []
    for point in find_interest_points(pdg, cpg, api_list):
        sub = slice(pdg, point)
        if sub.node_ids not in seen:
            seen.add(sub.node_ids)
            out.append(sub)
    return out
