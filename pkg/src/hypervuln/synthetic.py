"""Planted-pattern mini-C corpus for end-to-end checks.

Every function mixes random filler code with exactly one of four risky
patterns. Most filler avoids the interest-point rules, so the behaviors of a
function are mostly its pattern slices; ``risky_rate`` controls how much
filler does trigger them. Vulnerable functions use the unguarded form; clean functions use
the same code with a guard on the tainted value. Vulnerable functions carry
a decoy guard on an unrelated variable so that both classes hold the same
kinds of tokens and differ only in which variable the guard tests.

Patterns:

* ``index``: integer parsed from input used as an array index
* ``copy``: string length used as a copy size
* ``alloc``: input-derived count multiplied into an allocation size
* ``deref``: freshly allocated pointer written through
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PATTERNS = ("index", "copy", "alloc", "deref")

_NAMES = (
    "a", "b", "c", "k", "m", "n", "t", "u", "v", "w", "acc", "cnt", "idx", "len2", "off",
    "pos", "sum", "tmp", "val", "lim", "step", "base", "cur", "total",
)


@dataclass(frozen=True)
class PlantedFunction:
    function_id: str
    source: str
    label: str
    pattern: str


def _pattern(kind, names, guarded):
    x, y, z = names
    if kind == "index":
        head = [f"int {x} = atoi(src);", f"int {y}[16];"]
        sink, limit = f"{y}[{x}] = len;", "16"
        guard_var = x
    elif kind == "copy":
        head = [f"char {y}[64];", f"int {x} = strlen(src);"]
        sink, limit = f"memcpy({y}, src, {x});", "64"
        guard_var = x
    elif kind == "alloc":
        head = [f"int {x} = atoi(src);", f"int {z} = {x} * 4;", f"char *{y} = malloc({z});"]
        sink, limit = f"{y}[{x}] = 0;", "1024"
        guard_var = x
    else:
        head = [f"int *{y} = malloc(len);"]
        sink, limit = f"*{y} = 0;", "0"
        guard_var = y
    op = "!=" if kind == "deref" else "<"
    if guarded:
        return head + [f"if ({guard_var} {op} {limit}) {{ {sink} }}"], (op, limit)
    return head + [sink], (op, limit)


def _plain_filler(rng, scalars):
    """Filler that triggers no interest-point rule."""
    a, b = (scalars[i] for i in rng.choice(len(scalars), size=2, replace=False))
    lit = int(rng.integers(1, 9))
    choice = int(rng.integers(5))
    if choice == 0:
        return f"{a} = {b};"
    if choice == 1:
        return f"if ({a} > {b}) {{ {a} = {b}; }} else {{ {b} = {a}; }}"
    if choice == 2:
        return f"while ({a} > {lit * 10}) {{ {a} = {b}; }}"
    if choice == 3:
        return f'printf("%d", {a});'
    return f"if ({a} == {lit}) {{ {b} = {lit}; }}"


def _risky_filler(rng, scalars, arrays):
    """Filler that does trigger the array or integer rules."""
    a, b = (scalars[i] for i in rng.choice(len(scalars), size=2, replace=False))
    lit = int(rng.integers(1, 9))
    arr = arrays[int(rng.integers(len(arrays)))]
    choice = int(rng.integers(5))
    if choice == 0:
        return f"{a} = {b} + {lit};"
    if choice == 1:
        return f"{a} = {a} * {b};"
    if choice == 2:
        return f"for (int i = 0; i < {lit + 2}; i++) {{ {a} = {a} + i; }}"
    if choice == 3:
        return f"{arr}[{lit}] = {a};"
    return f"{a} = {arr}[{lit}] - {b};"


def planted_function(rng, index: int, vulnerable: bool, pattern: str, filler_range=(6, 12),
                     risky_rate: float = 0.2) -> PlantedFunction:
    names = list(rng.permutation(_NAMES))
    pattern_names, scalars, arrays = names[:3], names[3:8], names[8:10]
    decls = [f"int {s} = {int(rng.integers(0, 20))};" for s in scalars]
    decls += [f"int {arr}[10];" for arr in arrays]
    body, (op, limit) = _pattern(pattern, pattern_names, guarded=not vulnerable)
    fillers = []
    for _ in range(int(rng.integers(*filler_range))):
        if rng.random() < risky_rate:
            fillers.append(_risky_filler(rng, scalars, arrays))
        else:
            fillers.append(_plain_filler(rng, scalars))
    if vulnerable:
        s = scalars[int(rng.integers(len(scalars)))]
        fillers.append(f"if ({s} {op} {limit}) {{ {s} = 0; }}")
    cut = int(rng.integers(0, len(fillers) + 1))
    order = [fillers[i] for i in rng.permutation(len(fillers))]
    stmts = decls + order[:cut] + body + order[cut:] + [f"return {scalars[0]};"]
    fid = f"fn_{index:04d}"
    lines = [f"int {fid}(char *src, int len) {{"] + [f"    {s}" for s in stmts] + ["}"]
    return PlantedFunction(fid, "\n".join(lines) + "\n", "vulnerable" if vulnerable else "clean", pattern)


def planted_corpus(n: int = 400, seed: int = 0, positive_rate: float = 0.5, risky_rate: float = 0.2,
                   filler_range=(6, 12)) -> list[PlantedFunction]:
    """``n`` planted functions; patterns cycle so each appears equally often.

    ``risky_rate`` is the chance that a filler statement is itself an
    interest point (array access or integer arithmetic).
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n * positive_rate))
    flags = np.array([True] * n_pos + [False] * (n - n_pos))[rng.permutation(n)]
    return [planted_function(rng, i, bool(flags[i]), PATTERNS[i % len(PATTERNS)],
                             filler_range, risky_rate) for i in range(n)]


def benchmark_config(seed: int = 0):
    """Pipeline settings for the planted benchmark: K=16, d=32, T=2, L=2.

    The hypergraph stage trains for 500 full-batch epochs and decays its
    learning rate every 100 epochs; with one optimizer step per epoch a
    per-epoch decay stops it after a few dozen steps. The intra stage keeps
    the library defaults.
    """
    from .optim import TrainConfig
    from .workbench.config import PipelineConfig

    config = PipelineConfig(d=32, steps=2, K=16, layers=2, hgnn=TrainConfig(epochs=500, decay_every=100))
    return config.with_seed(seed)


def manifest_records(functions) -> list[dict]:
    return [{"id": f.function_id, "label": f.label, "source": f.source} for f in functions]
