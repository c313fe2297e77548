import numpy as np
import pytest

from hypervuln.embedding import SkipgramConfig, build_corpus, train_skipgram
from hypervuln.minic import parse_function

SNIPPETS = [
    "int f(char *s, int n) {\n  int buf[8];\n  int k = atoi(s);\n  buf[k] = n;\n  return k;\n}\n",
    "int g(int a, int b) {\n  int c = a + b;\n  if (c > 10) { c = 10; }\n  return c;\n}\n",
    "void h(char *d, char *s) {\n  int n = strlen(s);\n  while (n > 0) { n = n - 1; }\n  memcpy(d, s, n);\n}\n",
]


def random_program(rng, n_stmts=10, n_vars=4, depth=2):
    """Random mini-C function with non-empty blocks; at most ``n_stmts`` statements."""
    names = [f"v{i}" for i in range(n_vars)]
    budget = [n_stmts]

    def expr():
        a = names[rng.integers(n_vars)]
        if rng.random() < 0.5:
            return a
        b = names[rng.integers(n_vars)] if rng.random() < 0.7 else str(int(rng.integers(1, 9)))
        return f"{a} {rng.choice(['+', '-', '*'])} {b}"

    def block(level):
        out = []
        for _ in range(int(rng.integers(1, 4))):
            if budget[0] <= 0:
                break
            budget[0] -= 1
            r = rng.random()
            target = names[rng.integers(n_vars)]
            if level < depth and r < 0.2:
                body = block(level + 1) or [f"{target} = 1;"]
                if rng.random() < 0.5:
                    other = block(level + 1) or [f"{target} = 2;"]
                    out.append(f"if ({expr()} > 0) {{ {' '.join(body)} }} else {{ {' '.join(other)} }}")
                else:
                    out.append(f"if ({expr()} > 0) {{ {' '.join(body)} }}")
            elif level < depth and r < 0.3:
                body = block(level + 1) or [f"{target} = {target} - 1;"]
                out.append(f"while ({target} > 0) {{ {' '.join(body)} }}")
            elif level < depth and r < 0.38:
                body = block(level + 1) or [f"{target} = i;"]
                out.append(f"for (int i = 0; i < 4; i++) {{ {' '.join(body)} }}")
            elif r < 0.45:
                out.append(f"return {expr()};")
            elif r < 0.55:
                out.append(f"arr[{names[rng.integers(n_vars)]}] = {expr()};")
            else:
                out.append(f"{target} = {expr()};")
        return out

    params = ", ".join(f"int {v}" for v in names[:2])
    locals_ = " ".join(f"int {v} = {i};" for i, v in enumerate(names[2:]))
    return f"int r({params}) {{ int arr[8]; {locals_} {' '.join(block(0))} return v0; }}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def snippet_graphs():
    return [parse_function(src, f"s{i}", "vulnerable" if i % 2 == 0 else "clean") for i, src in enumerate(SNIPPETS)]


@pytest.fixture(scope="session")
def small_embedding(snippet_graphs):
    return train_skipgram(build_corpus(snippet_graphs), SkipgramConfig(d=6, epochs=2, seed=3))


# -- acceptance summary --------------------------------------------------

ACCEPTANCE = {}


def record_criterion(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
