"""From mini-C source to behavior slices and their vectors.

    python3 demos/slicing_walkthrough.py
"""

from hypervuln.cpg import pdg_view
from hypervuln.embedding import SkipgramConfig, build_corpus, train_skipgram
from hypervuln.ggnn import GgnnParams, encode_behavior, encode_function
from hypervuln.minic import parse_function
from hypervuln.slicing import behaviors_of, find_interest_points, load_api_list

SOURCE = """
int copy_name(char *dst, char *src, int len) {
    int buf[16];
    int n = strlen(src);
    if (n > len) {
        n = len;
    }
    buf[n] = 0;
    strcpy(dst, src);
    return n;
}
"""


def show(cpg, node_id):
    node = cpg.node(node_id)
    return f"{node_id:>3} [{node.kind}] {' '.join(node.tokens)}"


def main():
    cpg = parse_function(SOURCE, "copy_name", "vulnerable")
    print(f"CPG: {len(cpg.nodes)} nodes, {len(cpg.edges)} edges")
    for kind in ("AST", "CFG", "DDG", "CDG"):
        print(f"  {kind}: {sum(e.kind == kind for e in cpg.edges)}")

    pdg = pdg_view(cpg)
    print("\nPDG edges:")
    for e in pdg.edges:
        print(f"  {e.kind}  {show(cpg, e.src)}  ->  {' '.join(cpg.node(e.dst).tokens)}")

    api = load_api_list()
    print("\nInterest points:")
    for p in find_interest_points(pdg, cpg, api):
        print(f"  {p.category:<14} {show(cpg, p.node_id)}")

    subs = behaviors_of(pdg, cpg, api)
    print(f"\n{len(subs)} distinct behavior slices:")
    for sub in subs:
        print(f"  from {sub.interest_point.category}: nodes {sorted(sub.node_ids)}")

    # a tiny untrained encoder, only to show the shapes involved
    vocab, table = train_skipgram(build_corpus([cpg]), SkipgramConfig(d=8, epochs=3))
    params = GgnnParams.init(8, steps=2)
    x = encode_function(cpg, vocab, table, params)
    print(f"\nfunction vector x: {x.round(3)}")
    for sub in subs:
        b = encode_behavior(sub, cpg, vocab, table, params)
        print(f"behavior {sub.interest_point.node_id:>3}:  {b.round(3)}")


if __name__ == "__main__":
    main()
