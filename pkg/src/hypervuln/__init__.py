"""Function-level vulnerability detection over code-behavior hypergraphs.

Stages, in pipeline order:

* :mod:`hypervuln.minic` parses mini-C into code property graphs (:mod:`hypervuln.cpg`)
* :mod:`hypervuln.slicing` cuts PDG slices around risky statements
* :mod:`hypervuln.embedding` trains skip-gram token vectors
* :mod:`hypervuln.ggnn` encodes functions and slices with a gated graph network
* :mod:`hypervuln.clustering` groups slice vectors into hyperedges
* :mod:`hypervuln.hypergraph` and :mod:`hypervuln.detector` run the hypergraph network
* :mod:`hypervuln.workbench` wires it together with manifests, bundles and a CLI
"""

from .cpg import Cpg, CpgEdge, CpgNode, load_cpg, pdg_view, save_cpg
from .errors import HypervulnError
from .metrics import Metrics, evaluate
from .minic import parse_function

__version__ = "0.1.0"

__all__ = [
    "Cpg", "CpgEdge", "CpgNode", "HypervulnError", "Metrics", "evaluate", "load_cpg", "parse_function",
    "pdg_view", "save_cpg",
]
