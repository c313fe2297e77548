"""Exception types raised across the package."""


class HypervulnError(Exception):
    """Base class for every error raised by hypervuln."""


class ParseError(HypervulnError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class SchemaError(HypervulnError):
    def __init__(self, field, message="invalid or missing field"):
        super().__init__(f"{field}: {message}")
        self.field = field


class DanglingEdge(HypervulnError):
    def __init__(self, node_id):
        super().__init__(f"edge references missing node_id {node_id}")
        self.node_id = node_id


class UnknownNode(HypervulnError):
    def __init__(self, node_id):
        super().__init__(f"node {node_id} is not in the graph")
        self.node_id = node_id


class UnknownFunction(HypervulnError):
    def __init__(self, function_id):
        super().__init__(f"function {function_id!r} is not in the vertex list")
        self.function_id = function_id


class EmptyCorpus(HypervulnError):
    pass


class EmptyGraph(HypervulnError):
    pass


class ShapeMismatch(HypervulnError):
    pass


class DegenerateLabels(HypervulnError):
    pass


class EmptyMask(HypervulnError):
    pass


class LengthMismatch(HypervulnError):
    pass


class ZeroDegree(HypervulnError):
    pass


class NotSymmetric(HypervulnError):
    pass


class TooFewRecords(HypervulnError):
    pass


class VersionError(HypervulnError):
    pass


class PipelineError(HypervulnError):
    """A pipeline stage failed; carries the stage name and offending function ids."""

    def __init__(self, stage, function_ids, cause):
        ids = ", ".join(map(str, function_ids)) or "-"
        super().__init__(f"[{stage}] failed for {ids}: {cause}")
        self.stage = stage
        self.function_ids = list(function_ids)
        self.cause = cause
