class CuspError(Exception):
    """Base error of the curvature pipeline; `exit_code` is what the CLI returns."""
    exit_code = 2
    default_detail = "The curvature pipeline failed."
    default_code = "cusp_error"

    def __init__(self, detail=None):
        self.detail = detail if detail is not None else self.default_detail
        super().__init__(self.detail)


class InvalidInput(CuspError):
    """Exception raised when an input violates a precondition."""
    exit_code = 2
    default_detail = "Invalid input."
    default_code = "invalid_input"


class GraphFormatError(InvalidInput):
    """Exception raised for a malformed edge-list line."""
    default_detail = "Malformed edge list."
    default_code = "graph_format"

    def __init__(self, detail=None, line=None):
        self.line = line
        if line is not None and detail is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)


class DegreeZeroError(InvalidInput):
    """Exception raised when a normalized operator meets a node without (weighted) degree."""
    default_detail = "Node has zero degree."
    default_code = "degree_zero"

    def __init__(self, node, detail=None):
        self.node = node
        super().__init__(detail or f"node {node} has zero degree")


class DomainError(InvalidInput):
    default_detail = "Value outside the operation's domain."
    default_code = "domain"


class DimensionMismatch(InvalidInput):
    default_detail = "Shapes, dimensions or curvatures do not match."
    default_code = "dimension_mismatch"


class UnsupportedMethod(InvalidInput):
    default_detail = "Method not supported for this input."
    default_code = "unsupported_method"


class ConfigError(InvalidInput):
    default_detail = "Invalid configuration."
    default_code = "config"


class UnreachableSupport(InvalidInput):
    """Exception raised when two support nodes of a transport problem are disconnected."""
    default_detail = "Support nodes are not connected."
    default_code = "unreachable_support"


class EmptyMaskError(InvalidInput):
    default_detail = "No targets selected by the mask."
    default_code = "empty_mask"


class SplitError(InvalidInput):
    default_detail = "Could not draw a valid split."
    default_code = "split"


class NumericalError(CuspError):
    """Exception raised when a computation loses numerical validity."""
    exit_code = 3
    default_detail = "Numerical failure."
    default_code = "numerical"


class NonFiniteError(NumericalError):
    default_detail = "Encountered NaN or infinity."
    default_code = "non_finite"


class SpectrumCheckFailed(NumericalError):
    default_detail = "Spectral theorem check failed."
    default_code = "spectrum_check"
