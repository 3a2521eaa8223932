"""Exception types raised across the analysis pipeline."""


class AnalyzerError(Exception):
    """Base class for all errors this package raises deliberately."""


class SourceError(AnalyzerError):
    """Error tied to a location in a source file."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.line = line
        self.col = col

    def __str__(self) -> str:
        base = super().__str__()
        if self.line:
            return f"line {self.line}:{self.col}: {base}"
        return base


class ParseError(SourceError):
    """The input does not conform to the supported grammar."""


class UnsupportedFeatureError(SourceError):
    """Syntactically valid input uses a construct outside the supported subset."""


class UnknownIdentifierError(SourceError):
    """A name was used that is not declared in scope."""


class RecursionUnsupportedError(SourceError):
    """Direct or mutual recursion among inlined functions."""


class StratificationError(AnalyzerError):
    """The rule set has recursion through negation and cannot be stratified."""


class UnknownNodeError(AnalyzerError):
    """A graph query referenced a node that does not exist."""


class SolverTimeoutError(AnalyzerError):
    """The constraint backend did not answer within its budget."""


class SolverUnavailableError(AnalyzerError):
    """The requested constraint backend cannot be started."""


class RequireFailedError(AnalyzerError):
    """A require/assert failed during concrete execution (transaction revert)."""


class UnknownOpcodeError(AnalyzerError):
    """An interpreter met an IR statement kind it does not handle."""
