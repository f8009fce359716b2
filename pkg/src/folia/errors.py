"""Exception hierarchy shared by every layer of the package."""


class FoliaError(Exception):
    """Base class; ``code`` is the machine-readable tag surfaced by the CLI."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class StructuralError(FoliaError):
    code = "structural"


class DomainError(FoliaError):
    code = "domain"


class InconsistencyError(FoliaError):
    code = "inconsistency"


class UnsupportedError(FoliaError):
    code = "unsupported"


class NotAFunctionOfInvariant(DomainError):
    code = "not-a-function-of-invariant"

    def __init__(self, degree: int, residual: float):
        super().__init__(
            f"not a function of the invariant (residual {residual:.3e} at degree {degree})",
            degree=degree,
            residual=residual,
        )
        self.degree = degree
        self.residual = residual


class ParseError(FoliaError):
    code = "parse"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})", line=line, column=column)
        self.line = line
        self.column = column


class NotAConnection(InconsistencyError):
    """Horizontal fields and vertical module fail the bracket closure conditions."""

    code = "not-an-f-connection"


class DefectEscape(InconsistencyError):
    """A triple composite of transition data is not an inner symmetry of the right level."""

    code = "defect-escape"
