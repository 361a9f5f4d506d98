"""Exception hierarchy shared by all stages."""


class CvfError(Exception):
    """Input or usage error; the CLI maps it to exit status 2."""


class CityGMLError(CvfError):
    pass


class IngestError(CvfError):
    pass


class QueryError(CvfError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class EvalError(CvfError):
    pass


class TechniqueError(CvfError):
    pass


class LayoutError(CvfError):
    pass


class InvariantViolation(Exception):
    """An internal invariant does not hold; exit status 3."""
