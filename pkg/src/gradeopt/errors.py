"""Exception types raised across the package."""


class GradeOptError(Exception):
    """Base class for all package errors."""


class CollinearTriangle(GradeOptError):
    def __init__(self, ids):
        self.ids = tuple(ids)
        super().__init__(f"triangle {self.ids} has collinear planar corners")


class DanglingIndex(GradeOptError):
    pass


class DegeneratePositions(GradeOptError):
    pass


class NoPositiveRoot(GradeOptError):
    pass


class NoCandidateFound(GradeOptError):
    pass


class IterationLimit(GradeOptError):
    """Raised by callers that treat a non-converged run as fatal.

    The solvers themselves return the best iterate with ``state.converged``
    set to False; the CLI converts that into this error / exit code 2.
    """


class ParseError(GradeOptError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ValidationError(GradeOptError):
    pass
