"""Exceptions raised by the MIS-2 toolkit. The CLI maps them to exit codes."""


class Mis2Error(Exception):
    """Base class for every error raised by this package"""


class ConfigError(Mis2Error):
    pass


class MatrixMarketError(Mis2Error):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class GraphError(Mis2Error):
    pass


class PackingError(Mis2Error):
    pass


class Mis2NotConverged(Mis2Error):
    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class OracleTooLarge(Mis2Error):
    pass


class SquareGraphTooLarge(Mis2Error):
    pass


class CoarseningError(Mis2Error):
    pass


class GaussSeidelSetupError(Mis2Error):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SolverFailure(Mis2Error):
    """A Krylov driver gave up; the partial SolveReport is attached"""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class SolverBreakdown(SolverFailure):
    pass


class GmresStagnation(SolverFailure):
    pass
