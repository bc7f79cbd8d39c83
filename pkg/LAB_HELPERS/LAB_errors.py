"""
Exception hierarchy of the laboratory.

Input errors are raised before any computation and map to exit code 2 in the CLI;
every other LabError is a computation-time failure and maps to exit code 1.
"""


class LabError(Exception):
    pass


class InputError(LabError, ValueError):
    pass


class ConfigSchemaError(InputError):
    pass


class ChartError(InputError):
    pass


class UnsupportedDimensionError(InputError):
    pass


class GridMismatchError(InputError):
    pass


class RegionError(InputError):
    pass


class NonConvergenceError(LabError):

    def __init__(self, message, diagnostics=None):
        super(NonConvergenceError, self).__init__(message)
        self.diagnostics = diagnostics or {}


class ToleranceError(LabError):

    def __init__(self, message, diagnostics=None):
        super(ToleranceError, self).__init__(message)
        self.diagnostics = diagnostics or {}


class EnumerationBudgetError(LabError):
    pass


class FitError(LabError):
    pass


class AccuracyError(LabError):
    pass
