"""Exception hierarchy shared by every module."""


class VfwError(ValueError):
    """Base class for all errors raised by this package."""


class MissingColumn(VfwError):
    def __init__(self, name):
        super().__init__(f"missing column {name!r}")
        self.name = name


class ParseError(VfwError):
    def __init__(self, row, column, value=None):
        super().__init__(f"cannot parse row {row}, column {column!r}: {value!r}")
        self.row = row
        self.column = column


class NonMonotonicTimestamps(VfwError):
    pass


class EmptyAfterClean(VfwError):
    pass


class InsufficientHistory(VfwError):
    pass


class EmptyTrainingSet(VfwError):
    pass


class ArityMismatch(VfwError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected} features, got {got}")
        self.expected = expected
        self.got = got


class EmptyGrid(VfwError):
    pass


class InsufficientData(VfwError):
    pass


class DegenerateKernel(VfwError):
    pass


class WrongEnsembleKind(VfwError):
    pass


class LengthMismatch(VfwError):
    pass


class EmptyInput(VfwError):
    pass


class ZeroVarianceTruth(VfwError):
    pass


class TooFewRows(VfwError):
    pass


class TooFewFeatures(VfwError):
    pass


class DegenerateImportance(VfwError):
    pass


class ConfigError(VfwError):
    """Invalid run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConvergenceWarning(UserWarning):
    pass
