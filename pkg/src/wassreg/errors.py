"""Exception hierarchy shared by the library and the command line."""


class WassregError(Exception):
    """Base class for all package errors."""


class DataError(WassregError, ValueError):
    """Malformed or inconsistent input data (files, measures, pair lists)."""


class ConfigMismatchError(WassregError, ValueError):
    """Features were evaluated with a configuration the model was not fit with."""


class ModelFormatError(DataError):
    """A model file could not be parsed."""


class ModelVersionError(ModelFormatError):
    """A model file uses an unsupported version or unknown predictor kind."""


class NumericalError(WassregError, ArithmeticError):
    """A numerical routine failed (solver non-convergence, non-finite output)."""
