"""Exception types shared across the package."""


class SchattenLabError(Exception):
    """Base class for all errors raised by schatten_lab."""


class InputError(SchattenLabError, ValueError):
    """Malformed input data: non-finite samples, shape or length mismatch."""


class ParameterError(SchattenLabError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class DegenerateSpectrumError(SchattenLabError, ValueError):
    """Too few usable values to fit an exponent."""


class BasisMismatchError(SchattenLabError, TypeError):
    """A diagonal symbol is not compatible with the grid it is applied on."""
