"""Exception types carrying a short machine-readable code."""


class FracReconError(Exception):
    """Base error. ``code`` is a stable kebab-case identifier."""

    code = "error"

    def __init__(self, code, message=""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class InputError(FracReconError, ValueError):
    """Invalid arguments or configuration (CLI exit status 2)."""


class NumericalFailure(FracReconError, ArithmeticError):
    """A computation could not produce a trustworthy result (CLI exit status 3)."""
