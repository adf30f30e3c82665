"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 1, ``NumericalError``
subclasses to exit code 2.
"""


class BranchStereoError(Exception):
    pass


class InputError(BranchStereoError, ValueError):
    pass


class NumericalError(BranchStereoError, ArithmeticError):
    pass


class GeometryError(InputError):
    pass


class CalibrationError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class FusionError(InputError):
    pass


class ParseError(InputError):
    """Malformed file.  ``offset`` is the byte offset of the problem, if known."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if offset is not None:
            where += f"byte {offset}: "
        super().__init__(where + message)


class AnnotationError(InputError):
    """Schema violations in an annotation document, all of them at once."""

    def __init__(self, problems, path=None):
        self.problems = list(problems)
        head = f"{path}: " if path is not None else ""
        super().__init__(head + "; ".join(self.problems))


class ConvergenceError(NumericalError):
    def __init__(self, message, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
