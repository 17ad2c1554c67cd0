"""Exception types shared across the toolkit."""


class FieldError(ValueError):
    """Base class for field construction / validation failures."""


class ShapeMismatchError(FieldError):
    """Field values do not match the chart or another field's layout."""


class SPDViolationError(FieldError):
    """A metric field is not symmetric positive definite within tolerance."""


class DegenerateImmersionError(FieldError):
    """An immersion has (numerically) rank-deficient differential.

    Carries the offending grid multi-indices in ``points``.
    """

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = [] if points is None else list(points)
