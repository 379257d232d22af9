"""Exception types shared across the library."""


class DimensionError(ValueError):
    """Vector arguments have inconsistent lengths."""


class SingularityError(ValueError):
    """A component-wise map hit a point where its formula is undefined."""


class TransformDomainError(ValueError):
    """A target value lies outside the image box of the transformation.

    Carries the offending coordinate so callers can report or shrink.
    """

    def __init__(self, coord: int, value: float, lo: float, hi: float):
        self.coord = coord
        self.value = value
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"coordinate {coord}: u={value!r} outside image box [{lo!r}, {hi!r}]"
        )


class SingularTransformError(RuntimeError):
    """Empirical transformation has a zero derivative entry.

    Signals an iterate at the image-box boundary; the caller must shrink
    the box (delta) rather than pseudo-invert.
    """

    def __init__(self, coord: int):
        self.coord = coord
        super().__init__(f"empirical transform derivative is zero at coordinate {coord}")


class UnsupportedFamilyError(ValueError):
    """Operation defined only for a subset of the component-wise families."""


class CostGuardError(ValueError):
    """A brute-force oracle was asked for more work than its guard allows."""


class InstanceError(ValueError):
    """A generated or loaded problem instance is degenerate or malformed."""


class LpInternalError(RuntimeError):
    """The simplex reached an inconsistent state (should never happen)."""


class ConfigError(ValueError):
    """Experiment configuration is invalid; message carries field paths."""
