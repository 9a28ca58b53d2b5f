"""Exceptions and warnings shared across the package."""

#: Largest matrix dimension any dense routine will build.
DEFAULT_DENSE_CAP = 4096


class CapacityError(RuntimeError):
    """A dense construction would exceed the configured dimension cap."""

    def __init__(self, what, dim, cap):
        super().__init__(f"{what}: dimension {dim} exceeds dense cap {cap}")
        self.dim = dim
        self.cap = cap


class DegenerateRootWarning(RuntimeWarning):
    """The two smallest reconstructed eigenvalues are not resolved."""


def check_capacity(what, dim, cap=None):
    cap = DEFAULT_DENSE_CAP if cap is None else cap
    if dim > cap:
        raise CapacityError(what, dim, cap)
