"""Exceptions and small argument checks shared across modules."""

import numpy as np


class ContractViolation(ValueError):
    """Raised when a precondition of an operation does not hold."""


class NumericalFailure(RuntimeError):
    """Raised when a computation finishes but fails its own certificate.

    Parameters
    ----------
    message : str
        Human readable description.
    residual : float, optional
        The offending residual or defect, if one was measured.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def require(condition, message):
    if not condition:
        raise ContractViolation(message)


def as_complex_matrix(values, n_rows=None):
    """Coerce ``values`` to a 2-D complex array of shape (rows, d)."""
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[:, None]
    require(arr.ndim == 2, f"expected 1-D or 2-D samples, got shape {arr.shape}")
    if n_rows is not None:
        require(arr.shape[0] == n_rows,
                f"expected {n_rows} samples, got {arr.shape[0]}")
    require(arr.shape[1] >= 1, "vector dimension must be at least 1")
    return arr


def is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def frozen(arr):
    """Return a read-only view so frozen dataclasses stay immutable."""
    arr = np.asarray(arr)
    view = arr.view()
    view.flags.writeable = False
    return view
