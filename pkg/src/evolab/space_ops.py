"""Finite stand-ins for the skew-selfadjoint operator and coefficient operators.

Spatial grids are periodic boxes. In two dimensions the flattened index is
``ix * n_y + iy`` (x-major), so x-operators are ``kron(D, I_y)``.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import reverse_cuthill_mckee

from ._validation import NumericalFailure, frozen, require

SKEW_ADJOINT = "skew_adjoint"
DIAGONAL = "diagonal"
IDENTITY = "identity"
_KNOWN_TAGS = {SKEW_ADJOINT, DIAGONAL, IDENTITY}


@dataclass(frozen=True)
class SpaceGrid:
    length_x: float
    n_x: int
    length_y: Optional[float] = None
    n_y: Optional[int] = None

    def __post_init__(self):
        require(self.length_x > 0, "length_x must be positive")
        require(self.n_x >= 4, f"n_x must be >= 4, got {self.n_x}")
        require((self.length_y is None) == (self.n_y is None),
                "length_y and n_y must be given together")
        if self.n_y is not None:
            require(self.length_y > 0, "length_y must be positive")
            require(self.n_y >= 4, f"n_y must be >= 4, got {self.n_y}")

    @property
    def two_dimensional(self):
        return self.n_y is not None

    @property
    def shape(self):
        return (self.n_x, self.n_y) if self.two_dimensional else (self.n_x,)

    @property
    def dim(self):
        return self.n_x * (self.n_y or 1)

    @property
    def h_x(self):
        return self.length_x / self.n_x

    @property
    def h_y(self):
        return self.length_y / self.n_y if self.two_dimensional else 1.0

    @property
    def cell_measure(self):
        return self.h_x * self.h_y

    @property
    def x(self):
        return self.h_x * np.arange(self.n_x)

    @property
    def y(self):
        if not self.two_dimensional:
            raise AttributeError("grid has no y axis")
        return self.h_y * np.arange(self.n_y)

    def mesh(self):
        """Coordinate arrays broadcast to ``shape``."""
        if self.two_dimensional:
            return np.meshgrid(self.x, self.y, indexing="ij")
        return (self.x,)

    def inner(self, u, v):
        """Discrete L2 inner product, conjugate-linear in ``u``."""
        return complex(self.cell_measure * np.vdot(np.ravel(u), np.ravel(v)))

    def norm(self, u):
        return float(np.sqrt(self.cell_measure) * np.linalg.norm(np.ravel(u)))


@dataclass(frozen=True, eq=False)
class SpatialOperator:
    matrix: np.ndarray
    tags: frozenset = frozenset()

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        require(mat.ndim == 2 and mat.shape[0] == mat.shape[1],
                f"operator matrix must be square, got {mat.shape}")
        tags = frozenset(self.tags)
        require(tags <= _KNOWN_TAGS, f"unknown tags {set(tags) - _KNOWN_TAGS}")
        object.__setattr__(self, "matrix", frozen(mat))
        object.__setattr__(self, "tags", tags)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), {IDENTITY, DIAGONAL})

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, dim)), {SKEW_ADJOINT, DIAGONAL})

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def is_skew_adjoint(self):
        return SKEW_ADJOINT in self.tags

    @property
    def is_diagonal(self):
        return DIAGONAL in self.tags

    def apply(self, v):
        return self.matrix @ v

    def adjoint(self):
        tags = self.tags & {SKEW_ADJOINT, DIAGONAL}
        return SpatialOperator(self.matrix.conj().T, tags)

    def hermitian_part(self):
        return 0.5 * (self.matrix + self.matrix.conj().T)

    def norm(self):
        return operator_norm(self.matrix)

    def __matmul__(self, other):
        if isinstance(other, SpatialOperator):
            tags = set()
            if self.is_diagonal and other.is_diagonal:
                tags.add(DIAGONAL)
            return SpatialOperator(self.matrix @ other.matrix, tags)
        return self.matrix @ other


def operator_norm(mat):
    """Spectral norm, with a shortcut for diagonal matrices."""
    mat = np.asarray(mat)
    diag = np.diag(mat)
    if np.count_nonzero(mat - np.diag(diag)) == 0:
        return float(np.max(np.abs(diag))) if diag.size else 0.0
    return float(np.linalg.norm(mat, 2))


def linear_combination(coeffs, operators):
    """``sum c_i A_i`` keeping tags that survive the combination.

    Real combinations of skew-adjoint operators stay exactly skew-adjoint,
    because negation commutes with real scaling in floating point.
    """
    require(len(coeffs) == len(operators) and operators, "need matching, non-empty lists")
    mat = sum(c * op.matrix for c, op in zip(coeffs, operators))
    tags = set()
    if all(op.is_skew_adjoint for op in operators) and all(
            np.isreal(c) for c in coeffs):
        tags.add(SKEW_ADJOINT)
    if all(op.is_diagonal for op in operators):
        tags.add(DIAGONAL)
    return SpatialOperator(mat, tags)


def _centered_difference_1d(n, h):
    d = np.zeros((n, n))
    idx = np.arange(n)
    d[idx, (idx + 1) % n] = 1.0 / (2.0 * h)
    d[idx, (idx - 1) % n] = -1.0 / (2.0 * h)
    return d


def periodic_derivative(grid, axis="x"):
    """Centered second-order difference ``(u[j+1] - u[j-1]) / 2h``, periodic.

    The matrix is real and exactly antisymmetric, tagged skew-adjoint.
    """
    if axis in ("x", 0):
        d = _centered_difference_1d(grid.n_x, grid.h_x)
        if grid.two_dimensional:
            d = np.kron(d, np.eye(grid.n_y))
    elif axis in ("y", 1):
        require(grid.two_dimensional, "grid has no y axis")
        d = np.kron(np.eye(grid.n_x), _centered_difference_1d(grid.n_y, grid.h_y))
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return SpatialOperator(d, {SKEW_ADJOINT})


def derivative_symbol(n, h):
    """Eigenvalues ``i sin(2 pi m / n) / h`` of the 1-D centered difference,
    in FFT order."""
    return 1j * np.sin(2.0 * np.pi * np.fft.fftfreq(n)) / h


def multiplication_operator(samples):
    samples = np.ravel(np.asarray(samples))
    tags = {DIAGONAL}
    if np.all(samples == 1):
        tags.add(IDENTITY)
    return SpatialOperator(np.diag(samples.astype(np.complex128)), tags)


def band_ordering(pattern):
    """Reverse Cuthill-McKee permutation of a sparsity pattern.

    Periodic difference matrices have corner entries that make partial
    pivoting grow like ``2^n``; reordered into a narrow band the growth
    stays bounded and LU is backward stable in practice.
    """
    mask = np.asarray(pattern) != 0
    mask = mask | mask.T
    return reverse_cuthill_mckee(csr_matrix(mask.astype(np.int8)),
                                 symmetric_mode=True)


def banded_solve(B, rhs, perm):
    """Solve ``B x = rhs`` (batched over leading axes) in the ``perm`` order."""
    Bp = B[..., perm[:, None], perm[None, :]]
    xp = np.linalg.solve(Bp, rhs[..., perm, :])
    x = np.empty_like(xp)
    x[..., perm, :] = xp
    return x


def resolvent_solve(C, A, psi, alpha=None, rtol=1e-10):
    """Solve ``(C + A) phi = psi`` with a residual certificate.

    Parameters
    ----------
    C : SpatialOperator
        Coefficient operator; its Hermitian part should dominate ``alpha I``.
    A : SpatialOperator
        Must be tagged skew-adjoint.
    psi : ndarray
        Right-hand side, shape ``(d,)`` or ``(d, k)``.
    alpha : float, optional
        If given, the bound ``||phi|| <= ||psi|| / alpha`` is asserted.

    Raises
    ------
    NumericalFailure
        If the relative residual exceeds ``rtol`` or the norm bound fails.
    """
    require(A.is_skew_adjoint, "A must be tagged skew_adjoint")
    require(C.dim == A.dim, f"dimension mismatch: C is {C.dim}, A is {A.dim}")
    psi = np.asarray(psi, dtype=np.complex128)
    B = C.matrix + A.matrix
    perm = band_ordering(B)
    phi = banded_solve(B, psi.reshape(len(psi), -1), perm).reshape(psi.shape)
    scale = np.linalg.norm(psi)
    residual = np.linalg.norm(B @ phi - psi)
    if scale > 0 and residual > rtol * scale:
        raise NumericalFailure(
            f"resolvent residual {residual / scale:.3e} above {rtol:.1e}",
            residual=residual / scale)
    if alpha is not None:
        require(alpha > 0, "alpha must be positive")
        bound = scale / alpha * (1.0 + 1e-8)
        if np.linalg.norm(phi) > bound:
            raise NumericalFailure(
                f"||phi|| = {np.linalg.norm(phi):.6e} exceeds ||psi||/alpha = "
                f"{scale / alpha:.6e}; C is not accretive with this alpha")
    return phi


def write_operator_csv(op, path):
    """Debug dump: one matrix row per line as ``re,im`` pairs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in op.matrix:
            cells = []
            for v in row:
                cells += [format(v.real, ".17g"), format(v.imag, ".17g")]
            writer.writerow(cells)


def read_operator_csv(path, tags=()):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return SpatialOperator(data[:, 0::2] + 1j * data[:, 1::2], tags)
