"""Material laws ``z -> M(z)`` and numerical checks of their operator classes.

A law's ``func`` returns either a 1-D array (a diagonal operator) or a full
``d x d`` matrix. Certification samples vertical lines ``Re z = rho`` and
records every sample, so a verdict is only as good as its sample set.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import ContractViolation, NumericalFailure, require
from .space_ops import SpatialOperator, operator_norm
from .time_axis import fourier_laplace, inverse_fourier_laplace

KINDS = ("constant", "reciprocal_coefficient", "shifted_by_a_over_z",
         "neumann_limit", "custom")


class CertificationError(NumericalFailure):
    """Evaluating a law failed at a sample point."""


@dataclass(frozen=True, eq=False)
class MaterialLaw:
    """An evaluable map ``z -> M(z)`` on ``Re z > nu``.

    ``alpha`` is the claimed accretivity constant: ``Re <phi, z M(z) phi> >=
    alpha ||phi||^2`` on the lines where the law is used.
    """

    func: Callable
    dim: int
    nu: float
    alpha: float
    kind: str = "custom"
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        require(self.kind in KINDS, f"unknown law kind {self.kind!r}")
        require(self.alpha > 0, f"alpha must be positive, got {self.alpha}")
        require(self.dim >= 1, "law dimension must be >= 1")

    @property
    def identifier(self):
        return f"{self.kind}:{self.name}" if self.name else self.kind

    def raw(self, z):
        """``func(z)`` as returned: 1-D diagonal or 2-D matrix."""
        out = np.asarray(self.func(z), dtype=np.complex128)
        if out.ndim == 0:
            out = np.full(self.dim, out)
        if out.shape not in ((self.dim,), (self.dim, self.dim)):
            raise CertificationError(
                f"law {self.identifier} returned shape {out.shape} at z={z}, "
                f"expected dimension {self.dim}")
        return out

    def matrix(self, z):
        out = self.raw(z)
        return np.diag(out) if out.ndim == 1 else out

    def evaluate(self, z):
        out = self.raw(z)
        if out.ndim == 1:
            return SpatialOperator(np.diag(out), {"diagonal"})
        return SpatialOperator(out)


def constant_law(value, dim, alpha, nu=0.0, name="constant"):
    """``M(z) = value`` for every ``z`` (scalar times identity, or a matrix)."""
    value = np.asarray(value, dtype=np.complex128)
    return MaterialLaw(lambda z: value if value.ndim else np.full(dim, value),
                       dim, nu, alpha, "constant", name)


def reciprocal_coefficient_law(a_samples, alpha, nu=0.0, name="a_inverse"):
    """``M(z) = diag(1/a)``; on ``Re z = rho`` accretive with ``rho/max(a)``."""
    a = np.asarray(a_samples, dtype=float).ravel()
    require(np.all(a > 0), "coefficient samples must be positive")
    inv = 1.0 / a
    return MaterialLaw(lambda z: inv, len(a), nu, alpha,
                       "reciprocal_coefficient", name,
                       {"sup_norm": float(inv.max())})


def shifted_law(a_samples, alpha=1.0, nu=None, name="one_plus_a_over_z"):
    """``M(z) = 1 + diag(a)/z``; by default ``nu = max|a| + 1`` and ``alpha = 1``."""
    a = np.asarray(a_samples, dtype=float).ravel()
    if nu is None:
        nu = float(np.max(np.abs(a))) + 1.0
    return MaterialLaw(lambda z: 1.0 + a / z, len(a), nu, alpha,
                       "shifted_by_a_over_z", name)


def inverse_z_law(dim, alpha=1.0, nu=0.0, name="inverse_z"):
    """``M(z) = I/z``, the law whose operator is the antiderivative."""
    return MaterialLaw(lambda z: np.full(dim, 1.0 / z), dim, nu, alpha,
                       "custom", name)


def conjugate_law(law, unitary):
    """``z -> U* M(z) U``; accretivity spectra are invariant under this."""
    U = np.asarray(unitary, dtype=np.complex128)
    return MaterialLaw(lambda z: U.conj().T @ law.matrix(z) @ U, law.dim,
                       law.nu, law.alpha, law.kind, law.name + "_conj",
                       dict(law.metadata))


def _lambda_min_hermitian(mat):
    if mat.ndim == 1:
        return float(np.min(mat.real))
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])


def _z_times(law, z):
    out = law.raw(z)
    return z * out


def frequency_samples(n_freq, xi_max):
    """``xi = 0`` plus a symmetric log-spaced set reaching ``xi_max``."""
    require(n_freq >= 1, "need at least one frequency sample")
    m = (n_freq - 1) // 2
    if m == 0:
        return np.array([0.0])
    pos = np.logspace(np.log10(xi_max) - 4.0, np.log10(xi_max), m)
    return np.concatenate([-pos[::-1], [0.0], pos])


@dataclass
class LawCertificate:
    law_id: str
    law_kind: str
    nu: float
    alpha: float
    samples: list
    verdict_wp: bool
    verdict_f: Optional[bool] = None
    verdict_new_cond: Optional[bool] = None
    beta: Optional[float] = None
    rel_tol: float = 1e-9
    worst: Optional[dict] = None

    @property
    def rho_lines(self):
        return sorted({s["rho"] for s in self.samples})

    def covers(self, rho):
        return any(abs(r - rho) <= 1e-12 * max(1.0, abs(rho)) for r in self.rho_lines)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def certify_accretivity(law, rho_lines, n_freq=33, xi_max=1e3, rel_tol=1e-9,
                        beta=None):
    """Sample ``lambda_min(Herm(z M(z)))`` on vertical lines.

    The well-posedness verdict is true when every sample clears
    ``law.alpha - rel_tol * ||z M(z)||``. With ``beta`` given, membership of
    ``z M(z)`` in ``F(alpha, beta)`` and ``F(alpha, beta |z|)`` is also
    recorded per sample.

    Raises
    ------
    ContractViolation
        If a line does not lie right of ``law.nu``.
    CertificationError
        If the law cannot be evaluated at a sample; the message names ``z``.
    """
    rho_lines = [float(r) for r in np.atleast_1d(rho_lines)]
    for rho in rho_lines:
        require(rho > law.nu, f"line rho={rho} is not right of nu={law.nu}")
    xis = frequency_samples(n_freq, xi_max)
    samples = []
    wp = True
    f_ok = None if beta is None else True
    new_ok = None if beta is None else True
    worst = None
    for rho in rho_lines:
        for xi in xis:
            z = complex(rho, xi)
            try:
                B = _z_times(law, z)
            except Exception as exc:  # noqa: BLE001 - re-raised with context
                raise CertificationError(
                    f"evaluating {law.identifier} failed at z={z}: {exc}") from exc
            lam = _lambda_min_hermitian(B)
            norm = operator_norm(np.diag(B) if B.ndim == 1 else B)
            tol = rel_tol * norm
            ok = lam >= law.alpha - tol
            sample = {"rho": rho, "xi": float(xi), "lambda_min": lam,
                      "norm": norm, "ok": bool(ok)}
            if beta is not None:
                mat = np.diag(B) if B.ndim == 1 else B
                sample["in_F"] = bool(check_F_membership(mat, law.alpha, beta, tol))
                sample["in_F_growth"] = bool(check_F_membership(
                    mat, law.alpha, beta * abs(z), tol))
                f_ok = f_ok and sample["in_F"]
                new_ok = new_ok and sample["in_F_growth"]
            wp = wp and ok
            if worst is None or lam - law.alpha < worst["lambda_min"] - law.alpha:
                worst = sample
            samples.append(sample)
    return LawCertificate(law.identifier, law.kind, law.nu, law.alpha, samples,
                          bool(wp), f_ok, new_ok, beta, rel_tol, worst)


@dataclass
class FCheck:
    """Outcome of an ``F(alpha, beta)`` membership test; truthy on success."""

    member: bool
    margin_lower: float
    margin_upper: float
    witness: Optional[np.ndarray] = None

    def __bool__(self):
        return self.member


def check_F_membership(C, alpha, beta, tol=1e-9):
    """Test ``Re<phi,C phi> >= alpha ||phi||^2`` and
    ``||C phi||^2 / beta <= Re<phi,C phi>``.

    On failure ``witness`` is the unit eigenvector of the violated condition.
    """
    require(0 < alpha < beta, f"need 0 < alpha < beta, got {alpha}, {beta}")
    mat = C.matrix if isinstance(C, SpatialOperator) else np.asarray(C, dtype=complex)
    herm = 0.5 * (mat + mat.conj().T)
    eye = np.eye(mat.shape[0])
    w1, v1 = np.linalg.eigh(herm - alpha * eye)
    w2, v2 = np.linalg.eigh(herm - (mat.conj().T @ mat) / beta)
    member = bool(w1[0] >= -tol and w2[0] >= -tol)
    witness = None
    if not member:
        witness = v1[:, 0] if w1[0] < -tol else v2[:, 0]
    return FCheck(member, float(w1[0]), float(w2[0]), witness)


def check_growth_class(law, nu, alpha, beta, zs, tol=1e-9):
    """``z M(z)`` in ``F(alpha, beta |z|)`` at every sampled ``z``."""
    if beta * nu < alpha:
        raise ContractViolation(
            f"incompatible constants: beta*nu = {beta * nu} < alpha = {alpha}")
    for z in np.atleast_1d(zs):
        require(z.real > nu, f"sample z={z} is not right of nu={nu}")
        if not check_F_membership(law.matrix(z) * z, alpha, beta * abs(z), tol):
            return False
    return True


def apply_material_law(law, f):
    """``M(d/dt)`` on a weighted signal, evaluated frequency by frequency."""
    require(f.rho > law.nu, f"signal weight rho={f.rho} must exceed nu={law.nu}")
    require(f.dim == law.dim, f"signal dimension {f.dim} != law dimension {law.dim}")
    spec = fourier_laplace(f)
    out = np.empty_like(spec.coeffs)
    for k, (z, c) in enumerate(zip(spec.laplace_variable, spec.coeffs)):
        try:
            m = law.raw(z)
        except Exception as exc:  # noqa: BLE001
            raise CertificationError(
                f"law {law.identifier} failed at frequency xi={z.imag}: {exc}") from exc
        out[k] = m * c if m.ndim == 1 else m @ c
    return inverse_fourier_laplace(spec.with_coeffs(out))


@dataclass
class GrowthBound:
    passed: bool
    worst_ratio: float
    samples: list

    def __bool__(self):
        return self.passed


def linear_growth_bound_check(law, sup_bound, alpha, zs, tol=1e-9):
    """``||M(z)|| <= (sup_bound^2 / alpha) |z|`` at every sample.

    ``worst_ratio`` is the largest ``||M(z)|| / ((sup_bound^2/alpha)|z|)``.
    """
    samples = []
    worst = 0.0
    passed = True
    for z in np.atleast_1d(zs):
        norm = operator_norm(law.matrix(z))
        bound = sup_bound ** 2 / alpha * abs(z)
        samples.append({"re": float(z.real), "im": float(z.imag),
                        "norm": norm, "bound": bound})
        worst = max(worst, norm / bound)
        passed = passed and norm <= bound + tol
    return GrowthBound(bool(passed), worst, samples)


def holomorphy_defect(law, z, h=1e-4):
    """Relative mismatch between real- and imaginary-direction difference
    quotients; O(h^2) for a holomorphic law."""
    d_real = (law.matrix(z + h) - law.matrix(z - h)) / (2 * h)
    d_imag = (law.matrix(z + 1j * h) - law.matrix(z - 1j * h)) / (2j * h)
    scale = max(np.linalg.norm(d_real), np.finfo(float).tiny)
    return float(np.linalg.norm(d_real - d_imag) / scale)
