"""Homogenization experiments for oscillating transport coefficients.

Weak convergence is detected through pairings ``<chi_j, phi_n>`` against a
fixed test set: 12 Gaussians, 4 indicators and 8 seeded low-pass random
vectors, each normalised to unit length. Defects are measured relative to
the norm of the limit solution, so ``|<chi, phi_n> - <chi, phi>|`` divided
by ``||phi||`` is at most ``||phi_n - phi|| / ||phi||``.

Two settings are covered.

* Longitudinal: ``M_n(z) = 1/a(n x)`` with ``A = d/dx``. The limit law is
  the constant ``mean(1/a)``.
* Orthogonal: ``(d/dt + a(n y) + d/dx) u = f``. The limit law carries a
  memory effect and is evaluated through two truncated Neumann series in
  ``S_z = (z + d/dx)^{-1}``.
"""

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import ContractViolation, NumericalFailure, require
from .evo_solver import laplace_points, solve
from .material_law import (MaterialLaw, certify_accretivity, check_F_membership,
                           constant_law, linear_growth_bound_check,
                           reciprocal_coefficient_law, shifted_law)
from .space_ops import (SpaceGrid, SpatialOperator, band_ordering, banded_solve,
                        periodic_derivative, resolvent_solve)
from .time_axis import (smooth_bump,
                        weighted_bump_signal, weighted_norm)

PROFILES = ("constant", "two_plus_sine", "custom_samples")
MIN_SAMPLES_PER_PERIOD = 8
ROUNDOFF_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# coefficient families and moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientFamily:
    """``a_n(x) = profile(n x)`` for a unit-periodic profile.

    ``samples`` is set for ``custom_samples`` profiles; the profile is then
    piecewise constant on the cells ``[j/m, (j+1)/m)``.
    """

    profile: Callable
    lower: float
    upper: float
    name: str = "custom"
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        require(self.lower > 0, f"lower bound must be positive, got {self.lower}")
        require(self.lower <= self.upper, "lower bound exceeds upper bound")
        y = np.arange(1024) / 1024.0
        vals = self.profile(y)
        require(np.all(vals >= self.lower - 1e-12) and np.all(vals <= self.upper + 1e-12),
                f"profile {self.name} leaves [{self.lower}, {self.upper}] on the cell")

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda y: np.full(np.shape(y), c), c, c, "constant")

    @classmethod
    def two_plus_sine(cls):
        return cls(lambda y: 2.0 + np.sin(2.0 * np.pi * np.asarray(y)), 1.0, 3.0,
                   "two_plus_sine")

    @classmethod
    def from_samples(cls, samples):
        s = np.asarray(samples, dtype=float).ravel()
        require(s.size >= 1 and np.all(s > 0), "custom samples must be positive")
        m = s.size

        def profile(y):
            idx = np.floor(np.mod(np.asarray(y, dtype=float), 1.0) * m).astype(int)
            return s[np.minimum(idx, m - 1)]

        return cls(profile, float(s.min()), float(s.max()), "custom_samples", s)

    @classmethod
    def from_spec(cls, name, value=None, samples=None):
        """Build a family from a profile name as used in configs."""
        if name == "constant":
            require(value is not None, "constant profile needs a value")
            return cls.constant(value)
        if name == "two_plus_sine":
            return cls.two_plus_sine()
        if name == "custom_samples":
            require(samples is not None, "custom_samples profile needs samples")
            return cls.from_samples(samples)
        raise ContractViolation(f"unknown profile {name!r}; use one of {PROFILES}")

    @property
    def kappa(self):
        return self.upper + 1.0

    def coefficient(self, n, coords):
        """Samples of ``profile(n x)``; ``n x`` is reduced modulo 1 first."""
        return self.profile(np.mod(n * np.asarray(coords, dtype=float), 1.0))


def check_resolution(n, n_points, length):
    """Reject ``n`` if a period of ``profile(n x)`` gets fewer than 8 samples
    or does not fit the periodic box."""
    cells = n * length
    require(abs(cells - round(cells)) < 1e-9 and round(cells) >= 1,
            f"n={n} does not give a whole number of periods on a box of length {length}")
    per_period = n_points / cells
    require(per_period >= MIN_SAMPLES_PER_PERIOD,
            f"n={n} leaves {per_period:g} samples per period; at least "
            f"{MIN_SAMPLES_PER_PERIOD} are required")


@dataclass(frozen=True)
class MomentTable:
    """Cell averages ``b[k-1] = mean(profile^k)`` and ``b_inv = mean(1/profile)``."""

    k_max: int
    b: tuple
    b_inv: float
    kappa: float

    def __post_init__(self):
        require(len(self.b) == self.k_max, "moment list does not match k_max")
        require(self.kappa > 1, f"kappa must exceed 1, got {self.kappa}")

    def moment(self, k):
        require(1 <= k <= self.k_max, f"moment index {k} outside 1..{self.k_max}")
        return self.b[k - 1]

    def to_dict(self):
        return {"k_max": self.k_max, "b": list(self.b), "b_inv": self.b_inv,
                "kappa": self.kappa}


def periodic_moments(family, k_max, rtol=1e-13, max_points=2 ** 18):
    """Cell averages of ``profile^k`` for ``k = 1..k_max`` and of ``1/profile``.

    Smooth profiles use the trapezoid rule, which converges geometrically for
    periodic integrands; the point count is doubled until two levels agree.
    Sampled profiles are integrated exactly as step functions.

    Raises
    ------
    NumericalFailure
        If doubling up to ``max_points`` does not reach ``rtol``.
    """
    require(k_max >= 1, f"k_max must be >= 1, got {k_max}")
    powers = np.arange(1, k_max + 1)[:, None]
    if family.samples is not None:
        s = family.samples
        b = np.mean(s[None, :] ** powers, axis=1)
        return MomentTable(k_max, tuple(float(v) for v in b),
                           float(np.mean(1.0 / s)), family.kappa)

    def averages(m):
        vals = family.profile(np.arange(m) / m)
        return np.concatenate([np.mean(vals[None, :] ** powers, axis=1),
                               [np.mean(1.0 / vals)]])

    m = 64
    prev = averages(m)
    while True:
        m *= 2
        cur = averages(m)
        if np.all(np.abs(cur - prev) <= rtol * np.abs(cur)):
            break
        if m >= max_points:
            worst = float(np.max(np.abs(cur - prev) / np.abs(cur)))
            raise NumericalFailure(
                f"moments of {family.name} did not settle below {rtol:g} with "
                f"{m} points", residual=worst)
        prev = cur
    return MomentTable(k_max, tuple(float(v) for v in cur[:-1]), float(cur[-1]),
                       family.kappa)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def standard_test_set(coords, length, measure, seed, cutoff=8):
    """The fixed test set on one periodic axis, each vector of unit norm.

    Returns
    -------
    ids : list of str
    tests : ndarray, shape (24, len(coords))
    """
    x = np.asarray(coords, dtype=float)
    rows, ids = [], []
    widths = (0.03, 0.06, 0.12)
    for i in range(12):
        c = length * (i + 0.5) / 12.0
        d = np.mod(x - c + 0.5 * length, length) - 0.5 * length
        w = widths[i % 3] * length
        rows.append(np.exp(-0.5 * (d / w) ** 2))
        ids.append(f"gauss_{i:02d}")
    for i in range(4):
        lo = length * (0.05 + 0.25 * i)
        rows.append(((x >= lo) & (x < lo + 0.12 * length)).astype(float))
        ids.append(f"ind_{i}")
    rng = np.random.default_rng(seed)
    modes = np.arange(cutoff + 1)
    for i in range(8):
        c = rng.standard_normal(cutoff + 1) + 1j * rng.standard_normal(cutoff + 1)
        phase = np.exp(2j * np.pi * np.outer(x, modes) / length)
        rows.append((phase @ c).real)
        ids.append(f"rand_{i}")
    tests = np.array(rows)
    tests /= np.sqrt(measure) * np.linalg.norm(tests, axis=1)[:, None]
    return ids, tests


def time_windows(grid, count=2):
    """Smooth bumps splitting the central half of the window into ``count``
    pieces."""
    mid = 0.5 * (grid.t_min + grid.t_max)
    span = 0.5 * grid.length
    half = 0.5 * span / count
    centres = mid - 0.5 * span + half * (2 * np.arange(count) + 1)
    return [smooth_bump(grid.times, c, half) for c in centres]


def space_time_pairings(u, windows, tests, measure):
    """``<chi, u>`` in the weighted space-time norm for the product tests
    ``chi(t, x) = exp(rho t) theta(t) s(x)``, normalised to unit norm.

    Returns an array of shape ``(len(windows) * len(tests),)``, window-major.
    """
    w = u.grid.quadrature_weights()
    damp = np.exp(-u.rho * u.grid.times)
    spatial = measure * (u.values @ tests.conj().T)
    out = []
    for theta in windows:
        scale = np.sqrt(np.sum(w * theta ** 2))
        out.append((w * theta * damp) @ spatial / scale)
    return np.concatenate(out)


def space_time_norm(u, measure):
    return weighted_norm(u) * np.sqrt(measure)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fit_rate(ns, defects):
    keep = defects > ROUNDOFF_FLOOR
    if np.count_nonzero(keep) < 2:
        return None
    slope = np.polyfit(np.log(ns[keep]), np.log(defects[keep]), 1)[0]
    return float(slope)


def _non_increasing(values):
    return all(b <= a or b <= ROUNDOFF_FLOOR for a, b in zip(values, values[1:]))


def _complex_list(arr):
    return [[float(v.real), float(v.imag)] for v in np.ravel(arr)]


@dataclass
class GConvergenceReport:
    """Pairing table of a sequence against a fixed test set.

    ``defects[i] = max_j |P[i, j] - L[j]| / scale`` when a limit is known;
    ``cauchy[i] = max_j |P[i+1, j] - P[i, j]| / scale``. The verdict needs
    the final defect (the last Cauchy defect when no limit is known) within
    ``tolerance`` and that sequence non-increasing down to a roundoff floor.
    ``parts`` and ``checks`` are folded into the verdict.
    """

    label: str
    n_list: list
    test_ids: list
    pairings: np.ndarray
    limit: Optional[np.ndarray]
    scale: float
    tolerance: float
    defects: Optional[np.ndarray] = None
    cauchy: Optional[np.ndarray] = None
    rate: Optional[float] = None
    parts: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.asarray(self.pairings, dtype=complex)
        require(P.shape == (len(self.n_list), len(self.test_ids)),
                f"pairing table has shape {P.shape}")
        self.pairings = P
        scale = self.scale if self.scale > 0 else 1.0
        self.cauchy = np.max(np.abs(np.diff(P, axis=0)), axis=1) / scale \
            if len(self.n_list) > 1 else np.zeros(0)
        if self.limit is not None:
            self.limit = np.asarray(self.limit, dtype=complex)
            self.defects = np.max(np.abs(P - self.limit[None, :]), axis=1) / scale
            self.rate = _fit_rate(np.asarray(self.n_list, float), self.defects)

    @property
    def monotone(self):
        seq = self.defects if self.limit is not None else self.cauchy
        return _non_increasing(list(seq))

    @property
    def converged(self):
        """The last index reaches the limit (or stops moving) within
        ``tolerance``; says nothing about the path there."""
        if self.limit is not None:
            return bool(self.defects[-1] <= self.tolerance)
        if len(self.cauchy) == 0:
            return True
        return bool(self.cauchy[-1] <= self.tolerance)

    @property
    def verdict(self):
        return bool(self.converged and self.monotone
                    and all(p.verdict for p in self.parts.values())
                    and all(c["passed"] for c in self.checks.values()))

    def add_check(self, name, passed, **values):
        self.checks[name] = {"passed": bool(passed), **values}

    def to_dict(self):
        out = {
            "label": self.label,
            "n_list": [int(n) for n in self.n_list],
            "test_ids": list(self.test_ids),
            "scale": float(self.scale),
            "tolerance": float(self.tolerance),
            "cauchy": [float(v) for v in self.cauchy],
            "monotone": bool(self.monotone),
            "converged": bool(self.converged),
            "verdict": self.verdict,
            "rate": self.rate,
            "checks": self.checks,
            "details": self.details,
            "parts": {k: p.to_dict() for k, p in self.parts.items()},
        }
        if self.limit is not None:
            out["defects"] = [float(v) for v in self.defects]
            out["limit"] = _complex_list(self.limit)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        scale = self.scale if self.scale > 0 else 1.0
        rows = []
        for i, n in enumerate(self.n_list):
            for j, tid in enumerate(self.test_ids):
                p = self.pairings[i, j]
                if self.limit is not None:
                    d = abs(p - self.limit[j]) / scale
                elif i > 0:
                    d = abs(p - self.pairings[i - 1, j]) / scale
                else:
                    d = float("nan")
                rows.append((int(n), tid, p.real, p.imag, d))
        return rows

    def write_csv(self, path):
        """Pairing table with header ``n,test_id,re,im,defect``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "test_id", "re", "im", "defect"])
            for n, tid, re, im, d in self.csv_rows():
                writer.writerow([n, tid, format(re, ".17g"), format(im, ".17g"),
                                 format(d, ".17g")])


# ---------------------------------------------------------------------------
# static criterion
# ---------------------------------------------------------------------------

def _certified(law, rho, certificate):
    if certificate is None:
        certificate = certify_accretivity(law, [rho])
    if not (certificate.law_id == law.identifier and certificate.covers(rho)
            and certificate.verdict_wp):
        raise ContractViolation(
            f"law {law.identifier} is not certified accretive on the line rho={rho}")
    return certificate


def static_criterion(laws, A, rho, psi, tests, test_ids=None, n_list=None,
                     limit_law=None, certificates=None, measure=1.0,
                     tolerance=2e-3, label="static"):
    """Pair ``phi_n = (rho M_n(rho) + A)^{-1} psi`` against the tests.

    Parameters
    ----------
    laws : sequence of MaterialLaw
    A : SpatialOperator
    rho : float
    psi : ndarray
    tests : ndarray, shape (J, d)
    limit_law : MaterialLaw, optional
        Candidate limit; its pairings ``<chi_j, (rho M(rho) + A)^{-1} psi>``
        become ``report.limit``.
    certificates : sequence of LawCertificate, optional
        One per law. Missing certificates are computed on the line ``rho``.

    Raises
    ------
    ContractViolation
        If some law fails certification on the line ``rho``.
    """
    laws = list(laws)
    require(laws, "need at least one law")
    if certificates is None:
        certificates = [None] * len(laws)
    require(len(certificates) == len(laws), "one certificate per law is required")
    tests = np.atleast_2d(tests)
    test_ids = test_ids or [f"t{j}" for j in range(len(tests))]
    n_list = list(n_list) if n_list is not None else list(range(1, len(laws) + 1))
    phis = []
    for law, cert in zip(laws, certificates):
        _certified(law, rho, cert)
        C = law.evaluate(rho)
        phis.append(resolvent_solve(
            SpatialOperator(rho * C.matrix, C.tags), A, psi, alpha=law.alpha))
    P = measure * np.array(phis) @ tests.conj().T
    limit, scale = None, None
    if limit_law is not None:
        _certified(limit_law, rho, None)
        C = limit_law.evaluate(rho)
        phi = resolvent_solve(SpatialOperator(rho * C.matrix, C.tags), A, psi,
                              alpha=limit_law.alpha)
        limit = measure * tests.conj() @ phi
        scale = np.sqrt(measure) * np.linalg.norm(phi)
    else:
        scale = np.sqrt(measure) * np.linalg.norm(phis[-1])
    return GConvergenceReport(label, n_list, test_ids, P, limit, float(scale),
                              tolerance)


# ---------------------------------------------------------------------------
# longitudinal setting
# ---------------------------------------------------------------------------

def longitudinal_exact(a_samples, rho, psi, h):
    """``phi(x) = int_{-inf}^x exp(-rho int_xi^x 1/a) psi(xi) dxi`` on a torus.

    The inner and outer integrals are running trapezoid sums over the
    periodic cell of spacing ``h``; the wrap-around of the torus is summed
    exactly as a geometric series.
    """
    a = np.asarray(a_samples, dtype=float).ravel()
    psi = np.asarray(psi, dtype=complex).ravel()
    require(a.shape == psi.shape, "a and psi must have the same length")
    require(np.all(a > 0), "coefficient samples must be positive")
    inv = 1.0 / a
    # Q[j] = rho * int_0^{x_j} 1/a, with one extra entry for the full cell
    q = np.concatenate([[0.0], np.cumsum(0.5 * h * (inv + np.roll(inv, -1)))]) * rho
    total = q[-1]
    require(total < 700.0, "rho * int 1/a too large for the exponential form")
    g = np.exp(q[:-1]) * psi
    g_ext = np.concatenate([g, [np.exp(total) * psi[0]]])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * h * (g_ext[1:] + g_ext[:-1]))])
    phi0 = np.exp(-total) * integral[-1] / (1.0 - np.exp(-total))
    return np.exp(-q[:-1]) * (integral[:-1] + phi0)


def longitudinal_experiment(family, rho, psi, n_list, grid, time_grid,
                            static_rhos=None, seed=0, tolerance=2e-3,
                            consistency_tol=5e-3, scheme="bdf2",
                            forcing_center=None, forcing_half_width=None):
    """G-convergence of ``M_n(z) = 1/a(n x)`` with ``A = d/dx``.

    The dynamic path solves ``(d/dt a_n^{-1} + d/dx) u_n = f`` with
    ``f(t, x) = exp(rho (t - t_c)) bump(t) psi(x)`` and pairs ``u_n`` with
    space-time tests; the static path runs :func:`static_criterion` at every
    rho in ``static_rhos``. Both compare against the limit law ``b_inv``.
    """
    require(rho > 0, f"rho must be positive, got {rho}")
    require(not grid.two_dimensional, "the longitudinal example is one dimensional")
    n_list = [int(n) for n in n_list]
    for n in n_list:
        check_resolution(n, grid.n_x, grid.length_x)
    static_rhos = list(static_rhos) if static_rhos is not None else [rho]
    psi = np.asarray(psi, dtype=float)
    moments = periodic_moments(family, 2)
    A = periodic_derivative(grid)
    ids, tests = standard_test_set(grid.x, grid.length_x, grid.h_x, seed)
    h = grid.cell_measure

    def laws_at(r):
        alpha = r / family.upper
        prelimit = [reciprocal_coefficient_law(family.coefficient(n, grid.x), alpha,
                                               name=f"n{n}") for n in n_list]
        limit = constant_law(moments.b_inv, grid.dim, alpha, name="b_inv")
        return prelimit, limit

    # dynamic path
    tc = forcing_center if forcing_center is not None else \
        time_grid.t_min + 0.375 * time_grid.length
    hw = forcing_half_width if forcing_half_width is not None else 0.125 * time_grid.length
    f = weighted_bump_signal(time_grid, rho, tc, hw, psi)
    windows = time_windows(time_grid)
    laws, limit_law = laws_at(rho)
    xi_max = np.pi / time_grid.dt
    rows, leak, ratios = [], [], []
    for law in laws:
        cert = certify_accretivity(law, [rho], n_freq=17, xi_max=xi_max)
        u, rep = solve(law, A, f, cert, scheme)
        rows.append(space_time_pairings(u, windows, tests, h))
        leak.append(rep.boundary_leakage)
        ratios.append(rep.norm_ratio * rep.alpha_used)
    cert = certify_accretivity(limit_law, [rho], n_freq=17, xi_max=xi_max)
    u_lim, rep_lim = solve(limit_law, A, f, cert, scheme)
    dyn_ids = [f"w{k}:{t}" for k in range(len(windows)) for t in ids]
    report = GConvergenceReport(
        "longitudinal_dynamic", n_list, dyn_ids, np.array(rows),
        space_time_pairings(u_lim, windows, tests, h),
        space_time_norm(u_lim, h), tolerance)
    report.details.update({
        "rho": rho, "scheme": scheme, "b_inv": moments.b_inv,
        "moments": moments.to_dict(),
        "boundary_leakage": [float(v) for v in leak] + [rep_lim.boundary_leakage],
        "alpha_times_norm_ratio": [float(v) for v in ratios],
    })

    # static path
    exact_gap = []
    for r in static_rhos:
        laws_r, limit_r = laws_at(r)
        part = static_criterion(laws_r, A, r, psi, tests, ids, n_list, limit_r,
                                measure=h, tolerance=tolerance,
                                label=f"longitudinal_static_rho={r:g}")
        # the closed-form solution formula, as an independent reading
        gaps = []
        for i, n in enumerate(n_list):
            phi = longitudinal_exact(family.coefficient(n, grid.x), r, psi, grid.h_x)
            gaps.append(float(np.max(np.abs(h * tests.conj() @ phi - part.pairings[i]))
                              / part.scale))
        part.details["exact_formula_gap"] = gaps
        exact_gap.append(gaps)
        report.parts[part.label] = part

        # prelimit operators r/a_n lie in F(r/upper, r/lower); a constant
        # family needs a strictly larger beta for the class to be defined
        beta = r / family.lower if family.lower < family.upper else 2 * r / family.lower
        C_lim = r * moments.b_inv * np.eye(grid.dim)
        fc = check_F_membership(C_lim, r / family.upper, beta, 1e-8)
        report.add_check(f"F_closure_shadow_rho={r:g}", fc.member and fc.witness is None,
                         margin_lower=fc.margin_lower, margin_upper=fc.margin_upper)
        if report.converged:
            report.add_check(f"static_dynamic_consistency_rho={r:g}",
                             part.defects[-1] <= consistency_tol,
                             static_defect=float(part.defects[-1]),
                             tolerance=consistency_tol)

    zs = laplace_points(time_grid, rho, scheme)[::max(1, time_grid.n_samples // 64)]
    growth = linear_growth_bound_check(limit_law, 1.0 / family.lower,
                                       rho / family.upper, zs)
    report.add_check("growth_bound", growth.passed, worst_ratio=growth.worst_ratio)
    sup_norm = max(abs(np.max(np.abs(limit_law.raw(z)))) for z in zs)
    report.add_check("limit_law_sup_norm", abs(sup_norm - moments.b_inv) <= 1e-12,
                     sup_norm=float(sup_norm), b_inv=moments.b_inv)
    return report


# ---------------------------------------------------------------------------
# orthogonal setting and the Neumann limit law
# ---------------------------------------------------------------------------

def neumann_tail_bound(kappa, rho, K, L):
    """Coefficient ``c`` with ``||M(z) - M_{K,L}(z)|| <= c / |z|``.

    With ``q = kappa/rho`` and ``r = q/(1-q)``: truncating the first series
    at ``K`` moves ``T`` by at most ``kappa q^K/(1-q)``, which moves
    ``T (1 - S T)^{-1}`` by at most that over ``(1-r)^2``; cutting the
    second series at ``L`` adds ``kappa/(1-q) r^L/(1-r)``.
    """
    q = kappa / rho
    r = q / (1.0 - q)
    require(r < 1, f"series bound needs kappa/rho < 1/2, got {q}")
    d_T = kappa * q ** K / (1.0 - q)
    return d_T / (1.0 - r) ** 2 + kappa / (1.0 - q) * r ** L / (1.0 - r)


def _resolvent_matrix(A_x, z):
    """``(z + A_x)^{-1}`` as a dense matrix."""
    B = z * np.eye(A_x.dim) + A_x.matrix
    return banded_solve(B, np.eye(A_x.dim, dtype=complex), band_ordering(B))


def _neumann_terms(moments, A_x, z, K, L):
    eye = np.eye(A_x.dim)
    S = _resolvent_matrix(A_x, z)
    T = moments.moment(K) * eye
    for k in range(K - 1, 0, -1):
        T = moments.moment(k) * eye - S @ T
    X = eye
    ST = S @ T
    for _ in range(L - 1):
        X = eye + ST @ X
    return S, T, T @ X


def neumann_limit_law(moments, A_x, rho, K, L, alpha=1.0, name="neumann"):
    """Limit law of ``M_n(z) = 1 + a(n y)/z`` with ``A = d/dx``.

    With ``S = (z + A_x)^{-1}`` and ``T = sum_{k=1..K} (-S)^{k-1} b_k`` it
    returns ``M(z) = 1 + z^{-1} (T + sum_{l=2..L} S^{l-1} T^l)``. The same
    matrix acts on every y-slice because the moments do not depend on y.
    ``metadata["tail_coefficient"]`` bounds the truncation error by
    ``tail_coefficient / |z|``.

    Raises
    ------
    ContractViolation
        If ``rho <= 4 kappa``.
    """
    kappa = moments.kappa
    if not rho > 4.0 * kappa:
        raise ContractViolation(
            f"the Neumann limit law needs rho > 4*kappa = {4.0 * kappa:g}, got rho={rho:g}")
    require(K >= 2 and L >= 2, f"truncation orders must be >= 2, got K={K}, L={L}")
    require(K <= moments.k_max, f"K={K} exceeds the moment table size {moments.k_max}")
    require(A_x.is_skew_adjoint, "A_x must be tagged skew_adjoint")

    def func(z):
        _, _, G = _neumann_terms(moments, A_x, z, K, L)
        return np.eye(A_x.dim) + G / z

    meta = {"K": K, "L": L, "kappa": kappa, "rho": rho, "b": list(moments.b),
            "tail_coefficient": neumann_tail_bound(kappa, rho, K, L)}
    return MaterialLaw(func, A_x.dim, 4.0 * kappa, alpha, "neumann_limit", name, meta)


def tail_estimate(law, z):
    return law.metadata["tail_coefficient"] / abs(z)


def neumann_partial_sum_norms(a_values, A_x, zs, K):
    """Largest ``||sum_{k=1..m} (-a S_z)^k||`` over ``a_values`` and ``zs`` for
    each ``m = 1..K``."""
    eye = np.eye(A_x.dim)
    worst = np.zeros(K)
    for z in np.atleast_1d(zs):
        S = _resolvent_matrix(A_x, z)
        for a in np.unique(np.asarray(a_values, dtype=float)):
            term = eye
            total = np.zeros_like(S)
            for m in range(K):
                term = -a * (S @ term)
                total = total + term
                worst[m] = max(worst[m], np.linalg.norm(total, 2))
    return worst


def orthogonal_experiment(family, rho, g, p, q, n_list, K, L, grid,
                          seed=0, tolerance=2e-3, consistency_tol=5e-3,
                          scheme="bdf2", static_rho=None, alpha=1.0):
    """G-convergence of ``(d/dt + a(n y) + d/dx)`` towards the Neumann limit.

    The forcing is separable, ``f(t, x, y) = g(t) p(x) q(y)``. Every
    y-slice is an independent transport problem in ``x`` with the constant
    ``c = a(n y_j)``, so ``u_n(t, x, y_j) = q(y_j) U_c(t, x)`` exactly and one
    solve per distinct coefficient value suffices. The limit solution is
    ``q(y) U_lim(t, x)`` with ``U_lim`` from :func:`neumann_limit_law`.

    Tests are products ``theta(t) s_j(x) r_j(y)`` of the standard test sets
    on both axes and two time windows.
    """
    require(grid.two_dimensional, "the orthogonal example needs an x-y grid")
    kappa = family.kappa
    if not rho > 4.0 * kappa:
        raise ContractViolation(
            f"the orthogonal example needs rho > 4*kappa = {4.0 * kappa:g}, got rho={rho:g}")
    n_list = [int(n) for n in n_list]
    for n in n_list:
        check_resolution(n, grid.n_y, grid.length_y)
    require(g.dim == 1 and g.rho == rho, "g must be a scalar signal with weight rho")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    require(p.shape == (grid.n_x,) and q.shape == (grid.n_y,),
            "p and q must match the grid axes")
    line = SpaceGrid(grid.length_x, grid.n_x)
    A_x = periodic_derivative(line)
    moments = periodic_moments(family, K)
    ids_x, tx = standard_test_set(grid.x, grid.length_x, grid.h_x, seed)
    ids_y, ty = standard_test_set(grid.y, grid.length_y, grid.h_y, seed + 1)
    windows = time_windows(g.grid)
    f = g.with_values(g.values * p[None, :])
    hx, hy = grid.h_x, grid.h_y
    xi_max = np.pi / g.grid.dt
    static_rho = static_rho if static_rho is not None else rho

    def pair_x(U):
        return space_time_pairings(U, windows, tx, hx).reshape(len(windows), -1)

    dyn_cache, stat_cache = {}, {}

    def slice_solution(c):
        if c not in dyn_cache:
            law = shifted_law(np.full(grid.n_x, c), alpha=alpha, nu=kappa,
                              name=f"c={c!r}")
            cert = certify_accretivity(law, [rho], n_freq=17, xi_max=xi_max)
            U, _ = solve(law, A_x, f, cert, scheme)
            dyn_cache[c] = pair_x(U)
            C = SpatialOperator(static_rho * law.matrix(static_rho), {"diagonal"})
            stat_cache[c] = tx.conj() @ resolvent_solve(C, A_x, p, alpha=alpha) * hx
        return dyn_cache[c], stat_cache[c]

    # test j pairs x-test j with y-test j; wy[j, y] = h_y conj(r_j(y)) q(y)
    wy = hy * ty.conj() * q[None, :]
    dyn_rows, stat_rows = [], []
    for n in n_list:
        c = family.coefficient(n, grid.y)
        W = np.array([slice_solution(float(cj))[0] for cj in c])      # (n_y, win, J)
        V = np.array([slice_solution(float(cj))[1] for cj in c])      # (n_y, J)
        dyn_rows.append(np.einsum("jy,ywj->wj", wy, W).ravel())
        stat_rows.append(np.einsum("jy,yj->j", wy, V))

    limit_law = neumann_limit_law(moments, A_x, rho, K, L, alpha=alpha)
    cert = certify_accretivity(limit_law, [rho], n_freq=17, xi_max=xi_max)
    U_lim, rep_lim = solve(limit_law, A_x, f, cert, scheme)
    Wl = pair_x(U_lim)
    qy = np.einsum("jy->j", wy)
    dyn_limit = (Wl * qy[None, :]).ravel()
    norm_q = np.sqrt(hy) * np.linalg.norm(q)
    dyn_scale = space_time_norm(U_lim, hx) * norm_q

    dyn_ids = [f"w{k}:{a}*{b}" for k in range(len(windows)) for a, b in zip(ids_x, ids_y)]
    report = GConvergenceReport("orthogonal_dynamic", n_list, dyn_ids,
                                np.array(dyn_rows), dyn_limit, dyn_scale, tolerance)
    report.details.update({
        "rho": rho, "kappa": kappa, "K": K, "L": L, "scheme": scheme,
        "moments": moments.to_dict(),
        "tail_coefficient": limit_law.metadata["tail_coefficient"],
        "distinct_slice_solves": len(dyn_cache),
        "limit_boundary_leakage": rep_lim.boundary_leakage,
    })

    # static path at the real point z = static_rho
    if static_rho > 4.0 * kappa:
        static_limit_law = neumann_limit_law(moments, A_x, static_rho, K, L, alpha=alpha)
        C = static_rho * static_limit_law.matrix(static_rho)
        phi = resolvent_solve(SpatialOperator(C), A_x, p, alpha=alpha)
        stat_limit = (tx.conj() @ phi) * hx * qy
        stat_scale = np.sqrt(hx) * np.linalg.norm(phi) * norm_q
        part = GConvergenceReport(f"orthogonal_static_rho={static_rho:g}", n_list,
                                  [f"{a}*{b}" for a, b in zip(ids_x, ids_y)],
                                  np.array(stat_rows), stat_limit, stat_scale,
                                  tolerance)
        report.parts[part.label] = part
        if report.converged:
            report.add_check("static_dynamic_consistency",
                             part.defects[-1] <= consistency_tol,
                             static_defect=float(part.defects[-1]),
                             tolerance=consistency_tol)

    zs = laplace_points(g.grid, rho, scheme)[::max(1, g.grid.n_samples // 32)]
    growth = linear_growth_bound_check(limit_law, 1.0 + family.upper / rho, alpha, zs)
    report.add_check("growth_bound", growth.passed, worst_ratio=growth.worst_ratio)
    if kappa / rho <= 0.25:
        a_grid = np.linspace(family.lower, family.upper, 9)
        sums = neumann_partial_sum_norms(a_grid, A_x, zs[:8], K)
        report.add_check("neumann_partial_sums", bool(np.all(sums <= 1.0 / 3.0 + 1e-9)),
                         max_norm=float(sums.max()), bound=1.0 / 3.0)
    return report
