import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evolab import ContractViolation, NumericalFailure
from evolab.homogenize import longitudinal_exact
from evolab.space_ops import (SpaceGrid, SpatialOperator, band_ordering,
                              derivative_symbol, linear_combination,
                              multiplication_operator, periodic_derivative,
                              read_operator_csv, resolvent_solve,
                              write_operator_csv)
from evolab.time_axis import smooth_bump


def test_grid_validation_and_layout():
    with pytest.raises(ContractViolation):
        SpaceGrid(1.0, 3)
    with pytest.raises(ContractViolation):
        SpaceGrid(1.0, 8, length_y=1.0)
    g = SpaceGrid(2.0, 8, 1.0, 4)
    assert g.dim == 32 and g.h_x == 0.25 and g.h_y == 0.25
    X, Y = g.mesh()
    assert X.shape == (8, 4)
    # x-major flattening: index ix * n_y + iy
    assert X.ravel()[5] == g.x[1] and Y.ravel()[5] == g.y[1]


def test_derivative_kills_constants_exactly():
    g = SpaceGrid(1.0, 64)
    D = periodic_derivative(g)
    assert np.all(D.apply(np.full(64, 3.7)) == 0)


def test_derivative_of_sine_is_sinc_corrected_cosine():
    L = 2.0
    errs = []
    for n in (64, 128):
        g = SpaceGrid(L, n)
        k = 2 * np.pi / L
        out = periodic_derivative(g).apply(np.sin(k * g.x)).real
        assert np.allclose(out, np.sin(k * g.h_x) / g.h_x * np.cos(k * g.x), atol=1e-12)
        errs.append(np.max(np.abs(out - k * np.cos(k * g.x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


@pytest.mark.parametrize("axis", ["x", "y"])
def test_derivative_is_exactly_skew(axis):
    g = SpaceGrid(1.0, 8, 2.0, 16)
    D = periodic_derivative(g, axis)
    assert D.is_skew_adjoint
    assert np.max(np.abs(D.matrix + D.matrix.T)) == 0.0
    assert np.all(D.matrix.imag == 0)


def test_derivative_symbol_matches_eigenvalues():
    g = SpaceGrid(1.0, 16)
    D = periodic_derivative(g).matrix
    F = np.fft.fft(np.eye(16), axis=0)
    diag = F @ D @ np.linalg.inv(F)
    assert np.allclose(np.diag(diag), derivative_symbol(16, g.h_x), atol=1e-12)


def test_multiplication_operator_examples():
    assert multiplication_operator(np.ones(5)).is_diagonal
    assert np.array_equal(multiplication_operator(np.ones(5)).matrix, np.eye(5))
    x = SpaceGrid(1.0, 64).x
    a = 2 + np.sin(2 * np.pi * x)
    M = multiplication_operator(a)
    assert M.norm() == pytest.approx(3.0)
    inv = multiplication_operator(1.0 / a)
    assert np.allclose((M @ inv).matrix, np.eye(64), atol=1e-15)
    assert np.min(np.linalg.eigvalsh(M.hermitian_part())) >= 1.0 - 1e-15


def test_diagonal_tag_means_zero_off_diagonal():
    M = multiplication_operator(np.arange(1.0, 5.0))
    off = M.matrix - np.diag(np.diag(M.matrix))
    assert np.all(off == 0)


def test_resolvent_scalar_case():
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    phi = resolvent_solve(SpatialOperator(3.0 * np.eye(10)), SpatialOperator.zero(10),
                          psi, alpha=3.0)
    assert np.allclose(phi, psi / 3.0, rtol=1e-15)


def test_resolvent_rejects_non_skew_operator():
    with pytest.raises(ContractViolation):
        resolvent_solve(SpatialOperator.identity(4), SpatialOperator(np.eye(4)), np.ones(4))


def test_resolvent_reports_bound_violation():
    # C has Hermitian part 1, so alpha = 2 is a false claim
    with pytest.raises(NumericalFailure):
        resolvent_solve(SpatialOperator.identity(4), SpatialOperator.zero(4),
                        np.ones(4), alpha=2.0)


def test_resolvent_matches_longitudinal_closed_form_under_refinement():
    rho, c = 2.0, 1.5
    gaps = []
    for n in (1024, 2048, 4096):
        g = SpaceGrid(1.0, n)
        psi = smooth_bump(g.x, 0.5, 0.3)
        phi = resolvent_solve(SpatialOperator((rho / c) * np.eye(n)),
                              periodic_derivative(g), psi, alpha=rho / c)
        exact = longitudinal_exact(np.full(n, c), rho, psi, g.h_x)
        gaps.append(np.max(np.abs(phi - exact)) / np.max(np.abs(exact)))
    # second order: each halving of h cuts the gap by 4
    assert gaps[0] / gaps[1] > 3.5 and gaps[1] / gaps[2] > 3.5
    assert gaps[-1] <= 1e-6


def test_resolvent_norm_bound_on_random_suite():
    g = SpaceGrid(1.0, 48)
    A = periodic_derivative(g)
    rng = np.random.default_rng(11)
    a = 2 + np.sin(2 * np.pi * g.x)
    alpha = 1.0
    C = multiplication_operator(a)
    for _ in range(100):
        psi = rng.standard_normal(48) + 1j * rng.standard_normal(48)
        phi = resolvent_solve(C, A, psi, alpha=alpha)
        assert np.linalg.norm(phi) <= np.linalg.norm(psi) / alpha


def test_band_ordering_removes_periodic_corners():
    g = SpaceGrid(1.0, 64)
    D = periodic_derivative(g).matrix
    perm = band_ordering(D + np.eye(64))
    Dp = D[np.ix_(perm, perm)]
    rows, cols = np.nonzero(Dp)
    assert np.max(np.abs(rows - cols)) <= 2


def test_resolvent_residual_with_periodic_difference():
    # partial pivoting on the natural ordering loses ~1e-5 here
    g = SpaceGrid(1.0, 512)
    a = 2 + np.sin(2 * np.pi * 16 * g.x)
    z = 2.0 + 300j
    C = SpatialOperator(np.diag(z / a))
    psi = smooth_bump(g.x, 0.5, 0.3).astype(complex)
    phi = resolvent_solve(C, periodic_derivative(g), psi, rtol=1e-13)
    res = np.linalg.norm((C.matrix + periodic_derivative(g).matrix) @ phi - psi)
    assert res <= 1e-13 * np.linalg.norm(psi)


def test_skew_preserved_under_real_combination():
    g = SpaceGrid(1.0, 8, 1.0, 8)
    Dx, Dy = periodic_derivative(g, "x"), periodic_derivative(g, "y")
    comb = linear_combination([0.3, -2.7], [Dx, Dy])
    assert comb.is_skew_adjoint
    assert np.max(np.abs(comb.matrix + comb.matrix.conj().T)) == 0.0
    assert not linear_combination([1j, 1.0], [Dx, Dy]).is_skew_adjoint


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_skew_part_drops_out_of_real_quadratic_form(seed):
    rng = np.random.default_rng(seed)
    g = SpaceGrid(1.0, 32)
    A = periodic_derivative(g).matrix
    C = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
    phi = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    lhs = np.vdot(phi, (C + A) @ phi).real
    rhs = np.vdot(phi, C @ phi).real
    assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(C) * np.vdot(phi, phi).real


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31),
       s=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_resolvent_is_linear(seed, s):
    rng = np.random.default_rng(seed)
    g = SpaceGrid(1.0, 32)
    A = periodic_derivative(g)
    C = multiplication_operator(1.5 + rng.random(32))
    p, q = rng.standard_normal((2, 32))
    lhs = resolvent_solve(C, A, p + s * q)
    rhs = resolvent_solve(C, A, p) + s * resolvent_solve(C, A, q)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(lhs) + 1e-15


def test_operator_csv_roundtrip(tmp_path):
    g = SpaceGrid(1.0, 6)
    D = periodic_derivative(g)
    path = tmp_path / "d.csv"
    write_operator_csv(D, path)
    back = read_operator_csv(path, D.tags)
    assert np.array_equal(back.matrix, D.matrix)
    assert back.is_skew_adjoint


def test_operator_matrix_is_read_only():
    D = periodic_derivative(SpaceGrid(1.0, 6))
    with pytest.raises(ValueError):
        D.matrix[0, 0] = 1.0
