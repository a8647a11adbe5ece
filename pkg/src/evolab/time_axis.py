"""Exponentially weighted signals on a truncated time axis.

Signals live in the weighted space with norm ``int |f(s)|^2 exp(-2 rho s) ds``.
The real line is truncated to a periodic window ``[t_min, t_max)`` sampled at
``n_samples`` points; the Fourier-Laplace transform is one FFT of the
pre-weighted samples ``exp(-rho t) f(t)``, scaled so that the discrete
Parseval identity holds exactly.
"""

import csv
from dataclasses import dataclass

import numpy as np

from ._validation import (ContractViolation, as_complex_matrix, frozen,
                          is_power_of_two, require)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic sampling of ``[t_min, t_max)``."""

    t_min: float
    t_max: float
    n_samples: int

    def __post_init__(self):
        require(self.t_min < self.t_max, "t_min must be smaller than t_max")
        require(self.n_samples >= 4 and is_power_of_two(self.n_samples),
                f"n_samples must be a power of two >= 4, got {self.n_samples}")

    @property
    def length(self):
        return self.t_max - self.t_min

    @property
    def dt(self):
        return self.length / self.n_samples

    @property
    def times(self):
        return self.t_min + self.dt * np.arange(self.n_samples)

    @property
    def frequencies(self):
        """Angular frequencies ``2 pi k / (t_max - t_min)`` in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_samples, d=self.dt)

    @property
    def d_xi(self):
        return 2.0 * np.pi / self.length

    def quadrature_weights(self):
        """Trapezoidal weights: ``dt`` inside, ``dt/2`` at both ends."""
        w = np.full(self.n_samples, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def interior_mask(self, fraction=0.5):
        """Samples lying in the centred sub-window of relative size ``fraction``."""
        t = self.times
        mid = 0.5 * (self.t_min + self.t_max)
        half = 0.5 * fraction * self.length
        return (t >= mid - half) & (t <= mid + half)

    def refined(self, factor=2):
        return TimeGrid(self.t_min, self.t_max, self.n_samples * factor)


@dataclass(frozen=True, eq=False)
class WeightedSignal:
    """Samples of a vector valued function paired with its weight ``rho``.

    ``values`` has shape ``(n_samples, d)``; 1-D input is read as ``d = 1``.
    """

    grid: TimeGrid
    values: np.ndarray
    rho: float

    def __post_init__(self):
        require(self.rho > 0, f"rho must be positive, got {self.rho}")
        vals = as_complex_matrix(self.values, self.grid.n_samples)
        object.__setattr__(self, "values", frozen(vals))

    @classmethod
    def from_function(cls, grid, func, rho):
        """Sample ``func(t)`` (returning shape ``(n,)`` or ``(n, d)``)."""
        return cls(grid, func(grid.times), rho)

    @classmethod
    def zeros(cls, grid, dim, rho):
        return cls(grid, np.zeros((grid.n_samples, dim), dtype=complex), rho)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def weight(self):
        return np.exp(-self.rho * self.grid.times)

    @property
    def weighted_values(self):
        """``exp(-rho t) f(t)``, the samples the transform actually sees."""
        return self.weight[:, None] * self.values

    def with_values(self, values):
        return WeightedSignal(self.grid, values, self.rho)

    def with_rho(self, rho):
        """Same samples, explicitly re-interpreted in another weighted space."""
        return WeightedSignal(self.grid, self.values, rho)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(scalar * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Fourier-Laplace coefficients, indexed like ``grid.frequencies``."""

    grid: TimeGrid
    coeffs: np.ndarray
    rho: float

    def __post_init__(self):
        vals = as_complex_matrix(self.coeffs, self.grid.n_samples)
        object.__setattr__(self, "coeffs", frozen(vals))

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @property
    def laplace_variable(self):
        """``z_k = i xi_k + rho`` for every stored frequency."""
        return 1j * self.grid.frequencies + self.rho

    def norm(self):
        return float(np.sqrt(self.grid.d_xi * np.sum(np.abs(self.coeffs) ** 2)))

    def with_coeffs(self, coeffs):
        return Spectrum(self.grid, coeffs, self.rho)


def _check_compatible(f, g):
    if f.grid != g.grid:
        raise ContractViolation("signals live on different time grids")
    if f.rho != g.rho:
        raise ContractViolation(f"weight mismatch: rho={f.rho} vs rho={g.rho}")
    if f.dim != g.dim:
        raise ContractViolation(f"dimension mismatch: {f.dim} vs {g.dim}")


def weighted_inner(f, g):
    """``sum_s <f(s), g(s)> exp(-2 rho s) w_s``, conjugate-linear in ``f``."""
    _check_compatible(f, g)
    w = f.grid.quadrature_weights() * np.exp(-2.0 * f.rho * f.grid.times)
    return complex(np.sum(w * np.sum(np.conj(f.values) * g.values, axis=1)))


def weighted_norm(f):
    w = f.grid.quadrature_weights() * np.exp(-2.0 * f.rho * f.grid.times)
    return float(np.sqrt(np.sum(w * np.sum(np.abs(f.values) ** 2, axis=1))))


def fourier_laplace(f):
    grid = f.grid
    phase = np.exp(-1j * grid.frequencies * grid.t_min)
    coeffs = np.fft.fft(f.weighted_values, axis=0)
    coeffs *= (grid.dt / _SQRT_2PI) * phase[:, None]
    return Spectrum(grid, coeffs, f.rho)


def inverse_fourier_laplace(spec):
    grid = spec.grid
    phase = np.exp(1j * grid.frequencies * grid.t_min)
    g = np.fft.ifft(spec.coeffs * phase[:, None], axis=0)
    g *= _SQRT_2PI / grid.dt
    values = np.exp(spec.rho * grid.times)[:, None] * g
    return WeightedSignal(grid, values, spec.rho)


def apply_multiplier(f, multiplier):
    """Multiply the spectrum of ``f`` by a scalar symbol sampled per frequency."""
    spec = fourier_laplace(f)
    return inverse_fourier_laplace(
        spec.with_coeffs(spec.coeffs * np.asarray(multiplier)[:, None]))


def time_derivative(f):
    """Spectral derivative: multiply by ``i xi + rho`` and transform back.

    Wrap-around pollution appears when ``f`` is not negligible near the
    window ends.
    """
    return apply_multiplier(f, 1j * f.grid.frequencies + f.rho)


def antiderivative(f, method="cumulative"):
    """Causal antiderivative ``int_{-inf}^t f``.

    ``method="cumulative"`` is a running trapezoid from the left grid edge,
    exactly causal. ``method="spectral"`` divides the spectrum by
    ``i xi + rho`` and serves as a cross-check.
    """
    if f.rho <= 0:
        raise ContractViolation("the causal antiderivative needs rho > 0")
    if method == "cumulative":
        vals = f.values
        out = np.zeros_like(vals)
        out[1:] = np.cumsum(0.5 * f.grid.dt * (vals[1:] + vals[:-1]), axis=0)
        return f.with_values(out)
    if method == "spectral":
        return apply_multiplier(f, 1.0 / (1j * f.grid.frequencies + f.rho))
    raise ContractViolation(f"unknown antiderivative method {method!r}")


def shift_samples(grid, h):
    """Number of samples corresponding to ``h``, snapped to the grid."""
    return int(round(h / grid.dt))


def time_shift(f, h):
    """``(tau_h f)(t) = f(t + h)`` with ``h`` snapped to a grid multiple.

    The region that would wrap around the periodic window is zeroed.
    """
    m = shift_samples(f.grid, h)
    out = np.zeros_like(f.values)
    n = f.grid.n_samples
    if m >= 0:
        out[:n - m] = f.values[m:]
    else:
        out[-m:] = f.values[:n + m]
    return f.with_values(out)


def truncate_before(f, a):
    """Keep values at ``t <= a``, zero the rest."""
    keep = f.grid.times <= a
    return f.with_values(np.where(keep[:, None], f.values, 0.0))


def boundary_leakage(f, fraction=0.5):
    """Relative weighted energy of ``f`` outside the centred window."""
    total = weighted_norm(f)
    if total == 0.0:
        return 0.0
    outside = ~f.grid.interior_mask(fraction)
    g = f.with_values(np.where(outside[:, None], f.values, 0.0))
    return weighted_norm(g) / total


def smooth_bump(t, center=0.0, half_width=1.0):
    """C-infinity bump ``exp(1 - 1/(1 - s^2))`` supported on ``|s| < 1``."""
    s = (np.asarray(t, dtype=float) - center) / half_width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def weighted_bump_signal(grid, rho, center, half_width, profile=None):
    """``exp(rho (t - center)) * bump(t) * profile`` so the weighted samples
    are a centred bump.

    ``profile`` is an optional spatial vector (defaults to ``d = 1``).
    """
    t = grid.times
    env = np.exp(rho * (t - center)) * smooth_bump(t, center, half_width)
    if profile is None:
        return WeightedSignal(grid, env, rho)
    return WeightedSignal(grid, env[:, None] * np.asarray(profile)[None, :], rho)


def write_signal_csv(f, path):
    """Header ``t,re_0,im_0,...``; one row per sample, 17 significant digits."""
    header = ["t"]
    for i in range(f.dim):
        header += [f"re_{i}", f"im_{i}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, row in zip(f.grid.times, f.values):
            cells = [format(t, ".17g")]
            for v in row:
                cells += [format(v.real, ".17g"), format(v.imag, ".17g")]
            writer.writerow(cells)


def read_signal_csv(path, rho, t_max=None):
    """Inverse of :func:`write_signal_csv`; the grid is rebuilt from ``t``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    n = len(t)
    dt = (t[-1] - t[0]) / (n - 1)
    if t_max is None:
        t_max = t[0] + n * dt
    grid = TimeGrid(float(t[0]), float(t_max), n)
    values = data[:, 1::2] + 1j * data[:, 2::2]
    return WeightedSignal(grid, values, rho)
