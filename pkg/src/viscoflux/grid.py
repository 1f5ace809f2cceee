"""Periodic grids, their Fourier lattices and the field container.

Fields are plain numpy arrays whose *last* ``n`` axes are spatial: a scalar is
``(N,)*n``, a vector ``(n,) + (N,)*n`` and a matrix ``(n, n) + (N,)*n``.
Fourier coefficients use the real-FFT half lattice, so conjugate symmetry of
real fields is built in.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, GridMismatchError, MeanNonZeroError


class FrequencyGrid:
    """Uniform grid on the torus ``[0, L)^n`` with ``N`` points per axis."""

    def __init__(self, n=2, N=64, L=2 * np.pi):
        if n not in (2, 3):
            raise ConfigError(f"dimension n must be 2 or 3, got {n}")
        if N < 8 or N % 2 or (N & (N - 1)):
            raise ConfigError(f"N must be a power of two >= 8, got {N}")
        if not L > 0:
            raise ConfigError(f"period L must be positive, got {L}")
        self.n = int(n)
        self.N = int(N)
        self.L = float(L)
        self.shape = (self.N,) * self.n
        self.hat_shape = (self.N,) * (self.n - 1) + (self.N // 2 + 1,)
        self.axes = tuple(range(-self.n, 0))

    def __repr__(self):
        return f"FrequencyGrid(n={self.n}, N={self.N}, L={self.L:g})"

    def __eq__(self, other):
        return (isinstance(other, FrequencyGrid)
                and (self.n, self.N, self.L) == (other.n, other.N, other.L))

    def __hash__(self):
        return hash((self.n, self.N, self.L))

    # ------------------------------------------------------------ lattice
    @cached_property
    def lattice(self):
        """Integer frequency vectors, shape ``(n,) + hat_shape``."""
        full = np.fft.fftfreq(self.N, 1.0 / self.N)
        half = np.arange(self.N // 2 + 1, dtype=float)
        axes = [full] * (self.n - 1) + [half]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def k(self):
        """Physical wavevectors ``2*pi/L * lattice``."""
        return (2 * np.pi / self.L) * self.lattice

    @cached_property
    def kabs(self):
        return np.sqrt(np.sum(self.k ** 2, axis=0))

    @cached_property
    def nyquist(self):
        """True on modes with some component at the Nyquist index ``N/2``."""
        return np.any(np.abs(self.lattice) == self.N // 2, axis=0)

    @cached_property
    def kd(self):
        """Wavevectors used by all differential operators: Nyquist modes zeroed."""
        return self.k * ~self.nyquist

    @cached_property
    def kd2(self):
        return np.sum(self.kd ** 2, axis=0)

    @cached_property
    def kdabs(self):
        return np.sqrt(self.kd2)

    @cached_property
    def inv_kd2(self):
        out = np.zeros(self.hat_shape)
        nz = self.kd2 > 0
        out[nz] = 1.0 / self.kd2[nz]
        return out

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask; also removes the Nyquist planes."""
        keep = np.all(np.abs(self.lattice) < self.N / 3.0, axis=0)
        return keep & ~self.nyquist

    @cached_property
    def weights(self):
        """Multiplicity of each half-lattice mode in the full lattice."""
        w = np.full(self.hat_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    @property
    def dx(self):
        return self.L / self.N

    @cached_property
    def x(self):
        """Physical coordinates, shape ``(n,) + shape``."""
        x1 = np.arange(self.N) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.n), indexing="ij"))

    @property
    def volume(self):
        return self.L ** self.n

    # --------------------------------------------------------- transforms
    def fft(self, values):
        return np.fft.rfftn(values, axes=self.axes)

    def ifft(self, coeffs):
        return np.fft.irfftn(coeffs, s=self.shape, axes=self.axes)

    def zero_mode(self, coeffs):
        return coeffs[(...,) + (0,) * self.n]

    def mean(self, values):
        return np.mean(values, axis=self.axes)

    def power(self, coeffs):
        """Per-mode squared modulus summed over component axes, weighted."""
        c = np.abs(coeffs) ** 2
        c = c.reshape((-1,) + self.hat_shape).sum(axis=0)
        return c * self.weights

    def l2_hat(self, coeffs):
        """L2 norm on the torus computed from Fourier coefficients."""
        scale = self.volume / float(self.N) ** (2 * self.n)
        return float(np.sqrt(scale * self.power(coeffs).sum()))

    def l2(self, values):
        return float(np.sqrt(np.sum(values ** 2) * self.dx ** self.n))

    def inner(self, f, g):
        return float(np.sum(f * g) * self.dx ** self.n)

    # ----------------------------------------------- spectral derivatives
    def grad_hat(self, c):
        """Gradient coefficients; the new derivative axis is placed last
        among the component axes, so ``grad_hat(u)[i, j] = d_j u_i``."""
        lead = c.ndim - self.n
        kd = self.kd.reshape((1,) * lead + self.kd.shape)
        return 1j * kd * c[(slice(None),) * lead + (None,)]

    def div_hat(self, c):
        """Divergence over the last component axis: ``(div M)_i = sum_j d_j M_ij``."""
        lead = c.ndim - self.n
        kd = self.kd.reshape((1,) * (lead - 1) + self.kd.shape)
        return np.sum(1j * kd * c, axis=lead - 1)

    def lap_hat(self, c):
        return -self.kd2 * c

    def dealias(self, c):
        return c * self.dealias_mask

    def random_field(self, rng, lead=(), band=None, amplitude=1.0, slope=0.0):
        """Random real band-limited mean-zero field without Nyquist content."""
        lo, hi = band if band is not None else (1, self.N // 3)
        kab = np.sqrt(np.sum(self.lattice ** 2, axis=0))
        mask = (kab >= lo) & (kab <= hi) & ~self.nyquist
        shape = tuple(lead) + self.hat_shape
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        env = np.where(mask, np.maximum(kab, 1.0) ** (-slope), 0.0)
        vals = self.ifft(c * env)
        vals = vals - self.mean(vals)[(...,) + (None,) * self.n]
        c = self.fft(vals)
        c[..., self.nyquist] = 0.0
        vals = self.ifft(c)
        scale = np.sqrt(np.mean(vals ** 2))
        return amplitude * vals / scale if scale > 0 else vals


def check_same_grid(*grids):
    g0 = grids[0]
    for g in grids[1:]:
        if g != g0:
            raise GridMismatchError(f"grid mismatch: {g0!r} vs {g!r}")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real field on a periodic grid; Fourier coefficients are computed lazily."""

    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[v.ndim - self.grid.n:] != self.grid.shape or v.ndim - self.grid.n > 2:
            raise GridMismatchError(f"values of shape {v.shape} do not live on {self.grid!r}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        f = cls(grid, grid.ifft(coeffs))
        f.__dict__["coeffs"] = coeffs
        return f

    @cached_property
    def coeffs(self):
        return self.grid.fft(self.values)

    @property
    def rank(self):
        return ("scalar", "vector", "matrix")[self.values.ndim - self.grid.n]

    @property
    def mean(self):
        return self.grid.mean(self.values)

    def l2(self):
        return self.grid.l2_hat(self.coeffs)

    def is_mean_zero(self, rtol=1e-12):
        zm = np.abs(self.grid.zero_mode(self.coeffs))
        scale = np.abs(self.coeffs).max() if self.coeffs.size else 0.0
        return bool(np.all(zm <= rtol * max(scale, 1e-300)))

    def require_mean_zero(self, rtol=1e-12):
        if not self.is_mean_zero(rtol):
            raise MeanNonZeroError()

    def mean_free(self):
        c = self.coeffs.copy()
        c[(...,) + (0,) * self.grid.n] = 0.0
        return SpectralField.from_coeffs(self.grid, c)

    def __add__(self, other):
        check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.values + other.values)

    def __sub__(self, other):
        check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return SpectralField(self.grid, self.values * c)

    __rmul__ = __mul__


def as_coeffs(f, grid):
    """Fourier coefficients of a SpectralField or a raw physical array."""
    if isinstance(f, SpectralField):
        check_same_grid(f.grid, grid)
        return f.coeffs
    return grid.fft(np.asarray(f, dtype=float))
