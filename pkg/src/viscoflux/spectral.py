"""Fourier-side linear analysis of the flux/velocity system.

The linearized flux system ``d_t theta + alpha Lap u + grad div u = 0``,
``d_t u - A u + theta = 0`` splits under the Helmholtz projections into two
scalar 2x2 systems per frequency,

    d_t (Phi, Psi)  = [[0, alpha|xi|], [-|xi|, -mu0 |xi|^2]]        (Phi, Psi)
    d_t (Phi', Psi') = [[0, (1+alpha)|xi|], [-|xi|, -nu |xi|^2]]    (Phi', Psi')

with ``Phi = Lambda^{-1} P theta``, ``Psi = P u`` (solenoidal part) and the
primed pair built from the potential part, ``nu = lambda0 + 2 mu0``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import ConfigError, MeanNonZeroError
from .grid import SpectralField

REGIMES = ("oscillatory", "critical", "overdamped")
_CRITICAL_TOL = 1e-14


def _require_mean_zero(grid, c, rtol=1e-12):
    zm = np.abs(grid.zero_mode(c))
    scale = np.abs(c).max() if c.size else 0.0
    if np.any(zm > rtol * max(scale, 1e-300)):
        raise MeanNonZeroError()


# ------------------------------------------------------------ projections


def _unwrap(f, grid):
    if isinstance(f, SpectralField):
        return f.grid, f.coeffs, True
    if grid is None:
        raise TypeError("a grid is required for raw arrays")
    return grid, grid.fft(np.asarray(f, dtype=float)), False


def _wrap(grid, c, as_field):
    return SpectralField.from_coeffs(grid, c) if as_field else grid.ifft(c)


def project_hat(grid, c, which):
    """Apply ``P = I - xi xi^T/|xi|^2`` or ``Pperp = xi xi^T/|xi|^2`` to vector
    coefficients (leading axis = component)."""
    kd = grid.kd
    pot = kd * np.sum(kd * c, axis=0) * grid.inv_kd2
    if which == "P":
        return c - pot
    if which == "Pperp":
        return pot
    raise ValueError(f"unknown projection {which!r}; use 'P' or 'Pperp'")


def project(f, which, grid=None):
    """Solenoidal (``"P"``) or potential (``"Pperp"``) part of a mean-zero vector field."""
    grid, c, as_field = _unwrap(f, grid)
    _require_mean_zero(grid, c)
    return _wrap(grid, project_hat(grid, c, which), as_field)


def lambda_power_hat(grid, c, s):
    if s == 0:
        return c
    mult = np.zeros(grid.hat_shape)
    nz = grid.kd2 > 0
    mult[nz] = grid.kdabs[nz] ** s
    return c * mult


def lambda_power(f, s, grid=None):
    """``Lambda^s f`` with symbol ``|xi|^s``; negative powers need a mean-zero field."""
    grid, c, as_field = _unwrap(f, grid)
    if s < 0:
        _require_mean_zero(grid, c)
    return _wrap(grid, lambda_power_hat(grid, c, s), as_field)


def effective_velocities(u, theta, params, grid=None):
    """``w = P u + (-Lap)^{-1} P theta / mu0`` and the potential analogue with
    ``nu = lambda0 + 2 mu0``."""
    grid, uc, as_field = _unwrap(u, grid)
    _, tc, _ = _unwrap(theta, grid)
    _require_mean_zero(grid, uc)
    _require_mean_zero(grid, tc)
    w = project_hat(grid, uc, "P") + project_hat(grid, tc, "P") * grid.inv_kd2 / params.mu0
    wp = project_hat(grid, uc, "Pperp") + project_hat(grid, tc, "Pperp") * grid.inv_kd2 / params.nu
    return _wrap(grid, w, as_field), _wrap(grid, wp, as_field)


def theta_damping_rates(params):
    """High-frequency damping rates of the solenoidal and potential flux parts."""
    return params.alpha / params.mu0, (1.0 + params.alpha) / params.nu


# ------------------------------------------------------------ eigenvalues


def green_matrix(xi, params, which="P"):
    coupling, visc = _coefficients(params, which)
    return np.array([[0.0, coupling * xi], [-xi, -visc * xi * xi]])


def _coefficients(params, which):
    if which == "P":
        return params.alpha, params.mu0
    if which == "Pperp":
        return 1.0 + params.alpha, params.nu
    raise ValueError(f"unknown subsystem {which!r}")


def discriminant(xi, params, which="P"):
    """Normalized discriminant ``1 - 4 c / (v^2 |xi|^2)``; its sign fixes the regime."""
    c, v = _coefficients(params, which)
    return 1.0 - 4.0 * c / (v * v * xi * xi)


def classify(d):
    if abs(d) <= _CRITICAL_TOL:
        return "critical"
    return "overdamped" if d > 0 else "oscillatory"


def _eigs(xi, params, which):
    c, v = _coefficients(params, which)
    half = 0.5 * v * xi * xi
    d = discriminant(xi, params, which)
    regime = classify(d)
    if regime == "critical":
        return (complex(-half), complex(-half)), regime
    if regime == "oscillatory":
        w = half * np.sqrt(-d)
        return (complex(-half, -w), complex(-half, w)), regime
    fast = -half * (1.0 + np.sqrt(d))
    slow = c * xi * xi / fast
    return (complex(slow), complex(fast)), regime


@dataclass(frozen=True)
class ModeAnalysis:
    xi_norm: float
    regime_P: str
    regime_Pperp: str
    eigs_P: tuple
    eigs_Pperp: tuple
    damping_limits: tuple

    def row(self):
        out = [self.xi_norm, self.regime_P]
        for lam in self.eigs_P:
            out += [lam.real, lam.imag]
        out.append(self.regime_Pperp)
        for lam in self.eigs_Pperp:
            out += [lam.real, lam.imag]
        return out + list(self.damping_limits)


MODE_COLUMNS = ["xi", "regime_P", "re_lam_plus_P", "im_lam_plus_P", "re_lam_minus_P",
                "im_lam_minus_P", "regime_Pperp", "re_lam_plus_Pperp", "im_lam_plus_Pperp",
                "re_lam_minus_Pperp", "im_lam_minus_Pperp", "rate_P", "rate_Pperp"]


def green_eigs(xi_norm, params):
    """Eigenvalues and regimes of both Green matrices at frequency ``|xi|``.

    ``lam_plus`` is the slow root (closest to zero) in the overdamped regime
    and the root with negative imaginary part in the oscillatory one."""
    xi = float(xi_norm)
    if not xi > 0:
        raise ValueError(f"|xi| must be positive, got {xi_norm}")
    eP, rP = _eigs(xi, params, "P")
    eQ, rQ = _eigs(xi, params, "Pperp")
    return ModeAnalysis(xi, rP, rQ, eP, eQ, theta_damping_rates(params))


def regime_boundary(params, which="P", xtol=1e-15):
    """Frequency where the discriminant changes sign, located by bracketing root search."""
    c, v = _coefficients(params, which)
    guess = 2.0 * np.sqrt(c) / v
    return brentq(lambda x: discriminant(x, params, which), guess / 8, guess * 8,
                  xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def numerical_eigs(xi, params, which="P"):
    """Direct eigendecomposition of the Green matrix (oracle for the closed forms)."""
    return np.linalg.eigvals(green_matrix(xi, params, which))


# ------------------------------------------------------------ propagator


class LinearPropagator:
    """Exact solution operator of the linear flux/velocity system on a grid.

    Per-mode 2x2 exponentials are built in closed form and cached by time.
    Modes where the differentiation symbol vanishes (zero and Nyquist
    modes) are left unchanged."""

    def __init__(self, grid, params, cache_size=8):
        self.grid = grid
        self.params = params
        self._cache = {}
        self._cache_size = cache_size
        self.active = grid.kd2 > 0
        self.xi = grid.kdabs[self.active]

    def tables(self, t):
        t = float(t)
        if t < 0:
            raise ValueError("propagation time must be nonnegative")
        if t not in self._cache:
            xi, p = self.xi, self.params
            zero = np.zeros_like(xi)
            tabP = _kernels.expm2x2(zero, p.alpha * xi, -xi, -p.mu0 * xi * xi, t)
            tabQ = _kernels.expm2x2(zero, (1 + p.alpha) * xi, -xi, -p.nu * xi * xi, t)
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[t] = (tabP, tabQ)
        return self._cache[t]

    def apply_hat(self, theta_hat, u_hat, t):
        g = self.grid
        (p11, p12, p21, p22), (q11, q12, q21, q22) = self.tables(t)
        act = self.active
        xi = self.xi
        th_out = theta_hat.copy()
        u_out = u_hat.copy()
        thP = project_hat(g, theta_hat, "P")[:, act]
        thQ = project_hat(g, theta_hat, "Pperp")[:, act]
        uP = project_hat(g, u_hat, "P")[:, act]
        uQ = project_hat(g, u_hat, "Pperp")[:, act]
        th_out[:, act] = (p11 * thP + p12 * xi * uP) + (q11 * thQ + q12 * xi * uQ)
        u_out[:, act] = (p21 * thP / xi + p22 * uP) + (q21 * thQ / xi + q22 * uQ)
        return th_out, u_out

    def __call__(self, theta, u, t):
        g = self.grid
        th, uc = self.apply_hat(g.fft(theta), g.fft(u), t)
        return g.ifft(th), g.ifft(uc)


def propagate_linear(theta, u, t, params, grid):
    """Exact linear evolution of (theta, u) over time ``t`` from mean-zero data."""
    tc, uc = grid.fft(theta), grid.fft(u)
    _require_mean_zero(grid, tc)
    _require_mean_zero(grid, uc)
    th, un = LinearPropagator(grid, params).apply_hat(tc, uc, t)
    return grid.ifft(th), grid.ifft(un)


def weighted_energy(grid, theta_hat, u_hat, params):
    """Lyapunov functional of the linear system: (1/alpha)|Lambda^{-1} P theta|^2
    + |P u|^2 + (1/(1+alpha))|Lambda^{-1} Pperp theta|^2 + |Pperp u|^2.
    It is non-increasing along exact linear trajectories."""
    phi = lambda_power_hat(grid, project_hat(grid, theta_hat, "P"), -1)
    phq = lambda_power_hat(grid, project_hat(grid, theta_hat, "Pperp"), -1)
    return (grid.l2_hat(phi) ** 2 / params.alpha
            + grid.l2_hat(project_hat(grid, u_hat, "P")) ** 2
            + grid.l2_hat(phq) ** 2 / (1 + params.alpha)
            + grid.l2_hat(project_hat(grid, u_hat, "Pperp")) ** 2)


def mode_table(xi_list, params):
    return [green_eigs(x, params).row() for x in xi_list]


def check_params_for_modes(xi_list):
    bad = [x for x in xi_list if not x > 0]
    if bad:
        raise ConfigError(f"frequencies must be positive, got {bad}")
