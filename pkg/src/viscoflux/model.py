"""State algebra of the compressible Oldroyd system.

Variables around the equilibrium (rho, F, u) = (1, I, 0):

    a = rho - 1,   p = Pi(1 + a) - Pi(1),   tau = F F^T / det F - I,

with the pressure law ``Pi(rho) = rho**gamma / gamma`` (so ``Pi'(1) = 1``).
Velocity gradients follow ``(grad u)_ij = d_j u_i`` and the divergence of a
matrix acts on its last index. ``convention="transpose"`` swaps the gradient
convention inside the quadratic stress terms; it exists only so the solver
cross-check can show that the swap is detected.
"""
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, MeanNonZeroError, SingularDeformationError, VacuumError


@dataclass(frozen=True)
class FluidParams:
    mu0: float = 1.0
    lambda0: float = 0.0
    alpha: float = 1.0
    gamma: float = 1.4
    # affine viscosity laws mu(rho) = mu0 + mu1 (rho - 1), same for lambda
    mu1: float = 0.0
    lambda1: float = 0.0
    delta_det: float = 0.1

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ConfigError(f"mu0 must be positive, got {self.mu0}")
        if not self.lambda0 + 2 * self.mu0 > 0:
            raise ConfigError("lambda0 + 2 mu0 must be positive")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.delta_det >= 0:
            raise ConfigError("delta_det must be nonnegative")

    @property
    def nu(self):
        """Longitudinal viscosity ``lambda0 + 2 mu0``."""
        return self.lambda0 + 2 * self.mu0

    @property
    def variable_viscosity(self):
        return self.mu1 != 0.0 or self.lambda1 != 0.0

    def pressure(self, rho):
        return rho ** self.gamma / self.gamma

    def mu_tilde(self, a):
        return self.mu1 * a

    def lambda_tilde(self, a):
        return self.lambda1 * a

    def default_R0(self):
        """Hybrid threshold at the larger eigenvalue-regime transition, rounded
        up to a power of two."""
        r = max(2 * np.sqrt(self.alpha) / self.mu0, 2 * np.sqrt(1 + self.alpha) / self.nu)
        return float(2.0 ** np.ceil(np.log2(r)))


@dataclass
class PrimitiveState:
    rho: np.ndarray
    u: np.ndarray
    F: np.ndarray

    def check(self, params):
        if np.min(self.rho) <= 0:
            raise VacuumError(f"density reached {np.min(self.rho):.3e}")
        _, det = _tau_det(self.F)
        _guard_det(det, params.delta_det, self.F.shape[2:])


@dataclass
class PerturbationState:
    """Perturbation variables. Zero modes are kept (they carry mass and the
    mean stress); homogeneous analysis strips them explicitly."""

    a: np.ndarray
    p: np.ndarray
    tau: np.ndarray
    u: np.ndarray

    @classmethod
    def zeros(cls, grid):
        n, s = grid.n, grid.shape
        return cls(np.zeros(s), np.zeros(s), np.zeros((n, n) + s), np.zeros((n,) + s))

    @classmethod
    def from_pressure(cls, p, tau, u, params):
        return cls(density_from_pressure(p, params), p, tau, u)

    def check(self, params, tol=1e-12):
        if np.min(self.a) <= -1:
            raise VacuumError(f"a reached {np.min(self.a):.3e}")
        asym = np.max(np.abs(self.tau - np.swapaxes(self.tau, 0, 1)))
        if asym > tol * max(1.0, np.max(np.abs(self.tau))):
            raise ValueError(f"tau is not symmetric (max asymmetry {asym:.2e})")
        p_from_a = pressure_maps(self.a, params)[0]
        if np.max(np.abs(p_from_a - self.p)) > 1e-12 * max(1.0, np.max(np.abs(self.p))):
            raise ValueError("p is inconsistent with a")


@dataclass
class FluxPair:
    theta: np.ndarray
    gflux: np.ndarray


# ---------------------------------------------------------------- algebra


def _tau_det(F):
    n = F.shape[0]
    flat = F.reshape(n, n, -1)
    tau, det = _kernels.tau_from_F(flat)
    return tau.reshape(F.shape), det.reshape(F.shape[2:])


def _guard_det(det, delta, shape):
    if det.min() <= delta:
        idx = np.unravel_index(int(np.argmin(det)), shape)
        raise SingularDeformationError(
            f"det F = {det.min():.4g} <= {delta:g} at grid point {tuple(int(i) for i in idx)}")


def tau_from_F(F, delta_det=0.1):
    """``F F^T / det F - I`` at every grid point."""
    tau, det = _tau_det(np.asarray(F, dtype=float))
    _guard_det(det, delta_det, F.shape[2:])
    return tau


def pressure_maps(a, params):
    """``(p, K(a), I(a))`` with ``K = Pi'(1+a)(1+a) - 1`` and ``I = a/(1+a)``."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= -1):
        raise VacuumError(f"vacuum: a reached {a.min():.4g} <= -1")
    rho = 1.0 + a
    rg = rho ** params.gamma
    p = (rg - 1.0) / params.gamma
    K = rg - 1.0
    return p, K, a / rho


def density_from_pressure(p, params):
    """Inverse of ``a -> Pi(1+a) - Pi(1)`` (closed form for the gamma law)."""
    base = 1.0 + params.gamma * np.asarray(p, dtype=float)
    if np.any(base <= 0):
        raise VacuumError("pressure perturbation below the vacuum value")
    return base ** (1.0 / params.gamma) - 1.0


def perturbation_from_primitive(state, params, grid, tol=1e-12):
    """Map (rho, u, F) to (a, p, tau, u); the density perturbation must be mean-zero."""
    a = state.rho - 1.0
    if abs(float(np.mean(a))) > tol * max(1.0, float(np.max(np.abs(a)))):
        raise MeanNonZeroError(f"mean of rho - 1 is {np.mean(a):.3e}; the torus "
                               "convention requires mean density 1")
    p, _, _ = pressure_maps(a, params)
    return PerturbationState(a, p, tau_from_F(state.F, params.delta_det), state.u.copy())


# ------------------------------------------------------ spectral helpers


def _phys(grid, c):
    return grid.ifft(c)


def _dealias(grid, values):
    return grid.dealias(grid.fft(values))


def jacobian(grid, u_hat):
    """Physical ``J[i, j] = d_j u_i``."""
    return _phys(grid, grid.grad_hat(u_hat))


def _advect(grid, u, c):
    """Physical ``u . grad f`` for the field with coefficients ``c``."""
    lead = c.ndim - grid.n
    g = np.moveaxis(_phys(grid, grid.grad_hat(c)), lead, 0)
    uu = u.reshape((grid.n,) + (1,) * lead + grid.shape)
    return np.sum(uu * g, axis=0)


def _stretch(J, tau):
    n = J.shape[0]
    shape = J.shape[2:]
    out = _kernels.stretch(J.reshape(n, n, -1), tau.reshape(n, n, -1))
    return out.reshape((n, n) + shape)


def _A_hat(grid, u_hat, params):
    """Lame operator ``mu0 Lap u + (lambda0 + mu0) grad div u``."""
    div = grid.div_hat(u_hat)
    return -params.mu0 * grid.kd2 * u_hat + (params.lambda0 + params.mu0) * 1j * grid.kd * div


def _theta_hat(grid, p_hat, tau_hat, params):
    return grid.grad_hat(p_hat) - params.alpha * grid.div_hat(tau_hat)


def effective_fluxes(state, params, grid):
    """``theta = grad p - alpha div tau`` and ``G = tau - p Id``."""
    theta = _phys(grid, _theta_hat(grid, grid.fft(state.p), grid.fft(state.tau), params))
    n = grid.n
    gflux = state.tau - state.p[None, None] * np.eye(n).reshape((n, n) + (1,) * n)
    return FluxPair(theta, gflux)


# --------------------------------------------------- nonlinear right sides


@dataclass
class _Work:
    """Physical fields shared by the right-hand sides."""

    u: np.ndarray
    J: np.ndarray
    div: np.ndarray
    K: np.ndarray
    I: np.ndarray
    a: np.ndarray
    p_hat: np.ndarray
    tau_hat: np.ndarray
    u_hat: np.ndarray
    tau: np.ndarray = field(repr=False)


def _work(grid, a, p_hat, tau_hat, u_hat, params):
    u = _phys(grid, u_hat)
    J = jacobian(grid, u_hat)
    div = np.einsum("ii...->...", J)
    _, K, I = pressure_maps(a, params)
    return _Work(u, J, div, K, I, a, p_hat, tau_hat, u_hat, _phys(grid, tau_hat))


def _F_hats(grid, w, params, convention="jacobian"):
    n = grid.n
    F1 = grid.dealias(grid.fft(-w.K * w.div))

    Au_hat = _A_hat(grid, w.u_hat, params)
    theta = _phys(grid, _theta_hat(grid, w.p_hat, w.tau_hat, params))
    adv = np.einsum("ij...,j...->i...", w.J, w.u)
    F2_phys = -w.I * _phys(grid, Au_hat) - adv + w.I * theta
    F2 = grid.fft(F2_phys)
    if params.variable_viscosity:
        D = 0.5 * (w.J + np.swapaxes(w.J, 0, 1))
        eye = np.eye(n).reshape((n, n) + (1,) * n)
        S = 2 * params.mu_tilde(w.a) * D + params.lambda_tilde(w.a) * w.div * eye
        divS = _phys(grid, grid.div_hat(grid.dealias(grid.fft(S))))
        F2 = F2 + grid.fft(divS / (1.0 + w.a))
    F2 = grid.dealias(F2)

    Jc = w.J if convention == "jacobian" else np.swapaxes(w.J, 0, 1)
    F3 = grid.dealias(grid.fft(_stretch(Jc, w.tau)))
    return F1, F2, F3


def rhs_perturbation(state, params, grid, convention="jacobian"):
    """Nonlinear terms (F1, F2, F3) of the perturbation system, dealiased, in
    physical space."""
    w = _work(grid, state.a, grid.fft(state.p), grid.fft(state.tau), grid.fft(state.u), params)
    return tuple(_phys(grid, c) for c in _F_hats(grid, w, params, convention))


def _flux_hats(grid, w, F1, F3):
    grad_p = _phys(grid, grid.grad_hat(w.p_hat))
    Kdiv = grid.dealias(grid.fft(w.K * w.div))
    Jt_gradp = np.einsum("ki...,k...->i...", w.J, grad_p)
    Ft1 = -grid.grad_hat(Kdiv) - grid.dealias(grid.fft(Jt_gradp))
    grad_tau = _phys(grid, grid.grad_hat(w.tau_hat))  # [i, j, k] = d_k tau_ij
    G = np.einsum("kj...,ijk...->i...", w.J, grad_tau)
    Ft3 = -grid.dealias(grid.fft(G)) + grid.div_hat(F3)
    n = grid.n
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    return Ft1, Ft3, F3 - F1[None, None] * eye


def rhs_flux(state, params, grid):
    """(F~1, F~3, F3 - F1 Id): right sides of the theta and G equations."""
    w = _work(grid, state.a, grid.fft(state.p), grid.fft(state.tau), grid.fft(state.u), params)
    F1, _, F3 = _F_hats(grid, w, params)
    return tuple(_phys(grid, c) for c in _flux_hats(grid, w, F1, F3))


def theta_equation_residual(state, params, grid):
    """Relative mismatch between d/dt theta assembled from the (p, tau)
    equations and the closed theta equation. Zero up to round-off for
    band-limited states whose pairwise products stay inside the 2/3 box."""
    n = grid.n
    w = _work(grid, state.a, grid.fft(state.p), grid.fft(state.tau), grid.fft(state.u), params)
    F1, _, F3 = _F_hats(grid, w, params)
    Ft1, Ft3, _ = _flux_hats(grid, w, F1, F3)
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    div_hat = grid.fft(w.div)
    D2_hat = grid.fft(w.J + np.swapaxes(w.J, 0, 1))

    adv_p = grid.dealias(grid.fft(_advect(grid, w.u, w.p_hat)))
    adv_tau = grid.dealias(grid.fft(_advect(grid, w.u, w.tau_hat)))
    dp = -adv_p - div_hat + F1
    dtau = -adv_tau - div_hat[None, None] * eye + D2_hat + F3
    route_a = grid.grad_hat(dp) - params.alpha * grid.div_hat(dtau)

    theta_hat = _theta_hat(grid, w.p_hat, w.tau_hat, params)
    adv_theta = grid.dealias(grid.fft(_advect(grid, w.u, theta_hat)))
    route_b = (-adv_theta - params.alpha * grid.lap_hat(w.u_hat)
               - grid.grad_hat(div_hat) + Ft1 - params.alpha * Ft3)
    scale = grid.l2_hat(route_b)
    return grid.l2_hat(route_a - route_b) / scale if scale > 0 else grid.l2_hat(route_a)


def perturbation_nonlinear_hats(grid, params, p_hat, u_hat, tau_hat, convention="jacobian"):
    """Everything but the constant-coefficient linear part of the perturbation
    system, as dealiased coefficients ``(N_p, N_u, N_tau)``."""
    a = density_from_pressure(_phys(grid, p_hat), params)
    w = _work(grid, a, p_hat, tau_hat, u_hat, params)
    F1, F2, F3 = _F_hats(grid, w, params, convention)
    adv_p = grid.dealias(grid.fft(_advect(grid, w.u, p_hat)))
    adv_tau = grid.dealias(grid.fft(_advect(grid, w.u, tau_hat)))
    return F1 - adv_p, F2, F3 - adv_tau, w


def linearized_stress_hat(grid, E_hat):
    """First-order part of ``F F^T / det F - I`` at ``F = I + E``."""
    n = grid.n
    tr = np.einsum("ii...->...", E_hat)
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    return E_hat + np.swapaxes(E_hat, 0, 1) - tr[None, None] * eye


def primitive_nonlinear_hats(grid, params, a_hat, u_hat, E_hat):
    """Full right side of the (rho, u, F) system minus its linearization at
    the equilibrium, for ``a = rho - 1`` and ``E = F - I``.

    Returns dealiased ``(N_a, N_u, N_E)`` plus the physical ``u`` and
    ``det F`` used along the way."""
    n = grid.n
    a = _phys(grid, a_hat)
    u = _phys(grid, u_hat)
    E = _phys(grid, E_hat)
    J = jacobian(grid, u_hat)
    rho = 1.0 + a
    if np.min(rho) <= 0:
        raise VacuumError(f"density reached {np.min(rho):.3e}")
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    tau, det = _tau_det(E + eye)
    _guard_det(det, params.delta_det, grid.shape)

    Na = -grid.div_hat(grid.dealias(grid.fft(a[None] * u)))

    p = (rho ** params.gamma - 1.0) / params.gamma
    force_hat = _A_hat(grid, u_hat, params) - grid.grad_hat(grid.fft(p)) \
        + params.alpha * grid.div_hat(grid.fft(tau))
    if params.variable_viscosity:
        div = np.einsum("ii...->...", J)
        D = 0.5 * (J + np.swapaxes(J, 0, 1))
        S = 2 * params.mu_tilde(a) * D + params.lambda_tilde(a) * div * eye
        force_hat = force_hat + grid.div_hat(grid.fft(S))
    adv = np.einsum("ij...,j...->i...", J, u)
    full_u = grid.dealias(grid.fft(_phys(grid, force_hat) / rho - adv))
    lin_u = (_A_hat(grid, u_hat, params) - grid.grad_hat(a_hat)
             + params.alpha * grid.div_hat(linearized_stress_hat(grid, E_hat)))
    Nu = full_u - grid.dealias(lin_u)

    JE = np.einsum("ik...,kj...->ij...", J, E)
    NE = grid.dealias(grid.fft(JE - _advect(grid, u, E_hat)))
    return Na, Nu, NE, u, det


# ------------------------------------------------------------- snapshots

SNAPSHOT_MAGIC = b"VFLX"
SNAPSHOT_VERSION = 1


def write_snapshot(path, grid, t, fields, mode=""):
    """Binary snapshot: magic, version (u32), header length (u32), JSON header,
    then each field as little-endian float64 in header order."""
    header = {
        "version": SNAPSHOT_VERSION, "n": grid.n, "N": grid.N, "L": grid.L,
        "t": float(t), "mode": mode,
        "fields": [{"name": k, "shape": list(np.shape(v))} for k, v in fields.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, len(hb)))
        fh.write(hb)
        for v in fields.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a snapshot file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        header = json.loads(fh.read(hlen))
        fields = {}
        for entry in header["fields"]:
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            fields[entry["name"]] = data.reshape(entry["shape"]).astype(float)
    return header, fields
