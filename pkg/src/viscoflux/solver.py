"""Pseudo-spectral time integration in three formulations.

* ``perturbation``: unknowns ``(p, u, tau)``;
* ``primitive``: unknowns ``(a = rho - 1, u, E = F - I)``;
* ``linear``: unknowns ``(theta, u)`` advanced by the exact propagator.

The nonlinear formulations split each right side into the constant-coefficient
linearization at the equilibrium, a dense ``m x m`` matrix per Fourier mode
handled exactly through matrix exponentials, and the remainder, evaluated
pseudo-spectrally with 2/3 dealiasing. Only modes inside the dealiasing box
are stored.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from . import _kernels, lpx
from .errors import (BlowUpError, ConfigError, InstabilityError, SingularDeformationError,
                     VacuumError)
from .grid import FrequencyGrid
from .model import (FluidParams, PerturbationState, PrimitiveState, density_from_pressure,
                    perturbation_from_primitive, perturbation_nonlinear_hats,
                    primitive_nonlinear_hats)
from .spectral import LinearPropagator, lambda_power_hat, project_hat

MODES = ("perturbation", "primitive", "linear")
SCHEMES = ("etdrk2", "imex_bdf2")


@dataclass(frozen=True)
class InitSpec:
    """Random initial perturbation: Fourier band (in lattice units), target
    smallness ``eta``, spectral slope and seed."""

    eta: float = 1e-3
    seed: int = 0
    band: tuple = (1, 4)
    slope: float = 0.0
    compatible: bool = False

    def __post_init__(self):
        if not self.eta >= 0:
            raise ConfigError(f"eta must be nonnegative, got {self.eta}")
        lo, hi = self.band
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid band {self.band}")


@dataclass(frozen=True)
class SimConfig:
    n: int = 2
    N: int = 64
    L: float = 2 * math.pi
    dt: float = 1e-2
    T_end: float = 1.0
    scheme: str = "etdrk2"
    mode: str = "perturbation"
    params: FluidParams = field(default_factory=FluidParams)
    init: InitSpec = field(default_factory=InitSpec)
    record_every: int = 10
    cfl: float = 0.5
    R0: float = None
    convention: str = "jacobian"
    keep_states: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.convention not in ("jacobian", "transpose"):
            raise ConfigError(f"unknown gradient convention {self.convention!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.T_end >= 0:
            raise ConfigError(f"T_end must be nonnegative, got {self.T_end}")
        if int(self.record_every) < 1:
            raise ConfigError("record_every must be at least 1")
        if not 0 < self.cfl <= 1:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        self.grid  # validates n, N, L
        if self.init.band[1] >= self.N / 3:
            raise ConfigError(f"initial band {tuple(self.init.band)} exceeds the dealiased "
                              f"range |k| < N/3 = {self.N / 3:.3g}")

    @property
    def grid(self):
        return FrequencyGrid(self.n, self.N, self.L)

    @property
    def threshold(self):
        return self.params.default_R0() if self.R0 is None else float(self.R0)

    def partition(self):
        return lpx.build_partition(self.grid, self.threshold)


@dataclass
class LinearState:
    theta: np.ndarray
    u: np.ndarray


# ------------------------------------------------------------ initial data


def smallness(grid, part, p, tau, u):
    """``||(p, tau)||`` in the hybrid space with exponents (n/2-1, n/2)
    plus ``||u||`` in the homogeneous space of order n/2-1."""
    n = grid.n
    hyb = lpx.BesovSpec(n / 2 - 1, n / 2)
    return (lpx.hybrid_norm(p, hyb, part, check_mean=False)
            + lpx.hybrid_norm(tau, hyb, part, check_mean=False)
            + lpx.besov_norm(u, lpx.BesovSpec(n / 2 - 1), part, check_mean=False))


def _compatible_pair(grid, E):
    """Density and deformation with ``rho det F = 1`` and divergence-free
    columns of ``rho F``.

    The columns of ``v = I + P E`` are divergence-free; ``rho F = v`` and
    ``rho det F = 1`` force ``rho = det(v)^(1/(n-1))``. A scalar rescaling of
    ``v`` then sets the mean density to 1."""
    n = grid.n
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    v = eye + np.stack([grid.ifft(project_hat(grid, grid.fft(E[:, k]), "P")) for k in range(n)],
                       axis=1)
    _, det_v = _kernels_det(v)
    if det_v.min() <= 0:
        raise SingularDeformationError("projected deformation is degenerate")
    rho = det_v ** (1.0 / (n - 1))
    # det(s v) = s^n det v, so rho scales by s^(n/(n-1))
    s = np.mean(rho) ** (-(n - 1.0) / n)
    v = s * v
    rho = rho * s ** (n / (n - 1.0))
    return rho, v / rho


def _kernels_det(F):
    n = F.shape[0]
    tau, det = _kernels.tau_from_F(F.reshape(n, n, -1))
    return tau.reshape(F.shape), det.reshape(F.shape[2:])


def _primitive_from_shapes(grid, params, c, a_shape, u_shape, E_shape, compatible):
    n = grid.n
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    u = c * u_shape
    if compatible:
        rho, F = _compatible_pair(grid, c * E_shape)
    else:
        rho, F = 1.0 + c * a_shape, eye + c * E_shape
    rho = grid.ifft(grid.dealias(grid.fft(rho)))
    F = grid.ifft(grid.dealias(grid.fft(F)))
    return PrimitiveState(rho, grid.ifft(grid.dealias(grid.fft(u))), F)


def initial_primitive(config):
    """Random band-limited primitive state calibrated so the smallness
    functional equals ``eta``; deterministic in the seed."""
    grid, params, init = config.grid, config.params, config.init
    n = grid.n
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    if init.eta == 0:
        return PrimitiveState(np.ones(grid.shape), np.zeros((n,) + grid.shape), eye + 0 * grid.x[0])
    rng = np.random.default_rng(init.seed)
    band = tuple(init.band)
    a_shape = grid.random_field(rng, (), band, 1.0, init.slope)
    u_shape = grid.random_field(rng, (n,), band, 1.0, init.slope)
    E_shape = grid.random_field(rng, (n, n), band, 1.0, init.slope)
    part = config.partition()

    def measure(c):
        st = _primitive_from_shapes(grid, params, c, a_shape, u_shape, E_shape, init.compatible)
        pert = perturbation_from_primitive(st, params, grid, tol=1e-10)
        return smallness(grid, part, pert.p, pert.tau, pert.u)

    def gap(c):
        try:
            return measure(c) - init.eta
        except (VacuumError, SingularDeformationError):
            return math.inf

    hi = init.eta / measure(1e-6) * 1e-6
    while gap(hi) < 0:
        hi *= 2.0
    if not math.isfinite(gap(hi)):
        lo_ = 0.0
        for _ in range(200):
            mid = 0.5 * (lo_ + hi)
            if math.isfinite(gap(mid)):
                lo_ = mid
            else:
                hi = mid
        if gap(lo_) < 0:
            raise ConfigError(f"eta = {init.eta} is too large: the initial deformation "
                              "degenerates before the target size is reached")
        hi = lo_
    c = brentq(gap, 0.0, hi, xtol=1e-16 * max(hi, 1e-300), rtol=1e-15, maxiter=500)
    return _primitive_from_shapes(grid, params, c, a_shape, u_shape, E_shape, init.compatible)


def _dealiased(grid, x):
    return grid.ifft(grid.dealias(grid.fft(x)))


def initial_data(config):
    """Initial state for ``config.mode``; the three modes share the same draw."""
    grid, params = config.grid, config.params
    prim = initial_primitive(config)
    if config.mode == "primitive":
        return prim
    pert = perturbation_from_primitive(prim, params, grid, tol=1e-10)
    pert = PerturbationState(pert.a, _dealiased(grid, pert.p), _dealiased(grid, pert.tau), pert.u)
    if config.mode == "perturbation":
        return pert
    th = grid.ifft(grid.grad_hat(grid.fft(pert.p)) - params.alpha * grid.div_hat(grid.fft(pert.tau)))
    return LinearState(th, pert.u.copy())


# ------------------------------------------------------ per-mode operator


def _layout(n):
    """Index ranges of the packed state: (scalar, vector, matrix)."""
    return slice(0, 1), slice(1, 1 + n), slice(1 + n, 1 + n + n * n)


def linear_operator(kvecs, params, mode):
    """Per-mode linearization, shape ``(K, m, m)`` for wavevectors ``(n, K)``.

    Packed unknowns: ``(s, u_1..u_n, M_11, M_12, ..., M_nn)`` with
    ``s = p`` or ``a`` and ``M = tau`` (perturbation) or ``E`` (primitive)."""
    n, K = kvecs.shape
    m = 1 + n + n * n
    ik = 1j * kvecs
    k2 = np.sum(kvecs ** 2, axis=0)
    L = np.zeros((K, m, m), dtype=complex)
    ui = lambda i: 1 + i
    Mij = lambda i, j: 1 + n + n * i + j
    for i in range(n):
        L[:, 0, ui(i)] = -ik[i]
        L[:, ui(i), 0] = -ik[i]
        # Lame symbol: -mu0 |k|^2 u - (lambda0 + mu0) k (k . u)
        L[:, ui(i), ui(i)] -= params.mu0 * k2
        for j in range(n):
            L[:, ui(i), ui(j)] -= (params.lambda0 + params.mu0) * kvecs[i] * kvecs[j]
    al = params.alpha
    if mode == "perturbation":
        for i in range(n):
            for j in range(n):
                L[:, ui(i), Mij(i, j)] += al * ik[j]
                L[:, Mij(i, j), ui(i)] += ik[j]
                L[:, Mij(i, j), ui(j)] += ik[i]
            for l in range(n):
                L[:, Mij(i, i), ui(l)] += -ik[l]
    elif mode == "primitive":
        for i in range(n):
            for j in range(n):
                # alpha div(E + E^T - tr E I)
                L[:, ui(i), Mij(i, j)] += al * ik[j]
                L[:, ui(i), Mij(j, i)] += al * ik[j]
                L[:, Mij(i, j), ui(i)] += ik[j]
            for l in range(n):
                L[:, ui(i), Mij(l, l)] += -al * ik[i]
    else:
        raise ValueError(mode)
    return L


class _Packer:
    def __init__(self, grid):
        self.grid = grid
        self.flat = np.flatnonzero(grid.dealias_mask.ravel())
        self.K = self.flat.size
        self.kvecs = grid.kd.reshape(grid.n, -1)[:, self.flat]
        self.zero = int(np.flatnonzero(self.flat == 0)[0])
        self.size = int(np.prod(grid.hat_shape))

    def pack(self, *hats):
        return np.concatenate([h.reshape(-1, self.size)[:, self.flat] for h in hats], axis=0)

    def unpack(self, y, lead):
        out = np.zeros((y.shape[0], self.size), dtype=complex)
        out[:, self.flat] = y
        return out.reshape(tuple(lead) + self.grid.hat_shape)


class Stepper:
    """One-step map of a nonlinear formulation for a fixed grid and parameters."""

    def __init__(self, config):
        if config.mode == "linear":
            raise ValueError("use LinearPropagator for the linear mode")
        self.config = config
        self.grid = config.grid
        self.params = config.params
        self.mode = config.mode
        self.packer = _Packer(self.grid)
        self.L = linear_operator(self.packer.kvecs, self.params, self.mode)
        self.m = self.L.shape[1]
        self._phi = {}
        self._bdf = {}
        self._history = None
        self.last_u = None
        self.last_det = None

    # packing
    def pack_state(self, state):
        g = self.grid
        if self.mode == "perturbation":
            s, M = state.p, state.tau
        else:
            n = g.n
            s, M = state.rho - 1.0, state.F - np.eye(n).reshape((n, n) + (1,) * n)
        return self.packer.pack(g.fft(s)[None], g.fft(state.u), g.fft(M))

    def _split(self, y):
        n = self.grid.n
        S, U, M = _layout(n)
        return (self.packer.unpack(y[S], (1,))[0], self.packer.unpack(y[U], (n,)), self.packer.unpack(y[M], (n, n)))

    def unpack_state(self, y):
        g = self.grid
        s_hat, u_hat, M_hat = self._split(y)
        s, u, M = g.ifft(s_hat), g.ifft(u_hat), g.ifft(M_hat)
        if self.mode == "perturbation":
            return PerturbationState(density_from_pressure(s, self.params), s, M, u)
        n = g.n
        return PrimitiveState(1.0 + s, u, M + np.eye(n).reshape((n, n) + (1,) * n))

    # nonlinear part
    def nonlinear(self, y):
        g = self.grid
        s_hat, u_hat, M_hat = self._split(y)
        try:
            if self.mode == "perturbation":
                Ns, Nu, NM, w = perturbation_nonlinear_hats(
                    g, self.params, s_hat, u_hat, M_hat, self.config.convention)
                self.last_u = w.u
            else:
                Ns, Nu, NM, u, det = primitive_nonlinear_hats(g, self.params, s_hat, u_hat, M_hat)
                self.last_u, self.last_det = u, det
        except (SingularDeformationError, VacuumError) as exc:
            raise BlowUpError(str(exc)) from exc
        return self.packer.pack(Ns[None], Nu, NM)

    # linear tables
    def phi_tables(self, dt):
        if dt not in self._phi:
            K, m = self.L.shape[0], self.m
            B = np.zeros((K, 3 * m, 3 * m), dtype=complex)
            B[:, :m, :m] = dt * self.L
            B[:, :m, m:2 * m] = np.eye(m)
            B[:, m:2 * m, 2 * m:] = np.eye(m)
            E = scipy.linalg.expm(B)
            self._phi = {dt: (np.ascontiguousarray(E[:, :m, :m]),
                              np.ascontiguousarray(E[:, :m, m:2 * m]),
                              np.ascontiguousarray(E[:, :m, 2 * m:]))}
        return self._phi[dt]

    def _bdf_inverse(self, dt):
        if dt not in self._bdf:
            A = 3.0 * np.eye(self.m) - 2.0 * dt * self.L
            self._bdf = {dt: np.ascontiguousarray(np.linalg.inv(A))}
        return self._bdf[dt]

    def reset(self):
        self._history = None

    def etdrk2(self, y, dt, Ny=None):
        e, p1, p2 = self.phi_tables(dt)
        Ny = self.nonlinear(y) if Ny is None else Ny
        a = _kernels.apply_modewise(e, y) + dt * _kernels.apply_modewise(p1, Ny)
        Na = self.nonlinear(a)
        return a + dt * _kernels.apply_modewise(p2, Na - Ny), Ny

    def step(self, y, dt):
        """Advance packed coefficients by ``dt``; the density zero mode is frozen."""
        zero = self.packer.zero
        s0 = y[0, zero]
        if self.config.scheme == "etdrk2" or self._history is None or self._history[2] != dt:
            y_new, Ny = self.etdrk2(y, dt)
        else:
            y_prev, N_prev, _ = self._history
            Ny = self.nonlinear(y)
            rhs = 4.0 * y - y_prev + 2.0 * dt * (2.0 * Ny - N_prev)
            y_new = _kernels.apply_modewise(self._bdf_inverse(dt), rhs)
        if self.config.scheme == "imex_bdf2":
            self._history = (y, Ny, dt)
        if self.mode == "primitive":
            y_new[0, zero] = s0
        return y_new


def step(state, dt, config):
    """Advance a single state by one step of ``config.scheme`` (``linear``: exact)."""
    if config.mode == "linear":
        g = config.grid
        th, u = LinearPropagator(g, config.params).apply_hat(g.fft(state.theta), g.fft(state.u), dt)
        return LinearState(g.ifft(th), g.ifft(u))
    st = Stepper(replace(config, scheme="etdrk2"))
    y = st.step(st.pack_state(state), dt)
    _check_finite(y, 1)
    return st.unpack_state(y)


def _check_finite(y, k):
    if not np.all(np.isfinite(y)):
        raise InstabilityError(f"non-finite values after step {k}")


# ------------------------------------------------------------- trajectory


@dataclass
class Trajectory:
    config: SimConfig
    times: list = field(default_factory=list)
    shells: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    final_state: object = None
    status: str = "ok"
    error: str = None
    steps: int = 0

    def __post_init__(self):
        self.grid = self.config.grid
        self.partition = self.config.partition()

    def shell_series(self, name):
        return np.array(self.shells[name])

    def scalar_series(self, name):
        return np.array(self.scalars[name])

    @property
    def ok(self):
        return self.status == "ok"


def record_fields(grid, params, state):
    """Coefficients of the diagnosed fields of a state (zero modes kept)."""
    out = {}
    if isinstance(state, LinearState):
        out["u"] = grid.fft(state.u)
        out["theta"] = grid.fft(state.theta)
    else:
        if isinstance(state, PrimitiveState):
            n = grid.n
            E = state.F - np.eye(n).reshape((n, n) + (1,) * n)
            out["E"] = grid.fft(E)
            state = perturbation_from_primitive(state, params, grid, tol=1e-8)
        out["a"] = grid.fft(state.a)
        out["p"] = grid.fft(state.p)
        out["tau"] = grid.fft(state.tau)
        out["u"] = grid.fft(state.u)
        out["theta"] = (grid.grad_hat(out["p"]) - params.alpha * grid.div_hat(out["tau"]))
    out["theta_m1"] = lambda_power_hat(grid, out["theta"], -1)
    return out


def _record(traj, t, state, params):
    g, part = traj.grid, traj.partition
    fields_hat = record_fields(g, params, state)
    traj.times.append(float(t))
    for name, c in fields_hat.items():
        traj.shells.setdefault(name, []).append(lpx.shell_norms_hat(c, part))
    sc = {"max_u": float(np.max(np.sqrt(np.sum(state.u ** 2, axis=0))))}
    if isinstance(state, PrimitiveState):
        sc["mean_rho"] = float(np.mean(state.rho))
        _, det = _kernels_det(state.F)
        sc["min_det"] = float(det.min())
        sc["compat_l2"] = g.l2(state.rho * det - 1.0)
    elif isinstance(state, PerturbationState):
        sc["mean_rho"] = float(1.0 + np.mean(state.a))
    for k, v in sc.items():
        traj.scalars.setdefault(k, []).append(v)
    if traj.config.keep_states:
        traj.states.append(state)


def simulate(config, on_record=None):
    """Run to ``T_end`` recording every ``record_every`` steps. Blow-up and
    instability end the run early: the partial trajectory is returned with
    ``status`` and ``error`` set. ``on_record(traj, state)`` is called after
    every recorded sample."""
    grid, params = config.grid, config.params
    traj = Trajectory(config)
    state = initial_data(config)
    dt = float(config.dt)
    nsteps = int(math.ceil(config.T_end / dt - 1e-9)) if config.T_end > 0 else 0
    if nsteps:
        dt = config.T_end / nsteps
    every = int(config.record_every)
    _record(traj, 0.0, state, params)
    if on_record:
        on_record(traj, state)
    if nsteps == 0:
        traj.final_state = state
        return traj

    if config.mode == "linear":
        prop = LinearPropagator(grid, params)
        th, u = grid.fft(state.theta), grid.fft(state.u)
        for k in range(1, nsteps + 1):
            th, u = prop.apply_hat(th, u, dt)
            if k % every == 0 or k == nsteps:
                state = LinearState(grid.ifft(th), grid.ifft(u))
                _record(traj, k * dt, state, params)
                if on_record:
                    on_record(traj, state)
        traj.steps = nsteps
        traj.final_state = LinearState(grid.ifft(th), grid.ifft(u))
        return traj

    stepper = Stepper(config)
    y = stepper.pack_state(state)
    cap_base = config.cfl * grid.dx
    umax = float(np.max(np.abs(state.u)))
    while dt > cap_base / max(1.0, umax):
        dt, nsteps, every = 0.5 * dt, 2 * nsteps, 2 * every
    k, t0, k0, total = 0, 0.0, 0, 0
    try:
        while k < nsteps:
            y = stepper.step(y, dt)
            k += 1
            total += 1
            _check_finite(y, k)
            umax = float(np.max(np.abs(stepper.last_u)))
            t = t0 + (k - k0) * dt
            if k % every == 0 or k == nsteps:
                state = stepper.unpack_state(y)
                _record(traj, t, state, params)
                if on_record:
                    on_record(traj, state)
            if dt > cap_base / max(1.0, umax) and k < nsteps:
                remaining = nsteps - k
                while dt > cap_base / max(1.0, umax):
                    dt, remaining, every = 0.5 * dt, 2 * remaining, 2 * every
                t0, k0 = t, 0
                nsteps, k = remaining, 0
                stepper.reset()
    except BlowUpError as exc:
        traj.status, traj.error = "blowup", str(exc)
    except InstabilityError as exc:
        traj.status, traj.error = "instability", str(exc)
    traj.steps = total
    try:
        traj.final_state = stepper.unpack_state(y)
    except (SingularDeformationError, VacuumError):
        traj.final_state = None
    return traj


# ------------------------------------------------------------ cross-check


def _rel(x, ref, grid):
    den = grid.l2(ref)
    return grid.l2(x - ref) / den if den > 0 else grid.l2(x)


def compare_formulations(config):
    """Run the primitive and perturbation formulations from the same draw and
    return per-field maxima over snapshots of relative L2 residuals."""
    grid, params = config.grid, config.params
    base = replace(config, keep_states=True)
    prim = simulate(replace(base, mode="primitive", convention="jacobian"))
    pert = simulate(replace(base, mode="perturbation"))
    for tr in (prim, pert):
        if not tr.ok:
            raise BlowUpError(f"{tr.config.mode} run failed: {tr.error}")
    res = {"tau": 0.0, "p": 0.0, "u": 0.0}
    for sp, sq in zip(prim.states, pert.states):
        conv = perturbation_from_primitive(sp, params, grid, tol=1e-8)
        res["tau"] = max(res["tau"], _rel(conv.tau, sq.tau, grid))
        res["p"] = max(res["p"], _rel(conv.p, sq.p, grid))
        res["u"] = max(res["u"], _rel(sp.u, sq.u, grid))
    res["max"] = max(res.values())
    return res


@dataclass
class CrossCheckReport:
    levels: list
    residuals: list
    orders: list

    @property
    def min_order(self):
        return min(self.orders) if self.orders else math.nan


def cross_check(config, refinements=3, convention="jacobian"):
    """Formulation-equivalence study under dt-halving. ``convention`` is passed
    to the perturbation run only, so ``"transpose"`` injects a mismatch."""
    levels, residuals = [], []
    for r in range(refinements):
        cfg = replace(config, dt=config.dt / 2 ** r, record_every=config.record_every * 2 ** r,
                      convention=convention)
        levels.append(cfg.dt)
        residuals.append(compare_formulations(cfg))
    orders = []
    for a, b in zip(residuals, residuals[1:]):
        if a["max"] > 0 and b["max"] > 0:
            orders.append(math.log2(a["max"] / b["max"]))
        else:
            orders.append(math.inf)
    return CrossCheckReport(levels, residuals, orders)
