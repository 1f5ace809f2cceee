"""Named verification suites.

Each suite returns a list of ``Check`` records. Sizes are keyword arguments so
the command line can run a quick desk-scale version while the test-suite runs
the full one.
"""
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics, lpx, spectral
from .grid import FrequencyGrid
from .model import (FluidParams, PerturbationState, pressure_maps, rhs_perturbation,
                    theta_equation_residual)
from .solver import (InitSpec, LinearState, SimConfig, compare_formulations, cross_check,
                     initial_data, simulate, step)


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass", "fail" or "info"
    measured: float
    threshold: float
    detail: str = ""

    @property
    def passed(self):
        return self.status != "fail"

    def row(self):
        return [self.name, self.status, self.measured, self.threshold, self.detail]


CHECK_COLUMNS = ["name", "status", "measured", "threshold", "detail"]


def _below(name, measured, threshold, detail=""):
    ok = bool(np.isfinite(measured) and measured < threshold)
    return Check(name, "pass" if ok else "fail", float(measured), float(threshold), detail)


def _above(name, measured, threshold, detail=""):
    ok = bool(np.isfinite(measured) and measured >= threshold)
    return Check(name, "pass" if ok else "fail", float(measured), float(threshold), detail)


# ------------------------------------------------------------- harmonic


def near_orthogonality(part, fields=20, seed=0):
    """Max over fields and |j - k| >= 2 of ||D_j D_k f|| / ||f||."""
    g = part.grid
    rng = np.random.default_rng(seed)
    mult = part.multipliers
    J = len(part.shells)
    worst = 0.0
    for _ in range(fields):
        c = g.fft(g.random_field(rng, band=(1, g.N // 2)))
        norm = g.l2_hat(c)
        for a in range(J):
            for b in range(a + 2, J):
                worst = max(worst, g.l2_hat(mult[a] * mult[b] * c) / norm)
    return worst


def bony_error(part, pairs=50, seed=0, band=None):
    g = part.grid
    rng = np.random.default_rng(seed)
    band = band or (1, g.N // 4)
    worst = 0.0
    for _ in range(pairs):
        f = g.random_field(rng, band=band, slope=rng.uniform(0, 2))
        h = g.random_field(rng, band=band, slope=rng.uniform(0, 2))
        fg = lpx.product(f, h, g)
        total = lpx.paraproduct(f, h, part) + lpx.paraproduct(h, f, part) + lpx.remainder(f, h, part)
        worst = max(worst, (total - fg).l2() / fg.l2())
    return worst


def product_constant_stability(part, kind, s=None, t=None, pairs=100, seeds=(1, 2)):
    """(max ratio on corpus A, max ratio on corpus B)."""
    m = [float(np.max(lpx.product_ratios(part.grid, part, pairs, sd, kind=kind, s=s, t=t)))
         for sd in seeds]
    return m[0], m[1]


def hybrid_interpolation(part, seed=0, thetas=(0.25, 0.5, 0.75)):
    """Per-block and norm-level interpolation between two hybrid exponents.

    Returns (max per-block relative excess, max norm-level ratio)."""
    g = part.grid
    n = g.n
    rng = np.random.default_rng(seed)
    f = g.random_field(rng, band=(1, g.N // 3), slope=1.0)
    sh = lpx.shell_norms(f, part)
    (s1, g1), (s2, g2) = (n / 2 - 1, n / 2), (n / 2 + 1, n / 2 + 1)
    w1, _ = lpx.weights(lpx.BesovSpec(s1, g1), part)
    w2, _ = lpx.weights(lpx.BesovSpec(s2, g2), part)
    block_excess, norm_ratio = 0.0, 0.0
    for th in thetas:
        wt, _ = lpx.weights(lpx.BesovSpec(th * s1 + (1 - th) * s2, th * g1 + (1 - th) * g2), part)
        lhs = wt * sh
        rhs = (w1 * sh) ** th * (w2 * sh) ** (1 - th)
        nz = rhs > 0
        block_excess = max(block_excess, float(np.max((lhs[nz] - rhs[nz]) / rhs[nz])))
        norm_ratio = max(norm_ratio, float(np.sum(lhs) / (np.sum(w1 * sh) ** th * np.sum(w2 * sh) ** (1 - th))))
    return block_excess, norm_ratio


def time_interpolation(part, samples=50, seed=0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0, 3, samples))
    series = np.abs(rng.standard_normal((samples, len(part.shells)))) * np.exp(-times)[:, None]
    return lpx.interpolation_violations(series, times, part.grid.n / 2, part)


def embedding_check(part, seed=0):
    """max of hybrid(s1) / (C * hybrid(s2)) for s1 > s2 with the grid constant C."""
    g = part.grid
    n = g.n
    rng = np.random.default_rng(seed)
    f = g.random_field(rng, band=(1, g.N // 3))
    s1, s2, sig = n / 2, n / 2 - 1, n / 2
    low = part.low_mask()
    js = part.shells[low]
    C = max(1.0, float(np.max(2.0 ** (js * (s1 - s2))))) if len(js) else 1.0
    a = lpx.hybrid_norm(f, lpx.BesovSpec(s1, sig), part)
    b = lpx.hybrid_norm(f, lpx.BesovSpec(s2, sig), part)
    return a / (C * b)


def l2_equivalence(part, fields=10, seed=0):
    g = part.grid
    c1, c2 = lpx.l2_equivalence_constants(part)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fields):
        f = g.random_field(rng, band=(1, g.N // 2))
        sq = math.sqrt(float(np.sum(lpx.shell_norms(f, part) ** 2)))
        nf = g.l2(f)
        worst = max(worst, c1 * nf - sq, sq - c2 * nf)
    return c1, c2, worst


def harmonic_suite(n=2, N=64, R0=2.0, fields=20, bony_pairs=50, corpus=100, seed=0):
    out = []
    grid = FrequencyGrid(n, N)
    t0 = time.perf_counter()
    part = lpx.build_partition(grid, R0)
    homo, inhom = lpx.partition_residual(part)
    out.append(_below("partition_identity", homo, 1e-10))
    out.append(_below("partition_identity_inhomogeneous", inhom, 1e-10))
    out.append(_below("near_orthogonality", near_orthogonality(part, fields, seed), 1e-14))
    out.append(_below("partition_runtime_s", time.perf_counter() - t0, 10.0))
    out.append(_below("bony_identity", bony_error(part, bony_pairs, seed), 1e-10))
    for label, kind, s, t in (("product_besov_s_t", "besov", n / 2, n / 2 - 1),
                              ("product_besov_t_s", "besov", n / 2 - 1, n / 2),
                              ("product_hybrid", "hybrid", None, None)):
        a, b = product_constant_stability(part, kind, s, t, corpus, (seed + 1, seed + 2))
        out.append(Check(f"{label}_constant", "pass" if np.isfinite(a) and np.isfinite(b) else "fail",
                         max(a, b), math.inf, f"corpus maxima {a:.6g}, {b:.6g}"))
        out.append(_below(f"{label}_stability", abs(a / b - 1.0), 0.10))
    excess, ratio = hybrid_interpolation(part, seed)
    out.append(_below("hybrid_interpolation_per_block", excess, 1e-12))
    out.append(_below("hybrid_interpolation_norm_level", ratio - 1.0, 1e-12))
    viol, summed = time_interpolation(part, seed=seed)
    out.append(_below("time_interpolation_violations", viol, 1, f"summed form holds: {summed}"))
    out.append(_below("embedding_constant", embedding_check(part, seed) - 1.0, 1e-12))
    c1, c2, worst = l2_equivalence(part, seed=seed)
    out.append(_below("l2_equivalence", worst, 1e-12, f"c1={c1:.8f} c2={c2:.8f}"))
    return out


# ------------------------------------------------------------- spectrum


def spectrum_suite(params=None, samples=100, xi_range=(1e-2, 1e3)):
    params = params or FluidParams()
    t0 = time.perf_counter()
    eig_err, vieta = 0.0, 0.0
    for xi in np.logspace(math.log10(xi_range[0]), math.log10(xi_range[1]), samples):
        m = spectral.green_eigs(xi, params)
        for which, eigs in (("P", m.eigs_P), ("Pperp", m.eigs_Pperp)):
            cf = np.sort_complex(np.array(eigs))
            num = np.sort_complex(spectral.numerical_eigs(xi, params, which))
            eig_err = max(eig_err, float(np.max(np.abs(cf - num)) / np.max(np.abs(cf))))
        lp, lm = m.eigs_P
        sum_ref = -params.mu0 * xi * xi
        prod_ref = params.alpha * xi * xi
        vieta = max(vieta, abs((lp + lm) - sum_ref) / abs(sum_ref),
                    abs(lp * lm - prod_ref) / abs(prod_ref))
    out = [_below("closed_form_vs_eigendecomposition", eig_err, 1e-12,
                  "max |difference| / spectral radius"),
           _below("vieta_identities", vieta, 1e-10)]
    bP = spectral.regime_boundary(params, "P")
    out.append(_below("regime_boundary_P", abs(bP - 2 * math.sqrt(params.alpha) / params.mu0), 1e-12,
                      f"located at {bP!r}"))
    bQ = spectral.regime_boundary(params, "Pperp")
    out.append(_below("regime_boundary_Pperp",
                      abs(bQ - 2 * math.sqrt(1 + params.alpha) / params.nu), 1e-12, f"located at {bQ!r}"))
    rP, rQ = spectral.theta_damping_rates(params)
    far = spectral.green_eigs(1024.0, params)
    out.append(_below("slow_branch_P_limit", abs(-far.eigs_P[0].real - rP) / rP, 1e-2))
    out.append(_below("slow_branch_Pperp_limit", abs(-far.eigs_Pperp[0].real - rQ) / rQ, 1e-2))
    grid = FrequencyGrid(2, 64)
    xs = np.unique(np.round(grid.kdabs[grid.kdabs > 0], 12))
    re_max = max(max(l.real for l in spectral.green_eigs(x, params).eigs_P + spectral.green_eigs(x, params).eigs_Pperp)
                 for x in xs)
    out.append(_below("strict_stability_max_re", re_max, 0.0))
    out.append(_below("spectrum_runtime_s", time.perf_counter() - t0, 1.0))
    return out


# --------------------------------------------------------------- linear


def single_mode_error(grid, params, times=(0.1, 0.5, 1.0, 2.0, 5.0)):
    """Propagator vs eigenvalue oracle for single solenoidal and potential
    modes at |xi| in {1, 4}; relative to the initial amplitude."""
    x1, x2 = grid.x
    worst = 0.0
    prop = spectral.LinearPropagator(grid, params)
    for k in (1, 4):
        for which in ("P", "Pperp"):
            if which == "P":
                u = np.stack([np.sin(k * x2), np.zeros_like(x2)])
            else:
                u = np.stack([np.sin(k * x1), np.zeros_like(x1)])
            theta = np.zeros_like(u)
            m = spectral.green_eigs(float(k), params)
            l1, l2 = m.eigs_P if which == "P" else m.eigs_Pperp
            for t in times:
                if l1 == l2:
                    ref = (np.exp(l1 * t) * (1 + l1 * t)).real
                else:
                    ref = ((l1 * np.exp(l1 * t) - l2 * np.exp(l2 * t)) / (l1 - l2)).real
                _, ut = prop(theta, u, t)
                worst = max(worst, float(np.max(np.abs(ut - ref * u))))
    return worst


def euler_consistency_order(grid, params, seed=0, t=1e-3):
    rng = np.random.default_rng(seed)
    th = grid.fft(grid.random_field(rng, (grid.n,), (1, 6)))
    u = grid.fft(grid.random_field(rng, (grid.n,), (1, 6)))
    prop = spectral.LinearPropagator(grid, params)
    kd = grid.kd
    divu = grid.div_hat(u)
    dth = params.alpha * grid.kd2 * u - 1j * kd * divu
    du = -params.mu0 * grid.kd2 * u - (params.lambda0 + params.mu0) * kd * np.sum(kd * u, axis=0) - th
    errs = []
    for h in (t, t / 2):
        a, b = prop.apply_hat(th, u, h)
        errs.append(grid.l2_hat(a - (th + h * dth)) + grid.l2_hat(b - (u + h * du)))
    return math.log2(errs[0] / errs[1])


def energy_checks(grid, params, seed=0, T=5.0, samples=50):
    """(max increase of the weighted energy, max of ||y(t)|| / bound(t))."""
    rng = np.random.default_rng(seed)
    th = grid.fft(grid.random_field(rng, (grid.n,), (1, 10)))
    u = grid.fft(grid.random_field(rng, (grid.n,), (1, 10)))
    prop = spectral.LinearPropagator(grid, params)
    xs = np.unique(np.round(grid.kdabs[grid.kdabs > 0], 12))
    re_max, kappa = -math.inf, 1.0
    for x in xs:
        for which in ("P", "Pperp"):
            A = spectral.green_matrix(x, params, which)
            w, V = np.linalg.eig(A)
            re_max = max(re_max, float(w.real.max()))
            if abs(w[0] - w[1]) > 1e-8 * abs(w).max():
                kappa = max(kappa, float(np.linalg.cond(V)))

    def norm(a, b):
        return math.hypot(grid.l2_hat(spectral.lambda_power_hat(grid, a, -1)), grid.l2_hat(b))

    n0 = norm(th, u)
    E = [spectral.weighted_energy(grid, th, u, params)]
    worst_rise, worst_bound = 0.0, 0.0
    dt = T / samples
    a, b = th, u
    for k in range(1, samples + 1):
        a, b = prop.apply_hat(a, b, dt)
        E.append(spectral.weighted_energy(grid, a, b, params))
        worst_rise = max(worst_rise, (E[-1] - E[-2]) / E[0])
        worst_bound = max(worst_bound, norm(a, b) / (kappa * math.exp(re_max * k * dt) * n0))
    return worst_rise, worst_bound


def projection_checks(grid, seed=0):
    rng = np.random.default_rng(seed)
    f = grid.random_field(rng, (grid.n,))
    h = grid.random_field(rng, (grid.n,))
    P, Q = spectral.project(f, "P", grid), spectral.project(f, "Pperp", grid)
    scale = np.abs(f).max()
    errs = {"projection_sum": np.abs(P + Q - f).max() / scale,
            "projection_idempotent": np.abs(spectral.project(P, "P", grid) - P).max() / scale,
            "projection_orthogonal": abs(grid.inner(P, spectral.project(h, "Pperp", grid)))
            / (grid.l2(f) * grid.l2(h)),
            "pythagoras": abs(grid.l2(f) ** 2 - grid.l2(P) ** 2 - grid.l2(Q) ** 2) / grid.l2(f) ** 2}
    q = grid.random_field(rng)
    gq = grid.ifft(grid.grad_hat(grid.fft(q)))
    errs["gradient_solenoidal_part"] = np.abs(spectral.project(gq, "P", grid)).max() / np.abs(gq).max()
    s = grid.random_field(rng)
    lap = grid.ifft(-grid.lap_hat(grid.fft(s)))
    errs["lambda_square_is_minus_laplacian"] = (np.abs(spectral.lambda_power(s, 2, grid) - lap).max()
                                                / np.abs(lap).max())
    back = spectral.lambda_power(spectral.lambda_power(s, 1, grid), -1, grid)
    errs["lambda_inverse_pair"] = np.abs(back - s).max() / np.abs(s).max()
    return errs


def effective_velocity_residual(grid, params, seed=0):
    rng = np.random.default_rng(seed)
    u = grid.random_field(rng, (grid.n,))
    th = grid.random_field(rng, (grid.n,))
    w, wp = spectral.effective_velocities(u, th, params, grid)
    lap = lambda f: grid.ifft(grid.lap_hat(grid.fft(f)))
    Pu, Qu = spectral.project(u, "P", grid), spectral.project(u, "Pperp", grid)
    Pt, Qt = spectral.project(th, "P", grid), spectral.project(th, "Pperp", grid)
    worst = 0.0
    for visc, v, Vu, Vt in ((params.mu0, w, Pu, Pt), (params.nu, wp, Qu, Qt)):
        terms = (-visc * lap(v), visc * lap(Vu), Vt)
        scale = max(np.abs(x).max() for x in terms)
        worst = max(worst, np.abs(terms[0] + terms[1] - terms[2]).max() / scale)
    return worst


def linear_run_vs_closed_form(N=64, T=5.0, dt=0.01, params=None, seed=0):
    params = params or FluidParams()
    cfg = SimConfig(N=N, dt=dt, T_end=T, mode="linear", params=params, record_every=10 ** 9,
                    init=InitSpec(eta=1e-3, seed=seed, band=(1, min(10, N // 3 - 1))))
    st0 = initial_data(cfg)
    tr = simulate(cfg)
    th, u = spectral.propagate_linear(st0.theta, st0.u, T, params, cfg.grid)
    end = tr.final_state
    return max(np.abs(end.u - u).max() / np.abs(u).max(),
               np.abs(end.theta - th).max() / np.abs(th).max())


def theta_damping_fit(N=64, T=20.0, dt=0.05, params=None, seed=0):
    """Linear run; fit the high-frequency hybrid norm of Lambda^{-1} theta
    after one viscous time of the lowest high shell."""
    params = params or FluidParams()
    cfg = SimConfig(N=N, dt=dt, T_end=T, mode="linear", params=params, record_every=1,
                    init=InitSpec(eta=1e-3, seed=seed, band=(1, min(12, N // 3 - 1))))
    tr = simulate(cfg)
    part = tr.partition
    series = diagnostics.high_shell_theta_series(tr)
    j_low_high = int(part.shells[~part.low_mask()][0])
    t_visc = 1.0 / (params.mu0 * 4.0 ** j_low_high)
    fit = diagnostics.decay_fit(tr.times, series, window=(t_visc, T))
    return fit, min(spectral.theta_damping_rates(params))


def low_shell_envelope_fit(N=32, T=30.0, dt=0.05, params=None):
    """Single solenoidal mode at |xi| = 1 under the exact propagator: fitted
    envelope rate of |u| and the predicted ``-Re lambda``."""
    params = params or FluidParams()
    grid = FrequencyGrid(2, N)
    x1, x2 = grid.x
    u = np.stack([np.sin(x2), np.zeros_like(x2)])
    th = np.stack([0.3 * np.cos(x2), np.zeros_like(x2)])
    prop = spectral.LinearPropagator(grid, params)
    ts = np.arange(0.0, T + 1e-12, dt)
    amps = []
    a, b = grid.fft(th), grid.fft(u)
    for k, t in enumerate(ts):
        if k:
            a, b = prop.apply_hat(a, b, dt)
        amps.append(grid.l2_hat(b))
    fit = diagnostics.decay_fit(ts, amps, envelope=True)
    return fit, -spectral.green_eigs(1.0, params).eigs_P[0].real


def linear_suite(N=64, T=5.0, damping_T=20.0, params=None, seed=0):
    params = params or FluidParams()
    grid = FrequencyGrid(2, N)
    out = []
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    th = grid.random_field(rng, (2,), (1, N // 3))
    u = grid.random_field(rng, (2,), (1, N // 3))
    prop = spectral.LinearPropagator(grid, params)
    a0, b0 = prop(th, u, 0.0)
    out.append(_below("propagator_identity_at_zero",
                      max(np.abs(a0 - th).max(), np.abs(b0 - u).max()) / np.abs(u).max(), 1e-12))
    a1, b1 = prop(*prop(th, u, 0.37), 0.91)
    a2, b2 = prop(th, u, 1.28)
    out.append(_below("semigroup", max(np.abs(a1 - a2).max(), np.abs(b1 - b2).max())
                      / max(np.abs(a2).max(), np.abs(b2).max()), 1e-12))
    out.append(_below("single_mode_envelopes", single_mode_error(grid, params), 1e-10))
    out.append(_below("linear_run_vs_closed_form", linear_run_vs_closed_form(N, T, 0.01, params, seed), 1e-10))
    out.append(_above("euler_consistency_order", euler_consistency_order(grid, params, seed), 1.95))
    rise, bound = energy_checks(grid, params, seed)
    out.append(_below("weighted_energy_increase", rise, 1e-12))
    out.append(_below("eigenvector_envelope_bound", bound - 1.0, 1e-12))
    out.append(_below("linear_runtime_s", time.perf_counter() - t0, 30.0))
    for name, val in projection_checks(grid, seed).items():
        out.append(_below(name, val, 1e-12))
    out.append(_below("effective_velocity_identities", effective_velocity_residual(grid, params, seed), 1e-12))
    t1 = time.perf_counter()
    fit, target = theta_damping_fit(N, damping_T, params=params, seed=seed)
    out.append(_below("theta_high_shell_damping", abs(fit.rate - target) / target, 0.20,
                      f"fitted {fit.rate:.6g} vs {target:.6g}"))
    out.append(_below("theta_damping_runtime_s", time.perf_counter() - t1, 120.0))
    efit, pred = low_shell_envelope_fit(params=params)
    out.append(_below("low_shell_envelope_rate", abs(efit.rate - pred) / pred, 0.05,
                      f"fitted {efit.rate:.6g} vs {pred:.6g}"))
    ts = np.linspace(0, 5, 51)
    synth = diagnostics.decay_fit(ts, 3.0 * np.exp(-2.0 * ts))
    out.append(_below("decay_fit_self_test", abs(synth.rate - 2.0), 1e-10))
    return out


# ------------------------------------------------------------ nonlinear


def equilibrium_drift(N=32):
    worst = 0.0
    for mode in ("perturbation", "primitive", "linear"):
        for scheme in ("etdrk2", "imex_bdf2"):
            cfg = SimConfig(N=N, mode=mode, scheme=scheme, init=InitSpec(eta=0.0))
            st = initial_data(cfg)
            new = step(st, cfg.dt, cfg)
            for name in vars(st):
                worst = max(worst, float(np.max(np.abs(getattr(new, name) - getattr(st, name)))))
    return worst


def mass_drift(N=64, T=10.0, dt=0.01, eta=1e-3, seed=0):
    cfg = SimConfig(N=N, dt=dt, T_end=T, mode="primitive", record_every=100,
                    init=InitSpec(eta=eta, seed=seed))
    tr = simulate(cfg)
    m = tr.scalar_series("mean_rho")
    return float(np.max(np.abs(m - m[0]))), tr.ok


def random_perturbation_state(grid, params, eta, seed, band):
    rng = np.random.default_rng(seed)
    n = grid.n
    a = grid.random_field(rng, (), band, eta)
    u = grid.random_field(rng, (n,), band, eta)
    t = grid.random_field(rng, (n, n), band, eta)
    t = 0.5 * (t + np.swapaxes(t, 0, 1))
    return PerturbationState(a, pressure_maps(a, params)[0], t, u)


def theta_consistency(N=64, samples=5, eta=1e-2, params=None):
    params = params or FluidParams(mu1=0.3, lambda1=0.2)
    grid = FrequencyGrid(2, N)
    worst, sym = 0.0, 0.0
    for s in range(samples):
        st = random_perturbation_state(grid, params, eta, s, (1, N // 8))
        worst = max(worst, theta_equation_residual(st, params, grid))
        F3 = rhs_perturbation(st, params, grid)[2]
        sym = max(sym, float(np.abs(F3 - np.swapaxes(F3, 0, 1)).max() / np.abs(F3).max()))
    return worst, sym


def refinement_order(N=64, T=0.5, dt=1e-2, eta=1e-3, seed=0, mode="perturbation"):
    finals = []
    for r in range(4):
        cfg = SimConfig(N=N, dt=dt / 2 ** r, T_end=T, mode=mode, record_every=10 ** 9,
                        init=InitSpec(eta=eta, seed=seed))
        finals.append(simulate(cfg).final_state)
    g = FrequencyGrid(2, N)
    e = [g.l2(finals[i].u - finals[i + 1].u) for i in range(3)]
    return min(math.log2(e[0] / e[1]), math.log2(e[1] / e[2]))


def compatibility_ratio(levels=((32, 0.02), (64, 0.01)), T=1.0, eta=1e-2, seed=3):
    res = []
    for N, dt in levels:
        cfg = SimConfig(N=N, dt=dt, T_end=T, mode="primitive", record_every=10 ** 9,
                        init=InitSpec(eta=eta, band=(1, 2), compatible=True, seed=seed))
        tr = simulate(cfg)
        res.append(tr.scalar_series("compat_l2")[-1])
    return res[0] / res[1], res


def boundedness(N=64, T=50.0, dt=1e-2, eta=1e-3, seed=0, M=10.0):
    cfg = SimConfig(N=N, dt=dt, T_end=T, record_every=10, init=InitSpec(eta=eta, seed=seed))
    tr = simulate(cfg)
    mon = diagnostics.theorem_monitor(tr, eta, M)
    E = diagnostics.energy_terms(tr)["E_norm"]
    return mon, float(E.max() / E[0]), tr


def linear_fidelity(N=64, T=1.0, dt=1e-2, eta=1e-5, seed=0):
    """Relative deviation of the nonlinear velocity from the linear one."""
    base = SimConfig(N=N, dt=dt, T_end=T, record_every=10 ** 9, init=InitSpec(eta=eta, seed=seed))
    nl = simulate(base).final_state
    lin = simulate(replace(base, mode="linear")).final_state
    g = base.grid
    return g.l2(nl.u - lin.u) / g.l2(lin.u)


def nonlinear_suite(N=64, mass_T=2.0, bound_T=5.0, params=None, seed=0):
    out = []
    drift = equilibrium_drift(32)
    out.append(_below("equilibrium_fixed_point", drift, 1e-14))
    md, ok = mass_drift(N, mass_T, seed=seed)
    out.append(_below("mean_density_drift", md if ok else math.inf, 1e-12, f"T = {mass_T}"))
    res, sym = theta_consistency(N)
    out.append(_below("theta_equation_consistency", res, 1e-8))
    out.append(_below("stress_term_symmetry", sym, 1e-12))
    out.append(_above("perturbation_dt_order", refinement_order(N, seed=seed), 1.9))
    ratio, _ = compatibility_ratio()
    out.append(_above("compatibility_refinement_ratio", ratio, 3.0))
    dev = linear_fidelity(N, seed=seed)
    out.append(_below("linear_regime_fidelity_over_eta", dev / 1e-5, 10.0,
                      f"relative deviation {dev:.3e} at eta = 1e-5"))
    mon, growth, tr = boundedness(N, bound_T, seed=seed)
    out.append(Check("small_data_boundedness", "pass" if mon.passed else "fail",
                     float(mon.rows[0][3]), float(mon.rows[0][1]), f"T = {bound_T}, growth {growth:.3f}"))
    viol = sum(v for v, _ in diagnostics.interpolation_check(tr).values())
    out.append(_below("interpolation_violations", viol, 1))
    rep = diagnostics.apriori_report(tr)
    out.append(Check("apriori_constant", "info", rep["C"], math.nan, "report only"))
    return out


# ---------------------------------------------------------- consistency


def consistency_suite(N=64, T=1.0, dt=1e-2, eta=1e-3, seed=0):
    cfg = SimConfig(N=N, dt=dt, T_end=T, record_every=10, init=InitSpec(eta=eta, seed=seed))
    good = cross_check(cfg, 3)
    bad = cross_check(cfg, 3, convention="transpose")
    out = [_above("cross_check_order", good.min_order, 1.9,
                  "residuals " + ", ".join(f"{r['max']:.3e}" for r in good.residuals))]
    stall = bad.residuals[-1]["max"] / good.residuals[-1]["max"]
    out.append(_below("mutation_order", max(bad.orders), 0.5,
                      "residuals " + ", ".join(f"{r['max']:.3e}" for r in bad.residuals)))
    out.append(_above("mutation_residual_gap", stall, 100.0))
    eq = compare_formulations(replace(cfg, T_end=0.1, init=InitSpec(eta=0.0)))
    out.append(_below("equilibrium_residual", eq["max"], 1e-14))
    return out


SUITES = {
    "harmonic": harmonic_suite,
    "spectrum": spectrum_suite,
    "linear": linear_suite,
    "nonlinear": nonlinear_suite,
    "consistency": consistency_suite,
}


def run_suite(name, **kwargs):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](**kwargs)
