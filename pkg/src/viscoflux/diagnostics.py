"""Energy functionals, decay fits and small-data reports over trajectories.

Every functional is assembled from the per-shell L2 norms a trajectory records
(``Trajectory.shells``), so the post-processing never touches full states.
Shells with ``2^j <= R0`` form the low-frequency part, the rest the high part.
Time integrals use the trapezoid rule on the recorded samples.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import lpx


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E_low: float
    E_high: float
    E_norm: float
    terms: dict = field(default_factory=dict)
    restricted: bool = False


def _cut(traj, t):
    times = np.asarray(traj.times)
    if t is None:
        return len(times)
    if t < -1e-12 or t > times[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"t = {t} lies outside the trajectory [0, {times[-1]}]")
    return int(np.searchsorted(times, t * (1 + 1e-12) + 1e-14, side="right"))


def _series(traj, name, upto):
    return traj.shell_series(name)[:upto]


def _running_integral(values, times):
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return np.zeros(len(values))
    dt = np.diff(times)
    inc = 0.5 * dt * (values[1:] + values[:-1])
    return np.concatenate([[0.0], np.cumsum(inc)])


def _weighted(series, exponent, js, mask):
    """Row-wise sum over masked shells of ``2^{j exponent} * series``."""
    w = np.where(mask, 2.0 ** (js * exponent), 0.0)
    return series @ w


def energy_terms(traj, R0=None, upto=None, include_pt=None):
    """Running energy terms at every recorded time up to index ``upto``.

    Returns a dict of arrays (one value per sample). ``include_pt=False``
    drops the ``(p, tau)`` contributions, giving the velocity/flux-only
    functionals; it is forced when the trajectory does not carry them."""
    part = traj.partition
    n = traj.grid.n
    upto = len(traj.times) if upto is None else upto
    times = np.asarray(traj.times[:upto])
    js = part.shells.astype(float)
    low = part.low_mask(part.R0 if R0 is None else R0)
    high = ~low
    has_pt = "p" in traj.shells
    include_pt = has_pt if include_pt is None else (include_pt and has_pt)

    u = _series(traj, "u", upto)
    th = _series(traj, "theta_m1", upto)
    lo_inst = _weighted(u + th, n / 2 - 1, js, low)
    hi_inst = _weighted(u, n / 2 - 1, js, high) + _weighted(th, n / 2, js, high)
    if include_pt:
        pt = _series(traj, "p", upto) + _series(traj, "tau", upto)
        lo_inst = lo_inst + _weighted(pt, n / 2 - 1, js, low)
        hi_inst = hi_inst + _weighted(pt, n / 2, js, high)
    terms = {
        "low_sup": np.maximum.accumulate(lo_inst),
        "low_int": _running_integral(_weighted(u + th, n / 2 + 1, js, low), times),
        "high_sup": np.maximum.accumulate(hi_inst),
        "high_int_u": _running_integral(_weighted(u, n / 2 + 1, js, high), times),
        "high_int_theta": _running_integral(_weighted(th, n / 2, js, high), times),
    }

    # solution norm: Chemin-Lerner sup per shell, then weighted sums
    hyb_lo = np.where(low, 2.0 ** (js * (n / 2 - 1)), 2.0 ** (js * n / 2))
    hyb_int = np.where(low, 2.0 ** (js * (n / 2 + 1)), 2.0 ** (js * n / 2))
    wu = 2.0 ** (js * (n / 2 - 1))
    wu1 = 2.0 ** (js * (n / 2 + 1))
    norm = np.maximum.accumulate(u, axis=0) @ wu
    norm = norm + _running_integral(u @ wu1, times)
    norm = norm + np.maximum.accumulate(th, axis=0) @ hyb_lo
    norm = norm + _running_integral(th @ hyb_int, times)
    if include_pt:
        norm = norm + (np.maximum.accumulate(_series(traj, "p", upto), axis=0)
                       + np.maximum.accumulate(_series(traj, "tau", upto), axis=0)) @ hyb_lo
    terms["E_norm"] = norm
    terms["E_low"] = terms["low_sup"] + terms["low_int"]
    terms["E_high"] = terms["high_sup"] + terms["high_int_u"] + terms["high_int_theta"]
    terms["t"] = times
    return terms


def energy_report(traj, t=None, R0=None, include_pt=None):
    """Energy functionals over ``[0, t]`` (default: the whole trajectory)."""
    upto = _cut(traj, t)
    if upto == 0:
        raise ValueError("empty trajectory")
    terms = energy_terms(traj, R0, upto, include_pt)
    last = {k: float(v[-1]) for k, v in terms.items()}
    restricted = "p" not in traj.shells or include_pt is False
    return EnergyReport(last["t"], last["E_low"], last["E_high"], last["E_norm"],
                        {k: v for k, v in last.items() if k not in ("t", "E_low", "E_high", "E_norm")},
                        restricted)


ENERGY_COLUMNS = ["t", "low_sup", "low_int", "high_sup", "high_int_u", "high_int_theta",
                  "E_low", "E_high", "E_norm"]


def energy_table(traj, R0=None):
    terms = energy_terms(traj, R0)
    return [[float(terms[c][i]) for c in ENERGY_COLUMNS] for i in range(len(terms["t"]))]


# ------------------------------------------------------------- decay fits


@dataclass(frozen=True)
class DecayFit:
    rate: float
    residual: float
    samples: int
    window: tuple


def peak_envelope(times, values):
    """Samples at the local maxima of ``values`` (interior points only)."""
    v = np.asarray(values, dtype=float)
    idx = [i for i in range(1, len(v) - 1) if v[i] >= v[i - 1] and v[i] > v[i + 1]]
    return np.asarray(times)[idx], v[idx]


def decay_fit(times, values, window=None, envelope=False, min_samples=10):
    """Exponential decay rate from a least-squares fit of ``log(values)``.

    ``envelope=True`` first reduces an oscillating signal to its local maxima."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, v = t[sel], v[sel]
    if len(t) < min_samples:
        raise ValueError(f"decay fit needs at least {min_samples} samples in the window, got {len(t)}")
    if np.any(~(v > 0)):
        raise ValueError("non-positive values in the fit window (blow-up or underflow)")
    if envelope:
        t, v = peak_envelope(t, v)
        if len(t) < 3:
            raise ValueError("fewer than 3 peaks in the fit window")
    coef, res, *_ = np.polyfit(t, np.log(v), 1, full=True)
    resid = math.sqrt(float(res[0]) / len(t)) if len(res) else 0.0
    win = (float(t[0]), float(t[-1]))
    return DecayFit(-float(coef[0]), resid, len(t), win)


def high_shell_theta_series(traj, R0=None):
    """High-frequency part of the hybrid norm of ``Lambda^{-1} theta`` per sample."""
    part = traj.partition
    n = traj.grid.n
    js = part.shells.astype(float)
    high = ~part.low_mask(part.R0 if R0 is None else R0)
    return _weighted(traj.shell_series("theta_m1"), n / 2, js, high)


# ------------------------------------------------------ small-data reports


def apriori_report(traj):
    """Smallest ``C`` with ``X(T) <= C (X0 + X(T)^2 (1 + X(T))^(n+3))`` over the
    sampled ``T``, where ``X`` is the running solution norm. A report only."""
    n = traj.grid.n
    X = energy_terms(traj)["E_norm"]
    X0 = float(X[0])
    den = X0 + X ** 2 * (1 + X) ** (n + 3)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(den > 0, X / np.where(den > 0, den, 1.0), 0.0)
    return {"C": float(ratio.max()) if len(ratio) else 0.0, "X0": X0, "X_T": float(X[-1]),
            "monotone": bool(np.all(np.diff(X) >= 0))}


@dataclass
class MonitorReport:
    passed: bool
    rows: list
    status: str


MONITOR_COLUMNS = ["quantity", "bound", "first_crossing", "max_value", "monitored"]


def theorem_monitor(traj, eta, M_report=10.0):
    """Track solution norms against ``M_report * eta``. Only the solution-norm
    functional decides pass/fail; growth of the other entries is reported."""
    part = traj.partition
    n = traj.grid.n
    bound = M_report * eta
    times = np.asarray(traj.times)
    hyb = lpx.BesovSpec(n / 2 - 1, n / 2)
    w_hyb, _ = lpx.weights(hyb, part)
    w_u = 2.0 ** (part.shells * (n / 2 - 1.0))
    series = {"E_norm": energy_terms(traj)["E_norm"]}
    if "p" in traj.shells:
        series["pt_hybrid"] = (traj.shell_series("p") + traj.shell_series("tau")) @ w_hyb
    series["u_besov"] = traj.shell_series("u") @ w_u
    series["flux_hybrid"] = traj.shell_series("theta_m1") @ w_hyb
    if "E" in traj.shells:
        series["F_minus_I"] = traj.shell_series("E") @ (2.0 ** (part.shells * (n / 2)))
    rows = []
    passed = True
    for name, s in series.items():
        over = np.flatnonzero(s > bound)
        first = float(times[over[0]]) if len(over) else None
        monitored = name == "E_norm"
        if monitored and first is not None:
            passed = False
        rows.append([name, bound, first, float(s.max()) if len(s) else 0.0, monitored])
    if not traj.ok:
        passed = False
    return MonitorReport(passed, rows, traj.status)


def interpolation_check(traj, fields=("u", "theta_m1", "p", "tau")):
    """Per-block interpolation counts for every recorded series, at the middle
    exponent n/2. Returns ``{field: (violations, summed_ok)}``."""
    out = {}
    for name in fields:
        if name in traj.shells and len(traj.times) >= 2:
            out[name] = lpx.interpolation_violations(traj.shell_series(name), traj.times,
                                                     traj.grid.n / 2, traj.partition)
    return out
