import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscoflux import diagnostics
from viscoflux.solver import InitSpec, SimConfig, simulate


@pytest.fixture(scope="module")
def traj():
    return simulate(SimConfig(N=32, T_end=2.0, record_every=5, init=InitSpec(eta=1e-3, seed=1)))


@pytest.fixture(scope="module")
def lin_traj():
    return simulate(SimConfig(N=32, T_end=2.0, mode="linear", record_every=5,
                              init=InitSpec(eta=1e-3, seed=1)))


@settings(max_examples=50, deadline=None)
@given(rate=st.floats(0.01, 5.0), amp=st.floats(1e-6, 1e3))
def test_decay_fit_exact_on_exponentials(rate, amp):
    t = np.linspace(0, 3, 40)
    fit = diagnostics.decay_fit(t, amp * np.exp(-rate * t))
    assert fit.rate == pytest.approx(rate, rel=1e-8, abs=1e-10)
    assert fit.residual < 1e-8 and fit.samples == 40


def test_decay_fit_window_and_errors():
    t = np.linspace(0, 10, 101)
    v = np.where(t < 2, 1.0, np.exp(-0.5 * (t - 2)))
    fit = diagnostics.decay_fit(t, v, window=(2.0, 10.0))
    assert fit.rate == pytest.approx(0.5, rel=1e-10) and fit.window == (2.0, 10.0)
    with pytest.raises(ValueError, match="at least"):
        diagnostics.decay_fit(t[:5], v[:5])
    with pytest.raises(ValueError, match="non-positive"):
        diagnostics.decay_fit(t, v - 1.0)


def test_envelope_fit_of_damped_oscillation():
    t = np.linspace(0, 30, 3001)
    v = np.abs(np.exp(-0.5 * t) * np.cos(0.8660254 * t))
    tp, vp = diagnostics.peak_envelope(t, v)
    assert len(tp) > 5
    fit = diagnostics.decay_fit(t, v, envelope=True)
    assert fit.rate == pytest.approx(0.5, rel=1e-3)


def test_energy_terms_structure(traj):
    terms = diagnostics.energy_terms(traj)
    n = len(traj.times)
    for key in ("low_sup", "low_int", "high_sup", "high_int_u", "high_int_theta", "E_norm"):
        assert terms[key].shape == (n,)
        assert np.all(np.diff(terms[key]) >= 0), key
    assert terms["low_int"][0] == 0.0
    np.testing.assert_allclose(terms["E_low"], terms["low_sup"] + terms["low_int"])


def test_energy_report_and_cut(traj):
    rep = diagnostics.energy_report(traj, t=1.0)
    assert rep.t == pytest.approx(1.0) and not rep.restricted
    full = diagnostics.energy_report(traj)
    assert full.E_norm >= rep.E_norm
    with pytest.raises(ValueError):
        diagnostics.energy_report(traj, t=5.0)
    rows = diagnostics.energy_table(traj)
    assert len(rows) == len(traj.times) and len(rows[0]) == len(diagnostics.ENERGY_COLUMNS)


def test_linear_trajectory_energy_is_restricted(lin_traj, traj):
    rep = diagnostics.energy_report(lin_traj)
    assert rep.restricted
    # without (p, tau) the perturbation run's norm reduces to the velocity/flux part
    a = diagnostics.energy_terms(traj, include_pt=False)["E_norm"]
    b = diagnostics.energy_terms(traj)["E_norm"]
    assert np.all(a <= b)


def test_energy_norm_starts_at_initial_hybrid_size(traj):
    E0 = diagnostics.energy_terms(traj)["E_norm"][0]
    # initial norm = smallness (1e-3) + hybrid norm of Lambda^{-1} theta
    assert E0 > 1e-3 and E0 < 1e-2


def test_high_shell_theta_series(traj):
    s = diagnostics.high_shell_theta_series(traj)
    assert s.shape == (len(traj.times),) and np.all(s > 0)


def test_theorem_monitor(traj):
    mon = diagnostics.theorem_monitor(traj, 1e-3, 10.0)
    assert mon.passed and mon.status == "ok"
    names = [r[0] for r in mon.rows]
    assert names[0] == "E_norm" and "pt_hybrid" in names
    assert all(r[2] is None for r in mon.rows)
    tight = diagnostics.theorem_monitor(traj, 1e-3, 1.0)
    assert not tight.passed and tight.rows[0][2] == 0.0


def test_apriori_report(traj):
    rep = diagnostics.apriori_report(traj)
    assert rep["monotone"] and rep["C"] > 0 and math.isfinite(rep["C"])
    assert rep["X0"] <= rep["X_T"]


def test_interpolation_check(traj):
    res = diagnostics.interpolation_check(traj)
    assert set(res) == {"u", "theta_m1", "p", "tau"}
    assert all(v == 0 and ok for v, ok in res.values())
