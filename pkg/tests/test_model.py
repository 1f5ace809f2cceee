import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscoflux import model
from viscoflux.errors import (ConfigError, MeanNonZeroError, SingularDeformationError,
                              VacuumError)
from viscoflux.model import FluidParams, PerturbationState, PrimitiveState
from viscoflux.verify import random_perturbation_state


def _const(grid, M):
    M = np.asarray(M, dtype=float)
    return M.reshape(M.shape + (1,) * grid.n) * np.ones(grid.shape)


def test_params_validation():
    for bad in (dict(mu0=0.0), dict(alpha=-1.0), dict(gamma=0.0), dict(mu0=1.0, lambda0=-3.0),
                dict(delta_det=-0.1)):
        with pytest.raises(ConfigError):
            FluidParams(**bad)
    p = FluidParams(mu0=1.0, lambda0=0.5)
    assert p.nu == 2.5
    assert not p.variable_viscosity and FluidParams(mu1=0.1).variable_viscosity


def test_default_R0():
    # transitions at 2 sqrt(alpha)/mu0 = 2 and 2 sqrt(1+alpha)/nu = sqrt(2)
    assert FluidParams().default_R0() == 2.0
    assert FluidParams(mu0=0.25).default_R0() == 8.0


def test_tau_from_F_oracle(grid32):
    F = _const(grid32, np.diag([2.0, 1.0]))
    tau = model.tau_from_F(F)
    np.testing.assert_allclose(tau[:, :, 0, 0], np.diag([1.0, -0.5]), atol=1e-15)
    rot = np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]])
    np.testing.assert_allclose(model.tau_from_F(_const(grid32, rot)), 0.0, atol=1e-15)


def test_tau_from_F_guard_names_point(grid32):
    F = _const(grid32, np.eye(2))
    F[0, 0, 3, 5] = 0.05
    with pytest.raises(SingularDeformationError, match=r"\(3, 5\)"):
        model.tau_from_F(F, delta_det=0.1)


def test_pressure_maps_oracle():
    p, K, I = model.pressure_maps(np.array([0.1]), FluidParams(gamma=2.0))
    assert K[0] == pytest.approx(0.21, rel=1e-14)
    assert I[0] == pytest.approx(0.090909090909090909, rel=1e-14)
    assert p[0] == pytest.approx(0.105, rel=1e-14)
    with pytest.raises(VacuumError):
        model.pressure_maps(np.array([-1.0]), FluidParams())


@settings(max_examples=200, deadline=None)
@given(a=st.floats(-0.9, 5.0), gamma=st.floats(1.0, 3.0))
def test_density_pressure_inverse(a, gamma):
    prm = FluidParams(gamma=gamma)
    p = model.pressure_maps(np.array([a]), prm)[0]
    assert model.density_from_pressure(p, prm)[0] == pytest.approx(a, rel=1e-12, abs=1e-13)


def test_density_from_pressure_vacuum():
    with pytest.raises(VacuumError):
        model.density_from_pressure(np.array([-1.0]), FluidParams(gamma=1.4))


def test_perturbation_from_primitive(grid32):
    x1, x2 = grid32.x
    prm = FluidParams()
    rho = 1.0 + 0.1 * np.sin(x1)
    st_ = PrimitiveState(rho, np.zeros((2,) + grid32.shape), _const(grid32, np.eye(2)))
    pert = model.perturbation_from_primitive(st_, prm, grid32)
    np.testing.assert_allclose(pert.a, 0.1 * np.sin(x1), atol=1e-15)
    pert.check(prm)
    with pytest.raises(MeanNonZeroError):
        model.perturbation_from_primitive(PrimitiveState(rho + 0.01, st_.u, st_.F), prm, grid32)


def test_perturbation_state_check(grid32, params):
    st_ = PerturbationState.zeros(grid32)
    st_.check(params)
    st_.tau[0, 1] = 1.0
    with pytest.raises(ValueError):
        st_.check(params)


def test_effective_flux_oracle(grid32):
    x1, x2 = grid32.x
    prm = FluidParams(alpha=2.0)
    st_ = PerturbationState.zeros(grid32)
    st_.tau[0, 1] = st_.tau[1, 0] = np.sin(x2)
    fl = model.effective_fluxes(st_, prm, grid32)
    np.testing.assert_allclose(fl.theta[0], -2.0 * np.cos(x2), atol=1e-12)
    np.testing.assert_allclose(fl.theta[1], 0.0, atol=1e-12)
    np.testing.assert_allclose(fl.gflux, st_.tau, atol=1e-15)


def test_stress_term_oracle_and_mutation(grid32, params):
    x1, x2 = grid32.x
    st_ = PerturbationState.zeros(grid32)
    st_.u[0] = np.sin(x2)
    st_.tau[1, 1] = np.sin(x1)
    F1, F2, F3 = model.rhs_perturbation(st_, params, grid32)
    ref = np.sin(x1) * np.cos(x2)
    np.testing.assert_allclose(F3[0, 1], ref, atol=1e-12)
    np.testing.assert_allclose(F3[1, 0], ref, atol=1e-12)
    np.testing.assert_allclose(F3[0, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(F1, 0.0, atol=1e-12)
    np.testing.assert_allclose(F2, 0.0, atol=1e-12)
    # swapping the gradient convention kills this term entirely
    F3t = model.rhs_perturbation(st_, params, grid32, convention="transpose")[2]
    np.testing.assert_allclose(F3t, 0.0, atol=1e-12)


def test_momentum_nonlinearity_oracle(grid32, params):
    x1, x2 = grid32.x
    st_ = PerturbationState.zeros(grid32)
    st_.u[0] = np.sin(x1)
    F2 = model.rhs_perturbation(st_, params, grid32)[1]
    # -(u . grad) u = -sin x1 cos x1
    np.testing.assert_allclose(F2[0], -np.sin(x1) * np.cos(x1), atol=1e-12)


def test_theta_equation_consistency(grid64):
    prm = FluidParams(mu1=0.3, lambda1=0.2)
    for seed in range(3):
        st_ = random_perturbation_state(grid64, prm, 1e-2, seed, (1, 8))
        assert model.theta_equation_residual(st_, prm, grid64) < 1e-10


def test_flux_rhs_shapes(grid32, params):
    st_ = random_perturbation_state(grid32, params, 1e-2, 0, (1, 4))
    Ft1, Ft3, G = model.rhs_flux(st_, params, grid32)
    assert Ft1.shape == (2,) + grid32.shape and Ft3.shape == (2,) + grid32.shape
    assert G.shape == (2, 2) + grid32.shape


def test_snapshot_roundtrip(tmp_path, grid32, rng):
    fields = {"a": rng.standard_normal(grid32.shape),
              "tau": rng.standard_normal((2, 2) + grid32.shape)}
    path = tmp_path / "s.vflx"
    model.write_snapshot(path, grid32, 1.25, fields, "perturbation")
    header, back = model.read_snapshot(path)
    assert header["t"] == 1.25 and header["N"] == 32 and header["mode"] == "perturbation"
    assert [f["name"] for f in header["fields"]] == ["a", "tau"]
    for k in fields:
        np.testing.assert_array_equal(back[k], fields[k])
    raw = path.read_bytes()
    assert raw[:4] == b"VFLX"
    bad = tmp_path / "bad.vflx"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        model.read_snapshot(bad)
