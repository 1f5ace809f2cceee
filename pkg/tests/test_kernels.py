import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscoflux import _kernels

pytestmark = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")

IMPLS = [_kernels.numpy_impl, _kernels.numba_impl]


def _random_F(rng, n, P):
    return np.eye(n)[:, :, None] + 0.2 * rng.standard_normal((n, n, P))


@pytest.mark.parametrize("n", [2, 3])
def test_tau_from_F_backends_agree(n):
    rng = np.random.default_rng(0)
    F = _random_F(rng, n, 500)
    (ta, da), (tb, db) = (impl.tau_from_F(F) for impl in IMPLS)
    np.testing.assert_allclose(ta, tb, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(da, db, rtol=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_stretch_backends_agree(n):
    rng = np.random.default_rng(1)
    J = rng.standard_normal((n, n, 400))
    tau = rng.standard_normal((n, n, 400))
    tau = 0.5 * (tau + tau.transpose(1, 0, 2))
    a, b = (impl.stretch(J, tau) for impl in IMPLS)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


def test_stretch_matches_definition():
    rng = np.random.default_rng(2)
    J = rng.standard_normal((2, 2, 7))
    tau = rng.standard_normal((2, 2, 7))
    tau = tau + tau.transpose(1, 0, 2)
    div = J[0, 0] + J[1, 1]
    ref = np.einsum("ikp,kjp->ijp", J, tau) + np.einsum("ikp,jkp->ijp", tau, J) - div * tau
    for impl in IMPLS:
        np.testing.assert_allclose(impl.stretch(J, tau), ref, rtol=1e-13, atol=1e-14)


def test_apply_modewise_backends_agree():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((300, 7, 7)) + 1j * rng.standard_normal((300, 7, 7))
    y = rng.standard_normal((7, 300)) + 1j * rng.standard_normal((7, 300))
    a, b = (impl.apply_modewise(M, y) for impl in IMPLS)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(a[:, 5], M[5] @ y[:, 5], rtol=1e-13)


def _mp_expm(a, b, c, d, t):
    mpmath.mp.dps = 40
    E = mpmath.expm(mpmath.matrix([[a, b], [c, d]]) * t)
    return np.array([[float(E[0, 0]), float(E[0, 1])], [float(E[1, 0]), float(E[1, 1])]])


# oscillatory, critical and strongly overdamped Green matrices plus the zero matrix
CASES = [(0.0, 1.0, -1.0, -1.0), (0.0, 2.0, -2.0, -4.0), (0.0, 4.0, -4.0, -64.0),
         (0.0, 64.0, -64.0, -4096.0), (0.0, 0.0, 0.0, 0.0)]


@pytest.mark.parametrize("abcd", CASES)
@pytest.mark.parametrize("impl", IMPLS, ids=["numpy", "numba"])
def test_expm2x2_matches_high_precision(abcd, impl):
    for t in (0.01, 0.5, 3.0):
        ref = _mp_expm(*abcd, t)
        args = [np.array([v]) for v in abcd]
        out = np.array([[x[0] for x in impl.expm2x2(*args, t)[:2]],
                        [x[0] for x in impl.expm2x2(*args, t)[2:]]])
        scale = max(np.abs(ref).max(), 1e-300)
        assert np.abs(out - ref).max() <= 1e-13 * scale + 1e-300


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), c=st.floats(-5, 5), d=st.floats(-5, 5),
       t=st.floats(0.0, 2.0))
def test_expm2x2_property_matches_high_precision(a, b, c, d, t):
    ref = _mp_expm(a, b, c, d, t)
    outs = [np.array(impl.expm2x2(*(np.array([v]) for v in (a, b, c, d)), t)).reshape(2, 2)
            for impl in IMPLS]
    scale = max(np.abs(ref).max(), 1.0)
    for out in outs:
        assert np.abs(out - ref).max() <= 1e-11 * scale
    assert np.abs(outs[0] - outs[1]).max() <= 1e-12 * scale


def test_backend_selection_flag():
    assert _kernels.backend.name in ("numpy", "numba")
    assert math.isfinite(float(_kernels.expm2x2(*(np.zeros(1),) * 4, 1.0)[0][0]))


def test_benchmark_script_runs(capsys):
    import pathlib
    import runpy

    path = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    mod = runpy.run_path(str(path))
    assert mod["main"](["--N", "16", "--repeat", "1"]) == 0
    out = capsys.readouterr().out
    assert "tau_from_F" in out and "expm2x2" in out
