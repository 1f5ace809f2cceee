import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscoflux import lpx
from viscoflux.errors import ConfigError, GridMismatchError, MeanNonZeroError
from viscoflux.grid import FrequencyGrid, SpectralField

# phi(1) = 1 - S(4/7), phi(2) = S(4/7) with S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})
S_4_7 = 0.641834045088731


def test_profiles():
    assert lpx.chi(0.75) == 1.0 and lpx.chi(4.0 / 3.0) == 0.0
    assert float(lpx.phi(2.0)) == pytest.approx(S_4_7, rel=1e-14)
    assert float(lpx.phi(1.0)) == pytest.approx(1 - S_4_7, rel=1e-13)
    assert float(lpx.phi(0.7)) == 0.0 and float(lpx.phi(2.7)) == 0.0


@settings(max_examples=200, deadline=None)
@given(r=st.floats(1e-3, 1e4))
def test_partition_of_unity_property(r):
    js = np.arange(-12, 16)
    total = sum(float(lpx.phi(r * 2.0 ** -int(j))) for j in js)
    assert abs(total - 1.0) < 1e-14


@settings(max_examples=100, deadline=None)
@given(t=st.floats(-1, 2))
def test_smooth_step_monotone_bounds(t):
    a, b = float(lpx.smooth_step(t)), float(lpx.smooth_step(t + 1e-3))
    assert 0.0 <= a <= b <= 1.0


def test_shell_range_at_64(part64):
    assert (part64.j_min, part64.j_max) == (-1, 5)
    assert list(part64.low_mask()) == [True, True, True, False, False, False, False]


def test_partition_residual(part64):
    homo, inhom = lpx.partition_residual(part64)
    assert homo < 1e-14 and inhom < 1e-14


def test_build_partition_rejects_bad_R0(grid32):
    with pytest.raises(ConfigError):
        lpx.build_partition(grid32, 0.0)


def test_besov_spec_validation():
    assert lpx.BesovSpec(1.0).sigma == 1.0
    with pytest.raises(ConfigError):
        lpx.BesovSpec(1.0, p_int=3)
    with pytest.raises(ConfigError):
        lpx.BesovSpec(1.0, r_sum=3)
    with pytest.raises(ConfigError):
        lpx.BesovSpec(1.0, q_time=4)


def test_single_mode_shell_norms(part64, grid64):
    x1, x2 = grid64.x
    # |xi| = 3 sits entirely in shell j = 1 (phi(3/2) = 1)
    sh = lpx.shell_norms(np.sin(3 * x1), part64)
    ref = np.zeros(7)
    ref[2] = math.pi * math.sqrt(2.0)
    np.testing.assert_allclose(sh, ref, atol=1e-12)
    # |xi| = 1 splits between j = -1 and j = 0
    sh = lpx.shell_norms(np.sin(x2), part64)
    np.testing.assert_allclose(sh[:2], math.pi * math.sqrt(2.0) * np.array([S_4_7, 1 - S_4_7]),
                               rtol=1e-12)


def test_besov_and_hybrid_norm_oracle(part64, grid64):
    x1, _ = grid64.x
    f = np.sin(3 * x1) + np.sin(12 * x1)  # |xi| = 12 sits in j = 3 only
    amp = math.pi * math.sqrt(2.0)
    assert lpx.besov_norm(f, lpx.BesovSpec(1.0), part64) == pytest.approx(amp * (2 + 8), rel=1e-12)
    hyb = lpx.hybrid_norm(f, lpx.BesovSpec(0.0, 1.0), part64)
    assert hyb == pytest.approx(amp * (1 + 8), rel=1e-12)
    lo, hi = lpx.hybrid_split(f, lpx.BesovSpec(0.0, 1.0), part64)
    assert (lo, hi) == pytest.approx((amp, 8 * amp), rel=1e-12)
    r2 = lpx.besov_norm(f, lpx.BesovSpec(0.0, r_sum=2), part64)
    assert r2 == pytest.approx(amp * math.sqrt(2.0), rel=1e-12)


def test_mean_rejected(part64, grid64):
    with pytest.raises(MeanNonZeroError):
        lpx.besov_norm(np.ones(grid64.shape), lpx.BesovSpec(0.0), part64)
    with pytest.raises(MeanNonZeroError):
        lpx.hybrid_norm(1.0 + np.sin(grid64.x[0]), lpx.BesovSpec(0.0, 1.0), part64)


def test_norm_report_rows(part64, grid64):
    rows = lpx.norm_report_rows("f", np.sin(3 * grid64.x[0]), lpx.BesovSpec(0.0, 1.0), part64)
    assert [r[1] for r in rows] == list(range(-1, 6))
    assert rows[2][4] == "low" and rows[3][4] == "high"
    assert rows[3][3] == 4.0


def test_blocks_sum_to_field(part64, grid64, rng):
    f = grid64.random_field(rng, band=(1, 30))
    total = sum(lpx.block(f, int(j), part64).values for j in part64.shells)
    np.testing.assert_allclose(total, f, atol=1e-12)
    assert lpx.block(f, 40, part64).l2() == 0.0


def test_low_cutoff_forms_agree(part64, grid64, rng):
    f = grid64.random_field(rng, band=(1, 20))
    for j in (0, 2, 4):
        a = lpx.low_cutoff(f, j, part64, "chi").values
        b = lpx.low_cutoff(f, j, part64, "sum").values
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_product_matches_pointwise_for_band_limited(grid64):
    x1, x2 = grid64.x
    f, h = np.sin(2 * x1), np.cos(3 * x2)
    np.testing.assert_allclose(lpx.product(f, h, grid64).values, f * h, atol=1e-12)


def test_bony_identity_small(part64):
    from viscoflux.verify import bony_error
    assert bony_error(part64, pairs=5, seed=7) < 1e-12


def test_paraproduct_requires_mean_zero_and_same_grid(part64, grid64, grid32, rng):
    f = grid64.random_field(rng)
    with pytest.raises(MeanNonZeroError):
        lpx.paraproduct(f + 1.0, f, part64)
    with pytest.raises(GridMismatchError):
        lpx.remainder(SpectralField(grid32, grid32.random_field(rng)), f, part64)


def test_temporal_block_norms():
    t = np.linspace(0, 1, 2001)
    s = np.exp(-t)[:, None] * np.array([1.0, 2.0])
    np.testing.assert_allclose(lpx.temporal_block_norms(s, t, math.inf), [1.0, 2.0])
    np.testing.assert_allclose(lpx.temporal_block_norms(s, t, 1), (1 - math.exp(-1)) * np.array([1, 2]),
                               rtol=1e-6)
    np.testing.assert_allclose(lpx.temporal_block_norms(s, t, 2),
                               math.sqrt((1 - math.exp(-2)) / 2) * np.array([1, 2]), rtol=1e-6)
    with pytest.raises(ValueError):
        lpx.temporal_block_norms(s[:1], t[:1], 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), samples=st.integers(2, 40))
def test_interpolation_never_violated(seed, samples):
    part = lpx.build_partition(FrequencyGrid(2, 16), 2.0)
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 5, samples))
    series = np.abs(rng.standard_normal((samples, len(part.shells)))) * rng.uniform(0, 10)
    viol, summed = lpx.interpolation_violations(series, t, 1.0, part)
    assert viol == 0 and summed


def test_chemin_lerner_norm_of_constant_series(part64, grid64):
    f = np.sin(3 * grid64.x[0])
    spec = lpx.BesovSpec(0.0, 1.0, q_time=1)
    t = np.array([0.0, 0.5, 2.0])
    assert lpx.chemin_lerner_norm([f, f, f], t, spec, part64) == pytest.approx(
        2.0 * lpx.hybrid_norm(f, spec, part64), rel=1e-12)


def test_l2_equivalence_constants(part64):
    c1, c2 = lpx.l2_equivalence_constants(part64)
    assert 0.5 < c1 <= c2 <= 1.0 + 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_hybrid_norm_homogeneous_and_subadditive(seed):
    part = lpx.build_partition(FrequencyGrid(2, 16), 2.0)
    g = part.grid
    rng = np.random.default_rng(seed)
    f, h = g.random_field(rng), g.random_field(rng)
    spec = lpx.BesovSpec(0.0, 1.0)
    nf = lpx.hybrid_norm(f, spec, part)
    assert lpx.hybrid_norm(-2.5 * f, spec, part) == pytest.approx(2.5 * nf, rel=1e-12)
    assert lpx.hybrid_norm(f + h, spec, part) <= (nf + lpx.hybrid_norm(h, spec, part)) * (1 + 1e-12)


def test_product_ratios_finite(part64, grid64):
    r = lpx.product_ratios(grid64, part64, 5, seed=3, kind="hybrid")
    assert np.all(np.isfinite(r)) and np.all(r > 0)
    with pytest.raises(ValueError):
        lpx.product_ratios(grid64, part64, 1, seed=3, kind="other")
