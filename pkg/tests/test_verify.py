import pytest

from viscoflux import verify


def _assert_all_pass(checks):
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


def test_harmonic_suite():
    _assert_all_pass(verify.harmonic_suite())


def test_spectrum_suite():
    _assert_all_pass(verify.spectrum_suite())


def test_linear_suite_small():
    _assert_all_pass(verify.linear_suite(N=32, T=1.0, damping_T=10.0))


def test_run_suite_unknown():
    with pytest.raises(KeyError):
        verify.run_suite("nope")


def test_check_rows():
    c = verify.Check("x", "info", 1.0, float("nan"))
    assert c.passed and c.row()[:2] == ["x", "info"]
    assert not verify._below("y", float("nan"), 1.0).passed
    assert verify._above("z", 2.0, 1.0).passed
