import math

import pytest

from viscoflux import config
from viscoflux.errors import ConfigError


def test_defaults():
    cfg = config.load_text("")
    assert cfg.sim.N == 64 and cfg.sim.n == 2 and cfg.sim.mode == "perturbation"
    assert cfg.sim.threshold == 2.0
    assert cfg.fit_window == (None, None)
    assert cfg.xi[0] == 0.25 and cfg.snapshot_every == 0
    res = cfg.resolved()
    assert res["analysis"]["R0"] == 2.0 and res["grid"]["L"] == pytest.approx(2 * math.pi)


def test_default_text_roundtrip():
    text = config.default_text()
    for sec, keys in config.SCHEMA.items():
        assert f"[{sec}]" in text
        for key in keys:
            assert f"\n{key} = " in text
    assert config.load_text(text).resolved() == config.load_text("").resolved()


def test_overrides_and_seed():
    cfg = config.load_text("[grid]\nN = 32\n[fluid]\nalpha = 2\n[init]\ncompatible = yes\n"
                           "band_hi = 3\n[analysis]\nR0 = 4\nfit_start = 0.5\n", seed=11)
    assert cfg.sim.N == 32 and cfg.sim.params.alpha == 2.0 and cfg.sim.init.compatible
    assert cfg.sim.init.seed == 11 and cfg.sim.threshold == 4.0
    assert cfg.fit_window == (0.5, None)


@pytest.mark.parametrize("text,needle", [
    ("[gird]\nN = 32\n", "unknown section [gird]"),
    ("[grid]\nM = 32\n", "unknown key 'M' in section [grid]"),
    ("[grid]\nN = abc\n", "grid.N"),
    ("[init]\ncompatible = maybe\n", "init.compatible"),
    ("[grid]\nN = 48\n", "power of two"),
    ("[time]\nscheme = rk4\n", "scheme"),
    ("[modes]\nxi = 1, -2\n", "positive"),
    ("[modes]\nxi = 1, a\n", "modes.xi"),
    ("[run]\nsnapshot_every = -1\n", "snapshot_every"),
    ("[fluid]\nmu0 = 0\n", "mu0"),
    ("[grid]\nN = 32\n[init]\nband_hi = 12\n", "band"),
    ("not an ini", "config"),
])
def test_errors_name_the_problem(text, needle):
    with pytest.raises(ConfigError) as exc:
        config.load_text(text)
    assert needle in str(exc.value)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "nope.ini")


def test_load_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[time]\nT_end = 3\n")
    assert config.load(p).sim.T_end == 3.0
