import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioncavity.config import (
    CONSTANTS,
    ConfigError,
    RunConfig,
    dump_config,
    load_config,
    make_config,
    parse_config_text,
    run_config_from_values,
)


def test_defaults():
    cfg = make_config(40, {})
    assert cfg.ion_mass == 40 * 1.66053906660e-27
    assert cfg.wavelength == 866e-9
    assert cfg.g0 == pytest.approx(2 * math.pi * 0.9e6)
    assert cfg.doppler_temperature == 535e-6
    assert cfg.num_ions == 1
    assert cfg.charge == CONSTANTS.elementary_charge


def test_idempotent_override():
    assert make_config(40, {"wavelength": 866e-9}) == make_config(40, {})


@pytest.mark.parametrize("mass", [0, -1, float("nan")])
def test_bad_mass(mass):
    with pytest.raises(ConfigError):
        make_config(mass, {})


def test_unknown_override_is_named():
    with pytest.raises(ConfigError, match="wavelenght"):
        make_config(40, {"wavelenght": 1e-6})


@pytest.mark.parametrize("key, value", [("num_ions", 0), ("num_ions", 2.5), ("g0", -1.0), ("wavelength", 0.0)])
def test_positivity(key, value):
    with pytest.raises(ConfigError):
        make_config(40, {key: value})


@given(st.floats(1e-9, 1e-5))
def test_wavenumber(lam):
    cfg = make_config(40, {"wavelength": lam})
    assert cfg.wavenumber * cfg.wavelength == pytest.approx(2 * math.pi, rel=1e-15)


positive = st.floats(1e-3, 1e4, allow_nan=False)


@settings(max_examples=50)
@given(mass=positive, lam=st.floats(100.0, 2000.0), g0=positive, n=st.integers(1, 50), td=positive,
       t=st.one_of(st.none(), positive), finesse=st.one_of(st.none(), positive))
def test_file_round_trip(tmp_path_factory, mass, lam, g0, n, td, t, finesse):
    trap = make_config(mass, {"wavelength": lam * 1e-9, "g0": 2 * math.pi * g0 * 1e6, "num_ions": n,
                              "doppler_temperature": td * 1e-6, "finesse": finesse})
    run = RunConfig(trap, temperature=None if t is None else t * 1e-6,
                    freq_min=2 * math.pi * 400e3, freq_max=2 * math.pi * 620e3)
    path = tmp_path_factory.mktemp("cfg") / "run.cfg"
    path.write_text(dump_config(run))
    back = load_config(path)
    for name in ("ion_mass", "charge", "wavelength", "g0", "doppler_temperature", "finesse"):
        a, b = getattr(trap, name), getattr(back.trap, name)
        assert (a is None and b is None) or math.isclose(a, b, rel_tol=1e-12)
    assert back.trap.num_ions == n
    for name in ("temperature", "freq_min", "freq_max"):
        a, b = getattr(run, name), getattr(back, name)
        assert (a is None and b is None) or math.isclose(a, b, rel_tol=1e-12)


def test_file_parsing():
    values = parse_config_text("""
        # comment
        mass_amu = 40
        num_ions = 3   # inline
        temperature_uk = 800
        secular_freq_khz_min = 400
        secular_freq_khz_max = 620
    """)
    run = run_config_from_values(values)
    assert run.trap.num_ions == 3
    assert run.temperature == pytest.approx(800e-6)
    assert run.freq_max == pytest.approx(2 * math.pi * 620e3)


@pytest.mark.parametrize("text, match", [
    ("colour = blue", "colour"),
    ("mass_amu = 40\nmass_amu = 41", "duplicate"),
    ("mass_amu 40", "expected"),
    ("num_ions = three", "num_ions"),
    ("secular_freq_khz_min = 600\nsecular_freq_khz_max = 400", "secular"),
])
def test_file_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        run_config_from_values(parse_config_text(text))
