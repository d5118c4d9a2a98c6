import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ioncavity import chain, coupling, oracles
from ioncavity.config import CONSTANTS, angular_to_khz, khz_to_angular

from conftest import DOPPLER_T, ca_config

LAMBDA = 866e-9


def moved(model, positions=None, shift=0.0, spreads=None):
    sol = model.solution
    pos = sol.positions if positions is None else np.asarray(positions, dtype=float)
    thermal = model.thermal
    if spreads is not None:
        thermal = dataclasses.replace(thermal, ion_spreads=np.asarray(spreads, dtype=float))
    return coupling.CouplingModel(model.config, dataclasses.replace(sol, positions=pos + shift), thermal)


@pytest.mark.parametrize("z, factor", [(0.0, 1.0), (LAMBDA / 4, 0.0), (LAMBDA / 2, -1.0)])
def test_coupling_strength(ca, z, factor):
    cfg = ca()
    assert coupling.coupling_strength(cfg, z) == pytest.approx(factor * cfg.g0, abs=1e-9 * cfg.g0)


def test_emission_single_ion_limits(ca):
    model = coupling.build_model(ca(1), khz_to_angular(620), DOPPLER_T)
    cold = moved(model, spreads=[0.0])
    assert coupling.emission_profile(cold, 0.0) == pytest.approx(2.0)
    hot = moved(model, spreads=[50 * LAMBDA])
    x = np.linspace(0, LAMBDA, 17)
    assert coupling.emission_profile(hot, x) == pytest.approx(np.ones_like(x), abs=1e-12)


def test_emission_matches_single_ion_rate(ca):
    model = coupling.build_model(ca(1), khz_to_angular(500), 1.3 * DOPPLER_T)
    k = model.config.wavenumber
    dz = model.thermal.ion_spreads[0]
    x = np.linspace(-LAMBDA, LAMBDA, 41)
    assert coupling.emission_profile(model, x) == pytest.approx(1 + math.exp(-(k * dz) ** 2) * np.cos(2 * k * x))


@pytest.mark.parametrize("m", [20, 21, 22])
def test_half_integer_spacing_flat(ca, m):
    model = coupling.build_model(ca(2), khz_to_angular(454), 1.5 * DOPPLER_T)
    d = (m + 0.5) * LAMBDA / 2
    flat = moved(model, positions=[-d / 2, d / 2])
    w = coupling.emission_profile(flat, np.linspace(0, LAMBDA, 33))
    assert np.ptp(w) < 1e-12
    assert coupling.visibility(flat) < 1e-12


def test_single_ion_visibility_is_debye_waller(ca):
    model = coupling.build_model(ca(1), khz_to_angular(620), 1.2 * DOPPLER_T)
    k = model.config.wavenumber
    assert coupling.visibility(model) == math.exp(-(k * model.thermal.ion_spreads[0]) ** 2)


def test_single_ion_133nm_value(ca):
    model = moved(coupling.build_model(ca(1), khz_to_angular(620), DOPPLER_T), spreads=[133e-9])
    assert coupling.visibility(model) == pytest.approx(0.39, abs=0.01)


def test_two_ion_enhancement(ca):
    temp = 1.5 * DOPPLER_T
    v1 = coupling.visibility(coupling.build_model(ca(1), khz_to_angular(454), temp))
    model2 = coupling.build_model(ca(2), khz_to_angular(454), temp)
    m = round(np.ptp(model2.solution.positions) / (LAMBDA / 2))
    d = m * LAMBDA / 2
    v2 = coupling.visibility(moved(model2, positions=[-d / 2, d / 2]))
    assert v1 == pytest.approx(0.11, abs=0.01)
    assert v2 == pytest.approx(0.24, abs=0.01)
    # commensurate two-ion contrast is the two-ion Debye-Waller factor
    k = model2.config.wavenumber
    assert v2 == pytest.approx(math.exp(-(k * model2.thermal.ion_spreads[0]) ** 2), rel=1e-12)


@st.composite
def random_models(draw):
    n = draw(st.integers(1, 8))
    f = draw(st.floats(300.0, 700.0))
    t = draw(st.floats(0.01, 4.0))
    shift = draw(st.floats(-2 * LAMBDA, 2 * LAMBDA))
    model = coupling.build_model(ca_config(n), khz_to_angular(f), t * DOPPLER_T)
    return moved(model, shift=shift)


@settings(max_examples=200, deadline=None)
@given(random_models())
def test_closed_form_matches_phase_scan(model):
    assert abs(coupling.visibility(model) - coupling.visibility_phase_scan(model)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(random_models(), st.floats(-5e-6, 5e-6))
def test_visibility_translation_invariant(model, shift):
    assert coupling.visibility(moved(model, shift=shift)) == pytest.approx(coupling.visibility(model), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(random_models())
def test_visibility_bounds(model):
    v = coupling.visibility(model)
    assert 0.0 <= v <= np.max(model.debye_waller) + 1e-15 <= 1.0 + 1e-15


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 2), f=st.floats(400.0, 620.0), t=st.floats(0.2, 3.0), factor=st.floats(1.01, 3.0))
def test_visibility_decreases_with_temperature(n, f, t, factor):
    # one or two ions share a single Debye-Waller factor, so V = DW |S| / N
    cfg = ca_config(n)
    omega = khz_to_angular(f)
    cold = coupling.build_model(cfg, omega, t * DOPPLER_T)
    hot = coupling.build_model(cfg, omega, factor * t * DOPPLER_T)
    v_cold, v_hot = coupling.visibility(cold), coupling.visibility(hot)
    if v_cold > 1e-12:
        assert v_hot < v_cold


def test_visibility_can_rise_with_temperature_for_longer_strings():
    # unequal Debye-Waller factors can lift a partial phasor cancellation
    cfg = ca_config(6)
    omega = khz_to_angular(616.0)
    cold = coupling.visibility(coupling.build_model(cfg, omega, 3.0 * DOPPLER_T))
    hot = coupling.visibility(coupling.build_model(cfg, omega, 6.0 * DOPPLER_T))
    assert hot > cold


def test_visibility_curve_three_ion_maxima(ca):
    grid = khz_to_angular(np.arange(400.0, 500.0 + 1e-9, 0.25))
    curve = coupling.visibility_curve(ca(3), 1.56 * DOPPLER_T, grid)
    v = curve.visibilities
    peaks = angular_to_khz(grid[np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1])
    for target in (411.0, 444.0, 482.0):
        assert np.min(np.abs(peaks - target)) <= 3.0


def test_visibility_curve_cold_single_ion(ca):
    curve = coupling.visibility_curve(ca(1), 1e-15, [khz_to_angular(500.0)])
    assert curve.visibilities[0] == pytest.approx(1.0, abs=1e-9)


def two_ion_commensurate_frequency(m):
    # d = 2^(1/3) l(w) = m lambda/2, solved for w
    q, eps0, mass = CONSTANTS.elementary_charge, CONSTANTS.vacuum_permittivity, ca_config().ion_mass
    ell = m * LAMBDA / 2 / 2 ** (1 / 3)
    return math.sqrt(q**2 / (4 * math.pi * eps0 * mass * ell**3))


def test_visibility_curve_two_ion_commensurate_peak(ca):
    target = two_ion_commensurate_frequency(22)
    assert angular_to_khz(target) == pytest.approx(451.18, abs=0.01)
    grid = khz_to_angular(np.arange(440.0, 462.0, 0.05))
    curve = coupling.visibility_curve(ca(2), 1.5 * DOPPLER_T, grid)
    i = int(np.argmax(curve.visibilities))
    assert 0 < i < len(grid) - 1
    # the Debye-Waller factor rises with frequency, nudging the peak slightly up
    assert 0.0 <= angular_to_khz(grid[i]) - angular_to_khz(target) < 1.0


def test_visibility_curve_validation(ca):
    with pytest.raises(ValueError):
        coupling.visibility_curve(ca(2), DOPPLER_T, [])
    with pytest.raises(ValueError):
        coupling.visibility_curve(ca(2), DOPPLER_T, [3e6, 2e6])


def test_visibility_curve_threads_match(ca, monkeypatch):
    grid = khz_to_angular(np.linspace(400, 620, 57))
    serial = coupling.visibility_curve(ca(4), DOPPLER_T, grid).visibilities
    monkeypatch.setenv("IONCAVITY_THREADS", "4")
    threaded = coupling.visibility_curve(ca(4), DOPPLER_T, grid).visibilities
    assert np.array_equal(serial, threaded)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_vectorised_visibilities_match_curve(ca, n):
    grid = khz_to_angular(np.linspace(400, 620, 37))
    curve = coupling.visibility_curve(ca(n), 1.4 * DOPPLER_T, grid)
    assert coupling.model_visibilities(ca(n), 1.4 * DOPPLER_T, grid) == pytest.approx(curve.visibilities, abs=1e-12)


def test_g_tilde_single_ion(ca):
    model = coupling.build_model(ca(1), khz_to_angular(500), DOPPLER_T)
    report = coupling.average_coupling(moved(model, positions=[0.123e-6]))
    assert report.g_tilde == pytest.approx(1.0, abs=1e-12)
    assert abs(math.cos(model.config.wavenumber * 0.123e-6 + report.phase_at_optimum)) == pytest.approx(1.0)


def test_g_tilde_two_ions_commensurate():
    k = 2 * math.pi / LAMBDA
    report = coupling.coupling_report([0.3e-6, 0.3e-6 + 21 * LAMBDA / 2], k)
    assert report.g_tilde == pytest.approx(1.0, abs=1e-12)


def test_g_tilde_four_ions():
    k = 2 * math.pi / LAMBDA
    z = coupling.positions_from_spacings(np.array([16.1, 14.9, 16.1]) * LAMBDA / 2)
    report = coupling.coupling_report(z, k)
    assert report.g_tilde == pytest.approx(0.988, abs=0.002)
    assert report.g_tilde == pytest.approx(np.mean(report.per_ion_couplings), abs=1e-12)


def test_g_tilde_five_ions_both_conventions():
    k = 2 * math.pi / LAMBDA
    z = coupling.positions_from_spacings(np.array([16.9, 15.1, 15.1, 16.9]) * LAMBDA / 2)
    report = coupling.coupling_report(z, k, debye_waller=np.full(5, 0.3))
    assert report.g_tilde >= 0.98
    assert report.g_tilde_at_emission_phase >= 0.98
    assert report.g_tilde == pytest.approx(0.983, abs=0.01)


positions_st = st.lists(st.floats(-20e-6, 20e-6), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(positions_st)
def test_g_tilde_matches_exact_oracle(z):
    k = 2 * math.pi / LAMBDA
    _, exact = oracles.exact_mean_coupling_max(z, k)
    assert coupling.optimise_mean_coupling(z, k)[1] == pytest.approx(exact, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(positions_st, st.floats(-5e-6, 5e-6))
def test_g_tilde_translation_and_reflection(z, shift):
    k = 2 * math.pi / LAMBDA
    z = np.array(z)
    g = coupling.coupling_report(z, k).g_tilde
    assert coupling.coupling_report(z + shift, k).g_tilde == pytest.approx(g, abs=1e-10)
    assert coupling.coupling_report(-z, k).g_tilde == pytest.approx(g, abs=1e-10)


def test_emission_phase_maximises_w(ca):
    model = coupling.build_model(ca(4), khz_to_angular(470), 1.57 * DOPPLER_T)
    report = coupling.average_coupling(model)
    k = model.config.wavenumber
    x = np.linspace(0, LAMBDA / 2, 4001)
    w = coupling.emission_profile(model, x)
    best = coupling.emission_profile(model, report.emission_phase / k)
    assert best >= w.max() - 1e-9


def test_optimise_single_ion_hits_upper_edge(ca):
    lo, hi = khz_to_angular(400.0), khz_to_angular(620.0)
    best = coupling.optimise_frequency(ca(1), 1.5 * DOPPLER_T, (lo, hi), "max-visibility")
    assert best.frequency == hi


def test_optimise_two_ions_commensurate(ca):
    target = two_ion_commensurate_frequency(22)
    best = coupling.optimise_frequency(ca(2), 1.5 * DOPPLER_T,
                                       (khz_to_angular(430.0), khz_to_angular(470.0)), "max-visibility")
    assert 0.0 <= angular_to_khz(best.frequency) - angular_to_khz(target) < 1.0
    spacing = np.ptp(best.solution.positions) / (LAMBDA / 2)
    assert spacing == pytest.approx(22, abs=0.05)


def test_optimise_two_ions_wide_range_prefers_edge(ca):
    # over 430-480 kHz the 21 x lambda/2 point just above 480 kHz outweighs the interior peak
    best = coupling.optimise_frequency(ca(2), 1.5 * DOPPLER_T,
                                       (khz_to_angular(430.0), khz_to_angular(480.0)), "max-visibility")
    interior = coupling.visibility(coupling.build_model(ca(2), two_ion_commensurate_frequency(22), 1.5 * DOPPLER_T))
    assert best.value > interior
    assert angular_to_khz(best.frequency) == pytest.approx(480.0)


def test_optimise_five_ions_g_tilde(ca):
    cfg = ca(5)
    lo, hi = khz_to_angular(400.0), khz_to_angular(620.0)
    best = coupling.optimise_frequency(cfg, 1.72 * DOPPLER_T, (lo, hi), "max-g-tilde")
    # independent check: exact g-tilde on a coarse grid never beats the optimum
    u = chain.dimensionless_equilibrium(5)
    coarse = [oracles.exact_mean_coupling_max(u * chain.length_scale(cfg, f), cfg.wavenumber)[1]
              for f in np.linspace(lo, hi, 441)]
    assert best.value >= 0.98
    assert best.value >= max(coarse) - 1e-6
    assert best.report.g_tilde == pytest.approx(best.value, abs=1e-9)


@pytest.mark.parametrize("rng", [(0.0, 1e6), (2e6, 1e6), (1e6, 1e6), (float("nan"), 1e6)])
def test_optimise_bad_range(ca, rng):
    with pytest.raises(ValueError):
        coupling.optimise_frequency(ca(2), DOPPLER_T, rng)


def test_optimise_bad_objective(ca):
    with pytest.raises(ValueError):
        coupling.optimise_frequency(ca(2), DOPPLER_T, (2e6, 3e6), "max-fun")


def test_model_consistency_checked(ca):
    a = coupling.build_model(ca(2), 3e6, DOPPLER_T)
    b = coupling.build_model(ca(3), 3e6, DOPPLER_T)
    with pytest.raises(ValueError):
        coupling.CouplingModel(a.config, b.solution, a.thermal)
