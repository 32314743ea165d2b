import math

import numpy as np
import pytest

import pipsim


def test_rates():
    assert pipsim.min_adc_rate(60, 64, 128, 3, 2) == pytest.approx(327680.0)
    assert pipsim.floor_rate(pipsim.max_real_frame_rate(7, 2)) == 711
    rep = pipsim.rate_report(5, 2)
    assert rep["f_adc_min"] / 1e3 == pytest.approx(234.06, abs=0.01)


def test_power_row():
    p = pipsim.power_model(60, 7, 2)
    assert p["p_total"] * 1e6 == pytest.approx(529.29, abs=0.01)
    assert p["efficiency"] / 1e12 == pytest.approx(11.65, abs=0.01)
    assert pipsim.total_ops(64, 64, 4, 64, 60, 3) == 1132462080


def test_schedule_counts():
    s = pipsim.schedule_summary(3, 2, policy="paper-steps")
    assert s["steps_per_pass"] == 4
    assert s["readouts_per_step"] == 11
    assert pipsim.equivalent_exposures(3, 2) == 10


def test_ideal_simulation_matches_oracle():
    rng = np.random.default_rng(3)
    currents = rng.uniform(0, 8e-11, size=(32, 32))
    weights = [rng.integers(-128, 128, size=(6, 6), dtype=np.int32) for _ in range(2)]
    sim = pipsim.simulate(currents, weights, 2)
    ref = pipsim.oracle_conv(currents, weights, 2)
    assert len(sim) == 2
    for a, b in zip(sim, ref):
        assert a.shape == (7, 7)
        assert pipsim.relative_rms(a, b) < 1e-9
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(b).max())


def test_noisy_simulation_is_seeded():
    rng = np.random.default_rng(4)
    currents = rng.uniform(0, 8e-11, size=(16, 16))
    weights = [rng.integers(-128, 128, size=(6, 6), dtype=np.int32)]
    a = pipsim.simulate(currents, weights, 2, ideal=False, noise=True, seed=9)
    b = pipsim.simulate(currents, weights, 2, ideal=False, noise=True, seed=9)
    np.testing.assert_array_equal(a[0], b[0])


def test_noise_helpers_and_errors():
    assert pipsim.ktc_sigma(22.2e-15) == pytest.approx(4.3194234475122853e-4)
    power, gain = pipsim.averaging_gain(3, 1.0)
    assert gain == 9.0 and power == pytest.approx(1 / 9)
    assert pipsim.inject_target_snr(1.0, math.inf) == 0.0
    with pytest.raises(ValueError):
        pipsim.inject_target_snr(0.0, 20.0)
    with pytest.raises(ValueError):
        pipsim.rate_report(4, 2)
