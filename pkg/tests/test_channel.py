import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wds.channel import (ChannelProfile, FadingState, apply_cfo, awgn, cfo_from_ppm, fade, impair)


def unit_block(n, seed=0):
    rng = np.random.default_rng(seed)
    return np.exp(2j * np.pi * rng.random(n))


def test_awgn_infinite_snr_is_identity():
    x = unit_block(64)
    y = awgn(x, math.inf, np.random.default_rng(0))
    assert np.array_equal(x, y)
    assert y is not x


def test_awgn_empty_input():
    with pytest.raises(ValueError):
        awgn(np.array([], complex), 10, np.random.default_rng(0))


def test_awgn_statistics():
    x = unit_block(200_000)
    z = awgn(x, 0.0, np.random.default_rng(1)) - x
    assert 0.97 <= np.mean(np.abs(z) ** 2) <= 1.03
    assert abs(np.corrcoef(z.real, z.imag)[0, 1]) < 0.01
    assert np.var(z.real) == pytest.approx(np.var(z.imag), rel=0.03)


def test_awgn_uses_block_energy():
    x = 3 * unit_block(100_000)
    z = awgn(x, 10.0, np.random.default_rng(2)) - x
    assert np.mean(np.abs(z) ** 2) == pytest.approx(9 / 10, rel=0.03)


def test_awgn_deterministic():
    x = unit_block(100)
    a = awgn(x, 5, np.random.default_rng(9))
    b = awgn(x, 5, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_cfo_values():
    assert cfo_from_ppm(2, 2.412e9) == pytest.approx(4824.0)
    assert ChannelProfile().cfo_hz == pytest.approx(4824.0)


def test_cfo_identities():
    x = unit_block(256)
    assert np.allclose(apply_cfo(x, 0.0, 20e6), x, atol=0)
    assert np.allclose(apply_cfo(x, 20e6, 20e6), x, atol=1e-12)
    with pytest.raises(ValueError):
        apply_cfo(x, 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(cfo=st.floats(-1e6, 1e6), start=st.integers(0, 10**7))
def test_cfo_preserves_magnitude(cfo, start):
    x = unit_block(64) * np.linspace(0.1, 2, 64)
    y = apply_cfo(x, cfo, 20e6, start)
    assert np.allclose(np.abs(y), np.abs(x), rtol=1e-12, atol=0)


def test_cfo_phase_ramp():
    y = apply_cfo(np.ones(5, complex), 1e6, 20e6)
    assert np.allclose(np.angle(y[1:] / y[:-1]), 2 * np.pi * 1e6 / 20e6)


def test_profile_defaults():
    p = ChannelProfile()
    assert np.sum(p.tap_gains) == pytest.approx(1.0, abs=1e-12)
    assert list(p.tap_offsets) == [0, 180, 340]
    assert p.tap_gains[1] / p.tap_gains[0] == pytest.approx(10 ** -0.2)


@pytest.mark.parametrize("kw", [
    dict(tap_delays=(0.0, 1e-6), tap_powers_db=(0.0,)),
    dict(tap_delays=(1e-6,), tap_powers_db=(0.0,)),
    dict(k_factor=-1.0),
])
def test_profile_validation(kw):
    with pytest.raises(ValueError):
        ChannelProfile(**kw)


def test_profile_flat_roundtrip():
    p = ChannelProfile(k_factor=7.5, max_doppler=10.0)
    assert ChannelProfile.from_flat(p.to_flat()) == p


def test_pure_los_single_tap_is_constant_phase():
    p = ChannelProfile(tap_delays=(0.0,), tap_powers_db=(0.0,), k_factor=math.inf, max_doppler=0.0)
    x = unit_block(128)
    y = fade(x, p, np.random.default_rng(3))
    ratio = y / x
    assert np.allclose(np.abs(ratio), 1.0)
    assert np.allclose(ratio, ratio[0])


def test_fade_rejects_short_input():
    with pytest.raises(ValueError, match="channel span"):
        fade(unit_block(300), ChannelProfile(), np.random.default_rng(0))


def test_fade_output_length_and_taps():
    p = ChannelProfile()
    x = np.zeros(1000, complex)
    x[0] = 1
    y = fade(x, p, np.random.default_rng(4))
    assert len(y) == 1000
    nz = np.flatnonzero(np.abs(y) > 0)
    assert list(nz) == [0, 180, 340]


def test_fading_tap_powers_and_k_factor():
    p = ChannelProfile()
    rng = np.random.default_rng(5)
    g = np.array([FadingState.draw(p, rng).gains(rng.uniform()) for _ in range(8000)])
    assert np.mean(np.abs(g) ** 2, axis=0) == pytest.approx(p.tap_gains, rel=0.06)
    # moment estimate of K from the amount of fading var(|g|^2) / E(|g|^2)^2
    k_est = []
    for j in range(3):
        x = np.abs(g[:, j]) ** 2
        r = np.sqrt(max(1 - x.var() / x.mean() ** 2, 0.0))
        k_est.append(r / (1 - r))
    assert 3.0 < k_est[0] < 5.5
    assert max(k_est[1:]) < 0.6  # Rayleigh taps


def test_slow_fading_autocorrelation():
    p = ChannelProfile()
    rng = np.random.default_rng(6)
    lag = 1e-3  # well below 1 / 4 Hz
    num = den = 0
    for _ in range(500):
        st_ = FadingState.draw(p, rng)
        t0 = rng.uniform(0, 1)
        a, b = st_.gains(t0)[1], st_.gains(t0 + lag)[1]
        num += a * np.conj(b)
        den += abs(a) ** 2
    assert abs(num / den) > 0.9


def test_impair_composition():
    x = unit_block(1024)
    assert np.array_equal(impair(x, None, math.inf, np.random.default_rng(0)), x)
    a = impair(x, None, 3.0, np.random.default_rng(7))
    b = awgn(x, 3.0, np.random.default_rng(7))
    assert np.array_equal(a, b)
    p = ChannelProfile()
    c = impair(x, p, 10.0, np.random.default_rng(8))
    d = impair(x, p, 10.0, np.random.default_rng(8))
    assert np.array_equal(c, d)
