"""Resynthesis from envelopes: shaping, normalisation, band summation."""

import numpy as np
import pytest

import commonslope as cs

FS = 48000
W = 240
M = 200


def smooth_decay_envelope(tau=0.35):
    t = (np.arange(M) + 0.5) * W / FS
    return np.exp(-t / tau)


class TestUpsampleEnvelope:
    def test_linear_between_centers_and_held_edges(self):
        env = np.array([1.0, 3.0])
        up = cs.upsample_envelope(env, 4, 8)
        # centers at samples 2 and 6; linear in between, held outside
        np.testing.assert_allclose(up, [1.0, 1.0, 1.0, 1.5, 2.0, 2.5, 3.0, 3.0])


class TestSynthBand:
    def test_zero_envelope_gives_silence(self):
        rir = cs.synth_band(np.zeros(M), 1000.0, W, FS, seed=0)
        assert np.all(rir.samples == 0.0)
        assert len(rir.samples) == M * W

    def test_constant_envelope_unit_rms(self):
        rir = cs.synth_band(np.ones(M), 1000.0, W, FS, seed=1)
        rms = np.sqrt(np.mean(rir.samples**2))
        assert rms == pytest.approx(1.0, rel=0.02)

    def test_round_trip_envelope_recovery(self):
        env = smooth_decay_envelope()
        mask = env >= env.max() * 10 ** (-40 / 20)
        medians = []
        for seed in range(50):
            rir = cs.synth_band(env, 2000.0, W, FS, seed)
            recovered = cs.rms_envelope(rir, W)
            rel = np.abs(recovered[mask] - env[mask]) / env[mask]
            medians.append(np.median(rel))
        assert np.median(medians) < 0.10

    def test_deterministic_given_seed(self):
        env = smooth_decay_envelope()
        a = cs.synth_band(env, 500.0, W, FS, seed=42)
        b = cs.synth_band(env, 500.0, W, FS, seed=42)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_envelope_scaling_scales_output_exactly(self):
        env = smooth_decay_envelope()
        a = cs.synth_band(env, 500.0, W, FS, seed=3)
        b = cs.synth_band(2.5 * env, 500.0, W, FS, seed=3)
        np.testing.assert_allclose(b.samples, 2.5 * a.samples, rtol=0, atol=1e-13)

    def test_negative_envelope_rejected(self):
        with pytest.raises(ValueError):
            cs.synth_band(np.array([-0.1, 0.5]), 500.0, W, FS, seed=0)

    def test_broadband_carrier_without_band_filter(self):
        rir = cs.synth_band(np.ones(M), None, W, FS, seed=7)
        assert rir.band is None
        assert np.sqrt(np.mean(rir.samples**2)) == pytest.approx(1.0, rel=1e-12)

    def test_expected_band_energy_tracks_envelope_energy(self):
        # Total energy concentrates around sum_m env(m)^2 * window_len.
        env = smooth_decay_envelope()
        expected = float(np.sum(env**2) * W)
        energies = [
            float(np.sum(cs.synth_band(env, 2000.0, W, FS, seed).samples ** 2))
            for seed in range(50)
        ]
        assert np.median(energies) == pytest.approx(expected, rel=0.10)


class TestSynthBroadband:
    def test_single_band_identity(self):
        rir = cs.synth_band(np.ones(20), 1000.0, W, FS, seed=0)
        out = cs.synth_broadband([rir])
        np.testing.assert_array_equal(out.samples, rir.samples)
        assert out.band is None

    def test_two_identical_bands_double(self):
        rir = cs.synth_band(np.ones(20), 1000.0, W, FS, seed=0)
        out = cs.synth_broadband([rir, rir])
        np.testing.assert_allclose(out.samples, 2.0 * rir.samples, rtol=1e-15)

    def test_seven_band_energy_additivity(self):
        env = smooth_decay_envelope()
        ratios = []
        for seed in range(50):
            bands = [
                cs.synth_band(env, center, W, FS, seed=(seed, i))
                for i, center in enumerate(cs.DEFAULT_BAND_CENTERS)
            ]
            total = np.sum(cs.synth_broadband(bands).samples ** 2)
            parts = sum(np.sum(b.samples**2) for b in bands)
            ratios.append(total / parts)
        assert abs(np.median(ratios) - 1.0) < 0.05

    def test_mismatched_lengths_rejected(self):
        a = cs.Rir(np.zeros(10), FS)
        b = cs.Rir(np.zeros(11), FS)
        with pytest.raises(ValueError):
            cs.synth_broadband([a, b])

    def test_mismatched_rates_rejected(self):
        a = cs.Rir(np.zeros(10), FS)
        b = cs.Rir(np.zeros(10), FS // 2)
        with pytest.raises(ValueError):
            cs.synth_broadband([a, b])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cs.synth_broadband([])
