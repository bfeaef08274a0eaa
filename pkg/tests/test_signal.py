"""Signal primitives: filterbank, envelopes, EDFs, power scaling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import sosfreqz

import commonslope as cs
from commonslope.signal import POWER_FLOOR, design_band_sos

FS = 48000


def tone(freq, fs=FS, seconds=0.5):
    t = np.arange(int(fs * seconds)) / fs
    return cs.Rir(np.sin(2 * np.pi * freq * t), fs)


class TestOctaveFilterbank:
    def test_default_centers(self):
        bands = cs.octave_filterbank(tone(1000.0, seconds=0.1))
        assert tuple(b.band for b in bands) == (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)

    def test_output_length_and_tags(self):
        rir = tone(500.0, seconds=0.05)
        bands = cs.octave_filterbank(rir, [250.0, 1000.0])
        for band, center in zip(bands, (250.0, 1000.0)):
            assert len(band.samples) == len(rir.samples)
            assert band.band == center
            assert band.sample_rate == rir.sample_rate

    def test_tone_energy_lands_in_matching_band(self):
        # Oracle: evaluate the designed magnitude responses at the tone
        # frequency.  Forward-backward filtering applies |H|^2, so the band's
        # share of a steady tone's energy is |H|^4-weighted.
        rir = tone(1000.0)
        bands = cs.octave_filterbank(rir)
        energies = np.array([np.sum(b.samples**2) for b in bands])
        shares = energies / energies.sum()

        gains = []
        for center in cs.DEFAULT_BAND_CENTERS:
            sos = design_band_sos(center, FS)
            _, h = sosfreqz(sos, worN=[1000.0], fs=FS)
            gains.append(np.abs(h[0]) ** 4)
        oracle_shares = np.array(gains) / np.sum(gains)

        idx = list(cs.DEFAULT_BAND_CENTERS).index(1000.0)
        assert shares[idx] >= 0.90
        np.testing.assert_allclose(shares, oracle_shares, atol=0.02)

    def test_zero_input_zero_output(self):
        bands = cs.octave_filterbank(cs.Rir(np.zeros(4000), FS))
        for band in bands:
            assert np.all(band.samples == 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(4000)
        y = rng.standard_normal(4000)
        a, b = 2.5, -1.25
        fb = lambda sig: np.stack(
            [r.samples for r in cs.octave_filterbank(cs.Rir(sig, FS), [500.0, 2000.0])]
        )
        combined = fb(a * x + b * y)
        separate = a * fb(x) + b * fb(y)
        scale = np.max(np.abs(separate))
        np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-9 * scale)

    def test_band_at_nyquist_rejected(self):
        with pytest.raises(cs.InvalidBandError):
            cs.octave_filterbank(tone(1000.0, fs=16000, seconds=0.05), [8000.0])

    def test_centers_must_increase(self):
        with pytest.raises(cs.InvalidBandError):
            cs.octave_filterbank(tone(1000.0, seconds=0.05), [1000.0, 500.0])


class TestRmsEnvelope:
    def test_constant_signal(self):
        rir = cs.Rir(np.full(4800, 0.7), FS)
        env = cs.rms_envelope(rir, 480)
        np.testing.assert_allclose(env, 0.7, rtol=1e-12)

    def test_48000_samples_window_240_gives_200_points(self):
        rir = cs.Rir(np.random.default_rng(1).standard_normal(48000), FS)
        assert len(cs.rms_envelope(rir, 240)) == 200

    def test_default_window_targets_200_points(self):
        assert cs.default_window_len(48000) == 240
        rir = cs.Rir(np.random.default_rng(1).standard_normal(96000), FS)
        assert len(cs.rms_envelope(rir)) == 200

    def test_ensemble_mean_tracks_exponential(self):
        # Oracle: the pointwise ensemble average of envelopes of
        # exp(-delta t) * white noise converges to exp(-delta t) (up to the
        # small chi-distribution bias of short windows).
        fs, L, w, delta = 8000, 8000, 40, 4.0
        t = np.arange(L) / fs
        shape = np.exp(-delta * t)
        acc = np.zeros(L // w)
        m = 1000
        rng = np.random.default_rng(7)
        for _ in range(m):
            sig = shape * rng.standard_normal(L)
            acc += cs.rms_envelope(cs.Rir(sig, fs), w)
        mean_env = acc / m
        centers = (np.arange(L // w) + 0.5) * w / fs
        expected = np.exp(-delta * centers)
        mask = expected >= 10 ** (-60 / 20)  # above the -60 dB point
        rel = np.abs(mean_env[mask] - expected[mask]) / expected[mask]
        assert np.max(rel) < 0.05

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(3)
        sig = rng.standard_normal(2400)
        e1 = cs.rms_envelope(cs.Rir(sig, FS), 120)
        e2 = cs.rms_envelope(cs.Rir(-sig, FS), 120)
        np.testing.assert_array_equal(e1, e2)

    def test_window_errors(self):
        rir = cs.Rir(np.ones(100), FS)
        with pytest.raises(cs.InvalidWindowError):
            cs.rms_envelope(rir, 101)
        with pytest.raises(cs.InvalidWindowError):
            cs.rms_envelope(rir, 0)

    def test_empty_rir(self):
        with pytest.raises(cs.InvalidWindowError):
            cs.rms_envelope(cs.Rir(np.array([]), FS), 10)


class TestExtractBandedEnvelope:
    def test_shapes_and_centers(self):
        rir = cs.Rir(np.random.default_rng(2).standard_normal(48000), FS, position_id="p0")
        banded = cs.extract_banded_envelope(rir, window_len=240)
        assert banded.values.shape == (7, 200)
        assert banded.band_centers == cs.DEFAULT_BAND_CENTERS
        assert banded.position_id == "p0"
        assert banded.hop == banded.window_len == 240

    def test_broadband_with_empty_band_list(self):
        rir = cs.Rir(np.random.default_rng(2).standard_normal(4800), FS)
        banded = cs.extract_banded_envelope(rir, band_centers=[], window_len=240)
        assert banded.values.shape == (1, 20)
        assert banded.band_centers == (None,)


class TestSchroederEdf:
    def test_unit_impulse(self):
        rir = cs.Rir(np.concatenate([[1.0], np.zeros(9)]), FS)
        edf = cs.schroeder_edf(rir, normalize=True)
        np.testing.assert_array_equal(edf.values, np.concatenate([[1.0], np.zeros(9)]))
        assert edf.normalized

    def test_exponential_energy_gives_linear_log_slope(self):
        # Oracle: with h^2 = exp(-t/tau) the backward sum is geometric:
        # EDF(t) = (exp(-t/tau) - exp(-L/tau)) / (1 - exp(-1/tau)), so away
        # from the tail log10(EDF) is linear with slope -1/(tau ln 10).
        tau = 2000.0
        L = 20000
        t = np.arange(L)
        rir = cs.Rir(np.exp(-t / (2 * tau)), FS)
        edf = cs.schroeder_edf(rir)
        log_edf = np.log10(edf.values[:8000])
        slopes = np.diff(log_edf)
        expected = -1.0 / (tau * np.log(10.0))
        np.testing.assert_allclose(slopes, expected, rtol=0, atol=1e-6)

    def test_zero_tail_is_exactly_zero(self):
        rir = cs.Rir(np.concatenate([np.ones(10), np.zeros(5)]), FS)
        edf = cs.schroeder_edf(rir)
        assert np.all(edf.values[10:] == 0.0)

    def test_non_increasing_and_normalized_head(self):
        rng = np.random.default_rng(11)
        rir = cs.Rir(rng.standard_normal(5000) * np.exp(-np.arange(5000) / 800), FS)
        edf = cs.schroeder_edf(rir, normalize=True)
        assert np.all(np.diff(edf.values) <= 0)
        assert edf.values[0] == 1.0

    def test_all_zero_normalize_rejected(self):
        with pytest.raises(cs.DegenerateInputError):
            cs.schroeder_edf(cs.Rir(np.zeros(16), FS), normalize=True)


class TestPowerScale:
    def test_square_root(self):
        np.testing.assert_allclose(cs.power_scale([4.0]), [2.0])

    def test_zero_maps_to_floor_root(self):
        np.testing.assert_allclose(cs.power_scale([0.0]), [POWER_FLOOR**0.5])

    def test_factor_one_identity_above_floor(self):
        vals = np.array([1e-9, 0.5, 3.0])
        np.testing.assert_array_equal(cs.power_scale(vals, factor=1.0), vals)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            cs.power_scale([-0.1])

    def test_factor_range(self):
        for bad in (0.0, 1.5, -0.5):
            with pytest.raises(ValueError):
                cs.power_scale([1.0], factor=bad)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1e6), min_size=1, max_size=30),
        st.floats(min_value=0.05, max_value=1.0),
    )
    def test_monotone_and_commutes_with_sorting(self, values, factor):
        arr = np.array(values)
        scaled = cs.power_scale(arr, factor)
        np.testing.assert_allclose(
            np.sort(scaled), cs.power_scale(np.sort(arr), factor), rtol=1e-12
        )
        order = np.argsort(arr, kind="stable")
        assert np.all(np.diff(scaled[order]) >= -1e-15)


class TestDomainTypes:
    def test_rir_rejects_nan(self):
        with pytest.raises(ValueError):
            cs.Rir(np.array([0.0, np.nan]), FS)

    def test_rir_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            cs.Rir(np.zeros(4), 0)

    def test_edf_must_not_increase(self):
        with pytest.raises(ValueError):
            cs.Edf(np.array([1.0, 2.0]))

    def test_normalized_edf_must_start_at_one(self):
        with pytest.raises(ValueError):
            cs.Edf(np.array([0.9, 0.5]), normalized=True)

    def test_banded_envelope_rejects_negative(self):
        with pytest.raises(ValueError):
            cs.BandedEnvelope(np.array([[-0.1, 0.0]]), (None,), window_len=4, sample_rate=FS)
