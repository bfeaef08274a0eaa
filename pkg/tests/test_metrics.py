"""Envelope RMSE and speech-clarity metrics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import commonslope as cs
from conftest import make_fadein_trial, synthesize_from_fit

FS = 48000


class TestEnvelopeRmse:
    def test_identical_is_zero(self):
        env = np.linspace(1.0, 0.0, 50)
        assert cs.envelope_rmse(env, env) == 0.0

    def test_constant_offset(self):
        ref = np.linspace(1.0, 0.0, 50)
        assert cs.envelope_rmse(ref + 0.25, ref) == pytest.approx(0.25, rel=1e-12)

    def test_skip_head_masks_disagreement(self):
        ref = np.ones(20)
        fit = ref.copy()
        fit[:5] = 99.0
        assert cs.envelope_rmse(fit, ref, skip_head=5) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cs.envelope_rmse(np.ones(5), np.ones(6))

    def test_skip_head_bounds(self):
        with pytest.raises(ValueError):
            cs.envelope_rmse(np.ones(5), np.ones(5), skip_head=5)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(min_value=0, max_value=10), min_size=2, max_size=20),
        st.lists(st.floats(min_value=0, max_value=10), min_size=2, max_size=20),
    )
    def test_metric_properties(self, a, b):
        n = min(len(a), len(b))
        x, y = np.array(a[:n]), np.array(b[:n])
        d_xy = cs.envelope_rmse(x, y)
        assert d_xy >= 0.0
        assert d_xy == cs.envelope_rmse(y, x)
        if np.array_equal(x, y):
            assert d_xy == 0.0
        if d_xy == 0.0:
            # zero iff equal, up to differences whose square underflows
            assert np.max(np.abs(x - y)) < 1e-150


class TestC50:
    def test_unit_impulse_is_infinite(self):
        rir = cs.Rir(np.concatenate([[1.0], np.zeros(FS // 10)]), FS)
        assert cs.c50(rir) == math.inf

    def test_exponential_balanced_at_zero_db(self):
        # h^2(t) = exp(-t / tau) with tau = 0.05 / ln 2 puts exactly half the
        # energy in the first 50 ms (closed-form exponential integrals).
        tau = 0.05 / np.log(2.0)
        t = np.arange(int(1.5 * FS)) / FS
        rir = cs.Rir(np.exp(-t / (2.0 * tau)), FS)
        assert abs(cs.c50(rir)) < 0.05

    def test_equal_energy_regions_exactly_zero(self):
        boundary = int(round(0.05 * FS))
        samples = np.zeros(2 * boundary)
        samples[0] = 1.0
        samples[boundary] = 1.0
        assert cs.c50(cs.Rir(samples, FS)) == 0.0

    def test_boundary_sample_is_late(self):
        boundary = int(round(0.05 * FS))
        samples = np.zeros(boundary + 1)
        samples[0] = 1.0
        samples[boundary] = 2.0
        expected = 10 * math.log10(1.0 / 4.0)
        assert cs.c50(cs.Rir(samples, FS)) == pytest.approx(expected, rel=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal(FS // 2) * np.exp(-np.arange(FS // 2) / 4000)
        rir = cs.Rir(samples, FS)
        scaled = cs.Rir(3.7 * samples, FS)
        assert cs.c50(rir) == pytest.approx(cs.c50(scaled), rel=1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(cs.DegenerateInputError):
            cs.c50(cs.Rir(np.zeros(FS // 10), FS))

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            cs.c50(cs.Rir(np.ones(100), FS))


class TestC50Error:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal(FS // 2) * np.exp(-np.arange(FS // 2) / 4000)
        rir = cs.Rir(samples, FS)
        assert cs.c50_error(rir, rir) == 0.0

    def test_scaled_synthesis_is_zero_error(self):
        rng = np.random.default_rng(2)
        samples = rng.standard_normal(FS // 2) * np.exp(-np.arange(FS // 2) / 4000)
        rir = cs.Rir(samples, FS)
        doubled = cs.Rir(2.0 * samples, FS)
        assert cs.c50_error(rir, doubled) == pytest.approx(0.0, abs=1e-12)

    def test_fadein_mode_has_smaller_error_on_fadein_rirs(self):
        # Reduced-size version of the end-to-end comparison (the acceptance
        # suite runs the full 50-trial battery).
        errors = {cs.FADE_IN: [], cs.POS_ONLY: []}
        for seed in range(12):
            trial = make_fadein_trial(7000 + seed)
            for mode in errors:
                synth = synthesize_from_fit(trial, mode, seed=9000 + seed)
                errors[mode].append(abs(cs.c50_error(trial["rir"], synth)))
        assert np.median(errors[cs.FADE_IN]) < np.median(errors[cs.POS_ONLY])
