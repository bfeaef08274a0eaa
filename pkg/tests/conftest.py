"""Shared fixtures: seeded fade-in trial batteries reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

import commonslope as cs

FS = 48000
TRIAL_WINDOW = 240


def make_fadein_trial(seed: int, length: int = 72000, rates=None):
    """One simulated two-room fade-in response with both fit modes.

    Returns a dict with the chain, the broadband envelope, the (sorted-time)
    kernels built from the true decay rates, and the fade-in / pos-only fits.
    """
    rng = np.random.default_rng(seed)
    if rates is None:
        fast = rng.uniform(18.0, 40.0)
        slow = rng.uniform(4.0, 9.0)
        rates = (fast, slow)
    chain = cs.RoomChain(rates, length, FS, seed=seed)
    rir = cs.chain_response(chain)
    env = cs.rms_envelope(rir, TRIAL_WINDOW)
    times = np.sort([cs.kernel_time_from_decay_rate(d) for d in rates])
    kernels = cs.build_kernels(times[None, :], len(env), TRIAL_WINDOW, FS)
    fits = {
        mode: cs.fit_envelope(env, kernels, mode=mode)
        for mode in (cs.FADE_IN, cs.POS_ONLY)
    }
    return {
        "rates": rates,
        "chain": chain,
        "rir": rir,
        "envelope": env,
        "kernels": kernels,
        "fits": fits,
    }


def make_single_room_trial(seed: int, length: int = 72000, rate: float | None = None):
    """One single-room (monotone) response with both fit modes."""
    rng = np.random.default_rng(seed)
    if rate is None:
        rate = rng.uniform(8.0, 25.0)
    chain = cs.RoomChain((rate,), length, FS, seed=seed)
    rir = cs.chain_response(chain)
    env = cs.rms_envelope(rir, TRIAL_WINDOW)
    times = np.array([cs.kernel_time_from_decay_rate(rate)])
    kernels = cs.build_kernels(times[None, :], len(env), TRIAL_WINDOW, FS)
    fits = {
        mode: cs.fit_envelope(env, kernels, mode=mode)
        for mode in (cs.FADE_IN, cs.POS_ONLY)
    }
    return {
        "rates": (rate,),
        "chain": chain,
        "rir": rir,
        "envelope": env,
        "kernels": kernels,
        "fits": fits,
    }


def synthesize_from_fit(trial, mode: str, seed: int) -> cs.Rir:
    """Broadband resynthesis of a trial's fitted envelope (no band filter)."""
    fit = trial["fits"][mode]
    env = cs.model_envelope(fit, trial["kernels"], clamp=True).values[0]
    return cs.synth_band(env, None, TRIAL_WINDOW, FS, seed, length=trial["chain"].length)


@pytest.fixture(scope="session")
def fadein_trials():
    """50 seeded two-room fade-in trials (shared by nesting/sign/C50 tests)."""
    return [make_fadein_trial(seed) for seed in range(50)]


@pytest.fixture(scope="session")
def single_room_trials():
    """50 seeded single-room trials."""
    return [make_single_room_trial(1000 + seed) for seed in range(50)]
