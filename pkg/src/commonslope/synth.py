"""Resynthesis of impulse responses from fitted envelopes.

A band response is shaped Gaussian noise: unit-RMS (band-passed) noise
multiplied by the envelope upsampled back to the audio rate.  The broadband
response is the plain sum over bands.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import sosfiltfilt

from .signal import Rir, design_band_sos


def upsample_envelope(
    envelope: np.ndarray, window_len: int, length: int
) -> np.ndarray:
    """Piecewise-linear upsampling of an envelope to the audio rate.

    Envelope points are anchored at the window centers
    ``(m + 0.5) * window_len``; values are interpolated linearly in between
    and held constant outside the first/last anchors.
    """
    centers = (np.arange(len(envelope)) + 0.5) * window_len
    return np.interp(np.arange(length, dtype=np.float64), centers, envelope)


def synth_band(
    envelope,
    band_center: float | None,
    window_len: int,
    sample_rate: int,
    seed,
    length: int | None = None,
) -> Rir:
    """Synthesize one band response as envelope-shaped Gaussian noise.

    The noise carrier is drawn at full length, band-passed with the same
    zero-phase filter as the analysis filterbank (skipped for
    ``band_center=None``, i.e. broadband), renormalised to unit RMS so the
    envelope alone carries level, then multiplied by the upsampled envelope.
    Deterministic given the seed.

    Parameters
    ----------
    envelope : ndarray
        Nonnegative envelope values on the window grid.
    band_center : float or None
        Octave-band center in Hz, or ``None`` for an unfiltered carrier.
    window_len : int
        Envelope window length in samples.
    sample_rate : int
        Output sample rate in Hz.
    seed : int or SeedSequence
        Noise seed, recorded by callers for reproducibility.
    length : int, optional
        Output length in samples; defaults to ``len(envelope) * window_len``.
    """
    envelope = np.asarray(envelope, dtype=np.float64)
    if np.any(envelope < 0):
        raise ValueError("envelope values must be nonnegative")
    if length is None:
        length = len(envelope) * window_len

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(length)
    if band_center is not None:
        sos = design_band_sos(band_center, sample_rate)
        padlen = min(3 * (2 * sos.shape[0] + 1), length - 1)
        noise = sosfiltfilt(sos, noise, padlen=max(padlen, 0))
    rms = np.sqrt(np.mean(noise**2))
    if rms > 0:
        noise = noise / rms

    shaped = upsample_envelope(envelope, window_len, length) * noise
    return Rir(shaped, sample_rate, band=band_center)


def synth_broadband(band_rirs) -> Rir:
    """Sum band responses into a broadband response.

    All inputs must share length and sample rate; the band tag of the
    result is cleared.
    """
    band_rirs = list(band_rirs)
    if not band_rirs:
        raise ValueError("need at least one band response")
    length = len(band_rirs[0].samples)
    fs = band_rirs[0].sample_rate
    for rir in band_rirs[1:]:
        if len(rir.samples) != length:
            raise ValueError("band responses differ in length")
        if rir.sample_rate != fs:
            raise ValueError("band responses differ in sample rate")
    total = np.sum([rir.samples for rir in band_rirs], axis=0)
    return Rir(total, fs, position_id=band_rirs[0].position_id, band=None)
