"""Quantitative comparison of fitted and synthesized responses."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateInputError
from .signal import Rir


def envelope_rmse(fitted, reference, skip_head: int = 0) -> float:
    """Root-mean-square error between two envelopes.

    ``sqrt(mean((reference - fitted)**2))`` over points ``t >= skip_head``;
    the mean counts only the evaluated points.
    """
    fitted = np.asarray(fitted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if fitted.shape != reference.shape:
        raise ValueError(
            f"envelope shapes differ: {fitted.shape} vs {reference.shape}"
        )
    if not 0 <= skip_head < len(fitted):
        raise ValueError("skip_head must be smaller than the envelope length")
    diff = reference[skip_head:] - fitted[skip_head:]
    return float(np.sqrt(np.mean(diff**2)))


def c50(rir: Rir) -> float:
    """Speech clarity: early-to-late energy ratio in dB.

    Early energy is the sum of squared samples in the first 50 ms, late
    energy the rest; the boundary sample ``round(0.05 * fs)`` belongs to the
    late region.  Returns ``+inf`` when the late energy is zero.
    """
    n = len(rir.samples)
    boundary = int(round(0.05 * rir.sample_rate))
    if n < boundary:
        raise ValueError("RIR must cover at least 50 ms")
    energy = rir.samples**2
    early = float(np.sum(energy[:boundary]))
    late = float(np.sum(energy[boundary:]))
    if early == 0.0 and late == 0.0:
        raise DegenerateInputError("cannot compute C50 of an all-zero RIR")
    if late == 0.0:
        return math.inf
    return 10.0 * math.log10(early / late)


def c50_error(reference: Rir, synthesized: Rir) -> float:
    """Signed clarity error ``c50(reference) - c50(synthesized)`` in dB."""
    return c50(reference) - c50(synthesized)
