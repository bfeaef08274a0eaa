"""Band splitting, envelope extraction, energy decay functions and scaling.

These are the shared signal primitives: an octave filterbank for splitting
impulse responses into bands, a non-overlapping moving-RMS envelope with a
small smoothing post-filter, backward-integrated energy decay functions, and
the power-law scaling applied before every least-squares fit.  All amplitude
quantities are linear; decibels only ever appear in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import DegenerateInputError, InvalidBandError, InvalidWindowError

#: Octave-band centers used throughout when none are given, in Hz.
DEFAULT_BAND_CENTERS = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0)

#: Floor applied before fractional powers so gradients stay finite at silence.
POWER_FLOOR = 1e-12

#: Smoothing kernel applied to the raw moving-RMS envelope (edges replicated).
_ENVELOPE_SMOOTHER = np.array([0.25, 0.5, 0.25])


@dataclass
class Rir:
    """A sampled room impulse response.

    Parameters
    ----------
    samples : ndarray
        Linear-amplitude pressure samples.
    sample_rate : int
        Sample rate in Hz, > 0.
    position_id : str, optional
        Label of the source-receiver configuration this response belongs to.
    band : float, optional
        Octave-band center in Hz if the response is band-limited,
        ``None`` for broadband.
    """

    samples: np.ndarray
    sample_rate: int
    position_id: str | None = None
    band: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite (no NaN/Inf)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self.samples) / self.sample_rate


@dataclass
class BandedEnvelope:
    """Per-band downsampled RMS envelope of a RIR.

    ``values`` has shape ``(n_bands, n_points)``; point ``m`` summarises the
    non-overlapping window ``[m * window_len, (m + 1) * window_len)`` and is
    anchored at the window center ``(m + 0.5) * window_len`` samples.
    ``band_centers`` entries may be ``None`` for broadband envelopes.
    """

    values: np.ndarray
    band_centers: tuple
    window_len: int
    sample_rate: int
    hop: int = field(default=0)
    position_id: str | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        self.band_centers = tuple(self.band_centers)
        if self.hop == 0:
            self.hop = self.window_len
        if self.hop != self.window_len:
            raise ValueError("hop must equal window_len (non-overlapping windows)")
        if self.values.shape[0] != len(self.band_centers):
            raise ValueError("values and band_centers disagree on band count")
        if np.any(self.values < 0):
            raise ValueError("envelope values must be nonnegative")
        if self.window_len < 1:
            raise InvalidWindowError("window_len must be >= 1")

    @property
    def n_bands(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def band(self, index: int) -> np.ndarray:
        """Values of one band."""
        return self.values[index]

    def times(self) -> np.ndarray:
        """Window-center instants in seconds."""
        m = np.arange(self.n_points)
        return (m + 0.5) * self.window_len / self.sample_rate


@dataclass
class Edf:
    """Backward-integrated energy decay function.

    ``values[t]`` is the energy remaining from sample ``t`` to the end; the
    sequence is non-increasing by construction.  When ``normalized`` the
    first value is exactly 1.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("EDF values must be one-dimensional")
        if np.any(np.diff(self.values) > 0):
            raise ValueError("EDF must be non-increasing")
        if np.any(self.values < 0):
            raise ValueError("EDF must be nonnegative")
        if self.normalized and (len(self.values) == 0 or self.values[0] != 1.0):
            raise ValueError("normalized EDF must start at exactly 1")

    def __len__(self):
        return len(self.values)


def band_edges(center: float) -> tuple[float, float]:
    """Octave band edges: ``center / sqrt(2)`` and ``center * sqrt(2)``."""
    return center / np.sqrt(2.0), center * np.sqrt(2.0)


def design_band_sos(center: float, sample_rate: int) -> np.ndarray:
    """Design the 4th-order Butterworth band-pass for one octave band.

    The filter is meant to run forward-backward (zero phase), making it
    8th-order effective.  Raises ``InvalidBandError`` if the upper band edge
    reaches Nyquist.
    """
    lo, hi = band_edges(center)
    nyq = sample_rate / 2.0
    if hi >= nyq:
        raise InvalidBandError(
            f"band at {center:g} Hz has upper edge {hi:.1f} Hz >= Nyquist {nyq:.1f} Hz"
        )
    if lo <= 0:
        raise InvalidBandError(f"band at {center:g} Hz has nonpositive lower edge")
    return butter(2, [lo / nyq, hi / nyq], btype="bandpass", output="sos")


def octave_filterbank(rir: Rir, band_centers=None) -> list[Rir]:
    """Split a RIR into octave bands with zero-phase band-pass filters.

    Parameters
    ----------
    rir : Rir
        Broadband input response.
    band_centers : sequence of float, optional
        Strictly increasing octave-band centers in Hz.  Defaults to the
        7 bands 125 Hz .. 8 kHz.

    Returns
    -------
    list of Rir
        One filtered copy per band, same length as the input, with the
        ``band`` tag set.
    """
    if band_centers is None:
        band_centers = DEFAULT_BAND_CENTERS
    band_centers = [float(c) for c in band_centers]
    if any(b <= a for a, b in zip(band_centers, band_centers[1:])):
        raise InvalidBandError("band centers must be strictly increasing")

    out = []
    for center in band_centers:
        sos = design_band_sos(center, rir.sample_rate)
        # sosfiltfilt needs padlen < signal length; shrink it for short inputs.
        padlen = min(3 * (2 * sos.shape[0] + 1), len(rir.samples) - 1)
        filtered = sosfiltfilt(sos, rir.samples, padlen=max(padlen, 0))
        out.append(
            Rir(filtered, rir.sample_rate, position_id=rir.position_id, band=center)
        )
    return out


def default_window_len(n_samples: int, target_points: int = 200) -> int:
    """Window length giving roughly ``target_points`` envelope points."""
    return max(1, int(round(n_samples / target_points)))


def rms_envelope(rir: Rir, window_len: int | None = None) -> np.ndarray:
    """Short-term RMS envelope over non-overlapping windows.

    The raw window RMS values are smoothed with a fixed 3-point kernel
    ``[0.25, 0.5, 0.25]`` (edges replicated), the package's envelope
    low-pass.  Output length is ``floor(len(rir) / window_len)``.

    Parameters
    ----------
    rir : Rir
        Input response (any band).
    window_len : int, optional
        Averaging window in samples; defaults to ``round(len / 200)`` so a
        48000-sample response yields a 200-point envelope.

    Returns
    -------
    ndarray
        Nonnegative envelope values, one per window.
    """
    n = len(rir.samples)
    if n == 0:
        raise InvalidWindowError("cannot compute the envelope of an empty RIR")
    if window_len is None:
        window_len = default_window_len(n)
    if window_len < 1:
        raise InvalidWindowError("window_len must be >= 1")
    if window_len > n:
        raise InvalidWindowError(f"window_len {window_len} exceeds signal length {n}")

    n_win = n // window_len
    x = rir.samples[: n_win * window_len]
    raw = np.sqrt(np.mean(x.reshape(n_win, window_len) ** 2, axis=1))
    return _smooth_envelope(raw)


def _smooth_envelope(values: np.ndarray) -> np.ndarray:
    """3-point moving average with replicated edges."""
    if len(values) < 2:
        return values.copy()
    padded = np.concatenate([values[:1], values, values[-1:]])
    return np.convolve(padded, _ENVELOPE_SMOOTHER, mode="valid")


def extract_banded_envelope(
    rir: Rir, band_centers=None, window_len: int | None = None
) -> BandedEnvelope:
    """Filterbank + per-band RMS envelope in one step.

    With ``band_centers=None`` the default 7 octave bands are used; pass an
    empty sequence to get a single broadband envelope instead.
    """
    if window_len is None:
        window_len = default_window_len(len(rir.samples))
    if band_centers is not None and len(list(band_centers)) == 0:
        values = rms_envelope(rir, window_len)[np.newaxis, :]
        centers = (None,)
    else:
        bands = octave_filterbank(rir, band_centers)
        values = np.stack([rms_envelope(b, window_len) for b in bands])
        centers = tuple(b.band for b in bands)
    return BandedEnvelope(
        values,
        centers,
        window_len=window_len,
        sample_rate=rir.sample_rate,
        position_id=rir.position_id,
    )


def schroeder_edf(rir: Rir, normalize: bool = False) -> Edf:
    """Backward-integrated squared response (energy decay function).

    ``values[t] = sum(h[tau]**2 for tau >= t)``; with ``normalize`` the curve
    is divided by its first value.  An all-zero RIR cannot be normalized and
    raises ``DegenerateInputError``.
    """
    if len(rir.samples) == 0:
        raise DegenerateInputError("cannot integrate an empty RIR")
    energy = rir.samples**2
    edf = np.cumsum(energy[::-1])[::-1]
    if normalize:
        if edf[0] == 0.0:
            raise DegenerateInputError("cannot normalize the EDF of an all-zero RIR")
        edf = edf / edf[0]
    return Edf(edf, normalized=normalize)


def power_scale(values, factor: float = 0.5) -> np.ndarray:
    """Power-law compression applied before least-squares fitting.

    Computes ``max(v, floor) ** factor`` elementwise with a fixed floor of
    1e-12 so the gradient stays finite at silent regions.  ``factor`` must
    lie in (0, 1]; negative inputs are a domain error.
    """
    if not 0.0 < factor <= 1.0:
        raise ValueError(f"factor must be in (0, 1], got {factor}")
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0):
        raise ValueError("power_scale input must be nonnegative")
    return np.maximum(values, POWER_FLOOR) ** factor
