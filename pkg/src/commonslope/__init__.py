"""Common-slope reverberation modelling with fade-in support.

The package fits sets of room impulse responses with a shared collection of
decay kernels whose per-position amplitudes may be negative (capturing the
initial energy rise of room-to-room responses), resynthesizes responses from
the fitted parameters, and ships a statistical coupled-room simulator with a
closed-form envelope oracle for validation.
"""

from .decay import (
    DecayEstimate,
    DecayKernelSet,
    build_kernels,
    cluster_decay_times,
    decay_kernel,
    decay_rate_from_kernel_time,
    fit_edf_decays,
    kernel_time_from_decay_rate,
    kernel_time_from_t60,
    kmeans_1d,
    t60_from_kernel_time,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    InsufficientDataError,
    InvalidBandError,
    InvalidWindowError,
    NearSingularError,
)
from .metrics import c50, c50_error, envelope_rmse
from .signal import (
    DEFAULT_BAND_CENTERS,
    BandedEnvelope,
    Edf,
    Rir,
    default_window_len,
    extract_banded_envelope,
    octave_filterbank,
    power_scale,
    rms_envelope,
    schroeder_edf,
)
from .slopes import (
    FADE_IN,
    POS_ONLY,
    SlopeFit,
    default_skip_head,
    fit_dataset,
    fit_envelope,
    model_envelope,
)
from .statsim import (
    RoomChain,
    analytic_envelope,
    chain_response,
    ensemble_rms_envelope,
    expected_ms_envelope,
    gen_room_response,
    three_room_preset,
)
from .synth import synth_band, synth_broadband, upsample_envelope

__version__ = "0.1.0"

__all__ = [
    "BandedEnvelope",
    "ConfigError",
    "DEFAULT_BAND_CENTERS",
    "DecayEstimate",
    "DecayKernelSet",
    "DegenerateInputError",
    "Edf",
    "FADE_IN",
    "InsufficientDataError",
    "InvalidBandError",
    "InvalidWindowError",
    "NearSingularError",
    "POS_ONLY",
    "Rir",
    "RoomChain",
    "SlopeFit",
    "analytic_envelope",
    "build_kernels",
    "c50",
    "c50_error",
    "chain_response",
    "cluster_decay_times",
    "decay_kernel",
    "decay_rate_from_kernel_time",
    "default_skip_head",
    "default_window_len",
    "ensemble_rms_envelope",
    "envelope_rmse",
    "expected_ms_envelope",
    "extract_banded_envelope",
    "fit_dataset",
    "fit_edf_decays",
    "fit_envelope",
    "gen_room_response",
    "kernel_time_from_decay_rate",
    "kernel_time_from_t60",
    "kmeans_1d",
    "model_envelope",
    "octave_filterbank",
    "power_scale",
    "rms_envelope",
    "schroeder_edf",
    "synth_band",
    "synth_broadband",
    "t60_from_kernel_time",
    "three_room_preset",
    "upsample_envelope",
]
