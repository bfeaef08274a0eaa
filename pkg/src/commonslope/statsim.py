"""Statistical coupled-room simulator and its closed-form envelope oracle.

A room is modelled as exponentially decaying Gaussian noise; a room-to-room
path is the convolution of the per-room responses.  Decay rates ``delta``
are *energy* decay rates throughout: a room's mean energy envelope is
``exp(-delta * t)`` and its amplitude envelope ``exp(-delta * t / 2)``.
Under this convention the ensemble mean-square envelope of a chain is, up
to a fixed sample-rate factor, exactly the difference-of-exponentials form
returned by :func:`analytic_envelope` (variances of independent sequences
convolve), which is what makes the oracle usable for validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.signal import fftconvolve

from .errors import NearSingularError
from .signal import Rir

#: Amplitude floor below which a room response is truncated in convolutions.
_TRUNC_FLOOR = 1e-7


@dataclass
class RoomChain:
    """A simulated room-to-room path.

    ``decay_rates`` are the per-room energy decay rates in 1/s along the
    path; an entry of ``None`` stands for an ideal aperture (a unit-impulse
    link that leaves the signal unchanged).
    """

    decay_rates: tuple
    length: int
    sample_rate: int
    seed: int = 0
    position_id: str | None = None

    def __post_init__(self):
        self.decay_rates = tuple(self.decay_rates)
        if len(self.decay_rates) == 0:
            raise ValueError("a chain needs at least one room")
        for d in self.decay_rates:
            if d is not None and d <= 0:
                raise ValueError("decay rates must be positive")
        if self.length <= 0:
            raise ValueError("length must be positive")


def gen_room_response(
    delta: float, length: int, sample_rate: int, seed
) -> Rir:
    """Exponentially decaying Gaussian noise for a single room.

    ``h[t] = exp(-delta * t / (2 * fs)) * n[t]`` with ``n`` standard normal,
    so the mean energy envelope is ``exp(-delta * t / fs)``: ``delta`` is
    the energy decay rate.  Deterministic given the seed.
    """
    if delta is None or delta <= 0:
        raise ValueError("decay rate must be positive")
    if length <= 0:
        raise ValueError("length must be positive")
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    samples = np.exp(-delta * t / (2.0 * sample_rate)) * rng.standard_normal(length)
    return Rir(samples, sample_rate)


def _room_lengths(decay_rates, length: int, sample_rate: int) -> list[int]:
    """Per-room generation lengths; fast rooms are truncated where their
    amplitude envelope falls below ``_TRUNC_FLOOR`` (single rooms never are)."""
    if len(decay_rates) == 1:
        return [length]
    out = []
    for d in decay_rates:
        if d is None:
            out.append(1)
            continue
        n = int(np.ceil(2.0 * sample_rate * np.log(1.0 / _TRUNC_FLOOR) / d))
        out.append(min(length, max(n, 1)))
    return out


def chain_response(chain: RoomChain) -> Rir:
    """Room-to-room response: convolution of independently seeded rooms.

    Per-room seeds are spawned deterministically from ``chain.seed``; the
    sequential convolution is truncated to ``chain.length``.  Rooms whose
    amplitude envelope decays below 1e-7 within the chain are generated only
    out to that point (the discarded tail is more than 140 dB down).
    """
    seeds = np.random.SeedSequence(chain.seed).spawn(len(chain.decay_rates))
    lengths = _room_lengths(chain.decay_rates, chain.length, chain.sample_rate)

    out = None
    for delta, seed, n in zip(chain.decay_rates, seeds, lengths):
        if delta is None:
            h = np.ones(1)
        else:
            h = gen_room_response(delta, n, chain.sample_rate, seed).samples
        if out is None:
            out = h
        else:
            out = fftconvolve(out, h)[: chain.length]
    out = out[: chain.length]
    if len(out) < chain.length:
        out = np.pad(out, (0, chain.length - len(out)))
    return Rir(out, chain.sample_rate, position_id=chain.position_id)


def analytic_envelope(decay_rates, times) -> np.ndarray:
    """Closed-form mean-square envelope of a room chain.

    For two rooms ``sigma(t) = (exp(-d1 t) - exp(-d2 t)) / (d2 - d1)``; for
    ``k`` rooms the partial-fraction generalisation
    ``sigma(t) = sum_i (prod_{j != i} 1 / (d_j - d_i)) * exp(-d_i t)``.
    This is the convolution of the rooms' unit-height energy envelopes, the
    quantity the ensemble mean-square of :func:`chain_response` converges to
    (up to a factor ``sample_rate``); RMS-envelope comparisons use its
    square root.  Negative times evaluate to 0.

    Raises ``NearSingularError`` when two rates coincide within 1e-9
    relative; perturb the rates instead (the confluent limit is out of
    scope).
    """
    rates = np.asarray(decay_rates, dtype=np.float64)
    if rates.ndim != 1 or len(rates) == 0:
        raise ValueError("decay_rates must be a non-empty sequence")
    if np.any(rates <= 0):
        raise ValueError("decay rates must be positive")
    scale = np.max(rates)
    for i in range(len(rates)):
        for j in range(i + 1, len(rates)):
            if abs(rates[i] - rates[j]) <= 1e-9 * scale:
                raise NearSingularError(
                    f"decay rates {rates[i]} and {rates[j]} coincide within 1e-9 "
                    "relative; perturb one of them"
                )
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros_like(times)
    pos = times >= 0
    for i, di in enumerate(rates):
        coef = 1.0
        for j, dj in enumerate(rates):
            if j != i:
                coef /= dj - di
        out[pos] += coef * np.exp(-di * times[pos])
    return out


def expected_ms_envelope(chain: RoomChain) -> np.ndarray:
    """Exact per-sample expected energy envelope of :func:`chain_response`.

    Computed by convolving the rooms' squared amplitude envelopes at full
    length (no truncation), so it includes all discrete-time effects.  This
    is the independent oracle the statistical tests compare against.
    """
    fs = chain.sample_rate
    t = np.arange(chain.length, dtype=np.float64)
    out = None
    for delta in chain.decay_rates:
        env2 = np.ones(1) if delta is None else np.exp(-delta * t / fs)
        out = env2 if out is None else fftconvolve(out, env2)[: chain.length]
    return out[: chain.length]


def ensemble_rms_envelope(
    chain: RoomChain,
    n_realizations: int,
    window_len: int,
    batch: int = 16,
    dtype=np.float32,
) -> np.ndarray:
    """Ensemble RMS envelope of many independent chain realizations.

    Draws ``n_realizations`` chains (seeded from ``chain.seed``), accumulates
    their squared samples, and returns the square root of the mean energy in
    non-overlapping windows: an estimate of the true RMS envelope at the
    window centers, converging as ``O(1/sqrt(n))``.

    Realizations are generated in batches with FFT convolution in single
    precision by default, which changes the individual draws relative to
    looping :func:`chain_response` but not their distribution; accumulation
    happens in double precision.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    fs = chain.sample_rate
    L = chain.length
    lengths = _room_lengths(chain.decay_rates, L, fs)
    envs = []
    for delta, n in zip(chain.decay_rates, lengths):
        t = np.arange(n, dtype=np.float64)
        env = np.ones(1) if delta is None else np.exp(-delta * t / (2.0 * fs))
        envs.append(env.astype(dtype))

    nfft = next_fast_len(sum(len(e) for e in envs) - len(envs) + 1)
    rng = np.random.default_rng(np.random.SeedSequence(chain.seed))
    acc = np.zeros(L)
    done = 0
    while done < n_realizations:
        b = min(batch, n_realizations - done)
        spectrum = None
        for env in envs:
            x = rng.standard_normal((b, len(env)), dtype=dtype) * env
            fx = rfft(x, nfft, axis=1)
            spectrum = fx if spectrum is None else spectrum * fx
        h = irfft(spectrum, nfft, axis=1)[:, :L]
        acc += np.sum(h.astype(np.float64) ** 2, axis=0)
        done += b

    n_win = L // window_len
    mean_energy = acc[: n_win * window_len].reshape(n_win, window_len).mean(axis=1)
    return np.sqrt(mean_energy / n_realizations)


#: Desk-scale three-room scenario: the source room decays fastest, the
#: middle room is the most reverberant, the far room sits in between.
THREE_ROOM_RATES = {"R1": 30.0, "R2": 6.0, "R3": 12.0}


def three_room_preset(
    n_positions: int = 10,
    length: int = 96000,
    sample_rate: int = 48000,
    seed: int = 2024,
) -> dict:
    """Simulation config for a three-coupled-room scenario.

    Positions cycle through the rooms; a receiver in the source room sees a
    single-slope response, receivers in the further rooms see two- and
    three-room chains with fade-in.  The returned dict is a valid
    ``simulate`` configuration.
    """
    d1, d2, d3 = (THREE_ROOM_RATES[r] for r in ("R1", "R2", "R3"))
    chains = {"R1": [d1], "R2": [d1, d2], "R3": [d1, d2, d3]}
    rooms = ["R1", "R2", "R3"]
    positions = []
    for i in range(n_positions):
        room = rooms[i % 3]
        positions.append(
            {"id": f"{room.lower()}_p{i:03d}", "decay_rates": chains[room]}
        )
    return {
        "sample_rate": sample_rate,
        "length": length,
        "seed": seed,
        "positions": positions,
    }
