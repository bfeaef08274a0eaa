"""Decay-time estimation, clustering, and decay-kernel construction.

Decay shapes throughout the package are exponentials of the form
``exp(ln(1e-6) * t / (fs * T))`` which reach 1e-6 at ``t = fs * T`` samples.
One convention for ``T`` flows through the whole system (see
``kernel_time_from_t60``): because the same kernel shapes *amplitude*
envelopes, the conventional energy T60 is half the kernel time.  EDF-domain
estimates are fitted in the energy domain and converted (doubled) before
they are returned, so every decay time downstream is a kernel time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, nnls

from .errors import InsufficientDataError
from .signal import Edf, power_scale

#: ln(1e-6), the exponent constant of every decay kernel.
LOG_DECAY_SPAN = float(np.log(1e-6))

#: Candidate kernel-time grid for EDF fits: 50 log-spaced values, seconds.
T_GRID = np.geomspace(0.05, 5.0, 50)

#: Bounds for the local refinement of kernel times, seconds.
_T_BOUNDS = (0.02, 20.0)

#: EDFs longer than this are evenly subsampled before fitting.
_MAX_FIT_POINTS = 1500

#: A model order is kept if its residual is within 5% of the best order's.
_PARSIMONY_SLACK = 0.05

#: Floor protecting the power-scaled objective's gradient near zero energy.
_SCALE_FLOOR = 1e-12


def kernel_time_from_t60(t60: float) -> float:
    """Kernel time equivalent to a conventional energy T60 (factor 2)."""
    return 2.0 * t60


def t60_from_kernel_time(kernel_time: float) -> float:
    """Conventional energy T60 equivalent to a kernel time (factor 1/2)."""
    return kernel_time / 2.0


def kernel_time_from_decay_rate(delta: float) -> float:
    """Kernel time whose amplitude kernel matches a room's energy decay rate.

    A room with energy decay rate ``delta`` (mean energy envelope
    ``exp(-delta * t)``) has amplitude envelope ``exp(-delta * t / 2)``,
    which equals the decay kernel with ``T = 2 * ln(1e6) / delta``.
    """
    if delta <= 0:
        raise ValueError("decay rate must be positive")
    return -2.0 * LOG_DECAY_SPAN / delta


def decay_rate_from_kernel_time(kernel_time: float) -> float:
    """Inverse of :func:`kernel_time_from_decay_rate`."""
    if kernel_time <= 0:
        raise ValueError("kernel time must be positive")
    return -2.0 * LOG_DECAY_SPAN / kernel_time


def decay_kernel(t_samples, kernel_time: float, sample_rate: int) -> np.ndarray:
    """Evaluate ``exp(ln(1e-6) * t / (fs * T))`` at sample instants ``t``.

    By construction the kernel is 1 at ``t = 0`` and exactly 1e-6 at
    ``t = fs * T``.
    """
    if kernel_time <= 0:
        raise ValueError("kernel time must be positive")
    t_samples = np.asarray(t_samples, dtype=np.float64)
    return np.exp(LOG_DECAY_SPAN * t_samples / (sample_rate * kernel_time))


@dataclass
class DecayEstimate:
    """Decay content of a single (RIR, band) pair estimated from its EDF.

    ``decay_times`` are kernel-convention times (twice the fitted energy
    decay times), sorted ascending.  ``amplitudes`` and ``noise_level`` are
    the nonnegative energy-domain amplitudes of the EDF fit.
    """

    decay_times: np.ndarray
    amplitudes: np.ndarray
    noise_level: float
    band_center: float | None = None
    position_id: str | None = None
    residual: float = 0.0

    def __post_init__(self):
        self.decay_times = np.asarray(self.decay_times, dtype=np.float64)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if np.any(self.decay_times <= 0):
            raise ValueError("decay times must be strictly positive")
        if np.any(np.diff(self.decay_times) < 0):
            raise ValueError("decay times must be sorted ascending")
        if np.any(self.amplitudes < 0):
            raise ValueError("EDF-fit amplitudes must be nonnegative")
        if self.noise_level < 0:
            raise ValueError("noise level must be nonnegative")

    @property
    def n_components(self) -> int:
        return len(self.decay_times)


@dataclass
class DecayKernelSet:
    """Common decay times per band plus their evaluated kernel matrices.

    ``common_times`` has shape ``(n_bands, K)``; ``kernel_matrix`` has shape
    ``(n_bands, envelope_len, K + 1)`` where column 0 is the constant noise
    kernel (all ones) and column ``k`` is the kernel of ``common_times[b, k-1]``
    evaluated at the envelope window centers ``t = (m + 0.5) * window_len``.
    """

    band_centers: tuple
    common_times: np.ndarray
    kernel_matrix: np.ndarray
    envelope_len: int
    sample_rate: int
    window_len: int

    def __post_init__(self):
        self.band_centers = tuple(self.band_centers)
        self.common_times = np.atleast_2d(np.asarray(self.common_times, dtype=np.float64))
        self.kernel_matrix = np.asarray(self.kernel_matrix, dtype=np.float64)

    @property
    def n_bands(self) -> int:
        return len(self.band_centers)

    @property
    def n_slopes(self) -> int:
        return self.common_times.shape[1]

    def band_index(self, center) -> int:
        """Index of a band by its center (``None`` selects broadband)."""
        for i, c in enumerate(self.band_centers):
            if c == center or (c is None and center is None):
                return i
        raise KeyError(f"no band with center {center!r}")

    def times(self) -> np.ndarray:
        """Envelope window-center instants in seconds."""
        m = np.arange(self.envelope_len)
        return (m + 0.5) * self.window_len / self.sample_rate


def build_kernels(
    common_times,
    envelope_len: int,
    window_len: int,
    sample_rate: int,
    band_centers=None,
) -> DecayKernelSet:
    """Evaluate decay kernels on an envelope time grid for every band.

    Parameters
    ----------
    common_times : dict or array-like
        Either ``{band_center: [T...]}`` or an ``(n_bands, K)`` array with
        ``band_centers`` given separately.  All times must be positive and
        every band must carry the same number of times.
    envelope_len : int
        Number of envelope points of the grid.
    window_len : int
        Envelope window length in samples (grid spacing).
    sample_rate : int
        Sample rate in Hz.
    """
    if isinstance(common_times, dict):
        band_centers = tuple(common_times.keys())
        rows = [np.sort(np.asarray(v, dtype=np.float64)) for v in common_times.values()]
        lengths = {len(r) for r in rows}
        if len(lengths) != 1:
            raise ValueError("all bands must share the same number of decay times")
        times = np.vstack(rows)
    else:
        times = np.atleast_2d(np.asarray(common_times, dtype=np.float64))
        if band_centers is None:
            band_centers = tuple([None] * times.shape[0])
        band_centers = tuple(band_centers)
        if len(band_centers) != times.shape[0]:
            raise ValueError("band_centers and common_times disagree on band count")
    if np.any(times <= 0):
        raise ValueError("decay times must be strictly positive")

    t = (np.arange(envelope_len) + 0.5) * window_len
    n_bands, k = times.shape
    matrix = np.ones((n_bands, envelope_len, k + 1))
    for b in range(n_bands):
        for j in range(k):
            matrix[b, :, j + 1] = decay_kernel(t, times[b, j], sample_rate)
    return DecayKernelSet(
        band_centers=band_centers,
        common_times=times,
        kernel_matrix=matrix,
        envelope_len=envelope_len,
        sample_rate=sample_rate,
        window_len=window_len,
    )


def _fit_points(n: int) -> np.ndarray:
    """Indices of the (possibly subsampled) EDF points used for fitting."""
    if n <= _MAX_FIT_POINTS:
        return np.arange(n)
    stride = int(np.ceil(n / _MAX_FIT_POINTS))
    return np.arange(0, n, stride)


def _group_grid_components(grid_amps: np.ndarray) -> list[tuple[float, float]]:
    """Collapse contiguous nonzero grid amplitudes into (T, weight) seeds."""
    seeds = []
    active = grid_amps > 0
    i = 0
    while i < len(active):
        if not active[i]:
            i += 1
            continue
        j = i
        while j < len(active) and active[j]:
            j += 1
        w = grid_amps[i:j]
        log_t = np.log(T_GRID[i:j])
        seeds.append((float(np.exp(np.dot(w, log_t) / w.sum())), float(w.sum())))
        i = j
    return seeds


def _refine(t_seeds, edf_vals, z, t_samples, sample_rate):
    """Joint local refinement of (T_k, A_k, N) with the power-scaled objective.

    The model is the energy-domain decay sum; residuals are differences of
    the power-scaled model and the power-scaled EDF ``z``.
    """
    k = len(t_seeds)
    design = np.ones((len(z), k + 1))
    for j, T in enumerate(t_seeds):
        design[:, j + 1] = decay_kernel(t_samples, T, sample_rate)
    amps, _ = nnls(design, edf_vals)

    x0 = np.concatenate([t_seeds, amps[1:], amps[:1]])
    lo = np.concatenate([np.full(k, _T_BOUNDS[0]), np.zeros(k + 1)])
    hi = np.concatenate([np.full(k, _T_BOUNDS[1]), np.full(k + 1, np.inf)])
    x0 = np.clip(x0, lo, hi + 0.0)

    def model(x):
        m = np.full(len(z), x[2 * k])
        for j in range(k):
            m = m + x[k + j] * decay_kernel(t_samples, x[j], sample_rate)
        return m

    def residuals(x):
        return power_scale(np.maximum(model(x), 0.0)) - z

    def jacobian(x):
        m = model(x)
        half = np.where(m > _SCALE_FLOOR, 0.5 / np.sqrt(np.maximum(m, _SCALE_FLOOR)), 0.0)
        jac = np.empty((len(z), 2 * k + 1))
        for j in range(k):
            psi = decay_kernel(t_samples, x[j], sample_rate)
            jac[:, j] = half * (
                -x[k + j] * psi * LOG_DECAY_SPAN * t_samples / (sample_rate * x[j] ** 2)
            )
            jac[:, k + j] = half * psi
        jac[:, 2 * k] = half
        return jac

    result = least_squares(
        residuals, x0, jac=jacobian, bounds=(lo, hi), method="trf", xtol=1e-14,
        ftol=1e-14, gtol=1e-14, max_nfev=200,
    )
    times = result.x[:k]
    amps = result.x[k : 2 * k]
    noise = result.x[2 * k]
    return times, amps, noise, float(np.sum(result.fun**2))


def fit_edf_decays(
    edf: Edf, sample_rate: int, max_components: int = 3
) -> DecayEstimate:
    """Estimate decay times of one EDF by nonnegative least squares.

    The energy-domain model ``N + sum_k A_k * psi(t; T_k)`` is fitted with
    the power-scaled objective (residuals are differences of square-rooted
    curves, the same scaling the envelope fits use).  A nonnegative fit over
    a log-spaced grid of candidate times seeds a joint local refinement per
    model order, and the order kept is the smallest one whose residual is
    within 5% of the best (parsimony).  The fitted energy decay times are
    returned in kernel convention, i.e. doubled.

    Parameters
    ----------
    edf : Edf
        Non-increasing energy decay function.
    sample_rate : int
        Sample rate of the underlying RIR in Hz.
    max_components : int
        Largest model order considered, 1..3.

    Returns
    -------
    DecayEstimate
        Kernel-convention decay times with the matching energy-domain
        amplitudes and noise level.
    """
    if not 1 <= max_components <= 3:
        raise ValueError("max_components must be between 1 and 3")
    if len(edf) < 10:
        raise InsufficientDataError("EDF must have at least 10 points")

    idx = _fit_points(len(edf))
    t_samples = idx.astype(np.float64)
    edf_vals = edf.values[idx]
    z = power_scale(edf_vals)

    # Order 0: constant noise only, solved in closed form.
    noise0 = float(np.mean(z)) ** 2
    resid0 = float(np.sum((np.sqrt(noise0) - z) ** 2))
    best_by_order = {0: ((), (), noise0, resid0)}

    # Grid NNLS over all candidate times at once to find component seeds.
    design = np.ones((len(z), len(T_GRID) + 1))
    for j, T in enumerate(T_GRID):
        design[:, j + 1] = decay_kernel(t_samples, T, sample_rate)
    grid_amps, _ = nnls(design, edf_vals)
    seeds = _group_grid_components(grid_amps[1:])
    seeds.sort(key=lambda s: s[1], reverse=True)

    for order in range(1, max_components + 1):
        if len(seeds) >= order:
            t_seeds = [s[0] for s in seeds[:order]]
        elif seeds:
            # Pad with spread-out copies of the strongest seed.
            t_seeds = [s[0] for s in seeds]
            while len(t_seeds) < order:
                t_seeds.append(t_seeds[0] * 2.0 ** len(t_seeds))
        else:
            t_seeds = list(np.geomspace(0.2, 2.0, order))
        times, amps, noise, resid = _refine(t_seeds, edf_vals, z, t_samples, sample_rate)
        best_by_order[order] = (times, amps, noise, resid)

    residuals = {k: v[3] for k, v in best_by_order.items()}
    best = min(residuals.values())
    # Absolute slack keeps the rule meaningful when the best residual is ~0.
    cutoff = best * (1 + _PARSIMONY_SLACK) + 1e-12 * float(np.sum(z**2))
    order = min(k for k, r in residuals.items() if r <= cutoff)

    times, amps, noise, resid = best_by_order[order]
    times = np.asarray(times, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    # Drop components the refinement zeroed out; they carry no information.
    keep = amps > 0
    times, amps = times[keep], amps[keep]
    sort = np.argsort(times)
    return DecayEstimate(
        decay_times=2.0 * times[sort],
        amplitudes=amps[sort],
        noise_level=float(noise),
        residual=resid,
    )


def _kmeans_once(values: np.ndarray, k: int, rng) -> tuple[np.ndarray, float]:
    """One k-means++ run on 1-D data; returns (centroids, inertia)."""
    n = len(values)
    centers = np.empty(k)
    centers[0] = values[rng.integers(n)]
    d2 = (values - centers[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = values[rng.integers(n)]
        else:
            centers[j] = values[np.searchsorted(np.cumsum(d2 / total), rng.random())]
        d2 = np.minimum(d2, (values - centers[j]) ** 2)

    assign = np.zeros(n, dtype=int)
    for _ in range(300):
        # argmin breaks ties toward the lower centroid index.
        new_assign = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
        for j in range(k):
            members = values[new_assign == j]
            if len(members):
                centers[j] = members.mean()
            else:
                # Re-seed an empty cluster at the point farthest from its centroid.
                far = np.argmax(np.abs(values - centers[new_assign]))
                centers[j] = values[far]
                new_assign[far] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    inertia = float(np.sum((values - centers[assign]) ** 2))
    return np.sort(centers), inertia


def kmeans_1d(values, k: int, seed: int, restarts: int = 20) -> np.ndarray:
    """Deterministic 1-D k-means (k-means++ init, best of ``restarts``)."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    if len(np.unique(values)) < k:
        raise InsufficientDataError(
            f"need at least {k} distinct values, got {len(np.unique(values))}"
        )
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(restarts):
        centers, inertia = _kmeans_once(values, k, rng)
        if best is None or inertia < best_inertia * (1.0 - 1e-15):
            best, best_inertia = centers, inertia
    return best


def cluster_decay_times(estimates, k: int, seed: int = 0) -> dict:
    """Common decay times per band via K-means over pooled estimates.

    Parameters
    ----------
    estimates : iterable of DecayEstimate
        Per-(RIR, band) estimates; entries are grouped by ``band_center``.
    k : int
        Number of common decay times per band.
    seed : int
        RNG seed; results are deterministic given the seed and invariant to
        the order of ``estimates`` (values are sorted before clustering).

    Returns
    -------
    dict
        ``{band_center: ndarray of k sorted centroids}``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pooled: dict = {}
    order: list = []
    for est in estimates:
        if est.band_center not in pooled:
            pooled[est.band_center] = []
            order.append(est.band_center)
        pooled[est.band_center].extend(est.decay_times.tolist())

    out = {}
    for center in order:
        values = pooled[center]
        if len(values) < k:
            raise InsufficientDataError(
                f"band {center!r}: {len(values)} decay-time values < k={k}"
            )
        out[center] = kmeans_1d(values, k, seed=seed)
    return out
