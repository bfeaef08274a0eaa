"""Constrained envelope fitting with signed or nonnegative slope amplitudes.

An envelope is modelled as ``N * 1 + sum_k A_k * psi_k(t)`` on the kernel
grid.  The fit minimises the squared error between the power-scaled target
and the power-scaled model.  Two constraint modes exist:

* ``"fadein"`` - amplitudes may be negative, but the modelled envelope minus
  the noise term must stay nonnegative at every grid point (and the noise
  term itself must be nonnegative).  Negative amplitudes are what allow an
  initial rise of reverberant energy.
* ``"posonly"`` - every amplitude and the noise term must be nonnegative;
  this baseline can only produce monotonically decaying envelopes.

Both constraint sets are linear in the parameters; only the objective is
nonlinear (through the power scaling).  The solver is an active-set
Gauss-Newton iteration on the linearly-constrained problem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .decay import DecayKernelSet
from .signal import POWER_FLOOR, BandedEnvelope, power_scale

FADE_IN = "fadein"
POS_ONLY = "posonly"

#: Constraint-violation tolerance for the feasibility flag.
FEASIBILITY_TOL = 1e-9

_MAX_ITER = 500
_FTOL = 1e-10
_MAX_ACTIVE_CHANGES = 2000


@dataclass
class SlopeFit:
    """Fitted slope amplitudes and noise for one position.

    ``amplitudes`` has shape ``(n_bands, K)`` and is signed in fade-in mode;
    ``noise`` is the per-band constant noise amplitude.  ``objective_value``
    is the final power-scaled residual sum per band, and ``feasible`` records
    whether the noise-free modelled envelope stays above ``-1e-9``
    everywhere on the grid.
    """

    band_centers: tuple
    amplitudes: np.ndarray
    noise: np.ndarray
    mode: str
    objective_value: np.ndarray
    iterations: np.ndarray
    feasible: np.ndarray
    converged: np.ndarray
    position_id: str | None = None

    def __post_init__(self):
        self.band_centers = tuple(self.band_centers)
        self.amplitudes = np.atleast_2d(np.asarray(self.amplitudes, dtype=np.float64))
        self.noise = np.atleast_1d(np.asarray(self.noise, dtype=np.float64))
        self.objective_value = np.atleast_1d(
            np.asarray(self.objective_value, dtype=np.float64)
        )
        self.iterations = np.atleast_1d(np.asarray(self.iterations, dtype=np.int64))
        self.feasible = np.atleast_1d(np.asarray(self.feasible, dtype=bool))
        self.converged = np.atleast_1d(np.asarray(self.converged, dtype=bool))
        if self.mode not in (FADE_IN, POS_ONLY):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == POS_ONLY and np.any(self.amplitudes < 0):
            raise ValueError("pos-only fits must have nonnegative amplitudes")
        if np.any(self.noise < 0):
            raise ValueError("noise must be nonnegative")

    @property
    def n_bands(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_slopes(self) -> int:
        return self.amplitudes.shape[1]

    def theta(self, band: int) -> np.ndarray:
        """Stacked parameters ``[N, A_1..A_K]`` of one band."""
        return np.concatenate([[self.noise[band]], self.amplitudes[band]])


def _clip_dust(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Zero out numerically-negative dust left by the active-set solver."""
    out = np.asarray(values, dtype=np.float64).copy()
    out[(out < 0) & (out > -tol)] = 0.0
    return out


def _scaled(values: np.ndarray) -> np.ndarray:
    """Power scaling that tolerates the solver's transient negative models."""
    return np.sqrt(np.maximum(values, POWER_FLOOR))


def _constraint_matrix(design: np.ndarray, mode: str) -> np.ndarray:
    """Linear constraints ``G @ theta >= 0`` for the requested mode."""
    n = design.shape[1]
    if mode == POS_ONLY:
        return np.eye(n)
    if mode == FADE_IN:
        g = design.copy()
        g[:, 0] = 0.0  # noise-free model rows: sum_k A_k psi_k(t) >= 0
        noise_row = np.zeros((1, n))
        noise_row[0, 0] = 1.0
        return np.vstack([g, noise_row])
    raise ValueError(f"unknown mode {mode!r}")


def _active_set_least_squares(
    res_fn,
    jac_fn,
    theta0: np.ndarray,
    constraints: np.ndarray,
    max_iter: int = _MAX_ITER,
    ftol: float = _FTOL,
    max_changes: int = _MAX_ACTIVE_CHANGES,
):
    """Minimise ``sum(res_fn(theta)**2)`` subject to ``constraints @ theta >= 0``.

    ``theta0`` must be feasible.  Active-set Gauss-Newton: each step solves
    the least-squares subproblem on the null space of the working-set
    constraints, takes the longest feasible Armijo step, and exchanges
    working-set members based on Lagrange-multiplier signs.

    Returns ``(theta, objective, iterations, converged, n_changes)``.
    """
    theta = np.asarray(theta0, dtype=np.float64).copy()
    n = len(theta)
    G = constraints
    working: list[int] = []
    n_changes = 0
    converged = False

    r = res_fn(theta)
    obj = float(r @ r)

    it = 0
    while it < max_iter:
        it += 1
        J = jac_fn(theta)
        grad = 2.0 * (J.T @ r)

        if working:
            Z = null_space(G[working])
        else:
            Z = np.eye(n)

        if Z.shape[1] > 0:
            q, *_ = np.linalg.lstsq(J @ Z, -r, rcond=None)
            p = Z @ q
        else:
            p = np.zeros(n)

        step_scale = 1.0 + float(np.linalg.norm(theta))
        if float(np.linalg.norm(p)) <= 1e-14 * step_scale:
            # Working-set stationary point: examine multipliers.
            if not working:
                converged = True
                break
            lam, *_ = np.linalg.lstsq(G[working].T, grad, rcond=None)
            tol = 1e-10 * (1.0 + float(np.linalg.norm(grad)))
            if np.all(lam >= -tol):
                converged = True
                break
            if n_changes >= max_changes:
                break
            working.pop(int(np.argmin(lam)))
            n_changes += 1
            continue

        # Longest feasible step along p.
        Gp = G @ p
        g = G @ theta
        alpha_max, blocker = 1.0, -1
        for i in range(G.shape[0]):
            if i in working or Gp[i] >= -1e-14:
                continue
            a = max(g[i], 0.0) / -Gp[i]
            if a < alpha_max:
                alpha_max, blocker = a, i

        if alpha_max <= 1e-16:
            # Zero step: the blocking constraint joins the working set.
            if blocker < 0 or n_changes >= max_changes:
                break
            working.append(blocker)
            n_changes += 1
            continue

        # Armijo backtracking from the longest feasible step.
        slope = float(grad @ p)
        alpha = alpha_max
        accepted = False
        while alpha > 1e-16:
            cand = theta + alpha * p
            r_cand = res_fn(cand)
            obj_cand = float(r_cand @ r_cand)
            if obj_cand <= obj + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # No progress possible along p: treat as stationary.
            if not working:
                converged = True
                break
            lam, *_ = np.linalg.lstsq(G[working].T, grad, rcond=None)
            tol = 1e-10 * (1.0 + float(np.linalg.norm(grad)))
            if np.all(lam >= -tol):
                converged = True
                break
            if n_changes >= max_changes:
                break
            working.pop(int(np.argmin(lam)))
            n_changes += 1
            continue

        theta = cand
        prev_obj, r, obj = obj, r_cand, obj_cand

        hit_boundary = accepted and blocker >= 0 and alpha == alpha_max
        if hit_boundary:
            if n_changes >= max_changes:
                break
            working.append(blocker)
            n_changes += 1
            continue

        if prev_obj - obj <= ftol * max(prev_obj, 1e-300):
            # Stalled on the current working set: multiplier check decides.
            if not working:
                converged = True
                break
            J = jac_fn(theta)
            grad = 2.0 * (J.T @ res_fn(theta))
            lam, *_ = np.linalg.lstsq(G[working].T, grad, rcond=None)
            tol = 1e-10 * (1.0 + float(np.linalg.norm(grad)))
            if np.all(lam >= -tol):
                converged = True
                break
            if n_changes >= max_changes:
                break
            working.pop(int(np.argmin(lam)))
            n_changes += 1

    return theta, obj, it, converged, n_changes


def _project_feasible(theta0: np.ndarray, constraints: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``theta0`` onto ``{theta: G theta >= 0}``."""
    if np.all(constraints @ theta0 >= 0):
        return theta0.copy()
    eye = np.eye(len(theta0))
    theta, *_ = _active_set_least_squares(
        lambda th: th - theta0,
        lambda th: eye,
        np.zeros(len(theta0)),
        constraints,
        max_iter=200,
    )
    return theta


def default_skip_head(sample_rate: int, window_len: int, skip_ms: float = 8.0) -> int:
    """Envelope points covered by the excluded initial ``skip_ms`` milliseconds."""
    return int(round(skip_ms * 1e-3 * sample_rate / window_len))


def fit_envelope(
    target,
    kernels: DecayKernelSet,
    band_index: int | None = None,
    mode: str = FADE_IN,
    skip_head: int | None = None,
) -> SlopeFit:
    """Fit decay-kernel amplitudes and noise to one measured envelope band.

    Minimises ``sum_{t >= skip_head} (f(target) - f(model))**2`` where ``f``
    is the square-root power scaling, subject to the mode's constraints.
    Initialisation is an unconstrained linear fit on the unscaled envelope,
    projected onto the feasible set.

    Parameters
    ----------
    target : ndarray
        One band of envelope values on the kernel grid.
    kernels : DecayKernelSet
        Common decay kernels; must match the target's grid.
    band_index : int, optional
        Which band of ``kernels`` to use.  May be omitted when the kernel
        set has a single band.
    mode : str
        ``"fadein"`` or ``"posonly"``.
    skip_head : int, optional
        Envelope points excluded from the objective (the constraint is still
        enforced on the full grid).  Defaults to the points covered by the
        first 8 ms.

    Returns
    -------
    SlopeFit
        Single-band fit with diagnostics.  Non-convergence is reported via
        ``converged``, never raised.
    """
    if mode not in (FADE_IN, POS_ONLY):
        raise ValueError(f"unknown mode {mode!r}")
    if band_index is None:
        if kernels.n_bands != 1:
            raise ValueError("band_index is required for multi-band kernel sets")
        band_index = 0
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 1 or len(target) != kernels.envelope_len:
        raise ValueError(
            f"target length {target.shape} does not match kernel grid "
            f"({kernels.envelope_len} points)"
        )
    if skip_head is None:
        skip_head = default_skip_head(kernels.sample_rate, kernels.window_len)
    if not 0 <= skip_head < len(target):
        raise ValueError("skip_head must be smaller than the envelope length")

    design = kernels.kernel_matrix[band_index]
    n_params = design.shape[1]
    center = kernels.band_centers[band_index]

    if not np.any(target):
        return SlopeFit(
            band_centers=(center,),
            amplitudes=np.zeros((1, n_params - 1)),
            noise=np.zeros(1),
            mode=mode,
            objective_value=np.zeros(1),
            iterations=np.zeros(1, dtype=int),
            feasible=np.ones(1, dtype=bool),
            converged=np.ones(1, dtype=bool),
        )

    obj = slice(skip_head, None)
    design_obj = design[obj]
    c = power_scale(target)[obj]
    G = _constraint_matrix(design, mode)

    def res_fn(theta):
        return _scaled(design_obj @ theta) - c

    def jac_fn(theta):
        s = design_obj @ theta
        fp = np.where(s > POWER_FLOOR, 0.5 / np.sqrt(np.maximum(s, POWER_FLOOR)), 0.0)
        return design_obj * fp[:, None]

    theta_init, *_ = np.linalg.lstsq(design_obj, target[obj], rcond=None)
    theta0 = _project_feasible(theta_init, G)
    if not np.any(np.abs(theta0) > 1e-300):
        # The flat region of the power floor is stationary; restart from the
        # (always feasible) noise-only description instead of exact zero.
        theta0 = np.zeros(n_params)
        theta0[0] = float(np.mean(target))

    theta, objective, iterations, converged, _ = _active_set_least_squares(
        res_fn, jac_fn, theta0, G
    )

    theta = _clip_dust(theta) if mode == POS_ONLY else theta
    noise = max(theta[0], 0.0) if theta[0] > -1e-12 else theta[0]
    amplitudes = theta[1:]
    noise_free = design[:, 1:] @ amplitudes
    feasible = bool(np.min(noise_free) >= -FEASIBILITY_TOL and noise >= 0)

    return SlopeFit(
        band_centers=(center,),
        amplitudes=amplitudes[np.newaxis, :],
        noise=np.atleast_1d(noise),
        mode=mode,
        objective_value=np.atleast_1d(objective),
        iterations=np.atleast_1d(iterations),
        feasible=np.atleast_1d(feasible),
        converged=np.atleast_1d(converged),
    )


def _check_grid(envelope: BandedEnvelope, kernels: DecayKernelSet):
    if envelope.n_points != kernels.envelope_len:
        raise ValueError("envelope and kernel grid lengths differ")
    if envelope.window_len != kernels.window_len:
        raise ValueError("envelope and kernel window lengths differ")
    if envelope.sample_rate != kernels.sample_rate:
        raise ValueError("envelope and kernel sample rates differ")
    if envelope.band_centers != kernels.band_centers:
        raise ValueError("envelope and kernel band centers differ")


def fit_dataset(
    envelopes,
    kernels: DecayKernelSet,
    mode: str = FADE_IN,
    skip_head: int | None = None,
    workers: int = 1,
) -> list[SlopeFit]:
    """Fit every band of every position envelope against shared kernels.

    Results are ordered like the input and are identical regardless of
    ``workers`` (band fits are independent and deterministic).
    """
    envelopes = list(envelopes)
    for env in envelopes:
        _check_grid(env, kernels)

    tasks = [
        (pos, band)
        for pos in range(len(envelopes))
        for band in range(kernels.n_bands)
    ]

    def run(task):
        pos, band = task
        return fit_envelope(
            envelopes[pos].values[band], kernels, band, mode=mode, skip_head=skip_head
        )

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            band_fits = list(pool.map(run, tasks))
    else:
        band_fits = [run(t) for t in tasks]

    out = []
    nb = kernels.n_bands
    for pos, env in enumerate(envelopes):
        fits = band_fits[pos * nb : (pos + 1) * nb]
        out.append(
            SlopeFit(
                band_centers=kernels.band_centers,
                amplitudes=np.vstack([f.amplitudes for f in fits]),
                noise=np.concatenate([f.noise for f in fits]),
                mode=mode,
                objective_value=np.concatenate([f.objective_value for f in fits]),
                iterations=np.concatenate([f.iterations for f in fits]),
                feasible=np.concatenate([f.feasible for f in fits]),
                converged=np.concatenate([f.converged for f in fits]),
                position_id=env.position_id,
            )
        )
    return out


def model_envelope(
    fit: SlopeFit, kernels: DecayKernelSet, clamp: bool = False
) -> BandedEnvelope:
    """Evaluate a fit's modelled envelope on the kernel grid.

    Feasible fits produce nonnegative values up to numerical dust, which is
    zeroed.  ``clamp=True`` additionally clips genuinely negative values of
    infeasible fits to zero; reporting only, fits themselves are never
    clamped.
    """
    values = np.empty((fit.n_bands, kernels.envelope_len))
    for b, center in enumerate(fit.band_centers):
        kb = kernels.band_index(center)
        if kernels.kernel_matrix[kb].shape[1] != fit.n_slopes + 1:
            raise ValueError("fit and kernels disagree on the number of slopes")
        values[b] = kernels.kernel_matrix[kb] @ fit.theta(b)
    dust = (values < 0) & (values >= -FEASIBILITY_TOL)
    values[dust] = 0.0
    if clamp:
        values = np.maximum(values, 0.0)
    return BandedEnvelope(
        values,
        fit.band_centers,
        window_len=kernels.window_len,
        sample_rate=kernels.sample_rate,
        position_id=fit.position_id,
    )
