"""Composite likelihood objectives for noisy moving-resting tracks.

The full likelihood of the observation chain is intractable (the
hidden state joins the continuous noise, so the forward recursion has
no finite state space), but thinning to every other observation makes
the increment-state pairs Markov again.  Two objectives result: the
two-piece composite likelihood, which adds the genuine log-likelihoods
of the even- and odd-thinned chains, and the marginal composite
likelihood, which treats consecutive increments as independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._validate import check_times
from .errors import ValidationError
from .mr_density import DensityKernel, ModelParams
from .telegraph import _tau_matrix, stationary_dist

__all__ = [
    "CLMethod",
    "ForwardState",
    "thinned_loglik",
    "two_piece_cl",
    "marginal_cl",
    "brute_force_thinned",
]


class CLMethod(Enum):
    """Which composite likelihood a fit maximizes."""

    TWO_PIECE = "two_piece"
    MARGINAL = "marginal"


@dataclass
class ForwardState:
    """Normalized forward variables and the accumulated log-likelihood."""

    weights: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    log_lik: float = 0.0

    def step(self, trans: np.ndarray) -> float:
        """Advance through one 2x2 transition-density matrix.

        Returns the normalizer rho; weights are renormalized to sum to
        one so the recursion never underflows.
        """
        a0 = self.weights[0] * trans[0, 0] + self.weights[1] * trans[1, 0]
        a1 = self.weights[0] * trans[0, 1] + self.weights[1] * trans[1, 1]
        rho = a0 + a1
        if not (rho > 0.0 and math.isfinite(rho)):
            self.log_lik = -math.inf
            return 0.0
        self.weights = np.array([a0 / rho, a1 / rho])
        self.log_lik += math.log(rho)
        return rho


def _thinned_steps(times: np.ndarray, parity: str) -> list[tuple[float, float, int]]:
    """Steps (gap u, window v, increment index) of one thinned chain.

    Increment index k refers to the track increment over
    (times[k], times[k+1]).  The even chain consumes increments ending
    at t_2, t_4, ...; the odd chain starts with the increment ending at
    t_1 (gap 0) and then consumes those ending at t_3, t_5, ...  A
    trailing observation that does not complete a pair is dropped.
    """
    n = times.size - 1
    steps = []
    if parity == "even":
        for j in range(1, n // 2 + 1):
            u = times[2 * j - 1] - times[2 * j - 2]
            v = times[2 * j] - times[2 * j - 1]
            steps.append((float(u), float(v), 2 * j - 1))
    elif parity == "odd":
        steps.append((0.0, float(times[1] - times[0]), 0))
        for j in range(1, (n + 1) // 2):
            u = times[2 * j] - times[2 * j - 1]
            v = times[2 * j + 1] - times[2 * j]
            steps.append((float(u), float(v), 2 * j))
    else:
        raise ValidationError(f"parity must be 'even' or 'odd', got {parity!r}")
    return steps


# Below the smallest normal double the linear-space densities lose
# precision and finally hit exact zero; matrices that far gone are
# rebuilt in log space instead.
_UNDERFLOW = 5e-308


def _step_matrices(track, steps, p: ModelParams):
    """Transition-density matrices for the given thinned steps.

    Kernels are built once per distinct window length and evaluated on
    the whole batch of increments sharing it; the tau propagation over
    each leading gap is a closed-form 2x2 product.  A zero gap skips
    the product entirely, so those steps reduce to g bitwise.

    Returns (matrices, offsets).  A step whose densities underflow in
    linear space is recomputed in log space and rescaled so its largest
    entry is one; the factored-out log scale lands in offsets and must
    be added back to the chain log-likelihood.  Offsets are zero for
    every step evaluated the ordinary way.
    """
    inc = np.diff(track.locations, axis=0)
    r2 = np.einsum("kd,kd->k", inc, inc)
    by_window: dict[float, list[int]] = {}
    for s, (_, v, _) in enumerate(steps):
        by_window.setdefault(v, []).append(s)

    mats: list[np.ndarray | None] = [None] * len(steps)
    offsets = np.zeros(len(steps))
    tau_cache: dict[float, np.ndarray] = {}
    for v, step_ids in by_window.items():
        kernel = DensityKernel(v, p, track.dim)
        r2_batch = r2[[steps[s][2] for s in step_ids]]
        g = kernel.matrix(r2_batch)
        dead = g.reshape(len(step_ids), 4).max(axis=1) < _UNDERFLOW
        if np.any(dead):
            logs = kernel.matrix_log(r2_batch[dead])
            for lg, row in zip(logs, np.nonzero(dead)[0]):
                scale = lg.max()
                if math.isfinite(scale):
                    g[row] = np.exp(lg - scale)
                    offsets[step_ids[row]] = scale
        for row, s in enumerate(step_ids):
            u = steps[s][0]
            if u == 0.0:
                mats[s] = g[row]
            else:
                if u not in tau_cache:
                    tau_cache[u] = _tau_matrix(u, p.rates)
                mats[s] = tau_cache[u] @ g[row]
    return mats, offsets


def _require_noise(p: ModelParams):
    if p.sigma_eps <= 0.0:
        raise ValidationError("composite likelihoods require sigma_eps > 0")


def thinned_loglik(track, parity: str, p: ModelParams) -> float:
    """Log-likelihood of one thinned observation chain.

    Normalized forward recursion with stationary initial weights; each
    step propagates the state over its leading gap and absorbs the
    increment density over its trailing window.
    """
    _require_noise(p)
    times = check_times(track.times)
    if times.size < 3:
        raise ValidationError("thinned chains need at least 3 observations")
    steps = _thinned_steps(times, parity)
    mats, offsets = _step_matrices(track, steps, p)
    p1, p0 = stationary_dist(p.rates)
    state = ForwardState(weights=np.array([p0, p1]))
    for trans in mats:
        state.step(trans)
        if state.log_lik == -math.inf:
            break
    return state.log_lik + float(offsets.sum())


def two_piece_cl(track, p: ModelParams) -> float:
    """Even-chain plus odd-chain log-likelihood."""
    if len(track) < 4:
        raise ValidationError("two_piece_cl needs at least 4 observations")
    return thinned_loglik(track, "even", p) + thinned_loglik(track, "odd", p)


def marginal_cl(track, p: ModelParams) -> float:
    """Composite likelihood that ignores dependence between increments.

    Each increment contributes the log of its stationary mixture
    density sum_ij nu_i g_ij over its own time gap.
    """
    _require_noise(p)
    times = check_times(track.times)
    inc = np.diff(track.locations, axis=0)
    r2 = np.einsum("kd,kd->k", inc, inc)
    dts = np.diff(times)
    p1, p0 = stationary_dist(p.rates)
    log_nu = np.log([p0, p0, p1, p1])
    total = 0.0
    for dt in np.unique(dts):
        sel = dts == dt
        kernel = DensityKernel(float(dt), p, track.dim)
        g = kernel.matrix(r2[sel])
        mix = p0 * (g[:, 0, 0] + g[:, 0, 1]) + p1 * (g[:, 1, 0] + g[:, 1, 1])
        dead = ~(mix > _UNDERFLOW)
        if np.any(dead):
            lg = kernel.matrix_log(r2[sel][dead]).reshape(-1, 4) + log_nu
            peak = lg.max(axis=1)
            log_mix = peak + np.log(np.exp(lg - peak[:, None]).sum(axis=1))
            if not np.all(np.isfinite(log_mix)):
                return -math.inf
            total += float(log_mix.sum())
            mix = mix[~dead]
            if mix.size == 0:
                continue
        total += float(np.log(mix).sum())
    return total


def brute_force_thinned(track, parity: str, p: ModelParams, return_count: bool = False):
    """Thinned-chain log-likelihood by explicit hidden-state enumeration.

    Sums nu(s_0) * prod_k f_{s_{k-1} s_k} over all 2^(m+1) state
    trajectories.  Reference oracle only; rejects chains longer than
    m = 12 steps.
    """
    from .mrme_model import transition_density

    _require_noise(p)
    times = check_times(track.times)
    if times.size < 3:
        raise ValidationError("thinned chains need at least 3 observations")
    steps = _thinned_steps(times, parity)
    m = len(steps)
    if m > 12:
        raise ValidationError(f"brute force limited to 12 steps, got {m}")
    inc = np.diff(track.locations, axis=0)
    # matrices rebuilt pointwise (no batching, no tau cache) so the
    # comparison covers the batched path end to end
    mats = []
    for u, v, k in steps:
        f = np.empty((2, 2))
        for i in (0, 1):
            for j in (0, 1):
                f[i, j] = transition_density(i, j, inc[k], u, v, p)
        mats.append(f)
    p1, p0 = stationary_dist(p.rates)
    nu = (p0, p1)
    total = 0.0
    count = 0
    for path in itertools.product((0, 1), repeat=m + 1):
        prob = nu[path[0]]
        for k in range(m):
            prob *= mats[k][path[k], path[k + 1]]
        total += prob
        count += 1
    value = math.log(total) if total > 0.0 else -math.inf
    return (value, count) if return_count else value
