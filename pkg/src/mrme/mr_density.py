"""Increment densities of the moving-resting process.

The location X(t) diffuses with volatility sigma while the telegraph
state is moving and stays put while resting.  Conditional on the moving
time w accrued over a window of length t, a d-dimensional increment is
centered Gaussian with variance sigma^2 * w in every coordinate, so the
state-channel densities h_ij reduce to one-dimensional integrals of
Gaussian kernels against the occupation-time densities p_ij.  Starting
from rest there is also an atom at exactly zero displacement (no switch
during the window), exposed separately from the continuous part.

The same machinery evaluates the noise-smoothed densities used by the
measurement-error model: adding independent N(0, sigma_eps^2) noise at
both window ends shifts every Gaussian variance by 2*sigma_eps^2 and
turns the resting atom into a Gaussian bump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import window_mesh
from ._validate import check_nonnegative, check_positive, check_times
from .errors import ValidationError
from .telegraph import RatePair, StateKind, _occupation_kernels, stationary_dist

__all__ = ["ModelParams", "IncrementQuery", "h_density", "resting_atom", "mr_loglik"]


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set theta = (lambda1, lambda0, sigma, sigma_eps).

    sigma_eps = 0 denotes the noise-free moving-resting model.
    """

    lambda1: float
    lambda0: float
    sigma: float
    sigma_eps: float = 0.0

    def __post_init__(self):
        check_positive("lambda1", self.lambda1)
        check_positive("lambda0", self.lambda0)
        check_positive("sigma", self.sigma)
        check_nonnegative("sigma_eps", self.sigma_eps)

    @property
    def rates(self) -> RatePair:
        return RatePair(self.lambda1, self.lambda0)

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda0, self.sigma, self.sigma_eps])

    @classmethod
    def from_array(cls, theta) -> "ModelParams":
        lam1, lam0, sigma, sigma_eps = (float(v) for v in theta)
        return cls(lam1, lam0, sigma, sigma_eps)


@dataclass(frozen=True)
class IncrementQuery:
    """A displacement over an elapsed time, in d dimensions."""

    dz: np.ndarray
    dt: float
    dim: int = 1

    def __post_init__(self):
        dz = np.atleast_1d(np.asarray(self.dz, dtype=float))
        object.__setattr__(self, "dz", dz)
        if dz.ndim != 1 or dz.size != self.dim:
            raise ValidationError(
                f"dz must have exactly dim={self.dim} coordinates, got shape {dz.shape}"
            )
        if not np.all(np.isfinite(dz)):
            raise ValidationError("dz contains non-finite values")
        check_positive("dt", self.dt)

    @property
    def r2(self) -> float:
        return float(self.dz @ self.dz)


def _gauss(r2, var, dim):
    """Isotropic d-dimensional Gaussian density at squared radius r2."""
    return np.exp(-r2 / (2.0 * var)) * (2.0 * math.pi * var) ** (-0.5 * dim)


class DensityKernel:
    """Quadrature-ready evaluator of the four state-channel increment
    densities over one time window.

    Precomputes the occupation-kernel node values once per (window,
    parameters) pair; evaluating a batch of squared increment norms is
    then a pair of (batch x nodes) Gaussian matrices and four dot
    products.  ``smooth2`` is the extra variance added to every channel
    (2*sigma_eps^2 for the measurement-error model, 0 for the bare MR
    process).
    """

    def __init__(self, window: float, params: ModelParams, dim: int, mesh_scale: int = 1):
        self.window = float(window)
        self.params = params
        self.dim = int(dim)
        s2 = params.sigma**2
        e2 = 2.0 * params.sigma_eps**2
        rates = params.rates
        if e2 > 0.0:
            rel_floor = 0.05 * e2 / (s2 * self.window)
        else:
            rel_floor = 1e-13
        w, wt = window_mesh(self.window, rel_floor, rates.total * self.window, mesh_scale)
        p11, p10, p00, p01 = _occupation_kernels(w, self.window, rates)
        self.var_move = s2 * w + e2              # channels started moving
        self.var_rest = s2 * (self.window - w) + e2  # channels started resting
        self.wp11 = wt * p11
        self.wp10 = wt * p10
        self.wp00 = wt * p00
        self.wp01 = wt * p01
        self.no_switch_move = math.exp(-params.lambda1 * self.window)
        self.atom_rest = math.exp(-params.lambda0 * self.window)
        self.var_full = s2 * self.window + e2
        self.smooth2 = e2

    def matrix(self, r2) -> np.ndarray:
        """(K,) squared norms -> (K, 2, 2) of channel densities.

        Row index is the starting state, column the ending state.  The
        (0, 0) entry includes the smoothed atom only when smooth2 > 0;
        the bare-MR atom is a point mass handled by the caller.
        """
        r2 = np.atleast_1d(np.asarray(r2, dtype=float))
        move = _gauss(r2[:, None], self.var_move[None, :], self.dim)
        rest = _gauss(r2[:, None], self.var_rest[None, :], self.dim)
        out = np.empty((r2.size, 2, 2))
        out[:, 1, 1] = move @ self.wp11 + self.no_switch_move * _gauss(
            r2, self.var_full, self.dim
        )
        out[:, 1, 0] = move @ self.wp10
        out[:, 0, 0] = rest @ self.wp00
        out[:, 0, 1] = rest @ self.wp01
        if self.smooth2 > 0.0:
            out[:, 0, 0] += self.atom_rest * _gauss(r2, self.smooth2, self.dim)
        return out

    def _log_channels(self):
        if not hasattr(self, "_log_wp"):
            with np.errstate(divide="ignore"):
                self._log_wp = tuple(
                    np.log(wp) for wp in (self.wp11, self.wp10, self.wp00, self.wp01)
                )
        return self._log_wp

    def matrix_log(self, r2) -> np.ndarray:
        """Log of :meth:`matrix`, safe against density underflow.

        Used for increments so far in the tails that every channel
        density is below the smallest normal double; the composite
        objectives stay finite there, as the log-density is just a very
        negative number.
        """
        r2 = np.atleast_1d(np.asarray(r2, dtype=float))
        lw11, lw10, lw00, lw01 = self._log_channels()

        def lse(log_w, var, extra_logw=None, extra_var=None):
            lg = (
                log_w[None, :]
                - 0.5 * self.dim * np.log(2.0 * math.pi * var)[None, :]
                - r2[:, None] / (2.0 * var[None, :])
            )
            if extra_logw is not None:
                tail = (
                    extra_logw
                    - 0.5 * self.dim * math.log(2.0 * math.pi * extra_var)
                    - r2 / (2.0 * extra_var)
                )
                lg = np.concatenate((lg, tail[:, None]), axis=1)
            peak = lg.max(axis=1)
            out = peak + np.log(np.exp(lg - peak[:, None]).sum(axis=1))
            return np.where(np.isfinite(peak), out, -np.inf)

        p = self.params
        out = np.empty((r2.size, 2, 2))
        out[:, 1, 1] = lse(
            lw11, self.var_move, -p.lambda1 * self.window, self.var_full
        )
        out[:, 1, 0] = lse(lw10, self.var_move)
        if self.smooth2 > 0.0:
            out[:, 0, 0] = lse(
                lw00, self.var_rest, -p.lambda0 * self.window, self.smooth2
            )
        else:
            out[:, 0, 0] = lse(lw00, self.var_rest)
        out[:, 0, 1] = lse(lw01, self.var_rest)
        return out


def h_density(i, j, q: IncrementQuery, p: ModelParams) -> float:
    """Continuous part of the noise-free increment density h_ij(x, t).

    sigma_eps is ignored; the coordinates share a single occupation
    time, so the d-dimensional value needs only one quadrature.  The
    resting-start zero atom is exposed by :func:`resting_atom`, not
    included here.
    """
    i, j = StateKind(i), StateKind(j)
    bare = ModelParams(p.lambda1, p.lambda0, p.sigma, 0.0)
    kernel = DensityKernel(q.dt, bare, q.dim)
    return float(kernel.matrix(q.r2)[0, int(i), int(j)])


def resting_atom(dt, p: ModelParams) -> float:
    """Probability of an exactly-zero increment from rest: exp(-lambda0*dt)."""
    dt = check_positive("dt", dt)
    return math.exp(-p.lambda0 * dt)


def mr_loglik(track, p: ModelParams) -> float:
    """Exact log-likelihood of the noise-free moving-resting model.

    Normalized forward recursion over consecutive increments with
    stationary initial weights.  An increment that is bit-identical to
    zero in every coordinate contributes the resting atom in the
    (0 -> 0) channel; anything else contributes the h densities.  No
    epsilon is applied: measurement noise destroys exact zeros, and
    that distinction is the point of the noise-free fit.
    """
    if p.sigma_eps != 0.0:
        raise ValidationError("mr_loglik requires sigma_eps = 0; use the MRME objectives")
    times = check_times(track.times)
    locs = np.asarray(track.locations, dtype=float)
    if locs.ndim == 1:
        locs = locs[:, None]
    dim = locs.shape[1]
    inc = np.diff(locs, axis=0)
    r2 = np.einsum("kd,kd->k", inc, inc)
    is_zero = np.all(inc == 0.0, axis=1)
    dts = np.diff(times)

    kernels = {}
    for dt in dts[~is_zero]:
        if dt not in kernels:
            kernels[dt] = DensityKernel(dt, p, dim)
    dens = {}
    for dt, kernel in kernels.items():
        sel = (dts == dt) & ~is_zero
        dens[dt] = (np.nonzero(sel)[0], kernel.matrix(r2[sel]))

    trans = [None] * dts.size
    for dt, (idx, mats) in dens.items():
        for row, k in enumerate(idx):
            trans[k] = mats[row]
    p1, p0 = stationary_dist(p.rates)
    alpha0, alpha1 = p0, p1
    loglik = 0.0
    for k in range(dts.size):
        if is_zero[k]:
            a0 = alpha0 * math.exp(-p.lambda0 * dts[k])
            a1 = 0.0
        else:
            f = trans[k]
            a0 = alpha0 * f[0, 0] + alpha1 * f[1, 0]
            a1 = alpha0 * f[0, 1] + alpha1 * f[1, 1]
        rho = a0 + a1
        if not (rho > 0.0 and math.isfinite(rho)):
            return -math.inf
        alpha0, alpha1 = a0 / rho, a1 / rho
        loglik += math.log(rho)
    return loglik
