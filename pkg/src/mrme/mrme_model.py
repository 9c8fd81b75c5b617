"""Moving-resting process observed with Gaussian measurement error.

Observations Z(t_k) = X(t_k) + eps_k add independent N(0, sigma_eps^2)
noise per coordinate to the true location.  Increment densities g_ij
follow from the noise-free h_ij by an analytic Gaussian convolution
(every channel variance gains 2*sigma_eps^2), and the one-step
transition density of the thinned observation chain composes a state
transition over the leading gap with g over the trailing window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validate import check_locations, check_positive, check_times
from .errors import ValidationError
from .mr_density import DensityKernel, IncrementQuery, ModelParams
from .telegraph import StateKind, _tau_matrix, simulate_states

__all__ = [
    "Track",
    "LabeledTrack",
    "g_density",
    "transition_density",
    "simulate_mrme",
    "round_track",
]


@dataclass(frozen=True)
class Track:
    """Observed positions on a strictly increasing time grid."""

    times: np.ndarray
    locations: np.ndarray

    def __post_init__(self):
        times = check_times(self.times)
        locations = check_locations(self.locations, times.size)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "locations", locations)

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class LabeledTrack:
    """Simulation output: a track plus the hidden state at each time."""

    track: Track
    states: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=int)
        if states.shape != (len(self.track),):
            raise ValidationError("states length must match the track length")
        object.__setattr__(self, "states", states)


def g_density(i, j, q: IncrementQuery, p: ModelParams) -> float:
    """Noise-smoothed increment density g_ij(z, t).

    The inner convolution of the diffusion Gaussian with the noise
    Gaussian is folded analytically (variances add), so only the
    occupation-time quadrature remains.  g_00 includes the smoothed
    resting atom exp(-lambda0 t) * phi(z; 2 sigma_eps^2).
    """
    i, j = StateKind(i), StateKind(j)
    if p.sigma_eps <= 0.0:
        raise ValidationError("g_density requires sigma_eps > 0; use h_density + resting_atom")
    kernel = DensityKernel(q.dt, p, q.dim)
    return float(kernel.matrix(q.r2)[0, int(i), int(j)])


def transition_density(i, j, dz, u, v, p: ModelParams, dim: int | None = None) -> float:
    """One-step density of the thinned chain.

    The state known at the window start propagates over the leading gap
    u (no increment recorded), then the increment dz accrues over the
    trailing window v: f = sum_k tau_ik(u) g_kj(dz, v).  u = 0 reduces
    bitwise to g_ij.
    """
    i, j = StateKind(i), StateKind(j)
    dz = np.atleast_1d(np.asarray(dz, dtype=float))
    if dim is None:
        dim = dz.size
    q = IncrementQuery(dz=dz, dt=v, dim=dim)
    if u < 0:
        raise ValidationError(f"gap u must be nonnegative, got {u!r}")
    if u == 0:
        return g_density(i, j, q, p)
    if p.sigma_eps <= 0.0:
        raise ValidationError("transition_density requires sigma_eps > 0")
    kernel = DensityKernel(q.dt, p, q.dim)
    g = kernel.matrix(q.r2)[0]
    tau_u = _tau_matrix(float(u), p.rates)
    return float(tau_u[int(i), 0] * g[0, int(j)] + tau_u[int(i), 1] * g[1, int(j)])


def simulate_mrme(p: ModelParams, times, dim: int = 1, init="stationary", rng=None) -> LabeledTrack:
    """Exact MRME simulation on an arbitrary strictly increasing grid.

    A full telegraph segment path covers the horizon; each observation
    interval receives a Gaussian location increment with variance
    sigma^2 times the moving time accrued in it, and every observation
    gains independent N(0, sigma_eps^2) noise per coordinate.
    """
    times = check_times(times)
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(rng)
    if times[0] < 0.0:
        raise ValidationError("time grid must start at or after 0")
    path = simulate_states(p.rates, float(times[-1]), init=init, rng=rng)

    occ = path.occupation(times)
    moving_time = np.diff(occ)
    sd = p.sigma * np.sqrt(moving_time)
    steps = rng.standard_normal((times.size - 1, dim)) * sd[:, None]
    x = np.concatenate((np.zeros((1, dim)), np.cumsum(steps, axis=0)))
    z = x + rng.standard_normal((times.size, dim)) * p.sigma_eps
    states = path.state_at(times)
    return LabeledTrack(track=Track(times=times, locations=z), states=states)


def round_track(track: Track, grid) -> Track:
    """Round every coordinate to the nearest multiple of ``grid``.

    Ties round half away from zero (0.075 at grid 0.05 becomes 0.10,
    -0.075 becomes -0.10), matching how GPS post-processing truncates
    coordinates rather than banker's rounding.
    """
    grid = check_positive("grid", grid)
    scaled = track.locations / grid
    snapped = np.floor(np.abs(scaled) + 0.5) * np.sign(scaled)
    return Track(times=track.times, locations=snapped * grid)
