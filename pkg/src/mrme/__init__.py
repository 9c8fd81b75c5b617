"""Moving-resting process with measurement error.

Simulation and composite-likelihood inference for animal movement tracks
modelled as Brownian motion switched on and off by a two-state telegraph
process, observed at discrete times with additive Gaussian error.
"""

from .composite import (
    CLMethod,
    ForwardState,
    brute_force_thinned,
    marginal_cl,
    thinned_loglik,
    two_piece_cl,
)
from .errors import NumericalError, ValidationError
from .estimation import (
    BootstrapResult,
    FitOptions,
    FitResult,
    bootstrap,
    fit,
    fit_mr,
    godambe_variance,
    moment_init,
)
from .estimator import MRMEEstimator
from .io import TrackFile, read_track, write_track
from .mr_density import DensityKernel, IncrementQuery, ModelParams, h_density, mr_loglik, resting_atom
from .mrme_model import (
    LabeledTrack,
    Track,
    g_density,
    round_track,
    simulate_mrme,
    transition_density,
)
from .studies import StudyReport, StudySpec, acf, load_study_spec, run_study, study_preset
from .telegraph import (
    RatePair,
    SegmentPath,
    StateKind,
    gamma_sum_cdf,
    h_diff,
    occupation_density,
    simulate_states,
    stationary_dist,
    tau,
    tau_closed_form,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "CLMethod",
    "DensityKernel",
    "FitOptions",
    "FitResult",
    "ForwardState",
    "IncrementQuery",
    "LabeledTrack",
    "MRMEEstimator",
    "ModelParams",
    "NumericalError",
    "RatePair",
    "SegmentPath",
    "StateKind",
    "StudyReport",
    "StudySpec",
    "Track",
    "TrackFile",
    "ValidationError",
    "acf",
    "bootstrap",
    "brute_force_thinned",
    "fit",
    "fit_mr",
    "g_density",
    "gamma_sum_cdf",
    "godambe_variance",
    "h_density",
    "h_diff",
    "load_study_spec",
    "marginal_cl",
    "moment_init",
    "mr_loglik",
    "occupation_density",
    "read_track",
    "resting_atom",
    "round_track",
    "run_study",
    "simulate_mrme",
    "simulate_states",
    "stationary_dist",
    "study_preset",
    "tau",
    "tau_closed_form",
    "thinned_loglik",
    "transition_density",
    "two_piece_cl",
    "write_track",
]
