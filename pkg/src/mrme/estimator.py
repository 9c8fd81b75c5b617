"""Scikit-learn style front end for the composite-likelihood fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .composite import CLMethod
from .errors import ValidationError
from .estimation import FitOptions, fit
from .mr_density import ModelParams
from .mrme_model import Track, simulate_mrme

__all__ = ["MRMEEstimator"]

_METHODS = {"two_piece": CLMethod.TWO_PIECE, "marginal": CLMethod.MARGINAL}


class MRMEEstimator(BaseEstimator):
    """Estimate moving-resting parameters from a noisy track.

    Parameters
    ----------
    method : {"two_piece", "marginal"}
        Composite likelihood to maximize.
    init : tuple of 4 floats, optional
        Starting (lambda1, lambda0, sigma, sigma_eps); method-of-moments
        defaults otherwise.
    max_iters, xtol, ftol :
        Nelder-Mead budget and tolerances.

    The training data is a single track: an array of shape
    (n_points, 1 + d) whose first column is time and remaining columns
    are coordinates, or a :class:`mrme.Track`.  After fitting, the
    estimates are available as ``lambda1_``, ``lambda0_``, ``sigma_``
    and ``sigma_eps_``.
    """

    def __init__(self, method="two_piece", init=None, max_iters=2000, xtol=1e-6, ftol=1e-8):
        self.method = method
        self.init = init
        self.max_iters = max_iters
        self.xtol = xtol
        self.ftol = ftol

    def _as_track(self, X) -> Track:
        if isinstance(X, Track):
            return X
        X = check_array(X, ensure_min_features=2, ensure_min_samples=4)
        return Track(times=X[:, 0], locations=X[:, 1:])

    def _options(self) -> FitOptions:
        if self.method not in _METHODS:
            raise ValidationError(f"method must be one of {sorted(_METHODS)}, got {self.method!r}")
        init = ModelParams.from_array(self.init) if self.init is not None else None
        return FitOptions(
            method=_METHODS[self.method],
            init=init,
            max_iters=self.max_iters,
            xtol=self.xtol,
            ftol=self.ftol,
        )

    def fit(self, X, y=None):
        track = self._as_track(X)
        result = fit(track, self._options())
        self.result_ = result
        self.lambda1_ = result.estimate.lambda1
        self.lambda0_ = result.estimate.lambda0
        self.sigma_ = result.estimate.sigma
        self.sigma_eps_ = result.estimate.sigma_eps
        self.converged_ = result.converged
        self.objective_ = result.objective
        self.n_features_in_ = track.dim + 1
        return self

    def score(self, X, y=None) -> float:
        """Composite log-likelihood of another track at the fitted parameters."""
        check_is_fitted(self, "result_")
        track = self._as_track(X)
        from .composite import marginal_cl, two_piece_cl

        fn = two_piece_cl if self.method == "two_piece" else marginal_cl
        return fn(track, self.result_.estimate)

    def sample(self, times, dim=None, seed=None) -> np.ndarray:
        """Simulate a track at the fitted parameters on the given grid."""
        check_is_fitted(self, "result_")
        if dim is None:
            dim = self.n_features_in_ - 1
        labeled = simulate_mrme(self.result_.estimate, times, dim=dim, rng=seed)
        times = np.asarray(times, dtype=float)
        return np.column_stack([times, labeled.track.locations])
