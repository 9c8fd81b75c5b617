import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import gamma as gamma_dist

from mrme.errors import NumericalError, ValidationError
from mrme.telegraph import (
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

from oracles import mc_occupation_density, mc_state_prob

RATES = RatePair(1.0, 0.5)


def conv_cdf_oracle(t, a1, b1, a2, b2):
    """P(G1 + G2 <= t) by direct numerical convolution (independent route)."""
    if a1 == 0:
        return gamma_dist.cdf(t, a2, scale=1.0 / b2)
    if a2 == 0:
        return gamma_dist.cdf(t, a1, scale=1.0 / b1)

    def integrand(x):
        return gamma_dist.pdf(x, a1, scale=1.0 / b1) * gamma_dist.cdf(t - x, a2, scale=1.0 / b2)

    val, err = quad(integrand, 0.0, t, limit=200)
    return val


class TestGammaSumCdf:
    def test_equal_rates_collapse_to_erlang(self, rng):
        # Gamma(a1, b) + Gamma(a2, b) is Gamma(a1 + a2, b)
        for _ in range(30):
            a1, a2 = rng.integers(0, 12, size=2)
            b = float(rng.uniform(0.05, 8.0))
            t = float(rng.uniform(0.01, 20.0))
            want = gamma_dist.cdf(t, a1 + a2, scale=1.0 / b) if a1 + a2 else 1.0
            got = gamma_sum_cdf(t, int(a1), b, int(a2), b)
            assert got == pytest.approx(want, abs=1e-12)

    def test_matches_numerical_convolution(self, rng):
        for _ in range(25):
            a1 = int(rng.integers(1, 9))
            a2 = int(rng.integers(1, 9))
            b1, b2 = rng.uniform(0.1, 6.0, size=2)
            t = float(rng.uniform(0.05, 15.0))
            want = conv_cdf_oracle(t, a1, float(b1), a2, float(b2))
            got = gamma_sum_cdf(t, a1, float(b1), a2, float(b2))
            assert got == pytest.approx(want, abs=5e-9)

    def test_two_exponentials_closed_form(self):
        # hypoexponential closed form for a1 = a2 = 1, b1 != b2
        b1, b2, t = 1.0, 0.5, 2.0
        want = 1.0 - (b2 * math.exp(-b1 * t) - b1 * math.exp(-b2 * t)) / (b2 - b1)
        assert gamma_sum_cdf(t, 1, b1, 1, b2) == pytest.approx(want, abs=1e-13)

    def test_degenerate_shapes(self):
        assert gamma_sum_cdf(3.0, 0, 1.0, 0, 1.0) == 1.0
        assert gamma_sum_cdf(0.0, 2, 1.0, 1, 1.0) == 0.0
        assert gamma_sum_cdf(1.5, 0, 1.0, 3, 2.0) == pytest.approx(
            gamma_dist.cdf(1.5, 3, scale=0.5), abs=1e-12
        )
        assert gamma_sum_cdf(1.5, 2, 3.0, 0, 1.0) == pytest.approx(
            gamma_dist.cdf(1.5, 2, scale=1.0 / 3.0), abs=1e-12
        )

    def test_large_rate_times_no_overflow(self):
        # log-space terms keep huge b*t finite
        val = gamma_sum_cdf(50.0, 40, 400.0, 3, 0.5)
        assert 0.0 <= val <= 1.0
        assert val == pytest.approx(gamma_dist.cdf(50.0, 3, scale=2.0), rel=1e-6)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValidationError):
            gamma_sum_cdf(-1.0, 1, 1.0, 1, 1.0)
        with pytest.raises(ValidationError):
            gamma_sum_cdf(1.0, 1.5, 1.0, 1, 1.0)
        with pytest.raises(ValidationError):
            gamma_sum_cdf(1.0, 1, 0.0, 1, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        a1=st.integers(0, 10),
        a2=st.integers(0, 10),
        b1=st.floats(0.05, 10.0),
        b2=st.floats(0.05, 10.0),
        t=st.floats(0.0, 30.0),
        dt=st.floats(0.01, 5.0),
    )
    def test_monotone_and_bounded(self, a1, a2, b1, b2, t, dt):
        lo = gamma_sum_cdf(t, a1, b1, a2, b2)
        hi = gamma_sum_cdf(t + dt, a1, b1, a2, b2)
        assert 0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0
        # the tail subtraction leaves ~1 ulp of absolute noise, so
        # monotonicity only holds above the cancellation floor
        assert hi >= lo - 1e-15

    @settings(max_examples=40, deadline=None)
    @given(
        a1=st.integers(0, 8),
        a2=st.integers(0, 8),
        b1=st.floats(0.05, 8.0),
        b2=st.floats(0.05, 8.0),
        t=st.floats(0.001, 20.0),
    )
    def test_h_diff_is_a_probability(self, a1, a2, b1, b2, t):
        val = h_diff(t, a1, b1, a2, b2)
        assert 0.0 <= val <= 1.0


class TestTau:
    def test_series_matches_closed_form(self, rng):
        for _ in range(40):
            rates = RatePair(*np.exp(rng.uniform(np.log(0.05), np.log(20.0), size=2)))
            t = float(np.exp(rng.uniform(np.log(0.01), np.log(50.0))))
            for i in (0, 1):
                for j in (0, 1):
                    got = tau(i, j, t, rates)
                    want = tau_closed_form(i, j, t, rates)
                    assert abs(got - want) < 1e-10, (rates, t, i, j)

    def test_rows_sum_to_one(self):
        for t in (0.0, 0.3, 2.0, 17.0):
            for i in (0, 1):
                total = tau(i, 0, t, RATES) + tau(i, 1, t, RATES)
                assert total == pytest.approx(1.0, abs=1e-10)

    def test_identity_at_zero(self):
        assert tau(1, 1, 0.0, RATES) == 1.0
        assert tau(1, 0, 0.0, RATES) == 0.0

    def test_long_horizon_reaches_stationary(self):
        p1, p0 = stationary_dist(RATES)
        assert tau(0, 1, 80.0, RATES) == pytest.approx(p1, abs=1e-12)
        assert tau(1, 0, 80.0, RATES) == pytest.approx(p0, abs=1e-12)

    def test_orientation_against_simulation(self):
        # asymmetric rates expose any index transposition
        rates = RatePair(2.0, 0.25)
        gen = np.random.default_rng(5150)
        for i, j in ((1, 1), (0, 1)):
            est, se = mc_state_prob(rates.lambda1, rates.lambda0, i, j, 1.7, 200_000, gen)
            want = tau(i, j, 1.7, rates)
            assert abs(est - want) < 4.0 * se

    def test_extreme_rate_uses_no_series_blowup(self):
        # the closed form must agree even when lambda * t is enormous
        rates = RatePair(900.0, 450.0)
        assert tau_closed_form(1, 1, 50.0, rates) == pytest.approx(1.0 / 3.0, abs=1e-12)


class TestOccupationDensity:
    def test_mass_identities_against_tau(self):
        # integral of p_i1/p_i0 over w plus the no-switch atom recovers tau
        x, wts = np.polynomial.legendre.leggauss(400)
        for rates in (RATES, RatePair(0.3, 1.7), RatePair(4.0, 0.1)):
            for t in (0.4, 1.0, 3.0):
                w = 0.5 * t * (x + 1.0)
                ww = 0.5 * t * wts
                from mrme.telegraph import _occupation_kernels

                p11, p10, p00, p01 = _occupation_kernels(w, t, rates)
                atom1 = math.exp(-rates.lambda1 * t)
                atom0 = math.exp(-rates.lambda0 * t)
                assert np.dot(ww, p11) + atom1 == pytest.approx(
                    tau_closed_form(1, 1, t, rates), abs=1e-6
                )
                assert np.dot(ww, p10) == pytest.approx(
                    tau_closed_form(1, 0, t, rates), abs=1e-6
                )
                assert np.dot(ww, p00) + atom0 == pytest.approx(
                    tau_closed_form(0, 0, t, rates), abs=1e-6
                )
                assert np.dot(ww, p01) == pytest.approx(
                    tau_closed_form(0, 1, t, rates), abs=1e-6
                )

    def test_matches_monte_carlo_histogram(self):
        gen = np.random.default_rng(424242)
        t = 2.0
        # moving channels: w is moving time; resting channels: w is resting time
        cases = [((1, 1), 0.7), ((1, 0), 1.2), ((0, 0), 0.9), ((0, 1), 1.4)]
        for (i, j), w in cases:
            want = occupation_density(i, j, w, t, RATES)
            # histogram measures the density of moving time; for i=0 the
            # kernel is expressed in resting time, so map the query point
            w_moving = w if i == 1 else t - w
            est, se = mc_occupation_density(
                RATES.lambda1, RATES.lambda0, i, j, w_moving, t, 400_000, gen, 0.02
            )
            assert abs(est - want) < max(4.0 * se, 5e-3), (i, j)

    def test_known_value_regression(self):
        # frozen from the Monte Carlo histogram oracle (1e7 paths, seed 7)
        assert occupation_density(1, 1, 0.7, 2.0, RATES) == pytest.approx(
            0.11300217299905711, rel=1e-12
        )

    def test_rejects_boundary_w(self):
        with pytest.raises(ValidationError):
            occupation_density(1, 1, 0.0, 2.0, RATES)
        with pytest.raises(ValidationError):
            occupation_density(1, 1, 2.0, 2.0, RATES)

    def test_positive_inside(self, rng):
        for _ in range(50):
            t = float(rng.uniform(0.1, 5.0))
            w = float(rng.uniform(0.01, 0.99)) * t
            val = occupation_density(rng.integers(2), rng.integers(2), w, t, RATES)
            assert val > 0.0


class TestStationary:
    def test_values(self):
        p1, p0 = stationary_dist(RATES)
        assert p1 == pytest.approx(0.5 / 1.5)
        assert p0 == pytest.approx(1.0 / 1.5)
        assert p1 + p0 == 1.0


class TestSegmentPath:
    def path(self):
        return SegmentPath(
            initial_state=StateKind.MOVING,
            boundaries=np.array([0.5, 1.25, 3.0]),
            horizon=4.0,
        )

    def test_state_at(self):
        path = self.path()
        got = path.state_at([0.0, 0.3, 0.5, 1.0, 2.0, 3.5])
        assert got.tolist() == [1, 1, 0, 0, 1, 0]

    def test_occupation_exact(self):
        path = self.path()
        want = {0.3: 0.3, 0.5: 0.5, 1.0: 0.5, 2.0: 1.25, 3.0: 2.25, 4.0: 2.25}
        for t, m in want.items():
            assert path.occupation(t)[0] == pytest.approx(m, abs=1e-14)

    def test_occupation_monotone_and_bounded(self):
        path = self.path()
        ts = np.linspace(0.0, 4.0, 101)
        occ = path.occupation(ts)
        assert np.all(np.diff(occ) >= -1e-15)
        assert np.all(occ <= ts + 1e-15)


class TestSimulateStates:
    def test_ergodic_moving_fraction(self):
        path = simulate_states(RATES, 20_000.0, init="stationary", rng=99)
        frac = float(path.occupation(20_000.0)[0]) / 20_000.0
        p1, _ = stationary_dist(RATES)
        assert abs(frac - p1) < 0.02

    def test_holding_time_means(self):
        path = simulate_states(RATES, 50_000.0, init=StateKind.MOVING, rng=3)
        bounds = np.concatenate(([0.0], path.boundaries))
        holds = np.diff(bounds)
        moving_holds = holds[0::2]
        resting_holds = holds[1::2]
        assert moving_holds.mean() == pytest.approx(1.0, rel=0.03)
        assert resting_holds.mean() == pytest.approx(2.0, rel=0.03)

    def test_deterministic_under_seed(self):
        a = simulate_states(RATES, 100.0, rng=12)
        b = simulate_states(RATES, 100.0, rng=12)
        assert a.initial_state == b.initial_state
        assert np.array_equal(a.boundaries, b.boundaries)

    def test_boundaries_strictly_increasing_inside_horizon(self):
        path = simulate_states(RATES, 500.0, rng=8)
        assert np.all(np.diff(path.boundaries) > 0)
        assert path.boundaries.size == 0 or path.boundaries[-1] < 500.0

    def test_fixed_init_respected(self):
        path = simulate_states(RATES, 10.0, init=StateKind.RESTING, rng=0)
        assert path.initial_state == StateKind.RESTING
        assert path.state_at(0.0) == 0

    def test_rejects_bad_horizon(self):
        with pytest.raises(ValidationError):
            simulate_states(RATES, 0.0, rng=0)
