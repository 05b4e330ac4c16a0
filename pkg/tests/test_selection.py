"""Tests for the regularization and subsample-size rules."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lib.selection import (
    IndexFunctions,
    SelectionPolicy,
    TabulatedIndexFunction,
    admissible_lower,
    choose_alpha,
    choose_subsample_size,
    cost_exponent,
    is_subquadratic,
    sample_scale,
    subsample_schedule,
    theory_rate_exponent,
    theta,
    theta_bar,
    theta_bar_inverse,
    theta_inverse,
)


class TestIndexFunctions:
    """Tests for theta, theta_bar and their inverses."""

    def test_equal_exponents_cancel(self):
        """With s = r, theta is the identity and theta_bar the square root."""
        idx = IndexFunctions(s=0.3, r=0.3)
        assert theta(idx, 0.02) == pytest.approx(0.02, rel=1e-15)
        assert theta_bar(idx, 0.04) == pytest.approx(0.2, rel=1e-15)

    def test_power(self):
        """theta(t) = t**(1 + s - r)."""
        idx = IndexFunctions(s=0.5, r=0.25)
        assert theta(idx, 0.01) == pytest.approx(10**-2.5, rel=1e-12)

    def test_theta_bar_inverse(self):
        """theta_bar_inverse squares under the default exponents."""
        assert theta_bar_inverse(IndexFunctions(), 0.1) == pytest.approx(0.01, rel=1e-14)

    def test_inverse_round_trip(self):
        """Both inverses undo their forward map."""
        idx = IndexFunctions(s=0.4, r=0.1)
        for t in (1e-4, 0.3, 2.0):
            assert theta_inverse(idx, theta(idx, t)) == pytest.approx(t, rel=1e-12)
            assert theta_bar_inverse(idx, theta_bar(idx, t)) == pytest.approx(t, rel=1e-12)

    def test_nonpositive_argument(self):
        """Index functions are defined on t > 0 only."""
        idx = IndexFunctions()
        for fn in (theta, theta_bar, theta_inverse, theta_bar_inverse):
            with pytest.raises(ValueError):
                fn(idx, 0.0)

    def test_exponent_ranges(self):
        """Out-of-range exponents and unknown regimes are rejected."""
        with pytest.raises(ValueError, match="s must lie"):
            IndexFunctions(s=0.0)
        with pytest.raises(ValueError, match="s must lie"):
            IndexFunctions(s=0.6)
        with pytest.raises(ValueError, match="r must lie"):
            IndexFunctions(r=-0.1)
        with pytest.raises(ValueError, match="regime"):
            IndexFunctions(regime="other")

    def test_constant_zeta_allowed(self):
        """r = 0 is admissible."""
        assert IndexFunctions(s=0.5, r=0.0).theta_exponent == 1.5


class TestSelectionPolicy:
    """Tests for SelectionPolicy."""

    def test_dict_round_trip(self):
        """to_dict and from_dict are inverse."""
        policy = SelectionPolicy(IndexFunctions(s=0.25, r=0.5, regime="out_of_rkhs"), delta=0.05)
        assert SelectionPolicy.from_dict(policy.to_dict()) == policy

    def test_invalid_delta(self):
        """delta must lie in (0, 1)."""
        with pytest.raises(ValueError, match="delta"):
            SelectionPolicy(delta=1.0)

    def test_invalid_constant(self):
        """c_subsample must be positive."""
        with pytest.raises(ValueError, match="c_subsample"):
            SelectionPolicy(c_subsample=0.0)


class TestChooseAlpha:
    """Tests for choose_alpha."""

    def test_identity_case(self):
        """s = r = 0.5 at N = M = 400 gives alpha = 0.1."""
        assert sample_scale(400, 400) == pytest.approx(0.1, rel=1e-15)
        assert choose_alpha(SelectionPolicy(), 400, 400) == pytest.approx(0.1, rel=1e-14)

    def test_constant_zeta(self):
        """r = 0 yields alpha = u**(1 / 1.5)."""
        policy = SelectionPolicy(IndexFunctions(s=0.5, r=0.0))
        assert choose_alpha(policy, 4_000_000, 4_000_000) == pytest.approx(0.01, rel=1e-12)

    def test_l2_rule(self):
        """out_of_rkhs inverts theta_bar: with r = 0, theta_bar(t) = t."""
        policy = SelectionPolicy(IndexFunctions(s=0.5, r=0.0, regime="out_of_rkhs"))
        assert choose_alpha(policy, 400, 400) == pytest.approx(0.1, rel=1e-12)

    def test_clamped_to_admissible_range(self, caplog):
        """Alphas below log(1/delta)/N are raised to the bound with a warning."""
        policy = SelectionPolicy(IndexFunctions(s=0.5, r=0.5, regime="out_of_rkhs"))
        alpha = choose_alpha(policy, 100, 100)
        assert alpha == admissible_lower(100, 0.1)
        assert alpha == pytest.approx(math.log(1000) / 100)
        assert "clamping" in caplog.text

    def test_monotone_in_sample_sizes(self):
        """alpha never grows with N or M."""
        sizes = np.unique(np.logspace(1, 6, 50).astype(int))
        for regime in ("in_rkhs", "out_of_rkhs"):
            policy = SelectionPolicy(IndexFunctions(s=0.5, r=0.25, regime=regime))
            grid = np.array([[choose_alpha(policy, int(n), int(m)) for m in sizes] for n in sizes])
            assert np.all(np.diff(grid, axis=0) <= 0)
            assert np.all(np.diff(grid, axis=1) <= 0)

    def test_invalid_sizes(self):
        """Sample sizes must be positive."""
        with pytest.raises(ValueError):
            sample_scale(0, 10)


class TestChooseSubsampleSize:
    """Tests for choose_subsample_size."""

    def test_arithmetic(self):
        """m = ceil(C n_inf max(log(1/alpha), 1) log(1/delta))."""
        size = choose_subsample_size(SelectionPolicy(), 1.0 / 1.1, 0.1, 1000, 1000)
        assert size == 5

    def test_log_guard(self):
        """At alpha = 1 the log factor is floored at 1."""
        policy = SelectionPolicy(delta=math.exp(-1.0))
        assert choose_subsample_size(policy, 1.9, 1.0, 1000, 1000) == 2

    def test_clipped(self, caplog):
        """m is clipped to min(N, M) with a warning."""
        size = choose_subsample_size(SelectionPolicy(c_subsample=100.0), 5.0, 0.01, 50, 80)
        assert size == 50
        assert "clipped" in caplog.text

    def test_at_least_one(self):
        """m is never below 1."""
        assert choose_subsample_size(SelectionPolicy(delta=0.9), 1e-6, 0.5, 10, 10) == 1

    def test_rejects_nonpositive(self):
        """alpha must be positive."""
        with pytest.raises(ValueError):
            choose_subsample_size(SelectionPolicy(), 1.0, 0.0, 10, 10)


class TestRateExponents:
    """Tests for theory_rate_exponent."""

    def test_values(self):
        """Rate exponents for s = r = 0.5."""
        idx = IndexFunctions(s=0.5, r=0.5)
        assert theory_rate_exponent(idx, "hk") == 0.5
        assert theory_rate_exponent(idx, "l2") == 1.0
        assert theory_rate_exponent(idx, "embedded_l2") == 1.0

    def test_l2_faster_than_hk(self):
        """The L2 rate beats the RKHS rate on the whole grid."""
        for s in (0.1, 0.3, 0.5):
            for r in (0.0, 0.25, 0.5):
                idx = IndexFunctions(s=s, r=r)
                assert theory_rate_exponent(idx, "l2") > theory_rate_exponent(idx, "hk")

    def test_unknown_metric(self):
        """Unknown metrics are rejected by name."""
        with pytest.raises(ValueError, match="Unknown metric"):
            theory_rate_exponent(IndexFunctions(), "linf")


class TestCostExponent:
    """Tests for the Nystrom cost exponent and the benchmark schedule."""

    def test_value(self):
        """s = gamma = 0.5 gives 5/3."""
        assert cost_exponent(0.5, 0.5) == pytest.approx(5.0 / 3.0)

    def test_subquadratic_matches_exponent(self):
        """is_subquadratic agrees with the exponent being below 2."""
        for s in np.linspace(0.05, 0.95, 10):
            for gamma in np.linspace(0.02, 1.0 - s, 7)[:-1]:
                exponent = cost_exponent(s, gamma)
                if abs(exponent - 2.0) > 1e-9:
                    assert is_subquadratic(s, gamma) == (exponent < 2.0)

    def test_parameter_range(self):
        """gamma and s outside their ranges are rejected."""
        with pytest.raises(ValueError, match="gamma"):
            cost_exponent(0.5, 0.0)
        with pytest.raises(ValueError, match="s must lie"):
            is_subquadratic(0.8, 0.5)

    def test_default_schedule(self):
        """Default schedule is ceil(sqrt(N) log N), at least 1."""
        assert subsample_schedule(100) == math.ceil(10 * math.log(100))
        assert subsample_schedule(1) == 1

    def test_parametrized_schedule(self):
        """Schedule with explicit s and gamma."""
        assert subsample_schedule(100, s=0.5, gamma=0.5) == 22

    def test_schedule_never_exceeds_n(self):
        """The schedule is capped at N."""
        assert subsample_schedule(10, s=0.01, gamma=0.01) == 10


class TestTabulatedIndexFunction:
    """Tests for the tabulated index function."""

    def test_matches_power_law(self):
        """A tabulated sqrt behaves like the power law."""
        t = np.logspace(-6, 0, 25)
        tab = TabulatedIndexFunction(t, np.sqrt(t), r=0.5)
        assert tab.phi(1e-3) == pytest.approx(math.sqrt(1e-3), rel=1e-10)
        assert tab.theta_inverse(0.01) == pytest.approx(0.01, rel=1e-9)

    def test_agrees_with_power_rule(self):
        """Tabulated and closed-form theta_inverse agree."""
        t = np.logspace(-6, 0, 25)
        tab = TabulatedIndexFunction(t, t**0.5, r=0.25)
        idx = IndexFunctions(s=0.5, r=0.25)
        assert tab.theta_inverse(0.003) == pytest.approx(theta_inverse(idx, 0.003), rel=1e-8)

    def test_out_of_range(self):
        """Values beyond the table are rejected."""
        tab = TabulatedIndexFunction([0.1, 1.0], [0.1, 1.0], r=0.0)
        with pytest.raises(ValueError, match="outside"):
            tab.theta_inverse(5.0)

    def test_rejects_non_increasing(self):
        """The table must be increasing."""
        with pytest.raises(ValueError, match="increasing"):
            TabulatedIndexFunction([0.1, 0.2, 0.3], [1.0, 0.5, 2.0])

    def test_rejects_short_table(self):
        """At least two knots are required."""
        with pytest.raises(ValueError):
            TabulatedIndexFunction([0.1], [0.1])
