"""Condition checks: pass on the shipped bundles, fail on corrupted ones."""

import math
from dataclasses import replace

import numpy as np
import pytest

from evarify.checker import (
    IDENTITY_TOL,
    check_cell_sandwich,
    check_divergence_growth,
    check_log_ratio_identity,
    check_reverse_triangle,
    default_cell_samples,
    estimate_cell_bound,
    estimate_step_lower_bound,
    run_all_checks,
    step_bounds_directed,
)
from evarify.core import Estimator
from evarify.families import make_bundle


class _OffByOneEstimator(Estimator):
    """Deliberately corrupted estimator (selects the neighbouring cell)."""

    kind = "off_by_one"

    def __init__(self, base):
        self._base = base
        self.net = base.net

    def statistic(self, x):
        return self._base.statistic(x)

    def index(self, x):
        k = self._base.index(x) + 1
        if self.net.k_max is not None:
            k = min(k, self.net.k_max)
        return k

    def cell(self, k):
        return self._base.cell(k - 1)


class TestLogRatioIdentity:
    @pytest.mark.parametrize(
        "name,kw",
        [("poisson", {}), ("binomial", {"n": 64}),
         ("normal_mean", {"alpha": 1.0, "n": 4}), ("normal_variance", {"n": 4}),
         ("cauchy", {"epsilon": 0.2})],
    )
    def test_passes_on_default_grid(self, name, kw):
        rep = check_log_ratio_identity(make_bundle(name, **kw))
        assert rep.passing, rep.max_violation
        assert rep.n_evaluated > 10_000
        assert rep.n_skipped == 0

    def test_poisson_residual_below_1e_10(self):
        rep = check_log_ratio_identity(make_bundle("poisson"))
        assert rep.estimated_constant <= 1e-10

    def test_diagonal_is_exact(self):
        b = make_bundle("poisson")
        from evarify.checker import GridSpec

        spec = GridSpec(thetas=(4.0,), net_indices=(2,), g_values=(1.0, 4.0, 9.0))
        # theta = s = 4: both sides are identically zero
        rep = check_log_ratio_identity(b, spec)
        assert rep.passing and rep.estimated_constant == 0.0

    def test_uniforms_skip_support_mismatches(self):
        rep = check_log_ratio_identity(make_bundle("discrete_uniform"))
        assert rep.passing
        assert rep.n_skipped > 0  # cells beyond the smaller parameter

    def test_detects_wrong_divergence(self):
        b = make_bundle("poisson")
        wrong = replace(
            b.family, divergence_fn=lambda a, c: np.asarray(a, float) * 0.0
        )
        rep = check_log_ratio_identity(replace(b, family=wrong))
        assert not rep.passing
        assert len(rep.witnesses) > 0


class TestCellBound:
    def test_poisson_at_most_one(self):
        b = make_bundle("poisson")
        c_hat = estimate_cell_bound(b)
        assert c_hat <= 1.0 + 1e-7
        # the bound is attained at the zero count (continuous extension)
        assert c_hat == pytest.approx(1.0, abs=1e-12)

    def test_normal_mean_at_most_alpha_sq_over_8(self):
        b = make_bundle("normal_mean", alpha=1.0, n=4)
        assert estimate_cell_bound(b) <= 1.0 / 8.0 + 1e-9

    def test_cauchy_r_epsilon_at_most_log2(self):
        b = make_bundle("cauchy", epsilon=0.2)
        c_hat = estimate_cell_bound(b)
        assert c_hat <= math.log(2.0)
        assert c_hat == pytest.approx(math.log(1.0 + 0.49), abs=1e-6)

    def test_monotone_under_sample_refinement(self):
        b = make_bundle("poisson")
        small = default_cell_samples(b, n_cells=20, per_cell=5)
        big = small + default_cell_samples(b, n_cells=60, per_cell=10, seed=1)
        assert estimate_cell_bound(b, big) >= estimate_cell_bound(b, small)

    def test_corrupted_estimator_exceeds_declared_bound(self):
        b = make_bundle("poisson")
        bad = replace(b, estimator=_OffByOneEstimator(b.estimator))
        assert estimate_cell_bound(bad) > 1.0 + 1e-7


class TestCellSandwich:
    @pytest.mark.parametrize(
        "name,kw",
        [("poisson", {}), ("discrete_uniform", {}), ("cauchy", {"epsilon": 0.2}),
         ("normal_variance", {"n": 4})],
    )
    def test_passes(self, name, kw):
        rep = check_cell_sandwich(make_bundle(name, **kw))
        assert rep.passing

    def test_corrupted_estimator_detected_with_witnesses(self):
        b = make_bundle("poisson")
        bad = replace(b, estimator=_OffByOneEstimator(b.estimator))
        rep = check_cell_sandwich(bad)
        assert not rep.passing
        assert len(rep.witnesses) > 0

    def test_single_point_net_vacuous(self):
        # n = 4 gives a one-point sine net: every comparison is vacuous
        rep = check_cell_sandwich(make_bundle("binomial", n=4))
        assert rep.passing


class TestDivergenceGrowth:
    def test_cauchy_alpha_one_passes(self):
        rep = check_divergence_growth(make_bundle("cauchy", epsilon=0.2), alpha=1.0)
        assert rep.passing
        assert rep.n_evaluated > 50

    def test_vacuous_pairs_skipped(self):
        b = make_bundle("cauchy", epsilon=0.2)
        rep = check_divergence_growth(b, pairs=[(0.4, 0.6), (0.0, 1.5)], alpha=1.0)
        assert rep.passing and rep.n_evaluated == 0

    def test_poisson_with_exponent_ten_fails_with_witnesses(self):
        """Brute-force search: a pair just outside (1, 9) separates three
        squares while its divergence stays near d(1 || 9) = 8 - log 9,
        well under 11 * log 2."""
        b = make_bundle("poisson")
        rep = check_divergence_growth(b, alpha=10.0)
        assert not rep.passing
        assert len(rep.witnesses) > 0

    def test_estimation_mode(self):
        b = make_bundle("cauchy", epsilon=0.2)
        bare = replace(b, factor_inputs=None)
        rep = check_divergence_growth(bare, alpha=None)
        assert rep.passing  # nothing asserted
        assert rep.estimated_constant == pytest.approx(1.0, abs=0.05)


class TestReverseTriangle:
    @pytest.mark.parametrize(
        "name,kw",
        [("poisson", {}), ("normal_mean", {"alpha": 1.0, "n": 4}),
         ("normal_variance", {"n": 4}), ("binomial", {"n": 64})],
    )
    def test_exponential_families_pass(self, name, kw):
        rep = check_reverse_triangle(make_bundle(name, **kw))
        assert rep.passing, rep.max_violation
        assert rep.n_evaluated >= 1000

    def test_degenerate_triple_is_equality(self):
        b = make_bundle("poisson")
        rep = check_reverse_triangle(b, triples=[(3.0, 3.0, 3.0)])
        assert rep.passing and rep.max_violation == 0.0

    def test_normal_mean_algebraic_identity(self):
        # (a+b)^2 >= a^2 + b^2 for same-sign increments, scaled by n/2
        b = make_bundle("normal_mean", alpha=1.0, n=4)
        rep = check_reverse_triangle(
            b, triples=[(0.0, 1.0, 3.0), (5.0, 2.0, -1.0), (0.0, 0.5, 0.75)]
        )
        assert rep.passing

    def test_cauchy_divergence_violates_it(self):
        # log(1 + d^2) is not a Bregman divergence; far triples break the
        # inequality, which is why that family uses the growth route
        b = make_bundle("cauchy", epsilon=0.2)
        rep = check_reverse_triangle(b, triples=[(0.0, 5.0, 10.0)])
        assert not rep.passing


class TestStepBounds:
    def test_poisson_steps_at_least_one(self):
        b = make_bundle("poisson")
        assert estimate_step_lower_bound(b, range(1, 10_001)) >= 1.0 - 1e-7

    def test_normal_mean_steps_exact(self):
        b = make_bundle("normal_mean", alpha=1.0, n=4)
        assert estimate_step_lower_bound(b, range(-1000, 1001)) == pytest.approx(
            0.5, abs=1e-9
        )

    def test_normal_variance_directed_bounds(self):
        for n in (4, 16, 64):
            b = make_bundle("normal_variance", n=n)
            down, up = step_bounds_directed(b, range(-1000, 1001))
            assert down >= 1.0 / 32.0 - 1e-9
            assert up >= 1.0 / 8.0 - 1e-9

    def test_refinement_monotone(self):
        b = make_bundle("poisson")
        wide = estimate_step_lower_bound(b, range(1, 5001))
        narrow = estimate_step_lower_bound(b, range(1, 101))
        assert wide <= narrow  # min over a superset can only shrink


class TestRunAllChecks:
    @pytest.mark.parametrize(
        "name,kw",
        [("binomial", {"n": 64}), ("discrete_uniform", {}), ("poisson", {}),
         ("continuous_uniform", {}), ("normal_mean", {"alpha": 1.0, "n": 4}),
         ("normal_variance", {"n": 16}), ("cauchy", {"epsilon": 0.2})],
    )
    def test_all_shipped_bundles_pass(self, name, kw):
        reports = run_all_checks(make_bundle(name, **kw))
        for cname, rep in reports.items():
            assert rep.passing, (cname, rep.max_violation)

    def test_deterministic_given_seed(self):
        b = make_bundle("poisson")
        r1 = run_all_checks(b, seed=5)
        r2 = run_all_checks(b, seed=5)
        assert {k: v.to_dict() for k, v in r1.items()} == {
            k: v.to_dict() for k, v in r2.items()
        }

    def test_report_serialization_embeds_witnesses(self):
        b = make_bundle("poisson")
        rep = check_divergence_growth(b, alpha=10.0)
        doc = rep.to_dict()
        assert doc["condition"] == "divergence_growth"
        assert doc["witnesses"] and isinstance(doc["witnesses"][0], list)
        assert doc["passing"] is False

    def test_inflated_declared_step_constant_detected(self):
        # mutation: claim a step constant the net cannot deliver
        from evarify.core import FactorInputs

        b = make_bundle("poisson")
        bad = replace(b, factor_inputs=FactorInputs(c_prime=1.0, c=2.5))
        reports = run_all_checks(bad)
        assert not reports["step_lower_bound"].passing

    def test_identity_tolerance_constant(self):
        assert IDENTITY_TOL == 1e-9
