"""Monte Carlo estimators versus the closed forms they certify."""

import math

import pytest

from fedsgt import analytics
from fedsgt.montecarlo import (MCConfig, MCEstimate, mc_comm_cost,
                               mc_deletion_rate_fedcio,
                               mc_deletion_rate_fedsgt,
                               mc_expected_remaining, mc_expected_span,
                               validation_grid)

CFG = MCConfig(trials=60_000, seed=11)


class TestAgreement:
    def test_deletion_rate_fedsgt(self):
        for L, B in [(4, 4), (6, 2), (10, 10)]:
            est = mc_deletion_rate_fedsgt(L, B, CFG)
            ref = analytics.deletion_rate_fedsgt(L, B)
            assert est.consistent_with(ref), (L, B, est.mean, ref)

    def test_deletion_rate_fedcio(self):
        for c in (2, 3, 5):
            est = mc_deletion_rate_fedcio(c, CFG)
            assert est.consistent_with(analytics.deletion_rate_fedcio(c))

    def test_expected_span(self):
        for L, r in [(4, 2), (6, 2), (10, 7)]:
            est = mc_expected_span(L, r, CFG)
            assert est.consistent_with(analytics.expected_span(L, r))

    def test_expected_remaining_both_methods(self):
        est = mc_expected_remaining("FedSGT", 50_000, 10, 5, CFG)
        assert est.consistent_with(
            analytics.expected_remaining_fedsgt(50_000, 10, 5))
        est = mc_expected_remaining("FedCIO", 50_000, 5, 5, CFG)
        assert est.consistent_with(
            analytics.expected_remaining_fedcio(50_000, 5, 5))

    def test_comm_cost(self):
        for L, S in [(2, 2), (6, 2), (10, 2)]:
            est = mc_comm_cost(L, S, CFG)
            assert est.consistent_with(analytics.expected_comm_cost(L, S))

    def test_span_above_lookup_limit(self):
        # L=20 cannot use the 2^L lookup table; the fallback path must agree
        est = mc_expected_span(20, 6, MCConfig(trials=20_000, seed=5))
        assert est.consistent_with(analytics.expected_span(20, 6))


class TestReproducibility:
    def test_same_seed_same_estimate(self):
        a = mc_expected_span(6, 2, CFG)
        b = mc_expected_span(6, 2, CFG)
        assert (a.mean, a.stderr) == (b.mean, b.stderr)

    def test_worker_count_does_not_change_estimate(self):
        for workers in (2, 3, 8):
            a = mc_deletion_rate_fedsgt(6, 6, CFG, workers=1)
            b = mc_deletion_rate_fedsgt(6, 6, CFG, workers=workers)
            assert (a.mean, a.stderr) == (b.mean, b.stderr), workers

    def test_seed_changes_estimate(self):
        a = mc_expected_span(6, 2, MCConfig(trials=10_000, seed=1))
        b = mc_expected_span(6, 2, MCConfig(trials=10_000, seed=2))
        assert a.mean != b.mean


class TestFinitePopulation:
    def test_without_replacement_needs_fewer_requests(self):
        # finite population: each request removes a real slice, so refills
        # are impossible and coverage happens no later than in the
        # with-replacement model
        cfg = MCConfig(trials=30_000, seed=7)
        infinite = mc_deletion_rate_fedsgt(6, 6, cfg)
        finite = mc_deletion_rate_fedsgt(6, 6, cfg, slices_per_group=2)
        assert finite.mean < infinite.mean
        # 12 slices total: coverage cannot take more than 12 requests
        assert finite.mean <= 12.0

    def test_single_slice_groups_cover_in_exactly_l(self):
        cfg = MCConfig(trials=2_000, seed=3)
        est = mc_deletion_rate_fedsgt(5, 5, cfg, slices_per_group=1)
        assert est.mean == pytest.approx(5.0)
        assert est.stderr == pytest.approx(0.0)


class TestEstimateSemantics:
    def test_zscore_exact_match_with_zero_variance(self):
        est = MCEstimate(mean=5.0, stderr=0.0, trials=1000)
        assert est.zscore(5.0) == 0.0
        assert est.consistent_with(5.0)

    def test_zscore_mismatch_with_zero_variance(self):
        est = MCEstimate(mean=5.0, stderr=0.0, trials=1000)
        assert math.isinf(est.zscore(5.1))
        assert not est.consistent_with(5.1)

    def test_single_trial_is_uninformative(self):
        est = mc_expected_span(6, 2, MCConfig(trials=1, seed=0))
        assert est.trials == 1
        assert math.isinf(est.stderr)
        assert est.zscore(3.0) == 0.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MCConfig(trials=0)
        with pytest.raises(ValueError):
            MCConfig(trials=10, confidence_k=0.0)


class TestValidationGrid:
    def test_grid_well_formed_and_passing(self):
        rows = validation_grid(MCConfig(trials=30_000, seed=0), workers=4)
        assert len(rows) >= 40
        quantities = {r.quantity for r in rows}
        assert quantities == {"deletion_rate_fedsgt", "deletion_rate_fedcio",
                              "expected_span", "expected_remaining_fedsgt",
                              "expected_remaining_fedcio",
                              "expected_comm_cost"}
        for row in rows:
            assert row.estimate.trials == 30_000
            assert abs(row.zscore) <= 4.0, (row.quantity, row.params,
                                            row.zscore)

    def test_rare_event_rows_excluded(self):
        rows = validation_grid(MCConfig(trials=1000, seed=0))
        params = [r.params for r in rows
                  if r.quantity == "expected_remaining_fedcio"]
        assert not any("c=2;r=20" in p for p in params)
        assert any("c=5;r=20" in p for p in params)
