"""Error curves, EER, tandem-cost coefficients, and the minimum cost.

The heavier checks compare against the brute-force threshold-enumeration
oracles in conftest.py, which recount every error rate per threshold.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spoofeval.metrics import (
    AsvErrorRates,
    CoefficientError,
    CostModel,
    DEFAULT_COST_MODEL,
    DegenerateCostError,
    TdcfCoeffs,
    TdcfResult,
    asv_operating_point,
    eer,
    error_curve,
    min_tdcf,
    normalize_bounds_check,
    tdcf_coefficients,
)
from spoofeval.trialdata import join, parse_protocol

from conftest import oracle_eer, oracle_min_tdcf

COEFFS = TdcfCoeffs(c0=0.11305, c1=0.82745, c2=0.25)


class TestCostModel:
    def test_default_values(self):
        cost = DEFAULT_COST_MODEL
        assert (cost.p_tar, cost.p_non, cost.p_spoof) == (0.9405, 0.0095, 0.05)
        assert (cost.c_miss, cost.c_fa, cost.c_fa_spoof) == (1.0, 10.0, 10.0)

    def test_priors_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            CostModel(p_tar=0.5, p_non=0.1, p_spoof=0.1)

    def test_costs_positive(self):
        with pytest.raises(ValueError):
            CostModel(c_miss=0.0)

    def test_priors_open_interval(self):
        with pytest.raises(ValueError):
            CostModel(p_tar=1.0, p_non=0.0, p_spoof=0.0)


class TestCoefficients:
    def test_reference_arithmetic(self):
        rates = AsvErrorRates(p_miss_asv=0.1, p_fa_asv=0.2, p_fa_spoof_asv=0.5)
        coeffs = tdcf_coefficients(rates)
        assert coeffs.c0 == pytest.approx(0.11305, abs=1e-12)
        assert coeffs.c1 == pytest.approx(0.82745, abs=1e-12)
        assert coeffs.c2 == pytest.approx(0.25, abs=1e-12)
        assert coeffs.asv_floor == pytest.approx(0.11305 / 0.36305, abs=1e-12)

    def test_rates_bounds(self):
        with pytest.raises(ValueError):
            AsvErrorRates(p_miss_asv=-0.1, p_fa_asv=0.0, p_fa_spoof_asv=0.0)
        with pytest.raises(ValueError):
            AsvErrorRates(p_miss_asv=0.0, p_fa_asv=1.5, p_fa_spoof_asv=0.0)

    def test_degenerate_default_cost(self):
        with pytest.raises(DegenerateCostError):
            TdcfCoeffs(c0=0.0, c1=1.0, c2=0.0)

    def test_negative_coefficient_rejected(self):
        with pytest.raises(CoefficientError):
            TdcfCoeffs(c0=-0.1, c1=1.0, c2=1.0)

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.001, max_value=1.0),
    )
    def test_floor_in_unit_interval(self, p_miss, p_fa, p_fa_spoof):
        rates = AsvErrorRates(p_miss_asv=p_miss, p_fa_asv=p_fa, p_fa_spoof_asv=p_fa_spoof)
        try:
            coeffs = tdcf_coefficients(rates)
        except CoefficientError:
            return  # extreme ASV errors can push c1 negative; rejected by design
        assert 0.0 <= coeffs.asv_floor <= 1.0


class TestErrorCurve:
    def test_sentinel_endpoints(self):
        curve = error_curve([1.0, 2.0], [0.0])
        assert curve.thresholds[0] == -np.inf and curve.thresholds[-1] == np.inf
        # accept-all: no misses, all false alarms; reject-all: the reverse.
        assert curve.p_miss[0] == 0.0 and curve.p_fa[0] == 1.0
        assert curve.p_miss[-1] == 1.0 and curve.p_fa[-1] == 0.0

    def test_counting_convention(self):
        curve = error_curve([1.0, 2.0, 3.0], [1.0, 2.0])
        i = list(curve.thresholds).index(2.0)
        assert curve.p_miss[i] == pytest.approx(1.0 / 3.0)  # only 1.0 is below
        assert curve.p_fa[i] == pytest.approx(1.0 / 2.0)  # 2.0 is accepted

    def test_monotonicity_random(self, rng):
        for _ in range(20):
            pos = rng.normal(1, 1, rng.integers(1, 50))
            neg = rng.normal(-1, 1, rng.integers(1, 50))
            curve = error_curve(pos, neg)
            assert np.all(np.diff(curve.p_miss) >= 0)
            assert np.all(np.diff(curve.p_fa) <= 0)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            error_curve([], [1.0])
        with pytest.raises(ValueError):
            error_curve([np.nan], [1.0])


class TestEer:
    def test_exact_crossing(self):
        # one miss and one false alarm at threshold 0.0 out of two each
        value, threshold = eer(error_curve([-1.0, 1.0], [-2.0, 2.0]))
        assert value == 0.5
        assert threshold in (-1.0, 1.0, 2.0)  # any grid point with diff == 0

    def test_interpolated_crossing(self):
        pos = [0.0, 1.0, 2.0, 3.0]
        neg = [0.5, 1.5]
        value, threshold = eer(error_curve(pos, neg))
        expected_value, expected_threshold = oracle_eer(pos, neg)
        assert value == pytest.approx(expected_value, abs=1e-15)
        assert threshold == pytest.approx(expected_threshold, abs=1e-15)

    def test_identical_multisets_give_half(self):
        value, threshold = eer(error_curve([1.0, 2.0], [1.0, 2.0]))
        assert value == 0.5
        assert np.isfinite(threshold)

    def test_perfect_separation_gives_zero(self):
        value, _ = eer(error_curve([1.0, 2.0], [-2.0, -1.0]))
        assert value == 0.0

    def test_oracle_equivalence_random(self, rng):
        for _ in range(50):
            pos = np.round(rng.normal(0.5, 1, rng.integers(1, 60)), 2)
            neg = np.round(rng.normal(-0.5, 1, rng.integers(1, 60)), 2)
            value, threshold = eer(error_curve(pos, neg))
            expected_value, expected_threshold = oracle_eer(pos, neg)
            assert value == pytest.approx(expected_value, abs=1e-12)
            assert threshold == pytest.approx(expected_threshold, abs=1e-12)


class TestMinTdcf:
    def test_oracle_equivalence_random(self, rng):
        for _ in range(50):
            bona = rng.normal(1, 1, rng.integers(1, 80))
            spoof = rng.normal(-1, 1, rng.integers(1, 80))
            result = min_tdcf(bona, spoof, COEFFS)
            expected_value, expected_threshold = oracle_min_tdcf(
                bona, spoof, COEFFS.c0, COEFFS.c1, COEFFS.c2
            )
            assert result.min_tdcf_norm == pytest.approx(expected_value, abs=1e-12)
            assert result.threshold == expected_threshold

    def test_constant_cm_is_exactly_one(self):
        result = min_tdcf([0.5] * 10, [0.5] * 7, COEFFS)
        assert result.min_tdcf_norm == 1.0

    def test_perfect_cm_hits_floor_exactly(self):
        result = min_tdcf([1.0, 2.0, 3.0], [-3.0, -2.0, -1.0], COEFFS)
        assert result.min_tdcf_norm == COEFFS.asv_floor

    def test_bounds_random(self, rng):
        for _ in range(50):
            bona = rng.normal(0.2, 1, 40)
            spoof = rng.normal(-0.2, 1, 40)
            result = min_tdcf(bona, spoof, COEFFS)
            assert COEFFS.asv_floor <= result.min_tdcf_norm <= 1.0
            assert normalize_bounds_check(result)

    def test_duplicated_trials_change_nothing(self, rng):
        bona = rng.normal(1, 1, 30)
        spoof = rng.normal(-1, 1, 30)
        base = min_tdcf(bona, spoof, COEFFS)
        doubled = min_tdcf(np.repeat(bona, 2), np.repeat(spoof, 2), COEFFS)
        assert doubled.min_tdcf_norm == base.min_tdcf_norm
        assert doubled.threshold == base.threshold

    def test_monotone_transform_invariance(self, rng):
        bona = rng.normal(1, 1, 40)
        spoof = rng.normal(-1, 1, 40)
        base = min_tdcf(bona, spoof, COEFFS)
        for transform in (np.exp, lambda s: 3.0 * s + 7.0):
            moved = min_tdcf(transform(bona), transform(spoof), COEFFS)
            assert moved.min_tdcf_norm == pytest.approx(base.min_tdcf_norm, abs=1e-12)

    def test_tie_breaks_to_smallest_threshold(self):
        # perfect separation: every threshold in (max spoof, min bona] attains
        # the floor; the smallest candidate is the lowest bona fide score
        result = min_tdcf([1.0, 2.0], [-2.0, -1.0], COEFFS)
        assert result.threshold == 1.0

    def test_normalize_bounds_check_rejects_out_of_range(self):
        bad = TdcfResult(min_tdcf_norm=1.5, threshold=0.0, asv_floor=0.3)
        assert not normalize_bounds_check(bad)
        low = TdcfResult(min_tdcf_norm=0.1, threshold=0.0, asv_floor=0.3)
        assert not normalize_bounds_check(low)


ASV_PROTOCOL = """\
s V1 - - target
s V2 - - target
s V3 - - target
s V4 - - nontarget
s V5 - - nontarget
s V6 - A01 spoof
s V7 - A01 spoof
"""


class TestAsvOperatingPoint:
    def test_threshold_at_target_nontarget_eer(self):
        scores = {
            "V1": 2.0, "V2": 3.0, "V3": 4.0,
            "V4": -1.0, "V5": 2.5,
            "V6": 2.6, "V7": -0.5,
        }
        score_set = join(parse_protocol(ASV_PROTOCOL, keys="asv"), scores)
        threshold, rates = asv_operating_point(score_set)
        targets = np.array([2.0, 3.0, 4.0])
        nontargets = np.array([-1.0, 2.5])
        expected_value, expected_threshold = oracle_eer(targets, nontargets)
        assert threshold == pytest.approx(expected_threshold)
        assert rates.p_miss_asv == np.mean(targets < threshold)
        assert rates.p_fa_asv == np.mean(nontargets >= threshold)
        assert rates.p_fa_spoof_asv == np.mean(np.array([2.6, -0.5]) >= threshold)

    def test_requires_all_three_classes(self):
        protocol = "s V1 - - target\ns V2 - - nontarget\n"
        score_set = join(parse_protocol(protocol, keys="asv"), {"V1": 1.0, "V2": 0.0})
        with pytest.raises(ValueError, match="spoof"):
            asv_operating_point(score_set)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(min_value=-50, max_value=50), min_size=1, max_size=40),
    st.lists(st.integers(min_value=-50, max_value=50), min_size=1, max_size=40),
)
def test_min_tdcf_matches_oracle_on_integer_grids(pos_raw, neg_raw):
    bona = np.array(pos_raw, dtype=float) / 4.0
    spoof = np.array(neg_raw, dtype=float) / 4.0
    result = min_tdcf(bona, spoof, COEFFS)
    expected_value, expected_threshold = oracle_min_tdcf(
        bona, spoof, COEFFS.c0, COEFFS.c1, COEFFS.c2
    )
    assert result.min_tdcf_norm == pytest.approx(expected_value, abs=1e-12)
    assert result.threshold == expected_threshold
