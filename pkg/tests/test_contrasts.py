"""Interval arithmetic for linear contrasts of per-arm extrema."""

import itertools
import math

import numpy as np
import pytest

from mvtsens import (
    ArmExtrema,
    ContrastResult,
    ContrastVector,
    InputError,
    LengthMismatch,
    SensitivityParams,
    all_pairwise_contrasts,
    contrast_interval,
    pairwise_ate_table,
    pairwise_contrast,
)


def ext(arm, lam, lo, hi):
    return ArmExtrema(arm=arm, lam=lam, m_min=lo, m_max=hi)


class TestContrastInterval:
    def test_hand_example(self):
        # tau = m1 - m2 with m1 in [0.2, 0.5], m2 in [0.2, 0.5]
        exts = [ext(1, 1.0, 0.2, 0.5), ext(2, 1.0, 0.2, 0.5)]
        res = contrast_interval(exts, pairwise_contrast(1, 2, 2))
        assert res.interval_lo == pytest.approx(-0.3, abs=1e-15)
        assert res.interval_hi == pytest.approx(0.3, abs=1e-15)
        assert res.point_estimate is None  # lam != 0, none supplied

    def test_weighted_contrast(self):
        exts = [ext(1, 0.5, -1.0, 1.0), ext(2, 0.5, 0.0, 2.0), ext(3, 0.5, 3.0, 4.0)]
        c = ContrastVector(np.array([0.5, 0.5, -1.0]))
        res = contrast_interval(exts, c)
        assert res.interval_lo == pytest.approx(0.5 * -1 + 0.5 * 0 - 4.0, abs=1e-15)
        assert res.interval_hi == pytest.approx(0.5 * 1 + 0.5 * 2 - 3.0, abs=1e-15)

    def test_zero_coefficient_skips_arm(self):
        # the skipped arm may even carry one-sided extrema
        exts = [ext(1, 0.5, 1.0, 2.0), ArmExtrema(2, 0.5, None, None), ext(3, 0.5, 0.0, 0.5)]
        c = ContrastVector(np.array([1.0, 0.0, -1.0]))
        res = contrast_interval(exts, c)
        assert res.interval_lo == pytest.approx(0.5, abs=1e-15)
        assert res.interval_hi == pytest.approx(2.0, abs=1e-15)

    def test_antisymmetry(self):
        exts = [ext(1, 1.0, 0.1, 0.4), ext(2, 1.0, -0.2, 0.3)]
        plus = contrast_interval(exts, ContrastVector(np.array([1.0, -1.0])))
        minus = contrast_interval(exts, ContrastVector(np.array([-1.0, 1.0])))
        assert plus.interval_lo == pytest.approx(-minus.interval_hi, abs=1e-15)
        assert plus.interval_hi == pytest.approx(-minus.interval_lo, abs=1e-15)

    def test_lam_zero_sets_point(self):
        exts = [ext(1, 0.0, 0.25, 0.25), ext(2, 0.0, 0.10, 0.10)]
        res = contrast_interval(exts, pairwise_contrast(1, 2, 2))
        assert res.point_estimate == pytest.approx(0.15, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            contrast_interval([ext(1, 0.5, 0, 1)], pairwise_contrast(1, 2, 2))

    def test_mixed_lambda_rejected(self):
        exts = [ext(1, 0.5, 0, 1), ext(2, 1.0, 0, 1)]
        with pytest.raises(InputError, match="mix"):
            contrast_interval(exts, pairwise_contrast(1, 2, 2))

    def test_missing_side_rejected(self):
        exts = [ext(1, 0.5, 0, 1), ArmExtrema(2, 0.5, 0.2, None)]
        with pytest.raises(InputError, match="both extrema"):
            contrast_interval(exts, pairwise_contrast(1, 2, 2))

    def test_inverted_interval_rejected(self):
        with pytest.raises(InputError):
            ContrastResult(pairwise_contrast(1, 2, 2), 0.5, 1.0, 0.0)


class TestPairwiseAteTable:
    def test_shape_and_ordering(self, scenario_dataset, scenario_gps):
        lams = [1.0, 0.0, 0.5]  # deliberately unsorted
        table = pairwise_ate_table(
            scenario_dataset, scenario_gps, [SensitivityParams(l) for l in lams]
        )
        assert len(table) == 3 * 3  # 3 contrasts x 3 lambda values
        labels = [r.contrast.label for r in table]
        assert labels == [l for l in ("ate_1_2", "ate_1_3", "ate_2_3") for _ in range(3)]
        assert [r.lam for r in table[:3]] == [0.0, 0.5, 1.0]

    def test_point_estimate_constant_across_lambda(self, scenario_dataset, scenario_gps):
        table = pairwise_ate_table(
            scenario_dataset, scenario_gps,
            [SensitivityParams(l) for l in (0.0, 0.5, 1.0)],
        )
        for i in range(0, 9, 3):
            points = {r.point_estimate for r in table[i:i + 3]}
            assert len(points) == 1
            assert table[i].interval_lo == pytest.approx(table[i].point_estimate, abs=1e-12)

    def test_point_present_without_lam_zero(self, scenario_dataset, scenario_gps):
        table = pairwise_ate_table(
            scenario_dataset, scenario_gps, [SensitivityParams(0.5)]
        )
        assert all(r.point_estimate is not None for r in table)
        assert all(
            r.interval_lo - 1e-12 <= r.point_estimate <= r.interval_hi + 1e-12
            for r in table
        )

    def test_matches_joint_enumeration(self, scenario_dataset, scenario_gps):
        # decompose: optimizing each arm separately must equal optimizing
        # the contrast jointly over per-arm corner choices
        from mvtsens import arm_extrema_threshold

        params = SensitivityParams(0.8)
        table = pairwise_ate_table(scenario_dataset, scenario_gps, [params])
        per_arm = []
        for a in (1, 2, 3):
            mask = scenario_dataset.arm_mask(a)
            e = arm_extrema_threshold(
                scenario_dataset.outcomes[mask],
                scenario_gps.logits[mask, a - 1],
                params,
            )
            per_arm.append((e.m_min, e.m_max))
        for row, (k, l) in zip(table, itertools.combinations((1, 2, 3), 2)):
            vals = [
                mk - ml
                for mk in per_arm[k - 1]
                for ml in per_arm[l - 1]
            ]
            assert row.interval_lo == pytest.approx(min(vals), abs=1e-12)
            assert row.interval_hi == pytest.approx(max(vals), abs=1e-12)

    def test_contrast_length_checked(self, scenario_dataset, scenario_gps):
        with pytest.raises(LengthMismatch):
            pairwise_ate_table(
                scenario_dataset, scenario_gps, [SensitivityParams(0.0)],
                contrasts=[pairwise_contrast(1, 2, 2)],
            )
