"""Synthetic DGP, truth oracle, and study harness."""

import numpy as np
import pytest

from mvtsens import (
    InputError,
    ScenarioConfig,
    SensitivityParams,
    StudyMetrics,
    generate_dataset,
    pairwise_contrast,
    run_study,
    true_interval_oracle,
)
from mvtsens.simulation import _generate_arrays, _softmax_rows


class TestScenarioConfig:
    def test_named_scenarios_pin_ks(self):
        assert ScenarioConfig(scenario="I").k2 == 0.1
        assert ScenarioConfig(scenario="I").k3 == -0.1
        assert ScenarioConfig(scenario="II").k2 == 3.0
        with pytest.raises(InputError):
            ScenarioConfig(scenario="I", k2=5.0)

    def test_custom_requires_ks_or_beta(self):
        with pytest.raises(InputError):
            ScenarioConfig(scenario="custom")
        cfg = ScenarioConfig(scenario="custom", k2=0.0, k3=0.0)
        assert np.all(cfg.beta == 0.0)

    def test_rejects_bad_values(self):
        with pytest.raises(InputError):
            ScenarioConfig(n=0)
        with pytest.raises(InputError):
            ScenarioConfig(x3_sd=0.0)
        with pytest.raises(InputError):
            ScenarioConfig(scenario="III")
        with pytest.raises(InputError):
            ScenarioConfig(scenario="custom", k2=1.0, k3=1.0, beta=np.zeros((2, 4)))


class TestGenerateDataset:
    def test_shapes_and_names(self):
        ds = generate_dataset(ScenarioConfig(scenario="I", n=500, seed=1))
        assert ds.n == 500
        assert ds.covariate_names == ("x1", "x2", "x3")
        assert ds.num_levels == 3
        assert set(np.unique(ds.outcomes)) <= {0.0, 1.0}

    def test_seed_reproducibility(self):
        cfg = ScenarioConfig(scenario="I", n=300, seed=9)
        a, b = generate_dataset(cfg), generate_dataset(cfg)
        assert np.array_equal(a.treatments, b.treatments)
        assert np.array_equal(a.covariates, b.covariates)
        assert np.array_equal(a.outcomes, b.outcomes)

    def test_covariate_distributions(self):
        cfg = ScenarioConfig(scenario="I", n=200_000, seed=2)
        ds = generate_dataset(cfg)
        x1, x2, x3 = ds.covariates.T
        assert set(np.unique(x1)) == {0.0, 1.0}
        assert x1.mean() == pytest.approx(0.5, abs=0.01)
        assert x2.min() > -1.0 and x2.max() < 1.0
        assert x2.mean() == pytest.approx(0.0, abs=0.01)
        assert x3.std() == pytest.approx(0.5, abs=0.01)

    def test_x3_sd_override(self):
        ds = generate_dataset(ScenarioConfig(scenario="I", n=100_000, seed=3, x3_sd=2.0))
        assert ds.covariates[:, 2].std() == pytest.approx(2.0, abs=0.05)

    def test_zero_ks_give_uniform_gps(self):
        cfg = ScenarioConfig(scenario="custom", k2=0.0, k3=0.0, n=50_000, seed=4)
        rng = np.random.default_rng(0)
        _, _, _, gps = _generate_arrays(cfg, rng, cfg.n)
        np.testing.assert_allclose(gps, 1.0 / 3.0, atol=1e-12)

    def test_treatment_shares_follow_gps(self):
        cfg = ScenarioConfig(scenario="I", n=200_000, seed=5)
        rng = np.random.default_rng(1)
        t, _, _, gps = _generate_arrays(cfg, rng, cfg.n)
        for a in (1, 2, 3):
            share = (t == a).mean()
            assert share == pytest.approx(gps[:, a - 1].mean(), abs=0.005)

    def test_poor_overlap_signature(self):
        # scenario II pushes propensities toward 0 for many units
        cfg = ScenarioConfig(scenario="II", n=50_000, seed=6)
        rng = np.random.default_rng(2)
        _, _, _, gps = _generate_arrays(cfg, rng, cfg.n)
        assert gps.min() < 0.001
        cfg_i = ScenarioConfig(scenario="I", n=50_000, seed=6)
        _, _, _, gps_i = _generate_arrays(cfg_i, rng, cfg_i.n)
        assert gps_i.min() > 0.15

    def test_outcome_model(self):
        # empirical P(Y=1 | A=a) must track the one-hot outcome draw
        cfg = ScenarioConfig(scenario="custom", k2=0.0, k3=0.0, n=400_000, seed=7)
        rng = np.random.default_rng(3)
        t, x, y, _ = _generate_arrays(cfg, rng, cfg.n)
        design = np.column_stack([np.ones(cfg.n), x])
        p_win = _softmax_rows(design @ cfg.delta.T)
        for a in (1, 2, 3):
            mask = t == a
            # treatment independent of potential outcomes here, so the
            # arm mean estimates E[P(winner = a | X)]
            assert y[mask].mean() == pytest.approx(p_win[:, a - 1].mean(), abs=0.01)


class TestTruthOracle:
    def test_point_collapse_at_lambda_zero(self):
        cfg = ScenarioConfig(scenario="I", seed=0)
        lo, hi = true_interval_oracle(cfg, pairwise_contrast(1, 2, 3),
                                      SensitivityParams(0.0), N=200_000)
        assert lo == hi

    def test_reference_values(self):
        # large-draw truth for scenario I, first pairwise ATE
        cfg = ScenarioConfig(scenario="I", seed=0)
        c = pairwise_contrast(1, 2, 3)
        lo0, hi0 = true_interval_oracle(cfg, c, SensitivityParams(0.0), N=10 ** 6)
        assert lo0 == pytest.approx(-0.050, abs=0.01)
        lo1, hi1 = true_interval_oracle(cfg, c, SensitivityParams(1.0), N=10 ** 6)
        assert lo1 == pytest.approx(-0.559, abs=0.01)
        assert hi1 == pytest.approx(0.488, abs=0.01)

    def test_stability_in_N(self):
        cfg = ScenarioConfig(scenario="I", seed=0)
        c = pairwise_contrast(1, 3, 3)
        a = true_interval_oracle(cfg, c, SensitivityParams(0.5), N=500_000)
        b = true_interval_oracle(cfg, c, SensitivityParams(0.5), N=1_000_000)
        assert a[0] == pytest.approx(b[0], abs=0.005)
        assert a[1] == pytest.approx(b[1], abs=0.005)

    def test_determinism_and_size_floor(self):
        cfg = ScenarioConfig(scenario="I", seed=0)
        c = pairwise_contrast(1, 2, 3)
        p = SensitivityParams(0.3)
        assert true_interval_oracle(cfg, c, p, N=10 ** 5) == \
            true_interval_oracle(cfg, c, p, N=10 ** 5)
        with pytest.raises(InputError):
            true_interval_oracle(cfg, c, p, N=10 ** 4)


class TestRunStudy:
    def test_small_study_structure(self):
        metrics = run_study(
            ScenarioConfig(scenario="I", n=300, seed=21),
            lambdas=[0.0, 1.0], R=3, B=20, oracle_n=10 ** 5,
        )
        assert isinstance(metrics, StudyMetrics)
        assert metrics.R == 3 and metrics.R_effective == 3
        assert metrics.failures == 0
        assert metrics.lambdas == (0.0, 1.0)
        assert metrics.contrast_labels == ("ate_1_2", "ate_1_3", "ate_2_3")
        assert len(metrics.rows) == 6
        for row in metrics.rows:
            assert row.true_lo <= row.true_hi + 1e-12
            assert row.median_point_lo <= row.median_point_hi + 1e-12
            assert row.median_ci_lo <= row.median_point_lo + 1e-9
            assert 0.0 <= row.noncoverage <= 1.0
            # R=3 makes noncoverage a multiple of 1/3
            assert row.noncoverage * 3 == pytest.approx(round(row.noncoverage * 3), abs=1e-12)

    def test_determinism_across_job_counts(self):
        kw = dict(lambdas=[0.0, 0.5], R=4, B=10, oracle_n=10 ** 5)
        cfg = ScenarioConfig(scenario="I", n=200, seed=33)
        m1 = run_study(cfg, n_jobs=1, **kw)
        m2 = run_study(cfg, n_jobs=2, **kw)
        for a, b in zip(m1.rows, m2.rows):
            assert a == b

    def test_lambda_sorted_and_validated(self):
        cfg = ScenarioConfig(scenario="I", n=200, seed=1)
        m = run_study(cfg, lambdas=[1.0, 0.0], R=1, B=5, oracle_n=10 ** 5)
        assert m.lambdas == (0.0, 1.0)
        with pytest.raises(InputError):
            run_study(cfg, lambdas=[-0.5], R=1, B=5, oracle_n=10 ** 5)
        with pytest.raises(InputError):
            run_study(cfg, lambdas=[0.0], R=0, B=5, oracle_n=10 ** 5)

    def test_progress_callback(self):
        seen = []
        run_study(
            ScenarioConfig(scenario="I", n=200, seed=2),
            lambdas=[0.0], R=3, B=5, oracle_n=10 ** 5, progress=seen.append,
        )
        assert seen == [1, 2, 3]
