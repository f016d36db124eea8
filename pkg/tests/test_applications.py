import numpy as np
import pytest
from numpy.testing import assert_allclose

from wshrink.applications import (
    BacktestConfig,
    LabeledDataset,
    SyntheticSpec,
    analytical_estimator,
    known_zero_pattern,
    lda_classify,
    lda_fit,
    min_variance_weights,
    pooled_moments,
    rolling_backtest,
    sample_gaussian,
    synthetic_benchmark,
    synthetic_sigma0,
    zero_pattern_of,
)
from wshrink.evaluation import TuningGrid, sample_moments, stein_loss

from conftest import random_spd


class TestSyntheticGroundTruth:
    def test_identity_injection(self):
        spec = SyntheticSpec(dim=3, density=0.5, n_samples=10)
        sigma0 = synthetic_sigma0(spec, C=np.eye(3))
        assert_allclose(sigma0, np.eye(3) / 1.001, rtol=1e-12)

    def test_single_nonzero_rank_one_correction(self):
        spec = SyntheticSpec(dim=3, density=1.0 / 9.0, n_samples=10, seed=4)
        C = np.zeros((3, 3))
        C[1, 2] = -1.0
        sigma0 = synthetic_sigma0(spec, C=C)
        # (1e-3 I + e2 e2')^{-1}: 1e3 on the off-cell axes, 1/1.001 on e2
        expected = np.diag([1e3, 1e3, 1.0 / 1.001])
        assert_allclose(sigma0, expected, rtol=1e-10)

    def test_spectrum_lower_bound(self):
        spec = SyntheticSpec(dim=8, density=0.5, n_samples=10, seed=1)
        sigma0 = synthetic_sigma0(spec)
        rng = np.random.default_rng(1)
        k = int(0.5 * 64)
        cells = rng.choice(64, size=k, replace=False)
        signs = rng.integers(0, 2, size=k) * 2.0 - 1.0
        C = np.zeros((8, 8))
        C.flat[cells] = signs
        bound = 1.0 / (np.linalg.eigvalsh(C.T @ C)[-1] + 1e-3)
        assert np.linalg.eigvalsh(sigma0)[0] >= bound * (1.0 - 1e-10)

    def test_deterministic_given_seed(self):
        spec = SyntheticSpec(dim=6, density=0.4, n_samples=10, seed=42)
        assert_allclose(synthetic_sigma0(spec), synthetic_sigma0(spec), rtol=0)

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="density"):
            SyntheticSpec(dim=5, density=0.0, n_samples=10)
        with pytest.raises(ValueError, match="floor"):
            SyntheticSpec(dim=2, density=0.1, n_samples=10)


class TestSampling:
    def test_zero_covariance_gives_zero_samples(self):
        X = sample_gaussian(np.zeros((3, 3)), 7, 0)
        assert np.abs(X).max() == 0.0

    def test_deterministic_given_seed(self):
        S = np.diag([1.0, 2.0])
        assert_allclose(sample_gaussian(S, 5, 3), sample_gaussian(S, 5, 3), rtol=0)

    def test_law_of_large_numbers(self):
        X = sample_gaussian(np.eye(2), 100_000, 0)
        emp = sample_moments(X).covariance
        assert np.linalg.norm(emp - np.eye(2)) / np.linalg.norm(np.eye(2)) <= 0.05

    def test_rank_deficient_covariance_supported(self, rng):
        S = np.diag([1.0, 0.0, 2.0])
        X = sample_gaussian(S, 1000, 5)
        assert np.abs(X[:, 1]).max() <= 1e-12


class TestZeroPatterns:
    def test_detects_true_zeros(self):
        M = np.array([[2.0, 0.0, 0.5], [0.0, 3.0, 0.0], [0.5, 0.0, 1.0]])
        pat = zero_pattern_of(M)
        assert pat.pairs == frozenset({(0, 1), (1, 0), (1, 2), (2, 1)})

    def test_known_fraction_subsets(self):
        M = np.eye(6)
        full = zero_pattern_of(M)  # all 15 off-diagonal pairs
        half = known_zero_pattern(full, 0.5, seed=0)
        assert len(half) == 2 * round(0.5 * 15)
        assert half.pairs <= full.pairs
        again = known_zero_pattern(full, 0.5, seed=0)
        assert half.pairs == again.pairs
        assert known_zero_pattern(full, 1.0, seed=0).pairs == full.pairs
        assert len(known_zero_pattern(full, 0.0, seed=0)) == 0


class TestLda:
    def test_dataset_validation(self):
        with pytest.raises(ValueError, match="2 samples"):
            LabeledDataset(np.zeros((3, 2)), np.array([0, 0, 1]))
        with pytest.raises(ValueError, match="2 classes"):
            LabeledDataset(np.zeros((4, 2)), np.array([1, 1, 1, 1]))

    def test_class_means_recovered(self, rng):
        mu0, mu1 = np.array([0.0, 0.0]), np.array([5.0, -1.0])
        X = np.vstack([mu0 + 1e-3 * rng.standard_normal((4, 2)),
                       mu1 + 1e-3 * rng.standard_normal((4, 2))])
        y = np.array([0] * 4 + [1] * 4)
        model = lda_fit(LabeledDataset(X, y), lambda m: np.eye(2))
        assert np.abs(model.means[0] - mu0).max() <= 5e-3
        assert np.abs(model.means[1] - mu1).max() <= 5e-3

    def test_pooled_covariance_hand_example(self):
        X = np.array([[0.0], [2.0], [10.0], [14.0]])
        y = np.array([0, 0, 1, 1])
        m = pooled_moments(LabeledDataset(X, y))
        # residuals (-1, 1, -2, 2), divisor n - classes = 2
        assert m.divisor == 2.0
        assert_allclose(m.covariance, [[(1.0 + 1.0 + 4.0 + 4.0) / 2.0]])

    def test_identity_precision_reduces_to_nearest_mean(self, rng):
        X = np.vstack([np.zeros((3, 2)), np.ones((3, 2)) * 4.0]) + 0.01 * rng.standard_normal((6, 2))
        y = np.array(["a"] * 3 + ["b"] * 3)
        model = lda_fit(LabeledDataset(X, y), lambda m: np.eye(2))
        assert lda_classify(model, np.array([0.1, -0.2])) == "a"
        assert lda_classify(model, np.array([3.9, 4.2])) == "b"

    def test_exact_mean_classified_to_its_class(self, rng):
        X = rng.standard_normal((8, 3))
        y = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        model = lda_fit(LabeledDataset(X, y), lambda m: np.eye(3))
        assert lda_classify(model, model.means[0]) == 0
        assert lda_classify(model, model.means[1]) == 1

    def test_anisotropic_precision_flips_euclidean_decision(self):
        means = np.array([[0.0, 0.0], [4.0, 1.0]])
        X = np.vstack([means[0] + [[0.1, 0], [-0.1, 0]], means[1] + [[0.1, 0], [-0.1, 0]]])
        y = np.array([0, 0, 1, 1])
        z = np.array([2.5, 0.2])  # Euclidean-closer to class 1, vertically closer to class 0
        iso = lda_fit(LabeledDataset(X, y), lambda m: np.eye(2))
        aniso = lda_fit(LabeledDataset(X, y), lambda m: np.diag([0.01, 100.0]))
        assert lda_classify(iso, z) == 1
        assert lda_classify(aniso, z) == 0

    def test_batch_classification(self, rng):
        X = np.vstack([np.zeros((2, 2)), np.ones((2, 2))]) + 0.01 * rng.standard_normal((4, 2))
        y = np.array([0, 0, 1, 1])
        model = lda_fit(LabeledDataset(X, y), lambda m: np.eye(2))
        labels = lda_classify(model, np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert labels.tolist() == [0, 1]

    def test_pooled_covariance_unbiased_on_simulation(self, rng):
        sigma0 = random_spd(2, rng)
        mus = np.array([[0.0, 0.0], [3.0, -2.0]])
        factor = np.linalg.cholesky(sigma0)
        total = np.zeros((2, 2))
        trials = 10_000
        for _ in range(trials):
            z = rng.standard_normal((8, 2)) @ factor.T
            X = z + np.repeat(mus, 4, axis=0)
            y = np.repeat([0, 1], 4)
            total += pooled_moments(LabeledDataset(X, y)).covariance
        avg = total / trials
        assert np.linalg.norm(avg - sigma0) / np.linalg.norm(sigma0) <= 0.03


class TestPortfolio:
    def test_identity_gives_equal_weights(self):
        assert_allclose(min_variance_weights(np.eye(4)), np.full(4, 0.25))

    def test_diagonal_example(self):
        assert_allclose(min_variance_weights(np.diag([4.0, 1.0])), [0.8, 0.2])

    def test_weights_sum_to_one_exactly(self, rng):
        w = min_variance_weights(random_spd(6, rng))
        assert w.sum() == 1.0

    def test_minimum_variance_optimality(self, rng):
        X = random_spd(5, rng)
        S = np.linalg.inv(X)
        w = min_variance_weights(X)
        base = w @ S @ w
        for _ in range(100):
            v = rng.standard_normal(5)
            v /= v.sum()
            assert base <= v @ S @ v + 1e-12

    def test_near_zero_denominator_rejected(self):
        X = np.array([[1.0, -1.0], [-1.0, 1.0]]) + 1e-14 * np.eye(2)
        with pytest.raises(ValueError, match="zero"):
            min_variance_weights(X)

    def test_constant_returns_flagged(self):
        R = np.ones((20, 3)) * 0.02
        result = rolling_backtest(R, lambda m: np.eye(3), BacktestConfig(window=10, stride=2))
        assert result.std <= 1e-12
        assert np.isnan(result.sharpe)

    def test_single_estimation_matches_direct(self, rng):
        R = rng.standard_normal((30, 3)) * 0.01
        cfg = BacktestConfig(window=20, stride=10)
        result = rolling_backtest(R, lambda m: np.linalg.inv(m.covariance), cfg)
        assert result.n_estimations == 1
        m = sample_moments(R[:20], divisor=19.0)
        w = min_variance_weights(np.linalg.inv(m.covariance))
        series = R[20:] @ w
        assert_allclose(result.mean, series.mean(), rtol=1e-12)
        assert_allclose(result.std, series.std(ddof=1), rtol=1e-12)

    def test_identity_stub_equals_equal_weight(self, rng):
        R = rng.standard_normal((40, 4)) * 0.02
        result = rolling_backtest(R, lambda m: np.eye(4), BacktestConfig(window=12, stride=3))
        series = R[12:] @ np.full(4, 0.25)
        assert_allclose(result.mean, series.mean(), rtol=1e-12)
        assert_allclose(result.std, series.std(ddof=1), rtol=1e-12)

    def test_estimator_failure_reports_window(self):
        R = np.random.default_rng(0).standard_normal((30, 3))

        def broken(moments):
            raise ValueError("nope")

        with pytest.raises(RuntimeError, match="window starting at row 0"):
            rolling_backtest(R, broken, BacktestConfig(window=25, stride=5))


class TestBenchmark:
    def test_single_trial_single_point_matches_direct_loss(self):
        spec = SyntheticSpec(dim=4, density=0.5, n_samples=12, trials=1, seed=9)
        grid = TuningGrid("rho", [0.5])
        result = synthetic_benchmark(spec, {"w": analytical_estimator}, {"w": grid})
        sigma0 = synthetic_sigma0(spec)
        data = sample_gaussian(sigma0, 12, spec.seed + 1)
        expected = stein_loss(analytical_estimator(sample_moments(data), 0.5), sigma0)
        assert_allclose(result.losses["w"][0, 0], expected, rtol=1e-12)

    def test_bit_identical_reruns(self):
        spec = SyntheticSpec(dim=4, density=0.5, n_samples=10, trials=3, seed=2)
        grid = TuningGrid("rho", np.geomspace(0.1, 1.0, 4))
        a = synthetic_benchmark(spec, {"w": analytical_estimator}, {"w": grid})
        b = synthetic_benchmark(spec, {"w": analytical_estimator}, {"w": grid})
        assert (a.losses["w"] == b.losses["w"]).all()

    def test_large_sample_small_radius_consistency(self):
        spec = SyntheticSpec(dim=5, density=0.5, n_samples=10_000, trials=1, seed=3)
        grid = TuningGrid("rho", [1e-3])
        result = synthetic_benchmark(spec, {"w": analytical_estimator}, {"w": grid})
        assert result.losses["w"][0, 0] <= 0.1

    def test_summary_quantiles_recomputable(self):
        spec = SyntheticSpec(dim=3, density=0.5, n_samples=8, trials=10, seed=5)
        grid = TuningGrid("rho", np.geomspace(0.1, 1.0, 3))
        result = synthetic_benchmark(spec, {"w": analytical_estimator}, {"w": grid})
        rows = list(result.long_rows())
        assert len(rows) == 10 * 3
        table = np.array([loss for *_, loss in rows]).reshape(10, 3)
        s = result.summary("w")
        assert_allclose(s["q20"], np.quantile(table, 0.2, axis=0), rtol=1e-12)
        assert_allclose(s["q80"], np.quantile(table, 0.8, axis=0), rtol=1e-12)
        assert_allclose(s["mean"], table.mean(axis=0), rtol=1e-12)
