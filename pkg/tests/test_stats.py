import numpy as np
import pytest

from simknock.errors import DegenerateColumn, ValidationError
from simknock.knockoffs import (
    GaussianModel,
    construct_fixed_x,
    construct_model_x_gaussian,
    normalize_columns,
)
from simknock.stats import (
    Experiment,
    Family,
    StatisticKind,
    abs_coef_stats,
    abs_coef_stats_design,
    cross_validate_lambda,
    fold_ids,
    kkt_residual,
    lambda_grid,
    lasso_fit,
    path_entry_stats_design,
)


def standardized_column(n, rng):
    x = rng.standard_normal(n)
    x = x - x.mean()
    return x / x.std()


def soft(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0)


def knockoff_design(n, p, seed, beta=None, sigma=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p) if beta is None else np.asarray(beta, dtype=float)
    y = x @ beta + sigma * rng.standard_normal(n)
    kc = construct_fixed_x(x, seed)
    xn, _ = normalize_columns(x)
    return np.hstack([xn, kc.xtilde]), y


class TestLassoFit:
    def test_zero_response(self):
        x = np.random.default_rng(0).standard_normal((30, 4))
        fit = lasso_fit(x, np.zeros(30), lam=0.1)
        assert fit.converged and np.all(fit.coefficients == 0)

    def test_single_column_soft_threshold(self):
        rng = np.random.default_rng(1)
        n = 200
        x = standardized_column(n, rng)
        e = rng.standard_normal(n)
        e -= e.mean()
        e -= (e @ x) / (x @ x) * x
        y = 0.9 * x + e  # x'y / n = 0.9
        fit = lasso_fit(x[:, None], y, lam=0.4)
        assert fit.coefficients[0] == pytest.approx(0.5, abs=1e-6)

    def test_orthonormal_design(self):
        rng = np.random.default_rng(2)
        n, m = 100, 6
        # centred columns with unit 1/n variance: orthogonalise against the ones vector
        q, _ = np.linalg.qr(np.column_stack([np.ones(n), rng.standard_normal((n, m))]))
        x = q[:, 1:] * np.sqrt(n)
        y = rng.standard_normal(n) * 2
        lam = 0.15
        fit = lasso_fit(x, y, lam=lam)
        np.testing.assert_allclose(fit.coefficients, soft(x.T @ (y - y.mean()) / n, lam), atol=1e-6)

    def test_above_lambda_max(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 5))
        y = rng.standard_normal(50)
        xs = (x - x.mean(0)) / x.std(0)
        lam_max = np.max(np.abs(xs.T @ (y - y.mean()))) / 50
        fit = lasso_fit(x, y, lam=lam_max * 1.0001)
        assert np.all(fit.coefficients == 0)

    @pytest.mark.parametrize("seed", range(10))
    def test_kkt_random(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((80, 20))
        y = x[:, :3] @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(80)
        fit = lasso_fit(x, y, lam=0.05)
        assert fit.converged
        assert kkt_residual(x, y, fit) <= 1e-6

    def test_binomial(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((300, 5))
        y = (rng.uniform(size=300) < 1 / (1 + np.exp(-2 * x[:, 0]))).astype(float)
        fit = lasso_fit(x, y, "binomial", lam=0.02)
        assert fit.converged
        assert fit.coefficients[0] > 0.5
        assert np.argmax(np.abs(fit.coefficients)) == 0

    def test_binomial_requires_binary(self):
        with pytest.raises(ValidationError):
            lasso_fit(np.ones((3, 1)) * [[1], [2], [3]], np.array([0, 1, 2.0]), "binomial", 0.1)

    def test_degenerate_column(self):
        x = np.random.default_rng(0).standard_normal((20, 3))
        x[:, 2] = 1.0
        with pytest.raises(DegenerateColumn):
            lasso_fit(x, np.arange(20.0), lam=0.1)

    def test_bad_lambda(self):
        with pytest.raises(ValidationError):
            lasso_fit(np.eye(3), np.arange(3.0), lam=0.0)


class TestCrossValidation:
    def test_grid(self):
        g = lambda_grid(2.0)
        assert g.size == 100 and g[0] == 2.0
        assert g[-1] == pytest.approx(0.002)
        assert np.all(np.diff(g) < 0)

    def test_noise_prefers_large_lambda(self):
        hits = 0
        for rep in range(50):
            rng = np.random.default_rng(100 + rep)
            x = rng.standard_normal((100, 10))
            y = rng.standard_normal(100)
            lam = cross_validate_lambda(x, y, rng_seed=rep)
            xs = (x - x.mean(0)) / x.std(0)
            grid = lambda_grid(np.max(np.abs(xs.T @ (y - y.mean()))) / 100)
            hits += lam >= grid[49]
        assert hits >= 40

    def test_strong_signal_survives(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((100, 8))
        y = 5 * x[:, 0] + 0.1 * rng.standard_normal(100)
        lam = cross_validate_lambda(x, y, rng_seed=1)
        assert abs(lasso_fit(x, y, lam=lam).coefficients[0]) > 0

    def test_folds_exceed_rows(self):
        with pytest.raises(ValidationError):
            cross_validate_lambda(np.random.default_rng(0).standard_normal((4, 2)), np.arange(4.0), folds=5)

    def test_fold_ids_balanced_and_seeded(self):
        ids = fold_ids(23, 5, 9)
        assert np.array_equal(ids, fold_ids(23, 5, 9))
        counts = np.bincount(ids)
        assert counts.max() - counts.min() <= 1


class TestStatistics:
    def test_zero_response(self):
        design, _ = knockoff_design(60, 5, 0)
        zs = abs_coef_stats_design(design, np.zeros(60))
        assert np.all(zs.z == 0) and np.all(zs.ztilde == 0)
        pe = path_entry_stats_design(design, np.zeros(60))
        assert np.all(pe.z == 0) and np.all(pe.ztilde == 0)

    @pytest.mark.parametrize("j,seed", [(0, 1), (3, 2), (7, 3), (9, 4), (5, 5)])
    def test_swap_equivariance_abs_coef(self, j, seed):
        beta = np.zeros(10)
        beta[:3] = [1.0, -0.7, 0.5]
        design, y = knockoff_design(100, 10, seed, beta)
        a = abs_coef_stats_design(design, y, rng_seed=seed)
        swapped = design.copy()
        swapped[:, [j, j + 10]] = swapped[:, [j + 10, j]]
        b = abs_coef_stats_design(swapped, y, rng_seed=seed)
        za, zta = a.z.copy(), a.ztilde.copy()
        za[j], zta[j] = a.ztilde[j], a.z[j]
        np.testing.assert_allclose(b.z, za, atol=1e-6)
        np.testing.assert_allclose(b.ztilde, zta, atol=1e-6)

    @pytest.mark.parametrize("j,seed", [(0, 1), (2, 6), (4, 7)])
    def test_swap_equivariance_path_entry(self, j, seed):
        beta = np.zeros(6)
        beta[:2] = [1.0, -0.8]
        design, y = knockoff_design(60, 6, seed, beta)
        a = path_entry_stats_design(design, y)
        swapped = design.copy()
        swapped[:, [j, j + 6]] = swapped[:, [j + 6, j]]
        b = path_entry_stats_design(swapped, y)
        za, zta = a.z.copy(), a.ztilde.copy()
        za[j], zta[j] = a.ztilde[j], a.z[j]
        np.testing.assert_allclose(b.z, za, atol=1e-6)
        np.testing.assert_allclose(b.ztilde, zta, atol=1e-6)

    def test_column_order_independence(self):
        beta = np.zeros(8)
        beta[:3] = [1.0, 0.6, -0.9]
        design, y = knockoff_design(80, 8, 11, beta)
        a = abs_coef_stats_design(design, y, rng_seed=3)
        perm = np.random.default_rng(0).permutation(16)
        b = abs_coef_stats_design(design[:, perm], y, rng_seed=3)
        full_a = np.concatenate([a.z, a.ztilde])
        full_b = np.empty(16)
        full_b[perm] = np.concatenate([b.z, b.ztilde])
        np.testing.assert_allclose(full_b, full_a, atol=1e-6)

    def test_path_entry_orthonormal(self):
        rng = np.random.default_rng(12)
        n = 100
        q, _ = np.linalg.qr(np.column_stack([np.ones(n), rng.standard_normal((n, 4))]))
        x = q[:, 1:] * np.sqrt(n)
        y = 0.9 * x[:, 0]
        zs = path_entry_stats_design(x, y)
        grid = lambda_grid(0.9)
        # soft(0.9, lam) is nonzero exactly when lam < 0.9; the grid starts at 0.9
        assert zs.z[0] == pytest.approx(grid[grid < 0.9 - 1e-12][0], rel=1e-12)
        assert zs.statistic_kind is StatisticKind.PATH_ENTRY
        assert np.all(zs.z[1:] == 0) and np.all(zs.ztilde == 0)

    def test_planted_signal_beats_knockoff(self):
        wins = 0
        model = GaussianModel(np.zeros(10), np.eye(10))
        for rep in range(100):
            rng = np.random.default_rng(1000 + rep)
            x = rng.standard_normal((500, 10))
            y = 3 * x[:, 0] + rng.standard_normal(500)
            kc = construct_model_x_gaussian(x, model, rep)
            zs = abs_coef_stats(Experiment(y, x), kc, rng_seed=rep)
            wins += zs.z[0] > zs.ztilde[0]
            assert zs.statistic_kind is StatisticKind.ABS_COEF
        assert wins >= 95

    def test_experiment_validation(self):
        with pytest.raises(ValidationError):
            Experiment(np.zeros(3), np.zeros((4, 2)))
        with pytest.raises(ValidationError):
            Experiment(np.array([0, 1, 2.0]), np.zeros((3, 1)), Family.BINOMIAL)
