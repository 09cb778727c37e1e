"""Optimizer: initialization, monotone ascent, determinism, recovery."""

import numpy as np
import pytest

from contrareg import (Dataset, DegenerateData, FitConfig, GenConfig,
                       ShapeMismatch, build_workspace, fit, generate,
                       initialize, r_squared)


def _params_equal(a, b):
    return (np.array_equal(a.S, b.S) and np.array_equal(a.W, b.W)
            and np.array_equal(a.beta, b.beta)
            and a.sigma2 == b.sigma2 and a.tau2 == b.tau2)


class TestInitialize:
    def test_same_seed_bit_identical(self, rng):
        data, _ = generate(GenConfig(n=20, m=20, p=5, d=2, seed=3))
        config = FitConfig(d=2, seed=11)
        assert _params_equal(initialize(data, config), initialize(data, config))

    def test_pca_warm_start_recovers_exact_subspace(self, rng):
        basis = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        scores = rng.standard_normal((40, 2))
        X = scores @ basis.T
        data = Dataset(X=X, r=rng.standard_normal(40), Y=np.zeros((0, 6)))
        params = initialize(data, FitConfig(d=2, init="pca_warm_start"))
        # largest principal angle between span(S) and span(basis), via its sine
        # (numerically exact for tiny angles, unlike arccos of the cosines)
        Qs = np.linalg.qr(params.S)[0]
        sin_theta = np.linalg.norm(Qs - basis @ (basis.T @ Qs), 2)
        assert sin_theta <= 1e-8

    def test_zero_response_floors_tau2(self, rng):
        data = Dataset(X=rng.standard_normal((10, 3)), r=np.zeros(10),
                       Y=rng.standard_normal((5, 3)))
        params = initialize(data, FitConfig(d=1))
        assert params.tau2 == 1e-6

    def test_no_foreground_rejected(self, rng):
        data = Dataset(X=np.zeros((0, 3)), r=np.zeros(0),
                       Y=rng.standard_normal((5, 3)))
        with pytest.raises(DegenerateData):
            initialize(data, FitConfig(d=1))

    def test_constant_columns_rejected(self):
        data = Dataset(X=np.ones((8, 3)), r=np.arange(8.0), Y=np.ones((8, 3)))
        with pytest.raises(DegenerateData):
            initialize(data, FitConfig(d=1))

    def test_d_larger_than_p_rejected(self, rng):
        data, _ = generate(GenConfig(n=10, m=10, p=3, d=1, seed=0))
        with pytest.raises(ShapeMismatch):
            initialize(data, FitConfig(d=4))


class TestFit:
    def test_line_search_trace_is_monotone(self):
        data, _ = generate(GenConfig(n=60, m=60, p=4, d=2, seed=5))
        result = fit(data, FitConfig(d=2, max_iter=200, restarts=0, seed=5))
        trace = np.asarray(result.ll_trace)
        assert np.all(np.diff(trace) >= -1e-12)

    def test_deterministic_bit_for_bit(self):
        data, _ = generate(GenConfig(n=40, m=40, p=4, d=2, seed=9))
        config = FitConfig(d=2, max_iter=150, restarts=1, seed=9)
        r1 = fit(data, config)
        r2 = fit(data, config)
        assert _params_equal(r1.params, r2.params)
        assert r1.ll_trace == r2.ll_trace
        assert r1.best_restart == r2.best_restart

    def test_restart_selection_dominates_single_start(self):
        data, _ = generate(GenConfig(n=40, m=40, p=4, d=2, seed=13))
        multi = fit(data, FitConfig(d=2, max_iter=150, restarts=3, seed=13))
        single = fit(data, FitConfig(d=2, max_iter=150, restarts=0, seed=13))
        assert multi.final_ll >= single.final_ll

    def test_alpha_zero_equals_empty_background(self):
        data, _ = generate(GenConfig(n=30, m=30, p=3, d=1, seed=21))
        no_bg = Dataset(X=data.X, r=data.r, Y=np.zeros((0, 3)))
        r_alpha = fit(data, FitConfig(d=1, alpha=0.0, max_iter=100, restarts=0, seed=21))
        r_empty = fit(no_bg, FitConfig(d=1, max_iter=100, restarts=0, seed=21))
        assert _params_equal(r_alpha.params, r_empty.params)
        assert r_alpha.final_ll == r_empty.final_ll

    def test_recovers_predictive_surface(self):
        # data from known params; R^2 of predictions against the true
        # noise-free response surface on a held-out set
        data, truth = generate(GenConfig(n=200, m=200, p=2, d=1, seed=7000))
        test, _ = generate(GenConfig(n=200, m=0, p=2, d=1, seed=57000, truth=truth))
        result = fit(data, FitConfig(d=1, tol=1e-4, restarts=1, seed=7000))
        pred, _ = result.predict(test.X)
        true_mean = test.X @ build_workspace(truth).pred_coef
        assert r_squared(pred, true_mean) >= 0.9

    def test_converged_gradient_norm_small_at_tight_tol(self):
        data, _ = generate(GenConfig(n=200, m=200, p=2, d=1, seed=31))
        result = fit(data, FitConfig(d=1, tol=1e-12, max_iter=50000,
                                     restarts=0, seed=31))
        assert result.converged
        assert result.grad_inf_norm <= 1e-2

    def test_adaptive_moment_matches_line_search_objective(self):
        data, _ = generate(GenConfig(n=100, m=100, p=3, d=1, seed=17))
        ls = fit(data, FitConfig(d=1, tol=1e-10, max_iter=20000, restarts=0, seed=17))
        am = fit(data, FitConfig(d=1, mode="adaptive_moment", tol=1e-9,
                                 max_iter=20000, restarts=0, seed=17))
        assert am.final_ll == pytest.approx(ls.final_ll, abs=1e-3)

    def test_predict_applies_centering(self):
        data, _ = generate(GenConfig(n=50, m=50, p=3, d=1, seed=2))
        result = fit(data, FitConfig(d=1, max_iter=100, restarts=0, seed=2))
        means, var = result.predict(result.center_x[None, :])
        assert means[0] == pytest.approx(result.center_r, abs=1e-12)
        assert var >= result.params.tau2

    def test_no_foreground_rejected(self, rng):
        data = Dataset(X=np.zeros((0, 3)), r=np.zeros(0),
                       Y=rng.standard_normal((5, 3)))
        with pytest.raises(DegenerateData):
            fit(data, FitConfig(d=1))

    def test_invalid_config_rejected(self):
        data, _ = generate(GenConfig(n=10, m=10, p=3, d=1, seed=0))
        with pytest.raises(ShapeMismatch):
            fit(data, FitConfig(d=1, tol=0.0))
        with pytest.raises(ShapeMismatch):
            fit(data, FitConfig(d=1, mode="newton"))
