"""Shared helpers and independent dense-matrix oracles.

The oracles deliberately use explicit inverses and brute-force Gaussian
densities so they share no code path with the library implementation.
"""

import numpy as np
import pytest

from contrareg import Dataset, ModelParams


def random_params(rng, p, d, loading_scale=1.0):
    return ModelParams(
        S=loading_scale * rng.standard_normal((p, d)),
        W=loading_scale * rng.standard_normal((p, d)),
        beta=rng.standard_normal(d),
        sigma2=float(rng.uniform(0.3, 1.5)),
        tau2=float(rng.uniform(0.3, 1.5)),
    )


def random_dataset(rng, n, m, p):
    return Dataset(
        X=rng.standard_normal((n, p)),
        r=rng.standard_normal(n),
        Y=rng.standard_normal((m, p)),
    )


def dense_P(params):
    return params.S @ params.S.T + params.sigma2 * np.eye(params.p)


def dense_Q(params):
    return dense_P(params) + params.W @ params.W.T


def dense_A(params):
    P_inv = np.linalg.inv(dense_P(params))
    return np.linalg.inv(params.W.T @ P_inv @ params.W + np.eye(params.d))


def gaussian_logpdf(x, cov):
    """log N(x; 0, cov) via explicit dense inverse (oracle only)."""
    x = np.atleast_1d(np.asarray(x, float))
    k = x.size
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    return -0.5 * (k * np.log(2.0 * np.pi) + logdet
                   + float(x @ np.linalg.inv(cov) @ x))


def oracle_log_likelihood(params, data, alpha=1.0):
    """Brute-force joint-Gaussian density: sum of log N over all samples.

    r_i | x_i is Gaussian with mean b' x_i and variance s where
    b = Q^{-1} W beta and s = tau2 + beta' A beta; x ~ N(0, Q); y ~ N(0, P).
    """
    P, Q, A = dense_P(params), dense_Q(params), dense_A(params)
    beta = np.asarray(params.beta, float)
    W = np.asarray(params.W, float)
    b = np.linalg.inv(Q) @ W @ beta
    s = params.tau2 + float(beta @ A @ beta)
    total = 0.0
    for i in range(data.n):
        x = np.asarray(data.X, float)[i]
        total += gaussian_logpdf(x, Q)
        resid = float(data.r[i]) - float(b @ x)
        total += -0.5 * (np.log(2.0 * np.pi) + np.log(s) + resid ** 2 / s)
    for j in range(data.m):
        total += alpha * gaussian_logpdf(np.asarray(data.Y, float)[j], P)
    return total


def oracle_conditional(joint_cov, x, k_obs):
    """Exact Gaussian conditioning of the trailing block on the first k_obs."""
    joint_cov = np.asarray(joint_cov, float)
    S11 = joint_cov[:k_obs, :k_obs]
    S12 = joint_cov[:k_obs, k_obs:]
    S22 = joint_cov[k_obs:, k_obs:]
    G = S12.T @ np.linalg.inv(S11)
    return G @ x, S22 - G @ S12


def random_orthogonal(rng, d):
    Qm, Rm = np.linalg.qr(rng.standard_normal((d, d)))
    return Qm * np.sign(np.diag(Rm))


def assert_rel_close(a, b, rtol, atol=0.0):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    np.testing.assert_allclose(a, b, rtol=rtol, atol=atol)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
