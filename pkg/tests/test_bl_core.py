import numpy as np
import pytest

from blview.bl_core import (
    BLInputs,
    CovarianceMatrix,
    EquilibriumPrior,
    condition_covariance,
    implied_equilibrium,
    posterior,
    sample_covariance,
)
from blview.errors import InputError
from blview.views import ViewSet


def gls_oracle(pi, sigma, tau, P, q, omega):
    """Brute-force normal equations (X'V^-1X)^-1 X'V^-1 y of the stacked system."""
    n, k = len(pi), len(q)
    X = np.vstack([np.eye(n), P])
    y = np.concatenate([pi, q])
    V = np.zeros((n + k, n + k))
    V[:n, :n] = tau * sigma
    V[n:, n:] = omega
    V_inv = np.linalg.inv(V)
    return np.linalg.solve(X.T @ V_inv @ X, X.T @ V_inv @ y)


def random_instance(rng, n):
    A = rng.normal(0, 0.01, (n, 2 * n))
    sigma = A @ A.T + 1e-6 * np.eye(n)
    pi = rng.normal(0, 0.001, n)
    q = rng.normal(0, 0.002, n)
    omega = np.diag(rng.uniform(1e-6, 1e-3, n))
    tau = float(rng.uniform(0.01, 5.0))
    return pi, sigma, tau, q, omega


def make_inputs(pi, sigma, tau, q, omega, delta=2.5):
    n = len(pi)
    prior = EquilibriumPrior(pi=pi, market_weights=np.full(n, 1.0 / n), delta=delta)
    views = ViewSet(q=q, P=np.eye(n), omega=omega, k=n)
    return BLInputs(prior=prior, sigma=CovarianceMatrix(sigma), tau=tau, views=views)


class TestImpliedEquilibrium:
    def test_hand_matrix_vector_product(self):
        sigma = CovarianceMatrix(1e-4 * np.eye(2))
        prior = implied_equilibrium([5.0, 5.0], sigma, delta=2.5)
        assert prior.pi == pytest.approx([1.25e-4, 1.25e-4], rel=1e-12)
        assert prior.market_weights == pytest.approx([0.5, 0.5])

    def test_zero_delta_gives_zero_prior(self):
        sigma = CovarianceMatrix(1e-4 * np.eye(3))
        prior = implied_equilibrium([1.0, 2.0, 3.0], sigma, delta=0.0)
        assert np.all(prior.pi == 0.0)

    def test_cap_scaling_invariance(self):
        rng = np.random.default_rng(1)
        sigma = sample_covariance(rng.normal(0, 0.01, (4, 30)))
        caps = rng.uniform(1, 10, 4)
        base = implied_equilibrium(caps, sigma)
        doubled = implied_equilibrium(2 * caps, sigma)
        assert doubled.pi == pytest.approx(base.pi, rel=1e-14)

    def test_non_positive_cap_rejected(self):
        sigma = CovarianceMatrix(np.eye(2))
        with pytest.raises(InputError):
            implied_equilibrium([1.0, 0.0], sigma)


class TestPosterior:
    def test_scalar_equal_precision_average(self):
        inputs = make_inputs(
            pi=np.array([0.01]),
            sigma=np.array([[0.04]]),
            tau=1.0,
            q=np.array([0.02]),
            omega=np.array([[0.04]]),
        )
        assert posterior(inputs).mu == pytest.approx([0.015], rel=1e-12)

    def test_no_confidence_in_views_recovers_prior(self):
        rng = np.random.default_rng(2)
        pi, sigma, _, q, _ = random_instance(rng, 4)
        inputs = make_inputs(pi, sigma, 1.0, q, 1e12 * np.eye(4))
        mu = posterior(inputs).mu
        assert np.linalg.norm(mu - pi) / np.linalg.norm(pi) <= 1e-6

    def test_no_confidence_in_prior_recovers_views(self):
        rng = np.random.default_rng(3)
        pi, sigma, _, q, omega = random_instance(rng, 4)
        inputs = make_inputs(pi, sigma, 1e12, q, omega)
        mu = posterior(inputs).mu
        assert np.linalg.norm(mu - q) / np.linalg.norm(q) <= 1e-6

    def test_matches_brute_force_normal_equations(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(1, 7))
            pi, sigma, tau, q, omega = random_instance(rng, n)
            mu = posterior(make_inputs(pi, sigma, tau, q, omega)).mu
            oracle = gls_oracle(pi, sigma, tau, np.eye(n), q, omega)
            assert np.linalg.norm(mu - oracle) <= 1e-8 * max(1.0, np.linalg.norm(oracle))

    def test_blend_boundedness_diagonal_case(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = 5
            sigma = np.diag(rng.uniform(1e-5, 1e-3, n))
            omega = np.diag(rng.uniform(1e-6, 1e-3, n))
            pi = rng.normal(0, 0.002, n)
            q = rng.normal(0, 0.002, n)
            mu = posterior(make_inputs(pi, sigma, float(rng.uniform(0.1, 3)), q, omega)).mu
            lo = np.minimum(pi, q) - 1e-14
            hi = np.maximum(pi, q) + 1e-14
            assert np.all(mu >= lo) and np.all(mu <= hi)

    def test_tau_monotonicity_toward_views(self):
        rng = np.random.default_rng(6)
        n = 4
        sigma = np.diag(rng.uniform(1e-5, 1e-3, n))
        omega = np.diag(rng.uniform(1e-6, 1e-3, n))
        pi = rng.normal(0, 0.002, n)
        q = rng.normal(0, 0.002, n)
        taus = [0.1, 0.5, 1.0, 5.0, 50.0]
        gaps = [
            np.abs(posterior(make_inputs(pi, sigma, t, q, omega)).mu - q) for t in taus
        ]
        for earlier, later in zip(gaps, gaps[1:]):
            assert np.all(later <= earlier + 1e-15)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        n = 5
        pi, sigma, tau, q, omega = random_instance(rng, n)
        mu = posterior(make_inputs(pi, sigma, tau, q, omega)).mu
        perm = rng.permutation(n)
        mu_p = posterior(
            make_inputs(
                pi[perm],
                sigma[np.ix_(perm, perm)],
                tau,
                q[perm],
                np.diag(np.diag(omega)[perm]),
            )
        ).mu
        assert mu_p == pytest.approx(mu[perm], rel=1e-10)


class TestConditionCovariance:
    def test_psd_matrix_is_fixed_point(self):
        rng = np.random.default_rng(8)
        A = rng.normal(0, 0.01, (5, 20))
        psd = A @ A.T
        out = condition_covariance(psd).sigma
        assert np.abs(out - psd).max() <= 1e-12

    def test_rank_deficient_becomes_invertible(self):
        rng = np.random.default_rng(9)
        block = rng.normal(0, 0.01, (5, 3))  # 3 observations of 5 assets
        raw = np.cov(block, ddof=1)
        out = condition_covariance(raw).sigma
        assert np.linalg.eigvalsh(out).min() > 0.0

    def test_asymmetric_perturbation_is_symmetrized(self):
        base = np.diag([1e-4, 2e-4, 3e-4])
        noisy = base.copy()
        noisy[0, 1] = 1e-9
        out = condition_covariance(noisy).sigma
        assert np.array_equal(out, out.T)
        assert out[0, 1] == pytest.approx(5e-10)

    def test_zero_matrix_still_invertible(self):
        out = condition_covariance(np.zeros((3, 3))).sigma
        assert np.linalg.eigvalsh(out).min() > 0.0

    def test_non_square_rejected(self):
        with pytest.raises(InputError):
            condition_covariance(np.zeros((2, 3)))
