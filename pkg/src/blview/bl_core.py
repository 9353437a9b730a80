"""Equilibrium prior and the precision-weighted posterior return blend.

The posterior solves the stacked regression y = X mu + eps with
y = [pi; q], X = [I; P], V = blockdiag(tau*Sigma, Omega) by generalized least
squares, evaluated in precision form through SPD factorizations:

    mu = [(tau Sigma)^-1 + P' Omega^-1 P]^-1 [(tau Sigma)^-1 pi + P' Omega^-1 q]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InputError, NumericalError
from .views import ViewSet

DEFAULT_DELTA = 2.5

# Eigenvalue floor for conditioning, relative to the mean diagonal mass.
EIGENVALUE_FLOOR_RATIO = 1e-10


@dataclass(frozen=True)
class CovarianceMatrix:
    """A symmetric PSD daily covariance matrix (fraction^2 units)."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sigma)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise InputError("covariance matrix must be square")
        if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0.0):
            raise InputError("covariance matrix must be symmetric to 1e-12")
        if float(np.linalg.eigvalsh(sigma).min()) < -1e-10:
            raise InputError("covariance matrix is not positive semidefinite")

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class EquilibriumPrior:
    pi: np.ndarray
    market_weights: np.ndarray
    delta: float

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        w = np.asarray(self.market_weights, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "market_weights", w)
        if pi.shape != w.shape:
            raise InputError("pi and market weights must share a dimension")
        if not np.isfinite(pi).all():
            raise InputError("pi must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise InputError("market weights must lie on the simplex")


@dataclass(frozen=True)
class BLInputs:
    prior: EquilibriumPrior
    sigma: CovarianceMatrix
    tau: float
    views: ViewSet

    def __post_init__(self):
        n = self.sigma.n
        if self.prior.pi.shape != (n,):
            raise InputError("prior dimension disagrees with sigma")
        if self.views.k != n:
            raise InputError("view count must equal asset count (absolute views)")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise InputError("tau must be a positive finite scalar")


@dataclass(frozen=True)
class PosteriorReturns:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if not np.isfinite(mu).all():
            raise NumericalError("posterior returns are not finite")


def implied_equilibrium(
    market_caps, sigma: CovarianceMatrix, delta: float = DEFAULT_DELTA
) -> EquilibriumPrior:
    """CAPM reverse optimization: pi = delta * Sigma * w_mkt."""
    caps = np.asarray(market_caps, dtype=float)
    if caps.ndim != 1 or caps.shape[0] != sigma.n:
        raise InputError("market caps dimension disagrees with sigma")
    if np.any(caps <= 0) or not np.isfinite(caps).all():
        raise InputError("market caps must be positive and finite")
    weights = caps / caps.sum()
    pi = delta * sigma.sigma @ weights
    return EquilibriumPrior(pi=pi, market_weights=weights, delta=delta)


def condition_covariance(raw) -> CovarianceMatrix:
    """Symmetrize and floor eigenvalues so the result is PD and invertible.

    The floor is EIGENVALUE_FLOOR_RATIO * trace/n; a zero-trace input (e.g.
    constant returns) falls back to an absolute floor so the matrix stays
    invertible.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise InputError("covariance input must be a square matrix")
    if not np.isfinite(raw).all():
        raise InputError("covariance input must be finite")
    sym = 0.5 * (raw + raw.T)
    scale = float(np.trace(sym)) / sym.shape[0]
    floor = EIGENVALUE_FLOOR_RATIO * (scale if scale > 0 else 1.0)
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    if eigenvalues.min() >= floor:
        return CovarianceMatrix(sym)
    conditioned = (eigenvectors * np.maximum(eigenvalues, floor)) @ eigenvectors.T
    return CovarianceMatrix(0.5 * (conditioned + conditioned.T))


def sample_covariance(returns_matrix) -> CovarianceMatrix:
    """Conditioned unbiased sample covariance of an n_assets x T return block."""
    block = np.asarray(returns_matrix, dtype=float)
    if block.ndim != 2 or block.shape[1] < 2:
        raise InputError("need an n_assets x T block with T >= 2 observations")
    return condition_covariance(np.cov(block, ddof=1))


def posterior(inputs: BLInputs) -> PosteriorReturns:
    """GLS solution of the stacked prior/view system, via SPD factorizations."""
    sigma = inputs.sigma.sigma
    pi = inputs.prior.pi
    views = inputs.views
    tau_sigma = inputs.tau * sigma
    try:
        prior_factor = cho_factor(tau_sigma, lower=True)
        omega_factor = cho_factor(views.omega, lower=True)
        precision = cho_solve(prior_factor, np.eye(sigma.shape[0]))
        precision += views.P.T @ cho_solve(omega_factor, views.P)
        rhs = cho_solve(prior_factor, pi) + views.P.T @ cho_solve(omega_factor, views.q)
        mu = cho_solve(cho_factor(precision, lower=True), rhs)
    except LinAlgError as exc:
        raise NumericalError(
            f"posterior system is singular after conditioning: {exc}",
            condition=float(np.linalg.cond(tau_sigma)),
        )
    if not np.isfinite(mu).all():
        raise NumericalError(
            "posterior solve produced non-finite values",
            condition=float(np.linalg.cond(tau_sigma)),
        )
    return PosteriorReturns(mu=mu)
