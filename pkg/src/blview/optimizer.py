"""Long-only mean-variance optimization on the simplex.

Solves min_w  w' Sigma w - lambda * mu' w  subject to sum(w) = 1, w >= 0
with a deterministic active-set method (equality-constrained solves plus
NNLS-style ratio steps). Every solution is certified against the KKT
conditions; non-convergence raises with the final residuals attached.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bl_core import CovarianceMatrix, sample_covariance
from .errors import InputError, InsufficientDataError, OptimizationError
from .marketdata import ReturnSeries

DEFAULT_LAMBDA = 0.1
KKT_TOLERANCE = 1e-6
ITERATION_BUDGET = 10_000

# Weights below this are snapped to exactly zero on output.
WEIGHT_SNAP = 1e-12


@dataclass(frozen=True)
class PortfolioWeights:
    """A long-only simplex weight vector with an as-of date."""

    as_of: dt.date
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size == 0:
            raise InputError("weights must be a nonempty vector")
        if np.min(w) < -1e-10:
            raise InputError(f"negative weight {np.min(w):.3e} below tolerance")
        if abs(w.sum() - 1.0) > 1e-8:
            raise InputError(f"weights sum to {w.sum():.12f}, not 1")


@dataclass(frozen=True)
class MVOProblem:
    mu: np.ndarray
    sigma: CovarianceMatrix
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if mu.shape != (self.sigma.n,):
            raise InputError("mu dimension disagrees with sigma")
        if not np.isfinite(mu).all():
            raise InputError("mu must be finite")
        if self.lam < 0:
            raise InputError("lambda must be non-negative")


@dataclass(frozen=True)
class KKTReport:
    """Certificate residuals for a candidate simplex QP solution."""

    nu: float  # equality multiplier, = gradient on the active set
    stationarity: float  # spread of gradient entries across active assets
    dual_violation: float  # max(0, nu - gradient) over inactive assets
    sum_gap: float  # |1'w - 1|
    min_weight: float

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.dual_violation, self.sum_gap)


def kkt_report(problem: MVOProblem, w: np.ndarray) -> KKTReport:
    """Evaluate the KKT certificate of w for the given problem."""
    w = np.asarray(w, dtype=float)
    gradient = 2.0 * problem.sigma.sigma @ w - problem.lam * problem.mu
    active = w > 0
    if not active.any():
        raise InputError("no active assets in candidate weights")
    nu = float(gradient[active].min())
    stationarity = float(gradient[active].max() - nu)
    inactive = ~active
    dual_violation = (
        float(max(0.0, nu - gradient[inactive].min())) if inactive.any() else 0.0
    )
    return KKTReport(
        nu=nu,
        stationarity=stationarity,
        dual_violation=dual_violation,
        sum_gap=float(abs(w.sum() - 1.0)),
        min_weight=float(w.min()),
    )


def _restricted_solve(sigma: np.ndarray, lam_mu: np.ndarray, free: np.ndarray):
    """Minimize over the free coordinates with the sum-to-one constraint.

    Returns (z, nu) where z holds zeros on the clamped coordinates.
    """
    idx = np.flatnonzero(free)
    m = idx.size
    system = np.zeros((m + 1, m + 1))
    system[:m, :m] = 2.0 * sigma[np.ix_(idx, idx)]
    system[:m, m] = -1.0
    system[m, :m] = 1.0
    rhs = np.append(lam_mu[idx], 1.0)
    solution = np.linalg.solve(system, rhs)
    z = np.zeros(sigma.shape[0])
    z[idx] = solution[:m]
    return z, float(solution[m])


def solve_mvo(problem: MVOProblem, as_of: dt.date | None = None) -> PortfolioWeights:
    """Deterministic active-set solve of the long-only simplex QP.

    Starts from equal weights, so symmetric inputs yield symmetric outputs.
    Raises OptimizationError with the final KKT residuals if the iteration
    budget is exhausted before the certificate holds.
    """
    sigma = problem.sigma.sigma
    n = sigma.shape[0]
    lam_mu = problem.lam * problem.mu
    scale = max(1.0, float(np.abs(2.0 * sigma).max()), float(np.abs(lam_mu).max()))
    feas_tol = 1e-13 * scale
    dual_tol = 1e-13 * scale

    w = np.full(n, 1.0 / n)
    free = np.ones(n, dtype=bool)
    last_report = None
    try:
        for _ in range(ITERATION_BUDGET):
            z, nu = _restricted_solve(sigma, lam_mu, free)
            if z[free].min() >= -feas_tol:
                w = np.maximum(z, 0.0)
                gradient = 2.0 * sigma @ w - lam_mu
                clamped = ~free
                if not clamped.any() or gradient[clamped].min() >= nu - dual_tol:
                    break
                entering = np.flatnonzero(clamped)[np.argmin(gradient[clamped])]
                free[entering] = True
            else:
                blocking = free & (z < -feas_tol)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(blocking, w / (w - z), np.inf)
                alpha = float(np.min(ratios))
                w = w + min(max(alpha, 0.0), 1.0) * (z - w)
                w[w < feas_tol] = 0.0
                free &= w > 0.0
                if not free.any():
                    raise OptimizationError("active set emptied; problem degenerate")
        else:
            last_report = kkt_report(problem, np.maximum(w, 0.0))
            raise OptimizationError(
                f"no KKT point within {ITERATION_BUDGET} iterations "
                f"(max residual {last_report.max_residual:.3e})",
                residuals=last_report,
            )
    except np.linalg.LinAlgError as exc:
        raise OptimizationError(f"restricted system solve failed: {exc}")

    w[w < WEIGHT_SNAP] = 0.0
    report = kkt_report(problem, w)
    if report.max_residual > KKT_TOLERANCE:
        raise OptimizationError(
            f"KKT residual {report.max_residual:.3e} exceeds {KKT_TOLERANCE:.0e}",
            residuals=report,
        )
    return PortfolioWeights(as_of=as_of or dt.date(1970, 1, 1), w=w)


def equal_weight(n: int, as_of: dt.date) -> PortfolioWeights:
    """The 1/n portfolio."""
    if n < 1:
        raise InputError("need at least one asset for equal weighting")
    return PortfolioWeights(as_of=as_of, w=np.full(n, 1.0 / n))


def mvo_baseline_inputs(
    lookback_returns: Sequence[ReturnSeries], lam: float = DEFAULT_LAMBDA
) -> MVOProblem:
    """Historical-estimate inputs: mean returns and conditioned sample covariance."""
    if not lookback_returns:
        raise InsufficientDataError("no return series supplied")
    axis = lookback_returns[0].dates
    if any(series.dates != axis for series in lookback_returns):
        raise InputError("all lookback series must share one window")
    if len(axis) < 2:
        raise InsufficientDataError(
            f"need >= 2 observations for a covariance, got {len(axis)}"
        )
    block = np.vstack([series.values for series in lookback_returns])
    return MVOProblem(mu=block.mean(axis=1), sigma=sample_covariance(block), lam=lam)
