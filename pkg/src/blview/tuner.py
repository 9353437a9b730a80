"""Heuristic tau estimation and grid-search selection.

tau_init averages, over validation rebalance periods, the ratio of the mean
of all Omega entries to the mean of all Sigma entries. The grid search then
backtests the five multiples {0.5, 0.75, 1.0, 1.25, 1.5} x tau_init on the
validation span with identical cached view samples and keeps the candidate
with the highest net daily Sharpe (ties go to the smaller tau).
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backtest import BacktestConfig, performance, run_backtest, with_tau
from .bl_core import CovarianceMatrix, sample_covariance
from .errors import DegenerateInputError, EngineError, InputError, TuningError
from .marketdata import PriceTable
from .views import ViewSamples, aggregate

TAU_MULTIPLIERS = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class TauGrid:
    tau_init: float
    candidates: tuple[float, ...]
    sharpe_per_candidate: dict[float, float]  # NaN marks a failed candidate
    tau_star: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.candidates, self.candidates[1:])):
            raise InputError("tau candidates must be strictly increasing")
        if self.tau_star not in self.candidates:
            raise InputError("tau_star must be one of the candidates")


def tau_init(
    per_period: Sequence[tuple[np.ndarray, CovarianceMatrix]],
    diagonal_only: bool = False,
) -> float:
    """Average over periods of mean(Omega_t) / mean(Sigma_t).

    mean(.) is the mean of all n x n entries, zeros included; diagonal_only
    restricts the Omega mean to its diagonal.
    """
    if not per_period:
        raise InputError("tau_init needs at least one validation period")
    ratios = []
    for omega, sigma in per_period:
        omega = np.asarray(omega, dtype=float)
        sigma_mean = float(np.mean(sigma.sigma))
        if sigma_mean == 0.0:
            raise DegenerateInputError("mean of Sigma is zero in a validation period")
        omega_mean = float(np.mean(np.diag(omega)) if diagonal_only else np.mean(omega))
        ratios.append(omega_mean / sigma_mean)
    return float(np.mean(ratios))


@dataclass(frozen=True)
class ValidationInputs:
    """Everything a candidate backtest needs on the validation span."""

    config: BacktestConfig  # strategy BLM; tau is overwritten per candidate
    data: PriceTable
    views: Mapping[dt.date, ViewSamples]
    market_caps: np.ndarray | None = None


def grid_search(tau_init_value: float, validation: ValidationInputs) -> TauGrid:
    """Backtest the five tau candidates and keep the best validation Sharpe.

    Every candidate re-uses the identical cached view samples; no re-querying
    happens here. Candidates whose backtest fails are recorded as NaN; if all
    of them fail a TuningError is raised.
    """
    if not (tau_init_value > 0 and math.isfinite(tau_init_value)):
        raise InputError("tau_init must be a positive finite scalar")
    if len(validation.config.schedule.rebalance_dates) < 2:
        raise InputError("validation span must support >= 2 rebalances")
    candidates = tuple(m * tau_init_value for m in TAU_MULTIPLIERS)
    sharpes: dict[float, float] = {}
    failures: list[str] = []
    for tau in candidates:
        try:
            ledger = run_backtest(
                with_tau(validation.config, tau),
                validation.data,
                views=validation.views,
                market_caps=validation.market_caps,
            )
            sharpes[tau] = performance(ledger.net_series(), validation.config).sharpe_daily
        except EngineError as exc:
            sharpes[tau] = float("nan")
            failures.append(f"tau={tau!r}: {exc}")
    if all(math.isnan(s) for s in sharpes.values()):
        raise TuningError("every candidate backtest failed: " + "; ".join(failures))

    tau_star = None
    best = -math.inf
    for tau in candidates:  # increasing order; strict > keeps ties at smaller tau
        s = sharpes[tau]
        if not math.isnan(s) and s > best:
            best = s
            tau_star = tau
    return TauGrid(
        tau_init=tau_init_value,
        candidates=candidates,
        sharpe_per_candidate=sharpes,
        tau_star=tau_star,
    )


def collect_tau_inputs(
    data: PriceTable,
    config: BacktestConfig,
    views: Mapping[dt.date, ViewSamples],
) -> list[tuple[np.ndarray, CovarianceMatrix]]:
    """Per validation rebalance date, the (Omega_t, Sigma_t) pair feeding tau_init."""
    ret_dates, rets = data.asset_return_matrix()
    out = []
    for as_of in config.schedule.rebalance_dates:
        samples = views.get(as_of)
        if samples is None:
            raise InputError(f"no view samples for validation date {as_of.isoformat()}")
        pos = ret_dates.index(as_of)
        block = rets[:, pos - config.schedule.lookback_days + 1 : pos + 1]
        out.append((aggregate(samples).omega, sample_covariance(block)))
    return out


def run_tuning(
    data: PriceTable,
    config: BacktestConfig,
    views: Mapping[dt.date, ViewSamples],
    market_caps=None,
    diagonal_only: bool = False,
) -> TauGrid:
    """tau_init from validation uncertainty ratios, then the 5-point grid search."""
    initial = tau_init(collect_tau_inputs(data, config, views), diagonal_only)
    return grid_search(
        initial,
        ValidationInputs(config=config, data=data, views=views, market_caps=market_caps),
    )
