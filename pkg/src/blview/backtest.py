"""Rebalance-loop backtesting with turnover costs, plus the metric suite.

Within a holding period the portfolio earns w . r_t with the rebalance-date
weights; drifted weights matter only as the base for the next period's
turnover cost. The period cost is applied multiplicatively on the first
holding day, so compounding net returns equals compounding gross returns
times prod(1 - cost_p) exactly.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .bl_core import BLInputs, implied_equilibrium, posterior, sample_covariance
from .errors import (
    DegenerateInputError,
    EngineError,
    InputError,
    InsufficientDataError,
    NumericalError,
)
from .marketdata import PriceTable, RebalanceSchedule, ReturnSeries
from .optimizer import DEFAULT_LAMBDA, MVOProblem, PortfolioWeights, equal_weight, solve_mvo
from .views import ViewProvider, ViewSamples, ViewSet, aggregate, build_contexts, provide_views

STRATEGIES = ("EW", "MVO", "BLM")

DEFAULT_COST_RATE = 0.001
DEFAULT_ANNUALIZATION_DAYS = 252
DEFAULT_VAR_LEVEL = 0.95


@dataclass(frozen=True)
class BacktestConfig:
    schedule: RebalanceSchedule
    strategy: str = "EW"
    cost_rate: float = DEFAULT_COST_RATE
    lam: float = DEFAULT_LAMBDA
    tau: float = 1.0
    delta: float = 2.5
    n_samples: int = 100
    max_retries: int = 2
    annualization_days: int = DEFAULT_ANNUALIZATION_DAYS
    var_level: float = DEFAULT_VAR_LEVEL

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InputError(f"strategy must be one of {STRATEGIES}")
        if self.cost_rate < 0:
            raise InputError("cost_rate must be >= 0")
        if not 0.0 < self.var_level < 1.0:
            raise InputError("var_level must lie in (0, 1)")
        if self.annualization_days <= 0:
            raise InputError("annualization_days must be positive")


@dataclass(frozen=True)
class PeriodRecord:
    """One holding period: weights applied, returns earned, cost charged."""

    rebalance_date: dt.date
    dates: tuple[dt.date, ...]
    gross: np.ndarray
    net: np.ndarray
    cost: float
    weights: PortfolioWeights
    realized_mean_daily: np.ndarray  # per asset, over this period
    views: ViewSet | None = None
    forecast: np.ndarray | None = None  # per-asset expected daily return used
    prior: np.ndarray | None = None
    posterior_mu: np.ndarray | None = None

    def __post_init__(self):
        gross = np.asarray(self.gross, dtype=float)
        net = np.asarray(self.net, dtype=float)
        object.__setattr__(self, "gross", gross)
        object.__setattr__(self, "net", net)
        if len(self.dates) != len(gross) or len(gross) != len(net):
            raise InputError("period date/return lengths disagree")
        if len(gross) == 0:
            raise InputError("a holding period must cover >= 1 day")
        expected_first = (1.0 + gross[0]) * (1.0 - self.cost) - 1.0
        if abs(net[0] - expected_first) > 1e-12 or not np.allclose(
            net[1:], gross[1:], atol=0.0, rtol=0.0
        ):
            raise InputError("net returns do not reflect the period cost")


@dataclass(frozen=True)
class BacktestLedger:
    strategy: str
    tickers: tuple[str, ...]
    periods: tuple[PeriodRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))
        all_dates = [d for p in self.periods for d in p.dates]
        if any(b <= a for a, b in zip(all_dates, all_dates[1:])):
            raise InputError("period date axes overlap or are out of order")

    def gross_series(self) -> ReturnSeries:
        dates = [d for p in self.periods for d in p.dates]
        values = np.concatenate([p.gross for p in self.periods])
        return ReturnSeries(tuple(dates), values)

    def net_series(self) -> ReturnSeries:
        dates = [d for p in self.periods for d in p.dates]
        values = np.concatenate([p.net for p in self.periods])
        return ReturnSeries(tuple(dates), values)

    def forecast_pairs(self) -> list[tuple[float, float]]:
        """(forecast, realized) mean-daily-return pairs in percent units."""
        pairs = []
        for p in self.periods:
            if p.forecast is None:
                continue
            for f, r in zip(p.forecast, p.realized_mean_daily):
                pairs.append((100.0 * float(f), 100.0 * float(r)))
        return pairs


@dataclass(frozen=True)
class PerformanceReport:
    cagr: float
    mean_daily: float
    std_daily: float
    sharpe_daily: float
    mean_ann: float
    std_ann: float
    sharpe_ann: float
    mdd: float
    var95: float
    cvar95: float

    def __post_init__(self):
        if self.mdd > 0:
            raise InputError("maximum drawdown must be <= 0")
        if self.cvar95 > self.var95 + 1e-15:
            raise InputError("CVaR must not exceed VaR")

    def as_row(self) -> dict[str, float]:
        return {
            "cagr": self.cagr,
            "mean_daily": self.mean_daily,
            "std_daily": self.std_daily,
            "sharpe_daily": self.sharpe_daily,
            "mean_ann": self.mean_ann,
            "std_ann": self.std_ann,
            "sharpe_ann": self.sharpe_ann,
            "mdd": self.mdd,
            "var95": self.var95,
            "cvar95": self.cvar95,
        }


@dataclass(frozen=True)
class ForecastErrorReport:
    mse: float
    rmse: float
    mae: float

    def __post_init__(self):
        if min(self.mse, self.rmse, self.mae) < 0:
            raise InputError("error metrics must be non-negative")
        if abs(self.rmse - math.sqrt(self.mse)) > 1e-12:
            raise InputError("rmse must equal sqrt(mse)")


def turnover_cost(w_prev_drifted, w_new, cost_rate: float) -> float:
    """cost_rate times the L1 weight change against drifted holdings.

    The pre-rebalance vector may be all zeros (first period, full buy-in).
    """
    prev = np.asarray(w_prev_drifted, dtype=float)
    new = np.asarray(w_new, dtype=float)
    if prev.shape != new.shape:
        raise InputError("weight vectors must share a dimension")
    if cost_rate < 0:
        raise InputError("cost_rate must be >= 0")
    return float(cost_rate * np.abs(new - prev).sum())


def drift_weights(w, asset_returns_over_period) -> np.ndarray:
    """Buy-and-hold weights after each asset compounds its period returns."""
    w = np.asarray(w, dtype=float)
    rets = np.atleast_2d(np.asarray(asset_returns_over_period, dtype=float))
    if rets.shape[0] != w.shape[0]:
        raise InputError("return block rows must match the weight dimension")
    if np.min(rets) <= -1.0:
        raise InputError("asset returns must be > -1")
    growth = np.prod(1.0 + rets, axis=1)
    total = float(w @ growth)
    if total <= 0.0:
        raise DegenerateInputError("portfolio value collapsed to zero while drifting")
    return w * growth / total


def _empirical_quantile(values: np.ndarray, level: float) -> float:
    """Piecewise-linear inverse ECDF quantile (position level*n, 1-based)."""
    ordered = np.sort(values)
    position = level * ordered.size
    if abs(position - round(position)) < 1e-9:  # absorb float noise in the level
        position = round(position)
    if position <= 1.0:
        return float(ordered[0])
    if position >= ordered.size:
        return float(ordered[-1])
    lower = int(math.floor(position))
    frac = position - lower
    return float(ordered[lower - 1] + frac * (ordered[lower] - ordered[lower - 1]))


def performance(
    net: ReturnSeries,
    config: BacktestConfig | None = None,
    annualization_days: int = DEFAULT_ANNUALIZATION_DAYS,
    var_level: float = DEFAULT_VAR_LEVEL,
) -> PerformanceReport:
    """Metric suite over a net daily return series (rf = 0)."""
    if config is not None:
        annualization_days = config.annualization_days
        var_level = config.var_level
    values = net.values
    if values.size < 2:
        raise InsufficientDataError("need >= 2 return observations for metrics")
    wealth = np.cumprod(1.0 + values)
    cagr = float(wealth[-1] ** (annualization_days / values.size) - 1.0)
    mean_daily = float(values.mean())
    std_daily = float(values.std(ddof=1))
    if std_daily == 0.0 or np.all(values == values[0]):
        raise DegenerateInputError("zero return variance; Sharpe is undefined")
    sharpe_daily = mean_daily / std_daily
    root_days = math.sqrt(annualization_days)
    peak = np.maximum.accumulate(wealth)
    mdd = float(np.min(wealth / peak - 1.0))
    var = _empirical_quantile(values, 1.0 - var_level)
    tail = values[values <= var]
    cvar = float(tail.mean()) if tail.size else var
    return PerformanceReport(
        cagr=cagr,
        mean_daily=mean_daily,
        std_daily=std_daily,
        sharpe_daily=sharpe_daily,
        mean_ann=mean_daily * annualization_days,
        std_ann=std_daily * root_days,
        sharpe_ann=sharpe_daily * root_days,
        mdd=mdd,
        var95=var,
        cvar95=cvar,
    )


def forecast_errors(pairs: Sequence[tuple[float, float]]) -> ForecastErrorReport:
    """MSE/RMSE/MAE over (forecast, realized) pairs, percent units."""
    if not pairs:
        raise InputError("no forecast/realized pairs")
    arr = np.asarray(pairs, dtype=float)
    if not np.isfinite(arr).all():
        raise InputError("forecast pairs must be finite")
    diff = arr[:, 0] - arr[:, 1]
    mse = float(np.mean(diff**2))
    return ForecastErrorReport(mse=mse, rmse=math.sqrt(mse), mae=float(np.mean(np.abs(diff))))


def _finite_or_raise(name: str, values: np.ndarray):
    if not np.isfinite(values).all():
        raise NumericalError(f"{name} contains non-finite values")


def _weights_for_date(
    config: BacktestConfig,
    data: PriceTable,
    as_of: dt.date,
    lookback_block: np.ndarray,
    view_samples: ViewSamples | None,
    market_caps: np.ndarray,
):
    """Strategy dispatch; returns (weights, views, forecast, prior, posterior)."""
    n = data.n_assets
    if config.strategy == "EW":
        return equal_weight(n, as_of), None, None, None, None
    if config.strategy == "MVO":
        mu = lookback_block.mean(axis=1)
        _finite_or_raise("historical mean returns", mu)
        problem = MVOProblem(mu=mu, sigma=sample_covariance(lookback_block), lam=config.lam)
        return solve_mvo(problem, as_of), None, mu, None, None
    # BLM
    sigma = sample_covariance(lookback_block)
    prior = implied_equilibrium(market_caps, sigma, config.delta)
    if view_samples is None:
        raise InputError("BLM strategy needs view samples for every rebalance date")
    if view_samples.tickers != data.tickers:
        raise InputError(
            f"view samples at {as_of.isoformat()} cover {view_samples.tickers}, "
            f"expected {data.tickers}"
        )
    views = aggregate(view_samples)
    mu = posterior(BLInputs(prior=prior, sigma=sigma, tau=config.tau, views=views)).mu
    _finite_or_raise("posterior returns", mu)
    problem = MVOProblem(mu=mu, sigma=sigma, lam=config.lam)
    weights = solve_mvo(problem, as_of)
    return weights, views, views.q, prior.pi, mu


def run_backtest(
    config: BacktestConfig,
    data: PriceTable,
    provider: ViewProvider | None = None,
    views: Mapping[dt.date, ViewSamples] | None = None,
    market_caps=None,
) -> BacktestLedger:
    """Execute the rebalance loop for one strategy.

    BLM takes its forecast samples from `views` (pre-collected, e.g. from the
    cache) or, failing that, by querying `provider` at each rebalance date.
    `market_caps` default to equal caps when not supplied.
    """
    schedule = config.schedule
    ret_dates, rets = data.asset_return_matrix()
    n, total = rets.shape
    if market_caps is None:
        market_caps = np.ones(n)
    else:
        market_caps = np.asarray(market_caps, dtype=float)

    positions = []
    for d in schedule.rebalance_dates:
        try:
            positions.append(ret_dates.index(d))
        except ValueError:
            raise InputError(f"rebalance date {d.isoformat()} not in the return axis")

    periods: list[PeriodRecord] = []
    w_prev_drifted = np.zeros(n)
    for i, (as_of, pos) in enumerate(zip(schedule.rebalance_dates, positions)):
        try:
            start = pos - schedule.lookback_days + 1
            if start < 0:
                raise InsufficientDataError(
                    f"only {pos + 1} returns available before {as_of.isoformat()}, "
                    f"need {schedule.lookback_days}"
                )
            lookback_block = rets[:, start : pos + 1]

            view_samples = None
            if config.strategy == "BLM":
                if views is not None:
                    view_samples = views.get(as_of)
                    if view_samples is None:
                        raise InputError(f"no cached views for {as_of.isoformat()}")
                elif provider is not None:
                    contexts = build_contexts(data, as_of, schedule.lookback_days)
                    view_samples = provide_views(
                        provider, as_of, contexts, config.n_samples, config.max_retries
                    )
                else:
                    raise InputError("BLM strategy needs a provider or cached views")

            weights, viewset, forecast, prior_pi, mu = _weights_for_date(
                config, data, as_of, lookback_block, view_samples, market_caps
            )

            end = min(pos + schedule.holding_days, total - 1)
            if i + 1 < len(positions):
                end = min(end, positions[i + 1])
            if end <= pos:
                raise InsufficientDataError(
                    f"no holding days remain after {as_of.isoformat()}"
                )
            period_rets = rets[:, pos + 1 : end + 1]
            gross = weights.w @ period_rets
            _finite_or_raise("gross portfolio returns", gross)
            cost = turnover_cost(w_prev_drifted, weights.w, config.cost_rate)
            net = gross.copy()
            if cost != 0.0:
                net[0] = (1.0 + gross[0]) * (1.0 - cost) - 1.0
            periods.append(
                PeriodRecord(
                    rebalance_date=as_of,
                    dates=tuple(ret_dates[pos + 1 : end + 1]),
                    gross=gross,
                    net=net,
                    cost=cost,
                    weights=weights,
                    realized_mean_daily=period_rets.mean(axis=1),
                    views=viewset,
                    forecast=forecast,
                    prior=prior_pi,
                    posterior_mu=mu,
                )
            )
            w_prev_drifted = drift_weights(weights.w, period_rets)
        except EngineError as exc:
            exc.args = (f"{config.strategy} at {as_of.isoformat()}: {exc}",)
            raise
    return BacktestLedger(strategy=config.strategy, tickers=data.tickers, periods=tuple(periods))


def with_tau(config: BacktestConfig, tau: float) -> BacktestConfig:
    return replace(config, tau=tau)
