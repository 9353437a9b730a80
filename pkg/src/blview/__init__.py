"""Forecast-driven Black-Litterman portfolio engine.

Pipeline: ingest aligned daily prices, collect repeated per-asset return
forecasts (from a chat-completions endpoint or synthetic providers), turn
them into Black-Litterman view inputs, blend with the CAPM equilibrium prior,
optimize long-only mean-variance weights, and backtest with turnover costs.
"""

from .backtest import (
    BacktestConfig,
    BacktestLedger,
    ForecastErrorReport,
    PerformanceReport,
    PeriodRecord,
    drift_weights,
    forecast_errors,
    performance,
    run_backtest,
    turnover_cost,
)
from .bl_core import (
    BLInputs,
    CovarianceMatrix,
    EquilibriumPrior,
    PosteriorReturns,
    condition_covariance,
    implied_equilibrium,
    posterior,
    sample_covariance,
)
from .errors import EngineError
from .llm_client import EndpointConfig, LLMProvider, PromptBundle, build_prompts, cached_batch, query_forecast
from .marketdata import (
    AssetMeta,
    PriceTable,
    RebalanceSchedule,
    ReturnSeries,
    build_schedule,
    load_price_table,
    to_returns,
    window,
)
from .optimizer import (
    KKTReport,
    MVOProblem,
    PortfolioWeights,
    equal_weight,
    kkt_report,
    mvo_baseline_inputs,
    solve_mvo,
)
from .simulate import generate_market, write_market_csvs
from .tuner import TauGrid, ValidationInputs, grid_search, run_tuning, tau_init
from .views import (
    AssetContext,
    SentimentSeries,
    ViewSamples,
    ViewSet,
    ViewStats,
    aggregate,
    build_contexts,
    collect_views,
    provide_views,
    sentiment,
    synthetic_provider,
    view_stats,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
