"""Seeded synthetic experiments shared by the tuner and acceptance tests.

Each experiment is constructed so the intended Sharpe profile emerges:

- tau selection, exact-lookahead views: a factor market with dispersed true
  drifts; trusting perfect views more is monotonically better, so the grid
  search should land on the largest candidate.
- tau selection, pure-noise views: an iid equal-vol market with a strongly
  positive drift and frequent rebalancing; noise tilts only add variance and
  turnover cost, so the profile degrades monotonically in tau and the
  smallest candidate should win.
- end-to-end stability: delta = 2/lambda makes the equilibrium prior solve
  back to the market-cap (equal-weight) portfolio exactly, a 30-day window
  keeps the sample covariance full rank, and N=100 samples shrink the noise
  in the view means, so garbage views leave BLM near the EW baseline.
"""

from blview.backtest import BacktestConfig, performance, run_backtest
from blview.marketdata import build_schedule
from blview.simulate import generate_market
from blview.tuner import TauGrid, run_tuning
from blview.views import collect_views, synthetic_provider


def tau_selection_experiment(seed: int, noisy_views: bool) -> TauGrid:
    """Grid-search tau with either exact-lookahead or pure-noise views."""
    if noisy_views:
        table, caps = generate_market(
            seed=seed,
            n_assets=8,
            n_days=260,
            mean_drift=4e-3,
            drift_dispersion=5e-4,
            idio_vol=0.01,
            factor_vol=0.0,
        )
        interval = 5
        provider = synthetic_provider("noise", noise=0.6, seed=seed)
    else:
        table, caps = generate_market(
            seed=seed,
            n_assets=8,
            n_days=220,
            mean_drift=5e-4,
            drift_dispersion=1.5e-3,
            idio_vol=0.012,
            factor_vol=0.007,
        )
        interval = 10
        provider = synthetic_provider("oracle", table=table, holding_days=10)
    schedule = build_schedule(
        table.dates, table.dates[0], table.dates[-1], interval, 10
    )
    views = collect_views(provider, table, schedule, n_samples=8)
    config = BacktestConfig(schedule=schedule, strategy="BLM", n_samples=8)
    return run_tuning(table, config, views, market_caps=caps)


def oracle_vs_ew_sharpes(seed: int) -> tuple[float, float]:
    """(BLM, EW) annualized net Sharpe with exact oracle views and large tau."""
    table, caps = generate_market(seed=seed, n_assets=10, n_days=120)
    schedule = build_schedule(table.dates, table.dates[0], table.dates[-1], 10, 10)
    provider = synthetic_provider("oracle", table=table, holding_days=10)
    views = collect_views(provider, table, schedule, n_samples=8)
    blm_config = BacktestConfig(schedule=schedule, strategy="BLM", tau=1.0, n_samples=8)
    ew_config = BacktestConfig(schedule=schedule, strategy="EW")
    blm = run_backtest(blm_config, table, views=views, market_caps=caps)
    ew = run_backtest(ew_config, table)
    return (
        performance(blm.net_series(), blm_config).sharpe_ann,
        performance(ew.net_series(), ew_config).sharpe_ann,
    )


def noise_stability_sharpes(seed: int) -> tuple[float, float]:
    """(BLM, EW) annualized net Sharpe with pure-noise views and tuned tau."""
    table, caps = generate_market(
        seed=seed,
        n_assets=10,
        n_days=120,
        mean_drift=1e-3,
        drift_dispersion=5e-4,
        idio_vol=0.01,
        factor_vol=0.0,
    )
    schedule = build_schedule(table.dates, table.dates[0], table.dates[-1], 10, 30)
    provider = synthetic_provider("noise", noise=0.15, seed=seed)
    views = collect_views(provider, table, schedule, n_samples=100)
    delta = 20.0  # 2 / lambda: the prior alone solves back to market weights
    template = BacktestConfig(schedule=schedule, strategy="BLM", n_samples=100, delta=delta)
    tau = run_tuning(table, template, views, market_caps=caps).tau_star
    blm_config = BacktestConfig(
        schedule=schedule, strategy="BLM", tau=tau, n_samples=100, delta=delta
    )
    ew_config = BacktestConfig(schedule=schedule, strategy="EW")
    blm = run_backtest(blm_config, table, views=views, market_caps=caps)
    ew = run_backtest(ew_config, table)
    return (
        performance(blm.net_series(), blm_config).sharpe_ann,
        performance(ew.net_series(), ew_config).sharpe_ann,
    )
