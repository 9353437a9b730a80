"""CSV emission for every artifact the engine exports.

Each file is UTF-8 with a leading `# config-hash=<hex> seed=<int>` comment
line; floats are written with repr so identical runs are byte-identical.
"""

from __future__ import annotations

import csv
import datetime as dt
import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backtest import BacktestLedger, ForecastErrorReport, PerformanceReport
from .tuner import TauGrid
from .views import SentimentSeries, ViewStats

REPORT_COLUMNS = (
    "strategy",
    "cagr",
    "mean_daily",
    "std_daily",
    "sharpe_daily",
    "mean_ann",
    "std_ann",
    "sharpe_ann",
    "mdd",
    "var95",
    "cvar95",
)


def _fmt(value) -> str:
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    if isinstance(value, (dt.date, dt.datetime)):
        return value.isoformat()
    return str(value)


def write_csv(path, header_line: str, columns: Sequence[str], rows: Iterable[Sequence]):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header_line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_performance_report(
    path, header_line: str, reports: Mapping[str, PerformanceReport]
):
    rows = []
    for strategy in sorted(reports):
        row = reports[strategy].as_row()
        rows.append([strategy, *(row[c] for c in REPORT_COLUMNS[1:])])
    write_csv(path, header_line, REPORT_COLUMNS, rows)


def write_ledger(path, header_line: str, ledgers: Sequence[BacktestLedger]):
    rows = []
    for ledger in ledgers:
        for period in ledger.periods:
            for i, (d, g, n) in enumerate(zip(period.dates, period.gross, period.net)):
                rows.append(
                    [d, ledger.strategy, g, period.cost if i == 0 else 0.0, n]
                )
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(
        path, header_line, ("date", "strategy", "gross_return", "cost", "net_return"), rows
    )


def write_weights(path, header_line: str, ledger: BacktestLedger):
    rows = [
        [p.rebalance_date, t, w]
        for p in ledger.periods
        for t, w in zip(ledger.tickers, p.weights.w)
    ]
    write_csv(path, header_line, ("date", "ticker", "weight"), rows)


def write_cumulative(path, header_line: str, ledger: BacktestLedger):
    series = ledger.net_series()
    wealth = np.cumprod(1.0 + series.values)
    rows = [[d, w - 1.0] for d, w in zip(series.dates, wealth)]
    write_csv(path, header_line, ("date", "cumulative_net_return"), rows)


def write_sentiment(path, header_line: str, series: SentimentSeries):
    rows = [[d, v] for d, v in zip(series.dates, series.values)]
    write_csv(path, header_line, ("date", "positive_proportion"), rows)


def write_view_stats(path, header_line: str, stats: ViewStats):
    columns = ("count", "mean", "std", "min", "p25", "median", "p75", "max")
    row = [getattr(stats, c) for c in columns]
    write_csv(path, header_line, columns, [row])


def write_view_distribution(path, header_line: str, per_date: Mapping[dt.date, ViewStats]):
    """Per-rebalance distribution summaries (box-plot style data)."""
    columns = ("count", "mean", "std", "min", "p25", "median", "p75", "max")
    rows = [
        [d, *(getattr(per_date[d], c) for c in columns)] for d in sorted(per_date)
    ]
    write_csv(path, header_line, ("date", *columns), rows)


def write_views_vs_realized(path, header_line: str, ledger: BacktestLedger):
    rows = []
    for period in ledger.periods:
        if period.forecast is None:
            continue
        for t, f, r in zip(ledger.tickers, period.forecast, period.realized_mean_daily):
            rows.append([period.rebalance_date, t, 100.0 * float(f), 100.0 * float(r)])
    write_csv(path, header_line, ("date", "ticker", "view_pct", "realized_pct"), rows)


def write_forecast_errors(
    path, header_line: str, reports: Mapping[str, ForecastErrorReport]
):
    rows = [
        [strategy, reports[strategy].mse, reports[strategy].rmse, reports[strategy].mae]
        for strategy in sorted(reports)
    ]
    write_csv(path, header_line, ("strategy", "mse", "rmse", "mae"), rows)


def write_tuning(path, header_line: str, grid: TauGrid):
    rows = [
        [tau, grid.sharpe_per_candidate[tau], int(tau == grid.tau_star)]
        for tau in grid.candidates
    ]
    write_csv(path, header_line, ("tau_candidate", "validation_sharpe", "selected"), rows)


def write_bl_debug(path, header_line: str, ledger: BacktestLedger):
    """Per-rebalance dump of the prior, views, uncertainties, and posterior."""
    rows = []
    for period in ledger.periods:
        if period.posterior_mu is None or period.views is None:
            continue
        omega_diag = np.diag(period.views.omega)
        for i, t in enumerate(ledger.tickers):
            rows.append(
                [
                    period.rebalance_date,
                    t,
                    float(period.prior[i]),
                    float(period.views.q[i]),
                    float(omega_diag[i]),
                    float(period.posterior_mu[i]),
                ]
            )
    write_csv(path, header_line, ("date", "ticker", "pi", "q", "omega", "mu"), rows)
