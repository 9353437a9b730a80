"""Seeded synthetic markets: a one-factor return model with per-asset drift.

Used by the demos and the test suite to exercise the whole pipeline without
external data. Also writes the CSV file set the loader/CLI consume.
"""

from __future__ import annotations

import csv
import datetime as dt
import os

import numpy as np

from .marketdata import AssetMeta, PriceTable

SECTOR_NAMES = (
    "Information Technology",
    "Health Care",
    "Financials",
    "Energy",
    "Consumer Staples",
    "Industrials",
)


def trading_days(start: dt.date, n_days: int) -> list[dt.date]:
    """n_days consecutive weekdays starting at the first weekday >= start."""
    days = []
    current = start
    while len(days) < n_days:
        if current.weekday() < 5:
            days.append(current)
        current += dt.timedelta(days=1)
    return days


def generate_market(
    seed: int,
    n_assets: int = 10,
    n_days: int = 120,
    start: dt.date = dt.date(2024, 1, 1),
    mean_drift: float = 5e-4,
    drift_dispersion: float = 1e-3,
    idio_vol: float = 0.012,
    factor_vol: float = 0.007,
    n_sectors: int = 2,
    equal_caps: bool = True,
) -> tuple[PriceTable, np.ndarray]:
    """Build a PriceTable plus market caps from a one-factor return model.

    r_it = drift_i + beta_i * f_t + eps_it. Per-asset drifts differ, so a
    lookahead oracle genuinely ranks assets.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6D6B74]))
    dates = trading_days(start, n_days)
    drifts = rng.normal(mean_drift, drift_dispersion, n_assets)
    betas = rng.uniform(0.7, 1.3, n_assets)
    factor = rng.normal(0.0, factor_vol, n_days - 1)
    shocks = rng.normal(0.0, idio_vol, (n_assets, n_days - 1))
    returns = drifts[:, None] + betas[:, None] * factor[None, :] + shocks
    returns = np.clip(returns, -0.5, 0.5)
    prices = 100.0 * np.cumprod(np.hstack([np.ones((n_assets, 1)), 1.0 + returns]), axis=1)

    n_sectors = max(1, min(n_sectors, len(SECTOR_NAMES)))
    assets = tuple(
        AssetMeta(
            ticker=f"A{i:02d}",
            company_name=f"Asset {i:02d} Corp",
            gics_sector=SECTOR_NAMES[i % n_sectors],
            gics_sub_industry=f"{SECTOR_NAMES[i % n_sectors]} Products",
        )
        for i in range(n_assets)
    )
    caps = (
        np.full(n_assets, 1e9)
        if equal_caps
        else rng.uniform(1.0, 10.0, n_assets) * 1e9
    )

    cap_weights = caps / caps.sum()
    rel = prices / prices[:, :1]
    market_index = 100.0 * (cap_weights @ rel)
    sector_prices = {}
    for s in range(n_sectors):
        members = [i for i in range(n_assets) if i % n_sectors == s]
        sector_prices[SECTOR_NAMES[s]] = 100.0 * rel[members].mean(axis=0)

    table = PriceTable(
        dates=tuple(dates),
        assets=assets,
        prices=prices,
        sector_index_prices=sector_prices,
        market_index_prices=market_index,
    )
    return table, caps


def write_market_csvs(table: PriceTable, caps, out_dir) -> dict[str, str]:
    """Write prices/sectors/market/metadata/caps CSVs; returns the path map."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "prices": os.path.join(out_dir, "prices.csv"),
        "sectors": os.path.join(out_dir, "sectors.csv"),
        "market": os.path.join(out_dir, "market.csv"),
        "metadata": os.path.join(out_dir, "metadata.csv"),
        "caps": os.path.join(out_dir, "caps.csv"),
    }

    def dump(path, header, rows):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)

    iso = [d.isoformat() for d in table.dates]
    dump(
        paths["prices"],
        ["date", *table.tickers],
        [[iso[j], *(repr(float(p)) for p in table.prices[:, j])] for j in range(len(iso))],
    )
    sectors = sorted(table.sector_index_prices)
    dump(
        paths["sectors"],
        ["date", *sectors],
        [
            [iso[j], *(repr(float(table.sector_index_prices[s][j])) for s in sectors)]
            for j in range(len(iso))
        ],
    )
    dump(
        paths["market"],
        ["date", "MARKET"],
        [[iso[j], repr(float(table.market_index_prices[j]))] for j in range(len(iso))],
    )
    dump(
        paths["metadata"],
        ["ticker", "company_name", "gics_sector", "gics_sub_industry"],
        [[a.ticker, a.company_name, a.gics_sector, a.gics_sub_industry] for a in table.assets],
    )
    dump(
        paths["caps"],
        ["ticker", "market_cap"],
        [[t, repr(float(c))] for t, c in zip(table.tickers, caps)],
    )
    return paths
