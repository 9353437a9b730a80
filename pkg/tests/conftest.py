import datetime as dt

import numpy as np
import pytest

from blview.marketdata import AssetMeta, PriceTable
from blview.simulate import trading_days


def weekdays(n, start=dt.date(2024, 1, 1)):
    return tuple(trading_days(start, n))


def make_table(prices, sectors=None, market=None, start=dt.date(2024, 1, 1)):
    """PriceTable from an n_assets x n_days array; indices default sensibly."""
    prices = np.asarray(prices, dtype=float)
    n, t = prices.shape
    dates = weekdays(t, start)
    assets = tuple(
        AssetMeta(f"A{i:02d}", f"Asset {i:02d} Corp", "Information Technology", "Tech Products")
        for i in range(n)
    )
    if sectors is None:
        sectors = {"Information Technology": prices.mean(axis=0)}
    if market is None:
        market = prices.mean(axis=0)
    return PriceTable(
        dates=dates,
        assets=assets,
        prices=prices,
        sector_index_prices=sectors,
        market_index_prices=market,
    )


@pytest.fixture
def small_table():
    """3 assets, 30 days, deterministic drifting prices."""
    rng = np.random.default_rng(11)
    rets = rng.normal(0.001, 0.01, (3, 29))
    prices = 100.0 * np.cumprod(np.hstack([np.ones((3, 1)), 1 + rets]), axis=1)
    return make_table(prices)
