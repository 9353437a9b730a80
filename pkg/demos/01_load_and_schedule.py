"""Load a price universe from CSV and carve out the rebalance calendar.

Generates a synthetic 8-asset market, writes it to the CSV layout the loader
expects (prices, sector indices, market index, metadata), loads it back, and
builds the two-week rebalance schedule with a 10-day lookback.
"""

import os

from blview import build_schedule, generate_market, load_price_table, to_returns, window, write_market_csvs

OUT = os.path.join(os.path.dirname(__file__), "output", "01")

table, caps = generate_market(seed=7, n_assets=8, n_days=120)
paths = write_market_csvs(table, caps, OUT)
print("wrote", ", ".join(sorted(os.path.basename(p) for p in paths.values())))

# Round-trip through the CSV loader
loaded = load_price_table(
    paths["prices"],
    paths["metadata"],
    sectors_file=paths["sectors"],
    market_file=paths["market"],
)
print(f"loaded {loaded.n_assets} assets x {len(loaded.dates)} trading days")
print("tickers:", ", ".join(loaded.tickers))

# Daily simple returns for the first asset
series = loaded.asset_returns(loaded.tickers[0])
print(f"{loaded.tickers[0]} first five returns:", [round(float(v), 5) for v in series.values[:5]])

# A 10-day window ending at an arbitrary mid-sample date
cut = window(series, loaded.dates[30], 10)
print(f"10-day window ending {cut.dates[-1]}: mean {cut.values.mean():+.5f}")

# Rebalance every 10 trading days with a 10-day lookback
schedule = build_schedule(loaded.dates, loaded.dates[0], loaded.dates[-1], 10, 10)
print(f"{len(schedule.rebalance_dates)} rebalance dates, first {schedule.rebalance_dates[0]}, last {schedule.rebalance_dates[-1]}")

# Returns always compound back to the prices they came from
import numpy as np

rebuilt = loaded.prices[0, 0] * np.cumprod(1 + series.values)
print("price round-trip max error:", float(np.abs(rebuilt - loaded.prices[0, 1:]).max()))
