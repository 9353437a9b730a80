"""Price ingestion, return computation, and rebalance scheduling.

All series live on one shared trading-day axis. Returns are simple daily
returns as fractions; "two weeks" is always 10 trading days.
"""

from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    FormatError,
    InsufficientDataError,
    ScheduleError,
    WindowError,
)

METADATA_COLUMNS = ("ticker", "company_name", "gics_sector", "gics_sub_industry")

# Fraction of dates an asset may miss before it is dropped from the table.
MAX_MISSING_FRACTION = 0.05


@dataclass(frozen=True)
class AssetMeta:
    ticker: str
    company_name: str
    gics_sector: str
    gics_sub_industry: str

    def __post_init__(self):
        if not self.ticker:
            raise FormatError("asset ticker must be nonempty")
        if not self.gics_sector:
            raise FormatError(f"gics_sector missing for ticker {self.ticker!r}")


@dataclass(frozen=True)
class ReturnSeries:
    """Simple daily returns (fractions) on an ordered trading-day axis."""

    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(self.dates) != len(values):
            raise ValueError(
                f"ReturnSeries has {len(self.dates)} dates but {len(values)} values"
            )
        if values.size and np.min(values) <= -1.0:
            raise ValueError("returns must be > -1")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class PriceTable:
    """Aligned daily adjusted prices for a universe plus sector/market indices."""

    dates: tuple[dt.date, ...]
    assets: tuple[AssetMeta, ...]
    prices: np.ndarray  # n_assets x n_dates, all > 0
    sector_index_prices: Mapping[str, np.ndarray] = field(default_factory=dict)
    market_index_prices: np.ndarray | None = None

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        n, t = prices.shape
        if n != len(self.assets) or t != len(self.dates):
            raise ValueError("price matrix shape does not match assets/dates")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise AlignmentError("dates must be strictly increasing")
        if prices.size and np.min(prices) <= 0:
            raise FormatError("all prices must be positive")
        tickers = [a.ticker for a in self.assets]
        if len(set(tickers)) != len(tickers):
            raise FormatError("duplicate tickers in universe")
        for name, series in self.sector_index_prices.items():
            if len(series) != t:
                raise AlignmentError(f"sector series {name!r} is not date-aligned")
        if self.market_index_prices is not None and len(self.market_index_prices) != t:
            raise AlignmentError("market index series is not date-aligned")

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(a.ticker for a in self.assets)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def date_index(self, date: dt.date) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise AlignmentError(f"{date.isoformat()} not in the price calendar")

    def asset_return_matrix(self) -> tuple[tuple[dt.date, ...], np.ndarray]:
        """Return (return_dates, n_assets x (T-1) simple-return matrix)."""
        rets = self.prices[:, 1:] / self.prices[:, :-1] - 1.0
        return self.dates[1:], rets

    def asset_returns(self, ticker: str) -> ReturnSeries:
        idx = self.tickers.index(ticker)
        dates, rets = self.asset_return_matrix()
        return ReturnSeries(dates, rets[idx])

    def sector_returns(self, sector: str) -> ReturnSeries:
        if sector not in self.sector_index_prices:
            raise AlignmentError(f"no sector index series for {sector!r}")
        return to_returns(self.dates, self.sector_index_prices[sector])

    def market_returns(self) -> ReturnSeries:
        if self.market_index_prices is None:
            raise AlignmentError("no market index series loaded")
        return to_returns(self.dates, self.market_index_prices)


@dataclass(frozen=True)
class RebalanceSchedule:
    rebalance_dates: tuple[dt.date, ...]
    lookback_days: int
    holding_days: int

    def __post_init__(self):
        object.__setattr__(self, "rebalance_dates", tuple(self.rebalance_dates))
        if self.lookback_days <= 0 or self.holding_days <= 0:
            raise ScheduleError("lookback_days and holding_days must be positive")
        if not self.rebalance_dates:
            raise ScheduleError("schedule holds no rebalance dates")
        if any(b <= a for a, b in zip(self.rebalance_dates, self.rebalance_dates[1:])):
            raise ScheduleError("rebalance dates must be strictly increasing")


def to_returns(dates: Sequence[dt.date], prices) -> ReturnSeries:
    """Simple returns: values[t] = prices[t+1]/prices[t] - 1, dated at t+1."""
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1:
        raise InsufficientDataError("price series must be one-dimensional")
    if len(prices) < 2:
        raise InsufficientDataError(
            f"need at least 2 prices to form returns, got {len(prices)}"
        )
    if len(dates) != len(prices):
        raise AlignmentError(
            f"{len(dates)} dates for {len(prices)} prices in return computation"
        )
    if np.min(prices) <= 0:
        raise FormatError("prices must be positive to form returns")
    return ReturnSeries(tuple(dates[1:]), prices[1:] / prices[:-1] - 1.0)


def window(series: ReturnSeries, end_date: dt.date, n_days: int) -> ReturnSeries:
    """The last n_days values of the series ending at (and including) end_date."""
    if n_days <= 0:
        raise WindowError("window length must be positive")
    try:
        end = series.dates.index(end_date)
    except ValueError:
        raise WindowError(f"{end_date.isoformat()} is not in the series")
    start = end - n_days + 1
    if start < 0:
        raise WindowError(
            f"window of {n_days} requested but only {end + 1} values available "
            f"up to {end_date.isoformat()}"
        )
    return ReturnSeries(series.dates[start : end + 1], series.values[start : end + 1])


def build_schedule(
    dates: Sequence[dt.date],
    start: dt.date,
    end: dt.date,
    interval_days: int,
    lookback_days: int,
) -> RebalanceSchedule:
    """Rebalance every interval_days trading days inside [start, end].

    The first date is the earliest calendar day >= start with lookback_days of
    history strictly before it; every date keeps >= 1 trading day after it for
    the holding period. The holding period equals the interval.
    """
    dates = list(dates)
    if interval_days <= 0 or lookback_days <= 0:
        raise ScheduleError("interval_days and lookback_days must be positive")
    if start > end:
        raise ScheduleError(f"start {start} is after end {end}")
    positions = [i for i, d in enumerate(dates) if start <= d <= end]
    if not positions:
        raise ScheduleError(f"no trading days between {start} and {end}")
    first = max(positions[0], lookback_days)
    last_allowed = len(dates) - 2  # needs >= 1 trading day of holding
    chosen = []
    pos = first
    while pos <= last_allowed and dates[pos] <= end:
        chosen.append(dates[pos])
        pos += interval_days
    if not chosen:
        raise ScheduleError(
            f"no feasible rebalance date: lookback {lookback_days} on a "
            f"{len(dates)}-day calendar within [{start}, {end}]"
        )
    return RebalanceSchedule(tuple(chosen), lookback_days, interval_days)


def _parse_date(text: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise FormatError(f"row {row}: cannot parse date {text!r}")


def _read_matrix_csv(path) -> tuple[list[dt.date], list[str], np.ndarray]:
    """Read a `date,<COL>,...` CSV into (dates, columns, values) with NaN gaps."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: file is empty")
        if not header or header[0].strip().lower() != "date":
            raise FormatError(f"{path}: first header column must be 'date'")
        columns = [c.strip() for c in header[1:]]
        if not columns:
            raise FormatError(f"{path}: no data columns in header")
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns) + 1:
                raise FormatError(
                    f"{path} row {row_no}: expected {len(columns) + 1} cells, "
                    f"got {len(row)}"
                )
            dates.append(_parse_date(row[0], row_no))
            values = []
            for col_idx, cell in enumerate(row[1:]):
                cell = cell.strip()
                if not cell:
                    values.append(np.nan)
                    continue
                try:
                    price = float(cell)
                except ValueError:
                    raise FormatError(
                        f"{path} row {row_no}, column {columns[col_idx]!r}: "
                        f"cannot parse price {cell!r}"
                    )
                if not np.isfinite(price) or price <= 0:
                    raise FormatError(
                        f"{path} row {row_no}, column {columns[col_idx]!r}: "
                        f"price {cell!r} is not a positive number"
                    )
                values.append(price)
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    bad = [
        f"{a.isoformat()}>={b.isoformat()}"
        for a, b in zip(dates, dates[1:])
        if b <= a
    ]
    if bad:
        raise AlignmentError(f"{path}: dates not strictly increasing at {bad[:5]}")
    return dates, columns, np.asarray(rows, dtype=float).T  # columns x dates


def _fill_or_reject(ticker: str, values: np.ndarray, dates: list[dt.date]) -> np.ndarray | None:
    """Apply the gap policy to one asset column.

    Interior isolated 1-day gaps are forward-filled. Leading/trailing gaps are
    an alignment error. Longer interior runs, or >MAX_MISSING_FRACTION missing
    overall, reject the asset (returns None).
    """
    missing = np.isnan(values)
    if not missing.any():
        return values
    idx = np.flatnonzero(missing)
    if idx[0] == 0 or idx[-1] == len(values) - 1:
        offending = [dates[i].isoformat() for i in idx[:5]]
        raise AlignmentError(
            f"asset {ticker} does not span the shared calendar; missing {offending}"
        )
    if missing.mean() > MAX_MISSING_FRACTION:
        warnings.warn(
            f"asset {ticker} rejected: {missing.sum()} of {len(values)} dates missing"
        )
        return None
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    if any(len(run) > 1 for run in runs):
        warnings.warn(
            f"asset {ticker} rejected: gap longer than one day "
            f"starting {dates[int(idx[0])].isoformat()}"
        )
        return None
    filled = values.copy()
    for i in idx:
        filled[i] = filled[i - 1]
    return filled


def load_metadata(path) -> dict[str, AssetMeta]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        got = tuple(c.strip() for c in (reader.fieldnames or ()))
        if got != METADATA_COLUMNS:
            raise FormatError(
                f"{path}: metadata header must be {','.join(METADATA_COLUMNS)}, "
                f"got {','.join(got)}"
            )
        metas: dict[str, AssetMeta] = {}
        for row_no, row in enumerate(reader, start=2):
            ticker = (row["ticker"] or "").strip()
            if not ticker:
                raise FormatError(f"{path} row {row_no}: empty ticker")
            if ticker in metas:
                raise FormatError(f"{path} row {row_no}: duplicate ticker {ticker!r}")
            try:
                metas[ticker] = AssetMeta(
                    ticker=ticker,
                    company_name=(row["company_name"] or "").strip(),
                    gics_sector=(row["gics_sector"] or "").strip(),
                    gics_sub_industry=(row["gics_sub_industry"] or "").strip(),
                )
            except FormatError as exc:
                raise FormatError(f"{path} row {row_no}: {exc}")
    return metas


def load_price_table(
    prices_file,
    metadata_file,
    sectors_file=None,
    market_file=None,
) -> PriceTable:
    """Load the universe prices plus optional sector/market index files.

    All files must share an identical date axis. Assets with more than
    MAX_MISSING_FRACTION of dates missing (or interior gaps longer than one
    day) are rejected with a warning; isolated one-day interior gaps are
    forward-filled.
    """
    dates, tickers, matrix = _read_matrix_csv(prices_file)
    metas = load_metadata(metadata_file)
    missing_meta = [t for t in tickers if t not in metas]
    if missing_meta:
        raise FormatError(
            f"{metadata_file}: no metadata for tickers {missing_meta[:5]}"
        )

    kept_assets: list[AssetMeta] = []
    kept_rows: list[np.ndarray] = []
    for ticker, column in zip(tickers, matrix):
        filled = _fill_or_reject(ticker, column, dates)
        if filled is None:
            continue
        kept_assets.append(metas[ticker])
        kept_rows.append(filled)
    if not kept_assets:
        raise FormatError(f"{prices_file}: no assets survived the gap policy")

    sector_prices: dict[str, np.ndarray] = {}
    if sectors_file is not None:
        s_dates, s_names, s_matrix = _read_matrix_csv(sectors_file)
        _check_same_axis(prices_file, sectors_file, dates, s_dates)
        for name, column in zip(s_names, s_matrix):
            if np.isnan(column).any():
                raise AlignmentError(f"{sectors_file}: sector {name!r} has gaps")
            sector_prices[name] = column
        wanted = {a.gics_sector for a in kept_assets}
        absent = sorted(wanted - set(sector_prices))
        if absent:
            raise FormatError(f"{sectors_file}: no index series for sectors {absent}")

    market_prices = None
    if market_file is not None:
        m_dates, m_names, m_matrix = _read_matrix_csv(market_file)
        _check_same_axis(prices_file, market_file, dates, m_dates)
        if len(m_names) != 1:
            raise FormatError(f"{market_file}: expected a single MARKET column")
        if np.isnan(m_matrix[0]).any():
            raise AlignmentError(f"{market_file}: market series has gaps")
        market_prices = m_matrix[0]

    return PriceTable(
        dates=tuple(dates),
        assets=tuple(kept_assets),
        prices=np.vstack(kept_rows),
        sector_index_prices=sector_prices,
        market_index_prices=market_prices,
    )


def _check_same_axis(base_name, other_name, base_dates, other_dates):
    if list(base_dates) == list(other_dates):
        return
    base_set, other_set = set(base_dates), set(other_dates)
    offending = sorted(base_set.symmetric_difference(other_set))
    shown = [d.isoformat() for d in offending[:5]]
    raise AlignmentError(
        f"{other_name} calendar differs from {base_name}: offending dates {shown}"
        + ("..." if len(offending) > 5 else "")
    )
