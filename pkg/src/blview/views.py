"""Forecast-sample collection and aggregation into (q, P, Omega) view inputs.

Providers speak percent units (a forecast of 0.25 means 25 bp/day); everything
downstream of :func:`aggregate` speaks fractions. That conversion happens in
exactly one place.
"""

from __future__ import annotations

import datetime as dt
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    InputError,
    InsufficientSamplesError,
    LookaheadUnavailableError,
    SchemaViolationError,
)
from .marketdata import AssetMeta, PriceTable, RebalanceSchedule, window

# Variance floor (fraction^2) keeping Omega invertible when all samples agree.
EPSILON_OMEGA = 1e-10

# Forecasts outside +/- this bound (percent/day) are discarded and re-queried.
SAMPLE_BOUND_PCT = 100.0


@dataclass(frozen=True)
class AssetContext:
    """Per-asset prompt data for one rebalance date, percent units."""

    meta: AssetMeta
    asset_returns_pct: tuple[float, ...]
    sector_returns_pct: tuple[float, ...]
    market_returns_pct: tuple[float, ...]


@dataclass(frozen=True)
class ForecastRequest:
    as_of: dt.date
    context: AssetContext
    sample_index: int
    attempt: int = 0


class ViewProvider(Protocol):
    """A source of one scalar forecast (percent/day) per request.

    Implementations must be safe for concurrent calls and must derive any
    randomness from (as_of, ticker, sample_index, attempt), never from call
    order.
    """

    def forecast(self, request: ForecastRequest) -> float: ...


@dataclass(frozen=True)
class ViewSamples:
    """N repeated forecasts per asset at one rebalance date, percent units."""

    as_of: dt.date
    tickers: tuple[str, ...]
    samples: np.ndarray  # n_assets x N
    discarded: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if samples.ndim != 2 or samples.shape[0] != len(self.tickers):
            raise InputError("samples must be an n_assets x N matrix")
        if samples.shape[1] < 2:
            raise InputError("every asset needs at least 2 samples")
        if not np.isfinite(samples).all():
            raise InputError("samples must be finite")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def for_ticker(self, ticker: str) -> np.ndarray:
        return self.samples[self.tickers.index(ticker)]


@dataclass(frozen=True)
class ViewSet:
    """Black-Litterman view inputs: q (fractions), identity P, diagonal Omega."""

    q: np.ndarray
    P: np.ndarray
    omega: np.ndarray
    k: int
    floored_assets: tuple[str, ...] = ()

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        P = np.asarray(self.P, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "omega", omega)
        n = self.k
        if q.shape != (n,) or P.shape != (n, n) or omega.shape != (n, n):
            raise InputError("ViewSet dimensions disagree with k")
        if not np.array_equal(P, np.eye(n)):
            raise InputError("picking matrix must be the identity (absolute views)")
        off = omega[~np.eye(n, dtype=bool)]
        if off.size and np.any(off != 0.0):
            raise InputError("omega must be diagonal")
        if np.any(np.diag(omega) <= 0.0):
            raise InputError("omega diagonal must be strictly positive")

    @property
    def has_floored_variance(self) -> bool:
        return bool(self.floored_assets)


@dataclass(frozen=True)
class ViewStats:
    """Distribution summary over a whole sample population, percent units."""

    count: int
    mean: float
    std: float
    min: float
    p25: float
    median: float
    p75: float
    max: float

    def __post_init__(self):
        if not (self.min <= self.p25 <= self.median <= self.p75 <= self.max):
            raise InputError("view statistics quantiles are not ordered")


@dataclass(frozen=True)
class SentimentSeries:
    """Proportion of strictly positive samples at each rebalance date."""

    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        if len(values) != len(self.dates):
            raise InputError("sentiment dates/values length mismatch")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise InputError("sentiment proportions must lie in [0, 1]")


def is_valid_sample(value) -> bool:
    """Accept finite numbers within +/- SAMPLE_BOUND_PCT percent; reject bools."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    return bool(np.isfinite(value)) and abs(value) <= SAMPLE_BOUND_PCT


def provide_views(
    provider: ViewProvider,
    as_of: dt.date,
    contexts: Sequence[AssetContext],
    n_samples: int,
    max_retries: int = 2,
    max_workers: int = 1,
) -> ViewSamples:
    """Query the provider n_samples times per asset.

    Invalid or out-of-range forecasts are discarded and re-queried up to
    max_retries extra attempts per sample index. Any asset that still lacks a
    sample raises InsufficientSamplesError naming every short asset; shortfalls
    are never imputed.
    """
    if n_samples < 2:
        raise InputError("n_samples must be >= 2")
    if max_retries < 0:
        raise InputError("max_retries must be >= 0")
    tickers = [c.meta.ticker for c in contexts]
    if not tickers:
        raise InputError("no asset contexts supplied")

    samples = np.full((len(contexts), n_samples), np.nan)

    def fetch(asset_index: int, sample_index: int) -> int:
        context = contexts[asset_index]
        rejected = 0
        for attempt in range(max_retries + 1):
            try:
                value = provider.forecast(
                    ForecastRequest(as_of, context, sample_index, attempt)
                )
            except SchemaViolationError:
                # flaky per-query failure: burn an attempt and re-query;
                # systemic errors (transport, lookahead) propagate untouched
                rejected += 1
                continue
            if is_valid_sample(value):
                samples[asset_index, sample_index] = float(value)
                break
            rejected += 1
        return rejected

    tasks = [(i, j) for i in range(len(contexts)) for j in range(n_samples)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            discarded = sum(pool.map(lambda t: fetch(*t), tasks))
    else:
        discarded = sum(fetch(*task) for task in tasks)

    got = np.sum(np.isfinite(samples), axis=1)
    if np.any(got < n_samples):
        shortfalls = {t: int(g) for t, g in zip(tickers, got) if g < n_samples}
        raise InsufficientSamplesError(shortfalls)
    return ViewSamples(as_of, tuple(tickers), samples, discarded=discarded)


def aggregate(samples: ViewSamples) -> ViewSet:
    """Turn repeated percent forecasts into fraction-unit (q, P, Omega).

    q_i is the sample mean / 100; omega_ii is the unbiased (N-1) sample
    variance / 100^2, floored at EPSILON_OMEGA. The floor is flagged on the
    returned ViewSet per asset.
    """
    n = len(samples.tickers)
    q = samples.samples.mean(axis=1) / 100.0
    variances = samples.samples.var(axis=1, ddof=1) / 100.0**2
    floored = variances < EPSILON_OMEGA
    variances = np.maximum(variances, EPSILON_OMEGA)
    return ViewSet(
        q=q,
        P=np.eye(n),
        omega=np.diag(variances),
        k=n,
        floored_assets=tuple(t for t, f in zip(samples.tickers, floored) if f),
    )


def view_stats(all_samples: Iterable[ViewSamples]) -> ViewStats:
    """Summary statistics over every sample across assets and dates."""
    blocks = [vs.samples.ravel() for vs in all_samples]
    if not blocks:
        raise InputError("no view samples to summarize")
    population = np.concatenate(blocks)
    p25, median, p75 = np.percentile(population, [25.0, 50.0, 75.0])
    # population (ddof=0) std: duplicating a sample set leaves the summary
    # unchanged, which the sample estimator would break
    return ViewStats(
        count=int(population.size),
        mean=float(population.mean()),
        std=float(population.std(ddof=0)),
        min=float(population.min()),
        p25=float(p25),
        median=float(median),
        p75=float(p75),
        max=float(population.max()),
    )


def sentiment(all_samples: Iterable[ViewSamples]) -> SentimentSeries:
    """Per date, the share of strictly positive samples (zero is non-positive)."""
    ordered = sorted(all_samples, key=lambda vs: vs.as_of)
    if not ordered:
        raise InputError("no view samples for sentiment")
    dates = tuple(vs.as_of for vs in ordered)
    values = np.array([float(np.mean(vs.samples > 0.0)) for vs in ordered])
    return SentimentSeries(dates, values)


def _derive_rng(seed: int, as_of: dt.date, ticker: str, sample_index: int, attempt: int):
    ticker_key = int.from_bytes(hashlib.sha256(ticker.encode()).digest()[:8], "big")
    seq = np.random.SeedSequence(
        [seed, as_of.toordinal(), ticker_key, sample_index, attempt]
    )
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class ConstantProvider:
    """Emits one fixed percent value for every request."""

    value: float

    def forecast(self, request: ForecastRequest) -> float:
        return self.value


@dataclass(frozen=True)
class OracleProvider:
    """Reads the future holding-period realized mean daily return (x100).

    Adds Normal(bias, noise^2) percent on top; noise = 0 gives exact lookahead.
    A negative bias emulates a persistently pessimistic forecaster.
    """

    table: PriceTable
    holding_days: int
    noise: float = 0.0
    bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.noise) or not np.isfinite(self.bias):
            raise InputError("noise and bias must be finite")
        if self.noise < 0:
            raise InputError("noise must be non-negative")
        if self.holding_days <= 0:
            raise InputError("holding_days must be positive")

    def future_mean_pct(self, as_of: dt.date, ticker: str) -> float:
        pos = self.table.date_index(as_of)
        _, rets = self.table.asset_return_matrix()
        start, stop = pos, min(pos + self.holding_days, rets.shape[1])
        if stop <= start:
            raise LookaheadUnavailableError(
                f"no future returns after {as_of.isoformat()} for the oracle"
            )
        row = self.table.tickers.index(ticker)
        return float(rets[row, start:stop].mean()) * 100.0

    def forecast(self, request: ForecastRequest) -> float:
        ticker = request.context.meta.ticker
        value = self.future_mean_pct(request.as_of, ticker) + self.bias
        if self.noise > 0.0:
            rng = _derive_rng(
                self.seed, request.as_of, ticker, request.sample_index, request.attempt
            )
            value += float(rng.normal(0.0, self.noise))
        return value


@dataclass(frozen=True)
class NoiseProvider:
    """Pure noise around a fixed center: Normal(center, noise^2) percent."""

    noise: float
    center: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.noise) or self.noise <= 0:
            raise InputError("noise must be a positive finite number")

    def forecast(self, request: ForecastRequest) -> float:
        rng = _derive_rng(
            self.seed,
            request.as_of,
            request.context.meta.ticker,
            request.sample_index,
            request.attempt,
        )
        return self.center + float(rng.normal(0.0, self.noise))


def synthetic_provider(
    kind: str,
    table: PriceTable | None = None,
    holding_days: int = 10,
    noise: float = 0.0,
    bias: float = 0.0,
    constant: float = 0.0,
    seed: int = 0,
) -> ViewProvider:
    """Build a test provider: oracle | noisy-oracle | pessimist | constant | noise."""
    for name, value in (("noise", noise), ("bias", bias), ("constant", constant)):
        if not np.isfinite(value):
            raise InputError(f"{name} must be finite")
    if kind == "constant":
        return ConstantProvider(constant)
    if kind == "noise":
        return NoiseProvider(noise=noise if noise > 0 else 1.0, center=bias, seed=seed)
    if kind in ("oracle", "noisy-oracle", "pessimist"):
        if table is None:
            raise InputError(f"{kind} provider needs a price table")
        if kind == "pessimist":
            bias = -abs(bias if bias else 0.5)
        if kind == "noisy-oracle" and noise <= 0:
            noise = 0.5
        return OracleProvider(
            table=table, holding_days=holding_days, noise=noise, bias=bias, seed=seed
        )
    raise InputError(f"unknown synthetic provider kind {kind!r}")


def build_contexts(
    table: PriceTable, as_of: dt.date, lookback_days: int
) -> list[AssetContext]:
    """Assemble per-asset prompt data (percent units) for one rebalance date."""
    _, rets = table.asset_return_matrix()
    ret_dates = table.dates[1:]
    market = window(table.market_returns(), as_of, lookback_days)
    sector_cache: dict[str, tuple[float, ...]] = {}
    contexts = []
    try:
        end = ret_dates.index(as_of)
    except ValueError:
        raise InputError(f"{as_of.isoformat()} is not a return date of the table")
    start = end - lookback_days + 1
    if start < 0:
        raise InputError(
            f"not enough history before {as_of.isoformat()} for a "
            f"{lookback_days}-day context window"
        )
    market_pct = tuple(100.0 * v for v in market.values)
    for row, meta in enumerate(table.assets):
        sector = meta.gics_sector
        if sector not in sector_cache:
            series = window(table.sector_returns(sector), as_of, lookback_days)
            sector_cache[sector] = tuple(100.0 * v for v in series.values)
        contexts.append(
            AssetContext(
                meta=meta,
                asset_returns_pct=tuple(100.0 * v for v in rets[row, start : end + 1]),
                sector_returns_pct=sector_cache[sector],
                market_returns_pct=market_pct,
            )
        )
    return contexts


def collect_views(
    provider: ViewProvider,
    table: PriceTable,
    schedule: RebalanceSchedule,
    n_samples: int,
    max_retries: int = 2,
    max_workers: int = 1,
) -> dict[dt.date, ViewSamples]:
    """provide_views at every rebalance date of the schedule."""
    out: dict[dt.date, ViewSamples] = {}
    for as_of in schedule.rebalance_dates:
        contexts = build_contexts(table, as_of, schedule.lookback_days)
        out[as_of] = provide_views(
            provider, as_of, contexts, n_samples, max_retries, max_workers
        )
    return out
