"""Chat-completions client that turns prompt bundles into float forecasts.

Requests carry a JSON-schema response format so every reply is a single
object {"prediction": <number>} in percent units. Non-conforming replies are
rejected and retried; persistent failures surface as SchemaViolationError or
TransportError. A JSON-lines cache makes repeated runs bit-identical without
touching the network.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import requests

from .errors import ConfigError, InputError, SchemaViolationError, TransportError
from .marketdata import AssetMeta
from .viewcache import append_records, read_cache
from .views import ForecastRequest, SAMPLE_BOUND_PCT, ViewSamples, is_valid_sample

PREDICTION_FIELD = "prediction"

RESPONSE_SCHEMA = {
    "type": "object",
    "properties": {PREDICTION_FIELD: {"type": "number"}},
    "required": [PREDICTION_FIELD],
    "additionalProperties": False,
}

SYSTEM_TEMPLATE = """\
You are providing analysis on {date}. Predict the average daily return for \
the next two weeks based on the information provided about a stock's past \
performance.

You will receive the following inputs:
- Daily Returns: The stock's daily returns, a time-series from the past two weeks.
- Company Sector: The company's GICS sector classification.
- Sector Returns: The company sector's daily returns, a time-series from the past two weeks.
- Market Returns: The S&P 500's daily returns, a time-series from the past two weeks.
- Company Information:
  - Ticker: The stock symbol.
  - Company Name: The name of the company.
  - GICS Sector: The Global Industry Classification Standard sector.
  - GICS Sub-Industry: The sub-industry classification.

# Steps

1. Analyze the Time-Series Data: Review the historical daily returns to \
identify patterns, trends, or anomalies that may affect future performance.
2. Consider Sector Performance: Analyze how the market and the sector's \
performance might influence the stock's future returns.
3. Incorporate Company Information: Use the details from the GICS sector and \
sub-industry, along with the company symbol and name, to contextualize the \
predicted performance within its industry.
4. Predict Future Returns: Estimate the average daily returns for the next \
two weeks based on the analysis of available data.

# Output Format

Return a single float value that represents the predicted average daily \
return for the stock over the next two weeks, without any additional \
commentary or explanation, as a JSON object {{"prediction": <float>}}.

# Notes

- Ensure the prediction considers the quantified data from the time-series.
- Make calculations based on statistical trends from daily returns data.
- Pay attention to the trends within both the stock's daily returns and the market's return data.
- Consider the relevance of the company's sector to refine your predictions.
- Make calculations without additional interpretation or commentary.
"""

USER_TEMPLATE = """\
Daily Returns: {asset_returns}

Company Sector: {sector}

Sector Returns: {sector_returns}

Market Returns: {market_returns}

Company Information:
  Ticker: {ticker}
  Company Name: {company_name}
  GICS sector: {sector}
  GICS sub-industry: {sub_industry}
"""

USER_BLOCK_LABELS = (
    "Daily Returns:",
    "Company Sector:",
    "Sector Returns:",
    "Market Returns:",
    "Company Information:",
)


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str

    def __post_init__(self):
        missing = [l for l in USER_BLOCK_LABELS if l not in self.user_text]
        if missing:
            raise InputError(f"user prompt lacks blocks: {missing}")
        if not re.search(r"\d{4}-\d{2}-\d{2}", self.system_text):
            raise InputError("system prompt lacks the ISO reference date")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env_var_name: str = ""
    max_retries: int = 2
    timeout: float = 30.0
    temperature: float = 1.0
    parallelism: int = 4

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def api_key(self) -> str | None:
        if not self.api_key_env_var_name:
            return None
        key = os.environ.get(self.api_key_env_var_name)
        if key is None:
            raise ConfigError(
                f"environment variable {self.api_key_env_var_name} is not set"
            )
        return key


def _format_pct(value: float) -> str:
    text = f"{value:.2f}"
    return "0.00" if text == "-0.00" else text


def _format_series(values: Sequence[float]) -> str:
    return "[" + ", ".join(_format_pct(v) for v in values) + "]"


def build_prompts(
    as_of: dt.date,
    asset: AssetMeta,
    asset_returns_pct: Sequence[float],
    sector_returns_pct: Sequence[float],
    market_returns_pct: Sequence[float],
) -> PromptBundle:
    """Render the system/user prompt pair; numbers carry 2 decimal places."""
    if not (len(asset_returns_pct) == len(sector_returns_pct) == len(market_returns_pct)):
        raise InputError("asset/sector/market return arrays must share a length")
    system_text = SYSTEM_TEMPLATE.format(date=as_of.isoformat())
    user_text = USER_TEMPLATE.format(
        asset_returns=_format_series(asset_returns_pct),
        sector=asset.gics_sector,
        sector_returns=_format_series(sector_returns_pct),
        market_returns=_format_series(market_returns_pct),
        ticker=asset.ticker,
        company_name=asset.company_name,
        sub_industry=asset.gics_sub_industry,
    )
    return PromptBundle(system_text=system_text, user_text=user_text)


def _request_body(config: EndpointConfig, bundle: PromptBundle) -> dict:
    return {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": bundle.user_text},
        ],
        "temperature": config.temperature,
        "response_format": {
            "type": "json_schema",
            "json_schema": {
                "name": "daily_return_forecast",
                "strict": True,
                "schema": RESPONSE_SCHEMA,
            },
        },
    }


def _parse_prediction(payload) -> float:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise SchemaViolationError("response lacks choices[0].message.content")
    try:
        obj = json.loads(content)
    except (json.JSONDecodeError, TypeError):
        raise SchemaViolationError(f"message content is not JSON: {content!r:.200}")
    if not isinstance(obj, dict) or PREDICTION_FIELD not in obj:
        raise SchemaViolationError(f"JSON object lacks {PREDICTION_FIELD!r}: {obj!r:.200}")
    value = obj[PREDICTION_FIELD]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolationError(f"{PREDICTION_FIELD!r} is not a number: {value!r}")
    return float(value)


def query_forecast(config: EndpointConfig, bundle: PromptBundle) -> float:
    """One forecast (percent units) with up to max_retries re-queries."""
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    key = config.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = _request_body(config, bundle)
    last_error: Exception = TransportError("no attempt made")
    for _ in range(config.max_retries + 1):
        try:
            response = requests.post(url, json=body, headers=headers, timeout=config.timeout)
        except requests.RequestException as exc:
            last_error = TransportError(f"endpoint unreachable: {exc}")
            continue
        if response.status_code != 200:
            last_error = TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            continue
        try:
            return _parse_prediction(response.json())
        except (ValueError, SchemaViolationError) as exc:
            last_error = (
                exc
                if isinstance(exc, SchemaViolationError)
                else SchemaViolationError(f"response body is not JSON: {exc}")
            )
            continue
    raise last_error


def cached_batch(
    config: EndpointConfig,
    as_of: dt.date,
    bundles: Sequence[tuple[str, PromptBundle]],
    n_samples: int,
    cache_path,
) -> ViewSamples:
    """N samples per asset, served from the cache where possible.

    Cache hits cost no network calls; misses are queried (up to the configured
    parallelism) and appended as complete records, so a later run with the
    same cache is bit-identical. Forecasts outside +/-100 percent are
    discarded and re-queried within the retry budget.
    """
    records = read_cache(cache_path)
    tickers = [t for t, _ in bundles]
    rows: dict[str, list[float]] = {}
    jobs: list[tuple[str, PromptBundle]] = []
    for ticker, bundle in bundles:
        cached = records.get((as_of.isoformat(), ticker), [])
        rows[ticker] = list(cached[:n_samples])
        jobs.extend((ticker, bundle) for _ in range(n_samples - len(rows[ticker])))

    def fetch(job):
        ticker, bundle = job
        for _ in range(config.max_retries + 1):
            value = query_forecast(config, bundle)
            if is_valid_sample(value):
                return ticker, value
        raise SchemaViolationError(
            f"{ticker}: forecast outside +/-{SAMPLE_BOUND_PCT:g} percent after retries"
        )

    if jobs:
        if config.parallelism > 1:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                results = list(pool.map(fetch, jobs))
        else:
            results = [fetch(job) for job in jobs]
        for ticker, value in results:  # map preserves job order: deterministic
            rows[ticker].append(value)
        short = [t for t in tickers if len(records.get((as_of.isoformat(), t), [])) < n_samples]
        append_records(cache_path, as_of, [(t, rows[t]) for t in short])
    matrix = [rows[t] for t in tickers]
    return ViewSamples(as_of=as_of, tickers=tuple(tickers), samples=matrix)


@dataclass(frozen=True)
class LLMProvider:
    """ViewProvider adapter: one endpoint query per forecast request."""

    config: EndpointConfig

    def forecast(self, request: ForecastRequest) -> float:
        context = request.context
        bundle = build_prompts(
            request.as_of,
            context.meta,
            context.asset_returns_pct,
            context.sector_returns_pct,
            context.market_returns_pct,
        )
        return query_forecast(self.config, bundle)
