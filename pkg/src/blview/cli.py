"""Command-line surface: generate-views, tune, backtest, report.

Configuration is a flat `key = value` text file; command-line flags win over
file values. Every CSV written starts with `# config-hash=<hex> seed=<int>`
so identical (config, seed, cache) runs are byte-identical.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import reports, viewcache
from .backtest import BacktestConfig, forecast_errors, performance, run_backtest
from .errors import (
    AlignmentError,
    CacheIntegrityError,
    ConfigError,
    CoverageError,
    DegenerateInputError,
    EngineError,
    FormatError,
    InputError,
    InsufficientDataError,
    InsufficientSamplesError,
    LookaheadUnavailableError,
    NumericalError,
    OptimizationError,
    ScheduleError,
    SchemaViolationError,
    TransportError,
    TuningError,
    WindowError,
)
from .llm_client import EndpointConfig, LLMProvider, build_prompts, cached_batch
from .marketdata import ReturnSeries, build_schedule, load_price_table
from .tuner import run_tuning
from .views import build_contexts, provide_views, sentiment, synthetic_provider, view_stats

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PROVIDER = 4
EXIT_NUMERICAL = 5

DEFAULTS = {
    "prices": "",
    "metadata": "",
    "sectors": "",
    "market": "",
    "caps": "",
    "cache": "views_cache.jsonl",
    "output_dir": "out",
    "validation_start": "",
    "validation_end": "",
    "test_start": "",
    "test_end": "",
    "strategies": "EW,MVO,BLM",
    "provider": "synthetic:constant",
    "noise": "0.0",
    "bias": "0.0",
    "constant": "0.0",
    "seed": "0",
    "n_samples": "100",
    "lookback": "10",
    "interval": "10",
    "cost_rate": "0.001",
    "lambda": "0.1",
    "delta": "2.5",
    "tau": "tuned",
    "tau_diagonal_only": "false",
    "provider_retries": "2",
    "base_url": "",
    "model": "",
    "api_key_env": "",
    "timeout": "30",
    "temperature": "1.0",
    "parallelism": "4",
    "annualization_days": "252",
    "var_level": "0.95",
}


def parse_config_file(path) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment; unknown keys rejected."""
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path} line {line_no}: expected key = value")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in DEFAULTS:
                    raise ConfigError(f"{path} line {line_no}: unknown key {key!r}")
                values[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return values


@dataclass(frozen=True)
class RunConfig:
    """Typed view over the resolved flat key/value configuration."""

    raw: dict[str, str]

    def __getitem__(self, key: str) -> str:
        return self.raw[key]

    def path(self, key: str, required: bool = True) -> str | None:
        value = self.raw[key]
        if not value:
            if required:
                raise ConfigError(f"config key {key!r} (a file path) is required here")
            return None
        return value

    def date(self, key: str) -> dt.date:
        value = self.raw[key]
        if not value:
            raise ConfigError(f"config key {key!r} (an ISO date) is required here")
        try:
            return dt.date.fromisoformat(value)
        except ValueError:
            raise ConfigError(f"config key {key!r}: bad ISO date {value!r}")

    def number(self, key: str) -> float:
        try:
            return float(self.raw[key])
        except ValueError:
            raise ConfigError(f"config key {key!r}: {self.raw[key]!r} is not a number")

    def integer(self, key: str) -> int:
        try:
            return int(self.raw[key])
        except ValueError:
            raise ConfigError(f"config key {key!r}: {self.raw[key]!r} is not an integer")

    def boolean(self, key: str) -> bool:
        value = self.raw[key].lower()
        if value in ("true", "1", "yes"):
            return True
        if value in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r}: {self.raw[key]!r} is not a boolean")

    def strategies(self) -> list[str]:
        names = [s.strip().upper() for s in self.raw["strategies"].split(",") if s.strip()]
        if not names:
            raise ConfigError("no strategies configured")
        return names

    def config_hash(self) -> str:
        blob = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header_line(self) -> str:
        return f"config-hash={self.config_hash()} seed={self.integer('seed')}"


def resolve_config(args) -> RunConfig:
    values = dict(DEFAULTS)
    if args.config:
        values.update(parse_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"--set: unknown key {key!r}")
        values[key] = value
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.out is not None:
        values["output_dir"] = args.out
    config = RunConfig(values)
    if values["validation_start"] and values["test_start"]:
        if config.date("validation_end") > config.date("test_start"):
            raise ConfigError("validation_end must be <= test_start")
    return config


def load_table(config: RunConfig):
    return load_price_table(
        config.path("prices"),
        config.path("metadata"),
        sectors_file=config.path("sectors", required=False),
        market_file=config.path("market", required=False),
    )


def load_caps(config: RunConfig, tickers) -> np.ndarray | None:
    path = config.path("caps", required=False)
    if path is None:
        return None
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if tuple(c.strip() for c in (reader.fieldnames or ())) != ("ticker", "market_cap"):
            raise FormatError(f"{path}: header must be ticker,market_cap")
        caps = {row["ticker"].strip(): float(row["market_cap"]) for row in reader}
    missing = [t for t in tickers if t not in caps]
    if missing:
        raise FormatError(f"{path}: no market cap for {missing[:5]}")
    return np.array([caps[t] for t in tickers], dtype=float)


def make_schedule(config: RunConfig, table, start_key: str, end_key: str):
    return build_schedule(
        table.dates,
        config.date(start_key),
        config.date(end_key),
        interval_days=config.integer("interval"),
        lookback_days=config.integer("lookback"),
    )


def make_provider(config: RunConfig, table):
    spec = config["provider"].strip()
    if spec == "endpoint":
        return LLMProvider(endpoint_config(config))
    if spec.startswith("synthetic:"):
        kind = spec.split(":", 1)[1]
        return synthetic_provider(
            kind,
            table=table,
            holding_days=config.integer("interval"),
            noise=config.number("noise"),
            bias=config.number("bias"),
            constant=config.number("constant"),
            seed=config.integer("seed"),
        )
    raise ConfigError(f"provider must be 'endpoint' or 'synthetic:<kind>', got {spec!r}")


def endpoint_config(config: RunConfig) -> EndpointConfig:
    if not config["base_url"] or not config["model"]:
        raise ConfigError("endpoint provider needs base_url and model")
    return EndpointConfig(
        base_url=config["base_url"],
        model_name=config["model"],
        api_key_env_var_name=config["api_key_env"],
        max_retries=config.integer("provider_retries"),
        timeout=config.number("timeout"),
        temperature=config.number("temperature"),
        parallelism=config.integer("parallelism"),
    )


def backtest_config(config: RunConfig, schedule, strategy: str, tau: float) -> BacktestConfig:
    return BacktestConfig(
        schedule=schedule,
        strategy=strategy,
        cost_rate=config.number("cost_rate"),
        lam=config.number("lambda"),
        tau=tau,
        delta=config.number("delta"),
        n_samples=config.integer("n_samples"),
        max_retries=config.integer("provider_retries"),
        annualization_days=config.integer("annualization_days"),
        var_level=config.number("var_level"),
    )


def configured_ranges(config: RunConfig) -> list[tuple[str, str]]:
    ranges = []
    if config.raw["validation_start"] and config.raw["validation_end"]:
        ranges.append(("validation_start", "validation_end"))
    if config.raw["test_start"] and config.raw["test_end"]:
        ranges.append(("test_start", "test_end"))
    if not ranges:
        raise ConfigError("no validation or test date range configured")
    return ranges


def load_cached_views(config: RunConfig, table, schedule):
    records = viewcache.read_cache(config["cache"])
    n_samples = config.integer("n_samples")
    return {
        d: viewcache.load_view_samples(records, d, table.tickers, n_samples)
        for d in schedule.rebalance_dates
    }


def cmd_generate_views(config: RunConfig) -> int:
    table = load_table(config)
    cache_path = config["cache"]
    n_samples = config.integer("n_samples")
    lookback = config.integer("lookback")
    spec = config["provider"].strip()

    dates = []
    for start_key, end_key in configured_ranges(config):
        dates.extend(make_schedule(config, table, start_key, end_key).rebalance_dates)
    dates = sorted(set(dates))

    records = viewcache.read_cache(cache_path)
    new_records = 0
    failures: list[str] = []
    for as_of in dates:
        short = [
            t
            for _, t in viewcache.missing_pairs(records, [as_of], table.tickers, n_samples)
        ]
        if not short:
            continue
        try:
            contexts = build_contexts(table, as_of, lookback)
            if spec == "endpoint":
                by_ticker = {c.meta.ticker: c for c in contexts}
                bundles = [
                    (
                        t,
                        build_prompts(
                            as_of,
                            by_ticker[t].meta,
                            by_ticker[t].asset_returns_pct,
                            by_ticker[t].sector_returns_pct,
                            by_ticker[t].market_returns_pct,
                        ),
                    )
                    for t in short
                ]
                cached_batch(endpoint_config(config), as_of, bundles, n_samples, cache_path)
                new_records += len(short)
            else:
                provider = make_provider(config, table)
                samples = provide_views(
                    provider,
                    as_of,
                    contexts,
                    n_samples,
                    max_retries=config.integer("provider_retries"),
                )
                new_records += viewcache.append_records(
                    cache_path,
                    as_of,
                    [(t, samples.for_ticker(t)) for t in short],
                )
        except (
            TransportError,
            SchemaViolationError,
            InsufficientSamplesError,
            LookaheadUnavailableError,
        ) as exc:
            # keep going: remaining dates may still be cacheable; the
            # coverage check below turns any shortfall into the manifest
            failures.append(f"{as_of.isoformat()}: {exc}")

    for line in failures:
        print(f"generate-views: {line}", file=sys.stderr)
    records = viewcache.read_cache(cache_path)
    still_missing = viewcache.missing_pairs(records, dates, table.tickers, n_samples)
    if still_missing:
        manifest = os.path.join(config["output_dir"], "missing_pairs.csv")
        reports.write_csv(
            manifest,
            config.header_line(),
            ("date", "ticker"),
            [[d, t] for d, t in still_missing],
        )
        print(f"generate-views: {len(still_missing)} pairs missing; manifest {manifest}")
        return EXIT_PROVIDER
    print(
        f"generate-views: cache {cache_path} covers {len(dates)} dates x "
        f"{table.n_assets} assets at N={n_samples} ({new_records} records added)"
    )
    return EXIT_OK


def _tune(config: RunConfig, table, caps):
    schedule = make_schedule(config, table, "validation_start", "validation_end")
    views = load_cached_views(config, table, schedule)
    template = backtest_config(config, schedule, "BLM", tau=1.0)
    return run_tuning(
        table,
        template,
        views,
        market_caps=caps,
        diagonal_only=config.boolean("tau_diagonal_only"),
    )


def cmd_tune(config: RunConfig) -> int:
    table = load_table(config)
    caps = load_caps(config, table.tickers)
    grid = _tune(config, table, caps)
    out = os.path.join(config["output_dir"], "tuning.csv")
    reports.write_tuning(out, config.header_line(), grid)
    print(f"tau_init = {grid.tau_init!r}")
    for tau in grid.candidates:
        marker = " *" if tau == grid.tau_star else ""
        print(f"  tau = {tau!r}  sharpe = {grid.sharpe_per_candidate[tau]!r}{marker}")
    print(f"tau_star = {grid.tau_star!r}  ({out})")
    return EXIT_OK


def cmd_backtest(config: RunConfig) -> int:
    table = load_table(config)
    caps = load_caps(config, table.tickers)
    strategies = config.strategies()
    schedule = make_schedule(config, table, "test_start", "test_end")
    out_dir = config["output_dir"]
    header = config.header_line()

    tau_setting = config["tau"].strip().lower()
    tau = None
    if "BLM" in strategies:
        if tau_setting == "tuned":
            grid = _tune(config, table, caps)
            tau = grid.tau_star
            reports.write_tuning(os.path.join(out_dir, "tuning.csv"), header, grid)
            print(f"backtest: tuned tau_star = {tau!r}")
        else:
            tau = config.number("tau")
            if tau <= 0:
                raise ConfigError("tau must be positive")

    views = None
    if "BLM" in strategies:
        views = load_cached_views(config, table, schedule)

    ledgers = {}
    perf = {}
    errors = {}
    for strategy in strategies:
        bt_config = backtest_config(config, schedule, strategy, tau or 1.0)
        ledger = run_backtest(bt_config, table, views=views, market_caps=caps)
        ledgers[strategy] = ledger
        perf[strategy] = performance(ledger.net_series(), bt_config)
        pairs = ledger.forecast_pairs()
        if pairs:
            errors[strategy] = forecast_errors(pairs)
        reports.write_weights(
            os.path.join(out_dir, f"weights_{strategy}.csv"), header, ledger
        )
        reports.write_cumulative(
            os.path.join(out_dir, f"cumulative_{strategy}.csv"), header, ledger
        )
        if pairs:
            reports.write_views_vs_realized(
                os.path.join(out_dir, f"views_vs_realized_{strategy}.csv"), header, ledger
            )
        if strategy == "BLM":
            reports.write_bl_debug(os.path.join(out_dir, "bl_debug.csv"), header, ledger)

    reports.write_performance_report(os.path.join(out_dir, "report.csv"), header, perf)
    reports.write_ledger(
        os.path.join(out_dir, "ledger.csv"), header, [ledgers[s] for s in strategies]
    )
    if errors:
        reports.write_forecast_errors(
            os.path.join(out_dir, "forecast_errors.csv"), header, errors
        )
    if views is not None:
        all_samples = [views[d] for d in schedule.rebalance_dates]
        reports.write_sentiment(
            os.path.join(out_dir, "sentiment.csv"), header, sentiment(all_samples)
        )
        reports.write_view_stats(
            os.path.join(out_dir, "view_stats.csv"), header, view_stats(all_samples)
        )
        reports.write_view_distribution(
            os.path.join(out_dir, "view_distribution.csv"),
            header,
            {vs.as_of: view_stats([vs]) for vs in all_samples},
        )
    for strategy in strategies:
        print(
            f"{strategy}: CAGR {perf[strategy].cagr!r}  "
            f"Sharpe(ann.) {perf[strategy].sharpe_ann!r}"
        )
    print(f"backtest: wrote reports to {out_dir}")
    return EXIT_OK


def read_ledger_csv(path) -> dict[str, ReturnSeries]:
    """Reassemble per-strategy net return series from a ledger CSV."""
    import csv as _csv

    by_strategy: dict[str, list[tuple[dt.date, float]]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in fh if not r.startswith("#")]
    except OSError as exc:
        raise FormatError(f"cannot read ledger {path}: {exc}")
    reader = _csv.DictReader(rows)
    expected = {"date", "strategy", "gross_return", "cost", "net_return"}
    if set(reader.fieldnames or ()) != expected:
        raise FormatError(f"{path}: ledger header must be {sorted(expected)}")
    for row in reader:
        by_strategy.setdefault(row["strategy"], []).append(
            (dt.date.fromisoformat(row["date"]), float(row["net_return"]))
        )
    return {
        s: ReturnSeries(tuple(d for d, _ in pairs), np.array([v for _, v in pairs]))
        for s, pairs in ((s, sorted(p)) for s, p in by_strategy.items())
    }


def cmd_report(config: RunConfig, ledger_path: str | None, plot: bool) -> int:
    path = ledger_path or os.path.join(config["output_dir"], "ledger.csv")
    series = read_ledger_csv(path)
    if not series:
        raise FormatError(f"{path}: ledger holds no rows")
    perf = {
        s: performance(
            net,
            annualization_days=config.integer("annualization_days"),
            var_level=config.number("var_level"),
        )
        for s, net in series.items()
    }
    out = os.path.join(config["output_dir"], "report.csv")
    reports.write_performance_report(out, config.header_line(), perf)
    print(f"report: {len(perf)} strategies -> {out}")
    if plot:
        png = os.path.join(config["output_dir"], "cumulative_returns.png")
        emit_cumulative_plot(series, png)
        print(f"report: plot -> {png}")
    return EXIT_OK


def emit_cumulative_plot(series: dict[str, ReturnSeries], path):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("plot emission needs matplotlib (install extra 'plots')")
    fig, ax = plt.subplots(figsize=(9, 5))
    for strategy in sorted(series):
        net = series[strategy]
        ax.plot(net.dates, np.cumprod(1.0 + net.values) - 1.0, label=strategy)
    ax.set_ylabel("cumulative net return")
    ax.legend()
    fig.autofmt_xdate()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def classify_error(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, InputError)):
        return EXIT_CONFIG
    if isinstance(
        exc,
        (
            FormatError,
            AlignmentError,
            WindowError,
            ScheduleError,
            InsufficientDataError,
            CacheIntegrityError,
            CoverageError,
            OSError,
        ),
    ):
        return EXIT_DATA
    if isinstance(
        exc,
        (
            TransportError,
            SchemaViolationError,
            InsufficientSamplesError,
            LookaheadUnavailableError,
        ),
    ):
        return EXIT_PROVIDER
    if isinstance(
        exc, (NumericalError, OptimizationError, TuningError, DegenerateInputError)
    ):
        return EXIT_NUMERICAL
    return EXIT_UNEXPECTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blview",
        description="Forecast-driven Black-Litterman portfolio engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate-views", "fill the forecast-sample cache for every rebalance date"),
        ("tune", "estimate tau_init and grid-search tau on the validation span"),
        ("backtest", "run the configured strategies over the test span"),
        ("report", "recompute the metric report (and optional plot) from a ledger CSV"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="flat key=value config file")
        cmd.add_argument("--seed", type=int, help="override the top-level seed")
        cmd.add_argument("--out", help="override the output directory")
        cmd.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )
        if name == "report":
            cmd.add_argument("--ledger", help="ledger CSV to read (default: <out>/ledger.csv)")
            cmd.add_argument("--plot", action="store_true", help="emit a cumulative-return PNG")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "generate-views":
            return cmd_generate_views(config)
        if args.command == "tune":
            return cmd_tune(config)
        if args.command == "backtest":
            return cmd_backtest(config)
        return cmd_report(config, args.ledger, args.plot)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return classify_error(exc)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
