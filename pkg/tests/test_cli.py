import os

import pytest

from blview.cli import main
from blview.simulate import generate_market, write_market_csvs

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PROVIDER = 0, 2, 3, 4


def setup_workspace(tmp_path, seed=5, n_assets=4, n_days=120, extra=""):
    """Synthetic market CSVs plus a config file; returns the config path."""
    table, caps = generate_market(seed=seed, n_assets=n_assets, n_days=n_days)
    paths = write_market_csvs(table, caps, tmp_path / "data")
    dates = table.dates
    config = tmp_path / "run.conf"
    config.write_text(
        f"""
# synthetic end-to-end fixture
prices = {paths['prices']}
metadata = {paths['metadata']}
sectors = {paths['sectors']}
market = {paths['market']}
caps = {paths['caps']}
cache = {tmp_path / 'views.jsonl'}
output_dir = {tmp_path / 'out'}
validation_start = {dates[10].isoformat()}
validation_end = {dates[49].isoformat()}
test_start = {dates[50].isoformat()}
test_end = {dates[-1].isoformat()}
strategies = EW,MVO,BLM
provider = synthetic:oracle
seed = 9
n_samples = 4
lookback = 10
interval = 10
tau = tuned
{extra}
""",
        encoding="utf-8",
    )
    return config


def run(args):
    return main([str(a) for a in args])


class TestGenerateViews:
    def test_fills_cache_then_idempotent(self, tmp_path, capsys):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        first = capsys.readouterr().out
        assert "records added" in first
        cache = tmp_path / "views.jsonl"
        lines = cache.read_text().strip().splitlines()
        assert len(lines) > 0
        assert run(["generate-views", "--config", config]) == EXIT_OK
        second = capsys.readouterr().out
        assert "(0 records added)" in second
        assert cache.read_text().strip().splitlines() == lines

    def test_record_count_matches_dates_times_assets(self, tmp_path, capsys):
        config = setup_workspace(tmp_path, n_assets=2, n_days=60)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        lines = (tmp_path / "views.jsonl").read_text().strip().splitlines()
        # validation+test rebalance dates x 2 assets, one record each
        from blview.marketdata import build_schedule, load_price_table

        table = load_price_table(
            tmp_path / "data" / "prices.csv", tmp_path / "data" / "metadata.csv"
        )
        n_dates = 0
        for start, end in ((10, 49), (50, 59)):
            sched = build_schedule(
                table.dates, table.dates[start], table.dates[end], 10, 10
            )
            n_dates += len(sched.rebalance_dates)
        assert n_dates == 5  # hand enumeration: positions 10,20,30,40 and 50
        assert len(lines) == 2 * n_dates

    def test_unknown_config_key_is_config_error(self, tmp_path):
        config = tmp_path / "bad.conf"
        config.write_text("nonsense_key = 1\n", encoding="utf-8")
        assert run(["generate-views", "--config", config]) == EXIT_CONFIG

    def test_missing_prices_file_is_data_error(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert (
            run(["generate-views", "--config", config, "--set", "prices=/nope.csv"])
            == EXIT_DATA
        )

    def test_failing_provider_writes_missing_pairs_manifest(self, tmp_path):
        # constant 200 percent is outside the sample bounds: every query is
        # discarded, so every (date, ticker) pair stays uncovered
        config = setup_workspace(
            tmp_path, extra="provider = synthetic:constant\nconstant = 200\n"
        )
        assert run(["generate-views", "--config", config]) == EXIT_PROVIDER
        manifest = (tmp_path / "out" / "missing_pairs.csv").read_text().splitlines()
        assert manifest[1] == "date,ticker"
        assert len(manifest) > 2

    def test_unreachable_endpoint_exits_with_provider_code(self, tmp_path):
        config = setup_workspace(
            tmp_path,
            extra=(
                "provider = endpoint\nbase_url = http://127.0.0.1:9\n"
                "model = m\ntimeout = 0.2\nprovider_retries = 0\n"
            ),
        )
        assert run(["generate-views", "--config", config]) == EXIT_PROVIDER
        assert (tmp_path / "out" / "missing_pairs.csv").exists()


class TestTune:
    def test_tune_writes_report_and_prints_selection(self, tmp_path, capsys):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        capsys.readouterr()
        assert run(["tune", "--config", config]) == EXIT_OK
        out = capsys.readouterr().out
        assert "tau_init" in out and "tau_star" in out
        tuning = (tmp_path / "out" / "tuning.csv").read_text().splitlines()
        assert tuning[0].startswith("# config-hash=")
        assert tuning[1] == "tau_candidate,validation_sharpe,selected"
        assert len(tuning) == 7
        assert sum(row.endswith(",1") for row in tuning[2:]) == 1

    def test_missing_cache_is_coverage_error(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["tune", "--config", config]) == EXIT_DATA

    def test_tune_rerun_is_byte_identical(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        assert run(["tune", "--config", config]) == EXIT_OK
        first = (tmp_path / "out" / "tuning.csv").read_bytes()
        assert run(["tune", "--config", config]) == EXIT_OK
        assert (tmp_path / "out" / "tuning.csv").read_bytes() == first

    def test_selection_matches_library_tuning(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        assert run(["tune", "--config", config]) == EXIT_OK
        rows = (tmp_path / "out" / "tuning.csv").read_text().splitlines()[2:]
        selected = [float(r.split(",")[0]) for r in rows if r.endswith(",1")]

        from blview.backtest import BacktestConfig
        from blview.marketdata import build_schedule, load_price_table
        from blview.tuner import run_tuning
        from blview.viewcache import load_view_samples, read_cache

        table = load_price_table(
            tmp_path / "data" / "prices.csv",
            tmp_path / "data" / "metadata.csv",
            sectors_file=tmp_path / "data" / "sectors.csv",
            market_file=tmp_path / "data" / "market.csv",
        )
        schedule = build_schedule(table.dates, table.dates[10], table.dates[49], 10, 10)
        records = read_cache(tmp_path / "views.jsonl")
        views = {
            d: load_view_samples(records, d, table.tickers, 4)
            for d in schedule.rebalance_dates
        }
        import csv as _csv

        with open(tmp_path / "data" / "caps.csv", newline="") as fh:
            caps = [float(r["market_cap"]) for r in _csv.DictReader(fh)]
        grid = run_tuning(
            table,
            BacktestConfig(schedule=schedule, strategy="BLM", n_samples=4),
            views,
            market_caps=caps,
        )
        assert selected == [grid.tau_star]


class TestBacktest:
    def test_full_run_emits_all_reports(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        assert run(["backtest", "--config", config]) == EXIT_OK
        out = tmp_path / "out"
        for name in (
            "report.csv",
            "ledger.csv",
            "tuning.csv",
            "weights_EW.csv",
            "weights_MVO.csv",
            "weights_BLM.csv",
            "cumulative_EW.csv",
            "cumulative_BLM.csv",
            "sentiment.csv",
            "view_stats.csv",
            "view_distribution.csv",
            "views_vs_realized_BLM.csv",
            "views_vs_realized_MVO.csv",
            "forecast_errors.csv",
            "bl_debug.csv",
        ):
            assert (out / name).exists(), name
        report = (out / "report.csv").read_text().splitlines()
        assert report[1].split(",")[0] == "strategy"
        assert [row.split(",")[0] for row in report[2:]] == ["BLM", "EW", "MVO"]
        # with exact-lookahead views, BLM should out-compound EW on this fixture
        cagr = {row.split(",")[0]: float(row.split(",")[1]) for row in report[2:]}
        assert cagr["BLM"] > cagr["EW"]

    def test_ew_only_report_has_one_row(self, tmp_path):
        config = setup_workspace(tmp_path, extra="strategies = EW\n")
        assert run(["backtest", "--config", config]) == EXIT_OK
        report = (tmp_path / "out" / "report.csv").read_text().splitlines()
        assert len(report) == 3  # comment, header, EW

    def test_blm_without_cache_is_coverage_error(self, tmp_path):
        config = setup_workspace(tmp_path, extra="tau = 0.5\n")
        assert run(["backtest", "--config", config]) == EXIT_DATA

    def test_fixed_tau_skips_tuning(self, tmp_path):
        config = setup_workspace(tmp_path, extra="tau = 0.5\n")
        assert run(["generate-views", "--config", config]) == EXIT_OK
        assert run(["backtest", "--config", config]) == EXIT_OK
        assert not (tmp_path / "out" / "tuning.csv").exists()

    def test_flag_overrides_win_over_file(self, tmp_path):
        config = setup_workspace(tmp_path, extra="strategies = EW\n")
        assert (
            run(["backtest", "--config", config, "--set", "strategies=EW,MVO"])
            == EXIT_OK
        )
        report = (tmp_path / "out" / "report.csv").read_text().splitlines()
        assert len(report) == 4

    def test_seed_flag_overrides_header(self, tmp_path):
        config = setup_workspace(tmp_path, extra="strategies = EW\n")
        assert run(["backtest", "--config", config, "--seed", "77"]) == EXIT_OK
        header = (tmp_path / "out" / "report.csv").read_text().splitlines()[0]
        assert header.endswith("seed=77")


class TestReport:
    def test_recomputes_metrics_from_ledger(self, tmp_path):
        config = setup_workspace(tmp_path, extra="strategies = EW,MVO\n")
        assert run(["backtest", "--config", config]) == EXIT_OK
        original = (tmp_path / "out" / "report.csv").read_bytes()
        assert run(["report", "--config", config]) == EXIT_OK
        assert (tmp_path / "out" / "report.csv").read_bytes() == original

    def test_missing_ledger_is_data_error(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["report", "--config", config]) == EXIT_DATA

    def test_plot_emission(self, tmp_path):
        pytest.importorskip("matplotlib")
        config = setup_workspace(tmp_path, extra="strategies = EW\n")
        assert run(["backtest", "--config", config]) == EXIT_OK
        assert run(["report", "--config", config, "--plot"]) == EXIT_OK
        assert (tmp_path / "out" / "cumulative_returns.png").exists()


class TestDeterminism:
    def test_two_backtest_runs_are_byte_identical(self, tmp_path):
        config = setup_workspace(tmp_path)
        assert run(["generate-views", "--config", config]) == EXIT_OK
        assert run(["backtest", "--config", config]) == EXIT_OK
        out = tmp_path / "out"
        snapshot = {
            name: (out / name).read_bytes()
            for name in sorted(os.listdir(out))
            if name.endswith(".csv")
        }
        assert run(["backtest", "--config", config]) == EXIT_OK
        for name, blob in snapshot.items():
            assert (out / name).read_bytes() == blob, name
