"""Drive the whole pipeline through the command-line interface.

Writes a synthetic data set and a flat key=value config, then runs
generate-views / tune / backtest / report exactly as a shell user would.
Every CSV lands under demos/output/06/ with a config-hash+seed header line.
"""

import os

from blview import generate_market, write_market_csvs
from blview.cli import main

BASE = os.path.join(os.path.dirname(__file__), "output", "06")
OUT = os.path.join(BASE, "out")

table, caps = generate_market(seed=33, n_assets=6, n_days=150)
paths = write_market_csvs(table, caps, os.path.join(BASE, "data"))
dates = table.dates

config_path = os.path.join(BASE, "run.conf")
with open(config_path, "w", encoding="utf-8") as fh:
    fh.write(
        "\n".join(
            [
                "# synthetic pipeline walkthrough",
                f"prices = {paths['prices']}",
                f"metadata = {paths['metadata']}",
                f"sectors = {paths['sectors']}",
                f"market = {paths['market']}",
                f"caps = {paths['caps']}",
                f"cache = {os.path.join(BASE, 'views.jsonl')}",
                f"output_dir = {OUT}",
                f"validation_start = {dates[10].isoformat()}",
                f"validation_end = {dates[59].isoformat()}",
                f"test_start = {dates[60].isoformat()}",
                f"test_end = {dates[-1].isoformat()}",
                "strategies = EW,MVO,BLM",
                "provider = synthetic:noisy-oracle",
                "noise = 0.5",
                "seed = 12",
                "n_samples = 20",
                "tau = tuned",
            ]
        )
        + "\n"
    )

for args in (
    ["generate-views", "--config", config_path],
    ["tune", "--config", config_path],
    ["backtest", "--config", config_path],
    ["report", "--config", config_path],
):
    print(f"\n$ blview {' '.join(args)}")
    code = main(args)
    assert code == 0, f"exit code {code}"

print("\noutputs:")
for name in sorted(os.listdir(OUT)):
    print(" ", os.path.join(OUT, name))

with open(os.path.join(OUT, "report.csv"), encoding="utf-8") as fh:
    print("\nreport.csv:")
    print(fh.read())
