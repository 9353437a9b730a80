"""JSON-lines cache of forecast samples, one record per (date, ticker).

Records are appended and never rewritten; on read, the last record for a key
wins. Floats survive the round trip bit-for-bit (json uses repr). Any
malformed line raises CacheIntegrityError -- a corrupt cache is never
silently re-queried.
"""

from __future__ import annotations

import datetime as dt
import json
import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CacheIntegrityError, CoverageError
from .views import ViewSamples

CacheKey = tuple[str, str]  # (ISO date, ticker)


def read_cache(path) -> dict[CacheKey, list[float]]:
    """Parse the whole cache file; missing file means an empty cache."""
    records: dict[CacheKey, list[float]] = {}
    if not os.path.exists(path):
        return records
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CacheIntegrityError(f"{path} line {line_no}: bad JSON ({exc})")
            if (
                not isinstance(record, dict)
                or not isinstance(record.get("date"), str)
                or not isinstance(record.get("ticker"), str)
                or not isinstance(record.get("samples"), list)
            ):
                raise CacheIntegrityError(
                    f"{path} line {line_no}: record must hold date/ticker/samples"
                )
            samples = record["samples"]
            if not all(
                isinstance(s, (int, float)) and not isinstance(s, bool) for s in samples
            ):
                raise CacheIntegrityError(
                    f"{path} line {line_no}: samples must all be numbers"
                )
            records[(record["date"], record["ticker"])] = [float(s) for s in samples]
    return records


def append_records(
    path, as_of: dt.date, rows: Iterable[tuple[str, Sequence[float]]]
) -> int:
    """Append one JSON line per (ticker, samples) row; returns lines written."""
    written = 0
    with open(path, "a", encoding="utf-8") as fh:
        for ticker, samples in rows:
            fh.write(
                json.dumps(
                    {
                        "date": as_of.isoformat(),
                        "ticker": ticker,
                        "samples": [float(s) for s in samples],
                    }
                )
                + "\n"
            )
            written += 1
    return written


def missing_pairs(
    records: Mapping[CacheKey, list[float]],
    dates: Iterable[dt.date],
    tickers: Sequence[str],
    n_samples: int,
) -> list[tuple[dt.date, str]]:
    """(date, ticker) pairs not covered by >= n_samples cached samples."""
    out = []
    for d in dates:
        for t in tickers:
            if len(records.get((d.isoformat(), t), [])) < n_samples:
                out.append((d, t))
    return out


def load_view_samples(
    records: Mapping[CacheKey, list[float]],
    as_of: dt.date,
    tickers: Sequence[str],
    n_samples: int,
) -> ViewSamples:
    """Assemble one date's ViewSamples from the cache or raise CoverageError."""
    absent = missing_pairs(records, [as_of], tickers, n_samples)
    if absent:
        names = ", ".join(t for _, t in absent)
        raise CoverageError(
            f"cache lacks {n_samples} samples for {as_of.isoformat()}: {names}"
        )
    matrix = np.array(
        [records[(as_of.isoformat(), t)][:n_samples] for t in tickers], dtype=float
    )
    return ViewSamples(as_of=as_of, tickers=tuple(tickers), samples=matrix)
