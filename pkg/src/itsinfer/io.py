"""CSV ingestion and deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
import os
from typing import Iterable, Sequence

import numpy as np

from .sarimax import RegressorMatrix, build_regressors
from .series import TimeSeries


class DataError(ValueError):
    """Malformed or non-contiguous input data."""


def format_float(x) -> str:
    """17 significant digits, so values round-trip exactly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, dt.date):
        return v.isoformat()
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows with ``\\n`` line endings and 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        return header, [row for row in r if row]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        return x if math.isfinite(x) else None
    return v


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_series_csv(path, date_column: str = "date", value_column: str = "value") -> TimeSeries:
    """Parse a daily series, checking for duplicate, unordered and missing dates.

    Raises
    ------
    DataError
        Naming the offending row or the missing dates.
    """
    if not os.path.exists(path):
        raise DataError(f"data file {path} not found")
    header, rows = read_csv(path)
    header = [h.strip() for h in header]
    for col in (date_column, value_column):
        if col not in header:
            raise DataError(f"column {col!r} not in header {header}")
    di, vi = header.index(date_column), header.index(value_column)
    dates, values = [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            d = dt.date.fromisoformat(row[di].strip())
        except (ValueError, IndexError):
            raise DataError(f"row {lineno}: cannot parse date {row[di] if di < len(row) else ''!r}") from None
        try:
            v = float(row[vi])
        except (ValueError, IndexError):
            raise DataError(f"row {lineno}: non-numeric value {row[vi] if vi < len(row) else ''!r}") from None
        if not math.isfinite(v):
            raise DataError(f"row {lineno}: non-finite value {row[vi]!r}")
        dates.append(d)
        values.append(v)
    if not dates:
        raise DataError(f"{path} has no data rows")
    seen = {}
    for i, d in enumerate(dates):
        if d in seen:
            raise DataError(f"duplicate date {d} at rows {seen[d] + 2} and {i + 2}")
        seen[d] = i
    for i in range(1, len(dates)):
        if dates[i] < dates[i - 1]:
            raise DataError(f"dates out of order at row {i + 2}: {dates[i]} after {dates[i - 1]}")
    start, end = dates[0], dates[-1]
    span = (end - start).days + 1
    if span != len(dates):
        present = set(dates)
        missing = [start + dt.timedelta(days=i) for i in range(span)
                   if start + dt.timedelta(days=i) not in present]
        shown = ", ".join(m.isoformat() for m in missing[:10])
        more = f" and {len(missing) - 10} more" if len(missing) > 10 else ""
        raise DataError(f"series is not contiguous; missing dates: {shown}{more}")
    return TimeSeries(np.array(values), start)


def ingest_csv(path, config) -> tuple[TimeSeries, RegressorMatrix]:
    """Read the series named by ``config`` and build its regressors."""
    series = read_series_csv(path, config.date_column, config.value_column)
    try:
        X = build_regressors(series, config.interventions, config.covariates)
    except IndexError as exc:
        raise DataError(str(exc)) from None
    return series, X


def write_series_csv(path, series: TimeSeries, extra: dict | None = None) -> None:
    extra = extra or {}
    header = ["date", "value"] + list(extra)
    cols = [np.asarray(v) for v in extra.values()]
    rows = ([d, v] + [c[i] for c in cols] for i, (d, v) in enumerate(zip(series.dates, series.values)))
    write_csv(path, header, rows)
