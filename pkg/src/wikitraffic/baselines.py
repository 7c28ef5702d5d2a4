"""Median predictors: the 60-day benchmark and five windowed medians.

All medians run on the raw zero-filled views (never log space) and use the
sort-based convention where even-sized samples average the two central
values.  Weekday grouping always keys on true calendar dates, so column
order inside the table is irrelevant once dates are known.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .data import ONE_DAY, SeriesTable

__all__ = [
    "WeekdayMedianTable",
    "Forecast",
    "benchmark_forecast",
    "last_week_median",
    "weekday_median",
    "calendar_weekday_median",
    "expand_to_horizon",
    "median_combine",
    "five_median_forecasts",
    "write_forecast_csv",
    "MEDIAN_WINDOWS",
]

# lookbacks of medians (b), (c), (d): 3 weeks, 9 weeks, 1 year
MEDIAN_WINDOWS = {"b": 21, "c": 63, "d": 365}


@dataclass
class WeekdayMedianTable:
    """Per-page medians bucketed by weekday (Monday=0 .. Sunday=6)."""

    pages: list[str]
    values: np.ndarray  # (n_pages, 7)
    provenance: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.pages), 7):
            raise ValueError(f"weekday table shape {self.values.shape} != (n_pages, 7)")


@dataclass
class Forecast:
    """A pages x horizon grid of predicted views on explicit future dates."""

    pages: list[str]
    dates: list[dt.date]
    values: np.ndarray
    label: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.pages), len(self.dates)):
            raise ValueError(f"forecast grid {self.values.shape} does not match pages x dates")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur - prev != ONE_DAY:
                raise ValueError("forecast dates must be contiguous daily")
        if self.values.size and self.values.min() < 0:
            raise ValueError("negative predicted views")

    @property
    def horizon(self) -> int:
        return len(self.dates)


def _require_filled(table: SeriesTable) -> np.ndarray:
    if np.isnan(table.values).any():
        raise ValueError("table has missing cells; run fill_missing first")
    return table.values


def benchmark_forecast(table: SeriesTable, horizon: int = 60) -> Forecast:
    """Median of each page's previous `horizon` days, held constant ahead."""
    values = _require_filled(table)
    if table.n_dates < horizon:
        raise ValueError(f"benchmark needs at least {horizon} date columns, got {table.n_dates}")
    med = np.median(values[:, -horizon:], axis=1)
    dates = [table.last_date + (i + 1) * ONE_DAY for i in range(horizon)]
    grid = np.repeat(med[:, None], horizon, axis=1)
    return Forecast(table.raw_keys(), dates, grid, "benchmark")


def last_week_median(table: SeriesTable) -> np.ndarray:
    """Median of each page's final 7 values (weekday-independent)."""
    values = _require_filled(table)
    if table.n_dates < 7:
        raise ValueError("last-week median needs at least 7 date columns")
    return np.median(values[:, -7:], axis=1)


def _bucket_by_weekday(
    values: np.ndarray, dates: list[dt.date], pages: list[str], provenance: str
) -> WeekdayMedianTable:
    out = np.empty((values.shape[0], 7), dtype=np.float64)
    fallback_used = False
    for wd in range(7):
        cols = [j for j, d in enumerate(dates) if d.weekday() == wd]
        if cols:
            out[:, wd] = np.median(values[:, cols], axis=1)
        else:
            # degenerate calendar slice: fall back to the overall median
            out[:, wd] = np.median(values, axis=1)
            fallback_used = True
    if fallback_used:
        provenance += "+overall-median-fallback"
    return WeekdayMedianTable(pages, out, provenance)


def weekday_median(table: SeriesTable, window_days: int) -> WeekdayMedianTable:
    """Per-page weekday medians over the final `window_days` columns."""
    values = _require_filled(table)
    if table.n_dates < window_days:
        raise ValueError(f"window of {window_days} days exceeds table span {table.n_dates}")
    dates = table.dates[-window_days:]
    return _bucket_by_weekday(
        values[:, -window_days:], dates, table.raw_keys(), f"last-{window_days}-days"
    )


def calendar_weekday_median(
    table: SeriesTable, start: dt.date, end: dt.date
) -> WeekdayMedianTable:
    """Per-page weekday medians over the inclusive calendar slice [start, end]."""
    values = _require_filled(table)
    if start > end:
        raise ValueError(f"calendar range {start}..{end} is reversed")
    if start < table.dates[0] or end > table.last_date:
        raise ValueError(
            f"calendar range {start}..{end} outside table span "
            f"{table.dates[0]}..{table.last_date}"
        )
    a = (start - table.dates[0]).days
    b = (end - table.dates[0]).days + 1
    return _bucket_by_weekday(
        values[:, a:b], table.dates[a:b], table.raw_keys(), f"calendar-{start}..{end}"
    )


def expand_to_horizon(
    source: WeekdayMedianTable | np.ndarray,
    horizon_dates: list[dt.date],
    pages: list[str] | None = None,
    label: str = "median",
) -> Forecast:
    """Spread weekday medians (or one scalar per page) across the horizon."""
    if isinstance(source, WeekdayMedianTable):
        weekdays = [d.weekday() for d in horizon_dates]
        grid = source.values[:, weekdays]
        return Forecast(source.pages, list(horizon_dates), grid, label)
    per_page = np.asarray(source, dtype=np.float64)
    if per_page.ndim != 1:
        raise ValueError("scalar source must be one value per page")
    if pages is None:
        raise ValueError("pages are required when expanding per-page scalars")
    grid = np.repeat(per_page[:, None], len(horizon_dates), axis=1)
    return Forecast(list(pages), list(horizon_dates), grid, label)


def median_combine(forecasts: list[Forecast], label: str = "median-combine") -> Forecast:
    """Cellwise median over several aligned forecasts."""
    if not forecasts:
        raise ValueError("median_combine needs at least one forecast")
    first = forecasts[0]
    for f in forecasts[1:]:
        if f.values.shape != first.values.shape or f.dates != first.dates:
            raise ValueError(f"forecast {f.label!r} is not aligned with {first.label!r}")
        if f.pages != first.pages:
            raise ValueError(f"forecast {f.label!r} pages differ from {first.label!r}")
    stacked = np.stack([f.values for f in forecasts])
    return Forecast(first.pages, first.dates, np.median(stacked, axis=0), label)


def _year_before(day: dt.date) -> dt.date:
    try:
        return day.replace(year=day.year - 1)
    except ValueError:  # Feb 29
        return day.replace(year=day.year - 1, month=2, day=28)


def five_median_forecasts(
    table: SeriesTable,
    horizon_dates: list[dt.date],
    calendar_start: dt.date | None = None,
    calendar_end: dt.date | None = None,
) -> list[Forecast]:
    """The five median predictors a-e, each expanded over the horizon.

    (a) last-week median; (b)-(d) weekday medians over the last 21, 63 and
    365 days; (e) weekday medians over a calendar slice, defaulting to the
    horizon's span shifted one year back.
    """
    pages = table.raw_keys()
    out = [
        expand_to_horizon(last_week_median(table), horizon_dates, pages, "median-a-last-week")
    ]
    for tag, window in MEDIAN_WINDOWS.items():
        out.append(
            expand_to_horizon(
                weekday_median(table, window), horizon_dates, label=f"median-{tag}-{window}d"
            )
        )
    start = calendar_start or _year_before(horizon_dates[0])
    end = calendar_end or _year_before(horizon_dates[-1])
    out.append(
        expand_to_horizon(
            calendar_weekday_median(table, start, end),
            horizon_dates,
            label=f"median-e-{start}..{end}",
        )
    )
    return out


def write_forecast_csv(forecast: Forecast, path) -> None:
    """Write a forecast in the same wide layout as the input data."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Page"] + [d.isoformat() for d in forecast.dates])
        for page, row in zip(forecast.pages, forecast.values):
            writer.writerow([page] + [repr(float(v)) for v in row])
