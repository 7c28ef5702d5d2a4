"""Synthetic page-view panels with weekly seasonality, for tests and demos.

Each page gets a heavy-tailed base level, its own weekday profile, a mild
trend and multiplicative noise; a slice of cells (and a few whole pages)
are knocked out to exercise missing-value handling.
"""

from __future__ import annotations

import datetime as dt
import sys

import numpy as np

from .data import ONE_DAY, SeriesTable, parse_page_key, write_wide_csv

__all__ = ["generate_panel"]


def generate_panel(
    n_pages: int = 200,
    n_days: int = 550,
    horizon: int = 60,
    seed: int = 0,
    start: dt.date = dt.date(2015, 7, 1),
    missing_rate: float = 0.02,
    n_empty_pages: int = 2,
) -> tuple[SeriesTable, SeriesTable]:
    """Return (training table of n_days, answer key of the next horizon days)."""
    rng = np.random.default_rng(seed)
    total = n_days + horizon
    dates = [start + i * ONE_DAY for i in range(total)]
    weekdays = np.array([d.weekday() for d in dates])

    level = np.exp(rng.normal(3.0, 1.2, n_pages))
    profiles = 1.0 + rng.uniform(0.3, 0.9, n_pages)[:, None] * rng.uniform(
        -0.5, 0.5, (n_pages, 7)
    )
    profiles = np.maximum(profiles, 0.1)
    slope = rng.uniform(-0.3, 0.6, n_pages)
    t = np.linspace(0.0, 1.0, total)
    trend = 1.0 + slope[:, None] * t[None, :]
    noise = np.exp(rng.normal(0.0, 0.25, (n_pages, total)))
    values = level[:, None] * profiles[:, weekdays] * np.maximum(trend, 0.05) * noise
    values = np.round(values)

    missing = rng.random((n_pages, n_days)) < missing_rate
    train_values = values[:, :n_days].copy()
    train_values[missing] = np.nan
    for row in range(min(n_empty_pages, n_pages)):
        train_values[n_pages - 1 - row, :] = np.nan

    pages = [
        parse_page_key(f"Synth_Page_{i:04d}_xx.wikipedia.org_all-access_all-agents")
        for i in range(n_pages)
    ]
    train = SeriesTable(pages, dates[:n_days], train_values)
    key = SeriesTable(pages, dates[n_days:], values[:, n_days:].copy())
    return train, key


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) not in (2, 3):
        print("usage: python -m wikitraffic.synthetic TRAIN_CSV KEY_CSV [SEED]", file=sys.stderr)
        return 2
    seed = int(argv[2]) if len(argv) == 3 else 0
    train, key = generate_panel(seed=seed)
    write_wide_csv(train, argv[0])
    write_wide_csv(key, argv[1])
    print(f"wrote {train.n_pages} pages x {train.n_dates} days to {argv[0]}, key to {argv[1]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
