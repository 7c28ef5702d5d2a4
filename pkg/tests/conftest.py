import datetime as dt

import numpy as np
import pytest

from wikitraffic.data import ONE_DAY, SeriesTable, parse_page_key


def make_table(values, start=dt.date(2016, 1, 4), pages=None) -> SeriesTable:
    """Build a SeriesTable from a 2-D array; default start is a Monday."""
    values = np.asarray(values, dtype=np.float64)
    n_pages, n_dates = values.shape
    if pages is None:
        pages = [f"page{i}_xx.wikipedia.org_all-access_spider" for i in range(n_pages)]
    keys = [parse_page_key(p) for p in pages]
    dates = [start + i * ONE_DAY for i in range(n_dates)]
    return SeriesTable(keys, dates, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
