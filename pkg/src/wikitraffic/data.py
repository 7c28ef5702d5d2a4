"""Loading of the wide daily-views CSV and the future answer key.

The input layout is one header row ``Page,YYYY-MM-DD,...`` followed by one
row per page: a composite page key and one cell per day.  Empty cells mean
"no data recorded"; they are kept distinct from zeros until the transform
stage fills them.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PageKey",
    "SeriesTable",
    "CsvFormatError",
    "CsvDataError",
    "PageKeyError",
    "AlignmentError",
    "parse_page_key",
    "load_wide_csv",
    "load_answer_key",
    "write_wide_csv",
]

ONE_DAY = dt.timedelta(days=1)


class CsvFormatError(ValueError):
    """Header or layout of the CSV file is not the expected wide format."""


class CsvDataError(ValueError):
    """A cell or row holds an invalid value."""


class PageKeyError(ValueError):
    """A page identifier does not follow name_project_access_agent."""


class AlignmentError(ValueError):
    """Answer key and training table do not line up by page or date."""


@dataclass(frozen=True)
class PageKey:
    """Composite page identifier: name_project_access_agent.

    The article name may itself contain underscores; the last three
    underscore-delimited tokens are always project, access and agent.
    """

    name: str
    project: str
    access: str
    agent: str
    raw: str

    def rejoin(self) -> str:
        return "_".join((self.name, self.project, self.access, self.agent))


def parse_page_key(raw: str) -> PageKey:
    """Split a raw page string into its four components."""
    parts = raw.rsplit("_", 3)
    if len(parts) != 4:
        raise PageKeyError(f"page key needs at least 3 underscores: {raw!r}")
    name, project, access, agent = parts
    for label, token in (("project", project), ("access", access), ("agent", agent)):
        if not token:
            raise PageKeyError(f"empty {label} token in page key {raw!r}")
    return PageKey(name, project, access, agent, raw)


@dataclass(eq=False)
class SeriesTable:
    """A pages x dates panel of daily view counts.

    ``values`` is a float64 grid with NaN marking missing cells.  Dates are
    contiguous calendar days; rows follow the source file order.  Loaded
    tables are marked read-only: derive new tables instead of mutating.
    """

    pages: list[PageKey]
    dates: list[dt.date]
    values: np.ndarray
    _index: dict | None = field(default=None, repr=False)

    @property
    def n_pages(self) -> int:
        return len(self.pages)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def last_date(self) -> dt.date:
        return self.dates[-1]

    def raw_keys(self) -> list[str]:
        return [p.raw for p in self.pages]

    def page_index(self, raw: str) -> int:
        if self._index is None:
            self._index = {p.raw: i for i, p in enumerate(self.pages)}
        return self._index[raw]

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def slice_columns(self, start: int, stop: int) -> "SeriesTable":
        """New table restricted to date columns [start, stop)."""
        if not (0 <= start < stop <= self.n_dates):
            raise ValueError(f"column range [{start}, {stop}) outside 0..{self.n_dates}")
        return SeriesTable(self.pages, self.dates[start:stop], self.values[:, start:stop])

    def drop_last(self, n_cols: int) -> "SeriesTable":
        """New table with the final n_cols date columns removed."""
        if n_cols <= 0:
            return self
        return self.slice_columns(0, self.n_dates - n_cols)

    def with_values(self, values: np.ndarray, lock: bool = False) -> "SeriesTable":
        """New table sharing pages/dates with a replaced value grid."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_pages, self.n_dates):
            raise ValueError(f"grid shape {values.shape} != {(self.n_pages, self.n_dates)}")
        if lock:
            values.flags.writeable = False
        return SeriesTable(self.pages, self.dates, values)


def _parse_date_headers(headers: list[str]) -> list[dt.date]:
    dates = []
    for h in headers:
        try:
            dates.append(dt.date.fromisoformat(h))
        except ValueError:
            raise CsvFormatError(f"date header {h!r} is not an ISO date") from None
    for prev, cur, header in zip(dates, dates[1:], headers[1:]):
        if cur - prev != ONE_DAY:
            raise CsvFormatError(f"date headers not contiguous daily at {header!r}")
    return dates


def _count_lines(path) -> int:
    n = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            n += chunk.count(b"\n")
    return n


def load_wide_csv(path) -> SeriesTable:
    """Stream a wide-format CSV into a SeriesTable.

    One pass over the file fills a preallocated grid (sized from a raw
    newline count), so peak memory stays near one float64 grid plus a
    single row buffer.
    """
    est_rows = max(_count_lines(path), 1)

    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        if not header or header[0] != "Page":
            raise CsvFormatError(f"{path}: first column header must be 'Page'")
        if len(header) < 2:
            raise CsvFormatError(f"{path}: no date columns")
        dates = _parse_date_headers(header[1:])
        n_cols = len(dates)

        grid = np.empty((est_rows, n_cols), dtype=np.float64)
        pages: list[PageKey] = []
        seen: set[str] = set()
        row_buf = np.empty(n_cols, dtype=np.float64)

        for row in reader:
            if len(row) != n_cols + 1:
                raise CsvDataError(
                    f"{path}: row {len(pages) + 2} has {len(row)} cells, expected {n_cols + 1}"
                )
            raw = row[0]
            if raw in seen:
                raise CsvDataError(f"{path}: duplicate page {raw!r}")
            seen.add(raw)
            for j, cell in enumerate(row[1:]):
                if cell == "":
                    row_buf[j] = np.nan
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvDataError(
                        f"{path}: non-numeric cell {cell!r} at row {len(pages) + 2}, "
                        f"column {header[j + 1]}"
                    ) from None
                if not np.isfinite(v) or v < 0:
                    raise CsvDataError(
                        f"{path}: invalid view count {cell!r} at row {len(pages) + 2}, "
                        f"column {header[j + 1]}"
                    )
                row_buf[j] = v
            i = len(pages)
            if i >= grid.shape[0]:  # only if quoted fields hid newlines
                extra = np.empty((max(1024, grid.shape[0] // 4), n_cols))
                grid = np.concatenate([grid, extra])
            grid[i] = row_buf
            pages.append(parse_page_key(raw))

    if not pages:
        raise CsvFormatError(f"{path}: no data rows")
    values = grid[: len(pages)]
    if values.shape[0] != grid.shape[0]:
        values = values.copy()
    values.flags.writeable = False
    return SeriesTable(pages, dates, values)


def write_wide_csv(table: SeriesTable, path) -> None:
    """Write a panel back to the wide layout; missing cells become empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Page"] + [d.isoformat() for d in table.dates])
        for page, row in zip(table.pages, table.values):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow([page.raw] + cells)


def load_answer_key(path, reference: SeriesTable, horizon: int = 60) -> SeriesTable:
    """Load the future-views key and align its rows to the reference table.

    The key must cover exactly ``horizon`` days starting the day after the
    reference table ends, and must contain every reference page.
    """
    key = load_wide_csv(path)
    first, last = key.dates[0], reference.last_date
    if first <= last:
        raise AlignmentError(
            f"answer key starts {first}, overlapping the training range ending {last}"
        )
    if first != last + ONE_DAY:
        raise AlignmentError(f"answer key starts {first}, expected {last + ONE_DAY}")
    if key.n_dates != horizon:
        raise AlignmentError(f"answer key spans {key.n_dates} days, expected {horizon}")

    order = np.empty(reference.n_pages, dtype=np.intp)
    for i, page in enumerate(reference.pages):
        try:
            order[i] = key.page_index(page.raw)
        except KeyError:
            raise AlignmentError(f"answer key is missing page {page.raw!r}") from None
    values = key.values[order]
    values.flags.writeable = False
    return SeriesTable(list(reference.pages), key.dates, values)
