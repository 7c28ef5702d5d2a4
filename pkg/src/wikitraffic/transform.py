"""Panel preprocessing: zero-fill, log transform, window split, scaling.

The fixed pipeline order is fill -> log1p -> window split -> fit min-max
on the training inputs only -> apply to every input slice.  Targets stay
in log1p space, unscaled; predictions return to views space through
``log1p_invert``.  IQR clipping is available as an alternative outlier
treatment but is not part of the default pipeline.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
from dataclasses import dataclass

import numpy as np

from .data import ONE_DAY, SeriesTable

__all__ = [
    "ScalerParams",
    "WindowSplit",
    "fill_missing",
    "log1p_apply",
    "log1p_invert",
    "iqr_clip",
    "make_windows",
    "fit_minmax",
    "apply_minmax",
    "invert_minmax",
    "scale_windows",
    "prepare_windows",
    "save_sidecar",
    "load_sidecar",
]


def fill_missing(table: SeriesTable) -> SeriesTable:
    """Replace every missing cell with 0, leaving all other cells unchanged."""
    values = np.nan_to_num(table.values, nan=0.0)
    return table.with_values(values, lock=True)


def log1p_apply(matrix) -> np.ndarray:
    """Elementwise ln(x + 1); rejects negative entries."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size and np.nanmin(matrix) < 0:
        raise ValueError("log1p transform requires nonnegative values")
    return np.log1p(matrix)


def log1p_invert(matrix) -> np.ndarray:
    """Elementwise exp(x) - 1, clamped below at 0 (views are nonnegative)."""
    return np.maximum(np.expm1(np.asarray(matrix, dtype=np.float64)), 0.0)


def iqr_clip(series) -> np.ndarray:
    """Clip one page's values into [max(0, Q1 - 1.5*IQR), Q3 + 1.5*IQR].

    Quartiles use linear interpolation between order statistics.
    """
    series = np.asarray(series, dtype=np.float64)
    q1, q3 = np.percentile(series, [25.0, 75.0])
    iqr = q3 - q1
    lo = max(q1 - 1.5 * iqr, 0.0)
    hi = q3 + 1.5 * iqr
    return np.clip(series, lo, hi)


def iqr_clip_rows(matrix) -> np.ndarray:
    """Row-wise ``iqr_clip`` over a pages x dates grid."""
    matrix = np.asarray(matrix, dtype=np.float64)
    q1, q3 = np.percentile(matrix, [25.0, 75.0], axis=1, keepdims=True)
    iqr = q3 - q1
    lo = np.maximum(q1 - 1.5 * iqr, 0.0)
    hi = q3 + 1.5 * iqr
    return np.clip(matrix, lo, hi)


@dataclass
class WindowSplit:
    """The five aligned training/validation/test slices of a panel.

    The three X matrices share one width so a single scaler fits them all;
    the two y matrices are horizon-wide and adjacent without overlap.
    ``ranges`` records the column span of each slice in the source table.
    """

    X_train: np.ndarray
    y_train: np.ndarray
    X_validate: np.ndarray
    y_validate: np.ndarray
    X_test: np.ndarray
    ranges: dict[str, tuple[int, int]]
    future_dates: list[dt.date]

    @property
    def horizon(self) -> int:
        return self.y_train.shape[1]

    def matrices(self) -> dict[str, np.ndarray]:
        return {
            "X_train": self.X_train,
            "y_train": self.y_train,
            "X_validate": self.X_validate,
            "y_validate": self.y_validate,
            "X_test": self.X_test,
        }


def make_windows(table: SeriesTable, horizon: int = 60) -> WindowSplit:
    """Slice a panel into the five aligned windows.

    With T date columns and horizon h: X_train = [0, T-2h), y_train =
    [T-2h, T-h), X_validate = [h, T-h), y_validate = [T-h, T) and
    X_test = [2h, T), so all X slices share width T-2h and X_test ends at
    the final column.  The future dates are the h days after the table.
    """
    T = table.n_dates
    h = int(horizon)
    if h < 1:
        raise ValueError("horizon must be at least 1")
    if T < 2 * h + 1:
        raise ValueError(f"table has {T} date columns; windowing needs at least {2 * h + 1}")
    ranges = {
        "X_train": (0, T - 2 * h),
        "y_train": (T - 2 * h, T - h),
        "X_validate": (h, T - h),
        "y_validate": (T - h, T),
        "X_test": (2 * h, T),
    }
    v = table.values
    future = [table.last_date + (i + 1) * ONE_DAY for i in range(h)]
    slices = {name: v[:, a:b] for name, (a, b) in ranges.items()}
    return WindowSplit(ranges=ranges, future_dates=future, **slices)


@dataclass
class ScalerParams:
    """Per-column extrema plus the target range of a min-max scaler."""

    mins: np.ndarray
    maxs: np.ndarray
    feature_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        lo, hi = self.feature_range
        if not hi > lo:
            raise ValueError(f"invalid target range {self.feature_range}")
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise ValueError("mins and maxs must be matching 1-D arrays")
        if np.any(self.maxs < self.mins):
            raise ValueError("per-column max below min")

    @property
    def n_columns(self) -> int:
        return self.mins.shape[0]

    def to_dict(self) -> dict:
        return {
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
            "range": list(self.feature_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(np.array(d["mins"]), np.array(d["maxs"]), tuple(d["range"]))


def fit_minmax(X, feature_range: tuple[float, float] = (0.0, 1.0)) -> ScalerParams:
    """Record per-column minima and maxima of a matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot fit scaler on an empty matrix")
    return ScalerParams(X.min(axis=0), X.max(axis=0), feature_range)


def _check_columns(X: np.ndarray, params: ScalerParams) -> None:
    if X.shape[1] != params.n_columns:
        raise ValueError(f"matrix has {X.shape[1]} columns, scaler expects {params.n_columns}")


def apply_minmax(X, params: ScalerParams) -> np.ndarray:
    """Map each column onto the target range; degenerate columns map to 0."""
    X = np.asarray(X, dtype=np.float64)
    _check_columns(X, params)
    lo, hi = params.feature_range
    span = params.maxs - params.mins
    degenerate = span == 0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = (X - params.mins) / safe_span * (hi - lo) + lo
    return np.where(degenerate, 0.0, scaled)


def invert_minmax(X, params: ScalerParams) -> np.ndarray:
    """Exact inverse of ``apply_minmax``; degenerate columns return their min."""
    X = np.asarray(X, dtype=np.float64)
    _check_columns(X, params)
    lo, hi = params.feature_range
    span = params.maxs - params.mins
    degenerate = span == 0
    raw = (X - lo) / (hi - lo) * span + params.mins
    return np.where(degenerate, params.mins, raw)


def scale_windows(split: WindowSplit, params: ScalerParams) -> WindowSplit:
    """Apply one fitted scaler to the three X slices; y slices pass through."""
    return dataclasses.replace(
        split,
        X_train=apply_minmax(split.X_train, params),
        X_validate=apply_minmax(split.X_validate, params),
        X_test=apply_minmax(split.X_test, params),
    )


def prepare_windows(
    table: SeriesTable,
    horizon: int = 60,
    feature_range: tuple[float, float] = (0.0, 1.0),
    clip_outliers: bool = False,
) -> tuple[SeriesTable, WindowSplit, ScalerParams]:
    """Run the full preprocessing pipeline on a raw panel.

    Returns the zero-filled views table (for medians and scoring truth),
    the window split with scaled X's and log-space y's, and the scaler
    fitted on X_train alone.
    """
    filled = fill_missing(table)
    modeling = filled.values
    if clip_outliers:
        modeling = iqr_clip_rows(modeling)
    logged = table.with_values(log1p_apply(modeling), lock=True)
    split = make_windows(logged, horizon)
    scaler = fit_minmax(split.X_train, feature_range)
    return filled, scale_windows(split, scaler), scaler


def save_sidecar(path, scaler: ScalerParams, split: WindowSplit) -> None:
    """Persist scaler parameters and window layout as a JSON sidecar."""
    doc = scaler.to_dict()
    doc["column_ranges"] = {k: list(v) for k, v in split.ranges.items()}
    doc["horizon"] = split.horizon
    doc["future_dates"] = [d.isoformat() for d in split.future_dates]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_sidecar(path) -> tuple[ScalerParams, dict[str, tuple[int, int]], list[dt.date]]:
    """Read back a sidecar: scaler, column ranges, future dates."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    scaler = ScalerParams.from_dict(doc)
    ranges = {k: tuple(v) for k, v in doc["column_ranges"].items()}
    future = [dt.date.fromisoformat(d) for d in doc["future_dates"]]
    return scaler, ranges, future
