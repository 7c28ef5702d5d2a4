"""Combining the two LSTM models and merging them with the five medians.

The LSTM pair is averaged in log1p space by default (the space the models
are trained in); a views-space switch exists for sensitivity checks.  The
final prediction is the cellwise median of six candidates: the five
median forecasts plus the averaged LSTM forecast.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .baselines import Forecast, median_combine
from .transform import log1p_invert

__all__ = ["EnsembleInputs", "average_lstm_pair", "final_forecast"]


def average_lstm_pair(
    pred_train_model: np.ndarray,
    pred_validate_model: np.ndarray,
    pages: list[str],
    dates: list[dt.date],
    space: str = "log1p",
    label: str = "lstm",
) -> Forecast:
    """Average the two models' predictions and return a views-space forecast.

    Both inputs are log1p-space grids.  space="log1p" averages before
    inverting; space="views" inverts each first, then averages.
    """
    a = np.asarray(pred_train_model, dtype=np.float64)
    b = np.asarray(pred_validate_model, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"prediction shapes differ: {a.shape} vs {b.shape}")
    if space == "log1p":
        views = log1p_invert((a + b) / 2.0)
    elif space == "views":
        views = (log1p_invert(a) + log1p_invert(b)) / 2.0
    else:
        raise ValueError(f"unknown averaging space {space!r}")
    return Forecast(list(pages), list(dates), views, label)


@dataclass
class EnsembleInputs:
    """The six aligned candidates of the final combine."""

    lstm_forecast: Forecast
    median_forecasts: list[Forecast]

    def __post_init__(self):
        if len(self.median_forecasts) != 5:
            raise ValueError(f"expected 5 median forecasts, got {len(self.median_forecasts)}")
        ref = self.lstm_forecast
        for f in self.median_forecasts:
            if f.values.shape != ref.values.shape or f.dates != ref.dates:
                raise ValueError(f"forecast {f.label!r} is not aligned with the LSTM grid")


def final_forecast(inputs: EnsembleInputs, label: str = "final") -> Forecast:
    """Cellwise median of the five medians and the LSTM forecast."""
    combined = median_combine(
        inputs.median_forecasts + [inputs.lstm_forecast], label=label
    )
    combined.values = np.maximum(combined.values, 0.0)
    return combined
