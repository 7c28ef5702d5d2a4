"""Forecast accuracy metrics: SMAPE (0-200 scale, zero convention) and MAE.

Both metrics flatten a pages x horizon grid and average over every term,
so a single aggregate number describes the whole panel.  MAE doubles as
the neural-network training loss (computed there on log-transformed data).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ScoreReport", "smape", "mae"]


@dataclass
class ScoreReport:
    """One metric evaluated over a prediction grid."""

    metric: str
    value: float
    n: int
    per_page: np.ndarray | None = field(default=None, repr=False)

    def to_json(self, timestamp: float | None = None) -> str:
        """Serialize as a single JSON line (metric, value, n, timestamp)."""
        stamp = time.time() if timestamp is None else timestamp
        return json.dumps(
            {"metric": self.metric, "value": self.value, "n": self.n, "timestamp": stamp}
        )

    def to_csv_row(self) -> str:
        return f"{self.metric},{self.value!r},{self.n}"


def _check_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty input")
    if not (np.isfinite(y_true).all() and np.isfinite(y_pred).all()):
        raise ValueError("non-finite entry in metric input")
    return y_true, y_pred


def smape_terms(y_true, y_pred) -> np.ndarray:
    """Per-term SMAPE contributions: 200*|y - p|/(|y| + |p|), 0 when both are 0.

    The ratio is formed before the 200 factor so each term stays within
    [0, 200] even for subnormal denominators.
    """
    y_true, y_pred = _check_pair(y_true, y_pred)
    denom = np.abs(y_true) + np.abs(y_pred)
    num = np.abs(y_true - y_pred)
    terms = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    terms *= 200.0
    return terms


def smape(y_true, y_pred, per_page: bool = False) -> ScoreReport:
    """Symmetric mean absolute percentage error over all terms.

    Reported in percentage points on the 0-200 scale; a term where the
    true and predicted values are both zero contributes exactly 0.
    """
    terms = smape_terms(y_true, y_pred)
    per = None
    if per_page and terms.ndim == 2:
        per = terms.mean(axis=1)
    return ScoreReport("smape", float(terms.mean()), terms.size, per)


def mae(y_true, y_pred, per_page: bool = False) -> ScoreReport:
    """Mean absolute error over all terms."""
    y_true, y_pred = _check_pair(y_true, y_pred)
    err = np.abs(y_true - y_pred)
    per = None
    if per_page and err.ndim == 2:
        per = err.mean(axis=1)
    return ScoreReport("mae", float(err.mean()), err.size, per)
