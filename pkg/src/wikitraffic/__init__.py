"""Multistep web-traffic forecasting: median baselines, a from-scratch
LSTM trained on log-scaled panels, and their median ensemble, scored
with SMAPE over a 60-day horizon."""

__version__ = "0.1.0"

from . import baselines, data, ensemble, metrics, neuralnet, transform

__all__ = [
    "baselines",
    "data",
    "ensemble",
    "metrics",
    "neuralnet",
    "transform",
    "__version__",
]
