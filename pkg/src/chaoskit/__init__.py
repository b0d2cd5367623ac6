"""Chaos diagnostics for scalar time series.

Delay embedding with false-nearest-neighbour dimension selection, the
maximal Lyapunov exponent from the stretching-factor curve, and the
determinism coefficient of the coarse-grained flow.
"""

from .embedding import EmbeddingParams, embed, estimate_lag, min_embedding_dim
from .lyapunov import auto_fit, fit_slope, stretching_factor
from .series import PriceSeries, ReturnSeries, load_csv, log_returns

__version__ = "0.1.0"

__all__ = ["PriceSeries", "ReturnSeries", "load_csv", "log_returns", "EmbeddingParams", "embed",
           "estimate_lag", "min_embedding_dim", "stretching_factor", "fit_slope", "auto_fit"]
