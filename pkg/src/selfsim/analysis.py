"""Binning, block aggregation, variance-time Hurst estimation and sample ACF."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregator import Trace
from .exceptions import DegenerateSeriesError, InsufficientDataError, SingularFitError

DEFAULT_TARGET_BINS = 2**14
MIN_BLOCKS_PER_SCALE = 10


@dataclass(frozen=True)
class BinnedSeries:
    """Bits per bin (framing included) over bins of ``bin_width`` seconds."""

    values: np.ndarray
    bin_width: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise InsufficientDataError("a binned series needs at least 2 values")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if np.any(values < 0):
            raise ValueError("bin values must be non-negative")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class VarianceTimePoint:
    log_m: float
    log_var_ratio: float


@dataclass(frozen=True)
class HurstEstimate:
    slope: float
    hurst: float
    r_squared: float
    points_used: int
    intercept: float = 0.0

    @classmethod
    def from_slope(cls, slope, r_squared, points_used, intercept=0.0):
        return cls(slope, 1.0 + slope / 2.0, r_squared, points_used, intercept)


def default_bin_width(t: Trace) -> float:
    """Trace span over 2**14, rounded to one significant figure."""
    if len(t) < 2:
        raise InsufficientDataError("need at least 2 packets to pick a bin width")
    span = float(t.arrival_times[-1] - t.arrival_times[0])
    if not span > 0:
        raise InsufficientDataError("trace has zero time span")
    raw = span / DEFAULT_TARGET_BINS
    exponent = math.floor(math.log10(raw))
    return float(round(raw / 10**exponent) * 10**exponent)


def bin_trace(t: Trace, bin_width: float, origin: float | None = None) -> BinnedSeries:
    """Framed bits per bin ``[origin + i*w, origin + (i+1)*w)``.

    Bins run from the first arrival up to the bin holding the last arrival.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if len(t) == 0:
        raise InsufficientDataError("empty trace")
    if origin is None:
        origin = float(t.arrival_times[0])
    idx = np.floor((t.arrival_times - origin) / bin_width).astype(np.int64)
    n_bins = int(idx[-1]) + 1
    if n_bins < 2:
        raise InsufficientDataError(
            f"trace spans fewer than 2 bins of width {bin_width:g} s"
        )
    values = np.bincount(idx, weights=t.framed_bits(), minlength=n_bins)
    return BinnedSeries(values, bin_width, origin)


def _as_values(x) -> np.ndarray:
    return x.values if isinstance(x, BinnedSeries) else np.asarray(x, dtype=np.float64)


def aggregate_series(x: BinnedSeries, m: int) -> BinnedSeries:
    """Means of consecutive non-overlapping blocks of ``m`` values; the remainder is dropped."""
    m = int(m)
    if m < 1:
        raise ValueError("block size must be at least 1")
    values = _as_values(x)
    n_blocks = values.size // m
    if n_blocks < 1:
        raise InsufficientDataError(f"block size {m} exceeds series length {values.size}")
    out = values[:n_blocks * m].reshape(n_blocks, m).mean(axis=1) if m > 1 else values.copy()
    if n_blocks < 2:
        raise InsufficientDataError(f"block size {m} leaves a single block")
    width = x.bin_width if isinstance(x, BinnedSeries) else 1.0
    origin = x.origin if isinstance(x, BinnedSeries) else 0.0
    return BinnedSeries(out, width * m, origin)


def default_scales(n: int, min_blocks: int = MIN_BLOCKS_PER_SCALE) -> list[int]:
    """Powers of two ``m`` with at least ``min_blocks`` blocks each."""
    scales = [1]
    while n // (scales[-1] * 2) >= min_blocks:
        scales.append(scales[-1] * 2)
    return scales


def _variance(v: np.ndarray, ddof: int) -> float:
    return float(np.var(v, ddof=ddof))


def variance_time_points(x: BinnedSeries, scales=None, ddof: int = 0) -> list[VarianceTimePoint]:
    """``(log10 m, log10 Var(X^(m)) / Var(X))`` for each scale ``m``.

    ``ddof=0`` (population variance) is the default; ``ddof=1`` exists for tests.
    """
    values = _as_values(x)
    if scales is None:
        scales = default_scales(values.size)
    base = _variance(values, ddof)
    if not base > 0:
        raise DegenerateSeriesError("series has zero variance")
    points = []
    for m in scales:
        m = int(m)
        if m < 1 or values.size // m < 2:
            raise InsufficientDataError(f"scale {m} leaves fewer than 2 blocks")
        agg = aggregate_series(BinnedSeries(values), m).values
        var = _variance(agg, ddof)
        ratio = var / base
        if m == 1:
            points.append(VarianceTimePoint(0.0, 0.0))
        elif ratio > 0:
            points.append(VarianceTimePoint(math.log10(m), math.log10(ratio)))
        else:
            raise DegenerateSeriesError(f"aggregated series at m={m} has zero variance")
    return points


def fit_slope(points) -> HurstEstimate:
    """Ordinary least squares of ``log_var_ratio`` on ``log_m``; ``H = 1 + slope/2``."""
    xs = np.array([p.log_m for p in points], dtype=np.float64)
    ys = np.array([p.log_var_ratio for p in points], dtype=np.float64)
    if xs.size < 2 or np.all(xs == xs[0]):
        raise SingularFitError("need at least 2 distinct log_m values")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    ss_tot = float(dy @ dy)
    resid = ys - (intercept + slope * xs)
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return HurstEstimate.from_slope(slope, min(max(r2, 0.0), 1.0), int(xs.size), intercept)


def autocorrelation(x: BinnedSeries, max_lag: int) -> np.ndarray:
    """Sample ACF ``rho(0..max_lag)`` normalised by the lag-0 sum of squares."""
    values = _as_values(x)
    max_lag = int(max_lag)
    if not 0 <= max_lag < values.size:
        raise InsufficientDataError(f"max_lag {max_lag} must be below series length {values.size}")
    d = values - values.mean()
    denom = float(d @ d)
    if not denom > 0:
        raise DegenerateSeriesError("series has zero variance")
    n = d.size
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for h in range(1, max_lag + 1):
        rho[h] = float(d[:n - h] @ d[h:]) / denom
    return rho


def select_fit_points(points, fit_min_m=None, fit_max_m=None):
    lo = -math.inf if fit_min_m is None else math.log10(fit_min_m) - 1e-12
    hi = math.inf if fit_max_m is None else math.log10(fit_max_m) + 1e-12
    return [p for p in points if lo <= p.log_m <= hi]


class BlockAggregator(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`aggregate_series` for 1-D series."""

    def __init__(self, m=2):
        self.m = m

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        values = check_array(X, ensure_2d=False, dtype=np.float64)
        return aggregate_series(BinnedSeries(values), self.m).values


class VarianceTimeHurst(BaseEstimator):
    """Variance-time Hurst estimator.

    ``fit`` accepts a :class:`Trace`, a :class:`BinnedSeries` or a 1-D array
    of per-bin counts. Scales default to powers of two keeping at least ten
    blocks; ``fit_min_m``/``fit_max_m`` restrict which scales enter the fit.

    Fitted attributes: ``series_``, ``scales_``, ``points_``, ``estimate_``,
    ``slope_``, ``hurst_``, ``r_squared_`` and ``acf_``.
    """

    def __init__(self, bin_width=None, scales=None, fit_min_m=None, fit_max_m=None,
                 max_lag=100):
        self.bin_width = bin_width
        self.scales = scales
        self.fit_min_m = fit_min_m
        self.fit_max_m = fit_max_m
        self.max_lag = max_lag

    def _series(self, X) -> BinnedSeries:
        if isinstance(X, Trace):
            width = self.bin_width or default_bin_width(X)
            return bin_trace(X, width)
        if isinstance(X, BinnedSeries):
            return X
        values = check_array(X, ensure_2d=False, dtype=np.float64, ensure_min_samples=2)
        return BinnedSeries(values.ravel(), self.bin_width or 1.0)

    def fit(self, X, y=None):
        series = self._series(X)
        scales = list(self.scales) if self.scales is not None else default_scales(len(series))
        points = variance_time_points(series, scales)
        used = select_fit_points(points, self.fit_min_m, self.fit_max_m)
        est = fit_slope(used)
        self.series_ = series
        self.scales_ = scales
        self.points_ = points
        self.fit_points_ = used
        self.estimate_ = est
        self.slope_ = est.slope
        self.hurst_ = est.hurst
        self.r_squared_ = est.r_squared
        lag = min(self.max_lag, len(series) - 1)
        self.acf_ = autocorrelation(series, lag)
        return self

    def residuals(self):
        """Observed minus fitted log variance ratio at every scale."""
        check_is_fitted(self, "estimate_")
        e = self.estimate_
        return np.array([p.log_var_ratio - (e.intercept + e.slope * p.log_m) for p in self.points_])

    def score(self, X=None, y=None):
        check_is_fitted(self, "estimate_")
        return self.r_squared_
