"""Spatial Pearson correlation maps and the autocorrelation function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .cube import ActivityCube, GridSpec


class AcfUndefinedError(ValueError):
    pass


def _pearson_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Pearson coefficient of ``a`` (..., n) against ``b`` (n,).

    Population normalisation cancels in the ratio, so centred sums are used
    directly. Rows where either side is constant come back as NaN.
    """
    ac = a - a.mean(axis=-1, keepdims=True)
    bc = b - b.mean()
    sab = (ac * bc).sum(axis=-1)
    saa = (ac * ac).sum(axis=-1)
    sbb = (bc * bc).sum()
    # exact constancy test; centred sums of a constant need not be exactly zero
    const = (a.max(axis=-1) == a.min(axis=-1)) | (b.max() == b.min())
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = sab / np.sqrt(saa * sbb)
    rho = np.clip(rho, -1.0, 1.0)
    return np.where(const, np.nan, rho)


def pearson(a, b) -> float | None:
    """Pearson correlation of two equal-length sequences.

    Returns ``None`` (undefined) when either sequence is constant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
        raise ValueError(f"pearson needs two 1-D sequences of equal length, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise ValueError("pearson needs at least 2 points")
    rho = float(_pearson_rows(a, b))
    return None if np.isnan(rho) else rho


@dataclass(frozen=True, eq=False)
class CorrelationMap:
    """Correlation of every cell's series with a target cell.

    ``rho`` is a masked array; masked entries are undefined (a constant series
    on either side).
    """

    target: tuple[int, int]
    grid: GridSpec
    rho: np.ma.MaskedArray

    def value(self, row: int, col: int) -> float | None:
        if self.rho.mask[row, col]:
            return None
        return float(self.rho[row, col])

    def to_csv(self, fh: TextIO) -> None:
        fh.write("row,col,rho\n")
        for r in range(self.grid.rows):
            for c in range(self.grid.cols):
                v = self.value(r, c)
                fh.write(f"{r},{c},{'' if v is None else repr(v)}\n")


def spatial_corr_map(cube: ActivityCube, target: tuple[int, int]) -> CorrelationMap:
    r0, c0 = target
    if not (0 <= r0 < cube.grid.rows and 0 <= c0 < cube.grid.cols):
        raise ValueError(f"target {target} outside grid {cube.grid.rows}x{cube.grid.cols}")
    if cube.n_bins < 2:
        raise ValueError("correlation needs at least 2 time bins")
    rho = _pearson_rows(cube.data, cube.data[r0, c0])
    return CorrelationMap((r0, c0), cube.grid, np.ma.masked_invalid(rho))


@dataclass(frozen=True, eq=False)
class AcfResult:
    lags: np.ndarray
    gamma: np.ndarray
    step_ms: int | None = None
    denominator: str = "overlap"

    def to_csv(self, fh: TextIO) -> None:
        fh.write("lag,gamma\n")
        for lag, g in zip(self.lags.tolist(), self.gamma.tolist()):
            fh.write(f"{lag},{'' if g != g else repr(g)}\n")

    def argmax(self, lo: int = 1, hi: int | None = None) -> int:
        """Lag of the largest defined gamma within ``[lo, hi]`` (lowest lag on ties)."""
        hi = self.lags[-1] if hi is None else hi
        window = self.gamma[lo : hi + 1]
        if np.isnan(window).all():
            raise AcfUndefinedError(f"acf undefined at every lag in [{lo}, {hi}]")
        return int(lo + np.nanargmax(window))

    def peaks(self) -> np.ndarray:
        """Lags (>= 1) that are local maxima of gamma."""
        g = self.gamma
        inner = np.flatnonzero((g[1:-1] > g[:-2]) & (g[1:-1] >= g[2:])) + 1
        return self.lags[inner]


def acf(series, max_lag: int, denominator: str = "overlap", step_ms: int | None = None) -> AcfResult:
    """Autocorrelation ``gamma[0..max_lag]`` about the full-series mean.

    For lag ``tau`` the numerator is ``sum_{t>tau} (a_t - mean)(a_{t-tau} - mean)``.
    With ``denominator="overlap"`` (default) it is divided by the sum of
    squared deviations over the same ``t > tau`` range; an exactly periodic
    series then scores 1 at every multiple of its period. ``"full"`` divides
    by the sum over all ``T`` points instead, which bounds ``|gamma| <= 1`` but
    tapers long lags by roughly ``1 - tau/T``.

    A lag whose overlapping tail sits exactly at the mean has no defined
    overlap ratio and comes back as NaN.
    """
    a = np.asarray(series, dtype=float)
    if a.ndim != 1:
        raise ValueError("acf needs a 1-D series")
    T = len(a)
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if max_lag >= T:
        raise ValueError(f"max_lag {max_lag} must be smaller than the series length {T}")
    if denominator not in ("overlap", "full"):
        raise ValueError(f"unknown denominator {denominator!r}")
    if a.max() == a.min():
        raise AcfUndefinedError("acf undefined: constant series")
    d = a - a.mean()
    sq = d * d
    full = sq.sum()
    gamma = np.empty(max_lag + 1)
    gamma[0] = 1.0
    for tau in range(1, max_lag + 1):
        num = (d[tau:] * d[:-tau]).sum()
        den = full if denominator == "full" else sq[tau:].sum()
        gamma[tau] = num / den if den else np.nan
    return AcfResult(np.arange(max_lag + 1), gamma, step_ms, denominator)
