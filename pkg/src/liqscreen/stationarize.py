"""Cross-day log-normalization removing intraday seasonality.

Each raw observation is replaced by
``(log o - mean_days(log o)) / IQR_days(log o)`` per (stock, variable,
bin-of-day), so every variable of every stock lives on a comparable scale.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .market_data import Panel

logger = logging.getLogger(__name__)

SCALE_EPS = 1e-8


@dataclass
class SeasonalProfile:
    """Per (stock, bin, variable) cross-day location/scale of log values.

    Entries with fewer than 2 usable days are absent (NaN). ``scale_std``
    backs the degenerate-IQR fallback; ``floor`` holds the smallest
    positive raw value per (stock, variable), applied before taking logs.
    """

    tickers: list[str]
    location: np.ndarray   # (S, T, 4)
    scale_iqr: np.ndarray  # (S, T, 4)
    scale_std: np.ndarray  # (S, T, 4)
    n_days: np.ndarray     # (S, T, 4)
    floor: np.ndarray      # (S, 4)


def _positive_floor(panel: Panel) -> np.ndarray:
    vals = np.where(panel.missing[..., None], np.nan, panel.values)
    pos = np.where(vals > 0, vals, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmin(pos, axis=(0, 2))  # (S, 4)


def _log_values(panel: Panel, floor: np.ndarray) -> np.ndarray:
    """(D, S, T, 4) log values, NaN at missing bins; raw zeros floored at
    the smallest positive value seen for the (stock, variable)."""
    vals = np.where(panel.missing[..., None], np.nan, panel.values)
    floored = np.maximum(vals, floor[None, :, None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        logs = np.log(floored)
    logs[~np.isfinite(logs)] = np.nan
    return logs


def fit_profile(panel: Panel) -> SeasonalProfile:
    """Estimate per-(stock, variable, bin) cross-day location and scale."""
    if panel.stationarized:
        raise ValueError("profile must be fitted on a raw panel")
    floor = _positive_floor(panel)
    logs = _log_values(panel, floor)  # (D, S, T, 4)
    n_days = (~np.isnan(logs)).sum(axis=0)  # (S, T, 4)
    enough = n_days >= 2

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        location = np.nanmean(logs, axis=0)
        q75, q25 = np.nanpercentile(logs, [75, 25], axis=0)
        scale_std = np.nanstd(logs, axis=0, ddof=1)
    scale_iqr = q75 - q25
    location[~enough] = np.nan
    scale_iqr[~enough] = np.nan
    scale_std[~enough] = np.nan

    return SeasonalProfile(
        tickers=list(panel.tickers),
        location=location,
        scale_iqr=scale_iqr,
        scale_std=scale_std,
        n_days=n_days,
        floor=floor,
    )


def apply(panel: Panel, profile: SeasonalProfile) -> Panel:
    """Stationarize a raw panel against a fitted profile.

    Missing bins and bins without a profile entry become the neutral value
    0 and stay flagged missing. A degenerate IQR falls back to the
    cross-day standard deviation, then to an output of 0.
    """
    if panel.stationarized:
        raise ValueError("panel is already stationarized")
    lacking = [t for t in panel.tickers if t not in profile.tickers]
    if lacking:
        raise ValueError(f"profile lacks tickers {lacking}")
    sel = np.array([profile.tickers.index(t) for t in panel.tickers])
    location = profile.location[sel]
    scale = np.where(
        profile.scale_iqr[sel] >= SCALE_EPS, profile.scale_iqr[sel], profile.scale_std[sel]
    )
    usable_scale = scale >= SCALE_EPS

    logs = _log_values(panel, profile.floor[sel])  # (D, S, T, 4)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (logs - location[None]) / scale[None]
    z = np.where(usable_scale[None], z, 0.0)
    defined = ~np.isnan(logs) & ~np.isnan(location[None])
    values = np.where(defined, z, 0.0)
    values[np.isnan(values)] = 0.0

    # a bin whose profile entry is absent is imputed on every day and
    # remains flagged
    absent_bin = np.isnan(location).any(axis=2)  # (S, T)
    missing = panel.missing | absent_bin[None]

    return Panel(
        dates=list(panel.dates),
        tickers=list(panel.tickers),
        values=values,
        missing=missing,
        present=panel.present.copy(),
        stationarized=True,
    )
