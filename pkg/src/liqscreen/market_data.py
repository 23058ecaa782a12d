"""Trade/quote parsing, 5-minute binning and per-bin liquidity variables.

Input files are UTC-millisecond timestamped CSVs laid out as
``<root>/<YYYY-MM-DD>/trades.csv`` and ``<root>/<YYYY-MM-DD>/quotes.csv``.
Each (stock, day) becomes a sequence of per-bin 4-vectors
(spread in ticks, traded value, volatility, book size).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import EmptyUniverseError, MalformedRowError, MissingInputError

logger = logging.getLogger(__name__)

VAR_COLUMNS = ["phi", "V", "sigma", "B"]
SIGMA_IDX = VAR_COLUMNS.index("sigma")
V_IDX = VAR_COLUMNS.index("V")

TRADE_COLUMNS = ["timestamp", "ticker", "price", "size"]
QUOTE_COLUMNS = ["timestamp", "ticker", "bid_price", "ask_price", "bid_size", "ask_size"]

MS_PER_SEC = 1_000
MS_PER_MIN = 60_000
MS_PER_DAY = 86_400_000

_DATE_DIR = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def _parse_hhmm(text: str) -> int:
    """Wall-clock 'HH:MM' to minutes since midnight."""
    hh, mm = text.split(":")
    return int(hh) * 60 + int(mm)


@dataclass(frozen=True)
class BinGrid:
    """Equal 5-minute bins inside the truncated core trading session.

    Bin ``t`` (1-based) covers the half-open interval
    ``[open + trim + (t-1)*width, open + trim + t*width)``.
    """

    session_open: str = "09:30"
    session_close: str = "16:00"
    trim_min: int = 15
    bin_min: int = 5

    def __post_init__(self):
        span = _parse_hhmm(self.session_close) - _parse_hhmm(self.session_open)
        usable = span - 2 * self.trim_min
        if usable <= 0 or usable % self.bin_min != 0:
            raise ValueError(
                f"session of {span} min with trim {self.trim_min} is not an "
                f"integer number of {self.bin_min}-minute bins"
            )

    @property
    def n_bins(self) -> int:
        span = _parse_hhmm(self.session_close) - _parse_hhmm(self.session_open)
        return (span - 2 * self.trim_min) // self.bin_min

    @property
    def start_ms(self) -> int:
        """First binned millisecond, measured from midnight."""
        return (_parse_hhmm(self.session_open) + self.trim_min) * MS_PER_MIN

    @property
    def end_ms(self) -> int:
        """End (exclusive) of the last bin, measured from midnight."""
        return self.start_ms + self.n_bins * self.bin_min * MS_PER_MIN

    @property
    def close_ms(self) -> int:
        """Session close, measured from midnight."""
        return _parse_hhmm(self.session_close) * MS_PER_MIN

    @property
    def seconds_per_bin(self) -> int:
        return self.bin_min * 60


def date_of_timestamp(ts_ms: int) -> str:
    """UTC calendar date of a millisecond epoch timestamp."""
    return (date(1970, 1, 1) + timedelta(days=int(ts_ms) // MS_PER_DAY)).isoformat()


def day_start_ms(day: str) -> int:
    """Millisecond epoch of midnight UTC on ``day`` (YYYY-MM-DD)."""
    return (date.fromisoformat(day) - date(1970, 1, 1)).days * MS_PER_DAY


def assign_bin(ts_ms: int, grid: BinGrid) -> int | None:
    """Map a timestamp to its 1-based bin index, or None outside the
    trimmed session (including the trimmed head/tail)."""
    ms_in_day = int(ts_ms) % MS_PER_DAY
    if ms_in_day < grid.start_ms or ms_in_day >= grid.end_ms:
        return None
    return (ms_in_day - grid.start_ms) // (grid.bin_min * MS_PER_MIN) + 1


def realized_volatility(second_prices: np.ndarray) -> float:
    """Default per-bin volatility: sqrt of summed squared log-returns of
    the 1-second last-price grid. NaN entries (seconds before the first
    observed trade) are skipped."""
    px = second_prices[~np.isnan(second_prices)]
    if px.size < 2:
        return 0.0
    r = np.diff(np.log(px))
    return float(np.sqrt(np.sum(r * r)))


def _require_columns(df: pd.DataFrame, cols: list[str], path) -> None:
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise MalformedRowError(path, 1, f"missing columns {missing}")


def _first_bad_line(mask: np.ndarray) -> int:
    # +2: 1-based line numbering with a header line
    return int(np.flatnonzero(mask)[0]) + 2


def read_trades(path) -> pd.DataFrame:
    """Load and validate a trades CSV (timestamp,ticker,price,size)."""
    df = pd.read_csv(path)
    _require_columns(df, TRADE_COLUMNS, path)
    for col in ("timestamp", "price", "size"):
        vals = pd.to_numeric(df[col], errors="coerce")
        bad = vals.isna().to_numpy()
        if bad.any():
            raise MalformedRowError(path, _first_bad_line(bad), f"non-numeric {col}")
        df[col] = vals
    bad = ~(df["price"].to_numpy() > 0)
    if bad.any():
        raise MalformedRowError(path, _first_bad_line(bad), "price must be > 0")
    bad = ~(df["size"].to_numpy() > 0)
    if bad.any():
        raise MalformedRowError(path, _first_bad_line(bad), "size must be > 0")
    df["timestamp"] = df["timestamp"].astype(np.int64)
    decreasing = df.groupby("ticker")["timestamp"].diff().to_numpy() < 0
    if decreasing.any():
        raise MalformedRowError(
            path, _first_bad_line(decreasing), "timestamps decrease within ticker"
        )
    return df


def read_quotes(path) -> pd.DataFrame:
    """Load and validate a quotes CSV; crossed quotes (ask < bid) are
    dropped, counted and warned about rather than rejected."""
    df = pd.read_csv(path)
    _require_columns(df, QUOTE_COLUMNS, path)
    for col in ("timestamp", "bid_price", "ask_price", "bid_size", "ask_size"):
        vals = pd.to_numeric(df[col], errors="coerce")
        bad = vals.isna().to_numpy()
        if bad.any():
            raise MalformedRowError(path, _first_bad_line(bad), f"non-numeric {col}")
        df[col] = vals
    bad = ~(df["bid_price"].to_numpy() > 0)
    if bad.any():
        raise MalformedRowError(path, _first_bad_line(bad), "bid_price must be > 0")
    bad = (df["bid_size"].to_numpy() < 0) | (df["ask_size"].to_numpy() < 0)
    if bad.any():
        raise MalformedRowError(path, _first_bad_line(bad), "negative quote size")
    df["timestamp"] = df["timestamp"].astype(np.int64)
    decreasing = df.groupby("ticker")["timestamp"].diff().to_numpy() < 0
    if decreasing.any():
        raise MalformedRowError(
            path, _first_bad_line(decreasing), "timestamps decrease within ticker"
        )
    crossed = df["ask_price"].to_numpy() < df["bid_price"].to_numpy()
    n_crossed = int(crossed.sum())
    if n_crossed:
        logger.warning("%s: skipped %d crossed quotes", path, n_crossed)
        df = df.loc[~crossed].reset_index(drop=True)
    return df


def _last_value_per_second(ts_ms, values, grid_start_ms, n_seconds):
    """Value of the last record at or before the end of each grid second.

    Seconds before the first record are NaN; later seconds carry the most
    recent observation forward, so records repeating the previous values
    leave the result unchanged.
    """
    boundaries = grid_start_ms + (np.arange(n_seconds, dtype=np.int64) + 1) * MS_PER_SEC
    # strictly-before the boundary: a record on the next second's first ms
    # belongs to the next second
    idx = np.searchsorted(ts_ms, boundaries, side="left") - 1
    out = np.full(n_seconds, np.nan)
    have = idx >= 0
    out[have] = values[idx[have]]
    return out


def _row_mean(grid_rows: np.ndarray) -> np.ndarray:
    """Row-wise mean ignoring NaN, NaN for all-NaN rows (no warnings)."""
    valid = ~np.isnan(grid_rows)
    cnt = valid.sum(axis=1)
    total = np.where(valid, grid_rows, 0.0).sum(axis=1)
    return np.where(cnt > 0, total / np.maximum(cnt, 1), np.nan)


def _resolve_tick(tick_size, ticker: str) -> float:
    if isinstance(tick_size, dict):
        tick = float(tick_size.get(ticker, tick_size.get("default", 0.01)))
    else:
        tick = float(tick_size)
    if tick <= 0:
        raise ValueError(f"tick size for {ticker} must be > 0")
    return tick


def compute_bin_features(
    trades: pd.DataFrame,
    quotes: pd.DataFrame,
    grid: BinGrid,
    tick_size=0.01,
    vol_estimator=realized_volatility,
    day: str | None = None,
) -> pd.DataFrame:
    """Per-(ticker, bin) liquidity variables for one trading day.

    phi: mean over the bin's seconds of the last observed spread, in ticks.
    V:   sum of price*size over the bin's trades.
    sigma: ``vol_estimator`` applied to the bin's 1-second last-price grid.
    B:   mean over seconds of (bid_size + ask_size) / 2 at the best level.

    A bin with zero trades, or with no quote observed at or before any of
    its seconds, is flagged missing (its variables are NaN).
    """
    if day is None:
        stamps = pd.concat([trades["timestamp"], quotes["timestamp"]])
        if stamps.empty:
            raise ValueError("cannot infer the day from empty inputs")
        day = date_of_timestamp(int(stamps.iloc[0]))
    base = day_start_ms(day)
    grid_start = base + grid.start_ms
    n_bins = grid.n_bins
    spb = grid.seconds_per_bin
    n_seconds = n_bins * spb

    tickers = sorted(set(trades["ticker"]) | set(quotes["ticker"]))
    rows = []
    t_groups = dict(iter(trades.groupby("ticker"))) if len(trades) else {}
    q_groups = dict(iter(quotes.groupby("ticker"))) if len(quotes) else {}

    for ticker in tickers:
        tick = _resolve_tick(tick_size, ticker)
        tdf = t_groups.get(ticker)
        qdf = q_groups.get(ticker)

        phi = np.full(n_bins, np.nan)
        depth = np.full(n_bins, np.nan)
        quote_ok = np.zeros(n_bins, dtype=bool)
        if qdf is not None and len(qdf):
            q_ts = qdf["timestamp"].to_numpy()
            spread_sec = _last_value_per_second(
                q_ts,
                (qdf["ask_price"] - qdf["bid_price"]).to_numpy(float),
                grid_start,
                n_seconds,
            ).reshape(n_bins, spb)
            depth_sec = _last_value_per_second(
                q_ts,
                ((qdf["bid_size"] + qdf["ask_size"]) / 2.0).to_numpy(float),
                grid_start,
                n_seconds,
            ).reshape(n_bins, spb)
            quote_ok = ~np.all(np.isnan(spread_sec), axis=1)
            phi = _row_mean(spread_sec) / tick
            depth = _row_mean(depth_sec)

        turnover = np.zeros(n_bins)
        trade_ok = np.zeros(n_bins, dtype=bool)
        vol = np.full(n_bins, np.nan)
        if tdf is not None and len(tdf):
            tr_ts = tdf["timestamp"].to_numpy()
            in_grid = (tr_ts >= grid_start) & (tr_ts < grid_start + n_seconds * MS_PER_SEC)
            bins = (tr_ts[in_grid] - grid_start) // (grid.bin_min * MS_PER_MIN)
            value = (tdf["price"] * tdf["size"]).to_numpy(float)[in_grid]
            turnover = np.bincount(bins, weights=value, minlength=n_bins)
            trade_ok = np.bincount(bins, minlength=n_bins) > 0
            px_sec = _last_value_per_second(
                tr_ts, tdf["price"].to_numpy(float), grid_start, n_seconds
            ).reshape(n_bins, spb)
            for b in np.flatnonzero(trade_ok):
                vol[b] = vol_estimator(px_sec[b])

        ok = trade_ok & quote_ok
        for b in range(n_bins):
            if ok[b]:
                rows.append((day, ticker, b + 1, phi[b], turnover[b], vol[b], depth[b], 0))
            else:
                rows.append((day, ticker, b + 1, np.nan, np.nan, np.nan, np.nan, 1))

    return pd.DataFrame(
        rows, columns=["date", "ticker", "bin"] + VAR_COLUMNS + ["missing"]
    )


@dataclass
class Panel:
    """A (day, stock, bin) panel of liquidity 4-vectors.

    ``values`` is (n_dates, n_tickers, T, 4) with NaN at missing bins of
    the raw panel (stationarized panels carry the neutral 0 instead);
    ``missing`` flags the bins, ``present`` flags loaded stock-days.
    """

    dates: list[str]
    tickers: list[str]
    values: np.ndarray
    missing: np.ndarray
    present: np.ndarray
    stationarized: bool = False
    drop_log: list = field(default_factory=list)

    @property
    def n_bins(self) -> int:
        return self.values.shape[2]

    def day_sequences(self, day: str) -> tuple[list[str], np.ndarray]:
        """Tickers present on ``day`` and their (N, T, 4) value block."""
        d = self.dates.index(day)
        keep = np.flatnonzero(self.present[d])
        return [self.tickers[s] for s in keep], self.values[d, keep]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for d, day in enumerate(self.dates):
            for s, ticker in enumerate(self.tickers):
                if not self.present[d, s]:
                    continue
                for b in range(self.n_bins):
                    rows.append(
                        (day, ticker, b + 1, *self.values[d, s, b], int(self.missing[d, s, b]))
                    )
        df = pd.DataFrame(rows, columns=["date", "ticker", "bin"] + VAR_COLUMNS + ["missing"])
        if self.stationarized:
            df["stationarized"] = 1
        return df

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "Panel":
        dates = sorted(df["date"].astype(str).unique())
        tickers = sorted(df["ticker"].astype(str).unique())
        n_bins = int(df["bin"].max())
        stationarized = "stationarized" in df.columns
        fill = 0.0 if stationarized else np.nan
        values = np.full((len(dates), len(tickers), n_bins, 4), np.nan)
        missing = np.ones((len(dates), len(tickers), n_bins), dtype=bool)
        present = np.zeros((len(dates), len(tickers)), dtype=bool)
        d_idx = {v: i for i, v in enumerate(dates)}
        s_idx = {v: i for i, v in enumerate(tickers)}
        d = df["date"].astype(str).map(d_idx).to_numpy()
        s = df["ticker"].astype(str).map(s_idx).to_numpy()
        b = df["bin"].to_numpy(int) - 1
        values[d, s, b] = df[VAR_COLUMNS].to_numpy(float)
        missing[d, s, b] = df["missing"].to_numpy(int).astype(bool)
        present[d, s] = True
        if stationarized:
            values[np.isnan(values)] = fill
        values[missing & present[:, :, None]] = fill
        return cls(dates, tickers, values, missing, present, stationarized=stationarized)


def load_universe(
    root,
    date_range: tuple[str, str] | None = None,
    grid: BinGrid | None = None,
    tick_size=0.01,
    vol_estimator=realized_volatility,
    max_missing_frac: float = 0.20,
) -> Panel:
    """Load every ``<root>/<YYYY-MM-DD>/`` day into a Panel.

    A stock whose day has more than ``max_missing_frac`` missing bins is
    dropped for that day and recorded in ``panel.drop_log``.
    """
    grid = grid or BinGrid()
    root = Path(root)
    if not root.is_dir():
        raise MissingInputError(f"no input directory {root}")
    days = sorted(p.name for p in root.iterdir() if p.is_dir() and _DATE_DIR.match(p.name))
    if date_range is not None:
        lo, hi = date_range
        days = [d for d in days if lo <= d <= hi]
    if not days:
        raise EmptyUniverseError(f"no input files under {root}")

    frames = []
    for day in days:
        tpath = root / day / "trades.csv"
        qpath = root / day / "quotes.csv"
        for p in (tpath, qpath):
            if not p.exists():
                raise MissingInputError(f"missing input file {p}")
        frames.append(
            compute_bin_features(
                read_trades(tpath), read_quotes(qpath), grid,
                tick_size=tick_size, vol_estimator=vol_estimator, day=day,
            )
        )

    df = pd.concat(frames, ignore_index=True)
    panel = Panel.from_frame(df)

    n_bins = panel.n_bins
    drop_log = []
    for d, day in enumerate(panel.dates):
        for s, ticker in enumerate(panel.tickers):
            if not panel.present[d, s]:
                continue
            n_miss = int(panel.missing[d, s].sum())
            if n_miss > max_missing_frac * n_bins:
                panel.present[d, s] = False
                panel.values[d, s] = np.nan
                panel.missing[d, s] = True
                drop_log.append((day, ticker, n_miss))
                logger.info("dropped %s %s: %d/%d missing bins", day, ticker, n_miss, n_bins)
    panel.drop_log = drop_log
    if not panel.present.any():
        raise EmptyUniverseError("every stock-day was dropped for missing data")
    return panel
