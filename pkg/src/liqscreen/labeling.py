"""Market-detrended post-publication returns and percentile label sets.

Bullish/bearish sets come from the tails of the detrended-return
distribution (Z sets); intersecting them with the switch screen gives the
liquidity-confirmed sets (N sets) used for sentiment training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InsufficientReturnsError
from .market_data import MS_PER_MIN, BinGrid, day_start_ms, read_trades
from .screening import NewsArticle

logger = logging.getLogger(__name__)

MIN_RETURNS = 100
THIN_UNIVERSE = 10


class PriceBook:
    """Last-trade price lookup per (date, ticker), capped at session close."""

    def __init__(self, grid: BinGrid | None = None):
        self.grid = grid or BinGrid()
        self._series: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
        self._tickers: dict[str, list[str]] = {}

    @classmethod
    def from_frames(cls, frames: dict[str, pd.DataFrame],
                    grid: BinGrid | None = None) -> "PriceBook":
        """Build from one trades DataFrame per date."""
        book = cls(grid)
        for day in sorted(frames):
            df = frames[day]
            for ticker, group in df.groupby("ticker"):
                ts = group["timestamp"].to_numpy(np.int64)
                px = group["price"].to_numpy(float)
                order = np.argsort(ts, kind="stable")
                book._series[(day, str(ticker))] = (ts[order], px[order])
            book._tickers[day] = sorted(map(str, df["ticker"].unique()))
        return book

    @classmethod
    def from_directory(cls, root, grid: BinGrid | None = None,
                       dates: list[str] | None = None) -> "PriceBook":
        root = Path(root)
        frames = {}
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            if dates is not None and sub.name not in dates:
                continue
            tpath = sub / "trades.csv"
            if tpath.exists():
                frames[sub.name] = read_trades(tpath)
        return cls.from_frames(frames, grid)

    def tickers(self, day: str) -> list[str]:
        return self._tickers.get(day, [])

    def price_at(self, day: str, ticker: str, ts_ms: int) -> float | None:
        """Last trade at or before ``ts_ms`` (clamped to session close)."""
        series = self._series.get((day, ticker))
        if series is None:
            return None
        close = day_start_ms(day) + self.grid.close_ms
        ts, px = series
        idx = np.searchsorted(ts, min(int(ts_ms), close), side="right") - 1
        if idx < 0:
            return None
        return float(px[idx])


@dataclass
class DetrendedReturn:
    """Post-publication return of the article's stock minus the
    equal-weight universe return over the same window."""

    article: NewsArticle
    horizon_min: int
    value: float
    thin_universe: bool = False


def post_news_return(article: NewsArticle, prices: PriceBook, horizon_min: int,
                     universe: list[str] | None = None) -> DetrendedReturn | None:
    """Detrended ``horizon_min``-minute return after publication, or None
    (dropped) when the article's stock has no usable price."""
    day = article.date
    t0 = article.timestamp
    t1 = t0 + horizon_min * MS_PER_MIN
    p0 = prices.price_at(day, article.ticker, t0)
    if p0 is None:
        logger.info("dropped %s@%d: no price at publication", article.ticker, t0)
        return None
    p1 = prices.price_at(day, article.ticker, t1)
    if p1 is None:
        return None
    own = p1 / p0 - 1.0

    tickers = universe if universe is not None else prices.tickers(day)
    rets = []
    for tk in tickers:
        q0 = prices.price_at(day, tk, t0)
        q1 = prices.price_at(day, tk, t1)
        if q0 is not None and q1 is not None:
            rets.append(q1 / q0 - 1.0)
    if not rets:
        return None
    thin = len(rets) < THIN_UNIVERSE
    if thin:
        logger.warning("universe of %d valid stocks at %s %d", len(rets), day, t0)
    market = float(np.mean(rets))
    return DetrendedReturn(article, horizon_min, own - market, thin_universe=thin)


@dataclass
class LabelSets:
    """Percentile label sets and their screened intersections.

    z_plus/z_minus hold the bullish/bearish tails of the return
    distribution; n_plus/n_minus are their intersections with the screened
    subset.
    """

    z_plus: set
    z_minus: set
    n_plus: set
    n_minus: set
    horizon_min: int
    tail_pct: float
    jump_penalty: float | None = None


def build_label_sets(news: list[NewsArticle], returns: dict[NewsArticle, float],
                     selected: list[NewsArticle] | set, horizon_min: int,
                     tail_pct: float, jump_penalty: float | None = None) -> LabelSets:
    """Tail label sets over the full intraday return distribution.

    ``returns`` must value every article in ``news``. Thresholds are
    linear-interpolation percentiles; an article on both thresholds (only
    possible with heavy ties or ``tail_pct`` = 50) joins the bullish side.
    """
    if not 0 < tail_pct <= 50:
        raise ValueError("tail_pct must lie in (0, 50]")
    missing = [a for a in news if a not in returns]
    if missing:
        raise ValueError(f"{len(missing)} articles lack returns")
    if len(news) < MIN_RETURNS:
        raise InsufficientReturnsError(
            f"{len(news)} returns < {MIN_RETURNS}; percentiles unstable"
        )
    vals = np.array([returns[a] for a in news])
    lo = np.percentile(vals, tail_pct)
    hi = np.percentile(vals, 100 - tail_pct)
    z_plus = {a for a in news if returns[a] >= hi}
    z_minus = {a for a in news if returns[a] <= lo and returns[a] < hi}
    screened = set(selected)
    return LabelSets(
        z_plus=z_plus,
        z_minus=z_minus,
        n_plus=screened & z_plus,
        n_minus=screened & z_minus,
        horizon_min=horizon_min,
        tail_pct=tail_pct,
        jump_penalty=jump_penalty,
    )


@dataclass
class LabeledCorpus:
    """Headlines tagged +1 (bullish) / -1 (bearish)."""

    headlines: list[str]
    labels: list[int]

    def __post_init__(self):
        if len(self.headlines) != len(self.labels):
            raise ValueError("headlines and labels must align")
        if any(l not in (-1, 1) for l in self.labels):
            raise ValueError("labels must be +1 or -1")

    def __len__(self):
        return len(self.headlines)


def to_corpus(sets: LabelSets, screened: bool = True) -> LabeledCorpus:
    """Training corpus from label sets; ``screened`` picks the N sets,
    otherwise the plain return-tail Z sets."""
    plus = sets.n_plus if screened else sets.z_plus
    minus = sets.n_minus if screened else sets.z_minus
    arts = sorted(plus, key=_article_key) + sorted(minus, key=_article_key)
    labels = [1] * len(plus) + [-1] * len(minus)
    return LabeledCorpus([a.headline for a in arts], labels)


def _article_key(a: NewsArticle):
    return (a.timestamp, a.ticker, a.headline)


def write_labels(path, sets: LabelSets, returns: dict[NewsArticle, float]) -> None:
    """Persist labeled articles with their set tag and detrended return."""
    tag_of = {}
    for tag, group in (("Zp", sets.z_plus), ("Zm", sets.z_minus)):
        for a in group:
            tag_of[a] = tag
    for tag, group in (("Np", sets.n_plus), ("Nm", sets.n_minus)):
        for a in group:
            tag_of[a] = tag
    with open(path, "w", newline="") as fh:
        fh.write("timestamp,ticker,set,detrended_return_h,headline\n")
        for a in sorted(tag_of, key=_article_key):
            headline = '"' + a.headline.replace('"', '""') + '"'
            fh.write(f"{a.timestamp},{a.ticker},{tag_of[a]},{returns[a]!r},{headline}\n")
