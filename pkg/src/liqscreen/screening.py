"""Mode-fit statistics and the calm-to-event switch screen for news.

An article is kept when its 5-minute bin starts or ends at a detected
Mode-1 to Mode-2 switch of its stock's fitted sequence on that day.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import jump_model
from .errors import NoIntradayNewsError
from .market_data import BinGrid, Panel, assign_bin, date_of_timestamp

logger = logging.getLogger(__name__)

NEWS_COLUMNS = ["timestamp", "ticker", "score", "confidence", "headline"]

JUMP_AT_START = "jump_at_start"
JUMP_AT_END = "jump_at_end"
BOTH = "both"

DEDUP_WINDOW_MS = 60_000


@dataclass(frozen=True)
class NewsArticle:
    """A timestamped headline, optionally carrying a vendor sentiment
    estimate (score in {-1, 0, 1}, confidence in [0, 100])."""

    timestamp: int
    ticker: str
    headline: str
    vendor_score: int | None = None
    vendor_confidence: float | None = None

    def __post_init__(self):
        if not self.headline:
            raise ValueError("headline must be non-empty")
        if self.vendor_score is not None and self.vendor_score not in (-1, 0, 1):
            raise ValueError("vendor_score must be -1, 0 or 1")
        if self.vendor_confidence is not None and not 0 <= self.vendor_confidence <= 100:
            raise ValueError("vendor_confidence must lie in [0, 100]")

    @property
    def composed_score(self) -> float | None:
        if self.vendor_score is None or self.vendor_confidence is None:
            return None
        return self.vendor_score * self.vendor_confidence

    @property
    def date(self) -> str:
        return date_of_timestamp(self.timestamp)


@dataclass
class TransitionMatrix:
    """Empirical mode transition frequencies; rows of unvisited modes are
    NaN (undefined)."""

    probs: np.ndarray
    counts: np.ndarray


@dataclass
class ModeStats:
    occupancy: np.ndarray
    transition: TransitionMatrix
    daily_jump_counts: dict
    avg_daily_jumps_per_stock: float


class FittedModes:
    """Mode fits for a set of days, addressable by (date, ticker)."""

    def __init__(self):
        self.days: dict[str, tuple[list[str], jump_model.ModeFit]] = {}

    def add(self, day: str, tickers: list[str], fit: jump_model.ModeFit) -> None:
        self.days[day] = (list(tickers), fit)

    def sequence(self, day: str, ticker: str) -> np.ndarray | None:
        entry = self.days.get(day)
        if entry is None:
            return None
        tickers, fit = entry
        try:
            row = tickers.index(ticker)
        except ValueError:
            return None
        return fit.modes[row]

    def iter_sequences(self):
        for day in sorted(self.days):
            tickers, fit = self.days[day]
            for row, ticker in enumerate(tickers):
                yield day, ticker, fit.modes[row]

    def save(self, outdir) -> None:
        """One spec-format fit directory per day under ``outdir``."""
        outdir = Path(outdir)
        for day in sorted(self.days):
            tickers, fit = self.days[day]
            jump_model.save_mode_fit(fit, day, tickers, outdir / day)

    @classmethod
    def load(cls, indir) -> "FittedModes":
        indir = Path(indir)
        out = cls()
        for sub in sorted(p for p in indir.iterdir() if p.is_dir()):
            day, tickers, fit = jump_model.load_mode_fit(sub)
            out.add(day, tickers, fit)
        return out


def fit_universe(panel: Panel, config: jump_model.JumpConfig,
                 days: list[str] | None = None) -> FittedModes:
    """Fit the jump model day by day on a stationarized panel.

    Each day gets its own deterministic seed derived from the config seed
    and its position in the sorted day list.
    """
    if not panel.stationarized:
        raise ValueError("fit the jump model on the stationarized panel")
    days = sorted(days) if days is not None else list(panel.dates)
    out = FittedModes()
    for i, day in enumerate(days):
        tickers, seqs = panel.day_sequences(day)
        if not tickers:
            logger.warning("no stocks present on %s; skipping", day)
            continue
        cfg = dataclasses.replace(config, rng_seed=config.rng_seed + i)
        out.add(day, tickers, jump_model.fit_day(seqs, cfg))
    return out


def mode_stats(fits: FittedModes, n_modes: int = 2) -> ModeStats:
    """Occupancy ratios, pooled transition matrix, and per-(day, stock)
    count of Mode-1 to Mode-2 jumps."""
    occupancy = np.zeros(n_modes)
    counts = np.zeros((n_modes, n_modes))
    daily = {}
    total_bins = 0
    for day, ticker, seq in fits.iter_sequences():
        total_bins += seq.size
        occupancy += np.bincount(seq - 1, minlength=n_modes)
        src, dst = seq[:-1] - 1, seq[1:] - 1
        np.add.at(counts, (src, dst), 1)
        daily[(day, ticker)] = int(np.sum((seq[:-1] == 1) & (seq[1:] == 2)))
    if total_bins == 0:
        raise ValueError("no fitted sequences")
    occupancy = occupancy / total_bins
    row_sums = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = counts / row_sums[:, None]
    probs[row_sums == 0] = np.nan
    avg = float(np.mean(list(daily.values()))) if daily else 0.0
    return ModeStats(occupancy, TransitionMatrix(probs, counts), daily, avg)


def dedup_news(articles: list[NewsArticle]) -> list[NewsArticle]:
    """Drop wire re-publications: same ticker and headline within 60
    seconds of a kept article, keeping the earliest."""
    kept = []
    last_seen: dict[tuple[str, str], int] = {}
    for art in sorted(articles, key=lambda a: (a.timestamp, a.ticker, a.headline)):
        key = (art.ticker, art.headline)
        prev = last_seen.get(key)
        if prev is not None and art.timestamp - prev <= DEDUP_WINDOW_MS:
            continue
        last_seen[key] = art.timestamp
        kept.append(art)
    return kept


@dataclass
class ScreeningResult:
    """Outcome of the switch screen: the selected subset, the intraday
    universe it was drawn from, and per-article exclusion reasons."""

    selected: list[tuple[NewsArticle, int, str]]
    intraday: list[NewsArticle]
    excluded: list[tuple[NewsArticle, str]] = field(default_factory=list)

    @property
    def selected_articles(self) -> list[NewsArticle]:
        return [art for art, _, _ in self.selected]


def select_impactful(news: list[NewsArticle], fits: FittedModes,
                     grid: BinGrid | None = None) -> ScreeningResult:
    """Keep the articles published next to a Mode-1 to Mode-2 switch.

    An article in bin t qualifies if the switch happens at the bin's start
    (modes t-1, t are 1, 2) or at its end (modes t, t+1 are 1, 2). Articles
    outside the trimmed session or without a fitted (ticker, day) are
    excluded with a reason.
    """
    grid = grid or BinGrid()
    selected = []
    intraday = []
    excluded = []
    for art in dedup_news(news):
        t = assign_bin(art.timestamp, grid)
        if t is None:
            excluded.append((art, "outside trimmed session"))
            continue
        intraday.append(art)
        seq = fits.sequence(art.date, art.ticker)
        if seq is None:
            excluded.append((art, "no fitted modes for (ticker, day)"))
            continue
        at_start = t >= 2 and seq[t - 2] == 1 and seq[t - 1] == 2
        at_end = t <= len(seq) - 1 and seq[t - 1] == 1 and seq[t] == 2
        if at_start and at_end:
            selected.append((art, t, BOTH))
        elif at_start:
            selected.append((art, t, JUMP_AT_START))
        elif at_end:
            selected.append((art, t, JUMP_AT_END))
    return ScreeningResult(selected=selected, intraday=intraday, excluded=excluded)


def selection_ratio(news: list[NewsArticle], selected: list[NewsArticle]) -> float:
    """Fraction of intraday articles selected; ``news`` is the intraday
    universe the selection was drawn from."""
    if not news:
        raise NoIntradayNewsError("no intraday news; selection ratio undefined")
    keys = {(a.timestamp, a.ticker, a.headline) for a in news}
    for art in selected:
        if (art.timestamp, art.ticker, art.headline) not in keys:
            raise ValueError("selected articles must be a subset of news")
    return len(selected) / len(news)


def read_news(path) -> list[NewsArticle]:
    """Read line-delimited news records
    (timestamp,ticker,score,confidence,headline; headline last, quoted)."""
    articles = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            score = row.get("score", "")
            conf = row.get("confidence", "")
            articles.append(NewsArticle(
                timestamp=int(row["timestamp"]),
                ticker=row["ticker"],
                headline=row["headline"],
                vendor_score=int(score) if score not in ("", None) else None,
                vendor_confidence=float(conf) if conf not in ("", None) else None,
            ))
    return articles


def write_news(path, articles: list[NewsArticle], reasons: dict | None = None) -> None:
    """Write news records; when ``reasons`` maps articles to screening
    reasons an extra selected_reason column is emitted."""
    cols = list(NEWS_COLUMNS)
    if reasons is not None:
        cols.append("selected_reason")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for art in articles:
            score = "" if art.vendor_score is None else str(art.vendor_score)
            conf = ("" if art.vendor_confidence is None
                    else format(art.vendor_confidence, "g"))
            headline = '"' + art.headline.replace('"', '""') + '"'
            row = [str(art.timestamp), art.ticker, score, conf, headline]
            if reasons is not None:
                row.append(reasons[art])
            fh.write(",".join(row) + "\n")


def write_selected(path, result: ScreeningResult) -> None:
    reasons = {art: reason for art, _, reason in result.selected}
    write_news(path, [a for a, _, _ in result.selected], reasons)
