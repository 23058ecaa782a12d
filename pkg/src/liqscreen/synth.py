"""Seeded synthetic trade/quote/news generator with planted liquidity
regimes, planted impactful news and a planted sentiment vocabulary.

Output follows the market_data/screening file formats and ships with a
ground-truth manifest (true per-bin modes, true per-article sentiment and
impact flags) so the full pipeline can be verified end to end without
proprietary feeds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .market_data import MS_PER_MIN, MS_PER_SEC, BinGrid, day_start_ms

logger = logging.getLogger(__name__)

BULLISH_WORDS = ["beat", "surge", "upgrade", "record", "soars", "approval",
                 "raises", "buyback", "wins"]
BEARISH_WORDS = ["miss", "recall", "lawsuit", "downgrade", "plunge", "fraud",
                 "cuts", "warns", "probe"]

_COMMON_NEUTRAL = [
    "announces", "update", "conference", "shares", "market", "report",
    "names", "launches", "statement", "quarterly", "meeting", "board",
    "chief", "officer", "plans", "partnership", "product", "division",
    "comments", "during", "interview", "program", "agreement", "schedule",
    "presents", "investors", "annual", "general", "results", "contract",
    "supplier", "analyst", "note", "coverage", "guidance", "event",
    "outlook", "media", "holdings", "group", "737", "q3", "q4", "series",
]


def _neutral_vocabulary(size: int = 3000) -> list[str]:
    """Common headline words first, then generated filler tokens, so
    rank-weighted sampling yields a realistic heavy-tailed vocabulary."""
    first = ["bar", "cor", "dan", "fel", "gor", "hal", "jin", "kol", "lam",
             "mer", "nor", "pal", "quin", "ras", "sol", "tor", "ulm", "ven",
             "wes", "yor", "ald", "bren", "cas", "dov", "ery"]
    second = ["den", "forth", "gate", "holm", "land", "mont", "ridge",
              "stone", "ton", "vale", "wick", "worth"]
    third = ["co", "inc", "corp", "tech", "sys", "net", "lab", "works",
             "dyne", "tron"]
    words = list(_COMMON_NEUTRAL)
    for a in first:
        for b in second:
            for c in third:
                if len(words) >= size:
                    return words
                words.append(a + b + c)
    return words


NEUTRAL_WORDS = _neutral_vocabulary()

# indices into (phi, V, sigma, B)
_PHI, _V, _SIGMA, _B = 0, 1, 2, 3


@dataclass
class SynthSpec:
    """Parameters of the synthetic market.

    Regime levels are log-space means/sds of the four per-bin liquidity
    variables; the event mode must have the higher volatility mean. News
    arrival rates are per stock-day; impactful articles force a calm-to-
    event switch in their bin and plant a signed price drift afterwards.
    """

    n_stocks: int = 20
    n_days: int = 30
    rng_seed: int = 7
    start_date: str = "2021-01-04"
    grid: BinGrid = field(default_factory=BinGrid)

    calm_log_mean: tuple = (
        math.log(1.4), math.log(2.0e5), math.log(0.003), math.log(600.0))
    event_log_mean: tuple = (
        math.log(2.2), math.log(6.0e5), math.log(0.0055), math.log(380.0))
    log_sd: tuple = (0.25, 0.5, 0.25, 0.3)
    stay_prob_calm: float = 0.985
    stay_prob_event: float = 0.80
    planted_switches: list = field(default_factory=list)  # (date, ticker, bin)
    # endogenous (no-news) calm-to-event switches drag the price too,
    # with a random sign; fattens the no-news return tails
    endogenous_drift_sd: float = 0.005

    neutral_rate: float = 4.0
    impactful_rate: float = 0.25
    bullish_words: list = field(default_factory=lambda: list(BULLISH_WORDS))
    bearish_words: list = field(default_factory=lambda: list(BEARISH_WORDS))
    neutral_words: list = field(default_factory=lambda: list(NEUTRAL_WORDS))
    neutral_zipf_exponent: float = 1.1
    drift_magnitude: float = 0.018
    drift_minutes: int = 15
    sentiment_noise_prob: float = 0.25
    vendor_flip_prob: float = 0.3

    trades_per_bin: float = 12.0
    quotes_per_bin: int = 6
    tick_size: float = 0.01
    market_vol: float = 0.002

    def validate(self) -> None:
        if self.n_stocks < 1 or self.n_days < 1:
            raise ValidationError("n_stocks and n_days must be >= 1")
        if self.event_log_mean[_SIGMA] <= self.calm_log_mean[_SIGMA]:
            raise ValidationError("event volatility mean must exceed calm mean")
        if self.drift_magnitude < 0:
            raise ValidationError("drift magnitude must be >= 0")
        if min(self.neutral_rate, self.impactful_rate) < 0:
            raise ValidationError("news arrival rates must be >= 0")
        if self.impactful_rate > 0 and not (self.bullish_words and self.bearish_words):
            raise ValidationError(
                "impactful news requires non-empty sentiment lexicons"
            )
        if not 0 <= self.stay_prob_calm <= 1 or not 0 <= self.stay_prob_event <= 1:
            raise ValidationError("stay probabilities must lie in [0, 1]")
        n_bins = self.grid.n_bins
        for day, ticker, b in self.planted_switches:
            if not 2 <= b <= n_bins:
                raise ValidationError(f"planted switch bin {b} outside 2..{n_bins}")
            if day not in self.dates():
                raise ValidationError(f"planted switch day {day} outside schedule")
            if ticker not in self.tickers():
                raise ValidationError(f"planted switch ticker {ticker} unknown")

    def dates(self) -> list[str]:
        out = []
        day = np.datetime64(self.start_date)
        while len(out) < self.n_days:
            if np.is_busday(day):
                out.append(str(day))
            day += 1
        return out

    def tickers(self) -> list[str]:
        return [f"S{i:03d}" for i in range(self.n_stocks)]


def gaussian_mode_panel(n_stocks: int, n_bins: int, mu_calm, mu_event, sd,
                        stay_calm: float, stay_event: float,
                        rng: np.random.Generator):
    """Directly drawn per-bin feature sequences with known modes.

    Returns (X, modes): X is (N, T, 4) with X[s, t] ~ Normal(mu_mode, sd)
    per coordinate, modes is (N, T) with values 1/2 from a two-state
    Markov chain started at its stationary distribution.
    """
    mu = np.array([mu_calm, mu_event], dtype=float)
    sd = np.asarray(sd, dtype=float)
    q12, q21 = 1.0 - stay_calm, 1.0 - stay_event
    p_event = q12 / (q12 + q21) if q12 + q21 > 0 else 0.0
    modes = np.empty((n_stocks, n_bins), dtype=np.int64)
    for s in range(n_stocks):
        m = 2 if rng.random() < p_event else 1
        for t in range(n_bins):
            modes[s, t] = m
            stay = stay_calm if m == 1 else stay_event
            if rng.random() >= stay:
                m = 3 - m
    noise = rng.standard_normal((n_stocks, n_bins, 4))
    x = mu[modes - 1] + noise * sd
    return x, modes


def _force_switch(modes: np.ndarray, b: int) -> None:
    """Force a calm-to-event switch at the start of 1-based bin ``b``."""
    i = b - 1
    modes[max(0, i - 3):i] = 1
    modes[i:min(len(modes), i + 3)] = 2


def _spaced_bins(rng: np.random.Generator, count: int, lo: int, hi: int,
                 avoid: list[int], gap: int = 6) -> list[int]:
    """Up to ``count`` bins in [lo, hi], pairwise at least ``gap`` apart
    and at least ``gap`` away from every bin in ``avoid``."""
    picked: list[int] = []
    if count <= 0:
        return picked
    for b in rng.permutation(np.arange(lo, hi + 1)):
        if all(abs(int(b) - p) >= gap for p in picked + avoid):
            picked.append(int(b))
            if len(picked) >= count:
                break
    return sorted(picked)


@dataclass
class GenerateResult:
    root: Path
    dates: list[str]
    tickers: list[str]
    n_articles: int
    n_impactful: int
    mode_manifest_path: Path
    news_manifest_path: Path
    news_path: Path


def generate(spec: SynthSpec, outdir) -> GenerateResult:
    """Write the synthetic dataset under ``outdir``.

    Layout: one ``<date>/trades.csv`` + ``<date>/quotes.csv`` per day,
    ``news.csv``, and the two ground-truth manifests
    (``manifest_modes.csv``: date,ticker,bin,true_mode and
    ``manifest_news.csv``: timestamp,ticker,true_sentiment,planted_impactful).
    Byte-identical for a fixed spec.
    """
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    grid = spec.grid
    dates = spec.dates()
    tickers = spec.tickers()
    n_bins = grid.n_bins
    spb = grid.seconds_per_bin
    trim_bins = grid.trim_min // grid.bin_min
    total_bins = n_bins + 2 * trim_bins
    decimals = max(0, -int(math.floor(math.log10(spec.tick_size))))
    tick = spec.tick_size
    mu = np.array([spec.calm_log_mean, spec.event_log_mean])
    sd = np.asarray(spec.log_sd)
    drift_ms = spec.drift_minutes * MS_PER_MIN
    session_len_s = total_bins * spb

    neutral_p = _zipf_weights(len(spec.neutral_words),
                              spec.neutral_zipf_exponent)
    planted = {}
    for day, ticker, b in spec.planted_switches:
        planted.setdefault((day, ticker), []).append(b)

    log_px = np.log(150.0) + 0.4 * rng.standard_normal(len(tickers))
    news_rows = []
    news_manifest_rows = []
    mode_manifest_rows = []

    for day in dates:
        base_ms = day_start_ms(day)
        open_ms = base_ms + grid.start_ms - trim_bins * spb * MS_PER_SEC
        market = spec.market_vol * rng.standard_normal(total_bins)
        trade_rows = []
        quote_rows = []

        for s, ticker in enumerate(tickers):
            modes = _markov_modes(n_bins, spec.stay_prob_calm,
                                  spec.stay_prob_event, rng)

            # scheduled switches first, then impactful arrivals (each of
            # which forces a switch in its own bin)
            scheduled = sorted(planted.get((day, ticker), []))
            n_imp = rng.poisson(spec.impactful_rate)
            article_bins = _spaced_bins(rng, n_imp, 2, n_bins - 1, avoid=scheduled)
            for b in scheduled + article_bins:
                _force_switch(modes, b)

            impactful = []
            for b in article_bins:
                sentiment = 1 if rng.random() < 0.5 else -1
                sec_in_bin = int(rng.integers(0, spb))
                ts = (base_ms + grid.start_ms
                      + ((b - 1) * spb + sec_in_bin) * MS_PER_SEC
                      + int(rng.integers(0, MS_PER_SEC)))
                impactful.append((ts, sentiment))

            # spontaneous switches move the price too, with no article
            drift_events = [(ts_a, s * spec.drift_magnitude)
                            for ts_a, s in impactful]
            if spec.endogenous_drift_sd > 0:
                forced = set()
                for b in scheduled + article_bins:
                    forced.update(range(b, b + 3))
                for t in range(1, n_bins):
                    if modes[t - 1] == 1 and modes[t] == 2 and (t + 1) not in forced:
                        ts_sw = base_ms + grid.start_ms + t * spb * MS_PER_SEC
                        drift_events.append(
                            (ts_sw, float(rng.normal(0, spec.endogenous_drift_sd)))
                        )

            # per-bin targets; the trimmed head/tail trades use calm draws
            draw = mu[np.r_[np.ones(trim_bins, int), modes, np.ones(trim_bins, int)] - 1]
            targets = np.exp(draw + sd * rng.standard_normal((total_bins, 4)))

            tr_ts, tr_inc = [], []
            n_tr = np.clip(rng.poisson(spec.trades_per_bin, total_bins), 1, spb)
            for b in range(total_bins):
                secs = np.sort(rng.choice(spb, size=n_tr[b], replace=False))
                z = rng.standard_normal(n_tr[b])
                norm = float(np.sqrt((z * z).sum()))
                if norm == 0:
                    z = np.ones(n_tr[b])
                    norm = float(np.sqrt(n_tr[b]))
                inc = z * (targets[b, _SIGMA] / norm) + market[b] / n_tr[b]
                ts = (open_ms + (b * spb + secs) * MS_PER_SEC
                      + rng.integers(0, MS_PER_SEC, size=n_tr[b]))
                tr_ts.append(ts)
                tr_inc.append(inc)
            tr_ts = np.concatenate(tr_ts)
            tr_inc = np.concatenate(tr_inc)

            for ts_a, magnitude in drift_events:
                window = (tr_ts > ts_a) & (tr_ts <= ts_a + drift_ms)
                n_w = int(window.sum())
                if n_w:
                    tr_inc[window] += magnitude / n_w

            log_path = log_px[s] + np.cumsum(tr_inc)
            prices = np.round(np.exp(log_path) / tick) * tick
            log_px[s] = log_path[-1] + 0.005 * rng.standard_normal()

            sizes = np.empty(len(prices), dtype=np.int64)
            pos = 0
            for b in range(total_bins):
                k = n_tr[b]
                per_trade = targets[b, _V] / k
                sizes[pos:pos + k] = np.maximum(
                    1, np.round(per_trade / prices[pos:pos + k]).astype(np.int64))
                pos += k
            trade_rows.append((tr_ts, np.repeat(ticker, len(prices)), prices, sizes))

            # quotes: an opening quote plus per-bin refreshes around the
            # prevailing trade price
            q_ts, q_spread, q_mid = [open_ms], [max(1, round(targets[0, _PHI]))], \
                [float(np.round(np.exp(log_path[0]) / tick) * tick)]
            depth_target = [targets[0, _B]]
            for b in range(total_bins):
                secs = np.sort(rng.choice(spb, size=spec.quotes_per_bin, replace=False))
                phi_b = targets[b, _PHI]
                base_ticks = int(phi_b)
                frac = phi_b - base_ticks
                for sec in secs:
                    ts = open_ms + (b * spb + int(sec)) * MS_PER_SEC \
                        + int(rng.integers(0, MS_PER_SEC))
                    ticks_b = max(1, base_ticks + (1 if rng.random() < frac else 0))
                    idx = int(np.searchsorted(tr_ts, ts, side="right")) - 1
                    mid = prices[idx] if idx >= 0 else prices[0]
                    q_ts.append(ts)
                    q_spread.append(ticks_b)
                    q_mid.append(float(mid))
                    depth_target.append(targets[b, _B])
            q_ts = np.asarray(q_ts, dtype=np.int64)
            q_spread = np.asarray(q_spread, dtype=np.int64)
            q_mid = np.asarray(q_mid)
            depth_target = np.asarray(depth_target)
            bid = np.round(q_mid / tick) * tick - (q_spread // 2) * tick
            ask = bid + q_spread * tick
            jitter = 1.0 + 0.1 * rng.standard_normal(len(q_ts))
            bid_size = np.maximum(1, np.round(depth_target * jitter).astype(np.int64))
            ask_size = np.maximum(1, np.round(2 * depth_target).astype(np.int64) - bid_size)
            quote_rows.append((q_ts, np.repeat(ticker, len(q_ts)), bid, ask,
                               bid_size, ask_size))

            for b in range(n_bins):
                mode_manifest_rows.append((day, ticker, b + 1, int(modes[b])))

            # neutral chatter across the whole session
            n_neutral = rng.poisson(spec.neutral_rate)
            neutral_ts = (open_ms
                          + rng.integers(0, session_len_s, size=n_neutral) * MS_PER_SEC
                          + rng.integers(0, MS_PER_SEC, size=n_neutral))
            for ts in sorted(int(t) for t in neutral_ts):
                news_rows.append(_make_article(rng, spec, ts, ticker, 0, neutral_p))
                news_manifest_rows.append((ts, ticker, 0, 0))
            for ts_a, sentiment in impactful:
                news_rows.append(_make_article(rng, spec, ts_a, ticker, sentiment, neutral_p))
                news_manifest_rows.append((ts_a, ticker, sentiment, 1))

        _write_day(root / day, trade_rows, quote_rows, decimals)

    news_rows.sort(key=lambda r: (r[0], r[1]))
    news_manifest_rows.sort(key=lambda r: (r[0], r[1]))
    news_path = root / "news.csv"
    with open(news_path, "w") as fh:
        fh.write("timestamp,ticker,score,confidence,headline\n")
        for ts, ticker, score, conf, headline in news_rows:
            fh.write(f'{ts},{ticker},{score},{conf},"{headline}"\n')
    mode_path = root / "manifest_modes.csv"
    with open(mode_path, "w") as fh:
        fh.write("date,ticker,bin,true_mode\n")
        for row in mode_manifest_rows:
            fh.write(",".join(map(str, row)) + "\n")
    news_manifest_path = root / "manifest_news.csv"
    with open(news_manifest_path, "w") as fh:
        fh.write("timestamp,ticker,true_sentiment,planted_impactful\n")
        for row in news_manifest_rows:
            fh.write(",".join(map(str, row)) + "\n")

    n_impactful = sum(1 for r in news_manifest_rows if r[3] == 1)
    logger.info("generated %d articles (%d impactful) for %d stock-days",
                len(news_rows), n_impactful, len(dates) * len(tickers))
    return GenerateResult(
        root=root, dates=dates, tickers=tickers,
        n_articles=len(news_rows), n_impactful=n_impactful,
        mode_manifest_path=mode_path, news_manifest_path=news_manifest_path,
        news_path=news_path,
    )


def _markov_modes(n_bins: int, stay_calm: float, stay_event: float,
                  rng: np.random.Generator) -> np.ndarray:
    q12, q21 = 1.0 - stay_calm, 1.0 - stay_event
    p_event = q12 / (q12 + q21) if q12 + q21 > 0 else 0.0
    modes = np.empty(n_bins, dtype=np.int64)
    m = 2 if rng.random() < p_event else 1
    for t in range(n_bins):
        modes[t] = m
        stay = stay_calm if m == 1 else stay_event
        if rng.random() >= stay:
            m = 3 - m
    return modes


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def _make_article(rng: np.random.Generator, spec: SynthSpec, ts: int,
                  ticker: str, sentiment: int, neutral_p: np.ndarray):
    if sentiment == 1:
        lexicon = spec.bullish_words
    elif sentiment == -1:
        lexicon = spec.bearish_words
    else:
        lexicon = None
    words = []
    if lexicon is not None:
        k = int(rng.integers(1, 3))
        words += [lexicon[i] for i in rng.choice(len(lexicon), size=k, replace=False)]
    elif spec.sentiment_noise_prob > 0 and rng.random() < spec.sentiment_noise_prob:
        # sentiment-charged words also occur in neutral chatter
        stray = spec.bullish_words + spec.bearish_words
        if stray:
            words.append(stray[int(rng.integers(len(stray)))])
    n_neutral = int(rng.integers(4, 8)) if lexicon is None else int(rng.integers(2, 5))
    picks = rng.choice(len(spec.neutral_words), size=n_neutral, replace=False,
                       p=neutral_p)
    words += [spec.neutral_words[i] for i in picks]
    order = rng.permutation(len(words))
    headline = " ".join(words[i] for i in order)

    if rng.random() < spec.vendor_flip_prob:
        others = [v for v in (-1, 0, 1) if v != sentiment]
        vendor = others[int(rng.integers(2))]
    else:
        vendor = sentiment
    confidence = int(rng.integers(30, 100))
    return (ts, ticker, vendor, confidence, headline)


def _write_day(daydir: Path, trade_rows, quote_rows, decimals: int) -> None:
    daydir.mkdir(parents=True, exist_ok=True)
    ts = np.concatenate([r[0] for r in trade_rows])
    ticker = np.concatenate([r[1] for r in trade_rows])
    price = np.concatenate([r[2] for r in trade_rows])
    size = np.concatenate([r[3] for r in trade_rows])
    order = np.lexsort((ticker, ts))
    with open(daydir / "trades.csv", "w") as fh:
        fh.write("timestamp,ticker,price,size\n")
        for i in order:
            fh.write(f"{ts[i]},{ticker[i]},{price[i]:.{decimals}f},{size[i]}\n")

    ts = np.concatenate([r[0] for r in quote_rows])
    ticker = np.concatenate([r[1] for r in quote_rows])
    bid = np.concatenate([r[2] for r in quote_rows])
    ask = np.concatenate([r[3] for r in quote_rows])
    bs = np.concatenate([r[4] for r in quote_rows])
    asz = np.concatenate([r[5] for r in quote_rows])
    order = np.lexsort((ticker, ts))
    with open(daydir / "quotes.csv", "w") as fh:
        fh.write("timestamp,ticker,bid_price,ask_price,bid_size,ask_size\n")
        for i in order:
            fh.write(f"{ts[i]},{ticker[i]},{bid[i]:.{decimals}f},"
                     f"{ask[i]:.{decimals}f},{bs[i]},{asz[i]}\n")
