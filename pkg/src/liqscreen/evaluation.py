"""Out-of-sample drift-curve evaluation and hyperparameter sweeps.

A drift curve tracks the mean detrended post-publication return versus
horizon for the top/bottom score buckets; sweeps rerun the screen/label/
train/evaluate chain over a (switch penalty, horizon, tail percentile)
grid and summarize each cell by its terminal top-minus-bottom drift.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateCorpusError, EmptyIntersectionError
from .jump_model import JumpConfig
from .labeling import LabeledCorpus, PriceBook, build_label_sets, post_news_return, to_corpus
from .market_data import BinGrid, Panel
from .screening import FittedModes, NewsArticle, fit_universe, select_impactful
from .sentiment import fit_nbc, score_many

logger = logging.getLogger(__name__)

SMALL_BUCKET = 30

TOP = "top"
BOTTOM = "bottom"
REFERENCE = "reference"


@dataclass
class DriftCurve:
    """Mean detrended return per horizon for one score bucket, with the
    standard error of the mean. ``small_sample`` warns on buckets under
    30 articles."""

    bucket: str
    horizons: list[int]
    means: np.ndarray
    stderrs: np.ndarray
    count: int
    small_sample: bool = False


def _article_key(article: NewsArticle):
    return (article.timestamp, article.ticker, article.headline)


def _full_coverage_returns(articles, prices: PriceBook, horizons):
    """Detrended returns per horizon; articles lacking any horizon are
    dropped so bucket counts stay constant across horizons."""
    kept, rets = [], []
    for art in articles:
        row = []
        for h in horizons:
            r = post_news_return(art, prices, h)
            if r is None:
                row = None
                break
            row.append(r.value)
        if row is not None:
            kept.append(art)
            rets.append(row)
    return kept, np.array(rets) if rets else np.empty((0, len(horizons)))


def _curve(bucket: str, horizons, rets: np.ndarray) -> DriftCurve:
    count = rets.shape[0]
    means = rets.mean(axis=0)
    if count > 1:
        stderrs = rets.std(axis=0, ddof=1) / math.sqrt(count)
    else:
        stderrs = np.zeros(len(horizons))
    small = count < SMALL_BUCKET
    if small:
        logger.warning("bucket %s has only %d articles", bucket, count)
    return DriftCurve(bucket, list(horizons), means, stderrs, count, small)


def drift_curves(scored, prices: PriceBook, horizons,
                 decile: float = 0.1) -> list[DriftCurve]:
    """Top/bottom/reference drift curves for scored articles.

    ``scored`` is a list of (article, score) pairs. Buckets are rank-based
    cuts of the evaluation-set score distribution: the top bucket holds
    the ceil(decile * n) highest-scored articles and the bottom bucket the
    lowest, with deterministic tie-breaking.
    """
    if not 0 < decile <= 0.5:
        raise ValueError("decile must lie in (0, 0.5]")
    if not scored:
        raise ValueError("no scored articles")
    arts = [a for a, _ in scored]
    f_of = {_article_key(a): f for a, f in scored}
    kept, rets = _full_coverage_returns(arts, prices, horizons)
    if not kept:
        raise ValueError("no article has prices at every horizon")
    n = len(kept)
    size = math.ceil(decile * n)
    by_desc = sorted(range(n), key=lambda i: (-f_of[_article_key(kept[i])],
                                              *_article_key(kept[i])))
    top_idx = by_desc[:size]
    by_asc = sorted(range(n), key=lambda i: (f_of[_article_key(kept[i])],
                                             *_article_key(kept[i])))
    bottom_idx = by_asc[:size]
    return [
        _curve(TOP, horizons, rets[top_idx]),
        _curve(BOTTOM, horizons, rets[bottom_idx]),
        _curve(REFERENCE, horizons, rets),
    ]


def terminal_separation(curves: list[DriftCurve]) -> float:
    """Top-minus-bottom mean drift at the longest horizon."""
    by_name = {c.bucket: c for c in curves}
    return float(by_name[TOP].means[-1] - by_name[BOTTOM].means[-1])


@dataclass
class SweepData:
    """Everything a sweep cell needs: the stationarized panel and train
    days for (re)fitting, the news split, and a price book for returns."""

    panel: Panel
    train_days: list[str]
    train_news: list[NewsArticle]
    eval_news: list[NewsArticle]
    prices: PriceBook
    grid: BinGrid = field(default_factory=BinGrid)
    jump: JumpConfig = field(default_factory=JumpConfig)
    alpha: float = 1.0
    min_df: int = 5
    horizons: tuple = (5, 10, 15, 30, 60, 90, 120, 150)
    decile: float = 0.1


def _evaluate_corpus(corpus: LabeledCorpus, data: SweepData) -> float:
    model = fit_nbc(corpus, alpha=data.alpha, min_df=data.min_df)
    scores = score_many(model, [a.headline for a in data.eval_news])
    scored = list(zip(data.eval_news, scores))
    curves = drift_curves(scored, data.prices, data.horizons, data.decile)
    return terminal_separation(curves)


def sweep(data: SweepData, lambdas, hs, ks, use_cache: bool = True) -> pd.DataFrame:
    """Grid evaluation over switch penalty, label horizon and tail
    percentile.

    Cells sharing a penalty reuse the cached day fits (and cells sharing a
    horizon reuse the cached returns) unless ``use_cache`` is off. A cell
    whose screened label sets are empty on either side is marked
    degenerate instead of failing the sweep.
    """
    fit_cache: dict[float, FittedModes] = {}
    screen_cache: dict[float, tuple] = {}
    returns_cache: dict[int, tuple] = {}

    def fits_for(lam: float) -> FittedModes:
        if not use_cache or lam not in fit_cache:
            cfg = dataclasses.replace(data.jump, jump_penalty=lam)
            fit_cache[lam] = fit_universe(data.panel, cfg, days=data.train_days)
        return fit_cache[lam]

    def screen_for(lam: float):
        if not use_cache or lam not in screen_cache:
            result = select_impactful(data.train_news, fits_for(lam), data.grid)
            screen_cache[lam] = (set(result.selected_articles), result.intraday)
        return screen_cache[lam]

    def returns_for(h: int):
        if not use_cache or h not in returns_cache:
            # the intraday universe is penalty-independent
            _, intraday = screen_for(lambdas[0])
            rets = {}
            for art in intraday:
                r = post_news_return(art, data.prices, h)
                if r is not None:
                    rets[art] = r.value
            returns_cache[h] = (sorted(rets, key=_article_key), rets)
        return returns_cache[h]

    rows = []
    for lam in lambdas:
        selected, _ = screen_for(lam)
        for h in hs:
            news_h, rets_h = returns_for(h)
            for k in ks:
                sets = build_label_sets(news_h, rets_h, selected, h, k,
                                        jump_penalty=lam)
                corpus = to_corpus(sets, screened=True)
                n_train = len(corpus)
                degenerate = not sets.n_plus or not sets.n_minus
                sep = float("nan")
                if not degenerate:
                    try:
                        sep = _evaluate_corpus(corpus, data)
                    except DegenerateCorpusError:
                        degenerate = True
                rows.append((lam, h, k, sep, n_train, degenerate))
                if degenerate:
                    logger.warning("degenerate sweep cell lambda=%s h=%s k=%s",
                                   lam, h, k)
    return pd.DataFrame(
        rows, columns=["lambda", "h", "k", "terminal_separation", "n_train",
                       "degenerate"],
    )


@dataclass
class ComparisonReport:
    baseline_curves: list[DriftCurve]
    candidate_curves: list[DriftCurve]
    terminal_difference: float
    n_common: int


def compare(baseline, candidate, prices: PriceBook, horizons,
            decile: float = 0.1) -> ComparisonReport:
    """Drift curves of two scorers on the identical article set.

    ``baseline``/``candidate`` are (article, score) lists; coverage is
    restricted to their intersection (logged), and the report carries
    candidate-minus-baseline terminal separation.
    """
    base_of = {_article_key(a): (a, f) for a, f in baseline}
    cand_of = {_article_key(a): (a, f) for a, f in candidate}
    common = sorted(set(base_of) & set(cand_of))
    if not common:
        raise EmptyIntersectionError("the scorers cover disjoint article sets")
    if len(common) < len(base_of) or len(common) < len(cand_of):
        logger.info("restricting comparison to %d common articles", len(common))
    base_scored = [base_of[key] for key in common]
    cand_scored = [cand_of[key] for key in common]
    base_curves = drift_curves(base_scored, prices, horizons, decile)
    cand_curves = drift_curves(cand_scored, prices, horizons, decile)
    diff = terminal_separation(cand_curves) - terminal_separation(base_curves)
    return ComparisonReport(base_curves, cand_curves, diff, len(common))


def write_curves(path, curves: list[DriftCurve]) -> None:
    rows = []
    for c in curves:
        for i, h in enumerate(c.horizons):
            rows.append((c.bucket, h, repr(float(c.means[i])),
                         repr(float(c.stderrs[i])), c.count))
    pd.DataFrame(rows, columns=["bucket", "horizon", "mean", "stderr", "count"]) \
        .to_csv(path, index=False)


def read_curves(path) -> list[DriftCurve]:
    df = pd.read_csv(path)
    out = []
    for bucket, grp in df.groupby("bucket", sort=False):
        out.append(DriftCurve(
            bucket=str(bucket),
            horizons=list(grp["horizon"]),
            means=grp["mean"].to_numpy(float),
            stderrs=grp["stderr"].to_numpy(float),
            count=int(grp["count"].iloc[0]),
        ))
    return out


def write_sweep(path, table: pd.DataFrame) -> None:
    out = table.copy()
    out["degenerate"] = out["degenerate"].astype(int)
    out.to_csv(path, index=False)


def plot_curves(path, curves: list[DriftCurve], title: str = "") -> None:
    """Optional rendered figure of the drift curves."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 5))
    colors = {TOP: "tab:green", BOTTOM: "tab:red", REFERENCE: "tab:gray"}
    for c in curves:
        color = colors.get(c.bucket, None)
        ax.plot(c.horizons, c.means, label=f"{c.bucket} (n={c.count})", color=color)
        ax.fill_between(c.horizons, c.means - c.stderrs, c.means + c.stderrs,
                        alpha=0.25, color=color)
    ax.axhline(0.0, lw=0.6, color="black")
    ax.set_xlabel("minutes after publication")
    ax.set_ylabel("mean detrended return")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
