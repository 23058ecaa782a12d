"""Pipeline driver: subcommands over a single INI config with flat-file
artifact handoff between stages.

Exit codes: 0 success, 2 validation error, 3 missing upstream artifact,
4 degenerate result (e.g. an empty screened label set).
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import evaluation, jump_model, labeling, screening, sentiment, stationarize, synth
from .errors import (
    DegenerateCorpusError,
    EmptyUniverseError,
    InsufficientReturnsError,
    LiqscreenError,
    MissingInputError,
    ValidationError,
)
from .market_data import BinGrid, Panel, assign_bin, load_universe

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISSING = 3
EXIT_DEGENERATE = 4

PANEL_RAW = "panel_raw.csv"
PANEL_STAT = "panel_stationarized.csv"
FITS_DIR = "fits"
SELECTED = "selected.csv"
LABELS = "labels.csv"
MODEL = "model.txt"
SCORES = "scores.csv"
CURVES = "drift_curves.csv"
SWEEP = "sweep.csv"
MANIFEST = "run_manifest.json"

STAGE_ORDER = ["features", "stationarize", "fit", "screen", "label",
               "train", "score", "eval"]


@dataclass
class PipelineConfig:
    """Validated, flag-merged configuration for every stage."""

    root: Path = Path("data")
    workdir: Path = Path("out")
    news_path: Path | None = None
    split_date: str | None = None
    grid: BinGrid = field(default_factory=BinGrid)
    tick_size: dict = field(default_factory=lambda: {"default": 0.01})
    jump: jump_model.JumpConfig = field(default_factory=jump_model.JumpConfig)
    horizon_min: int = 15
    tail_pct: float = 10.0
    alpha: float = 1.0
    min_df: int = 5
    train_on: str = "n"
    horizons: tuple = (5, 10, 15, 30, 60, 90, 120, 150)
    decile: float = 0.1
    sweep_lambdas: tuple = (0.0, 0.1, 0.25, 0.5, 1.0)
    sweep_hs: tuple = (5, 10, 15, 30)
    sweep_ks: tuple = (1, 5, 10, 25, 50)
    synth_spec: synth.SynthSpec = field(default_factory=synth.SynthSpec)
    raw_items: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 0 < self.tail_pct <= 50:
            raise ValidationError("labeling.k: must lie in (0, 50]")
        if self.horizon_min <= 0:
            raise ValidationError("labeling.h: must be > 0")
        if self.alpha <= 0:
            raise ValidationError("sentiment.alpha: must be > 0")
        if self.min_df < 1:
            raise ValidationError("sentiment.min_df: must be >= 1")
        if self.train_on not in ("n", "z"):
            raise ValidationError("sentiment.train_on: must be 'n' or 'z'")
        if not 0 < self.decile <= 0.5:
            raise ValidationError("evaluation.decile: must lie in (0, 0.5]")
        if not self.horizons:
            raise ValidationError("evaluation.horizons: must be non-empty")

    @property
    def news(self) -> Path:
        return self.news_path if self.news_path else self.root / "news.csv"

    def config_hash(self) -> str:
        blob = json.dumps(self.raw_items, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _get(parser_cfg, section, key, cast, default, errors):
    raw = parser_cfg.get(section, key, fallback=None)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError):
        errors.append(f"{section}.{key}: cannot parse {raw!r}")
        return default


def _tuple_of(cast):
    def parse(raw):
        return tuple(cast(tok) for tok in raw.replace(",", " ").split())
    return parse


def load_config(path: Path | None, overrides: dict | None = None) -> PipelineConfig:
    """Parse the INI config, apply flag overrides and validate."""
    parser = configparser.ConfigParser()
    if path is not None:
        if not Path(path).exists():
            raise ValidationError(f"config file {path} does not exist")
        parser.read(path)
    errors: list[str] = []
    overrides = overrides or {}

    grid = BinGrid(
        session_open=_get(parser, "grid", "session_open", str, "09:30", errors),
        session_close=_get(parser, "grid", "session_close", str, "16:00", errors),
        trim_min=_get(parser, "grid", "trim_min", int, 15, errors),
        bin_min=_get(parser, "grid", "bin_min", int, 5, errors),
    )

    tick = {"default": _get(parser, "features", "tick_size", float, 0.01, errors)}
    if parser.has_section("features"):
        for key, raw in parser.items("features"):
            if key.startswith("tick_size."):
                try:
                    tick[key.split(".", 1)[1].upper()] = float(raw)
                except ValueError:
                    errors.append(f"features.{key}: cannot parse {raw!r}")

    seed = overrides.get("seed")
    jump_cfg = jump_model.JumpConfig(
        n_modes=_get(parser, "jump", "n_modes", int, 2, errors),
        jump_penalty=overrides.get(
            "lambda", _get(parser, "jump", "lambda", float, 0.5, errors)),
        epsilon=_get(parser, "jump", "epsilon", float, 1e-8, errors),
        max_iters=_get(parser, "jump", "max_iters", int, 100, errors),
        n_restarts=_get(parser, "jump", "n_restarts", int, 10, errors),
        rng_seed=seed if seed is not None
        else _get(parser, "jump", "seed", int, 0, errors),
    )

    synth_spec = synth.SynthSpec(
        n_stocks=_get(parser, "synth", "n_stocks", int, 20, errors),
        n_days=_get(parser, "synth", "n_days", int, 30, errors),
        rng_seed=seed if seed is not None
        else _get(parser, "synth", "seed", int, 7, errors),
        start_date=_get(parser, "synth", "start_date", str, "2021-01-04", errors),
        grid=grid,
        neutral_rate=_get(parser, "synth", "neutral_rate", float, 2.0, errors),
        impactful_rate=_get(parser, "synth", "impactful_rate", float, 0.25, errors),
        drift_magnitude=_get(parser, "synth", "drift_magnitude", float, 0.012, errors),
        drift_minutes=_get(parser, "synth", "drift_minutes", int, 15, errors),
        trades_per_bin=_get(parser, "synth", "trades_per_bin", float, 12.0, errors),
        quotes_per_bin=_get(parser, "synth", "quotes_per_bin", int, 6, errors),
        market_vol=_get(parser, "synth", "market_vol", float, 0.002, errors),
        vendor_flip_prob=_get(parser, "synth", "vendor_flip_prob", float, 0.3, errors),
    )

    news_raw = _get(parser, "data", "news", str, "", errors)
    cfg = PipelineConfig(
        root=Path(_get(parser, "data", "root", str, "data", errors)),
        workdir=Path(_get(parser, "data", "workdir", str, "out", errors)),
        news_path=Path(news_raw) if news_raw else None,
        split_date=_get(parser, "data", "split_date", str, None, errors) or None,
        grid=grid,
        tick_size=tick,
        jump=jump_cfg,
        horizon_min=overrides.get("h", _get(parser, "labeling", "h", int, 15, errors)),
        tail_pct=overrides.get("k", _get(parser, "labeling", "k", float, 10.0, errors)),
        alpha=_get(parser, "sentiment", "alpha", float, 1.0, errors),
        min_df=_get(parser, "sentiment", "min_df", int, 5, errors),
        train_on=_get(parser, "sentiment", "train_on", str, "n", errors).lower(),
        horizons=_get(parser, "evaluation", "horizons", _tuple_of(int),
                      (5, 10, 15, 30, 60, 90, 120, 150), errors),
        decile=_get(parser, "evaluation", "decile", float, 0.1, errors),
        sweep_lambdas=_get(parser, "evaluation", "sweep_lambdas", _tuple_of(float),
                           (0.0, 0.1, 0.25, 0.5, 1.0), errors),
        sweep_hs=_get(parser, "evaluation", "sweep_hs", _tuple_of(int),
                      (5, 10, 15, 30), errors),
        sweep_ks=_get(parser, "evaluation", "sweep_ks", _tuple_of(float),
                      (1, 5, 10, 25, 50), errors),
        synth_spec=synth_spec,
    )
    if errors:
        raise ValidationError("; ".join(errors))
    items = {f"{s}.{k}": v for s in parser.sections() for k, v in parser.items(s)}
    items.update({f"override.{k}": str(v) for k, v in overrides.items()})
    cfg.raw_items = items
    cfg.validate()
    return cfg


def _update_manifest(cfg: PipelineConfig, stage: str, seed: int) -> None:
    path = cfg.workdir / MANIFEST
    manifest = {}
    if path.exists():
        manifest = json.loads(path.read_text())
    manifest.setdefault("stages", {})[stage] = {
        "config_hash": cfg.config_hash(),
        "seed": seed,
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"missing {path.name}, run {hint} first")
    return path


def _split_days(dates: list[str], cfg: PipelineConfig) -> tuple[list[str], list[str]]:
    """Train/eval day split: at split_date when configured, else 2/3-1/3."""
    dates = sorted(dates)
    if cfg.split_date:
        train = [d for d in dates if d < cfg.split_date]
        ev = [d for d in dates if d >= cfg.split_date]
    else:
        cut = math.ceil(len(dates) * 2 / 3)
        train, ev = dates[:cut], dates[cut:]
    if not train:
        raise ValidationError("data.split_date: empty training window")
    return train, ev


def _read_panel(cfg: PipelineConfig, name: str, hint: str) -> Panel:
    path = _require(cfg.workdir / name, hint)
    return Panel.from_frame(pd.read_csv(path))


def _load_news(cfg: PipelineConfig) -> list[screening.NewsArticle]:
    path = cfg.news
    if not path.exists():
        raise MissingInputError(f"missing news file {path}, run synth or point "
                                f"data.news at a news CSV")
    return screening.read_news(path)


def _intraday_news(cfg: PipelineConfig, days: list[str]) -> list[screening.NewsArticle]:
    day_set = set(days)
    articles = [a for a in screening.dedup_news(_load_news(cfg))
                if a.date in day_set and assign_bin(a.timestamp, cfg.grid) is not None]
    return articles


def cmd_synth(cfg: PipelineConfig) -> int:
    result = synth.generate(cfg.synth_spec, cfg.root)
    logger.info("synthetic data written to %s (%d articles)",
                result.root, result.n_articles)
    _update_manifest(cfg, "synth", cfg.synth_spec.rng_seed)
    return EXIT_OK


def cmd_features(cfg: PipelineConfig) -> int:
    panel = load_universe(cfg.root, grid=cfg.grid, tick_size=cfg.tick_size)
    panel.to_frame().to_csv(cfg.workdir / PANEL_RAW, index=False)
    _update_manifest(cfg, "features", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_stationarize(cfg: PipelineConfig) -> int:
    panel = _read_panel(cfg, PANEL_RAW, "features")
    profile = stationarize.fit_profile(panel)
    out = stationarize.apply(panel, profile)
    out.to_frame().to_csv(cfg.workdir / PANEL_STAT, index=False)
    _update_manifest(cfg, "stationarize", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_fit(cfg: PipelineConfig) -> int:
    panel = _read_panel(cfg, PANEL_STAT, "stationarize")
    train_days, _ = _split_days(panel.dates, cfg)
    fits = screening.fit_universe(panel, cfg.jump, days=train_days)
    fits.save(cfg.workdir / FITS_DIR)
    _update_manifest(cfg, "fit", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_screen(cfg: PipelineConfig) -> int:
    fits_dir = _require(cfg.workdir / FITS_DIR, "fit")
    fits = screening.FittedModes.load(fits_dir)
    train_days = sorted(fits.days)
    news = [a for a in _load_news(cfg) if a.date in set(train_days)]
    result = screening.select_impactful(news, fits, cfg.grid)
    screening.write_selected(cfg.workdir / SELECTED, result)
    if result.intraday:
        ratio = screening.selection_ratio(result.intraday, result.selected_articles)
        logger.info("selected %d of %d intraday articles (%.3f)",
                    len(result.selected), len(result.intraday), ratio)
    _update_manifest(cfg, "screen", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_label(cfg: PipelineConfig) -> int:
    selected_path = _require(cfg.workdir / SELECTED, "fit/screen")
    fits_dir = _require(cfg.workdir / FITS_DIR, "fit")
    train_days = sorted(screening.FittedModes.load(fits_dir).days)
    selected = set(screening.read_news(selected_path))
    intraday = _intraday_news(cfg, train_days)
    prices = labeling.PriceBook.from_directory(cfg.root, cfg.grid, dates=train_days)
    returns = {}
    for art in intraday:
        r = labeling.post_news_return(art, prices, cfg.horizon_min)
        if r is not None:
            returns[art] = r.value
    covered = [a for a in intraday if a in returns]
    sets = labeling.build_label_sets(covered, returns, selected, cfg.horizon_min,
                                     cfg.tail_pct, jump_penalty=cfg.jump.jump_penalty)
    labeling.write_labels(cfg.workdir / LABELS, sets, returns)
    _update_manifest(cfg, "label", cfg.jump.rng_seed)
    return EXIT_OK


def _corpus_from_labels(path: Path, train_on: str) -> labeling.LabeledCorpus:
    df = pd.read_csv(path)
    if train_on == "n":
        keep = df["set"].isin(["Np", "Nm"])
    else:
        keep = df["set"].isin(["Zp", "Zm", "Np", "Nm"])
    df = df.loc[keep]
    labels = [1 if tag.endswith("p") else -1 for tag in df["set"]]
    return labeling.LabeledCorpus(list(df["headline"].astype(str)), labels)


def cmd_train(cfg: PipelineConfig) -> int:
    labels_path = _require(cfg.workdir / LABELS, "label")
    corpus = _corpus_from_labels(labels_path, cfg.train_on)
    model = sentiment.fit_nbc(corpus, alpha=cfg.alpha, min_df=cfg.min_df)
    sentiment.save_model(model, cfg.workdir / MODEL)
    logger.info("trained on %d headlines, vocabulary %d",
                len(corpus), len(model.vocabulary))
    _update_manifest(cfg, "train", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_score(cfg: PipelineConfig) -> int:
    model_path = _require(cfg.workdir / MODEL, "train")
    panel = _read_panel(cfg, PANEL_STAT, "stationarize")
    _, eval_days = _split_days(panel.dates, cfg)
    if not eval_days:
        raise ValidationError("data.split_date: empty evaluation window")
    model = sentiment.load_model(model_path)
    articles = _intraday_news(cfg, eval_days)
    scores = sentiment.score_many(model, [a.headline for a in articles])
    with open(cfg.workdir / SCORES, "w") as fh:
        fh.write("timestamp,ticker,F,headline\n")
        for art, f in zip(articles, scores):
            headline = '"' + art.headline.replace('"', '""') + '"'
            fh.write(f"{art.timestamp},{art.ticker},{float(f)!r},{headline}\n")
    _update_manifest(cfg, "score", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, plot: bool = False) -> int:
    scores_path = _require(cfg.workdir / SCORES, "score")
    df = pd.read_csv(scores_path)
    if df.empty:
        raise ValidationError("no scored articles to evaluate")
    panel = _read_panel(cfg, PANEL_STAT, "stationarize")
    _, eval_days = _split_days(panel.dates, cfg)
    prices = labeling.PriceBook.from_directory(cfg.root, cfg.grid, dates=eval_days)
    scored = [
        (screening.NewsArticle(int(r.timestamp), str(r.ticker), str(r.headline)),
         float(r.F))
        for r in df.itertuples()
    ]
    curves = evaluation.drift_curves(scored, prices, cfg.horizons, cfg.decile)
    evaluation.write_curves(cfg.workdir / CURVES, curves)
    sep = evaluation.terminal_separation(curves)
    logger.info("terminal top-minus-bottom separation: %.5f", sep)
    if plot:
        evaluation.plot_curves(cfg.workdir / "drift_curves.png", curves)
    _update_manifest(cfg, "eval", cfg.jump.rng_seed)
    return EXIT_OK


def cmd_sweep(cfg: PipelineConfig) -> int:
    panel = _read_panel(cfg, PANEL_STAT, "stationarize")
    train_days, eval_days = _split_days(panel.dates, cfg)
    if not eval_days:
        raise ValidationError("data.split_date: empty evaluation window")
    prices = labeling.PriceBook.from_directory(cfg.root, cfg.grid)
    data = evaluation.SweepData(
        panel=panel,
        train_days=train_days,
        train_news=_intraday_news(cfg, train_days),
        eval_news=_intraday_news(cfg, eval_days),
        prices=prices,
        grid=cfg.grid,
        jump=cfg.jump,
        alpha=cfg.alpha,
        min_df=cfg.min_df,
        horizons=cfg.horizons,
        decile=cfg.decile,
    )
    table = evaluation.sweep(data, cfg.sweep_lambdas, cfg.sweep_hs, cfg.sweep_ks)
    evaluation.write_sweep(cfg.workdir / SWEEP, table)
    _update_manifest(cfg, "sweep", cfg.jump.rng_seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liqscreen",
        description="liquidity-mode news screening pipeline",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="INI config file (defaults used when omitted)")
    parser.add_argument("--lambda", dest="jump_penalty", type=float, default=None,
                        help="override the mode-switch penalty")
    parser.add_argument("--h", dest="horizon", type=int, default=None,
                        help="override the labeling horizon (minutes)")
    parser.add_argument("--k", dest="tail_pct", type=float, default=None,
                        help="override the labeling tail percentile")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every stage seed")
    parser.add_argument("--plot", action="store_true",
                        help="also render drift-curve figures (eval)")
    parser.add_argument(
        "command",
        choices=["synth", "features", "stationarize", "fit", "screen", "label",
                 "train", "score", "eval", "sweep", "all"],
    )
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.jump_penalty is not None:
        overrides["lambda"] = args.jump_penalty
    if args.horizon is not None:
        overrides["h"] = args.horizon
    if args.tail_pct is not None:
        overrides["k"] = args.tail_pct
    if args.seed is not None:
        overrides["seed"] = args.seed

    try:
        cfg = load_config(args.config, overrides)
        cfg.workdir.mkdir(parents=True, exist_ok=True)
        if args.command != "synth" and not cfg.root.exists():
            raise MissingInputError(f"data root {cfg.root} does not exist")

        if args.command == "all":
            for stage in STAGE_ORDER:
                code = _dispatch(stage, cfg, args)
                if code != EXIT_OK:
                    return code
            return EXIT_OK
        return _dispatch(args.command, cfg, args)
    except ValidationError as exc:
        logger.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except (MissingInputError, EmptyUniverseError) as exc:
        logger.error("%s", exc)
        return EXIT_MISSING
    except (DegenerateCorpusError, InsufficientReturnsError) as exc:
        logger.error("degenerate result: %s", exc)
        return EXIT_DEGENERATE
    except LiqscreenError as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION


def _dispatch(command: str, cfg: PipelineConfig, args) -> int:
    if command == "synth":
        return cmd_synth(cfg)
    if command == "features":
        return cmd_features(cfg)
    if command == "stationarize":
        return cmd_stationarize(cfg)
    if command == "fit":
        return cmd_fit(cfg)
    if command == "screen":
        return cmd_screen(cfg)
    if command == "label":
        return cmd_label(cfg)
    if command == "train":
        return cmd_train(cfg)
    if command == "score":
        return cmd_score(cfg)
    if command == "eval":
        return cmd_eval(cfg, plot=args.plot)
    if command == "sweep":
        return cmd_sweep(cfg)
    raise ValidationError(f"unknown command {command}")


if __name__ == "__main__":
    sys.exit(main())
