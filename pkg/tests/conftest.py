"""Session fixtures: one small synthetic world shared by the heavier
evaluation/CLI tests."""

import numpy as np
import pandas as pd
import pytest

from liqscreen import evaluation, labeling, market_data, screening, stationarize, synth
from liqscreen.jump_model import JumpConfig


@pytest.fixture(scope="session")
def small_spec():
    return synth.SynthSpec(
        n_stocks=10,
        n_days=12,
        rng_seed=2024,
        neutral_rate=4.0,
        impactful_rate=0.6,
    )


@pytest.fixture(scope="session")
def small_world(tmp_path_factory, small_spec):
    """Generated files plus the loaded/stationarized panel and news split."""
    root = tmp_path_factory.mktemp("world")
    result = synth.generate(small_spec, root)
    panel = market_data.load_universe(root, grid=small_spec.grid)
    profile = stationarize.fit_profile(panel)
    stat = stationarize.apply(panel, profile)
    news = screening.read_news(result.news_path)
    train_days = stat.dates[:8]
    eval_days = stat.dates[8:]
    prices = labeling.PriceBook.from_directory(root, small_spec.grid)

    def intraday(days):
        keep = set(days)
        return [a for a in screening.dedup_news(news)
                if a.date in keep
                and market_data.assign_bin(a.timestamp, small_spec.grid) is not None]

    return {
        "root": root,
        "spec": small_spec,
        "result": result,
        "panel": panel,
        "stat": stat,
        "news": news,
        "train_days": train_days,
        "eval_days": eval_days,
        "prices": prices,
        "train_news": intraday(train_days),
        "eval_news": intraday(eval_days),
        "manifest_modes": pd.read_csv(result.mode_manifest_path),
        "manifest_news": pd.read_csv(result.news_manifest_path),
    }


@pytest.fixture(scope="session")
def small_sweep_data(small_world):
    return evaluation.SweepData(
        panel=small_world["stat"],
        train_days=small_world["train_days"],
        train_news=small_world["train_news"],
        eval_news=small_world["eval_news"],
        prices=small_world["prices"],
        grid=small_world["spec"].grid,
        jump=JumpConfig(jump_penalty=0.5, n_restarts=6, rng_seed=5),
        min_df=3,
        horizons=(5, 15, 30, 60),
    )
