"""Intraday liquidity-mode fitting and liquidity-aware news sentiment."""

from .errors import (
    DegenerateCorpusError,
    EmptyIntersectionError,
    EmptyUniverseError,
    InsufficientReturnsError,
    LiqscreenError,
    MalformedRowError,
    MissingInputError,
    NoIntradayNewsError,
    ValidationError,
)
from .evaluation import (
    ComparisonReport,
    DriftCurve,
    SweepData,
    compare,
    drift_curves,
    sweep,
    terminal_separation,
)
from .jump_model import JumpConfig, ModeFit, fit_day, objective, segment
from .labeling import (
    DetrendedReturn,
    LabeledCorpus,
    LabelSets,
    PriceBook,
    build_label_sets,
    post_news_return,
    to_corpus,
)
from .market_data import (
    BinGrid,
    Panel,
    assign_bin,
    compute_bin_features,
    load_universe,
    realized_volatility,
)
from .screening import (
    FittedModes,
    ModeStats,
    NewsArticle,
    ScreeningResult,
    TransitionMatrix,
    fit_universe,
    mode_stats,
    select_impactful,
    selection_ratio,
)
from .sentiment import (
    SentimentModel,
    Vocabulary,
    fit_nbc,
    mutual_information,
    score,
    tokenize,
    top_words,
)
from .stationarize import SeasonalProfile, apply, fit_profile
from .synth import SynthSpec, gaussian_mode_panel, generate

__version__ = "0.1.0"
