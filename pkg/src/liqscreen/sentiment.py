"""Headline tokenization, word/class mutual information, and the
multivariate Bernoulli naive Bayes sentiment scorer.

The scorer emits F = posterior(bullish) - posterior(bearish) in [-1, 1],
using the full Bernoulli likelihood: absent vocabulary words contribute
their absence probability.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCorpusError
from .labeling import LabeledCorpus

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"[a-z0-9]+")
MIN_TOKEN_LEN = 2

FORMAT_VERSION = 1
FORMAT_MAGIC = "liqscreen-nbc"


def tokenize(headline: str) -> set[str]:
    """Lowercase, split on non-alphanumerics, keep tokens of length >= 2
    (pure digits included). Presence only: each word counts once."""
    return {tok for tok in _TOKEN.findall(headline.lower())
            if len(tok) >= MIN_TOKEN_LEN}


def _class_counts(corpus: LabeledCorpus):
    """Document counts and per-word document frequencies by class."""
    n_pos = sum(1 for l in corpus.labels if l == 1)
    n_neg = len(corpus) - n_pos
    df_pos: dict[str, int] = {}
    df_neg: dict[str, int] = {}
    for headline, label in zip(corpus.headlines, corpus.labels):
        table = df_pos if label == 1 else df_neg
        for word in tokenize(headline):
            table[word] = table.get(word, 0) + 1
    return n_pos, n_neg, df_pos, df_neg


def mutual_information(corpus: LabeledCorpus, word: str) -> float:
    """Plug-in mutual information (bits) between the class and the
    presence of ``word``; empirical frequencies, no smoothing, and the
    0*log(0) terms dropped. A word absent from the corpus scores 0."""
    if len(corpus) == 0:
        raise DegenerateCorpusError("empty corpus")
    n_pos, n_neg, df_pos, df_neg = _class_counts(corpus)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateCorpusError("both classes must be present")
    n = n_pos + n_neg
    joint = np.array([
        [df_pos.get(word, 0), n_pos - df_pos.get(word, 0)],
        [df_neg.get(word, 0), n_neg - df_neg.get(word, 0)],
    ]) / n
    if joint[:, 0].sum() == 0:
        return 0.0
    total = 0.0
    for c in range(2):
        for f in range(2):
            p = joint[c, f]
            if p > 0:
                total += p * math.log2(p / (joint[c].sum() * joint[:, f].sum()))
    return total


def top_words(corpus: LabeledCorpus, n: int, min_df: int = 1) -> list[tuple[str, float]]:
    """Vocabulary ranked by mutual information with the class, descending,
    ties alphabetical."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n_pos, n_neg, df_pos, df_neg = _class_counts(corpus)
    words = sorted(w for w in set(df_pos) | set(df_neg)
                   if df_pos.get(w, 0) + df_neg.get(w, 0) >= min_df)
    scored = [(w, mutual_information(corpus, w)) for w in words]
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored[:n]


@dataclass
class Vocabulary:
    """Ordered word list with per-class document frequencies."""

    words: list[str]
    df_pos: np.ndarray
    df_neg: np.ndarray
    min_df: int

    def __len__(self):
        return len(self.words)


@dataclass
class SentimentModel:
    """Bernoulli naive Bayes over headline word presence.

    ``cond_pos``/``cond_neg`` hold the smoothed per-word presence
    probabilities; priors come from class document counts.
    """

    vocabulary: Vocabulary
    alpha: float
    n_pos: int
    n_neg: int
    cond_pos: np.ndarray
    cond_neg: np.ndarray

    @property
    def prior_pos(self) -> float:
        return self.n_pos / (self.n_pos + self.n_neg)

    @property
    def prior_neg(self) -> float:
        return self.n_neg / (self.n_pos + self.n_neg)


def fit_nbc(corpus: LabeledCorpus, alpha: float = 1.0, min_df: int = 5) -> SentimentModel:
    """Fit the Bernoulli classifier with Laplace smoothing ``alpha``.

    Words present in fewer than ``min_df`` training headlines are left out
    of the vocabulary. Raises on an empty or single-class corpus.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0 to keep conditionals inside (0, 1)")
    n_pos, n_neg, df_pos, df_neg = _class_counts(corpus)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateCorpusError(
            f"need both classes, got {n_pos} bullish / {n_neg} bearish docs"
        )
    words = sorted(w for w in set(df_pos) | set(df_neg)
                   if df_pos.get(w, 0) + df_neg.get(w, 0) >= min_df)
    dfp = np.array([df_pos.get(w, 0) for w in words], dtype=float)
    dfn = np.array([df_neg.get(w, 0) for w in words], dtype=float)
    vocab = Vocabulary(words, dfp.astype(int), dfn.astype(int), min_df)
    cond_pos = (dfp + alpha) / (n_pos + 2 * alpha)
    cond_neg = (dfn + alpha) / (n_neg + 2 * alpha)
    return SentimentModel(vocab, alpha, n_pos, n_neg, cond_pos, cond_neg)


def score(model: SentimentModel, headline: str) -> float:
    """Sentiment score F in [-1, 1] for one headline.

    Log-domain likelihood over the whole vocabulary (absence terms
    included), normalized over the two classes.
    """
    present = np.zeros(len(model.vocabulary), dtype=bool)
    index = {w: i for i, w in enumerate(model.vocabulary.words)}
    for tok in tokenize(headline):
        i = index.get(tok)
        if i is not None:
            present[i] = True
    return _score_mask(model, present)


def _score_mask(model: SentimentModel, present: np.ndarray) -> float:
    lp = np.log(model.cond_pos)
    lq = np.log1p(-model.cond_pos)
    ln = np.log(model.cond_neg)
    lm = np.log1p(-model.cond_neg)
    llh_pos = math.log(model.prior_pos) + lq.sum() + ((lp - lq) * present).sum()
    llh_neg = math.log(model.prior_neg) + lm.sum() + ((ln - lm) * present).sum()
    peak = max(llh_pos, llh_neg)
    w_pos = math.exp(llh_pos - peak)
    w_neg = math.exp(llh_neg - peak)
    return (w_pos - w_neg) / (w_pos + w_neg)


def score_many(model: SentimentModel, headlines: list[str]) -> np.ndarray:
    """Vectorized :func:`score` over many headlines."""
    index = {w: i for i, w in enumerate(model.vocabulary.words)}
    out = np.empty(len(headlines))
    for row, headline in enumerate(headlines):
        present = np.zeros(len(model.vocabulary), dtype=bool)
        for tok in tokenize(headline):
            i = index.get(tok)
            if i is not None:
                present[i] = True
        out[row] = _score_mask(model, present)
    return out


def save_model(model: SentimentModel, path) -> None:
    """Versioned flat file: header lines then one vocabulary word per line
    with document frequencies and smoothed conditionals."""
    with open(path, "w") as fh:
        fh.write(f"{FORMAT_MAGIC} {FORMAT_VERSION}\n")
        fh.write(f"alpha {model.alpha!r}\n")
        fh.write(f"n_pos {model.n_pos}\n")
        fh.write(f"n_neg {model.n_neg}\n")
        fh.write(f"min_df {model.vocabulary.min_df}\n")
        fh.write(f"words {len(model.vocabulary)}\n")
        for i, word in enumerate(model.vocabulary.words):
            fh.write(
                f"{word}\t{int(model.vocabulary.df_pos[i])}"
                f"\t{int(model.vocabulary.df_neg[i])}"
                f"\t{float(model.cond_pos[i])!r}\t{float(model.cond_neg[i])!r}\n"
            )


def load_model(path) -> SentimentModel:
    with open(path) as fh:
        magic = fh.readline().split()
        if magic[:1] != [FORMAT_MAGIC] or int(magic[1]) != FORMAT_VERSION:
            raise ValueError(f"unrecognized model file {path}")
        header = {}
        for _ in range(5):
            key, value = fh.readline().split()
            header[key] = value
        words, dfp, dfn, cp, cn = [], [], [], [], []
        for _ in range(int(header["words"])):
            word, a, b, c, d = fh.readline().rstrip("\n").split("\t")
            words.append(word)
            dfp.append(int(a))
            dfn.append(int(b))
            cp.append(float(c))
            cn.append(float(d))
    vocab = Vocabulary(words, np.array(dfp), np.array(dfn), int(header["min_df"]))
    return SentimentModel(
        vocabulary=vocab,
        alpha=float(header["alpha"]),
        n_pos=int(header["n_pos"]),
        n_neg=int(header["n_neg"]),
        cond_pos=np.array(cp),
        cond_neg=np.array(cn),
    )
