"""K-mode jump model: K-means-style clustering of per-bin liquidity
vectors with a fixed penalty per consecutive-bin mode switch.

One day's sequences (all stocks pooled) are fitted by coordinate descent:
alternate exact centroid refits with exact per-stock dynamic-programming
segmentation. Mode labels are 1-based; after fitting, modes are relabeled
so Mode 1 is the centroid with the lower volatility component.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .market_data import SIGMA_IDX, V_IDX, VAR_COLUMNS

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class JumpConfig:
    n_modes: int = 2
    jump_penalty: float = 0.5
    epsilon: float = 1e-8
    max_iters: int = 100
    n_restarts: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.jump_penalty < 0:
            raise ValueError("jump_penalty must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1 or self.n_restarts < 1:
            raise ValueError("max_iters and n_restarts must be >= 1")


@dataclass
class ModeFit:
    """Fitted centroids plus one mode sequence per input stock.

    ``modes`` has shape (N, T) with values in 1..K; ``theta`` row k-1 is
    the centroid of mode k. ``loss`` is the attained objective of the best
    restart, after relabeling.
    """

    theta: np.ndarray
    modes: np.ndarray
    loss: float
    iters: int
    restart_losses: list[float] = field(default_factory=list)
    reseed_count: int = 0

    @property
    def n_modes(self) -> int:
        return self.theta.shape[0]


def objective(sequences: np.ndarray, theta: np.ndarray, modes: np.ndarray,
              jump_penalty: float) -> float:
    """Total fit loss plus switch penalties over all stock sequences."""
    sequences = np.asarray(sequences, dtype=float)
    modes = np.asarray(modes)
    if modes.ndim == 1:
        modes = modes[None]
        sequences = sequences[None]
    assigned = theta[modes - 1]                       # (N, T, dim)
    fit = np.sum((sequences - assigned) ** 2)
    switches = np.sum(modes[:, 1:] != modes[:, :-1])
    return float(fit + jump_penalty * switches)


def _loss_matrix(sequences: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Squared distances, shape (N, T, K)."""
    diff = sequences[:, :, None, :] - theta[None, None, :, :]
    return np.sum(diff * diff, axis=-1)


def _segment_all(sequences: np.ndarray, theta: np.ndarray,
                 jump_penalty: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimal mode sequence per stock for fixed centroids.

    Backward recursion F(T,k) = d(x_T,k); F(t,k) = d(x_t,k) +
    min_j{F(t+1,j) + penalty*1[j!=k]}, then forward reconstruction with
    ties broken toward the smaller mode index. Returns 1-based modes
    (N, T) and per-stock optimal costs (N,).
    """
    loss = _loss_matrix(sequences, theta)
    n_seq, n_t, k = loss.shape
    cost_to_go = np.empty_like(loss)
    cost_to_go[:, -1, :] = loss[:, -1, :]
    for t in range(n_t - 2, -1, -1):
        nxt = cost_to_go[:, t + 1, :]
        best_switch = nxt.min(axis=1, keepdims=True) + jump_penalty
        cost_to_go[:, t, :] = loss[:, t, :] + np.minimum(nxt, best_switch)

    modes = np.empty((n_seq, n_t), dtype=np.int64)
    modes[:, 0] = np.argmin(cost_to_go[:, 0, :], axis=1)
    costs = cost_to_go[np.arange(n_seq), 0, modes[:, 0]]
    k_range = np.arange(k)
    for t in range(1, n_t):
        stay = k_range[None, :] == modes[:, t - 1][:, None]
        cand = cost_to_go[:, t, :] + jump_penalty * (~stay)
        modes[:, t] = np.argmin(cand, axis=1)
    return modes + 1, costs


def segment(sequence: np.ndarray, theta: np.ndarray,
            jump_penalty: float) -> tuple[np.ndarray, float]:
    """Optimal mode sequence and its cost for a single (T, dim) sequence."""
    sequence = np.atleast_2d(np.asarray(sequence, dtype=float))
    modes, costs = _segment_all(sequence[None], np.asarray(theta, dtype=float),
                                jump_penalty)
    return modes[0], float(costs[0])


def _refit_centroids(samples: np.ndarray, labels: np.ndarray, k: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Mode-wise sample means; an empty mode is reseeded to the sample
    farthest from its nearest non-empty centroid."""
    dim = samples.shape[1]
    theta = np.zeros((k, dim))
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            theta[j] = samples[labels == j].mean(axis=0)
    reseeds = 0
    empty = [j for j in range(k) if counts[j] == 0]
    filled = [j for j in range(k) if counts[j] > 0]
    for j in empty:
        if not filled:
            theta[j] = samples[rng.integers(len(samples))]
        else:
            d2 = np.min(
                [np.sum((samples - theta[f]) ** 2, axis=1) for f in filled], axis=0
            )
            theta[j] = samples[int(np.argmax(d2))]
        filled.append(j)
        reseeds += 1
    if reseeds:
        logger.warning("reseeded %d empty mode(s) during centroid refit", reseeds)
    return theta, reseeds


def _kmeans_labels(samples: np.ndarray, k: int, rng: np.random.Generator,
                   n_iter: int = 10) -> np.ndarray:
    """K-means++ seeding plus a bounded Lloyd refinement; returns the
    per-sample assignment used as the initial mode sequence."""
    n = len(samples)
    centroids = samples[rng.integers(n)][None, :]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((samples - c) ** 2, axis=1) for c in centroids], axis=0
        )
        total = d2.sum()
        if total <= 0:
            pick = rng.integers(n)
        else:
            pick = rng.choice(n, p=d2 / total)
        centroids = np.vstack([centroids, samples[pick]])

    labels = np.argmin(
        ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(-1), axis=1
    )
    for _ in range(n_iter):
        centroids, _ = _refit_centroids(samples, labels, k, rng)
        new_labels = np.argmin(
            ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(-1), axis=1
        )
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def _relabel(theta: np.ndarray, modes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Permute labels so modes are ordered by ascending volatility
    centroid, ties broken on the traded-value centroid."""
    dim = theta.shape[1]
    vol = theta[:, min(SIGMA_IDX, dim - 1)]
    val = theta[:, min(V_IDX, dim - 1)]
    order = np.lexsort((val, vol))
    new_label = np.empty(len(order), dtype=np.int64)
    new_label[order] = np.arange(1, len(order) + 1)
    return theta[order], new_label[modes - 1]


def _fit_once(sequences: np.ndarray, config: JumpConfig,
              init_modes: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, int, int]:
    n_seq, n_t, _ = sequences.shape
    samples = sequences.reshape(n_seq * n_t, -1)
    rng = np.random.default_rng(np.random.SeedSequence((config.rng_seed, 0xF17)))
    modes = init_modes
    prev = np.inf
    loss = np.inf
    reseeds = 0
    iters = 0
    for iters in range(1, config.max_iters + 1):
        theta, r = _refit_centroids(samples, (modes - 1).ravel(), config.n_modes, rng)
        reseeds += r
        modes, costs = _segment_all(sequences, theta, config.jump_penalty)
        loss = float(costs.sum())
        if loss > prev + MONOTONE_TOL:
            raise AssertionError(
                f"objective increased during coordinate descent: {prev} -> {loss}"
            )
        if abs(loss - prev) <= config.epsilon:
            break
        prev = loss
    return theta, modes, loss, iters, reseeds


def fit_day(sequences: np.ndarray, config: JumpConfig,
            init_modes: np.ndarray | None = None) -> ModeFit:
    """Fit the jump model on one day's pooled stock sequences.

    Runs ``config.n_restarts`` coordinate descents from distinct K-means
    initializations and keeps the lowest-objective one (a single run when
    ``init_modes`` is supplied). The result is relabeled so Mode 1 is the
    low-volatility mode.

    Args:
        sequences: (N, T, dim) array of finite observations; missing bins
            must be imputed upstream.
        config: hyperparameters; ``rng_seed`` makes the fit reproducible.
        init_modes: optional (N, T) 1-based initial mode sequences.
    """
    sequences = np.asarray(sequences, dtype=float)
    if sequences.ndim == 2:
        sequences = sequences[None]
    if sequences.ndim != 3 or sequences.shape[0] < 1 or sequences.shape[1] < 1:
        raise ValueError("sequences must have shape (N, T, dim) with N, T >= 1")
    if not np.isfinite(sequences).all():
        raise ValueError("sequences contain non-finite values; impute upstream")

    n_seq, n_t, _ = sequences.shape
    samples = sequences.reshape(n_seq * n_t, -1)
    best = None
    restart_losses = []
    n_restarts = 1 if init_modes is not None else config.n_restarts
    for r in range(n_restarts):
        if init_modes is not None:
            start = np.asarray(init_modes, dtype=np.int64).reshape(n_seq, n_t)
        else:
            rng = np.random.default_rng(np.random.SeedSequence((config.rng_seed, r)))
            start = _kmeans_labels(samples, config.n_modes, rng).reshape(n_seq, n_t) + 1
        theta, modes, loss, iters, reseeds = _fit_once(sequences, config, start)
        restart_losses.append(loss)
        if best is None or loss < best[2]:
            best = (theta, modes, loss, iters, reseeds)

    theta, modes, loss, iters, reseeds = best
    theta, modes = _relabel(theta, modes)
    return ModeFit(theta=theta, modes=modes, loss=loss, iters=iters,
                   restart_losses=restart_losses, reseed_count=reseeds)


def save_mode_fit(fit: ModeFit, day: str, tickers: list[str], outdir) -> None:
    """Persist one day's fit as centroids.csv (mode,phi,V,sigma,B) and
    modes.csv (date,ticker,bin,mode)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cent = pd.DataFrame(fit.theta, columns=VAR_COLUMNS)
    cent.insert(0, "mode", np.arange(1, fit.n_modes + 1))
    cent.to_csv(outdir / "centroids.csv", index=False)
    n_seq, n_t = fit.modes.shape
    rows = pd.DataFrame({
        "date": np.repeat(day, n_seq * n_t),
        "ticker": np.repeat(tickers, n_t),
        "bin": np.tile(np.arange(1, n_t + 1), n_seq),
        "mode": fit.modes.ravel(),
    })
    rows.to_csv(outdir / "modes.csv", index=False)


def load_mode_fit(indir) -> tuple[str, list[str], ModeFit]:
    """Inverse of :func:`save_mode_fit`; the loss is recomputable from the
    panel, so it is restored as NaN."""
    indir = Path(indir)
    cent = pd.read_csv(indir / "centroids.csv")
    theta = cent[VAR_COLUMNS].to_numpy(float)
    rows = pd.read_csv(indir / "modes.csv")
    day = str(rows["date"].iloc[0])
    tickers = list(dict.fromkeys(rows["ticker"].astype(str)))
    n_t = int(rows["bin"].max())
    modes = rows["mode"].to_numpy(np.int64).reshape(len(tickers), n_t)
    fit = ModeFit(theta=theta, modes=modes, loss=float("nan"), iters=0)
    return day, tickers, fit
