"""Exact (dense) t-SNE."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np


class TSNEError(ValueError):
    pass


class PerplexityTooLarge(TSNEError):
    pass


class DegenerateInput(TSNEError):
    pass


@dataclass(frozen=True)
class TSNEConfig:
    perplexity: float = 30.0
    learning_rate: float = 200.0
    n_iter: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250
    min_gain: float = 0.01
    entropy_tol: float = 1e-5
    max_bisection: int = 200
    init_scale: float = 1e-4


@dataclass(frozen=True)
class Reduced2D:
    image_id: Hashable
    x: float
    y: float


def squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def conditional_probabilities(dist2: np.ndarray, perplexity: float, tol: float = 1e-5,
                              max_iter: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Row-conditional Gaussian affinities with per-point precision found by bisection.

    Returns the (n, n) matrix of p_{j|i} (rows sum to one) and the precisions
    beta_i = 1 / (2 sigma_i^2). Entropies are matched to log(perplexity) in nats.
    """
    n = dist2.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        d = np.delete(dist2[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, -np.inf, np.inf
        for _ in range(max_iter):
            p = np.exp(-d * beta)
            s = p.sum()
            h = np.log(s) + beta * np.dot(d, p) / s
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == -np.inf else (beta + lo) / 2.0
        P[i, np.arange(n) != i] = p / s
        betas[i] = beta
    return P, betas


def joint_probabilities(x: np.ndarray, perplexity: float, tol: float = 1e-5,
                        max_iter: int = 200) -> np.ndarray:
    cond, _ = conditional_probabilities(squared_distances(x), perplexity, tol, max_iter)
    P = (cond + cond.T) / (2.0 * cond.shape[0])
    return np.maximum(P, 1e-12)


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-12)
    mask = ~np.eye(len(P), dtype=bool)
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne_array(x, config: TSNEConfig = TSNEConfig(), seed: int = 0) -> np.ndarray:
    """Embed the rows of ``x`` in 2D; deterministic for a given seed."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if config.perplexity <= 1:
        raise PerplexityTooLarge(f"perplexity must exceed 1, got {config.perplexity}")
    if n <= 3 * config.perplexity:
        raise PerplexityTooLarge(f"{n} points cannot support perplexity {config.perplexity} "
                                 f"(need more than {3 * config.perplexity:g})")
    if np.all(x == x[0]):
        raise DegenerateInput("all input points are identical")

    P = joint_probabilities(x, config.perplexity, config.entropy_tol, config.max_bisection)
    rng = np.random.default_rng(seed)
    Y = config.init_scale * rng.standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)

    P_eff = P * config.early_exaggeration
    for it in range(config.n_iter):
        if it == config.exaggeration_iters:
            P_eff = P
        momentum = config.initial_momentum if it < config.momentum_switch else config.final_momentum

        num = 1.0 / (1.0 + squared_distances(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        W = (P_eff - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, config.min_gain, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    return Y


def tsne(embeddings: Sequence[np.ndarray], ids: Optional[Sequence[Hashable]] = None,
         config: TSNEConfig = TSNEConfig(), seed: int = 0) -> list[Reduced2D]:
    Y = tsne_array(np.stack([np.asarray(e, dtype=float) for e in embeddings]), config, seed)
    ids = list(range(len(Y))) if ids is None else list(ids)
    return [Reduced2D(i, float(a), float(b)) for i, (a, b) in zip(ids, Y)]
