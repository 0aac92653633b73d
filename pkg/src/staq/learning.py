"""Quality maps: fixed linear scoring and Gaussian-process regression
learned from examples, with variance-driven active querying.

The GP uses a squared-exponential kernel and a constant prior mean, fit by
Cholesky factorization. Active learning repeatedly labels the pool point
with the highest posterior variance, which for a GP is the maximum-entropy
choice; the comparison baseline labels uniformly random points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import ContractViolation, InvalidInput

VAR_ROUNDOFF = 1e-10
NOISE_FLOOR = 1e-8
LABEL_TOL = 1e-9


@dataclass(frozen=True)
class LinearQualityMap:
    """Quality as a non-negative weighted trait sum scaled by a normalizer.

    Non-negative weights keep the map monotone in every trait, which the
    search's suboptimality guarantee relies on.
    """

    weights: np.ndarray
    normalizer: float

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=float)
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 1 or weights.size < 1:
            raise InvalidInput("weights must be a non-empty vector")
        if np.any(weights < 0):
            raise InvalidInput("weights must be non-negative")
        if self.normalizer <= 0:
            raise InvalidInput("normalizer must be positive")

    def __call__(self, traits: np.ndarray) -> float:
        return float(np.dot(self.weights, traits)) / self.normalizer


def rbf_kernel(a: np.ndarray, b: np.ndarray, signal_var: float, length_scale: float) -> np.ndarray:
    """Squared-exponential kernel matrix between row sets a and b."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise InvalidInput(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return signal_var * np.exp(-sq / (2.0 * length_scale * length_scale))


@dataclass(frozen=True)
class GPModel:
    """A fit Gaussian process: training data, hyperparameters, and the cached
    Cholesky factor of the regularized kernel matrix."""

    x_train: np.ndarray
    y_train: np.ndarray
    length_scale: float
    signal_var: float
    noise_var: float
    prior_mean: float
    chol: np.ndarray = field(repr=False, compare=False, default=None)
    weights: np.ndarray = field(repr=False, compare=False, default=None)


def gp_fit(
    x: np.ndarray,
    y: np.ndarray,
    *,
    length_scale: Optional[float] = None,
    signal_var: float = 0.25,
    noise_var: float = 1e-4,
    prior_mean: float = 0.5,
) -> GPModel:
    """Fit the GP to labeled points. length_scale defaults to sqrt(n_features),
    the distance scale between random corners of the unit cube."""
    x = np.array(x, dtype=float, ndmin=2)
    y = np.array(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise InvalidInput(f"{x.shape[0]} inputs but {y.shape[0]} labels")
    if x.shape[0] == 0:
        raise InvalidInput("need at least one training point")
    if np.any(y < -LABEL_TOL) or np.any(y > 1.0 + LABEL_TOL):
        raise InvalidInput("labels must lie in [0, 1]")
    if signal_var <= 0:
        raise InvalidInput("signal_var must be positive")
    if length_scale is None:
        length_scale = math.sqrt(x.shape[1])
    if length_scale <= 0:
        raise InvalidInput("length_scale must be positive")
    noise_var = max(noise_var, NOISE_FLOOR)
    k = rbf_kernel(x, x, signal_var, length_scale)
    k[np.diag_indices_from(k)] += noise_var
    chol = np.linalg.cholesky(k)
    residual = y - prior_mean
    weights = np.linalg.solve(chol.T, np.linalg.solve(chol, residual))
    for arr in (x, y, chol, weights):
        arr.setflags(write=False)
    return GPModel(x, y, length_scale, signal_var, noise_var, prior_mean, chol, weights)


def gp_predict(model: GPModel, x_query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each query row.

    Means are raw (not clamped to [0,1]); clamping happens where qualities
    are consumed, so learning sees the unclipped values. Variance round-off
    below zero is tolerated to -1e-10 and clamped.
    """
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
    k_star = rbf_kernel(model.x_train, x_query, model.signal_var, model.length_scale)
    mean = model.prior_mean + k_star.T @ model.weights
    v = np.linalg.solve(model.chol, k_star)
    var = model.signal_var - np.sum(v * v, axis=0)
    low = float(var.min()) if var.size else 0.0
    if low < -VAR_ROUNDOFF:
        raise ContractViolation(f"posterior variance {low} below round-off tolerance")
    np.maximum(var, 0.0, out=var)
    return mean, var


def log_marginal_likelihood(model: GPModel) -> float:
    residual = model.y_train - model.prior_mean
    n = residual.size
    log_det = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * float(residual @ model.weights) - 0.5 * log_det - 0.5 * n * math.log(2.0 * math.pi)


def tune_hyperparameters(
    x: np.ndarray,
    y: np.ndarray,
    *,
    length_scales: Sequence[float],
    signal_vars: Sequence[float],
    noise_var: float = 1e-4,
    prior_mean: float = 0.5,
) -> GPModel:
    """Grid search maximizing marginal likelihood; ties keep the earliest
    grid entry so results are reproducible."""
    if not length_scales or not signal_vars:
        raise InvalidInput("hyperparameter grids must be non-empty")
    best = None
    best_lml = -math.inf
    for ls in length_scales:
        for sv in signal_vars:
            model = gp_fit(x, y, length_scale=ls, signal_var=sv,
                           noise_var=noise_var, prior_mean=prior_mean)
            lml = log_marginal_likelihood(model)
            if lml > best_lml:
                best, best_lml = model, lml
    return best


@dataclass(frozen=True)
class GPQualityMap:
    """Quality map backed by a GP posterior mean."""

    model: GPModel

    def __call__(self, traits: np.ndarray) -> float:
        mean, _ = gp_predict(self.model, np.asarray(traits, dtype=float)[None, :])
        return float(mean[0])


class QueryPool:
    """Candidate points for labeling, tracking which are already labeled."""

    def __init__(self, features: np.ndarray):
        self.features = np.array(features, dtype=float, ndmin=2)
        self.labeled_mask = np.zeros(self.features.shape[0], dtype=bool)

    def unlabeled_indices(self) -> np.ndarray:
        return np.nonzero(~self.labeled_mask)[0]

    def n_unlabeled(self) -> int:
        return int(np.sum(~self.labeled_mask))

    def mark_labeled(self, index: int) -> None:
        if self.labeled_mask[index]:
            raise InvalidInput(f"pool point {index} is already labeled")
        self.labeled_mask[index] = True


Labeler = Callable[[int], float]
EvalSet = tuple[np.ndarray, np.ndarray]


class LabelingAborted(RuntimeError):
    """The labeler failed mid-run; carries the partial model and rmse trace."""

    def __init__(self, cause: BaseException, model: Optional[GPModel], trace: list[float]):
        super().__init__(f"labeler failed after {len(trace)} queries: {cause}")
        self.model = model
        self.trace = trace


def select_query(model: Optional[GPModel], pool: QueryPool) -> int:
    """Index of the unlabeled candidate with the highest posterior variance.

    With no model yet every candidate sits at the prior variance, so the
    smallest index wins; ties in general go to the smallest index.
    """
    unlabeled = pool.unlabeled_indices()
    if unlabeled.size == 0:
        raise InvalidInput("no unlabeled candidates left")
    if model is None:
        return int(unlabeled[0])
    _, var = gp_predict(model, pool.features[unlabeled])
    return int(unlabeled[int(np.argmax(var))])


def rmse(model: GPModel, x_eval: np.ndarray, y_eval: np.ndarray) -> float:
    mean, _ = gp_predict(model, x_eval)
    return float(np.sqrt(np.mean((mean - np.asarray(y_eval, dtype=float).ravel()) ** 2)))


def _learning_loop(
    labeler: Labeler,
    pool: QueryPool,
    eval_set: EvalSet,
    picks: Sequence[Optional[int]],
    gp_params: dict,
) -> tuple[Optional[GPModel], list[float]]:
    """Shared query loop; a None pick means choose by maximum variance."""
    x_eval, y_eval = eval_set
    model: Optional[GPModel] = None
    labels: list[float] = []
    queried: list[int] = []
    trace: list[float] = []
    for pick in picks:
        index = select_query(model, pool) if pick is None else int(pick)
        try:
            label = float(labeler(index))
        except Exception as exc:
            raise LabelingAborted(exc, model, trace) from exc
        pool.mark_labeled(index)
        queried.append(index)
        labels.append(label)
        model = gp_fit(pool.features[queried], np.asarray(labels), **gp_params)
        trace.append(rmse(model, x_eval, y_eval))
    return model, trace


def active_learn(
    labeler: Labeler,
    pool: QueryPool,
    eval_set: EvalSet,
    budget: int,
    **gp_params,
) -> tuple[Optional[GPModel], list[float]]:
    """Label the most uncertain pool point, refit, repeat `budget` times.

    Returns the final model (None for budget 0) and the evaluation rmse
    after each label. The eval set must be disjoint from the pool, or the
    trace measures memorization.
    """
    if not (0 <= budget <= pool.n_unlabeled()):
        raise InvalidInput(f"budget must be in [0, {pool.n_unlabeled()}]")
    return _learning_loop(labeler, pool, eval_set, [None] * budget, gp_params)


def uniform_baseline(
    labeler: Labeler,
    pool: QueryPool,
    eval_set: EvalSet,
    budget: int,
    seed: int,
    **gp_params,
) -> tuple[Optional[GPModel], list[float]]:
    """Label seeded uniform-random pool points; the active-learning control."""
    if not (0 <= budget <= pool.n_unlabeled()):
        raise InvalidInput(f"budget must be in [0, {pool.n_unlabeled()}]")
    rng = np.random.default_rng(seed)
    unlabeled = pool.unlabeled_indices()
    picks = unlabeled[rng.permutation(unlabeled.size)[:budget]]
    return _learning_loop(labeler, pool, eval_set, [int(p) for p in picks], gp_params)


def synthetic_position_dataset(
    *,
    n_players: int = 500,
    n_traits: int = 53,
    n_positions: int = 6,
    n_active: int = 8,
    seed: int = 7,
) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Synthetic roster ratings: each position scores a sparse weighted sum
    of a player's traits. Returns (features, labels, position names) with
    labels of shape (n_players, n_positions), all values in [0, 1].

    Players are drawn from a small set of archetypes with uneven frequencies,
    so traits are strongly correlated across the roster (a rating sheet has
    far fewer degrees of freedom than columns). Each trait is then mapped to
    its rank, spreading values evenly over [0, 1] while keeping the archetype
    structure intact."""
    rng = np.random.default_rng(seed)
    n_archetypes, latent_dim = 10, 2
    centers = rng.normal(scale=3.0, size=(n_archetypes, latent_dim))
    # Dirichlet(0.5) makes some archetypes rare; spread varies per archetype.
    frequencies = rng.dirichlet(np.full(n_archetypes, 0.5))
    assigned = rng.choice(n_archetypes, size=n_players, p=frequencies)
    spread = rng.uniform(0.5, 1.5, size=(n_archetypes, latent_dim))
    latent = centers[assigned] + spread[assigned] * rng.normal(size=(n_players, latent_dim))
    mix = rng.normal(size=(latent_dim, n_traits))
    offset = rng.normal(size=n_traits)
    raw = latent @ mix + offset + 0.05 * rng.normal(size=(n_players, n_traits))
    ranks = raw.argsort(axis=0).argsort(axis=0)
    features = (ranks + 0.5) / n_players
    labels = np.empty((n_players, n_positions))
    for p in range(n_positions):
        active = rng.choice(n_traits, size=n_active, replace=False)
        weights = np.zeros(n_traits)
        weights[active] = rng.dirichlet(np.ones(n_active))
        labels[:, p] = np.clip(features @ weights, 0.0, 1.0)
    names = tuple(f"position_{p}" for p in range(n_positions))
    return features, labels, names


def split_eval(n_points: int, eval_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split into (pool indices, eval indices)."""
    if not (0.0 < eval_fraction < 1.0):
        raise InvalidInput("eval_fraction must be in (0, 1)")
    n_eval = max(1, int(round(n_points * eval_fraction)))
    if n_eval >= n_points:
        raise InvalidInput("eval split leaves no pool points")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_points)
    return np.sort(order[n_eval:]), np.sort(order[:n_eval])
