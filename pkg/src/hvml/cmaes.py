"""Rank-one covariance matrix adaptation.

A deliberately small CMA-ES: Gaussian sampling around a mean with step size
sigma and full covariance C, weighted recombination of the top-mu samples
for the mean, and a rank-one outer-product update for C. No evolution paths,
no rank-mu term, no step-size adaptation; the covariance contraction itself
provides scale adaptation on convex problems.

Updates use mean-centered, sigma-normalized steps y_i = (theta_i - m) / sigma
by default. Setting ``literal_updates`` feeds the raw sampled parameter
vectors into both updates instead; that variant is kept for study only and
is not dimensionally sensible as an optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError

EIG_FLOOR = 1e-12
# eager eigen-repair is O(L^3); above this size it is deferred to the
# factorization fallback (the update itself preserves PSD exactly)
EAGER_REPAIR_MAX_DIM = 512


def default_lambda(n_dims: int) -> int:
    return 4 + int(3 * math.log(n_dims)) if n_dims > 1 else 8


def default_weights(mu: int) -> np.ndarray:
    """Log-decreasing positive weights, normalized to sum 1."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    w = np.log(mu + 1.0) - np.log(np.arange(1, mu + 1, dtype=float))
    return w / w.sum()


def default_c_cov(n_dims: int) -> float:
    return min(0.5, 2.0 / n_dims**2)


@dataclass(frozen=True)
class CmaState:
    """Search distribution state plus the selection/update constants."""

    mean: np.ndarray
    cov: np.ndarray
    sigma: float
    lambda_pop: int
    mu: int
    weights: np.ndarray
    c_cov: float
    literal_updates: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        n = mean.size
        if cov.shape != (n, n):
            raise ValueError(f"covariance must be {n}x{n}, got {cov.shape}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0 (0 only degenerates sampling to the mean)")
        if self.lambda_pop < 2:
            raise ValueError("population size must be >= 2")
        if not 1 <= self.mu < self.lambda_pop:
            raise ValueError(f"mu must satisfy 1 <= mu < lambda, got mu={self.mu} lambda={self.lambda_pop}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.mu,):
            raise ValueError(f"need exactly mu={self.mu} weights, got {w.shape}")
        if (w <= 0).any() or (np.diff(w) >= 0).any() and self.mu > 1:
            raise ValueError("weights must be strictly decreasing and positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if not 0.0 <= self.c_cov < 1.0 + 1e-12:
            raise ValueError(f"c_cov must lie in [0, 1], got {self.c_cov}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "weights", w)

    @property
    def n_dims(self) -> int:
        return self.mean.size

    @classmethod
    def initial(cls, n_dims: int, mean=None, sigma: float = 0.3, lambda_pop=None,
                mu=None, weights=None, c_cov=None, literal_updates: bool = False) -> "CmaState":
        lam = int(lambda_pop) if lambda_pop is not None else default_lambda(n_dims)
        m = int(mu) if mu is not None else max(1, lam // 2)
        return cls(
            mean=np.zeros(n_dims) if mean is None else np.asarray(mean, dtype=float),
            cov=np.eye(n_dims),
            sigma=float(sigma),
            lambda_pop=lam,
            mu=m,
            weights=default_weights(m) if weights is None else np.asarray(weights, dtype=float),
            c_cov=float(c_cov) if c_cov is not None else default_c_cov(n_dims),
            literal_updates=literal_updates,
        )


def repair_covariance(cov: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetrize and clamp eigenvalues below the floor."""
    sym = (cov + cov.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= floor:
        return sym
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of C, repairing indefiniteness if needed."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    repaired = repair_covariance(cov)
    for jitter in (0.0, 1e-12, 1e-9, 1e-6):
        try:
            return np.linalg.cholesky(repaired + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericError("covariance factorization failed after repair")


def sample_population(state: CmaState, seed) -> np.ndarray:
    """Draw lambda parameter vectors m + sigma * N(0, C); fixed seed, fixed result."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((state.lambda_pop, state.n_dims))
    if state.sigma == 0.0:
        return np.tile(state.mean, (state.lambda_pop, 1))
    a = _factor(state.cov)
    return state.mean + state.sigma * (z @ a.T)


def ranked_steps(state: CmaState, top_params: np.ndarray) -> np.ndarray:
    """Steps of the top-mu parameter vectors (already sorted best-first).

    Centered mode returns y_i = (theta_i - m) / sigma (zero steps when
    sigma == 0, where every sample equals the mean); literal mode returns
    the raw theta_i.
    """
    top = np.atleast_2d(np.asarray(top_params, dtype=float))
    if top.shape[0] < state.mu:
        raise ValueError(f"need at least mu={state.mu} ranked candidates, got {top.shape[0]}")
    top = top[: state.mu]
    if state.literal_updates:
        return top
    if state.sigma == 0.0:
        return np.zeros_like(top)
    return (top - state.mean) / state.sigma


def update_mean(state: CmaState, steps: np.ndarray) -> np.ndarray:
    """m' = m + sigma * sum_i w_i y_i."""
    steps = np.atleast_2d(np.asarray(steps, dtype=float))
    if steps.shape[0] < state.mu:
        raise ValueError(f"need at least mu={state.mu} ranked steps, got {steps.shape[0]}")
    v = state.weights @ steps[: state.mu]
    return state.mean + state.sigma * v


def update_covariance(state: CmaState, steps: np.ndarray) -> np.ndarray:
    """C' = (1 - c_cov) C + c_cov (sum_i w_i y_i)(sum_i w_i y_i)^T, repaired."""
    steps = np.atleast_2d(np.asarray(steps, dtype=float))
    if steps.shape[0] < state.mu:
        raise ValueError(f"need at least mu={state.mu} ranked steps, got {steps.shape[0]}")
    v = state.weights @ steps[: state.mu]
    new_cov = (1.0 - state.c_cov) * state.cov + state.c_cov * np.outer(v, v)
    new_cov = (new_cov + new_cov.T) / 2.0
    if state.n_dims <= EAGER_REPAIR_MAX_DIM:
        new_cov = repair_covariance(new_cov)
    return new_cov


def evolve(state: CmaState, ranked_params: np.ndarray) -> CmaState:
    """One full distribution update from the top-mu parameter vectors."""
    steps = ranked_steps(state, ranked_params)
    return replace(state, mean=update_mean(state, steps), cov=update_covariance(state, steps))


def minimize_sphere(dim: int, budget: int, seed, lambda_pop: int = 16, mu: int = 8,
                    sigma: float = 0.3, c_cov=None) -> float:
    """Self-test harness: run the full loop on f(x) = ||x||^2 from m = (1,...,1).

    Returns the best function value seen; budget counts epochs (budget 0
    returns f of the initial mean, which is dim).
    """
    state = CmaState.initial(
        dim, mean=np.ones(dim), sigma=sigma, lambda_pop=lambda_pop, mu=mu,
        c_cov=c_cov if c_cov is not None else default_c_cov(dim),
    )
    best = float(np.sum(state.mean**2))
    root = np.random.SeedSequence(seed)
    for epoch in range(int(budget)):
        pop = sample_population(state, np.random.SeedSequence((root.entropy, epoch)))
        values = np.sum(pop**2, axis=1)
        best = min(best, float(values.min()))
        order = np.argsort(values, kind="stable")  # ascending; ties keep sample order
        state = evolve(state, pop[order[: state.mu]])
    return best
