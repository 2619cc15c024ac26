"""Nearest-neighbor comparison baseline: observe a few spots, copy the rest."""

from __future__ import annotations

import numpy as np

from .cache import AccuracyCache
from .search import Oracle


def _nearest_fill(
    cache: AccuracyCache, positions: np.ndarray, outcomes: np.ndarray
) -> np.ndarray:
    sampled = (cache.bits[:, positions // 8] >> (positions % 8).astype(np.uint8)) & 1
    distances = (sampled != outcomes.astype(np.uint8)).sum(axis=1)
    nearest = int(np.argmin(distances))  # ties: lowest row index
    prediction = cache.row(nearest).copy()
    prediction[positions] = outcomes
    return prediction


def copy_nearest_expand(
    cache: AccuracyCache, oracle: Oracle, budget: int, seed: int
) -> np.ndarray:
    """Observe ``budget`` random samples, copy the closest cached row elsewhere.

    Positions are drawn without replacement in original coordinates (no
    difficulty ranking).  The reference row minimizing Hamming distance on
    the observed positions fills every unobserved entry.
    """
    if cache.num_models == 0:
        raise ValueError("cache has no reference rows")
    if not 1 <= budget <= cache.num_samples:
        raise ValueError(f"budget {budget} outside [1, {cache.num_samples}]")
    rng = np.random.default_rng(seed)
    positions = np.sort(rng.choice(cache.num_samples, size=budget, replace=False))
    outcomes = np.empty(budget, dtype=bool)
    for t in range(budget):
        outcomes[t] = bool(oracle(int(positions[t])))
    return _nearest_fill(cache, positions, outcomes)


def copy_nearest_expand_from_truth(
    cache: AccuracyCache, truth: np.ndarray, budget: int, seed: int
) -> np.ndarray:
    """Vectorized twin of copy_nearest_expand for a fully known outcome row."""
    if cache.num_models == 0:
        raise ValueError("cache has no reference rows")
    if not 1 <= budget <= cache.num_samples:
        raise ValueError(f"budget {budget} outside [1, {cache.num_samples}]")
    truth = np.asarray(truth).astype(bool)
    if truth.shape != (cache.num_samples,):
        raise ValueError("truth length does not match cache columns")
    rng = np.random.default_rng(seed)
    positions = np.sort(rng.choice(cache.num_samples, size=budget, replace=False))
    return _nearest_fill(cache, positions, truth[positions])
