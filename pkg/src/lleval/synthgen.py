"""Synthetic outcome caches from a logistic ability/difficulty model.

Each cell is an independent Bernoulli draw with
p = (1 - noise) * sigmoid((ability - difficulty) / temperature) + noise / 2,
so rows share one global (noisy) difficulty ordering.  All randomness is
keyed by (seed, stream, index), letting held-out rows be regenerated on
demand without storing them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cache import AccuracyCache

_PARAM_STREAM = 0
_ROW_STREAM = 1
_HOLDOUT_STREAM = 2
_ABILITY_STREAM = 3


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic benchmark draw."""

    num_models: int
    num_samples: int
    ability_range: tuple[float, float] = (0.0, 1.0)
    temperature: float = 0.1
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_models < 0 or self.num_samples < 0:
            raise ValueError("counts must be non-negative")
        lo, hi = self.ability_range
        if not lo <= hi:
            raise ValueError("ability_range must be ordered")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.noise <= 0.5:
            raise ValueError("noise must lie in [0, 0.5]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "ability_range", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        return {
            "num_models": self.num_models,
            "num_samples": self.num_samples,
            "ability_range": list(self.ability_range),
            "temperature": self.temperature,
            "noise": self.noise,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "SynthSpec":
        return cls(
            num_models=int(record["num_models"]),
            num_samples=int(record["num_samples"]),
            ability_range=tuple(record.get("ability_range", (0.0, 1.0))),
            temperature=float(record.get("temperature", 0.1)),
            noise=float(record.get("noise", 0.0)),
            seed=int(record.get("seed", 0)),
        )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # two-branch form stays finite for any argument magnitude
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _params(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([spec.seed, _PARAM_STREAM])
    difficulties = rng.random(spec.num_samples)
    lo, hi = spec.ability_range
    abilities = rng.uniform(lo, hi, spec.num_models)
    return difficulties, abilities


def _correct_probability(
    spec: SynthSpec, ability: float, difficulties: np.ndarray
) -> np.ndarray:
    clean = _sigmoid((ability - difficulties) / spec.temperature)
    return (1.0 - spec.noise) * clean + 0.5 * spec.noise


def generate(
    spec: SynthSpec, include_confidence: bool = False
) -> tuple[AccuracyCache, np.ndarray, np.ndarray]:
    """Draw a cache; returns (cache, abilities, difficulties)."""
    difficulties, abilities = _params(spec)
    m, n = spec.num_models, spec.num_samples
    row_bytes = (n + 7) // 8
    bits = np.zeros((m, row_bytes), dtype=np.uint8)
    confidence = np.zeros((m, n), dtype=np.float32) if include_confidence else None
    for i in range(m):
        p = _correct_probability(spec, float(abilities[i]), difficulties)
        u = np.random.default_rng([spec.seed, _ROW_STREAM, i]).random(n)
        row = u < p
        if n:
            bits[i] = np.packbits(row.astype(np.uint8), bitorder="little")
        if confidence is not None:
            confidence[i] = p
    cache = AccuracyCache(m, n, bits, confidence)
    return cache, abilities, difficulties


def _ability_key(ability: float) -> int:
    return int(np.float64(ability).view(np.uint64))


def holdout_outcomes(spec: SynthSpec, ability: float) -> np.ndarray:
    """Full outcome row of a held-out model with the given ability."""
    difficulties, _ = _params(spec)
    p = _correct_probability(spec, float(ability), difficulties)
    u = np.random.default_rng(
        [spec.seed, _HOLDOUT_STREAM, _ability_key(ability)]
    ).random(spec.num_samples)
    return u < p


def holdout_oracle(spec: SynthSpec, ability: float) -> Callable[[int], bool]:
    """Per-sample query function for a held-out model; answers never change."""
    outcomes = holdout_outcomes(spec, ability)

    def oracle(sample_index: int) -> bool:
        return bool(outcomes[sample_index])

    return oracle


def holdout_abilities(spec: SynthSpec, count: int) -> np.ndarray:
    """Deterministic abilities for a held-out model population."""
    if count < 0:
        raise ValueError("count must be non-negative")
    lo, hi = spec.ability_range
    rng = np.random.default_rng([spec.seed, _ABILITY_STREAM])
    return rng.uniform(lo, hi, count)
