"""Generative model: on-stage window times Poisson counts.

Each entity i carries a rate ``lam`` and a window (beta - tau, beta + tau)
of periods during which it is "on stage".  Counts inside the window are
Poisson(lam); outside they are identically zero.  The window test is a
strict inequality, so tau = 0 means no on-stage periods at all.

Smoothed data makes counts fractional, so the Poisson log-mass uses
log-gamma in place of the factorial; at integer counts the two agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import PovMatrix
from .errors import DomainError
from .rng import RngState, sample_poisson, sample_truncnorm_many


@dataclass(frozen=True)
class Hyperparams:
    """Population-level parameters of the three random effects."""

    mu_lambda: float
    sigma_lambda: float
    mu_tau: float
    sigma_tau: float
    mu_beta: float
    sigma_beta: float

    FIELDS = ("mu_lambda", "sigma_lambda", "mu_tau", "sigma_tau", "mu_beta", "sigma_beta")

    def __post_init__(self):
        if min(self.sigma_lambda, self.sigma_tau, self.sigma_beta) <= 0:
            raise DomainError("all sigmas must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "Hyperparams":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class CharacterLatents:
    """Per-entity random effects (rate, window half-width, window center)."""

    lam: float
    tau: float
    beta: float

    def __post_init__(self):
        if self.lam <= 0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not 0 <= self.tau <= 7 or not 0 <= self.beta <= 7:
            raise DomainError("tau and beta must lie in [0, 7]")


@dataclass(frozen=True)
class ModelConfig:
    horizon: int = 7  # upper bound of the tau/beta support and the last period
    strict_window: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon must be at least 1")


DEFAULT_CONFIG = ModelConfig()


def in_window(t: float, latents: CharacterLatents, config: ModelConfig = DEFAULT_CONFIG) -> bool:
    """True when period t falls inside the entity's on-stage window."""
    gap = abs(t - latents.beta)
    return gap < latents.tau if config.strict_window else gap <= latents.tau


def count_log_density(
    x: float, latents: CharacterLatents, t: float, config: ModelConfig = DEFAULT_CONFIG
) -> float:
    """Log density of one count cell; -inf for impossible observations."""
    if x < 0:
        raise DomainError(f"counts must be non-negative, got {x}")
    if in_window(t, latents, config):
        lam = latents.lam
        return x * math.log(lam) - lam - float(gammaln(x + 1.0))
    return 0.0 if x == 0 else -math.inf


def row_log_likelihood(
    row, latents: CharacterLatents, config: ModelConfig = DEFAULT_CONFIG
) -> float:
    """Log likelihood of one entity's count row, periods 1..len(row)."""
    total = 0.0
    for t, x in enumerate(row, start=1):
        term = count_log_density(float(x), latents, t, config)
        if term == -math.inf:
            return -math.inf
        total += term
    return total


def simulate_entity(
    rng: RngState,
    hyper: Hyperparams,
    config: ModelConfig = DEFAULT_CONFIG,
    n_periods: int | None = None,
) -> tuple[CharacterLatents, np.ndarray]:
    """Draw one entity's latents and its count row for periods 1..n_periods."""
    n_periods = config.horizon if n_periods is None else n_periods
    lam = math.exp(sample_normal_clipped(rng, hyper.mu_lambda, hyper.sigma_lambda))
    tau = float(sample_truncnorm_many(rng, hyper.mu_tau, hyper.sigma_tau, 0.0, config.horizon, 1)[0])
    beta = float(sample_truncnorm_many(rng, hyper.mu_beta, hyper.sigma_beta, 0.0, config.horizon, 1)[0])
    latents = CharacterLatents(lam, tau, beta)
    row = np.zeros(n_periods, dtype=np.int64)
    for t in range(1, n_periods + 1):
        if in_window(t, latents, config):
            row[t - 1] = sample_poisson(rng, lam)
    return latents, row


def sample_normal_clipped(rng: RngState, mean: float, sd: float) -> float:
    """Normal draw clipped to +/- 40 sd around the mean; keeps exp() finite."""
    if sd <= 0:
        raise DomainError(f"sd must be positive, got {sd}")
    z = rng.generator.standard_normal()
    return mean + sd * float(np.clip(z, -40.0, 40.0))


def simulate_dataset(
    rng: RngState,
    hyper: Hyperparams,
    n_entities: int,
    config: ModelConfig = DEFAULT_CONFIG,
    n_periods: int | None = None,
    drop_zero_rows: bool = False,
) -> PovMatrix:
    """Stack independent entity simulations into a count matrix.

    With drop_zero_rows the result can have fewer than n_entities rows
    (it mimics data collection that never records silent entities).
    """
    if n_entities < 1:
        raise DomainError(f"n_entities must be at least 1, got {n_entities}")
    n_periods = config.horizon if n_periods is None else n_periods
    rows = []
    names = []
    for i in range(n_entities):
        _, row = simulate_entity(rng, hyper, config, n_periods)
        if drop_zero_rows and not row.any():
            continue
        rows.append(row)
        names.append(f"sim{i + 1:03d}")
    if not rows:
        # keep the contract of a non-empty matrix: a single zero row would be
        # invalid training data, so surface it to the caller instead
        raise DomainError("every simulated row was zero and drop_zero_rows is set")
    labels = tuple(f"P{j}" for j in range(1, n_periods + 1))
    return PovMatrix(tuple(names), np.stack(rows), labels)


def sample_predictive(
    rng: RngState, latents: CharacterLatents, t: float, config: ModelConfig = DEFAULT_CONFIG
) -> int:
    """Future-period count draw: Poisson inside the window, zero outside."""
    if in_window(t, latents, config):
        return sample_poisson(rng, latents.lam)
    return 0
