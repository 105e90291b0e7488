"""Posterior-sample post-processing: predictive tables, zero probabilities,
credible intervals, the simulation-based calibration study, backtests on
truncated histories and the new-entity chapter estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainConfig, PosteriorSamples, run_chain
from .data import PovMatrix, drop_zero_rows, submatrix
from .errors import ConfigError, DomainError
from .model import Hyperparams, ModelConfig, simulate_dataset
from .rng import RngState

DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)


# --------------------------------------------------------------------------
# predictive summaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PredictiveTable:
    """Per-entity histogram of predicted counts over {0, ..., max}."""

    entity_names: tuple[str, ...]
    histogram: np.ndarray  # (N, max_count + 1) int
    n: int


def _pred_matrix(samples: PosteriorSamples, step: int) -> np.ndarray:
    if step == 1:
        return samples.pred_next
    if step == 2:
        return samples.pred_next2
    raise DomainError(f"step must be 1 (period d+1) or 2 (period d+2), got {step}")


def predictive_table(samples: PosteriorSamples, step: int = 1) -> PredictiveTable:
    """Exact tabulation of the predictive draws, one row per entity."""
    pred = _pred_matrix(samples, step)
    width = int(pred.max()) + 1
    hist = np.zeros((pred.shape[1], width), dtype=np.int64)
    for i in range(pred.shape[1]):
        hist[i] = np.bincount(pred[:, i], minlength=width)
    return PredictiveTable(samples.entity_names, hist, samples.n)


def zero_probability(samples: PosteriorSamples, step: int = 1) -> np.ndarray:
    """Per-entity posterior probability of a zero count."""
    table = predictive_table(samples, step)
    return table.histogram[:, 0] / table.n


def credible_interval(draws, alpha: float) -> tuple[float, float]:
    """Central credible interval by nearest-rank quantiles.

    Endpoints are order statistics: the ceil(n(1-alpha)/2)-th from below
    and the ceil(n(1+alpha)/2)-th; integer draws give integer endpoints.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    arr = np.sort(np.asarray(draws).ravel())
    n = arr.size
    if n == 0:
        raise DomainError("draws must be non-empty")
    lo_rank = max(math.ceil(n * (1 - alpha) / 2), 1)
    hi_rank = min(math.ceil(n * (1 + alpha) / 2), n)
    lo, hi = arr[lo_rank - 1], arr[hi_rank - 1]
    if np.issubdtype(arr.dtype, np.integer):
        return int(lo), int(hi)
    return float(lo), float(hi)


# --------------------------------------------------------------------------
# calibration study
# --------------------------------------------------------------------------

@dataclass
class CoverageReport:
    """Interval hit counts pooled over replicates, per nominal level."""

    alphas: tuple[float, ...]
    hits: np.ndarray  # per alpha
    totals: np.ndarray  # per alpha
    replicates: int

    def coverage(self) -> dict[float, float]:
        return {
            a: (int(h) / int(t) if t else float("nan"))
            for a, h, t in zip(self.alphas, self.hits, self.totals)
        }


@dataclass
class CalibrationResult:
    hyper: CoverageReport
    predictive: CoverageReport
    base: Hyperparams
    drop_zero_rows: bool
    failed: list[tuple[int, str]] = field(default_factory=list)


def perturb_hyperparams(rng: RngState, base: Hyperparams) -> Hyperparams:
    """Jitter locations additively and scales multiplicatively."""
    gen = rng.generator
    return Hyperparams(
        base.mu_lambda + 0.1 * gen.standard_normal(),
        base.sigma_lambda * math.exp(0.01 * gen.standard_normal()),
        base.mu_tau + 0.1 * gen.standard_normal(),
        base.sigma_tau * math.exp(0.01 * gen.standard_normal()),
        base.mu_beta + 0.1 * gen.standard_normal(),
        base.sigma_beta * math.exp(0.01 * gen.standard_normal()),
    )


def run_replicate(
    rng: RngState,
    base: Hyperparams,
    chain_config: ChainConfig,
    n_entities: int = 24,
    n_periods: int = 5,
    drop_zero: bool = False,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
):
    """One calibration replicate; returns per-alpha (hyper hits, pred hits, totals)."""
    truth = perturb_hyperparams(rng, base)
    model_cfg = ModelConfig(horizon=chain_config.horizon)
    full = simulate_dataset(rng, truth, n_entities, model_cfg, n_periods=n_periods + 1)
    keep = np.arange(full.n_entities)
    train_counts = full.counts[:, :n_periods]
    if drop_zero:
        keep = np.flatnonzero(train_counts.any(axis=1))
        if keep.size == 0:
            raise DomainError("all training rows were zero after deletion")
    train = PovMatrix(
        tuple(full.entity_names[i] for i in keep),
        train_counts[keep],
        full.period_labels[:n_periods],
    )
    truth_next = full.counts[keep, n_periods]

    fit = run_chain(train, chain_config, rng)
    truth_arr = truth.as_array()

    hyper_hits = np.zeros(len(alphas), dtype=np.int64)
    pred_hits = np.zeros(len(alphas), dtype=np.int64)
    for k, alpha in enumerate(alphas):
        for p in range(6):
            lo, hi = credible_interval(fit.hyper_draws[:, p], alpha)
            hyper_hits[k] += lo <= truth_arr[p] <= hi
        for i in range(truth_next.size):
            lo, hi = credible_interval(fit.pred_next[:, i], alpha)
            pred_hits[k] += lo <= truth_next[i] <= hi
    return hyper_hits, pred_hits, 6, truth_next.size


def calibration_study(
    rng: RngState,
    base: Hyperparams,
    replicates: int = 100,
    chain_config: ChainConfig = ChainConfig(),
    n_entities: int = 24,
    n_periods: int = 5,
    drop_zero_rows: bool = False,
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
    progress=None,
) -> CalibrationResult:
    """Simulate-and-refit study pooling interval coverage over replicates.

    Replicate r runs on its own stream keyed by (master seed, r + 1), so
    results do not depend on execution order.  Failed replicates are
    recorded and excluded from the denominators.
    """
    if replicates < 1:
        raise DomainError("replicates must be at least 1")
    n_alpha = len(alphas)
    hyper_hits = np.zeros(n_alpha, dtype=np.int64)
    pred_hits = np.zeros(n_alpha, dtype=np.int64)
    hyper_tot = np.zeros(n_alpha, dtype=np.int64)
    pred_tot = np.zeros(n_alpha, dtype=np.int64)
    failed: list[tuple[int, str]] = []
    for r in range(replicates):
        rep_rng = RngState(rng.seed, rng.stream + 1 + r)
        try:
            hh, ph, nh, npred = run_replicate(
                rep_rng, base, chain_config, n_entities, n_periods, drop_zero_rows, alphas
            )
        except Exception as exc:  # noqa: BLE001 - record, never abort the study
            failed.append((r, f"{type(exc).__name__}: {exc}"))
            continue
        hyper_hits += hh
        pred_hits += ph
        hyper_tot += nh
        pred_tot += npred
        if progress is not None:
            progress(r)
    done = replicates - len(failed)
    return CalibrationResult(
        hyper=CoverageReport(tuple(alphas), hyper_hits, hyper_tot, done),
        predictive=CoverageReport(tuple(alphas), pred_hits, pred_tot, done),
        base=base,
        drop_zero_rows=drop_zero_rows,
        failed=failed,
    )


# --------------------------------------------------------------------------
# backtest on truncated histories
# --------------------------------------------------------------------------

@dataclass
class BacktestReport:
    entity_names: tuple[str, ...]
    true_values: np.ndarray
    interval50: list[tuple[int, int]]
    interval80: list[tuple[int, int]]
    hit50: np.ndarray
    hit80: np.ndarray
    dropped: tuple[str, ...]
    note: str = ""


def backtest(
    matrix: PovMatrix,
    train_cols,
    target_col: int,
    chain_config: ChainConfig = ChainConfig(),
    rng: RngState | None = None,
    note: str = "",
) -> BacktestReport:
    """Fit on a column subset and score predictive intervals on a held-out column.

    The target must be one or two periods past the training columns (the
    model only predicts d+1 and d+2).  All-zero training rows are dropped
    before the fit, matching the model's training contract.
    """
    train_cols = sorted(train_cols)
    if target_col in train_cols:
        raise ConfigError("target column must not be a training column")
    if train_cols != list(range(1, len(train_cols) + 1)):
        raise ConfigError("training columns must be contiguous from 1")
    step = target_col - train_cols[-1]
    if step not in (1, 2):
        raise ConfigError("target column must be 1 or 2 periods past the training columns")
    if not 1 <= target_col <= matrix.n_periods:
        raise ConfigError(f"target column {target_col} out of range")

    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        train_all = submatrix(matrix, range(1, matrix.n_entities + 1), train_cols)
    dropped = tuple(train_all.entity_names[i] for i in train_all.zero_row_indices)
    train = drop_zero_rows(train_all) if dropped else train_all

    fit = run_chain(train, chain_config, rng)
    name_to_row = {name: i for i, name in enumerate(matrix.entity_names)}
    truth = np.array(
        [matrix.counts[name_to_row[n], target_col - 1] for n in train.entity_names]
    )
    pred = _pred_matrix(fit, step)
    iv50 = [credible_interval(pred[:, i], 0.5) for i in range(train.n_entities)]
    iv80 = [credible_interval(pred[:, i], 0.8) for i in range(train.n_entities)]
    hit50 = np.array([lo <= v <= hi for v, (lo, hi) in zip(truth, iv50)])
    hit80 = np.array([lo <= v <= hi for v, (lo, hi) in zip(truth, iv80)])
    return BacktestReport(train.entity_names, truth, iv50, iv80, hit50, hit80, dropped, note)


# --------------------------------------------------------------------------
# new-entity estimate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NewEntityEstimate:
    mean_existing_total: float
    typical_total: float
    estimate: float


def new_entity_estimate(samples: PosteriorSamples, typical_total: float = 70.0) -> NewEntityEstimate:
    """Expected next-period chapters left over for not-yet-seen entities."""
    totals = samples.pred_next.sum(axis=1)
    mean_total = float(totals.mean())
    return NewEntityEstimate(mean_total, float(typical_total), float(typical_total) - mean_total)
