"""Gibbs sampler for the windowed-Poisson hierarchy.

One iteration updates, in order:

1. the six hyperparameters, by conjugate normal / inverse-gamma sweeps on
   {log lam_i}, {tau_i} and {beta_i} (the [0, 7] truncation of tau and
   beta is ignored in these updates; the calibration study is the check
   that this approximation is harmless);
2. each entity's lam_i, tau_i, beta_i in that order, by discretizing the
   full conditional on a grid ("histogram approximation"), sampling a
   cell proportionally to the density at its center and jittering
   uniformly within the cell (restricted to the conditional's support,
   so impossible states are never produced);
3. predictive counts for periods d+1 and d+2 from the current latents.

lam uses equal-width cells in log space; tau and beta use linear grids
on [0, horizon].  After burn-in, every thin-th iteration is retained.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .data import PovMatrix, SmoothedMatrix
from .errors import AllZeroWeightError, ConfigError, DegenerateError, DomainError
from .model import CharacterLatents, Hyperparams
from .rng import RngState, sample_invgamma

_JITTER_EPS = 1e-9


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 101000
    burn_in: int = 1000
    thin: int = 100
    grid_points: int = 512
    lambda_grid_max: float | None = None  # default: exp(initial mean log-rate + 8)
    lambda_grid_min: float | None = None  # default: exp(initial mean log-rate - 8)
    seed: int = 0
    prior_loc_sd: float = 1000.0
    prior_scale_shape: float = 0.001
    prior_scale_rate: float = 0.001
    horizon: int = 7
    random_start: bool = False

    def __post_init__(self):
        if self.iterations <= 0 or self.thin <= 0 or self.grid_points <= 1:
            raise ConfigError("iterations, thin and grid_points must be positive")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if (self.iterations - self.burn_in) % self.thin != 0:
            raise ConfigError(
                f"(iterations - burn_in) = {self.iterations - self.burn_in} "
                f"must be divisible by thin = {self.thin}"
            )
        if self.prior_loc_sd <= 0 or self.prior_scale_shape <= 0 or self.prior_scale_rate <= 0:
            raise ConfigError("prior parameters must be positive")

    @property
    def n_samples(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass(frozen=True)
class PosteriorSamples:
    """Thinned chain output; all arrays share the first (sample) axis."""

    hyper_draws: np.ndarray  # (n, 6)
    lambda_draws: np.ndarray  # (n, N)
    tau_draws: np.ndarray  # (n, N)
    beta_draws: np.ndarray  # (n, N)
    pred_next: np.ndarray  # (n, N) int
    pred_next2: np.ndarray  # (n, N) int
    entity_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.hyper_draws.shape[0]

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def latent_draws(self) -> np.ndarray:
        """(n, N, 3) stack in (lam, tau, beta) order."""
        return np.stack([self.lambda_draws, self.tau_draws, self.beta_draws], axis=2)


def update_location_scale(
    rng: RngState,
    values,
    prior_loc_sd: float = 1000.0,
    prior_scale_shape: float = 0.001,
    prior_scale_rate: float = 0.001,
    loc: float | None = None,
    truncation: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """One conjugate sweep of the normal location/scale conditional.

    ``loc`` is the current location (defaults to the sample mean) used in
    the scale update's sum of squares.  ``truncation`` records that the
    values came from a truncated normal; the update deliberately treats
    them as untruncated observations, which keeps the sweep conjugate.
    """
    del truncation  # recorded by the caller, intentionally unused here
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise DegenerateError(f"need at least 2 values, got {v.size}")
    if prior_loc_sd <= 0 or prior_scale_shape <= 0 or prior_scale_rate <= 0:
        raise DomainError("prior parameters must be positive")
    n = v.size
    center = float(v.mean()) if loc is None else float(loc)

    ss = float(np.square(v - center).sum())
    var = sample_invgamma(rng, prior_scale_shape + 0.5 * n, prior_scale_rate + 0.5 * ss)

    precision = n / var + 1.0 / prior_loc_sd**2
    post_mean = (v.sum() / var) / precision
    post_sd = math.sqrt(1.0 / precision)
    new_loc = post_mean + post_sd * float(rng.generator.standard_normal())
    return new_loc, math.sqrt(var)


def _rowwise_categorical(gen: np.random.Generator, log_weights: np.ndarray):
    """Sample one cell per row of a log-weight matrix.

    Rows whose every cell is -inf are returned with ok=False; the caller
    keeps the current coordinate there.  Uniforms are always consumed for
    every row so the RNG stream does not depend on data values.
    """
    m = log_weights.max(axis=1)
    ok = np.isfinite(m)
    safe = np.where(ok, m, 0.0)
    w = np.exp(log_weights - safe[:, None])
    w[~np.isfinite(log_weights)] = 0.0
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    u = gen.random(log_weights.shape[0]) * total
    idx = (cum <= u[:, None]).sum(axis=1)
    idx = np.minimum(idx, log_weights.shape[1] - 1)
    return idx, ok


class _GridSpec:
    """Precomputed cell centers/edges for the three coordinates."""

    def __init__(self, grid_points: int, horizon: float, log_lam_min: float, log_lam_max: float):
        g = grid_points
        self.log_lam_edges = np.linspace(log_lam_min, log_lam_max, g + 1)
        self.log_lam_centers = 0.5 * (self.log_lam_edges[:-1] + self.log_lam_edges[1:])
        self.lam_centers = np.exp(self.log_lam_centers)
        self.win_edges = np.linspace(0.0, horizon, g + 1)
        self.win_centers = 0.5 * (self.win_edges[:-1] + self.win_edges[1:])
        self.win_cell = self.win_edges[1] - self.win_edges[0]


class _State:
    """Mutable sampler state for one data matrix.

    Window sums are computed from prefix sums over periods: period t is
    in-window exactly when floor(beta - tau) + 1 <= t <= ceil(beta + tau) - 1,
    which handles the strict inequality including exact-integer edges.
    """

    def __init__(self, X: np.ndarray, horizon: float):
        self.X = X
        self.N, self.d = X.shape
        self.horizon = horizon
        self.t = np.arange(1, self.d + 1, dtype=np.float64)
        self.pos = X > 0
        self.lgX = gammaln(X + 1.0)
        self.any_pos = self.pos.any(axis=1)
        zeros = np.zeros((self.N, 1))
        self.cum_x = np.hstack([zeros, np.cumsum(X, axis=1)])  # (N, d+1)
        self.cum_pos = np.hstack([zeros, np.cumsum(self.pos, axis=1)])
        self.n_pos = self.pos.sum(axis=1).astype(np.float64)
        self.row_base = (np.arange(self.N, dtype=np.int64) * (self.d + 1))[:, None]
        # per row: positions of first/last positive period (1-based)
        first = np.where(self.any_pos, np.argmax(self.pos, axis=1) + 1, 0)
        last = np.where(self.any_pos, self.d - np.argmax(self.pos[:, ::-1], axis=1), 0)
        self.first_pos = first.astype(np.float64)
        self.last_pos = last.astype(np.float64)
        self.lam = np.empty(self.N)
        self.tau = np.empty(self.N)
        self.beta = np.empty(self.N)

    def initialize(self, config: ChainConfig, gen: np.random.Generator):
        X, pos = self.X, self.pos
        with np.errstate(invalid="ignore"):
            row_mean = np.where(
                self.any_pos, X.sum(axis=1) / np.maximum(pos.sum(axis=1), 1), 1.0
            )
        self.lam = np.maximum(row_mean, 1e-6)
        mid = np.where(self.any_pos, 0.5 * (self.first_pos + self.last_pos), 3.5)
        span_half = np.where(self.any_pos, 0.5 * (self.last_pos - self.first_pos), 0.0)
        self.beta = np.clip(mid, 0.0, self.horizon)
        self.tau = np.clip(span_half + 1.0, 0.0, self.horizon)
        if config.random_start:
            self.lam = self.lam * np.exp(0.5 * gen.standard_normal(self.N))
            need = span_half + _JITTER_EPS
            self.tau = np.clip(need + 0.05 + np.abs(gen.standard_normal(self.N)), 0.0, self.horizon)
            lo = np.maximum(self.last_pos - self.tau + _JITTER_EPS, 0.0)
            hi = np.minimum(self.first_pos + self.tau - _JITTER_EPS, self.horizon)
            lo = np.where(self.any_pos, lo, 0.0)
            hi = np.where(self.any_pos, hi, self.horizon)
            self.beta = lo + gen.random(self.N) * np.maximum(hi - lo, 0.0)

    def initial_hyper(self) -> Hyperparams:
        log_lam = np.log(self.lam)
        return Hyperparams(
            float(log_lam.mean()),
            max(float(log_lam.std()), 0.1),
            float(self.tau.mean()),
            max(float(self.tau.std()), 0.1),
            float(self.beta.mean()),
            max(float(self.beta.std()), 0.1),
        )

    def cum_poisson_terms(self) -> np.ndarray:
        """Prefix sums of the per-period Poisson log-mass at the current rates."""
        pt = self.X * np.log(self.lam)[:, None] - self.lam[:, None] - self.lgX
        return np.hstack([np.zeros((self.N, 1)), np.cumsum(pt, axis=1)])

    # --- validity bounds for the jitter step -------------------------------
    def beta_support(self):
        """Open interval of beta values keeping all positive counts in-window."""
        lo = np.where(self.any_pos, self.last_pos - self.tau, -np.inf)
        hi = np.where(self.any_pos, self.first_pos + self.tau, np.inf)
        return lo, hi

    def tau_support(self):
        """Minimum tau keeping all positive counts in-window."""
        gap = np.abs(self.t[None, :] - self.beta[:, None])
        gap = np.where(self.pos, gap, -np.inf).max(axis=1)
        return np.where(self.any_pos, gap, -np.inf)


def _window_span(lo_real, hi_real, d: int):
    """1-based inclusive period range strictly inside (lo_real, hi_real)."""
    lo = np.floor(lo_real).astype(np.int64) + 1
    hi = np.ceil(hi_real).astype(np.int64) - 1
    lo = np.clip(lo, 1, d + 1)
    hi = np.clip(hi, 0, d)
    return lo, hi


def _interval_sum(cum: np.ndarray, lo, hi, row_base: np.ndarray):
    """Row-wise sums of columns lo..hi (1-based) from a prefix-sum matrix.

    row_base holds each row's offset into the flattened matrix; flat fancy
    indexing is measurably faster than take_along_axis here.
    """
    flat = cum.ravel()
    take_hi = flat[row_base + hi]
    take_lo = flat[row_base + lo - 1]
    return np.where(hi >= lo, take_hi - take_lo, 0.0)


def _update_lambda(state: _State, grid: _GridSpec, hyper: Hyperparams, gen):
    lo, hi = _window_span(state.beta - state.tau, state.beta + state.tau, state.d)
    lo = lo[:, None]
    hi = hi[:, None]
    S = _interval_sum(state.cum_x, lo, hi, state.row_base)[:, 0]
    k = np.maximum(hi - lo + 1, 0)[:, 0].astype(np.float64)
    ll = S[:, None] * grid.log_lam_centers[None, :] - k[:, None] * grid.lam_centers[None, :]
    prior = -0.5 * ((grid.log_lam_centers - hyper.mu_lambda) / hyper.sigma_lambda) ** 2
    idx, ok = _rowwise_categorical(gen, ll + prior[None, :])
    u = gen.random(state.N)
    lo = grid.log_lam_edges[idx]
    hi = grid.log_lam_edges[idx + 1]
    new = np.exp(lo + u * (hi - lo))
    state.lam = np.where(ok, new, state.lam)
    return idx, ok


def _update_window_coord(
    state: _State, grid: _GridSpec, hyper: Hyperparams, gen, which: str, cum_pt: np.ndarray
):
    centers = grid.win_centers[None, :]  # (1, G)
    if which == "beta":
        lo, hi = _window_span(centers - state.tau[:, None], centers + state.tau[:, None], state.d)
        mu, sigma = hyper.mu_beta, hyper.sigma_beta
    else:
        beta = state.beta[:, None]
        lo, hi = _window_span(beta - centers, beta + centers, state.d)
        mu, sigma = hyper.mu_tau, hyper.sigma_tau
    contrib = _interval_sum(cum_pt, lo, hi, state.row_base)  # (N, G)
    pos_in = _interval_sum(state.cum_pos, lo, hi, state.row_base)
    bad = pos_in < state.n_pos[:, None]
    logw = contrib - 0.5 * ((grid.win_centers - mu) / sigma) ** 2
    logw[bad] = -np.inf
    idx, ok = _rowwise_categorical(gen, logw)
    u = gen.random(state.N)
    cell_lo = grid.win_edges[idx]
    cell_hi = grid.win_edges[idx + 1]
    if which == "beta":
        sup_lo, sup_hi = state.beta_support()
        lo = np.maximum(cell_lo, sup_lo + _JITTER_EPS)
        hi = np.minimum(cell_hi, sup_hi - _JITTER_EPS)
    else:
        min_tau = state.tau_support()
        lo = np.maximum(cell_lo, min_tau + _JITTER_EPS)
        hi = cell_hi
    hi = np.maximum(hi, lo)  # degenerate slivers collapse to a point
    new = lo + u * (hi - lo)
    if which == "beta":
        state.beta = np.where(ok, new, state.beta)
    else:
        state.tau = np.where(ok, new, state.tau)
    return idx, ok


def update_latent_grid(
    rng: RngState,
    row,
    current: CharacterLatents,
    hyper: Hyperparams,
    which: Literal["lambda", "tau", "beta"],
    grid_points: int = 512,
    lambda_grid: tuple[float, float] | None = None,
    horizon: float = 7.0,
) -> CharacterLatents:
    """Redraw one coordinate of one entity's latents via the grid sampler."""
    if which not in ("lambda", "tau", "beta"):
        raise DomainError(f"unknown coordinate {which!r}")
    row = np.asarray(row, dtype=np.float64)[None, :]
    state = _State(row, horizon)
    state.lam = np.array([current.lam])
    state.tau = np.array([current.tau])
    state.beta = np.array([current.beta])
    if lambda_grid is None:
        center = math.log(current.lam)
        lambda_grid = (math.exp(center - 8.0), math.exp(center + 8.0))
    grid = _GridSpec(grid_points, horizon, math.log(lambda_grid[0]), math.log(lambda_grid[1]))
    gen = rng.generator
    if which == "lambda":
        _, ok = _update_lambda(state, grid, hyper, gen)
    else:
        _, ok = _update_window_coord(state, grid, hyper, gen, which, state.cum_poisson_terms())
    if not ok[0]:
        # cannot happen when the current state has finite density and the
        # grid resolves its support; surface it rather than keep-current
        raise AllZeroWeightError(f"every grid cell for {which} has zero weight")
    return CharacterLatents(float(state.lam[0]), float(state.tau[0]), float(state.beta[0]))


def run_chain(
    data: PovMatrix | SmoothedMatrix,
    config: ChainConfig = ChainConfig(),
    rng: RngState | None = None,
) -> PosteriorSamples:
    """Full Gibbs loop over a count matrix; returns thinned posterior draws."""
    if rng is None:
        rng = RngState(config.seed)
    gen = rng.generator
    X = np.asarray(data.counts, dtype=np.float64)
    if X.size == 0:
        raise ConfigError("empty data matrix")

    state = _State(X, float(config.horizon))
    state.initialize(config, gen)
    hyper = state.initial_hyper()

    mu_hat = float(np.log(state.lam).mean())
    lam_max = config.lambda_grid_max or math.exp(mu_hat + 8.0)
    lam_min = config.lambda_grid_min or math.exp(mu_hat - 8.0)
    if lam_min <= 0 or lam_min >= lam_max:
        raise ConfigError("need 0 < lambda_grid_min < lambda_grid_max")
    grid = _GridSpec(config.grid_points, float(config.horizon), math.log(lam_min), math.log(lam_max))

    n_keep = config.n_samples
    N, d = state.N, state.d
    hyper_draws = np.empty((n_keep, 6))
    lam_draws = np.empty((n_keep, N))
    tau_draws = np.empty((n_keep, N))
    beta_draws = np.empty((n_keep, N))
    pred_next = np.empty((n_keep, N), dtype=np.int64)
    pred_next2 = np.empty((n_keep, N), dtype=np.int64)

    prev_idx = {c: None for c in ("lambda", "tau", "beta")}
    same_cell = {c: np.zeros(N) for c in ("lambda", "tau", "beta")}

    ls = (config.prior_loc_sd, config.prior_scale_shape, config.prior_scale_rate)
    keep = 0
    for it in range(1, config.iterations + 1):
        mu_l, sd_l = update_location_scale(rng, np.log(state.lam), *ls, loc=hyper.mu_lambda)
        mu_t, sd_t = update_location_scale(
            rng, state.tau, *ls, loc=hyper.mu_tau, truncation=(0.0, config.horizon)
        )
        mu_b, sd_b = update_location_scale(
            rng, state.beta, *ls, loc=hyper.mu_beta, truncation=(0.0, config.horizon)
        )
        hyper = Hyperparams(mu_l, sd_l, mu_t, sd_t, mu_b, sd_b)

        idx_l, _ = _update_lambda(state, grid, hyper, gen)
        cum_pt = state.cum_poisson_terms()
        idx_t, _ = _update_window_coord(state, grid, hyper, gen, "tau", cum_pt)
        idx_b, _ = _update_window_coord(state, grid, hyper, gen, "beta", cum_pt)
        for name, idx in (("lambda", idx_l), ("tau", idx_t), ("beta", idx_b)):
            if prev_idx[name] is not None:
                same_cell[name] += idx == prev_idx[name]
            prev_idx[name] = idx

        rate1 = np.where(np.abs((d + 1) - state.beta) < state.tau, state.lam, 0.0)
        rate2 = np.where(np.abs((d + 2) - state.beta) < state.tau, state.lam, 0.0)
        p1 = gen.poisson(rate1)
        p2 = gen.poisson(rate2)

        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            hyper_draws[keep] = hyper.as_array()
            lam_draws[keep] = state.lam
            tau_draws[keep] = state.tau
            beta_draws[keep] = state.beta
            pred_next[keep] = p1
            pred_next2[keep] = p2
            keep += 1

    denom = max(config.iterations - 1, 1)
    for name, counts in same_cell.items():
        stuck = counts / denom > 0.99
        if stuck.any():
            who = ", ".join(data.entity_names[i] for i in np.flatnonzero(stuck))
            warnings.warn(
                f"{name} grid update is degenerate (same cell > 99%) for: {who}",
                stacklevel=2,
            )

    return PosteriorSamples(
        hyper_draws,
        lam_draws,
        tau_draws,
        beta_draws,
        pred_next,
        pred_next2,
        tuple(data.entity_names),
    )
