"""Hierarchical on-stage-window Poisson forecasting for count matrices."""

from .analysis import (
    BacktestReport,
    CalibrationResult,
    CoverageReport,
    NewEntityEstimate,
    PredictiveTable,
    backtest,
    calibration_study,
    credible_interval,
    new_entity_estimate,
    predictive_table,
    zero_probability,
)
from .chain import ChainConfig, PosteriorSamples, run_chain, update_latent_grid, update_location_scale
from .data import (
    PovMatrix,
    SmoothedMatrix,
    load_matrix,
    load_table1,
    new_entity_counts,
    serialize,
    smooth,
    submatrix,
    table1_path,
)
from .model import (
    CharacterLatents,
    Hyperparams,
    ModelConfig,
    count_log_density,
    in_window,
    row_log_likelihood,
    sample_predictive,
    simulate_dataset,
    simulate_entity,
)
from .rng import (
    RngState,
    sample_categorical,
    sample_invgamma,
    sample_normal,
    sample_poisson,
    sample_truncnorm,
)
from .store import load_samples, save_samples

__version__ = "0.1.0"
