"""Bayesian inference for the Brown-Resnick max-stable process.

A numpy/scipy library covering exact evaluation of the joint density of
componentwise maxima and their event partitions, random-partition Gibbs and
pseudo-marginal MCMC, space-time declustering, hierarchical GEV margins with
a latent Gaussian location surface, exact simulation, and predictive
diagnostics.
"""

from .data import Dataset, StationTable, load_dataset, load_stations, save_dataset
from .declustering import (
    OccurrenceRecord,
    decluster_dataset,
    decluster_year,
    load_partitions,
    resolve_ties,
    save_partitions,
)
from .diagnostics import diagnostics_export, empirical_extremal_coefficients
from .errors import (
    AnchorCoincident,
    BrownResnickError,
    ConfigInvalid,
    DimensionTooLarge,
    EmptyBlock,
    EmptyDays,
    GroundMismatch,
    NonConvergence,
    NotPositiveDefinite,
    OutOfSupport,
    ParseError,
    PartitionMismatch,
    SchemaError,
    ShapeTooLarge,
)
from .exponent import (
    BrModel,
    FrechetVector,
    McValue,
    exponent_v,
    extremal_coefficient,
    full_density_enum,
    neg_partial_v,
    st_joint_density,
    st_log_density,
)
from .gaussian import (
    SiteSet,
    StableVariogram,
    build_covariance,
    cholesky_factor,
    default_anchor,
    sample_gp,
    semivariogram,
)
from .likelihood import LikelihoodEvaluator, ParameterState, total_loglik, year_loglik
from .margins import (
    GevField,
    GevParams,
    exceedance_prob,
    fit_gev_site,
    frechet_pair,
    gev_eval,
    gev_mean_forecast,
)
from .mcmc import (
    ChainConfig,
    ChainState,
    PosteriorSamples,
    PriorSpec,
    ScalarPrior,
    run_chains,
)
from .mvn import MvnEstimate, mvn_cdf
from .partitions import (
    SetPartition,
    bell_number,
    enumerate_partitions,
    exact_conditional,
    gibbs_sweep,
    rand_index,
)
from .simulation import (
    BrSimulator,
    GridSpec,
    exceedance_map,
    group_extreme_predictive,
    krige_random_effect,
    mean_map,
    simulate_simple_br,
    simulate_temperature_field,
)

__all__ = [
    "AnchorCoincident", "BrModel", "BrSimulator", "BrownResnickError",
    "ChainConfig", "ChainState", "ConfigInvalid", "Dataset",
    "DimensionTooLarge", "EmptyBlock", "EmptyDays", "FrechetVector",
    "GevField", "GevParams", "GridSpec", "GroundMismatch",
    "LikelihoodEvaluator", "McValue", "MvnEstimate", "NonConvergence",
    "NotPositiveDefinite", "OccurrenceRecord", "OutOfSupport",
    "ParameterState", "ParseError", "PartitionMismatch", "PosteriorSamples",
    "PriorSpec", "ScalarPrior", "SchemaError", "SetPartition",
    "ShapeTooLarge", "SiteSet", "StableVariogram", "StationTable",
    "bell_number", "build_covariance", "cholesky_factor",
    "decluster_dataset", "decluster_year", "default_anchor",
    "diagnostics_export", "empirical_extremal_coefficients",
    "enumerate_partitions", "exact_conditional", "exceedance_map",
    "exceedance_prob", "exponent_v", "extremal_coefficient", "fit_gev_site",
    "frechet_pair", "full_density_enum", "gev_eval", "gev_mean_forecast",
    "gibbs_sweep", "group_extreme_predictive", "krige_random_effect",
    "load_dataset", "load_partitions", "load_stations", "mean_map",
    "mvn_cdf", "neg_partial_v", "rand_index", "resolve_ties", "run_chains",
    "sample_gp", "save_dataset", "save_partitions", "semivariogram",
    "simulate_simple_br", "simulate_temperature_field", "st_joint_density",
    "st_log_density", "total_loglik", "year_loglik",
]
