"""Bayesian global optimization with dependence-statistic acquisitions.

Gaussian-process surrogates (Matern-5/2), posterior function draws via random
cosine features, distance-correlation and multiscale-graph-correlation
acquisitions next to EI / GP-UCB / MES baselines, CMA-ES inner optimization,
and a regret benchmark harness.
"""

from .acquisition import (
    AcquisitionState,
    MaxValueSamples,
    POLICIES,
    alpha_dc,
    alpha_ei,
    alpha_mes,
    alpha_mgc,
    alpha_ucb,
    next_point,
    sample_maxima,
)
from .benchmarks import TestFunction, catalog, evaluate, oracle_max
from .cmaes import CmaConfig, CmaResult, SearchBox, maximize
from .depstats import (
    DependenceResult,
    LocalCorrMap,
    PairedSamples,
    distance_correlation,
    local_correlation_map,
    mgc_statistic,
    pairwise_distances,
)
from .errors import NumericalError, ObjectiveError, StateError, TooFewSamplesError
from .gp import (
    Dataset,
    GpHyperParams,
    GpPosterior,
    HyperBounds,
    PosteriorFunctionSample,
    fit_hyperparams,
    log_marginal_likelihood,
    posterior_mean_var,
    posterior_mean_var_batch,
    sample_posterior_function,
)
from .harness import (
    ExperimentConfig,
    ExternalObjective,
    RegretTrace,
    ResultTable,
    cumulative_table,
    emit,
    external_objective,
    regret_curve,
    run_experiment,
)
from .kernels import (
    FeatureMap,
    KernelParams,
    approx_kernel,
    feature_vector,
    matern52,
    sample_feature_map,
    spectral_density,
)

__version__ = "0.1.0"
