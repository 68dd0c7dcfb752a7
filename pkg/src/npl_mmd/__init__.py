"""Robust Bayesian inference for simulators via the MMD posterior bootstrap."""
from .engine import (BootstrapConfig, PosteriorSample, mmd_posterior_bootstrap,
                     npl_wll_gaussian, posterior_summary)
from .estimator import MMDPosteriorBootstrap, NPLWeightedLikelihood
from .evaluation import (ExperimentConfig, ExperimentResult, bound_check_experiment,
                         estimate_model_mmd, hyperparameter_sweep, nmse, run_experiment,
                         theorem1_bound)
from .exceptions import DivergedOptimisationError, SimulationError
from .kernels import GaussianKernel, median_heuristic, mmd2_grad_u, mmd2_u, mmd2_weighted
from .measures import (Dataset, DPConfig, WeightedMeasure, resample, sample_dirichlet,
                       sample_dp_measure, sample_gem_weights)
from .optimizer import (AdamState, OptimConfig, OptimResult, adam_step, minimize_mmd,
                        random_restart_minimize)
from .simulators import ContaminationSpec, GAndK, GaussianLocation, ToggleSwitch, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BootstrapConfig", "ContaminationSpec", "DPConfig", "Dataset",
    "DivergedOptimisationError", "ExperimentConfig", "ExperimentResult", "GAndK",
    "GaussianKernel", "GaussianLocation", "MMDPosteriorBootstrap", "NPLWeightedLikelihood",
    "OptimConfig", "OptimResult", "PosteriorSample", "SimulationError", "ToggleSwitch",
    "WeightedMeasure", "adam_step", "bound_check_experiment", "estimate_model_mmd",
    "generate_dataset", "hyperparameter_sweep", "median_heuristic", "minimize_mmd",
    "mmd2_grad_u", "mmd2_u", "mmd2_weighted", "mmd_posterior_bootstrap", "nmse",
    "npl_wll_gaussian", "posterior_summary", "random_restart_minimize", "resample",
    "run_experiment", "sample_dirichlet", "sample_dp_measure", "sample_gem_weights",
    "theorem1_bound",
]
