"""Seismic fragility curves from binary data: Jeffreys-prior Bayesian
inference, SK-prior inference and bootstrap MLE."""

from .im_distribution import IMDensity, IMSample, LogNormalIM, fit_kde, fit_lognormal
from .jeffreys import (PriorGrid, build_prior_grid, fisher_information,
                       log_jeffreys_unnormalized)
from .mcmc import McmcConfig, band_from_chain, run_adaptive_mh
from .metrics import MetricConfig, credibility_width, quadratic_error
from .mle import MleResult, bootstrap_mle, fit_mle
from .priors import flat_prior, jeffreys_prior, sk_prior
from .probit import Dataset, FragilityParams, Observation, log_likelihood
from .reference import mc_fragility
from .synthdata import GeneratorSpec, generate, make_separated

__all__ = [
    "Dataset", "FragilityParams", "GeneratorSpec", "IMDensity", "IMSample",
    "LogNormalIM", "McmcConfig", "MetricConfig", "MleResult", "Observation",
    "PriorGrid", "band_from_chain", "bootstrap_mle", "build_prior_grid",
    "credibility_width", "fisher_information", "fit_kde", "fit_lognormal",
    "fit_mle", "flat_prior", "generate", "jeffreys_prior", "log_likelihood",
    "log_jeffreys_unnormalized", "make_separated", "mc_fragility",
    "quadratic_error", "run_adaptive_mh", "sk_prior",
]
