"""Priors on ``(alpha, beta)`` and the unnormalized log-posterior."""

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .im_distribution import fit_lognormal
from .probit import log_likelihood, log_likelihood_array

DEFAULT_SK_BETA_MAX = 2.0


class ImproperPosteriorWarning(UserWarning):
    """The selected prior leads to a posterior with infinite mass."""


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Prior selection.

    ``kind`` is ``"jeffreys"`` (needs ``grid``), ``"sk"`` (log-normal on
    alpha times ``1/beta``, needs ``mu`` and ``sigma``), ``"flat"`` or
    ``"custom"`` (``log_density(alpha, beta)``, vectorized). A
    ``beta_max`` truncates any of them.
    """

    kind: str
    grid: object = None
    mu: float = None
    sigma: float = None
    beta_max: float = None
    log_density: Callable = None

    def __post_init__(self):
        if self.kind not in ("jeffreys", "sk", "flat", "custom"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "jeffreys" and self.grid is None:
            raise ValueError("Jeffreys prior needs a prior grid")
        if self.kind == "sk" and not (self.sigma is not None and self.sigma > 0
                                      and self.mu is not None):
            raise ValueError("SK prior needs mu and sigma > 0")
        if self.kind == "custom" and self.log_density is None:
            raise ValueError("custom prior needs log_density")
        if self.beta_max is not None and not self.beta_max > 0:
            raise ValueError("beta_max must be positive")

    @property
    def improper_posterior(self):
        return self.kind == "sk" and self.beta_max is None


def jeffreys_prior(grid, beta_max=None):
    return PriorSpec("jeffreys", grid=grid, beta_max=beta_max)


def sk_prior(mu, sigma, beta_max=DEFAULT_SK_BETA_MAX):
    """SK prior; ``beta_max=None`` is the untruncated, improper variant."""
    spec = PriorSpec("sk", mu=float(mu), sigma=float(sigma), beta_max=beta_max)
    if spec.improper_posterior:
        warnings.warn("untruncated SK prior: the posterior is improper in "
                      "beta and MCMC output is not a valid posterior sample",
                      ImproperPosteriorWarning, stacklevel=2)
    return spec


def sk_prior_from_im(im_values, beta_max=DEFAULT_SK_BETA_MAX):
    """SK prior centred on the mean/std of ``log IM``."""
    ln = fit_lognormal(im_values)
    return sk_prior(ln.mu, ln.sigma, beta_max)


def flat_prior():
    return PriorSpec("flat")


def log_prior_array(spec, alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if spec.kind == "jeffreys":
        out = spec.grid.log_prior(alpha, beta)
    elif spec.kind == "sk":
        la = np.log(alpha)
        out = -la - np.log(beta) - (la - spec.mu) ** 2 / (2 * spec.sigma ** 2)
    elif spec.kind == "flat":
        out = np.zeros(np.broadcast(alpha, beta).shape)
    else:
        out = np.asarray(spec.log_density(alpha, beta), dtype=float)
    if spec.beta_max is not None:
        out = np.where(beta > spec.beta_max, -np.inf, out)
    return out


def log_prior(spec, theta):
    """Log prior density at ``theta`` up to an additive constant."""
    return float(log_prior_array(spec, theta.alpha, theta.beta))


def log_posterior_unnorm(spec, data, theta):
    """``log likelihood + log prior``."""
    lp = log_prior(spec, theta)
    if lp == -np.inf:
        return -np.inf
    return log_likelihood(theta, data) + lp


def batch_log_posterior(spec, log_a, z):
    """Vectorized log-posterior over a batch of datasets.

    ``log_a`` and ``z`` have shape ``(n, k)``; the returned function maps
    ``alpha, beta`` of shape ``(n,)`` to the ``n`` log-posteriors, row ``i``
    using dataset ``i``.
    """
    log_a = np.atleast_2d(np.asarray(log_a, dtype=float))
    z = np.atleast_2d(np.asarray(z))

    def target(alpha, beta):
        lp = log_prior_array(spec, alpha, beta)
        ll = log_likelihood_array(alpha, beta, log_a, z)
        return np.where(np.isfinite(lp), ll + lp, -np.inf)

    return target
