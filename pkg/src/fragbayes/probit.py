"""Log-normal (probit) fragility model.

``P_f(a) = Phi((log a - log alpha) / beta)``. Log-probabilities go through
:func:`scipy.special.log_ndtr`, which stays finite far into both tails, so
likelihoods near degenerate parameters (beta -> 0) do not underflow.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class FragilityParams:
    """Median capacity ``alpha`` (m/s^2) and log-standard deviation ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (np.isfinite(a) and a > 0 and np.isfinite(b) and b > 0):
            raise ValueError(
                f"need alpha > 0 and beta > 0, got ({self.alpha}, {self.beta})")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def as_array(self):
        return np.array([self.alpha, self.beta])


@dataclass(frozen=True)
class Observation:
    im: float
    failed: int

    def __post_init__(self):
        if not (np.isfinite(self.im) and self.im > 0):
            raise ValueError(f"IM must be positive, got {self.im}")
        if self.failed not in (0, 1):
            raise ValueError(f"failure flag must be 0 or 1, got {self.failed}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired IM values and binary failure indicators."""

    im: np.ndarray
    failed: np.ndarray

    def __post_init__(self):
        im = np.asarray(self.im, dtype=float).ravel()
        z = np.asarray(self.failed).ravel()
        if im.shape != z.shape:
            raise ValueError("im and failed must have the same length")
        if not np.all(np.isfinite(im)) or np.any(im <= 0):
            raise ValueError("IM values must be finite and strictly positive")
        if not np.all((z == 0) | (z == 1)):
            raise ValueError("failure flags must be 0 or 1")
        object.__setattr__(self, "im", im)
        object.__setattr__(self, "failed", z.astype(np.int8))

    @classmethod
    def from_observations(cls, observations):
        obs = list(observations)
        return cls([o.im for o in obs], [o.failed for o in obs])

    @property
    def observations(self):
        return [Observation(float(a), int(z)) for a, z in zip(self.im, self.failed)]

    def __len__(self):
        return self.im.size

    def __iter__(self):
        return iter(self.observations)

    def subset(self, idx):
        return Dataset(self.im[idx], self.failed[idx])

    @property
    def n_failures(self):
        return int(self.failed.sum())


@dataclass(frozen=True)
class SeparationReport:
    """Outcome of the perfect-separation scan.

    ``separated`` is true when both classes are present and a threshold
    puts every survival below it and every failure above it. A one-class
    sample (``one_class``) also admits a zero misclassification vector
    ``N``; ``n_vector_zero`` covers both cases.
    """

    separated: bool
    separating_interval: tuple | None
    n_vector_zero: bool
    one_class: bool = False


def _check_im(a):
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0)):
        raise ValueError("IM must be strictly positive")
    return a


def fragility_probability(theta, a):
    """``Phi(log(a / alpha) / beta)`` for ``a > 0`` (scalar or array)."""
    a = _check_im(a)
    gamma = (np.log(a) - np.log(theta.alpha)) / theta.beta
    p = special.ndtr(gamma)
    return float(p) if p.ndim == 0 else p


def fragility_curves(alpha, beta, a_grid):
    """Curves on ``a_grid`` for arrays of parameters, shape ``(n, len(a_grid))``.

    ``a_grid`` may contain 0 (probability 0 there). ``beta == 0`` gives the
    step curve ``1{a > alpha}`` used for degenerate fits.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))[:, None]
    beta = np.atleast_1d(np.asarray(beta, dtype=float))[:, None]
    a = np.asarray(a_grid, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gamma = (np.log(a) - np.log(alpha)) / beta
    curves = special.ndtr(gamma)
    step = (a > alpha).astype(float)
    curves = np.where(beta > 0, curves, step)
    return np.where(a > 0, curves, 0.0)


def log_likelihood_array(alpha, beta, log_a, z, weights=None):
    """Vectorized log-likelihood.

    ``alpha`` and ``beta`` have shape ``(n,)``; ``log_a`` and ``z`` have
    shape ``(n, k)`` or ``(k,)`` (broadcast over the parameter axis).
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    gamma = (log_a - np.log(alpha)[..., None]) / beta[..., None]
    # log Phi(gamma) for failures, log Phi(-gamma) for survivals
    terms = special.log_ndtr(np.where(z == 1, gamma, -gamma))
    if weights is not None:
        terms = terms * weights
    return terms.sum(axis=-1)


def log_likelihood(theta, data):
    """Log of the Bernoulli-probit likelihood of ``data`` at ``theta``."""
    return float(log_likelihood_array(
        np.array([theta.alpha]), np.array([theta.beta]),
        np.log(data.im), data.failed)[0])


def _mills(gamma):
    """``phi/Phi(gamma)`` and ``phi/Phi(-gamma)``, computed in log space."""
    log_phi = -0.5 * gamma * gamma - _LOG_SQRT_2PI
    return (np.exp(log_phi - special.log_ndtr(gamma)),
            np.exp(log_phi - special.log_ndtr(-gamma)))


def _gamma_derivatives(gamma, z):
    """First and second derivatives of ``log p(z | gamma)`` in ``gamma``."""
    lam_pos, lam_neg = _mills(gamma)
    d1 = z * lam_pos - (1 - z) * lam_neg
    d2 = (z * (-gamma * lam_pos - lam_pos ** 2)
          + (1 - z) * (gamma * lam_neg - lam_neg ** 2))
    return d1, d2


def score(theta, obs):
    """Gradient of ``log p(z | a, theta)`` in ``(alpha, beta)``."""
    al, be = theta.alpha, theta.beta
    t = np.log(obs.im / al)
    d1, _ = _gamma_derivatives(t / be, obs.failed)
    # d gamma / d alpha = -1/(alpha beta), d gamma / d beta = -t/beta^2
    return np.array([-d1 / (al * be), -d1 * t / be ** 2])


def score_array(alpha, beta, a, z):
    """Vectorized score; returns shape ``(..., 2)``."""
    t = np.log(a / alpha)
    d1, _ = _gamma_derivatives(t / beta, z)
    return np.stack([-d1 / (alpha * beta), -d1 * t / beta ** 2], axis=-1)


def hessian_loglik(theta, obs):
    """Analytic Hessian of ``log p(z | a, theta)`` in ``(alpha, beta)``."""
    al, be = theta.alpha, theta.beta
    t = np.log(obs.im / al)
    d1, d2 = _gamma_derivatives(t / be, obs.failed)
    g_a = -d1 / (al * be)
    g_b = -d1 * t / be ** 2
    h_aa = -g_a / al + d2 / (al * be) ** 2
    h_ab = -g_a / be + d2 * t / (al * be ** 3)
    h_bb = -2.0 * g_b / be + d2 * t * t / be ** 4
    return np.array([[h_aa, h_ab], [h_ab, h_bb]])


def separation_check(data):
    """Scan for a threshold that perfectly separates failures from survivals.

    Tied IM values carrying both labels are never separable.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    fail = data.failed == 1
    if fail.all():
        return SeparationReport(False, (0.0, float(data.im.min())), True, True)
    if not fail.any():
        return SeparationReport(False, (float(data.im.max()), np.inf), True, True)
    lo = float(data.im[~fail].max())
    hi = float(data.im[fail].min())
    if lo < hi:
        return SeparationReport(True, (lo, hi), True)
    return SeparationReport(False, None, False)
