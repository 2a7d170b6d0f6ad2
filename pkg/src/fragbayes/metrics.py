"""Curve-ensemble metrics: quadratic error and credibility-zone width.

Both are integrals over ``[0, a_max]`` evaluated by composite Simpson on
``n_sub + 1`` regular nodes. Curve ensembles are given as parallel
``alpha``/``beta`` arrays; ``beta == 0`` marks a step curve (degenerate
bootstrap fit).
"""

from dataclasses import dataclass

import numpy as np

from .probit import FragilityParams, fragility_curves
from .quadrature import simpson as _simpson


@dataclass(frozen=True)
class MetricConfig:
    a_max: float = 12.0
    n_sub: int = 200
    credibility: float = 0.95
    reference: FragilityParams | None = None

    def __post_init__(self):
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        if self.n_sub < 2 or self.n_sub % 2:
            raise ValueError("n_sub must be even and >= 2")
        if not 0 <= self.credibility < 1:
            raise ValueError("credibility must lie in [0, 1)")

    @property
    def grid(self):
        return np.linspace(0.0, self.a_max, self.n_sub + 1)

    @property
    def step(self):
        return self.a_max / self.n_sub

    def with_reference(self, theta):
        return MetricConfig(self.a_max, self.n_sub, self.credibility, theta)


def simpson(values, step):
    """Composite Simpson rule on an odd number of equally spaced nodes."""
    return float(_simpson(np.asarray(values, dtype=float), step))


def _params(thetas):
    """Accept a list of FragilityParams or an ``(alpha, beta)`` pair of arrays."""
    if isinstance(thetas, tuple) and len(thetas) == 2:
        alpha, beta = (np.asarray(v, dtype=float).ravel() for v in thetas)
    else:
        thetas = list(thetas)
        alpha = np.array([t.alpha for t in thetas], dtype=float)
        beta = np.array([t.beta for t in thetas], dtype=float)
    if alpha.size == 0 or alpha.shape != beta.shape:
        raise ValueError("need a non-empty list of parameters")
    return alpha, beta


def quadratic_error(thetas, cfg):
    """Mean squared L2 distance of the curves to ``cfg.reference``."""
    if cfg.reference is None:
        raise ValueError("MetricConfig.reference is not set")
    alpha, beta = _params(thetas)
    grid = cfg.grid
    ref = fragility_curves([cfg.reference.alpha], [cfg.reference.beta], grid)
    curves = fragility_curves(alpha, beta, grid)
    return float(np.mean(_simpson((curves - ref) ** 2, cfg.step)))


def credibility_width(thetas, cfg):
    """Squared L2 norm of the pointwise quantile gap at level ``credibility``.

    ``credibility = 0`` collapses both quantiles to the median.
    """
    alpha, beta = _params(thetas)
    if alpha.size < 2:
        raise ValueError("need at least two curves")
    r = 1.0 - cfg.credibility
    curves = fragility_curves(alpha, beta, cfg.grid)
    lo, hi = np.quantile(curves, [r / 2, 1 - r / 2], axis=0, method="hazen")
    return float(_simpson((hi - lo) ** 2, cfg.step))
