"""Synthetic IM / failure datasets drawn from a known fragility curve."""

from dataclasses import dataclass, field

import numpy as np

from .im_distribution import IMSample, LogNormalIM
from .probit import Dataset, FragilityParams, fragility_probability

DEFAULT_THETA = FragilityParams(3.0, 0.4)
DEFAULT_IM = LogNormalIM(float(np.log(1.1)), 0.6)


@dataclass(frozen=True)
class GeneratorSpec:
    """IM law (log-normal, or an empirical sample resampled with replacement),
    true curve, size and seed."""

    im_model: object = DEFAULT_IM
    theta_true: FragilityParams = DEFAULT_THETA
    n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not isinstance(self.im_model, (LogNormalIM, IMSample)):
            raise TypeError("im_model must be LogNormalIM or IMSample")

    def provenance(self):
        if isinstance(self.im_model, LogNormalIM):
            im = (f"lognormal(mu={self.im_model.mu!r}, "
                  f"sigma={self.im_model.sigma!r})")
        else:
            im = f"resample(n={len(self.im_model)})"
        t = self.theta_true
        return (f"im_model={im} alpha={t.alpha!r} beta={t.beta!r} "
                f"n={self.n} seed={self.seed}")


def generate(spec):
    """IM draws and Bernoulli labels ``z ~ B(P_f(a; theta_true))``."""
    rng = np.random.default_rng(spec.seed)
    if isinstance(spec.im_model, LogNormalIM):
        a = spec.im_model.sample(spec.n, rng)
    else:
        a = rng.choice(spec.im_model.values, size=spec.n, replace=True)
    p = fragility_probability(spec.theta_true, a)
    z = (rng.random(spec.n) < p).astype(np.int8)
    return Dataset(a, z)


def make_separated(k, gap, rng=None):
    """``k // 2`` survivals at or below ``gap[0]``, the rest at or above ``gap[1]``.

    Without ``rng`` the points are equally spaced; with one, survivals are
    ``gap[0] * exp(-E)`` and failures ``gap[1] * exp(E)`` for
    ``E ~ Exp(0.5)``.
    """
    lo, hi = map(float, gap)
    if k < 2:
        raise ValueError("k must be >= 2")
    if not 0 < lo < hi:
        raise ValueError("gap must satisfy 0 < lo < hi")
    n_surv = k // 2
    n_fail = k - n_surv
    if rng is None:
        d = min(hi - lo, lo / max(n_surv, 1))
        surv = lo - d * np.arange(n_surv)
        fail = hi + d * np.arange(n_fail)
    else:
        surv = lo * np.exp(-rng.exponential(0.5, n_surv))
        fail = hi * np.exp(rng.exponential(0.5, n_fail))
    im = np.concatenate([surv, fail])
    z = np.concatenate([np.zeros(n_surv, np.int8), np.ones(n_fail, np.int8)])
    order = np.argsort(im, kind="stable")
    return Dataset(im[order], z[order])
