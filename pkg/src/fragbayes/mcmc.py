"""Adaptive Metropolis-Hastings with covariance adaptation (Haario et al.).

Chains live in ``u = (log alpha, log beta)`` so every state is in the open
quadrant; the target picks up the Jacobian ``log alpha + log beta``. After
``adaptation_start`` iterations the Gaussian proposal covariance is
``s_d * (Cov(u_0..u_t) + eps I)``.

Several chains can be advanced in lockstep (:func:`run_adaptive_mh_batch`)
with a vectorized target. Each chain draws from its own generator and the
arithmetic is row-wise, so a chain's output does not depend on which batch
it runs in.
"""

from dataclasses import dataclass

import numpy as np

from .probit import FragilityParams, fragility_curves


class McmcError(RuntimeError):
    pass


@dataclass(frozen=True)
class McmcConfig:
    n_samples: int = 5000
    burn_in: int = 5000
    adaptation_start: int = 500
    scale: float = 2.38 ** 2 / 2
    epsilon: float = 1e-6
    init_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.adaptation_start < 2:
            raise ValueError("adaptation needs at least two past states")


@dataclass(frozen=True, eq=False)
class Chain:
    """Retained posterior draws of one chain."""

    alpha: np.ndarray
    beta: np.ndarray
    log_target: np.ndarray
    acceptance_rate: float
    adapted_acceptance_rate: float

    def __len__(self):
        return self.alpha.size

    @property
    def samples(self):
        return [FragilityParams(a, b) for a, b in zip(self.alpha, self.beta)]

    def as_array(self):
        return np.column_stack([self.alpha, self.beta])


@dataclass(frozen=True, eq=False)
class CurveBand:
    a_grid: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray


def run_adaptive_mh_batch(log_target, inits, cfg, seeds):
    """Run ``len(inits)`` chains side by side.

    Parameters
    ----------
    log_target : callable
        ``log_target(alpha, beta)`` with arrays of shape ``(n,)``, returning
        ``n`` log-densities (``-inf`` allowed). Row ``i`` must depend only on
        entry ``i``.
    inits : array_like, shape (n, 2)
        Starting ``(alpha, beta)`` of each chain.
    cfg : McmcConfig
    seeds : sequence
        One seed (int or ``SeedSequence``) per chain.

    Returns
    -------
    list of Chain
        Chains that never accepted a move are returned as well, with
        ``acceptance_rate == 0``; callers decide how to treat them.
    """
    inits = np.atleast_2d(np.asarray(inits, dtype=float))
    n = inits.shape[0]
    if len(seeds) != n:
        raise ValueError("need one seed per chain")
    if np.any(inits <= 0):
        raise ValueError("initial alpha and beta must be positive")
    n_iter = cfg.burn_in + cfg.n_samples
    normals = np.empty((n_iter, n, 2))
    log_unif = np.empty((n_iter, n))
    for i, s in enumerate(seeds):
        rng = np.random.default_rng(s)
        normals[:, i, :] = rng.standard_normal((n_iter, 2))
        log_unif[:, i] = np.log(rng.random(n_iter))

    u = np.log(inits)
    lt = np.asarray(log_target(inits[:, 0], inits[:, 1]), dtype=float)
    if not np.all(np.isfinite(lt)):
        bad = int(np.argmax(~np.isfinite(lt)))
        raise ValueError(f"log target is not finite at the initial point of "
                         f"chain {bad}: {tuple(inits[bad])}")
    cur = lt + u.sum(axis=1)

    mean = u.copy()
    m2 = np.zeros((n, 3))  # running (c11, c12, c22) sums of squares
    count = 1
    s_d, eps = cfg.scale, cfg.epsilon
    std0 = cfg.init_std

    keep_u = np.empty((cfg.n_samples, n, 2))
    keep_lt = np.empty((cfg.n_samples, n))
    accepted = np.zeros(n)
    accepted_adapted = np.zeros(n)
    n_adapted = 0

    for it in range(n_iter):
        z = normals[it]
        if it >= cfg.adaptation_start:
            c11 = s_d * (m2[:, 0] / (count - 1) + eps)
            c12 = s_d * (m2[:, 1] / (count - 1))
            c22 = s_d * (m2[:, 2] / (count - 1) + eps)
            l11 = np.sqrt(c11)
            l21 = c12 / l11
            l22 = np.sqrt(np.maximum(c22 - l21 * l21, 0.0))
            step0 = l11 * z[:, 0]
            step1 = l21 * z[:, 0] + l22 * z[:, 1]
            n_adapted += 1
        else:
            step0 = std0 * z[:, 0]
            step1 = std0 * z[:, 1]
        p0 = u[:, 0] + step0
        p1 = u[:, 1] + step1
        with np.errstate(over="ignore", invalid="ignore"):
            ea, eb = np.exp(p0), np.exp(p1)
            ok = np.isfinite(ea) & np.isfinite(eb) & (ea > 0) & (eb > 0)
            lt_prop = np.full(n, -np.inf)
            if ok.all():
                lt_prop = np.asarray(log_target(ea, eb), dtype=float)
            elif ok.any():
                # keep the call vectorized; rows that overflowed are rejected
                safe_a = np.where(ok, ea, 1.0)
                safe_b = np.where(ok, eb, 1.0)
                lt_prop = np.where(ok, log_target(safe_a, safe_b), -np.inf)
            prop = lt_prop + p0 + p1
            acc = log_unif[it] < prop - cur
        acc &= ~np.isnan(prop)
        u[acc, 0] = p0[acc]
        u[acc, 1] = p1[acc]
        cur = np.where(acc, prop, cur)
        lt = np.where(acc, lt_prop, lt)
        accepted += acc
        if it >= cfg.adaptation_start:
            accepted_adapted += acc

        # Welford update of the running mean/covariance of u
        count += 1
        d0 = u[:, 0] - mean[:, 0]
        d1 = u[:, 1] - mean[:, 1]
        mean[:, 0] += d0 / count
        mean[:, 1] += d1 / count
        e0 = u[:, 0] - mean[:, 0]
        e1 = u[:, 1] - mean[:, 1]
        m2[:, 0] += d0 * e0
        m2[:, 1] += d0 * e1
        m2[:, 2] += d1 * e1

        k = it - cfg.burn_in
        if k >= 0:
            keep_u[k] = u
            keep_lt[k] = lt

    chains = []
    for i in range(n):
        chains.append(Chain(
            alpha=np.exp(keep_u[:, i, 0]),
            beta=np.exp(keep_u[:, i, 1]),
            log_target=keep_lt[:, i].copy(),
            acceptance_rate=float(accepted[i] / n_iter),
            adapted_acceptance_rate=(float(accepted_adapted[i] / n_adapted)
                                     if n_adapted else float("nan")),
        ))
    return chains


def run_adaptive_mh(log_target, init, cfg):
    """Sample ``exp(log_target)`` over ``(alpha, beta)`` with one chain.

    ``log_target`` takes a :class:`FragilityParams`. Raises
    :class:`McmcError` if no proposal was ever accepted.
    """
    def vec(alpha, beta):
        a, b = float(alpha[0]), float(beta[0])
        return np.array([log_target(FragilityParams(a, b))])

    if not np.isfinite(log_target(init)):
        raise ValueError("log target is not finite at the initial point")
    chain = run_adaptive_mh_batch(vec, [[init.alpha, init.beta]], cfg,
                                  [cfg.seed])[0]
    check_chain(chain)
    return chain


def check_chain(chain):
    if chain.acceptance_rate == 0:
        raise McmcError("chain rejected every proposal")
    return chain


def curve_band(alpha, beta, a_grid, r=0.05):
    """Pointwise Hazen quantiles ``r/2``, ``1/2``, ``1 - r/2`` of the curves.

    ``beta == 0`` entries are step curves.
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    a_grid = np.asarray(a_grid, dtype=float)
    curves = fragility_curves(alpha, beta, a_grid)
    lo, med, hi = np.quantile(curves, [r / 2, 0.5, 1 - r / 2], axis=0,
                              method="hazen")
    return CurveBand(a_grid, lo, med, hi)


def band_from_chain(chain, a_grid, r=0.05):
    """Credibility band of the fragility curve from posterior draws."""
    if len(chain) == 0:
        raise ValueError("empty chain")
    return curve_band(chain.alpha, chain.beta, a_grid, r)
