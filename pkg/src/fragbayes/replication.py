"""Replication study: repeated small-sample fits scored against a reference.

For each sample size ``k`` and each of ``m`` draws, ``k`` observations are
taken without replacement from the full dataset and fitted by every method
(Jeffreys posterior, truncated SK posterior, bootstrap MLE). The ``L``
retained curves of each fit are scored by the quadratic error and the
credibility width, and the ``m`` values are summarized by their mean and
2.5/97.5 percentiles.

Randomness is keyed by ``(seed, k, draw, method)``, and every chain or
bootstrap uses its own stream, so results do not depend on ``threads`` or on
how draws are batched.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .mcmc import McmcConfig, run_adaptive_mh_batch
from .metrics import MetricConfig, credibility_width, quadratic_error
from .mle import bootstrap_arrays, fit_mle
from .priors import (DEFAULT_SK_BETA_MAX, batch_log_posterior, jeffreys_prior,
                     sk_prior_from_im)

METHODS = ("jeffreys", "sk", "mle")
METRICS = ("quadratic_error", "credibility_width")
_METHOD_ID = {"jeffreys": 0, "sk": 1, "mle": 2}
_STREAM_DRAW, _STREAM_FIT = 0, 1
# retained chains with fewer accepted moves are treated as fit failures
MIN_ACCEPTANCE = 1e-3


@dataclass(frozen=True)
class SummaryRow:
    k: int
    method: str
    metric: str
    mean: float
    lo: float
    hi: float
    n_excluded: int


@dataclass(frozen=True, eq=False)
class ReplicationSummary:
    """Per-``(k, method, metric)`` summaries plus the raw per-draw values.

    ``values[(k, method)]`` maps each metric to an array over the retained
    draws; excluded draws are absent.
    """

    rows: list
    values: dict = field(default_factory=dict)

    def row(self, k, method, metric):
        for r in self.rows:
            if (r.k, r.method, r.metric) == (k, method, metric):
                return r
        raise KeyError((k, method, metric))

    def mean(self, k, method, metric):
        return self.row(k, method, metric).mean


def draw_seed(seed, k, draw, method, stream):
    return np.random.SeedSequence([seed, k, draw, _METHOD_ID[method], stream])


def subsample_indices(n_full, k, draw, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, k, draw,
                                                        _STREAM_DRAW]))
    return rng.choice(n_full, size=k, replace=False)


def _initial_points(subsets, default_alpha, beta_cap):
    inits = []
    for sub in subsets:
        res = fit_mle(sub)
        if res.degenerate:
            a, b = float(np.median(sub.im)), 0.5
        else:
            a, b = res.theta_hat.alpha, res.theta_hat.beta
        if not np.isfinite(a) or a <= 0:
            a = default_alpha
        inits.append((a, float(np.clip(b, 0.05, 0.5 * beta_cap))))
    return np.array(inits)


def _bayes_batch(prior, subsets, draws, k, method, mcmc_cfg, seed, default_alpha):
    beta_cap = prior.beta_max if prior.beta_max is not None else 4.0
    log_a = np.log(np.stack([s.im for s in subsets]))
    z = np.stack([s.failed for s in subsets])
    target = batch_log_posterior(prior, log_a, z)
    inits = _initial_points(subsets, default_alpha, beta_cap)
    seeds = [draw_seed(seed, k, d, method, _STREAM_FIT) for d in draws]
    chains = run_adaptive_mh_batch(target, inits, mcmc_cfg, seeds)
    out = []
    for ch in chains:
        if ch.acceptance_rate < MIN_ACCEPTANCE:
            out.append(None)
        else:
            out.append((ch.alpha, ch.beta))
    return out


def _mle_batch(subsets, draws, k, L, seed):
    out = []
    for sub, d in zip(subsets, draws):
        rng = np.random.default_rng(draw_seed(seed, k, d, "mle", _STREAM_FIT))
        boot = bootstrap_arrays(sub, L, rng)
        keep = boot.usable()
        if keep.sum() < 2:
            out.append(None)
        else:
            out.append((boot.alpha[keep], boot.beta[keep]))
    return out


def _percentiles(x):
    if x.size == 0:
        return np.nan, np.nan, np.nan
    lo, hi = np.quantile(x, [0.025, 0.975], method="hazen")
    return float(x.mean()), float(lo), float(hi)


def replication_study(full_data, k_values, m, L, methods=METHODS,
                      cfg=None, seed=0, prior_grid=None, mcmc_cfg=None,
                      sk_beta_max=DEFAULT_SK_BETA_MAX, threads=1,
                      batch_size=25):
    """Run the replication protocol and summarize both metrics.

    Parameters
    ----------
    full_data : Dataset
        Pool the draws come from; also defines the reference curve (its
        MLE) when ``cfg.reference`` is unset, and the SK prior's log-normal.
    k_values : sequence of int
    m : int
        Draws per ``k``.
    L : int
        Retained posterior samples per chain, or bootstrap replicates.
    methods : subset of ``("jeffreys", "sk", "mle")``
    prior_grid : PriorGrid
        Required for ``"jeffreys"``.
    mcmc_cfg : McmcConfig
        Its ``n_samples`` is overridden by ``L``.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    if m < 1 or L < 2:
        raise ValueError("need m >= 1 and L >= 2")
    if max(k_values) > len(full_data):
        raise ValueError("k exceeds the dataset size")
    if "jeffreys" in methods and prior_grid is None:
        raise ValueError("the Jeffreys method needs a prior grid")
    cfg = cfg or MetricConfig()
    if cfg.reference is None:
        ref = fit_mle(full_data)
        if ref.degenerate:
            raise ValueError("full-data MLE is degenerate; set cfg.reference")
        cfg = cfg.with_reference(ref.theta_hat)
    mcmc_cfg = replace(mcmc_cfg or McmcConfig(), n_samples=L)
    priors = {}
    if "jeffreys" in methods:
        priors["jeffreys"] = jeffreys_prior(prior_grid)
    if "sk" in methods:
        priors["sk"] = sk_prior_from_im(full_data.im, sk_beta_max)
    default_alpha = float(np.median(full_data.im))

    tasks = []
    for k in k_values:
        subsets = [full_data.subset(subsample_indices(len(full_data), k, d, seed))
                   for d in range(m)]
        for method in methods:
            for start in range(0, m, batch_size):
                draws = list(range(start, min(m, start + batch_size)))
                tasks.append((k, method, draws, [subsets[d] for d in draws]))

    def run(task):
        k, method, draws, subsets = task
        if method == "mle":
            fits = _mle_batch(subsets, draws, k, L, seed)
        else:
            fits = _bayes_batch(priors[method], subsets, draws, k, method,
                                mcmc_cfg, seed, default_alpha)
        scored = []
        for fit in fits:
            if fit is None:
                scored.append(None)
                continue
            try:
                scored.append((quadratic_error(fit, cfg),
                               credibility_width(fit, cfg)))
            except ValueError:
                scored.append(None)
        return scored

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    collected = {}
    for (k, method, _, _), scored in zip(tasks, results):
        collected.setdefault((k, method), []).extend(scored)

    rows, values = [], {}
    for k in k_values:
        for method in methods:
            scored = collected[(k, method)]
            kept = [s for s in scored if s is not None]
            n_excl = len(scored) - len(kept)
            arr = np.array(kept, dtype=float).reshape(-1, 2)
            values[(k, method)] = {METRICS[0]: arr[:, 0], METRICS[1]: arr[:, 1]}
            for j, metric in enumerate(METRICS):
                mean, lo, hi = _percentiles(arr[:, j])
                rows.append(SummaryRow(int(k), method, metric, mean, lo, hi,
                                       n_excl))
    return ReplicationSummary(rows, values)
