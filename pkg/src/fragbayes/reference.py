"""Nonparametric Monte-Carlo reference curve from IM clusters."""

from dataclasses import dataclass

import numpy as np

DEFAULT_N_CLUSTERS = 30
Z95 = 1.96


@dataclass(frozen=True, eq=False)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia_history: np.ndarray
    n_merged: int = 0


@dataclass(frozen=True, eq=False)
class McCurve:
    centroids: np.ndarray
    cluster_sizes: np.ndarray
    failure_rates: np.ndarray
    ci_half_widths: np.ndarray
    n_merged: int = 0

    @property
    def ci_low(self):
        return np.clip(self.failure_rates - self.ci_half_widths, 0.0, 1.0)

    @property
    def ci_high(self):
        return np.clip(self.failure_rates + self.ci_half_widths, 0.0, 1.0)


def _assign(x, centroids):
    # centroids sorted: nearest centroid = bin between consecutive midpoints
    mids = 0.5 * (centroids[1:] + centroids[:-1])
    return np.searchsorted(mids, x, side="left")


def kmeans_1d(values, n_clusters, max_iter=10000):
    """Lloyd's algorithm in 1D, initialized at the ``(j - 1/2)/n`` quantiles.

    Empty clusters are dropped (merged into their neighbour), so the result
    may hold fewer than ``n_clusters`` centroids; ``n_merged`` counts them.
    """
    x = np.asarray(values, dtype=float).ravel()
    if n_clusters < 1:
        raise ValueError("n_clusters must be >= 1")
    n_distinct = np.unique(x).size
    if n_clusters > n_distinct:
        raise ValueError(f"n_clusters={n_clusters} exceeds the {n_distinct} "
                         "distinct values")
    q = (np.arange(n_clusters) + 0.5) / n_clusters
    centroids = np.unique(np.quantile(x, q))
    n_merged = n_clusters - centroids.size
    labels = _assign(x, centroids)
    history = []
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=centroids.size)
        sums = np.bincount(labels, weights=x, minlength=centroids.size)
        keep = counts > 0
        n_merged += int((~keep).sum())
        centroids = sums[keep] / counts[keep]
        new_labels = _assign(x, centroids)
        history.append(float(((x - centroids[new_labels]) ** 2).sum()))
        if keep.all() and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    else:
        raise RuntimeError("k-means did not converge")
    return KMeansResult(centroids, labels, np.asarray(history), n_merged)


def mc_fragility(data, n_clusters=DEFAULT_N_CLUSTERS):
    """Per-cluster empirical failure rates with Gaussian 95% half-widths."""
    if n_clusters < 2:
        raise ValueError("n_clusters must be >= 2")
    km = kmeans_1d(data.im, n_clusters)
    m = km.centroids.size
    n = np.bincount(km.labels, minlength=m)
    fails = np.bincount(km.labels, weights=data.failed, minlength=m)
    p = fails / n
    hw = Z95 * np.sqrt(p * (1 - p) / n)
    return McCurve(km.centroids, n, p, hw, km.n_merged)
