"""Intensity-measure (IM) distribution: Gaussian KDE and log-normal fit.

The IM law ``p(a)`` enters the Fisher information integrals and the synthetic
data generator. Two representations are provided:

* :class:`IMDensity`, a sum of Gaussian kernels on the raw (m/s^2) scale;
* :class:`LogNormalIM`, a two-parameter log-normal law.

Both expose ``logpdf`` for the law restricted to ``(0, inf)``, a ``sample``
method and ``log_support`` bounds used to place quadrature windows.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, signal, special, stats

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# above this many centers the restricted density is read from a binned table
_TABLE_MIN_CENTERS = 2000
_TABLE_BINS_PER_BANDWIDTH = 16
_KERNEL_REACH = 10.0


def _as_positive_array(values, what="IM value"):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("IM sample is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite {what} in sample")
    if np.any(arr <= 0.0):
        raise ValueError(f"{what}s must be strictly positive")
    return arr


@dataclass(frozen=True, eq=False)
class IMSample:
    """Observed IM values (m/s^2), all strictly positive."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_positive_array(self.values))

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class LogNormalIM:
    """Log-normal IM law: ``log a ~ N(mu, sigma^2)``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise ValueError("mu and sigma must be finite")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def median(self):
        return float(np.exp(self.mu))

    def pdf(self, a):
        return np.exp(self.logpdf(a))

    def logpdf(self, a):
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            la = np.log(a)
            out = (-0.5 * ((la - self.mu) / self.sigma) ** 2
                   - la - np.log(self.sigma * _SQRT_2PI))
        return np.where(a > 0, out, -np.inf)

    def sample(self, n, rng):
        return np.exp(self.mu + self.sigma * rng.standard_normal(n))

    def log_support(self):
        """Bounds on ``log a`` outside of which the density is negligible."""
        return self.mu - 40.0 * self.sigma, self.mu + 40.0 * self.sigma


@dataclass(frozen=True, eq=False)
class IMDensity:
    """Gaussian kernel density estimate of the IM on the raw scale.

    ``density`` is the plain mean of the kernels. ``logpdf`` is the law
    restricted to ``a > 0``: the kernel mass leaking below zero is cut off
    and the remainder renormalized.
    """

    centers: np.ndarray
    bandwidth: float
    _sorted: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).ravel()
        if c.size == 0:
            raise ValueError("KDE needs at least one center")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite KDE center")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        object.__setattr__(self, "_sorted", np.sort(c))

    def density(self, a):
        """Mean of the Gaussian kernels at ``a`` (scalar or array)."""
        a = np.asarray(a, dtype=float)
        flat = a.ravel()
        out = np.empty_like(flat)
        h = self.bandwidth
        # chunk to bound memory at (chunk x n_centers)
        chunk = max(1, 4_000_000 // self.centers.size)
        for start in range(0, flat.size, chunk):
            u = (flat[start:start + chunk, None] - self.centers[None, :]) / h
            out[start:start + chunk] = np.exp(-0.5 * u * u).mean(axis=1)
        out /= h * _SQRT_2PI
        return out.reshape(a.shape) if a.ndim else float(out[0])

    @cached_property
    def positive_mass(self):
        """Kernel mass on ``(0, inf)``."""
        return float(special.ndtr(self.centers / self.bandwidth).mean())

    @cached_property
    def _table(self):
        h = self.bandwidth
        step = h / _TABLE_BINS_PER_BANDWIDTH
        lo = self._sorted[0] - _KERNEL_REACH * h
        n = int(np.ceil((self._sorted[-1] + _KERNEL_REACH * h - lo) / step)) + 1
        grid = lo + step * np.arange(n)
        # linear binning of the centers onto the grid
        pos = (self.centers - lo) / step
        left = np.floor(pos).astype(int)
        frac = pos - left
        counts = (np.bincount(left, weights=1.0 - frac, minlength=n)
                  + np.bincount(left + 1, weights=frac, minlength=n + 1)[:n])
        m = int(np.ceil(_KERNEL_REACH * _TABLE_BINS_PER_BANDWIDTH))
        kern = np.exp(-0.5 * (np.arange(-m, m + 1) * step / h) ** 2)
        dens = signal.fftconvolve(counts, kern, mode="same")
        dens = np.clip(dens, 0.0, None) / (self.centers.size * h * _SQRT_2PI)
        return grid, dens

    def pdf(self, a):
        """Density of the law restricted to ``a > 0``."""
        a = np.asarray(a, dtype=float)
        if self.centers.size > _TABLE_MIN_CENTERS:
            grid, dens = self._table
            raw = np.interp(a, grid, dens, left=0.0, right=0.0)
        else:
            raw = self.density(a)
        return np.where(a > 0, raw / self.positive_mass, 0.0)

    def logpdf(self, a):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(a))

    def sample(self, n, rng):
        """Draw ``n`` values from the restricted law (rejecting ``a <= 0``)."""
        out = np.empty(0)
        while out.size < n:
            need = n - out.size
            draw = (rng.choice(self.centers, size=2 * need + 8)
                    + self.bandwidth * rng.standard_normal(2 * need + 8))
            out = np.concatenate([out, draw[draw > 0][:need]])
        return out

    def cdf(self, a):
        """CDF of the unrestricted kernel mixture."""
        a = np.asarray(a, dtype=float)
        u = (a[..., None] - self.centers) / self.bandwidth
        return special.ndtr(u).mean(axis=-1)

    def median(self):
        lo = self._sorted[0] - _KERNEL_REACH * self.bandwidth
        hi = self._sorted[-1] + _KERNEL_REACH * self.bandwidth
        return float(optimize.brentq(lambda x: self.cdf(x) - 0.5, lo, hi,
                                     xtol=1e-12))

    def log_support(self):
        hi = self._sorted[-1] + _KERNEL_REACH * self.bandwidth
        # restricted density tends to a constant as a -> 0+; in log a its
        # weight decays like a, so ~1e-12 of the scale is far enough.
        lo = 1e-12 * hi
        return float(np.log(lo)), float(np.log(hi))

    def normalization_window(self):
        """Quadrature window ``[0, max(sample) + 6h]`` for mass checks."""
        return 0.0, float(self._sorted[-1] + 6.0 * self.bandwidth)


def silverman_bandwidth(values):
    """Silverman's rule ``0.9 min(std, IQR/1.34) n^(-1/5)``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise ValueError("Silverman's rule needs at least two values")
    std = values.std(ddof=1)
    iqr = stats.iqr(values)
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    if spread <= 0:
        raise ValueError("all IM values are identical; pass a bandwidth")
    return 0.9 * spread * n ** (-0.2)


def fit_kde(sample, bandwidth=None):
    """Gaussian KDE with kernels centred on the sample values.

    Parameters
    ----------
    sample : IMSample or array_like
        Strictly positive IM values.
    bandwidth : float, optional
        Kernel standard deviation; Silverman's rule on the raw scale when
        omitted.
    """
    if not isinstance(sample, IMSample):
        sample = IMSample(sample)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(sample.values)
    return IMDensity(sample.values, bandwidth)


def density(d, a):
    """Evaluate the kernel mean of ``d`` at ``a``."""
    return d.density(a)


def fit_lognormal(sample):
    """Log-normal law from the mean and unbiased std of ``log a``."""
    if not isinstance(sample, IMSample):
        sample = IMSample(sample)
    if len(sample) < 2:
        raise ValueError("log-normal fit needs at least two values")
    logs = np.log(sample.values)
    sigma = logs.std(ddof=1)
    if not sigma > 0:
        raise ValueError("all IM values are identical (zero log-std)")
    return LogNormalIM(float(logs.mean()), float(sigma))


def lognormal_of(law):
    """Log-normal summary of an IM law (identity for :class:`LogNormalIM`)."""
    if isinstance(law, LogNormalIM):
        return law
    return fit_lognormal(law.centers)
