"""Fisher information of the probit model and the Jeffreys prior.

The six integrals

    A_kj = int log^k(a/alpha) Phi'(gamma)^2 / Phi(+-gamma) p(a) da,
    gamma = log(a/alpha) / beta,

give the Fisher matrix

    I = [[(A01+A02)/(alpha beta)^2, (A11+A12)/(alpha beta^3)],
         [(A11+A12)/(alpha beta^3), (A21+A22)/beta^4        ]]

and the (improper) Jeffreys prior ``J = sqrt(det I)``.

Two quadrature schemes are offered. ``"regular"`` is composite Simpson on
``[0, a_max]`` with ``p + 1`` nodes. It is cheap, but once ``beta`` drops
below the node spacing in ``log a`` the integrand is a spike that falls
between nodes. ``"adaptive"`` (the default) integrates in ``t = log(a/alpha)``
over the window where the integrand is within ``exp(-cut)`` of its peak,
located by a coarse scan, and stays accurate from ``beta ~ 1e-4`` up to
``beta ~ 1e3``. All sums are carried with a shared log-scale so that
``log J`` is finite even where ``J`` itself underflows.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .im_distribution import LogNormalIM, lognormal_of
from .quadrature import simpson_weights

_LOG_2PI = np.log(2.0 * np.pi)


class JeffreysError(RuntimeError):
    """A Fisher-information or prior evaluation failed numerically."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings of the IM integrals.

    ``a_max`` and ``n_sub`` define the regular Simpson grid; ``coarse`` and
    ``fine`` are the node counts of the adaptive scheme's scan and final
    Simpson pass; ``gamma_reach`` bounds ``|gamma|`` and ``cut`` is the
    log-dynamic range retained around the integrand's peak.
    """

    scheme: str = "adaptive"
    a_max: float = 12.0
    n_sub: int = 200
    coarse: int = 257
    fine: int = 513
    gamma_reach: float = 40.0
    cut: float = 45.0

    def __post_init__(self):
        if self.scheme not in ("adaptive", "regular"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.n_sub % 2 or self.fine % 2 == 0:
            raise ValueError("Simpson needs an even subdivision / odd node count")


DEFAULT_QUAD = QuadratureSpec()
REGULAR_QUAD = QuadratureSpec(scheme="regular")


@dataclass(frozen=True)
class FisherMatrix:
    i_aa: float
    i_ab: float
    i_bb: float

    def as_array(self):
        return np.array([[self.i_aa, self.i_ab], [self.i_ab, self.i_bb]])

    @property
    def det(self):
        return self.i_aa * self.i_bb - self.i_ab ** 2


def _log_terms(t, alpha, beta, law, per_log_a):
    """Log of ``Phi'^2 p``, ``log Phi(gamma)``, ``log Phi(-gamma)`` at nodes ``t``.

    ``per_log_a`` selects the density per unit ``t`` (adaptive scheme)
    instead of per unit ``a`` (regular scheme).
    """
    gamma = t / beta
    a = alpha * np.exp(t)
    log_p = law.logpdf(a)
    if per_log_a:
        log_p = log_p + np.log(a)
    log_base = -gamma * gamma - _LOG_2PI + log_p
    return log_base, special.log_ndtr(gamma), special.log_ndtr(-gamma)


def _adaptive_nodes(alpha, beta, law, quad):
    """Node grids ``t`` (shape ``(n, fine)``) and spacings for each theta."""
    lo_q, hi_q = law.log_support()
    la = np.log(alpha)
    lo = np.maximum(-quad.gamma_reach * beta, lo_q - la)
    hi = np.minimum(quad.gamma_reach * beta, hi_q - la)
    bad = ~(hi > lo)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise JeffreysError(
            f"IM support misses the kernel window at alpha={alpha[i]!r}, "
            f"beta={beta[i]!r}")
    u = np.linspace(0.0, 1.0, quad.coarse)
    t = lo[:, None] + (hi - lo)[:, None] * u[None, :]
    base, lp, lm = _log_terms(t, alpha[:, None], beta[:, None], law, True)
    log_w = base - lp - lm
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    peak = log_w.max(axis=1)
    if not np.all(np.isfinite(peak)):
        i = int(np.argmax(~np.isfinite(peak)))
        raise JeffreysError(
            f"integrand vanishes on the whole window at alpha={alpha[i]!r}, "
            f"beta={beta[i]!r}")
    keep = log_w > (peak - quad.cut)[:, None]
    idx = np.arange(quad.coarse)
    first = np.where(keep, idx, quad.coarse).min(axis=1)
    last = np.where(keep, idx, -1).max(axis=1)
    first = np.maximum(first - 1, 0)
    last = np.minimum(last + 1, quad.coarse - 1)
    rows = np.arange(alpha.size)
    w_lo = t[rows, first]
    w_hi = t[rows, last]
    u = np.linspace(0.0, 1.0, quad.fine)
    nodes = w_lo[:, None] + (w_hi - w_lo)[:, None] * u[None, :]
    return nodes, (w_hi - w_lo) / (quad.fine - 1)


def _nodes(alpha, beta, law, quad):
    if quad.scheme == "adaptive":
        t, step = _adaptive_nodes(alpha, beta, law, quad)
        return t, step, True
    a = np.linspace(0.0, quad.a_max, quad.n_sub + 1)
    with np.errstate(divide="ignore"):
        t = np.log(a[None, :] / alpha[:, None])
    step = np.full(alpha.size, quad.a_max / quad.n_sub)
    return t, step, False


def _moments(alpha, beta, law, quad):
    """Scaled moments of the z-marginalized weight.

    Returns ``(log_scale, m0, m1, c2)`` with ``A_k1 + A_k2 = exp(log_scale)``
    times ``m0``, ``m1`` for k = 0, 1 and ``c2`` the centred second moment,
    so that ``A0 A2 - A1^2 = exp(2 log_scale) m0 c2``.
    """
    t, step, per_log_a = _nodes(alpha, beta, law, quad)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        base, lp, lm = _log_terms(t, alpha[:, None], beta[:, None], law,
                                  per_log_a)
        log_w = base - lp - lm
    log_w = np.where(np.isnan(log_w), -np.inf, log_w)
    scale = log_w.max(axis=1)
    w = np.exp(log_w - scale[:, None])
    sw = simpson_weights(t.shape[1], 1.0)[None, :] * step[:, None] * w
    t = np.where(np.isfinite(t), t, 0.0)
    m0 = sw.sum(axis=1)
    m1 = (sw * t).sum(axis=1)
    mean = m1 / m0
    c2 = (sw * (t - mean[:, None]) ** 2).sum(axis=1)
    return scale, m0, m1, c2


def a_integrals(theta, p, quad=DEFAULT_QUAD):
    """The six IM integrals ``(A01, A02, A11, A12, A21, A22)``."""
    alpha = np.array([theta.alpha])
    beta = np.array([theta.beta])
    t, step, per_log_a = _nodes(alpha, beta, p, quad)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        base, lp, lm = _log_terms(t, alpha[:, None], beta[:, None], p,
                                  per_log_a)
    w = simpson_weights(t.shape[1], step[0])
    t = np.where(np.isfinite(t), t, 0.0)[0]
    out = []
    for k in range(3):
        for log_den in (lp, lm):
            with np.errstate(invalid="ignore"):
                log_f = (base - log_den)[0]
            log_f = np.where(np.isnan(log_f), -np.inf, log_f)
            val = float(np.sum(w * t ** k * np.exp(log_f)))
            if not np.isfinite(val):
                node = int(np.argmax(~np.isfinite(log_f)))
                raise JeffreysError(
                    f"A_{k}{1 if log_den is lp else 2} not finite at node {node}")
            out.append(val)
    return tuple(out)


def fisher_information(theta, p, quad=DEFAULT_QUAD):
    """Fisher information matrix of one observation at ``theta``."""
    a01, a02, a11, a12, a21, a22 = a_integrals(theta, p, quad)
    al, be = theta.alpha, theta.beta
    return FisherMatrix((a01 + a02) / (al * be) ** 2,
                        (a11 + a12) / (al * be ** 3),
                        (a21 + a22) / be ** 4)


def log_jeffreys_array(alpha, beta, p, quad=DEFAULT_QUAD):
    """``0.5 log det I`` for arrays of parameters."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    alpha, beta = np.broadcast_arrays(alpha, beta)
    alpha, beta = alpha.ravel(), beta.ravel()
    scale, m0, _, c2 = _moments(alpha, beta, p, quad)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = scale + 0.5 * np.log(m0 * c2) - np.log(alpha) - 3.0 * np.log(beta)
    return out


def log_jeffreys_unnormalized(theta, p, quad=DEFAULT_QUAD):
    """``log J(theta) = 0.5 log |det I(theta)|`` (no normalizing constant)."""
    v = float(log_jeffreys_array(theta.alpha, theta.beta, p, quad)[0])
    if not np.isfinite(v):
        raise JeffreysError(
            f"degenerate Fisher matrix at alpha={theta.alpha!r}, "
            f"beta={theta.beta!r}")
    return v


@dataclass(frozen=True)
class AsymptoticConstants:
    """Constants of the closed-form Jeffreys tails under a log-normal IM."""

    mu: float
    sigma: float

    @property
    def e_prime(self):
        """Large-beta constant ``2 sigma / pi``."""
        return 2.0 * self.sigma / math.pi

    def g_doubleprime(self, beta):
        """Alpha-tail constant ``2 s^3 b^3 / (sqrt(pi) (s^2 + b^2)^(7/2))``."""
        s = self.sigma
        return 2.0 * s ** 3 * beta ** 3 / (math.sqrt(math.pi)
                                           * (s * s + beta * beta) ** 3.5)

    def g_laplace(self, beta):
        """Alpha-tail constant from a Laplace expansion of the integrals.

        ``sigma / (sqrt(2 pi) (sigma^2 + beta^2)^2)``, paired with the factor
        ``|log alpha - mu| / alpha``.
        """
        s = self.sigma
        return s / (math.sqrt(2.0 * math.pi) * (s * s + beta * beta) ** 2)


def asymptotic_constants(law):
    ln = lognormal_of(law)
    return AsymptoticConstants(ln.mu, ln.sigma)


def asymptotic_jeffreys(theta, c, regime):
    """Closed-form tail of ``J``.

    ``regime`` is ``"beta_inf"`` (``E' / (alpha beta^3)``), ``"alpha_tail"``
    (``G''(beta) |log alpha| / alpha exp(-(log alpha - mu)^2 / (2 beta^2 +
    2 sigma^2))``) or ``"alpha_tail_laplace"`` (same Gaussian factor with
    :meth:`AsymptoticConstants.g_laplace` and ``|log alpha - mu|``).
    The beta -> 0 constant has no closed form and is not offered.
    """
    al, be = theta.alpha, theta.beta
    la = math.log(al)
    if regime == "beta_inf":
        return c.e_prime / (al * be ** 3)
    gauss = math.exp(-(la - c.mu) ** 2 / (2 * be * be + 2 * c.sigma ** 2))
    if regime == "alpha_tail":
        return c.g_doubleprime(be) * abs(la) / al * gauss
    if regime == "alpha_tail_laplace":
        return c.g_laplace(be) * abs(la - c.mu) / al * gauss
    raise ValueError(f"no closed form for regime {regime!r}")


@dataclass(frozen=True, eq=False)
class PriorGrid:
    """Tabulated ``log J`` on a tensor mesh, with matched asymptotic tails.

    Inside the hull ``log J`` is bilinear in ``(log alpha, log beta)``.
    Outside, it is continued by ``1/beta`` below the beta range,
    ``beta^-3`` above it, and ``|log alpha - mu| / alpha
    exp(-(log alpha - mu)^2 / (2 beta^2 + 2 sigma^2))`` beyond the alpha range,
    each matched to the hull boundary.
    """

    alpha_knots: np.ndarray
    beta_knots: np.ndarray
    log_values: np.ndarray
    im_lognormal: LogNormalIM

    def __post_init__(self):
        ak = np.asarray(self.alpha_knots, dtype=float)
        bk = np.asarray(self.beta_knots, dtype=float)
        v = np.asarray(self.log_values, dtype=float)
        if ak.size < 2 or bk.size < 2:
            raise ValueError("need at least two knots per axis")
        if np.any(ak <= 0) or np.any(bk <= 0):
            raise ValueError("knots must be positive")
        if np.any(np.diff(ak) <= 0) or np.any(np.diff(bk) <= 0):
            raise ValueError("knots must be strictly increasing")
        if v.shape != (ak.size, bk.size):
            raise ValueError(f"log_values has shape {v.shape}, "
                             f"expected {(ak.size, bk.size)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("log_values must be finite")
        object.__setattr__(self, "alpha_knots", ak)
        object.__setattr__(self, "beta_knots", bk)
        object.__setattr__(self, "log_values", v)
        object.__setattr__(self, "_la", np.log(ak))
        object.__setattr__(self, "_lb", np.log(bk))

    def _alpha_shape(self, la, beta):
        mu, s = self.im_lognormal.mu, self.im_lognormal.sigma
        d = la - mu
        return (np.log(np.maximum(np.abs(d), 1e-3)) - la
                - d * d / (2 * beta * beta + 2 * s * s))

    def log_prior(self, alpha, beta):
        """Interpolated/extrapolated ``log J`` (vectorized)."""
        la = np.log(np.asarray(alpha, dtype=float))
        lb = np.log(np.asarray(beta, dtype=float))
        LA, LB, V = self._la, self._lb, self.log_values
        la_c = np.clip(la, LA[0], LA[-1])
        lb_c = np.clip(lb, LB[0], LB[-1])
        i = np.clip(np.searchsorted(LA, la_c, side="right") - 1, 0, LA.size - 2)
        j = np.clip(np.searchsorted(LB, lb_c, side="right") - 1, 0, LB.size - 2)
        fa = (la_c - LA[i]) / (LA[i + 1] - LA[i])
        fb = (lb_c - LB[j]) / (LB[j + 1] - LB[j])
        v = ((1 - fa) * (1 - fb) * V[i, j] + fa * (1 - fb) * V[i + 1, j]
             + (1 - fa) * fb * V[i, j + 1] + fa * fb * V[i + 1, j + 1])
        out_a = la != la_c
        if np.any(out_a):
            b_c = np.exp(lb_c)
            v = v + np.where(out_a, self._alpha_shape(la, b_c)
                             - self._alpha_shape(la_c, b_c), 0.0)
        v = v - np.where(lb < LB[0], lb - LB[0], 0.0)
        v = v - 3.0 * np.where(lb > LB[-1], lb - LB[-1], 0.0)
        return v

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self):
        fmt = lambda xs: " ".join(format(float(x), ".17g") for x in xs)
        lines = [f"alpha_knots: {fmt(self.alpha_knots)}",
                 f"beta_knots: {fmt(self.beta_knots)}",
                 f"im_mu: {format(self.im_lognormal.mu, '.17g')}",
                 f"im_sigma: {format(self.im_lognormal.sigma, '.17g')}"]
        lines += [fmt(row) for row in self.log_values]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    @classmethod
    def loads(cls, text):
        header = {}
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            key, sep, rest = line.partition(":")
            if sep and key.strip() in ("alpha_knots", "beta_knots",
                                       "im_mu", "im_sigma"):
                header[key.strip()] = rest.split()
            else:
                rows.append([float(x) for x in line.split()])
        missing = {"alpha_knots", "beta_knots", "im_mu", "im_sigma"} - set(header)
        if missing:
            raise ValueError(f"prior grid file lacks {sorted(missing)}")
        return cls(np.array(header["alpha_knots"], dtype=float),
                   np.array(header["beta_knots"], dtype=float),
                   np.array(rows, dtype=float),
                   LogNormalIM(float(header["im_mu"][0]),
                               float(header["im_sigma"][0])))


def build_prior_grid(p, alpha_range=(1e-5, 10.0), beta_range=(1e-3, 2.0),
                     n_alpha=500, n_beta=500, quad=DEFAULT_QUAD, threads=1):
    """Evaluate ``log J`` on a geometric ``n_alpha x n_beta`` mesh.

    Rows (one alpha each) are independent and may be spread over
    ``threads`` workers; the result does not depend on the worker count.
    """
    if n_alpha < 2 or n_beta < 2:
        raise ValueError("need at least two knots per axis")
    if min(alpha_range) <= 0 or min(beta_range) <= 0:
        raise ValueError("grid ranges must be positive")
    ak = np.geomspace(alpha_range[0], alpha_range[1], n_alpha)
    bk = np.geomspace(beta_range[0], beta_range[1], n_beta)

    def row(a):
        vals = log_jeffreys_array(np.full(n_beta, a), bk, p, quad)
        if not np.all(np.isfinite(vals)):
            j = int(np.argmax(~np.isfinite(vals)))
            raise JeffreysError(
                f"Jeffreys prior not finite at knot alpha={a!r}, beta={bk[j]!r}")
        return vals

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(row, ak))
    else:
        values = [row(a) for a in ak]
    return PriorGrid(ak, bk, np.array(values), lognormal_of(p))


def interp_log_prior(grid, theta):
    return float(grid.log_prior(theta.alpha, theta.beta))
