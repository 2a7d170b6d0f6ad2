"""Maximum likelihood and bootstrap for the probit fragility model.

The log-likelihood is concave in the GLM coordinates ``eta = b0 + b1 log a``
(``beta = 1/b1``, ``log alpha = -b0/b1``), so a damped Newton iteration finds
the global maximum whenever it exists. It does not exist for one-class or
perfectly separated samples: the supremum is reached as ``beta -> 0``.
Those cases are detected up front and reported as degenerate fits whose
curve is the step ``1{a > alpha_hat}``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .probit import FragilityParams, _gamma_derivatives

BETA_FLOOR = 1e-4
N_STARTS = 5
MAX_ITER = 100


class MleError(RuntimeError):
    pass


@dataclass(frozen=True)
class MleResult:
    """Outcome of one maximum-likelihood fit.

    ``kind`` is ``"none"`` for a regular fit, ``"separated"`` or
    ``"one_class"`` for degenerate ones, ``"decreasing"`` when the data
    favour a curve decreasing in the IM (no maximizer with ``beta > 0``),
    and ``"nonconverged"`` if Newton failed from every start.
    ``alpha_hat`` is always set: the fitted median, or the step location of
    a degenerate fit.
    """

    theta_hat: FragilityParams | None
    degenerate: bool
    degeneracy_kind: str
    log_lik_at_opt: float
    alpha_hat: float = float("nan")

    @property
    def beta_hat(self):
        return self.theta_hat.beta if self.theta_hat is not None else 0.0


def _loglik_glm(b0, b1, x, z):
    eta = b0[:, None] + b1[:, None] * x
    return special.log_ndtr(np.where(z == 1, eta, -eta)).sum(axis=1)


def _newton(x, z, b0, b1, max_iter=MAX_ITER):
    """Damped Newton ascent on the probit log-likelihood, one row per sample."""
    n = x.shape[0]
    b0 = b0.astype(float).copy()
    b1 = b1.astype(float).copy()
    ll = _loglik_glm(b0, b1, x, z)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(max_iter):
        if active.size == 0:
            break
        xa, za = x[active], z[active]
        eta = b0[active, None] + b1[active, None] * xa
        d1, d2 = _gamma_derivatives(eta, za)
        g0, g1 = d1.sum(1), (d1 * xa).sum(1)
        h00, h01, h11 = d2.sum(1), (d2 * xa).sum(1), (d2 * xa * xa).sum(1)
        det = h00 * h11 - h01 * h01
        with np.errstate(divide="ignore", invalid="ignore"):
            s0 = -(h11 * g0 - h01 * g1) / det
            s1 = -(h00 * g1 - h01 * g0) / det
        decrement = g0 * s0 + g1 * s1  # g^T (-H)^{-1} g >= 0
        done = (decrement < 1e-20) | ~np.isfinite(decrement)
        converged[active[done & np.isfinite(decrement)]] = True
        go = ~done
        idx = active[go]
        s0, s1 = s0[go], s1[go]
        step = np.ones(idx.size)
        old = ll[idx]
        # backtracking: halve until the log-likelihood does not decrease
        new = _loglik_glm(b0[idx] + s0, b1[idx] + s1, x[idx], z[idx])
        for _ in range(40):
            bad = ~(new >= old)
            if not bad.any():
                break
            step = np.where(bad, step / 2, step)
            sub = np.flatnonzero(bad)
            new[sub] = _loglik_glm(b0[idx[sub]] + step[sub] * s0[sub],
                                   b1[idx[sub]] + step[sub] * s1[sub],
                                   x[idx[sub]], z[idx[sub]])
        moved = new >= old
        b0[idx] = np.where(moved, b0[idx] + step * s0, b0[idx])
        b1[idx] = np.where(moved, b1[idx] + step * s1, b1[idx])
        ll[idx] = np.where(moved, new, old)
        stalled = ~moved
        converged[idx[stalled]] = True
        active = idx[moved]
    return b0, b1, ll, converged


def _fit_rows(log_a, z, rng_jitter=None):
    """Newton fits of non-degenerate rows with up to ``N_STARTS`` starts."""
    n = log_a.shape[0]
    center = np.median(log_a, axis=1)
    b1 = np.full(n, 2.0)
    b0 = -b1 * center
    b0, b1, ll, conv = _newton(log_a, z, b0, b1)
    jitter = np.random.default_rng(0) if rng_jitter is None else rng_jitter
    for _ in range(N_STARTS - 1):
        redo = np.flatnonzero(~conv)
        if redo.size == 0:
            break
        lb = np.log(0.5) + 0.5 * jitter.standard_normal(redo.size)
        la = center[redo] + 0.5 * jitter.standard_normal(redo.size)
        nb1 = np.exp(-lb)
        r0, r1, rll, rconv = _newton(log_a[redo], z[redo], -nb1 * la, nb1)
        b0[redo], b1[redo], ll[redo], conv[redo] = r0, r1, rll, rconv
    return b0, b1, ll, conv


def _classify(a, z):
    """Row-wise separation scan for ``(L, k)`` arrays."""
    fail = z == 1
    n_fail = fail.sum(axis=1)
    k = z.shape[1]
    one_class = (n_fail == 0) | (n_fail == k)
    lo = np.where(~fail, a, -np.inf).max(axis=1)
    hi = np.where(fail, a, np.inf).min(axis=1)
    # ties at the boundary (quasi-separation) also push the MLE to beta -> 0
    separated = ~one_class & (lo <= hi)
    step = np.where(n_fail == k, a.min(axis=1), a.max(axis=1))
    with np.errstate(invalid="ignore"):
        step = np.where(separated, np.sqrt(lo * hi), step)
    return one_class, separated, step


def _fit_arrays(a, z):
    """Fit every row of ``(L, k)`` arrays; returns parallel result arrays."""
    n = a.shape[0]
    one_class, separated, step = _classify(a, z)
    alpha = step.copy()
    beta = np.zeros(n)
    ll = np.zeros(n)
    kind = np.where(one_class, "one_class", np.where(separated, "separated",
                                                     "none")).astype(object)
    rows = np.flatnonzero(~(one_class | separated))
    if rows.size:
        log_a = np.log(a[rows])
        b0, b1, rll, conv = _fit_rows(log_a, z[rows])
        ll[rows] = rll
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            fb = 1.0 / b1
            fa = np.exp(-b0 / b1)
        ok = conv & (b1 > 0) & (fb >= BETA_FLOOR) & np.isfinite(fa) & (fa > 0)
        alpha[rows] = np.where(ok, fa, alpha[rows])
        beta[rows] = np.where(ok, fb, 0.0)
        sub = np.full(rows.size, "none", dtype=object)
        sub[~ok & (b1 <= 0)] = "decreasing"
        # beta driven under the floor: supremum at beta -> 0
        tiny = ~ok & (b1 > 0) & ~(fb >= BETA_FLOOR)
        sub[tiny] = "separated"
        sub[~ok & (b1 > 0) & ~tiny] = "nonconverged"
        kind[rows] = sub
        if tiny.any():
            alpha[rows[tiny]] = np.exp(-b0[tiny] / b1[tiny])
    return alpha, beta, ll, kind


def _result(alpha, beta, ll, kind):
    if kind == "none":
        return MleResult(FragilityParams(alpha, beta), False, "none", float(ll),
                         float(alpha))
    return MleResult(None, True, str(kind), float(ll), float(alpha))


def fit_mle(data):
    """Maximum-likelihood estimate of ``(alpha, beta)``.

    Raises :class:`MleError` if Newton fails from every start on a sample
    that has a finite maximizer.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    alpha, beta, ll, kind = _fit_arrays(data.im[None, :], data.failed[None, :])
    res = _result(alpha[0], beta[0], ll[0], kind[0])
    if res.degeneracy_kind == "nonconverged":
        raise MleError(f"MLE did not converge after {N_STARTS} starts")
    return res


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Bootstrap replicates as parallel arrays.

    Degenerate replicates carry ``beta == 0`` and their step location in
    ``alpha``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    degenerate: np.ndarray
    kind: np.ndarray

    def __len__(self):
        return self.alpha.size

    @property
    def degenerate_fraction(self):
        return float(self.degenerate.mean())

    def results(self):
        return [_result(a, b, np.nan, k)
                for a, b, k in zip(self.alpha, self.beta, self.kind)]

    def usable(self):
        """Replicates that define a curve (regular fits and step curves)."""
        return np.isin(self.kind, ["none", "separated", "one_class"])


def bootstrap_arrays(data, n_boot, rng):
    """``n_boot`` resamples of size ``k`` with replacement, each fitted."""
    if n_boot < 1:
        raise ValueError("need at least one bootstrap replicate")
    k = len(data)
    idx = rng.integers(0, k, size=(n_boot, k))
    alpha, beta, _, kind = _fit_arrays(data.im[idx], data.failed[idx])
    return BootstrapResult(alpha, beta, kind != "none", kind)


def bootstrap_mle(data, n_boot, rng):
    """List of :class:`MleResult`, degenerate replicates included."""
    return bootstrap_arrays(data, n_boot, rng).results()
