import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from fragbayes.metrics import MetricConfig, credibility_width, quadratic_error, simpson
from fragbayes.probit import FragilityParams as F, fragility_curves

REF = F(3.0, 0.4)
CFG = MetricConfig(reference=REF)


def test_simpson_quadratic_exact():
    cfg = MetricConfig()
    assert abs(simpson(cfg.grid ** 2, cfg.step) - 576.0) < 1e-12


def test_identical_curves_zero():
    th = [REF] * 10
    assert quadratic_error(th, CFG) == 0.0
    assert credibility_width(th, CFG) == 0.0


def test_step_vs_reference():
    # a step at alpha against a near-step reference: distance is the gap
    cfg = MetricConfig(reference=F(2.0, 1e-9))
    e = quadratic_error(([3.0], [0.0]), cfg)
    assert e == pytest.approx(1.0, abs=2 * cfg.step)


def test_against_fine_grid(rng):
    alpha, beta = rng.uniform(1, 5, 100), rng.uniform(0.2, 0.8, 100)
    e = quadratic_error((alpha, beta), CFG)
    s = credibility_width((alpha, beta), CFG)
    fine = np.linspace(0, 12, 2001)
    d = (fragility_curves(alpha, beta, fine) - fragility_curves([3.0], [0.4], fine)) ** 2
    assert e == pytest.approx(trapezoid(d, fine, axis=1).mean(), rel=5e-3)
    c = fragility_curves(alpha, beta, fine)
    lo, hi = np.quantile(c, [0.025, 0.975], axis=0, method="hazen")
    assert s == pytest.approx(trapezoid((hi - lo) ** 2, fine), rel=5e-3)


def test_zero_credibility_collapses():
    cfg = MetricConfig(credibility=0.0)
    assert credibility_width(([1.0, 2.0, 3.0], [0.3, 0.4, 0.5]), cfg) == 0.0


def test_two_curve_half_level():
    cfg = MetricConfig(credibility=0.5)
    g = cfg.grid
    c = fragility_curves([1.0, 3.0], [0.5, 0.3], g)
    want = simpson((c[0] - c[1]) ** 2, cfg.step)
    assert credibility_width(([1.0, 3.0], [0.5, 0.3]), cfg) == pytest.approx(want)


def test_width_monotone_in_credibility(rng):
    th = (rng.uniform(1, 5, 200), rng.uniform(0.2, 0.8, 200))
    w = [credibility_width(th, MetricConfig(credibility=c)) for c in (0.5, 0.8, 0.95)]
    assert w[0] <= w[1] <= w[2]


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(12)))
def test_permutation_invariant(perm):
    r = np.random.default_rng(0)
    a, b = r.uniform(1, 5, 12), r.uniform(0.2, 0.8, 12)
    p = list(perm)
    assert quadratic_error((a[p], b[p]), CFG) == pytest.approx(quadratic_error((a, b), CFG))
    assert credibility_width((a[p], b[p]), CFG) == credibility_width((a, b), CFG)


def test_param_list_input():
    th = [F(2.0, 0.3), F(4.0, 0.5)]
    assert quadratic_error(th, CFG) == quadratic_error(([2.0, 4.0], [0.3, 0.5]), CFG)


def test_validation():
    with pytest.raises(ValueError):
        quadratic_error([REF], MetricConfig())
    with pytest.raises(ValueError):
        credibility_width([REF], CFG)
    with pytest.raises(ValueError):
        quadratic_error([], CFG)
    for kw in [dict(n_sub=3), dict(credibility=1.0), dict(a_max=0.0)]:
        with pytest.raises(ValueError):
            MetricConfig(**kw)
