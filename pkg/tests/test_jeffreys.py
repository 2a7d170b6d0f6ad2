import math

import numpy as np
import pytest
from scipy import special, stats

from fragbayes.im_distribution import LogNormalIM, fit_kde
from fragbayes.jeffreys import (REGULAR_QUAD, AsymptoticConstants, JeffreysError,
                                PriorGrid, a_integrals, asymptotic_constants,
                                asymptotic_jeffreys, build_prior_grid,
                                fisher_information, interp_log_prior,
                                log_jeffreys_array, log_jeffreys_unnormalized)
from fragbayes.probit import FragilityParams as F
from fragbayes.probit import score_array

IM = LogNormalIM(math.log(1.1), 0.6)

# (alpha, beta) -> (I_aa, I_ab, I_bb, 0.5 log det); 25-digit mpmath quadrature
# in log a, independent of the package's Simpson rules.
ORACLE = {
    (2.0, 0.4): (0.438277308761395, -0.46731546308534255, 1.8929353919789125,
                 -0.2461271653467362),
    (1.1, 0.3): (2.8930810217398957, 0.0, 3.320123257404688,
                 1.1311619698486992),
    (3.0, 1.0): (0.046460188250440015, -0.10936072881734057,
                 0.37400257760355776, -2.609156300183179),
    (0.5, 0.8): (2.5703321320426875, 0.8808430544870155, 0.5508200581395546,
                 -0.22321698813526947),
}


@pytest.mark.parametrize("theta", list(ORACLE))
def test_fisher_matches_frozen_oracle(theta):
    i_aa, i_ab, i_bb, lj = ORACLE[theta]
    f = fisher_information(F(*theta), IM)
    assert f.i_aa == pytest.approx(i_aa, rel=1e-9)
    assert f.i_ab == pytest.approx(i_ab, rel=1e-9, abs=1e-12)
    assert f.i_bb == pytest.approx(i_bb, rel=1e-9)
    assert log_jeffreys_unnormalized(F(*theta), IM) == pytest.approx(lj, abs=1e-9)


def test_regular_scheme_agrees_at_moderate_beta():
    for theta in [(2.0, 0.4), (3.0, 1.0)]:
        a = fisher_information(F(*theta), IM).as_array()
        b = fisher_information(F(*theta), IM, REGULAR_QUAD).as_array()
        # the regular rule truncates at a = 12, worth ~6e-5 at beta = 1
        np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-8)


def test_a_integrals_signs():
    a01, a02, a11, a12, a21, a22 = a_integrals(F(2.0, 0.4), IM)
    assert min(a01, a02, a21, a22) >= 0
    assert all(np.isfinite([a11, a12]))


def test_a0_against_monte_carlo():
    x = IM.sample(1_000_000, np.random.default_rng(0))
    g = np.log(x / 2.0) / 0.4
    v = np.exp(-g * g - math.log(2 * math.pi) - special.log_ndtr(g)
               - special.log_ndtr(-g))
    a01, a02, *_ = a_integrals(F(2.0, 0.4), IM)
    assert abs(v.mean() - (a01 + a02)) < 3 * v.std() / math.sqrt(v.size)


def test_a1_vanishes_for_symmetric_density():
    _, _, a11, a12, _, _ = a_integrals(F(math.exp(IM.mu), 0.5), IM)
    assert abs(a11 + a12) < 1e-12


def test_symmetric_and_psd():
    for theta in [(0.01, 0.01), (1.0, 1.0), (8.0, 0.05), (0.3, 1.9)]:
        m = fisher_information(F(*theta), IM).as_array()
        assert m[0, 1] == m[1, 0]
        assert np.linalg.eigvalsh(m).min() >= -1e-10 * np.abs(m).max()


def test_fisher_is_expected_score_outer_product():
    # score outer products over simulated (a, z), k = 2 copies give 2 I
    rng = np.random.default_rng(1)
    th = F(1.5, 0.5)
    n = 400_000
    a = IM.sample(n, rng)
    z = (rng.random(n) < stats.norm.cdf(np.log(a / th.alpha) / th.beta)).astype(int)
    s = score_array(th.alpha, th.beta, a, z)
    outer = s[:, :, None] * s[:, None, :]
    mc, se = outer.mean(0), outer.std(0) / math.sqrt(n)
    fm = fisher_information(th, IM).as_array()
    assert np.all(np.abs(mc - fm) < 3 * se + 1e-12)
    pair = (s[0::2] + s[1::2])
    outer2 = (pair[:, :, None] * pair[:, None, :])
    se2 = outer2.std(0) / math.sqrt(pair.shape[0])
    assert np.all(np.abs(outer2.mean(0) - 2 * fm) < 3 * se2)


def test_reparametrization_identity():
    # phi = (log alpha, log beta): scores scale by (alpha, beta), so
    # sqrt det I_phi = alpha beta sqrt det I_theta; check via Gauss-Hermite
    # expectation of the phi-score outer product computed by finite differences.
    x, w = np.polynomial.hermite_e.hermegauss(160)
    w = w / w.sum()
    a = np.exp(IM.mu + IM.sigma * x)
    rng = np.random.default_rng(2)
    for _ in range(5):
        al, be = rng.uniform(0.5, 3), rng.uniform(0.2, 1.5)

        def logp(la, lb, z):
            g = (np.log(a) - la) / math.exp(lb)
            return special.log_ndtr(g if z else -g)

        h = 1e-6
        info = np.zeros((2, 2))
        for z in (0, 1):
            pz = stats.norm.cdf(np.log(a / al) / be) if z else stats.norm.sf(np.log(a / al) / be)
            s0 = (logp(math.log(al) + h, math.log(be), z)
                  - logp(math.log(al) - h, math.log(be), z)) / (2 * h)
            s1 = (logp(math.log(al), math.log(be) + h, z)
                  - logp(math.log(al), math.log(be) - h, z)) / (2 * h)
            s = np.stack([s0, s1])
            info += (s[:, None, :] * s[None, :, :] * (w * pz)).sum(-1)
        lhs = 0.5 * math.log(np.linalg.det(info))
        rhs = log_jeffreys_unnormalized(F(al, be), IM) + math.log(al * be)
        assert lhs == pytest.approx(rhs, abs=1e-5)


def test_kde_and_lognormal_close_for_large_sample():
    d = fit_kde(IM.sample(100_000, np.random.default_rng(3)))
    for th in [(1.1, 0.3), (2.0, 0.6)]:
        assert log_jeffreys_unnormalized(F(*th), d) == pytest.approx(
            log_jeffreys_unnormalized(F(*th), IM), abs=0.05)


def test_beta_zero_rate():
    for al in (1.1, 3.0):
        lj = log_jeffreys_array([al, al], [1e-3, 5e-4], IM)
        assert abs(math.exp(lj[1] - lj[0]) * 0.5 - 1) < 0.02


def test_beta_infinity_law():
    c = asymptotic_constants(IM)
    for al in (1.1, 3.0):
        j = math.exp(log_jeffreys_unnormalized(F(al, 50.0), IM))
        assert 0.95 <= j / asymptotic_jeffreys(F(al, 50.0), c, "beta_inf") <= 1.05


def test_beta_infinity_at_lognormal_median():
    c = asymptotic_constants(IM)
    th = F(math.exp(IM.mu), 100.0)
    ratio = math.exp(log_jeffreys_unnormalized(th, IM)) / asymptotic_jeffreys(th, c, "beta_inf")
    assert 0.95 <= ratio <= 1.05


def test_alpha_tail_laplace_constant():
    c = asymptotic_constants(IM)
    for sign in (-1, 1):
        for be in (0.3, 0.5):
            th = F(math.exp(IM.mu + sign * 8), be)
            ratio = math.exp(log_jeffreys_unnormalized(th, IM)) / asymptotic_jeffreys(
                th, c, "alpha_tail_laplace")
            assert 0.95 <= ratio <= 1.05


def test_e_prime_and_g_values():
    assert AsymptoticConstants(0.0, math.pi / 2).e_prime == pytest.approx(1.0)
    s = 0.7
    c = AsymptoticConstants(0.0, s)
    assert c.g_doubleprime(s) == pytest.approx(
        s ** 6 / (math.sqrt(math.pi) * 2 ** 2.5 * s ** 7), rel=1e-14)
    assert c.g_doubleprime(0.3) > 0


def test_unknown_regime():
    with pytest.raises(ValueError):
        asymptotic_jeffreys(F(1, 1), asymptotic_constants(IM), "beta_0")


def test_phi_product_bounds():
    g = np.random.default_rng(4).uniform(-8, 8, 10_000)
    pq = special.ndtr(g) * special.ndtr(-g)
    assert np.all(1 / pq <= 4 * np.exp(2 * g * g / math.pi))
    komatsu = (math.sqrt(2 / math.pi) * np.exp(-g * g / 2)
               / (np.abs(g) + np.sqrt(g * g + 4)))
    # Komatsu bounds 1 - Phi(|g|); Phi(|g|) >= 1/2 gives the factor 1/2
    assert np.all(pq >= komatsu / 2)
    # without the 1/2 the bound only holds away from the origin
    assert np.all(pq[np.abs(g) > 2.2165] >= komatsu[np.abs(g) > 2.2165])
    assert komatsu.max() > pq.max()


def test_tail_decay_along_median():
    b = np.geomspace(0.05, 200, 200)
    lj = log_jeffreys_array(np.full(b.size, math.exp(IM.mu)), b, IM)
    assert np.all(np.isfinite(lj))
    mode = int(np.argmax(lj))
    assert np.all(np.diff(lj[mode:]) < 0)


# --- grid -------------------------------------------------------------------

@pytest.fixture(scope="module")
def grid10():
    return build_prior_grid(IM, (0.5, 5.0), (0.1, 1.0), 10, 10)


def test_grid_finite_and_exact_at_knots(grid10):
    assert grid10.log_values.shape == (10, 10)
    assert np.all(np.isfinite(grid10.log_values))
    for i, j in [(0, 0), (3, 7), (9, 9), (5, 2)]:
        th = F(grid10.alpha_knots[i], grid10.beta_knots[j])
        assert interp_log_prior(grid10, th) == pytest.approx(
            log_jeffreys_unnormalized(th, IM), abs=1e-12)


def test_grid_refinement_consistency(grid10):
    fine = build_prior_grid(IM, (0.5, 5.0), (0.1, 1.0), 20, 20)
    la = np.log(fine.alpha_knots[1:-1])
    lb = np.log(fine.beta_knots[1:-1])
    A, B = np.meshgrid(np.exp(la), np.exp(lb), indexing="ij")
    coarse = grid10.log_prior(A, B)
    exact = fine.log_values[1:-1, 1:-1]
    assert np.all(np.abs(coarse - exact) <= 0.05 * np.abs(exact) + 0.05)


def test_grid_midpoint_is_bilinear(grid10):
    la, lb = np.log(grid10.alpha_knots), np.log(grid10.beta_knots)
    v = grid10.log_values
    mid = grid10.log_prior(math.exp((la[2] + la[3]) / 2), math.exp((lb[4] + lb[5]) / 2))
    assert mid == pytest.approx(v[2:4, 4:6].mean(), abs=1e-12)


def test_grid_beta_tails(grid10):
    bmax, bmin = grid10.beta_knots[-1], grid10.beta_knots[0]
    al = grid10.alpha_knots[4]
    assert grid10.log_prior(al, 2 * bmax) == pytest.approx(
        grid10.log_prior(al, bmax) - 3 * math.log(2), abs=1e-9)
    assert grid10.log_prior(al, bmin / 2) == pytest.approx(
        grid10.log_prior(al, bmin) + math.log(2), abs=1e-9)


def test_grid_alpha_tail_continuous(grid10):
    amax = grid10.alpha_knots[-1]
    b = grid10.beta_knots[3]
    inside = grid10.log_prior(amax, b)
    assert grid10.log_prior(amax * (1 + 1e-9), b) == pytest.approx(inside, abs=1e-6)
    assert grid10.log_prior(1e6, b) < inside - 20


def test_grid_roundtrip_bytes(grid10, tmp_path):
    p = tmp_path / "g.txt"
    grid10.save(p)
    text = p.read_text()
    assert text.startswith("alpha_knots: ")
    g2 = PriorGrid.load(p)
    assert g2.dumps() == text
    np.testing.assert_array_equal(g2.log_values, grid10.log_values)


def test_grid_deterministic_across_threads():
    a = build_prior_grid(IM, (0.5, 5.0), (0.1, 1.0), 6, 5, threads=1)
    b = build_prior_grid(IM, (0.5, 5.0), (0.1, 1.0), 6, 5, threads=3)
    assert a.dumps() == b.dumps()


def test_grid_validation():
    with pytest.raises(ValueError):
        PriorGrid(np.array([1.0, 0.5]), np.array([0.1, 0.2]), np.zeros((2, 2)), IM)
    with pytest.raises(ValueError):
        PriorGrid(np.array([0.5, 1.0]), np.array([0.1, 0.2]), np.zeros((2, 3)), IM)
    with pytest.raises(ValueError):
        PriorGrid(np.array([0.5, 1.0]), np.array([0.1, 0.2]),
                  np.array([[0.0, np.nan], [0, 0]]), IM)


def test_default_grid_psd_sample(small_grid):
    assert np.all(np.isfinite(small_grid.log_values))


def test_knot_failure_reports_coordinates():
    narrow = fit_kde([1.0, 1.1, 1.2])
    with pytest.raises(JeffreysError, match="alpha="):
        build_prior_grid(narrow, (1e-300, 1e-299), (1e-3, 2e-3), 2, 2)
