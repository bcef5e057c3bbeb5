import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import integrate, special, stats

from infrm.priors import (EtaHyper, eta_posterior_params, eta_product, eta_products,
                          importance_summary, inflf_stick_conditional, log1mexp,
                          log_beta_draw, participation_weights, pi_from_log_sticks_infmm,
                          pi_from_sticks_inflf, pi_from_sticks_infmm, psi_posterior_infmm,
                          sample_eta_sweep, sample_psi_inflf)

unit_floats = st.floats(1e-6, 1 - 1e-6)


@pytest.mark.parametrize("phi, eta, expected", [
    ([1, 0], [2.0, 5.0], 2.0),
    ([0, 0], [2.0, 5.0], 1.0),
    ([1, 1], [0.5, 4.0], 2.0),
])
def test_eta_product_examples(phi, eta, expected):
    assert eta_product(np.array(phi), np.array(eta)) == expected


def test_eta_product_rejects_nonpositive():
    with pytest.raises(ValueError):
        eta_product(np.array([1]), np.array([0.0]))


def test_eta_posterior_example():
    phi = np.array([[1], [1], [0]])
    log1m = np.log1p(-np.array([[0.5], [0.5], [0.9]]))
    eta = np.ones((1, 1))
    shape, rate = eta_posterior_params(0, phi, log1m, eta, eta_products(phi, eta), EtaHyper())
    assert shape == 3
    assert rate[0] == pytest.approx(1 + 2 * np.log(2), abs=1e-12)
    # no holders: prior recovered
    shape, rate = eta_posterior_params(0, np.zeros((3, 1)), log1m, eta, np.ones((3, 1)), EtaHyper(2.0, 3.0))
    assert (shape, rate[0]) == (2.0, 3.0)


def test_eta_posterior_quadrature():
    # prior x prod_i Beta(psi_i; 1, eta * c_i), normalised numerically
    phi = np.array([[1, 1], [1, 0], [0, 1]])
    psi = np.array([[0.3], [0.6], [0.2]])
    eta = np.array([[1.7], [0.4]])
    prods = eta_products(phi, eta)
    shape, rate = eta_posterior_params(0, phi, np.log1p(-psi), eta, prods, EtaHyper())

    def unnorm(x):
        e = eta.copy()
        e[0, 0] = x
        a = eta_products(phi, e)[:, 0]
        return stats.gamma.pdf(x, 1.0) * np.prod(stats.beta.pdf(psi[:, 0], 1.0, a))

    Z, _ = integrate.quad(unnorm, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    for x in (0.1, 0.7, 2.0, 5.0):
        closed = stats.gamma.pdf(x, shape, scale=1 / rate[0])
        assert unnorm(x) / Z == pytest.approx(closed, rel=1e-8)


def test_psi_posterior_example():
    N = np.array([[3, 2, 3]])
    a, b = psi_posterior_infmm(N, np.full((1, 3), 2.0))
    assert (a[0, 0], b[0, 0]) == (4, 7)
    a, b = psi_posterior_infmm(np.zeros((1, 2)), np.full((1, 2), 2.0))
    assert np.all(a == 1) and np.all(b == 2)
    with pytest.raises(ValueError):
        psi_posterior_infmm(np.array([[-1, 0]]), np.ones((1, 2)))


def test_pi_infmm_examples():
    pi, res = pi_from_sticks_infmm(np.array([0.5, 0.5]))
    assert np.allclose(pi, [0.5, 0.25]) and res == pytest.approx(0.25)
    pi, res = pi_from_sticks_infmm(np.array([1 - 1e-12]))
    assert pi[0] == pytest.approx(1) and res < 1e-11
    with pytest.raises(ValueError):
        pi_from_sticks_infmm(np.array([0.0, 0.3]))


def test_pi_inflf_examples():
    assert np.allclose(pi_from_sticks_inflf(np.array([0.8, 0.5])), [0.8, 0.4])
    assert np.allclose(pi_from_sticks_inflf(np.full(4, 1 - 1e-12)), 1.0)
    with pytest.raises(ValueError):
        pi_from_sticks_inflf(np.array([1.2]))


@given(hnp.arrays(float, st.integers(1, 12), elements=unit_floats))
def test_stick_identity(psi):
    pi, res = pi_from_sticks_infmm(psi)
    assert abs(pi.sum() + res - 1.0) < 1e-12
    assert np.all(pi >= 0)
    lp, l1m = np.log(psi), np.log1p(-psi)
    pi2, res2 = pi_from_log_sticks_infmm(lp, l1m)
    assert np.allclose(pi2, pi, rtol=1e-12, atol=1e-300)
    assert res2 == pytest.approx(res, rel=1e-10, abs=1e-300)


@given(hnp.arrays(float, st.integers(1, 12), elements=unit_floats))
def test_inflf_pi_monotone(psi):
    pi = pi_from_sticks_inflf(psi)
    assert np.all(np.diff(pi) <= 0)


@given(hnp.arrays(np.int8, (4, 3), elements=st.integers(0, 1)),
       hnp.arrays(float, (3, 5), elements=st.floats(1e-3, 1e3)))
def test_eta_products_properties(phi, eta):
    a = eta_products(phi, eta)
    assert a.shape == (4, 5) and np.all(a > 0)
    for i in range(4):
        for k in range(5):
            assert a[i, k] == pytest.approx(eta_product(phi[i], eta[:, k]), rel=1e-12)
    # neutral entities get 1 regardless of eta
    assert np.all(eta_products(np.zeros_like(phi), eta) == 1.0)


@given(st.floats(0.1, 10.0), st.integers(1, 4))
def test_immm_reduction_prods(alpha, F):
    eta = np.full((F, 3), alpha ** (1.0 / F))
    a = eta_products(np.ones((5, F), dtype=np.int8), eta)
    assert np.allclose(a, alpha, rtol=1e-12)


@given(hnp.arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(1e-3, 1e3)))
def test_eta_posterior_domain(eta):
    F, K = eta.shape
    rng = np.random.default_rng(F * 7 + K)
    phi = (rng.random((5, F)) < 0.5).astype(np.int8)
    log1m = np.log1p(-rng.uniform(0.01, 0.99, (5, K)))
    for f in range(F):
        shape, rate = eta_posterior_params(f, phi, log1m, eta, eta_products(phi, eta), EtaHyper())
        assert np.isfinite(shape) and shape > 0
        assert np.all(np.isfinite(rate)) and np.all(rate > 0)


def test_eta_sweep_keeps_products_consistent():
    rng = np.random.default_rng(0)
    phi = (rng.random((6, 3)) < 0.5).astype(np.int8)
    eta = rng.gamma(1.0, size=(3, 4))
    log1m = np.log1p(-rng.uniform(0.05, 0.95, (6, 4)))
    prods = sample_eta_sweep(phi, log1m, eta, EtaHyper(), rng)
    assert np.allclose(prods, eta_products(phi, eta))


@pytest.mark.parametrize("eta, expected", [([[2.0, 8.0]], 4.0), ([[3.0, 3.0, 3.0]], 3.0),
                                           ([[1.0, 1.0], [1.0, 1.0]], 1.0)])
def test_importance_summary_examples(eta, expected):
    assert np.allclose(importance_summary(np.array(eta)), expected)


def test_importance_summary_weighted():
    eta = np.array([[0.05, 1.0, 1.0]])
    w = np.array([[10.0, 0.0, 0.0]])
    assert importance_summary(eta, w)[0] == pytest.approx(0.05)
    # zero total weight falls back to the unweighted mean
    assert importance_summary(eta, np.zeros((1, 3)))[0] == pytest.approx(importance_summary(eta)[0])
    with pytest.raises(ValueError):
        importance_summary(np.ones((2, 0)))


def test_participation_weights():
    phi = np.array([[1, 0], [1, 1]])
    pi = np.array([[0.5, 0.5], [0.2, 0.8]])
    assert np.allclose(participation_weights(phi, pi), [[0.7, 1.3], [0.2, 0.8]])


@given(st.floats(-700, 0, exclude_max=True))
def test_log1mexp(x):
    assert log1mexp(x) == pytest.approx(np.log(-np.expm1(x)), rel=1e-12)


def _ks_to_density(draws, logdens):
    grid = np.linspace(1e-6, 1 - 1e-6, 4001)
    dens = np.exp(logdens(grid))
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    return stats.kstest(draws, lambda x: np.interp(x, grid, cdf)).statistic


@pytest.mark.parametrize("z, beta_b", [(0, 2.0), (1, 1.0)])
def test_inflf_slice_invariance(z, beta_b):
    # K=1, a=1: the conditional is Beta(1, 2) for z=0 and Beta(2, 1) for z=1
    rng = np.random.default_rng(5)
    zrow = np.array([[z]])
    prods = np.ones((1, 1))
    x = 0.5
    draws = np.empty(20000)
    for t in range(draws.size):
        x = sample_psi_inflf(0, 0, zrow, prods, np.array([[x]]), rng)
        draws[t] = x
    assert 0 < draws.min() and draws.max() < 1
    assert _ks_to_density(draws[::2], lambda g: inflf_stick_conditional(g, [0.5], [z], 1.0, 0)) < 0.02
    a_b = 2.0 if z == 1 else 1.0
    assert stats.kstest(draws[::2], stats.beta(a_b, beta_b).cdf).statistic < 0.02


def test_inflf_conditional_couples_later_sticks():
    # with z = [1, 0], psi_1 enters pi_2 = psi_1 psi_2 as well
    x = np.array([0.3, 0.6])
    lp = inflf_stick_conditional(x, [0.5, 0.4], [1, 0], 1.0, 0)
    expect = np.log(x) + np.log1p(-x * 0.4)
    assert np.allclose(lp, expect)


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (4.0, 7.0), (0.3, 2.0), (2.5, 0.6)])
def test_log_beta_draw_law(a, b):
    rng = np.random.default_rng(11)
    lp, l1m = log_beta_draw(np.full(20000, a), np.full(20000, b), rng)
    assert np.allclose(np.logaddexp(lp, l1m), 0.0, atol=1e-12)
    assert stats.kstest(np.exp(lp), stats.beta(a, b).cdf).statistic < 0.015


@pytest.mark.parametrize("b", [1e-4, 0.05])
def test_log_beta_draw_tiny_second_shape(b):
    # 1 - x ~ Beta(b, 1), so (1 - x)^b is uniform; x itself rounds to 1
    rng = np.random.default_rng(12)
    _, l1m = log_beta_draw(np.ones(20000), np.full(20000, b), rng)
    assert stats.kstest(np.exp(b * l1m), "uniform").statistic < 0.015


def test_log_beta_draw_log_moments():
    a, b = 50.0, 0.05
    rng = np.random.default_rng(13)
    lp, l1m = log_beta_draw(np.full(40000, a), np.full(40000, b), rng)
    expect = special.digamma(b) - special.digamma(a + b)
    assert abs(l1m.mean() - expect) < 4 * l1m.std() / np.sqrt(l1m.size)
    expect = special.digamma(a) - special.digamma(a + b)
    assert abs(lp.mean() - expect) < 4 * lp.std() / np.sqrt(lp.size)


def test_log_beta_draw_tiny_shape_finite():
    rng = np.random.default_rng(0)
    lp, l1m = log_beta_draw(np.full(1000, 1e-6), np.ones(1000), rng)
    assert np.all(np.isfinite(lp)) and np.all(lp < 0)
    # E[log x] = psi(a) - psi(a + b) ~ -1/a for tiny a
    assert np.mean(lp) == pytest.approx(-1e6, rel=0.1)
