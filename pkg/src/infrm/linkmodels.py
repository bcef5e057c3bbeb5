"""
Edge likelihood families and their conjugate compatibility posteriors.

Families:

    binary   e ~ Bernoulli(B),           B ~ Beta(a_B, b_B)
    count    e ~ Poisson(B),             B ~ Gamma(alpha_B, beta_B)
    unit     e ~ Beta(B, 1) on (0, 1],   B ~ Gamma(alpha_B, beta_B)
    sigmoid  e ~ Bernoulli(sigmoid(x)),  B entries ~ Normal(0, sigma_B^2)

All rates are parameterised as (shape, rate); numpy's gamma takes a scale.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import expit, gammaln, log_expit

FAMILIES = ("binary", "count", "unit", "sigmoid")


@dataclass
class BHyper:
    alpha_B: float = 1.0
    beta_B: float = 1.0
    a_B: float = 1.0
    b_B: float = 1.0
    sigma_B: float = 1.0


def _check_family(family):
    if family not in FAMILIES:
        raise ValueError(f"unknown link family {family!r}")


def loglik_edge(e, B, family):
    """Elementwise log pmf/pdf of edge value(s) `e` given parameter(s) `B`."""
    _check_family(family)
    e = np.asarray(e, dtype=float)
    B = np.asarray(B, dtype=float)
    if family == "binary":
        if np.any((e != 0) & (e != 1)):
            raise ValueError("binary edges must be 0 or 1")
        if np.any((B <= 0) | (B >= 1)):
            raise ValueError("Bernoulli parameter outside (0, 1)")
        return np.where(e > 0, np.log(B), np.log1p(-B))
    if family == "count":
        if np.any((e < 0) | (e != np.floor(e))):
            raise ValueError("count edges must be non-negative integers")
        if np.any(B < 0):
            raise ValueError("Poisson rate must be non-negative")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(e > 0, e * np.log(B), 0.0) - B - gammaln(e + 1)
        return out
    if family == "unit":
        if np.any((e <= 0) | (e > 1)):
            raise ValueError("unit edges must lie in (0, 1]")
        if np.any(B <= 0):
            raise ValueError("Beta(B, 1) parameter must be positive")
        return np.log(B) + (B - 1.0) * np.log(e)
    if np.any((e != 0) & (e != 1)):
        raise ValueError("binary edges must be 0 or 1")
    return np.where(e > 0, log_expit(B), log_expit(-B))


# ---------------------------------------------------------------------------
# Marginal predictives (B integrated against its prior)
# ---------------------------------------------------------------------------

def log_marginal_count(e, alpha=1.0, beta=1.0):
    e = np.asarray(e, dtype=float)
    if np.any(e < 0):
        raise ValueError("count must be non-negative")
    # prod_{q=0}^{e}(alpha+q) / (alpha+e) == Gamma(alpha+e) / Gamma(alpha)
    return (alpha * np.log(beta) - gammaln(e + 1) - (alpha + e) * np.log(beta + 1.0)
            + gammaln(alpha + e) - gammaln(alpha))


def marginal_count(e, alpha=1.0, beta=1.0):
    """Poisson-Gamma predictive pmf, i.e. NegBin(alpha, beta/(beta+1))."""
    return np.exp(log_marginal_count(e, alpha, beta))


def log_marginal_unit(e, alpha=1.0, beta=1.0):
    e = np.asarray(e, dtype=float)
    if np.any((e <= 0) | (e > 1)):
        raise ValueError("unit value must lie in (0, 1]")
    le = np.log(e)
    return np.log(alpha) - le + alpha * np.log(beta) - (alpha + 1.0) * np.log(beta - le)


def marginal_unit(e, alpha=1.0, beta=1.0):
    """Beta(B,1)-Gamma predictive density on (0, 1]."""
    return np.exp(log_marginal_unit(e, alpha, beta))


def log_marginal(e, family, hyper):
    """Log predictive of `e` for a community pair whose B is still unknown."""
    if family == "binary":
        p1 = hyper.a_B / (hyper.a_B + hyper.b_B)
        e = np.asarray(e, dtype=float)
        return np.where(e > 0, np.log(p1), np.log1p(-p1))
    if family == "count":
        return log_marginal_count(e, hyper.alpha_B, hyper.beta_B)
    if family == "unit":
        return log_marginal_unit(e, hyper.alpha_B, hyper.beta_B)
    raise ValueError(f"no closed-form marginal for family {family!r}")


# ---------------------------------------------------------------------------
# Conjugate posteriors
# ---------------------------------------------------------------------------

def posterior_B_poisson(edge_sum, m, hyper):
    """(shape, rate) of the Gamma posterior of a Poisson block rate."""
    edge_sum = np.asarray(edge_sum, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(edge_sum < 0) or np.any(m < 0):
        raise ValueError("negative counts")
    return edge_sum + hyper.alpha_B, m + hyper.beta_B


def sample_B_poisson(edge_sum, m, hyper, rng):
    shape, rate = posterior_B_poisson(edge_sum, m, hyper)
    return rng.gamma(shape, 1.0 / rate)


def posterior_B_unit(log_edge_sum, m, hyper):
    """(shape, rate) of the Gamma posterior of a Beta(B, 1) block parameter.

    `log_edge_sum` is the sum of ln e over the assigned edges (<= 0).
    """
    log_edge_sum = np.asarray(log_edge_sum, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ValueError("negative counts")
    if np.any(log_edge_sum > 0) or not np.all(np.isfinite(log_edge_sum)):
        raise ValueError("unit edges must lie in (0, 1]")
    return m + hyper.alpha_B, hyper.beta_B - log_edge_sum


def sample_B_unit(log_edge_sum, m, hyper, rng):
    shape, rate = posterior_B_unit(log_edge_sum, m, hyper)
    return rng.gamma(shape, 1.0 / rate)


def posterior_B_bernoulli(n1, n0, hyper):
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    if np.any(n1 < 0) or np.any(n0 < 0):
        raise ValueError("negative counts")
    return hyper.a_B + n1, hyper.b_B + n0


def sample_B_bernoulli(n1, n0, hyper, rng):
    a, b = posterior_B_bernoulli(n1, n0, hyper)
    return clip_open_unit(rng.beta(a, b))


def clip_open_unit(x):
    return np.clip(x, 1e-12, 1.0 - 1e-12)


def block_stats(e, k, l, K, family):
    """Per-block sufficient statistics for edges `e` assigned to blocks (k, l).

    Returns (m, t) as K x K arrays: m = number of edges, t = sum of e
    (binary, count) or sum of ln e (unit).
    """
    idx = k * K + l
    m = np.bincount(idx, minlength=K * K).reshape(K, K).astype(float)
    if family == "unit":
        t = np.bincount(idx, weights=np.log(e), minlength=K * K)
    else:
        t = np.bincount(idx, weights=e, minlength=K * K)
    return m, t.reshape(K, K)


def sample_B_posterior(family, m, t, hyper, rng):
    """Draw every block of B from its conjugate posterior given block stats."""
    if family == "binary":
        return sample_B_bernoulli(t, m - t, hyper, rng)
    if family == "count":
        return sample_B_poisson(t, m, hyper, rng)
    if family == "unit":
        return sample_B_unit(t, m, hyper, rng)
    raise ValueError(f"family {family!r} has no conjugate block update")


def sample_B_prior(family, shape, hyper, rng):
    if family == "binary":
        return clip_open_unit(rng.beta(hyper.a_B, hyper.b_B, size=shape))
    if family in ("count", "unit"):
        return rng.gamma(hyper.alpha_B, 1.0 / hyper.beta_B, size=shape)
    if family == "sigmoid":
        return rng.normal(0.0, hyper.sigma_B, size=shape)
    _check_family(family)


def log_prior_B(B, family, hyper):
    if family == "binary":
        return stats.beta.logpdf(B, hyper.a_B, hyper.b_B).sum()
    if family in ("count", "unit"):
        return stats.gamma.logpdf(B, hyper.alpha_B, scale=1.0 / hyper.beta_B).sum()
    return stats.norm.logpdf(B, 0.0, hyper.sigma_B).sum()


def sample_edges(B, family, rng):
    """Draw edge values elementwise from g(B)."""
    B = np.asarray(B, dtype=float)
    if family == "binary":
        return (rng.random(B.shape) < B).astype(float)
    if family == "sigmoid":
        return (rng.random(B.shape) < expit(B)).astype(float)
    if family == "count":
        return rng.poisson(B).astype(float)
    if family == "unit":
        # inverse CDF of Beta(B, 1) is u^(1/B); stay in log space for small B
        logu = np.log(rng.random(B.shape))
        return np.maximum(np.exp(logu / B), np.finfo(float).tiny)
    _check_family(family)


# ---------------------------------------------------------------------------
# Predictive summaries used for scoring
# ---------------------------------------------------------------------------

def positive_prob(B, family, unit_threshold=0.5):
    """Probability of a 'positive' edge given B.

    binary: Pr(e = 1); count: Pr(e > 0); unit: Pr(e > unit_threshold).
    """
    B = np.asarray(B, dtype=float)
    if family == "binary":
        return B
    if family == "sigmoid":
        return expit(B)
    if family == "count":
        return -np.expm1(-B)
    if family == "unit":
        return 1.0 - unit_threshold ** B
    _check_family(family)


def mean_edge(B, family):
    B = np.asarray(B, dtype=float)
    if family in ("binary", "count"):
        return B
    if family == "sigmoid":
        return expit(B)
    if family == "unit":
        return B / (B + 1.0)
    _check_family(family)


def prior_expectation(fn, family, hyper):
    """E[fn(B)] under the prior, for the undiscovered-community slot."""
    if family == "binary":
        dist = stats.beta(hyper.a_B, hyper.b_B)
    else:
        dist = stats.gamma(hyper.alpha_B, scale=1.0 / hyper.beta_B)
    val, _ = integrate.quad(lambda b: fn(b) * dist.pdf(b), *dist.support(), limit=200)
    return val
