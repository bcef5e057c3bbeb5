"""
Metadata-informed stick-breaking priors.

Each entity i gets per-community stick parameters

    a_ik = prod_f eta_fk ** phi_if

which enter the mixed-membership sticks as Beta(1, a_ik) and the latent
feature sticks as Beta(a_ik, 1). With phi_i = 0 the attribute set is neutral
and a_ik = 1.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

ETA_FLOOR = 1e-8
ETA_CEIL = 1e8
# sticks are kept strictly inside (0, 1) so that log(psi), log(1 - psi) stay finite
PSI_EPS = 1e-15


@dataclass
class EtaHyper:
    alpha_eta: float = 1.0
    beta_eta: float = 1.0


def clamp_eta(eta):
    return np.clip(eta, ETA_FLOOR, ETA_CEIL)


def clamp_psi(psi):
    return np.clip(psi, PSI_EPS, 1.0 - PSI_EPS)


def eta_product(phi_row, eta_col):
    """prod_f eta_col[f] ** phi_row[f] for a single (entity, community)."""
    phi_row = np.asarray(phi_row)
    eta_col = np.asarray(eta_col, dtype=float)
    if phi_row.shape != eta_col.shape:
        raise ValueError("phi row and eta column lengths differ")
    if np.any(eta_col <= 0):
        raise ValueError("importance indicators must be positive")
    return float(np.prod(np.where(phi_row > 0, eta_col, 1.0)))


def eta_products(phi, eta):
    """n x K matrix of a_ik = prod_f eta_fk ** phi_if.

    Binary phi makes each factor either eta_fk or 1, so the product is taken
    directly; clamped eta keeps it finite for any realistic F.
    """
    phi = np.asarray(phi)
    eta = np.asarray(eta, dtype=float)
    n, F = phi.shape
    K = eta.shape[1]
    if F == 0:
        return np.ones((n, K))
    if np.any(eta <= 0):
        raise ValueError("importance indicators must be positive")
    factors = np.where(phi[:, :, None] > 0, eta[None, :, :], 1.0)
    return factors.prod(axis=1)


# ---------------------------------------------------------------------------
# Importance indicators
# ---------------------------------------------------------------------------

def eta_posterior_params(f, phi, log_stick, eta, prods, hyper):
    """Gamma (shape, rate) of eta_f. for every community column at once.

    `log_stick` is ln(1 - psi) for mixed membership or ln(psi) for latent
    features (both <= 0); `prods` is the current n x K matrix of a_ik.
    The rate adds -sum_i phi_if * log_stick_ik * prod_{g != f} eta_gk^phi_ig.
    """
    holders = phi[:, f] > 0
    shape = hyper.alpha_eta + holders.sum()
    if not holders.any():
        return shape, np.full(eta.shape[1], hyper.beta_eta)
    if np.any(log_stick[holders] > 0) or not np.all(np.isfinite(log_stick[holders])):
        raise ValueError("stick weights must lie strictly inside (0, 1)")
    others = prods[holders] / eta[f][None, :]
    rate = hyper.beta_eta - (log_stick[holders] * others).sum(axis=0)
    return shape, rate


def sample_eta(f, k, phi, log_stick, eta, hyper, rng):
    """Draw a single eta_fk from its Gamma full conditional."""
    prods = eta_products(phi, eta)
    shape, rate = eta_posterior_params(f, phi, log_stick, eta, prods, hyper)
    return float(clamp_eta(rng.gamma(shape, 1.0 / rate[k])))


@njit(cache=True)
def _eta_sweep_kernel(phi, log_stick, eta, prods, G, beta, lo, hi, rates):
    n, F = phi.shape
    K = eta.shape[1]
    for f in range(F):
        for k in range(K):
            rate = beta
            for i in range(n):
                if phi[i, f] > 0:
                    rate -= log_stick[i, k] * (prods[i, k] / eta[f, k])
            rates[f, k] = rate
            new = min(max(G[f, k] * (1.0 / rate), lo), hi)
            ratio = new / eta[f, k]
            for i in range(n):
                if phi[i, f] > 0:
                    prods[i, k] *= ratio
            eta[f, k] = new


def sample_eta_sweep(phi, log_stick, eta, hyper, rng, columns=None, recorder=None):
    """Update eta in row-major (f, k) order, in place; returns the new a_ik.

    The Gamma shapes do not depend on eta, so all standard-gamma variates are
    drawn up front (same stream order as drawing row by row) and the rates
    are formed sequentially in a compiled loop. Columns outside `columns`
    are left untouched.
    """
    F, K = eta.shape
    cols = np.arange(K) if columns is None else np.asarray(columns)
    prods = eta_products(phi, eta)
    phi = np.ascontiguousarray(phi, dtype=np.int8)
    holders = phi.any(axis=1)
    ls = np.ascontiguousarray(log_stick[:, cols], dtype=float)
    if np.any(ls[holders] > 0) or not np.all(np.isfinite(ls[holders])):
        raise ValueError("stick weights must lie strictly inside (0, 1)")
    shapes = hyper.alpha_eta + phi.sum(axis=0).astype(float)
    G = rng.standard_gamma(np.repeat(shapes[:, None], cols.size, axis=1))
    sub_eta = np.ascontiguousarray(eta[:, cols], dtype=float)
    sub_prods = np.ascontiguousarray(prods[:, cols])
    rates = np.empty((F, cols.size))
    _eta_sweep_kernel(phi, ls, sub_eta, sub_prods, G, float(hyper.beta_eta), ETA_FLOOR, ETA_CEIL, rates)
    eta[:, cols] = sub_eta
    prods[:, cols] = sub_prods
    if recorder is not None:
        for f in range(F):
            recorder.append(("eta", f, shapes[f], rates[f].copy()))
    return prods


def importance_summary(eta, weights=None):
    """Geometric mean of each attribute's indicators over active communities.

    With `weights` (F x K, non-negative) the mean of log eta is weighted, e.g.
    by participation_weights so that communities the attribute's holders
    actually use dominate. Rows with zero total weight fall back to the
    unweighted mean.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 2 or eta.shape[1] == 0:
        raise ValueError("importance summary needs at least one community")
    loge = np.log(eta)
    if weights is None:
        return np.exp(loge.mean(axis=1))
    w = np.asarray(weights, dtype=float)
    if w.shape != eta.shape or np.any(w < 0):
        raise ValueError("weights must be non-negative and shaped like eta")
    tot = w.sum(axis=1)
    safe = np.where(tot > 0, tot, 1.0)
    return np.exp(np.where(tot > 0, (w * loge).sum(axis=1) / safe, loge.mean(axis=1)))


def participation_weights(phi, pi):
    """F x K membership mass of each attribute's holders: sum_i phi_if pi_ik."""
    phi = np.asarray(phi, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return phi.T @ pi


# ---------------------------------------------------------------------------
# Mixed-membership sticks
# ---------------------------------------------------------------------------

def psi_posterior_infmm(N, prods):
    """Beta parameters for psi_ik given indicator counts N (n x K).

    Returns (N_ik + 1, sum_{l > k} N_il + a_ik).
    """
    N = np.asarray(N, dtype=float)
    if np.any(N < 0):
        raise ValueError("negative counts")
    tail = np.cumsum(N[..., ::-1], axis=-1)[..., ::-1] - N
    return N + 1.0, tail + prods


def sample_psi_infmm(N_row, k, prod, rng):
    """Draw psi_ik for one entity given its per-community counts N_row."""
    a, b = psi_posterior_infmm(np.asarray(N_row)[None, :], np.full((1, len(N_row)), prod))
    return float(clamp_psi(rng.beta(a[0, k], b[0, k])))


def pi_from_sticks_infmm(psi):
    """pi_ik = psi_ik prod_{l<k}(1 - psi_il); returns (pi, residual mass)."""
    psi = np.asarray(psi, dtype=float)
    if np.any((psi <= 0) | (psi > 1)):
        raise ValueError("stick weights must lie in (0, 1)")
    remain = np.cumprod(1.0 - psi, axis=-1)
    before = np.concatenate([np.ones(psi.shape[:-1] + (1,)), remain[..., :-1]], axis=-1)
    pi = psi * before
    residual = remain[..., -1] if psi.shape[-1] else np.ones(psi.shape[:-1])
    return pi, residual


def pi_from_sticks_inflf(psi):
    """pi_ik = prod_{l<=k} psi_il, non-increasing in k."""
    psi = np.asarray(psi, dtype=float)
    if np.any((psi <= 0) | (psi > 1)):
        raise ValueError("stick weights must lie in (0, 1)")
    return np.cumprod(psi, axis=-1)


# ---------------------------------------------------------------------------
# Latent-feature sticks (non-conjugate; slice sampled)
# ---------------------------------------------------------------------------

def slice_sample_unit(logdens, x0, rng, max_shrink=200):
    """Vectorised univariate slice sampler on (0, 1).

    `logdens(x, idx)` evaluates the log density of the coordinates `idx` at
    values `x`. The initial bracket is the whole interval, so no stepping out
    is needed; shrinkage alone gives a valid update.
    """
    x0 = np.asarray(x0, dtype=float)
    m = x0.shape[0]
    all_idx = np.arange(m)
    logy = logdens(x0, all_idx) + np.log(rng.random(m))
    lo = np.zeros(m)
    hi = np.ones(m)
    out = x0.copy()
    pending = all_idx
    for _ in range(max_shrink):
        if pending.size == 0:
            break
        prop = lo[pending] + rng.random(pending.size) * (hi[pending] - lo[pending])
        prop = clamp_psi(prop)
        ok = logdens(prop, pending) > logy[pending]
        out[pending[ok]] = prop[ok]
        rej = pending[~ok]
        below = prop[~ok] < x0[rej]
        lo[rej[below]] = prop[~ok][below]
        hi[rej[~below]] = prop[~ok][~below]
        pending = rej
    # any coordinate still pending keeps its old value (bracket collapsed onto x0)
    return out


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > -0.6931471805599453, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def _inflf_stick_loglik(log_psi, z, k):
    """Build loglik(log_x, idx): log-likelihood of column k's sticks set to exp(log_x)."""
    # log c_il = sum_{m<=l, m!=k} log psi_im for l >= k
    cum = np.cumsum(log_psi, axis=1)
    logc = cum[:, k:] - log_psi[:, k:k + 1]
    zt = z[:, k:].astype(float)

    def loglik(log_x, idx):
        lp = log_x[:, None] + logc[idx]
        zz = zt[idx]
        with np.errstate(invalid="ignore"):
            terms = np.where(zz > 0, lp, log1mexp(lp))
        return terms.sum(axis=1)

    return loglik


def sample_log_psi_inflf_column(log_psi, z, prods, k, rng):
    """Slice-update column k of the latent-feature sticks; returns new log psi.

    Under the Beta(a, 1) prior u = psi^a is uniform on (0, 1), so the slice
    sampler runs on u with a flat prior and the likelihood alone as target.
    log psi = log(u) / a stays exact even when psi underflows.
    """
    if np.any((z != 0) & (z != 1)):
        raise ValueError("latent features must be binary")
    a = prods[:, k]
    loglik = _inflf_stick_loglik(log_psi, z, k)

    def logdens(u, idx):
        return loglik(np.log(u) / a[idx], idx)

    u0 = np.exp(a * log_psi[:, k])
    u0 = np.clip(u0, np.finfo(float).tiny, 1.0)
    u = slice_sample_unit(logdens, u0, rng)
    return np.log(u) / a


def sample_psi_inflf(i, k, z, prods, psi, rng):
    """One slice update of psi_ik targeting its full conditional."""
    log_psi = np.log(np.asarray(psi, dtype=float)[i:i + 1])
    new = sample_log_psi_inflf_column(log_psi, np.asarray(z)[i:i + 1],
                                      np.asarray(prods, dtype=float)[i:i + 1], k, rng)
    return float(np.exp(new[0]))


def inflf_stick_conditional(x, psi_row, z_row, prod, k):
    """Unnormalised log full conditional density of psi_ik at values x (for tests)."""
    log_psi = np.log(np.asarray(psi_row, dtype=float))[None, :]
    loglik = _inflf_stick_loglik(log_psi, np.asarray(z_row)[None, :], k)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (prod - 1.0) * np.log(x) + loglik(np.log(x), np.zeros(x.size, dtype=int))


# ---------------------------------------------------------------------------
# Exact log-scale stick draws
# ---------------------------------------------------------------------------

def _gamma_parts(shape, rng):
    # Gamma(shape) = Gamma(shape + 1) * U^(1/shape) for shape < 1
    small = shape < 1.0
    return rng.gamma(shape + small), 1.0 - rng.random(shape.shape)


@njit(cache=True)
def _log_gamma_from_parts(shape, g, u, out):
    for idx in range(shape.size):
        x = math.log(g.flat[idx])
        if shape.flat[idx] < 1.0:
            x += math.log(u.flat[idx]) / shape.flat[idx]
        out.flat[idx] = x


def log_gamma_draw(shape, rng):
    """log of Gamma(shape, 1) draws; exact for tiny shapes where the draw underflows."""
    dims = np.shape(shape)
    shape = np.ascontiguousarray(shape, dtype=float)
    g, u = _gamma_parts(shape, rng)
    out = np.empty(shape.shape)
    _log_gamma_from_parts(shape, g, u, out)
    return out.reshape(dims)


@njit(cache=True)
def _log_beta_from_parts(a, ga, ua, b, gb, ub, la, lb):
    for idx in range(a.size):
        x = math.log(ga.flat[idx])
        if a.flat[idx] < 1.0:
            x += math.log(ua.flat[idx]) / a.flat[idx]
        y = math.log(gb.flat[idx])
        if b.flat[idx] < 1.0:
            y += math.log(ub.flat[idx]) / b.flat[idx]
        top = max(x, y)
        tot = top + math.log(math.exp(x - top) + math.exp(y - top))
        la.flat[idx] = x - tot
        lb.flat[idx] = y - tot


def log_beta_draw(a, b, rng):
    """(log x, log(1 - x)) for x ~ Beta(a, b), built from two log-gamma draws."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    dims = np.shape(a)
    a, b = np.ascontiguousarray(a), np.ascontiguousarray(b)
    ga, ua = _gamma_parts(a, rng)
    gb, ub = _gamma_parts(b, rng)
    a, b = np.ascontiguousarray(a).reshape(-1), np.ascontiguousarray(b).reshape(-1)
    la, lb = np.empty(a.shape), np.empty(a.shape)
    _log_beta_from_parts(a, ga.reshape(-1), ua.reshape(-1), b, gb.reshape(-1), ub.reshape(-1), la, lb)
    return la.reshape(dims), lb.reshape(dims)


def pi_from_log_sticks_infmm(log_psi, log1m_psi):
    """pi and residual mass from log psi and log(1 - psi)."""
    log_psi = np.asarray(log_psi, dtype=float)
    cum = np.cumsum(log1m_psi, axis=-1)
    before = np.concatenate([np.zeros(log_psi.shape[:-1] + (1,)), cum[..., :-1]], axis=-1)
    pi = np.exp(log_psi + before)
    residual = np.exp(cum[..., -1]) if log_psi.shape[-1] else np.ones(log_psi.shape[:-1])
    return pi, residual
