"""
Forward simulation of the generative processes, truncated at K_max
communities/features, plus planted-partition benchmarks.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from infrm import linkmodels as lm
from infrm.linkmodels import BHyper
from infrm.netdata import TRAIN, UNOBSERVED, NetworkData
from infrm.priors import (EtaHyper, clamp_eta, eta_products, log_beta_draw,
                          pi_from_log_sticks_infmm)


@dataclass
class SyntheticSpec:
    n: int
    F: int = 0
    model: str = "infmm"            # infmm | cinfmm | inflf
    family: str = "binary"
    K_max: int = 5
    seed: int = 0
    eta_hyper: EtaHyper = field(default_factory=EtaHyper)
    b_hyper: BHyper = field(default_factory=BHyper)

    def __post_init__(self):
        if self.K_max < 1:
            raise ValueError("K_max must be >= 1")
        if self.n < 2:
            raise ValueError("need at least two entities")
        if self.model not in ("infmm", "cinfmm", "inflf"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == "inflf" and self.family == "unit":
            raise ValueError("unit link data is not supported for the latent-feature model")


def link_family(model, family):
    return "sigmoid" if model == "inflf" and family == "binary" else family


def _offdiag_mask(n):
    mask = np.full((n, n), TRAIN, dtype=np.int8)
    np.fill_diagonal(mask, UNOBSERVED)
    return mask


def _categorical_rows(P, rng):
    """One categorical draw per row of probability matrix P."""
    cum = np.cumsum(P, axis=-1)
    u = rng.random(P.shape[:-1])[..., None] * cum[..., -1:]
    return np.minimum((cum < u).sum(axis=-1), P.shape[-1] - 1)


def simulate_latents(spec, phi, rng, eta=None, B=None):
    """Draw every latent variable in generative order."""
    n, K = spec.n, spec.K_max
    phi = np.asarray(phi)
    if phi.shape != (n, spec.F):
        raise ValueError(f"phi must be {n} x {spec.F}, got {phi.shape}")
    h = spec.eta_hyper
    if eta is None:
        eta = clamp_eta(rng.gamma(h.alpha_eta, 1.0 / h.beta_eta, size=(spec.F, K)))
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (spec.F, K):
        raise ValueError("eta must be F x K_max")
    a = eta_products(phi, eta)
    truth = {"eta": eta}
    if spec.model == "infmm":
        # sticks kept in log space: Beta(1, a) with tiny a sits at 1 - 1e-300
        log_psi = np.zeros((n, K))
        log1m_psi = np.full((n, K), -np.inf)
        log_psi[:, :-1], log1m_psi[:, :-1] = log_beta_draw(1.0, a[:, :-1], rng)
        pi, _ = pi_from_log_sticks_infmm(log_psi, log1m_psi)
        truth.update(psi=np.exp(log_psi), log_psi=log_psi, log1m_psi=log1m_psi, pi=pi)
    elif spec.model == "cinfmm":
        pi = np.vstack([rng.dirichlet(row) for row in a])
        truth.update(pi=pi)
    else:
        # psi ~ Beta(a, 1)  <=>  psi = U^(1/a)
        log_psi = np.log(1.0 - rng.random((n, K))) / a
        log_pi = np.cumsum(log_psi, axis=1)
        z = (np.log(1.0 - rng.random((n, K))) < log_pi).astype(np.int64)
        truth.update(psi=np.exp(log_psi), log_psi=log_psi, pi=np.exp(log_pi), z=z)
    if spec.model in ("infmm", "cinfmm"):
        pi = truth["pi"]
        s = _categorical_rows(np.repeat(pi[:, None, :], n, axis=1), rng)
        r = _categorical_rows(np.repeat(pi[None, :, :], n, axis=0), rng)
        np.fill_diagonal(s, -1)
        np.fill_diagonal(r, -1)
        truth.update(s=s, r=r)
    fam = link_family(spec.model, spec.family)
    if B is None:
        B = lm.sample_B_prior(fam, (K, K), spec.b_hyper, rng)
    truth["B"] = np.asarray(B, dtype=float)
    return truth


def edge_parameters(truth, model, family):
    """Per-cell parameter of g(.) implied by the latents (diagonal arbitrary)."""
    B = truth["B"]
    if model == "inflf":
        z = truth["z"]
        return z @ B @ z.T
    s, r = truth["s"], truth["r"]
    return B[np.maximum(s, 0), np.maximum(r, 0)]


def edges_given_latents(truth, model, family, rng):
    fam = link_family(model, family)
    X = edge_parameters(truth, model, family)
    e = lm.sample_edges(X, fam, rng)
    np.fill_diagonal(e, 0.0)
    return e


def simulate(spec, phi, eta=None, B=None, rng=None):
    """Forward-simulate (NetworkData, latent ground truth)."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    truth = simulate_latents(spec, phi, rng, eta=eta, B=B)
    edges = edges_given_latents(truth, spec.model, spec.family, rng)
    return NetworkData(edges, spec.family, _offdiag_mask(spec.n)), truth


def plant_communities(n, K, separation=None, family="binary", seed=0, within=None, between=None):
    """Hard-membership block network with a diagonal-dominant B.

    `separation` is the gap between within- and between-block parameters on
    the natural scale of the family (logit for binary, log for count/unit);
    `within`/`between` set the two levels directly instead.
    """
    if K > n:
        raise ValueError("more communities than entities")
    rng = np.random.default_rng(seed)
    if within is None or between is None:
        sep = 4.0 if separation is None else float(separation)
        if family == "binary":
            within, between = 1.0 / (1.0 + np.exp(-sep / 2)), 1.0 / (1.0 + np.exp(sep / 2))
        else:
            within, between = np.exp(sep / 2), np.exp(-sep / 2)
    B = np.full((K, K), float(between))
    np.fill_diagonal(B, float(within))
    labels = rng.permutation(np.arange(n) % K)
    X = B[labels[:, None], labels[None, :]]
    edges = lm.sample_edges(X, family, rng)
    np.fill_diagonal(edges, 0.0)
    return NetworkData(edges, family, _offdiag_mask(n)), labels


def separation_for(within, between):
    """Binary `separation` reproducing the given within/between densities."""
    return logit(within) - logit(between)
