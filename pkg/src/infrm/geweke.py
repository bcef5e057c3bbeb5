"""
Joint-distribution ("getting it right") test of a Gibbs kernel.

Two samplers of the joint p(latents, data):

  * marginal-conditional: independent forward simulations;
  * successive-conditional: one Gibbs sweep on latents given data, then
    fresh data given latents, repeated.

If the sweep leaves the posterior invariant both produce the same
distribution, so summary statistics of the latents agree up to Monte Carlo
error. The Gibbs chain is autocorrelated, so its standard errors use batch
means.

The infinite InfMM sampler runs in truncated mode here (K_max fixed, last
stick equal to one): the forward simulator is truncated, and the test must
compare two samplers of the same joint.
"""
from dataclasses import dataclass

import numpy as np

from infrm.genmodel import SyntheticSpec, edges_given_latents, simulate
from infrm.samplers import make_sampler
from infrm.samplers.base import ModelConfig

GEWEKE_CASES = (("infmm", "binary"), ("infmm", "count"), ("infmm", "unit"),
                ("cinfmm", "binary"), ("inflf", "binary"), ("inflf", "count"))


@dataclass
class GewekeResult:
    model: str
    family: str
    names: list
    forward_mean: np.ndarray
    gibbs_mean: np.ndarray
    z: np.ndarray

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z)))


def _indicator_counts(s, r, n, K):
    off = ~np.eye(n, dtype=bool)
    rows, cols = np.nonzero(off)
    N = np.bincount(rows * K + s[rows, cols], minlength=n * K)
    N += np.bincount(cols * K + r[rows, cols], minlength=n * K)
    return N.reshape(n, K)


def statistics(latents, model, n, K):
    """Vector of test statistics: ln eta entries, per-community means, B entries."""
    parts = [np.log(latents["eta"]).ravel()]
    if model == "inflf":
        parts.append(latents["z"].mean(axis=0))
    else:
        parts.append(_indicator_counts(latents["s"], latents["r"], n, K).mean(axis=0))
    parts.append(np.asarray(latents["B"]).ravel())
    return np.concatenate(parts)


def statistic_names(F, K):
    names = [f"ln_eta[{f},{k}]" for f in range(F) for k in range(K)]
    names += [f"mean_N[{k}]" for k in range(K)]
    names += [f"B[{k},{l}]" for k in range(K) for l in range(K)]
    return names


def _sampler_latents(sampler, model, n):
    out = {"eta": sampler.eta, "B": sampler.B}
    if model == "inflf":
        out["z"] = sampler.z
        return out
    v = sampler.view
    s = np.zeros((n, n), dtype=np.int64)
    r = np.zeros((n, n), dtype=np.int64)
    s[v.rows, v.cols] = sampler.s
    r[v.rows, v.cols] = sampler.r
    out.update(s=s, r=r)
    return out


def batch_means_se(x, n_batches=50):
    """Standard error of the mean of each column of x from batch means."""
    x = np.asarray(x, dtype=float)
    T = (x.shape[0] // n_batches) * n_batches
    b = x[:T].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return b.std(axis=0, ddof=1) / np.sqrt(n_batches)


def run_geweke(model, family, n=8, F=2, K_max=3, samples=10000, seed=0, burn=200):
    rng = np.random.default_rng(seed)
    phi = (rng.random((n, F)) < 0.5).astype(np.int8)
    spec = SyntheticSpec(n=n, F=F, model=model, family=family, K_max=K_max)

    fwd = np.array([statistics(simulate(spec, phi, rng=rng)[1], model, n, K_max)
                    for _ in range(samples)])

    cfg = ModelConfig(model=model, family=family, K_max=K_max, K_init=K_max, truncate=True)
    net, truth = simulate(spec, phi, rng=rng)
    sampler = make_sampler(cfg, net, phi, rng)
    sampler.load_truth(truth)
    chain = np.empty_like(fwd)
    for t in range(-burn, samples):
        sampler.sweep()
        latents = _sampler_latents(sampler, model, n)
        if t >= 0:
            chain[t] = statistics(latents, model, n, K_max)
        sampler.set_edges(edges_given_latents(latents, model, family, rng))

    se_f = fwd.std(axis=0, ddof=1) / np.sqrt(samples)
    se_g = batch_means_se(chain)
    z = (fwd.mean(axis=0) - chain.mean(axis=0)) / np.sqrt(se_f ** 2 + se_g ** 2)
    return GewekeResult(model, family, statistic_names(F, K_max),
                        fwd.mean(axis=0), chain.mean(axis=0), z)
