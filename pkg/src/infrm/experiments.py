"""
Small simulation studies shared by the acceptance suite and scripts/.

Each trial function runs one seed and returns plain numbers; the callers
decide how many seeds to run and what counts as a success.
"""
import time
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import adjusted_rand_score

from . import evalx
from .genmodel import SyntheticSpec, plant_communities, simulate
from .netdata import TEST, make_cv_folds
from .samplers import make_sampler
from .samplers.base import ModelConfig
from .samplers.chain import RunConfig, run_chain


# ---------------------------------------------------------------------------
# Planted-partition recovery
# ---------------------------------------------------------------------------

@dataclass
class RecoveryResult:
    seed: int
    auc: float
    ari: float
    oracle_auc: float
    K_mean: float


def recovery_trial(seed, n=60, K=3, within=0.9, between=0.1, iterations=2000, burn_in=1000, thinning=10):
    """Fit binary InfMM to a planted block network with fold 0 held out."""
    full, labels = plant_communities(n, K, within=within, between=between, seed=seed)
    net = make_cv_folds(full, seed).apply(full, 0)
    cfg = ModelConfig(model="infmm", family="binary")
    run = RunConfig(iterations=iterations, burn_in=burn_in, thinning=thinning, chains=1,
                    seed=seed, heldout_every=10 ** 9)
    res = run_chain(cfg, net, None, run)
    ev = evalx.evaluate(res.samples, net, cfg)
    point = evalx.least_squares_clustering([s["dominant"] for s in res.samples])
    # generative probabilities are the best possible scores on this design
    gen = np.where(labels[:, None] == labels[None, :], within, between)
    truth = evalx.binarized_truth(net)
    oracle = evalx.auc(gen, truth, net.mask, TEST)
    return RecoveryResult(seed, float(ev["auc"]), float(adjusted_rand_score(labels, point)),
                          float(oracle), float(np.mean([t.K for t in res.traces])))


# ---------------------------------------------------------------------------
# Attribute importance
# ---------------------------------------------------------------------------

def log_importance(samples, phi):
    """Posterior mean over samples of the participation-weighted log importance (length F)."""
    from .priors import importance_summary, participation_weights
    vals = []
    for s in samples:
        K = s["eta"].shape[1]
        if K == 0:
            continue
        w = participation_weights(phi, s["pi"][:, :K])
        vals.append(np.log(importance_summary(s["eta"], w)))
    return np.mean(vals, axis=0)


def importance_trial(seed, n=60, K=4, driver_eta=0.05, within=0.8, between=0.1,
                     iterations=600, burn_in=300, thinning=5):
    """Attribute 0 drives community 0 (small eta); attribute 1 is neutral.

    Returns the recovered log importance of both attributes.
    """
    rng = np.random.default_rng(seed)
    phi = (rng.random((n, 2)) < 0.5).astype(np.int8)
    eta = np.ones((2, K))
    eta[0, 0] = driver_eta
    B = np.full((K, K), between)
    np.fill_diagonal(B, within)
    net, _ = simulate(SyntheticSpec(n=n, F=2, model="infmm", K_max=K, seed=seed), phi, eta=eta, B=B, rng=rng)
    cfg = ModelConfig(model="infmm", family="binary")
    run = RunConfig(iterations=iterations, burn_in=burn_in, thinning=thinning, chains=1, seed=seed,
                    heldout_every=10 ** 9)
    return log_importance(run_chain(cfg, net, phi, run).samples, phi)


# ---------------------------------------------------------------------------
# Count versus binarized model
# ---------------------------------------------------------------------------

def count_advantage_trial(seed, n=50, F=2, K_max=5, iterations=400, burn_in=200, thinning=2, folds=10):
    """Summed 10-fold held-out log-likelihood of presence/absence, count vs binary InfMM.

    Both models are scored on the same event (edge present or not): the
    Poisson model through Pr(e > 0), the Bernoulli model fitted to the
    binarized network directly.
    """
    rng = np.random.default_rng(seed)
    phi = (rng.random((n, F)) < 0.5).astype(np.int8)
    full, _ = simulate(SyntheticSpec(n=n, F=F, model="infmm", family="count", K_max=K_max, seed=seed),
                       phi, rng=rng)
    plan = make_cv_folds(full, seed, folds)
    run = RunConfig(iterations=iterations, burn_in=burn_in, thinning=thinning, chains=1, seed=seed,
                    heldout_every=10 ** 9)
    cc = ModelConfig(model="infmm", family="count")
    bc = ModelConfig(model="infmm", family="binary")
    ll_count = ll_binary = 0.0
    for f in range(folds):
        net = plan.apply(full, f)
        bnet = net.binarized()
        ll_count += evalx.test_loglik(run_chain(cc, net, phi, run).samples, net, cc, binarize=True)
        ll_binary += evalx.test_loglik(run_chain(bc, bnet, phi, run).samples, bnet, bc)
    return float(ll_count), float(ll_binary)


# ---------------------------------------------------------------------------
# Sweep timing
# ---------------------------------------------------------------------------

def _timing_sampler(n, F, K, seed):
    rng = np.random.default_rng(seed)
    phi = (rng.random((n, F)) < 0.5).astype(np.int8)
    net, _ = simulate(SyntheticSpec(n=n, F=F, K_max=K, seed=seed), phi, rng=rng)
    cfg = ModelConfig(model="infmm", family="binary", K_max=K, K_init=K, truncate=True)
    return make_sampler(cfg, net, phi, rng)


def median_sweep_times(settings, K=5, sweeps=30, warmup=3, seed=0, block=5):
    """Median wall time of one truncated InfMM sweep for each (n, F) in `settings`.

    Samplers take turns in blocks of `block` timed sweeps, each block preceded
    by one untimed sweep to bring the sampler's arrays back into cache. Slow
    drifts in machine load then hit every setting alike.
    """
    samplers = [_timing_sampler(n, F, K, seed) for n, F in settings]
    for s in samplers:
        for _ in range(warmup):
            s.sweep()
    rounds = -(-sweeps // block)
    times = np.empty((rounds * block, len(samplers)))
    for t in range(rounds):
        for j, s in enumerate(samplers):
            s.sweep()
            for b in range(block):
                t0 = time.perf_counter()
                s.sweep()
                times[t * block + b, j] = time.perf_counter() - t0
    return np.median(times, axis=0)


def scaling_ratios(sweeps=30, K=5):
    """(n=200 / n=100 at F=2, F=20 / F=2 at n=200) median sweep-time ratios."""
    t100, t200, t200f = median_sweep_times([(100, 2), (200, 2), (200, 20)], K, sweeps)
    return float(t200 / t100), float(t200f / t200), (float(t100), float(t200), float(t200f))
