"""
pi-collapsed Gibbs sampler for the informative mixed-membership model with
a fixed number of communities K.

Integrating pi_i out leaves a Dirichlet-multinomial over entity i's
indicators with parameters a_i. = prod_f eta_f.^phi_i, so

    Pr(s_ij = k | rest) ∝ (N_ik^{-s_ij} + a_ik) g(e_ij | B_{k, r_ij}).

Indicators are dependent through the counts and are scanned sequentially
in a compiled kernel. The importance indicators have no conjugate update
once the sticks are gone; they move by random-walk Metropolis on log eta
against the collapsed joint.
"""
import math

import numpy as np
from numba import njit
from scipy import stats
from scipy.special import gammaln

from infrm import linkmodels as lm
from infrm.priors import clamp_eta, eta_products
from infrm.samplers.base import (TrainView, loglik_table, resample_hyperparameters,
                                 rng_from_state, rng_state)
from infrm.samplers.infmm import lm_copy
from infrm.samplers.kernels import FAMILY_CODE, edge_ll

@njit(cache=True)
def _collapsed_scan(rows, cols, e, loge, s, r, N, prods, B, code, u, probs):
    """Sequential sweep over all (s_c, r_c); u holds two uniforms per cell.

    If probs has rows, the normalised conditional of every update is stored.
    """
    K = prods.shape[1]
    logB = np.log(B)
    log1mB = np.log1p(-B) if code == 0 else np.zeros_like(B)
    w = np.empty(K)
    record = probs.shape[0] > 0
    for c in range(rows.size):
        for role in range(2):
            if role == 0:
                owner = rows[c]
                old = s[c]
            else:
                owner = cols[c]
                old = r[c]
            N[owner, old] -= 1
            top = -np.inf
            for k in range(K):
                if role == 0:
                    ll = edge_ll(code, e[c], loge[c], B[k, r[c]], logB[k, r[c]], log1mB[k, r[c]])
                else:
                    ll = edge_ll(code, e[c], loge[c], B[s[c], k], logB[s[c], k], log1mB[s[c], k])
                w[k] = math.log(N[owner, k] + prods[owner, k]) + ll
                if w[k] > top:
                    top = w[k]
            total = 0.0
            for k in range(K):
                w[k] = math.exp(w[k] - top)
                total += w[k]
            target = u[2 * c + role] * total
            acc = 0.0
            new = K - 1
            for k in range(K):
                acc += w[k]
                if acc >= target:
                    new = k
                    break
            if record:
                for k in range(K):
                    probs[2 * c + role, k] = w[k] / total
            N[owner, new] += 1
            if role == 0:
                s[c] = new
            else:
                r[c] = new


def dirmult_loglik(N, prods):
    """Per-entity collapsed Dirichlet-multinomial log term (up to constants)."""
    A = prods.sum(axis=1)
    T = N.sum(axis=1)
    return (gammaln(N + prods) - gammaln(prods)).sum(axis=1) + gammaln(A) - gammaln(T + A)


class CollapsedInfMMSampler:
    model = "cinfmm"

    def __init__(self, net, phi, cfg, rng, recorder=None, init=True):
        if cfg.family not in FAMILY_CODE:
            raise ValueError(f"unsupported family {cfg.family!r}")
        self.cfg = cfg
        self.family = cfg.family
        self.view = TrainView(net, self.family)
        self.n = net.n
        self.phi = np.zeros((self.n, 0), dtype=np.int8) if phi is None else np.asarray(phi, dtype=np.int8)
        self.F = self.phi.shape[1]
        self.eta_hyper = lm_copy(cfg.eta)
        self.b_hyper = lm_copy(cfg.B)
        self.rng = rng
        self.recorder = recorder
        self.iteration = 0
        if init:
            K = cfg.K_max
            self.eta = np.full((self.F, K), float(cfg.eta_init))
            self.s = rng.integers(K, size=self.view.m)
            self.r = rng.integers(K, size=self.view.m)
            self._update_B()

    @property
    def K(self):
        return self.cfg.K_max

    def prods(self):
        return eta_products(self.phi, self.eta)

    def counts(self):
        K, n, v = self.K, self.n, self.view
        N = np.bincount(v.rows * K + self.s, minlength=n * K)
        N += np.bincount(v.cols * K + self.r, minlength=n * K)
        return N.reshape(n, K)

    def indicator_conditional(self, c, role):
        """Normalised conditional of train cell c's sender/receiver indicator."""
        v = self.view
        N = self.counts()
        if role == "sender":
            owner, Bsel = v.rows[c], self.B[:, self.r[c]][None, :]
            N[owner, self.s[c]] -= 1
        else:
            owner, Bsel = v.cols[c], self.B[self.s[c], :][None, :]
            N[owner, self.r[c]] -= 1
        logw = np.log(N[owner] + self.prods()[owner]) + loglik_table(v, np.array([c]), Bsel, self.family)[0]
        w = np.exp(logw - logw.max())
        return w / w.sum()

    def sweep(self):
        blocks = [self._update_indicators, self._update_eta, self._update_B]
        if self.cfg.random_scan:
            blocks = [blocks[i] for i in self.rng.permutation(3)]
        for block in blocks:
            block()
        if self.cfg.resample_hyper:
            resample_hyperparameters(self.eta_hyper, self.b_hyper,
                                     None if self._eta_fixed() else self.eta,
                                     self.B, self.family, self.rng)
        self.iteration += 1

    def _eta_fixed(self):
        return self.cfg.freeze_eta or self.F == 0

    def _update_indicators(self):
        v = self.view
        m = v.m
        u = self.rng.random(2 * m)
        probs = np.empty((2 * m if self.recorder is not None else 0, self.K))
        loge = v.loge if v.loge is not None else np.zeros(m)
        N = self.counts().astype(np.int64)
        _collapsed_scan(v.rows, v.cols, v.e, loge, self.s, self.r, N,
                        self.prods(), self.B, FAMILY_CODE[self.family], u, probs)
        if self.recorder is not None:
            self.recorder.append(("indicator", probs))

    def _update_eta(self):
        if self._eta_fixed():
            return
        N = self.counts()
        prods = self.prods()
        scale = self.cfg.eta_mh_scale
        h = self.eta_hyper
        for f in range(self.F):
            holders = self.phi[:, f] > 0
            if not holders.any():
                self.eta[f] = clamp_eta(self.rng.gamma(h.alpha_eta, 1.0 / h.beta_eta, size=self.K))
                continue
            Nh = N[holders]
            for k in range(self.K):
                old = self.eta[f, k]
                new = float(clamp_eta(old * math.exp(scale * self.rng.normal())))
                cur = prods[holders]
                prop = cur.copy()
                prop[:, k] *= new / old
                # log-walk: target * eta is the density in log eta
                log_acc = (h.alpha_eta * (math.log(new) - math.log(old)) - h.beta_eta * (new - old)
                           + dirmult_loglik(Nh, prop).sum() - dirmult_loglik(Nh, cur).sum())
                if math.log(self.rng.random()) < log_acc:
                    self.eta[f, k] = new
                    prods[holders] = prop

    def _update_B(self):
        v = self.view
        m, t = lm.block_stats(v.e, self.s, self.r, self.K, self.family)
        self.B = lm.sample_B_posterior(self.family, m, t, self.b_hyper, self.rng)

    def log_joint(self):
        lp = dirmult_loglik(self.counts(), self.prods()).sum()
        if not self._eta_fixed():
            lp += stats.gamma.logpdf(self.eta, self.eta_hyper.alpha_eta,
                                     scale=1.0 / self.eta_hyper.beta_eta).sum()
        v = self.view
        lp += lm.log_prior_B(self.B, self.family, self.b_hyper)
        lp += lm.loglik_edge(v.e, self.B[self.s, self.r], self.family).sum()
        return float(lp)

    def pi(self):
        """Posterior mean membership given the current indicators."""
        N = self.counts()
        prods = self.prods()
        return (N + prods) / (N.sum(axis=1) + prods.sum(axis=1))[:, None]

    def snapshot(self):
        pi = self.pi()
        return {"model": self.model, "K": self.K,
                "pi": np.hstack([pi, np.zeros((self.n, 1))]),
                "B": self.B.copy(), "eta": self.eta.copy(),
                "dominant": self.counts().argmax(axis=1)}

    def state_dict(self):
        return {"model": self.model, "iteration": self.iteration,
                "eta": self.eta, "B": self.B, "s": self.s, "r": self.r,
                "eta_hyper": vars(self.eta_hyper).copy(), "b_hyper": vars(self.b_hyper).copy(),
                "rng": rng_state(self.rng)}

    def load_state_dict(self, d):
        self.iteration = int(d["iteration"])
        self.B = np.array(d["B"], dtype=float)
        self.eta = np.array(d["eta"], dtype=float).reshape(self.F, self.B.shape[0])
        self.s = np.array(d["s"], dtype=np.int64)
        self.r = np.array(d["r"], dtype=np.int64)
        self.eta_hyper = type(self.eta_hyper)(**d["eta_hyper"])
        self.b_hyper = type(self.b_hyper)(**d["b_hyper"])
        self.rng = rng_from_state(d["rng"])

    def set_edges(self, edges):
        self.view.set_edges(edges)

    def load_truth(self, truth):
        v = self.view
        self.eta = np.array(truth["eta"], dtype=float)
        self.B = np.array(truth["B"], dtype=float)
        self.s = np.asarray(truth["s"])[v.rows, v.cols].astype(np.int64)
        self.r = np.asarray(truth["r"])[v.rows, v.cols].astype(np.int64)
