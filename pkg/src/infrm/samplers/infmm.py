"""
Uncollapsed Gibbs sampler for the informative mixed-membership model.

Per edge (i, j) there is a sender indicator s_ij owned by entity i and a
receiver indicator r_ij owned by entity j. Given the sticks, all sender
indicators are conditionally independent (likewise receivers), so each
role is updated as one vectorised block.

Infinite mode keeps K active communities plus the residual stick mass; an
indicator may open community K+1 with probability proportional to
residual * marginal predictive, after which the new sticks, importance
indicators and compatibilities are drawn lazily. Truncated mode fixes K and
sets the last stick to one (blocked Gibbs for the truncated prior).
"""
import numpy as np
from scipy import stats
from scipy.special import betaln

from infrm import linkmodels as lm
from infrm.priors import (clamp_eta, eta_products, log_beta_draw, pi_from_log_sticks_infmm,
                          psi_posterior_infmm, sample_eta_sweep)
from infrm.samplers.base import (TrainView, categorical_draw, loglik_table,
                                 resample_hyperparameters, rng_from_state, rng_state)
from infrm.samplers.kernels import FAMILY_CODE, adjacent_swaps, block_draw, indicator_counts


class InfMMSampler:
    model = "infmm"

    def __init__(self, net, phi, cfg, rng, recorder=None, init=True):
        self.cfg = cfg
        self.family = cfg.family
        self.view = TrainView(net, self.family)
        self.n = net.n
        if cfg.model == "immm" or phi is None:
            phi = np.zeros((self.n, 0), dtype=np.int8)
        self.phi = np.asarray(phi, dtype=np.int8)
        self.F = self.phi.shape[1]
        self.concentration = cfg.alpha if cfg.model == "immm" else None
        self.truncated = cfg.truncate
        self.eta_hyper = lm_copy(cfg.eta)
        self.b_hyper = lm_copy(cfg.B)
        self.rng = rng
        self.recorder = recorder
        self.iteration = 0
        if init:
            self._initialize()

    # -- state ----------------------------------------------------------------

    @property
    def K(self):
        return self.B.shape[0]

    def _initialize(self):
        K = self.cfg.K_max if self.truncated else self.cfg.K_init
        self.eta = np.full((self.F, K), float(self.cfg.eta_init))
        m = self.view.m
        self.s = self.rng.integers(K, size=m)
        self.r = self.rng.integers(K, size=m)
        self.log_psi = np.zeros((self.n, K))
        self.log1m_psi = np.zeros((self.n, K))
        self.B = lm.sample_B_prior(self.family, (K, K), self.b_hyper, self.rng)
        if not self.truncated:
            self._prune()
        self._update_sticks()
        self._update_B()

    def prods(self):
        """n x K stick concentrations a_ik."""
        if self.concentration is not None:
            return np.full((self.n, self.K), float(self.concentration))
        return eta_products(self.phi, self.eta)

    @property
    def psi(self):
        return np.exp(self.log_psi)

    def pi(self):
        """(pi, residual); sticks are stored as log psi and log(1 - psi)."""
        l1m = self.log1m_psi
        if self.truncated:
            l1m = l1m.copy()
            l1m[:, -1] = -np.inf
        return pi_from_log_sticks_infmm(self.log_psi, l1m)

    def counts(self):
        """N_ik: indicators owned by entity i (as sender or receiver) equal to k."""
        v = self.view
        return indicator_counts(v.rows, v.cols, self.s, self.r, self.n, self.K)

    # -- sweep ----------------------------------------------------------------

    def sweep(self):
        blocks = [self._update_indicators, self._update_sticks, self._update_B]
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
        return self.concentration is not None or self.cfg.freeze_eta or self.F == 0

    def _update_indicators(self):
        self._scan("sender")
        self._scan("receiver")
        if not self.truncated:
            self._prune()

    def indicator_logits(self, idx, role, pi=None, residual=None):
        """Unnormalised log conditional over K existing (+1 new) communities."""
        v = self.view
        if pi is None:
            pi, residual = self.pi()
        if role == "sender":
            owner, Bsel = v.rows[idx], self.B[:, self.r[idx]].T
        else:
            owner, Bsel = v.cols[idx], self.B[self.s[idx], :]
        with np.errstate(divide="ignore"):
            logp = np.log(pi[owner]) + loglik_table(v, idx, Bsel, self.family)
            if not self.truncated:
                new = np.log(residual[owner]) + lm.log_marginal(v.e[idx], self.family, self.b_hyper)
                logp = np.concatenate([logp, new[:, None]], axis=1)
        return logp

    def _scan(self, role):
        m = self.view.m
        if m == 0:
            return
        v = self.view
        labels = self.s if role == "sender" else self.r
        pi, residual = self.pi()
        with np.errstate(divide="ignore"):
            logpi = np.log(pi)
            if self.truncated:
                lognew = np.empty(0)
            else:
                owners = v.rows if role == "sender" else v.cols
                lognew = (np.log(residual)[owners]
                          + lm.log_marginal(v.e, self.family, self.b_hyper))
        if role == "sender":
            owner, partner = v.rows, self.r
        else:
            owner, partner = v.cols, self.s
        loge = v.loge if v.loge is not None else v.e
        u = self.rng.random(m)
        choice = np.empty(m, dtype=np.int64)
        width = self.K + (0 if self.truncated else 1)
        probs = np.empty((m if self.recorder is not None else 0, width))
        block_draw(owner, partner, v.e, loge, logpi, lognew, self.B,
                   FAMILY_CODE[self.family], role == "sender", u, choice, probs)
        if self.recorder is not None:
            self.recorder.append(("indicator", role, probs))
        if self.truncated:
            labels[:] = choice
            return
        K0 = self.K
        opened = np.nonzero(choice == K0)[0]
        labels[:] = np.where(choice == K0, 0, choice)
        if opened.size == 0:
            return
        # the first opener sees the right conditional; later openers redraw
        # once the new community exists
        self._open_community(opened[0], role)
        for c in opened[1:]:
            logp = self.indicator_logits(np.array([c]), role)
            k, _ = categorical_draw(logp, self.rng)
            if k[0] == self.K:
                self._open_community(c, role)
            else:
                labels[c] = k[0]

    def _open_community(self, c, role):
        """Instantiate community K+1 for cell c, drawing its parameters lazily."""
        rng, K = self.rng, self.K
        if self.concentration is None:
            if self.cfg.freeze_eta:
                col = np.full((self.F, 1), float(self.cfg.eta_init))
            else:
                col = clamp_eta(rng.gamma(self.eta_hyper.alpha_eta,
                                          1.0 / self.eta_hyper.beta_eta, size=(self.F, 1)))
            self.eta = np.hstack([self.eta, col])
            a = eta_products(self.phi, col)[:, 0]
        else:
            self.eta = np.hstack([self.eta, np.zeros((self.F, 1))])
            a = np.full(self.n, float(self.concentration))
        lp, l1m = log_beta_draw(1.0, a, rng)
        self.log_psi = np.hstack([self.log_psi, lp[:, None]])
        self.log1m_psi = np.hstack([self.log1m_psi, l1m[:, None]])
        B = np.empty((K + 1, K + 1))
        B[:K, :K] = self.B
        B[K, :] = lm.sample_B_prior(self.family, K + 1, self.b_hyper, rng)
        B[:K, K] = lm.sample_B_prior(self.family, K, self.b_hyper, rng)
        # the pair that opened the community is drawn given its one edge
        e = self.view.e[c:c + 1]
        t = np.log(e) if self.family == "unit" else e
        val = lm.sample_B_posterior(self.family, np.ones(1), t, self.b_hyper, rng)[0]
        if role == "sender":
            B[K, self.r[c]] = val
            self.s[c] = K
        else:
            B[self.s[c], K] = val
            self.r[c] = K
        self.B = B

    def _prune(self):
        K = self.K
        used = np.bincount(self.s, minlength=K) + np.bincount(self.r, minlength=K)
        keep = np.nonzero(used > 0)[0]
        if keep.size == K:
            return
        relabel = np.full(K, -1)
        relabel[keep] = np.arange(keep.size)
        self.s = relabel[self.s]
        self.r = relabel[self.r]
        self.log_psi = self.log_psi[:, keep]
        self.log1m_psi = self.log1m_psi[:, keep]
        self.eta = self.eta[:, keep]
        self.B = self.B[np.ix_(keep, keep)]

    def _label_swaps(self, N, prods):
        """Metropolis swaps of adjacent community labels, psi integrated out.

        Stick-breaking makes the prior order-dependent, and Gibbs moves alone
        reorder communities slowly. With psi marginalised each entity
        contributes prod_k B(N_ik + 1, T_ik + a_ik) / B(1, a_ik), where T_ik
        counts its indicators beyond k; a swap of k and k+1 changes only
        those two factors. psi is redrawn from its full conditional right
        after, so the composition leaves the joint posterior invariant.
        """
        K = self.K
        last = K - 2 if self.truncated else K - 1
        if last < 1:
            return N, prods
        N = N.astype(float)
        prods = prods.copy()
        accepted = np.zeros(last, dtype=np.int64)
        adjacent_swaps(N, prods, np.log(self.rng.random(last)), accepted)
        for k in np.nonzero(accepted)[0]:
            self._swap(k, k + 1)
        return N, prods

    def _swap(self, k, l):
        perm = np.arange(self.K)
        perm[[k, l]] = perm[[l, k]]
        self.s = perm[self.s]
        self.r = perm[self.r]
        self.eta = self.eta[:, perm]
        self.log_psi = self.log_psi[:, perm]
        self.log1m_psi = self.log1m_psi[:, perm]
        self.B = self.B[np.ix_(perm, perm)]

    def _update_sticks(self):
        N = self.counts()
        prods = self.prods()
        if self.cfg.label_swaps:
            N, prods = self._label_swaps(N, prods)
        a, b = psi_posterior_infmm(N, prods)
        K = self.K
        free = K - 1 if self.truncated else K
        if self.recorder is not None:
            self.recorder.append(("psi", N.copy(), a[:, :free].copy(), b[:, :free].copy()))
        lp, l1m = log_beta_draw(a[:, :free], b[:, :free], self.rng)
        self.log_psi = np.zeros((self.n, K))
        self.log1m_psi = np.zeros((self.n, K))
        self.log_psi[:, :free] = lp
        self.log1m_psi[:, :free] = l1m
        if self._eta_fixed():
            return
        sample_eta_sweep(self.phi, self.log1m_psi, self.eta, self.eta_hyper, self.rng,
                         columns=np.arange(free), recorder=self.recorder)
        if self.truncated:
            # the last stick is fixed at one, so its indicators see only the prior
            self.eta[:, -1] = clamp_eta(self.rng.gamma(self.eta_hyper.alpha_eta,
                                                       1.0 / self.eta_hyper.beta_eta, size=self.F))

    def _update_B(self):
        v = self.view
        m, t = lm.block_stats(v.e, self.s, self.r, self.K, self.family)
        self.B = lm.sample_B_posterior(self.family, m, t, self.b_hyper, self.rng)

    # -- summaries ------------------------------------------------------------

    def log_joint(self):
        K = self.K
        free = K - 1 if self.truncated else K
        prods = self.prods()
        lp = ((prods[:, :free] - 1.0) * self.log1m_psi[:, :free]
              - betaln(1.0, prods[:, :free])).sum()
        if not self._eta_fixed():
            lp += stats.gamma.logpdf(self.eta, self.eta_hyper.alpha_eta,
                                     scale=1.0 / self.eta_hyper.beta_eta).sum()
        pi, _ = self.pi()
        v = self.view
        with np.errstate(divide="ignore"):
            logpi = np.log(pi)
        lp += logpi[v.rows, self.s].sum() + logpi[v.cols, self.r].sum()
        lp += lm.log_prior_B(self.B, self.family, self.b_hyper)
        lp += lm.loglik_edge(v.e, self.B[self.s, self.r], self.family).sum()
        return float(lp)

    def snapshot(self):
        pi, residual = self.pi()
        return {"model": self.model, "K": self.K,
                "pi": np.hstack([pi, residual[:, None]]),
                "B": self.B.copy(), "eta": self.eta.copy(),
                "dominant": self.counts().argmax(axis=1)}

    def state_dict(self):
        return {"model": self.model, "iteration": self.iteration,
                "log_psi": self.log_psi, "log1m_psi": self.log1m_psi,
                "eta": self.eta, "B": self.B, "s": self.s, "r": self.r,
                "eta_hyper": vars(self.eta_hyper).copy(), "b_hyper": vars(self.b_hyper).copy(),
                "rng": rng_state(self.rng)}

    def load_state_dict(self, d):
        self.iteration = int(d["iteration"])
        self.log_psi = np.array(d["log_psi"], dtype=float).reshape(self.n, -1)
        self.log1m_psi = np.array(d["log1m_psi"], dtype=float).reshape(self.n, -1)
        self.B = np.array(d["B"], dtype=float)
        self.eta = np.array(d["eta"], dtype=float).reshape(self.F, self.B.shape[0])
        self.s = np.array(d["s"], dtype=np.int64)
        self.r = np.array(d["r"], dtype=np.int64)
        self.eta_hyper = type(self.eta_hyper)(**d["eta_hyper"])
        self.b_hyper = type(self.b_hyper)(**d["b_hyper"])
        self.rng = rng_from_state(d["rng"])

    # -- Geweke hooks -----------------------------------------------------------

    def set_edges(self, edges):
        self.view.set_edges(edges)

    def load_truth(self, truth):
        """Set the latent state from a forward simulation (full observation)."""
        v = self.view
        self.eta = np.array(truth["eta"], dtype=float)
        self.log_psi = np.array(truth["log_psi"], dtype=float)
        self.log1m_psi = np.array(truth["log1m_psi"], dtype=float)
        self.B = np.array(truth["B"], dtype=float)
        self.s = np.asarray(truth["s"])[v.rows, v.cols].astype(np.int64)
        self.r = np.asarray(truth["r"])[v.rows, v.cols].astype(np.int64)


def lm_copy(h):
    return type(h)(**vars(h))
