"""
Gibbs sampler for the informative latent-feature model, truncated at K_max
features.

    psi_ik ~ Beta(a_ik, 1),  pi_ik = prod_{l<=k} psi_il,  z_ik ~ Bernoulli(pi_ik)
    binary: e_ij ~ Bernoulli(sigmoid(z_i B z_j^T)),  B_kl ~ N(0, sigma_B^2)
    count:  e_ij ~ Poisson(z_i B z_j^T),             B_kl ~ Gamma(alpha_B, beta_B)

Features flip one at a time (O(K n) each with cached B z^T), sticks are
slice sampled column by column, eta has a Gamma full conditional (the
Beta(a, 1) density is a psi^(a-1), conjugate in eta), B moves by random-walk
Metropolis (binary) or by Gamma draws after splitting each count over the
active feature pairs (count).
"""
import numpy as np
from scipy import stats
from scipy.special import expit, gammaln

from infrm import linkmodels as lm
from infrm.priors import (eta_products, log1mexp, sample_eta_sweep,
                          sample_log_psi_inflf_column)
from infrm.samplers.base import TrainView, resample_hyperparameters, rng_from_state, rng_state
from infrm.samplers.infmm import lm_copy


class InfLFSampler:
    model = "inflf"

    def __init__(self, net, phi, cfg, rng, recorder=None, init=True):
        self.cfg = cfg
        self.family = "sigmoid" if cfg.family == "binary" else cfg.family
        if self.family not in ("sigmoid", "count"):
            raise ValueError("latent-feature models support binary and count data only")
        self.view = TrainView(net, self.family)
        self.n = net.n
        if cfg.model == "lfrm" or phi is None:
            phi = np.zeros((self.n, 0), dtype=np.int8)
        self.phi = np.asarray(phi, dtype=np.int8)
        self.F = self.phi.shape[1]
        self.eta_hyper = lm_copy(cfg.eta)
        self.b_hyper = lm_copy(cfg.B)
        self.rng = rng
        self.recorder = recorder
        self.iteration = 0
        if init:
            K = cfg.K_max
            self.eta = np.full((self.F, K), float(cfg.eta_init))
            # psi ~ Beta(a, 1) is U^(1/a); kept as log psi
            self.log_psi = np.log(1.0 - rng.random((self.n, K))) / self.prods()
            log_pi = np.cumsum(self.log_psi, axis=1)
            self.z = (np.log(1.0 - rng.random((self.n, K))) < log_pi).astype(np.int64)
            if self.family == "count":
                # keep every rate positive so observed counts have support
                self.z[:, 0] = 1
            self.B = lm.sample_B_prior(self.family, (K, K), self.b_hyper, rng)

    @property
    def K(self):
        return self.cfg.K_max

    @property
    def K_active(self):
        return int((self.z.sum(axis=0) > 0).sum())

    @property
    def psi(self):
        return np.exp(self.log_psi)

    def prods(self):
        return eta_products(self.phi, self.eta)

    def rates(self):
        return self.z @ self.B @ self.z.T

    def _ll(self, X, E):
        if self.family == "sigmoid":
            return E * X - np.logaddexp(0.0, X)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(E > 0, E * np.log(X), 0.0) - X - gammaln(E + 1.0)

    # -- sweep ----------------------------------------------------------------

    def sweep(self):
        blocks = [self._update_features, self._update_sticks, self._update_B]
        if self.cfg.random_scan:
            blocks = [blocks[i] for i in self.rng.permutation(3)]
        for block in blocks:
            block()
        if self.cfg.resample_hyper:
            resample_hyperparameters(self.eta_hyper, self.b_hyper,
                                     None if self._eta_fixed() else self.eta,
                                     self.B if self.family == "count" else None,
                                     self.family, self.rng)
        self.iteration += 1

    def _eta_fixed(self):
        return self.cfg.freeze_eta or self.F == 0

    def feature_logodds(self, i, k, BzT=None, zB=None):
        """log Pr(z_ik = 1 | rest) - log Pr(z_ik = 0 | rest)."""
        v, z = self.view, self.z
        if BzT is None:
            BzT, zB = self.B @ z.T, z @ self.B
        log_pi = self.log_psi[i, :k + 1].sum()
        zi = np.vstack([z[i], z[i]]).astype(float)
        zi[0, k], zi[1, k] = 0.0, 1.0
        row = zi @ BzT                      # 2 x n, cells (i, j)
        col = (zB @ zi.T).T                 # 2 x n, cells (j, i)
        L = (self._ll(row, v.E[i][None, :]) * v.W[i][None, :]).sum(axis=1)
        L += (self._ll(col, v.E[:, i][None, :]) * v.W[:, i][None, :]).sum(axis=1)
        L = np.nan_to_num(L, nan=-np.inf)
        prior = log_pi - log1mexp(log_pi)
        if np.isneginf(L).all():
            return prior
        with np.errstate(invalid="ignore"):
            return L[1] - L[0] + prior

    def _update_features(self):
        z, B = self.z, self.B
        BzT = B @ z.T
        zB = z @ B
        u = self.rng.random((self.n, self.K))
        for i in range(self.n):
            for k in range(self.K):
                lo = self.feature_logodds(i, k, BzT, zB)
                z[i, k] = int(u[i, k] < expit(lo))
            BzT[:, i] = B @ z[i]
            zB[i] = z[i] @ B

    def _update_sticks(self):
        prods = self.prods()
        for k in range(self.K):
            self.log_psi[:, k] = sample_log_psi_inflf_column(self.log_psi, self.z, prods, k,
                                                             self.rng)
        if self._eta_fixed():
            return
        sample_eta_sweep(self.phi, self.log_psi, self.eta, self.eta_hyper, self.rng,
                         recorder=self.recorder)

    def _update_B(self):
        if self.family == "sigmoid":
            self._mh_B()
        else:
            self._augmented_B()

    def _mh_B(self):
        v, z, rng = self.view, self.z.astype(float), self.rng
        X = z @ self.B @ z.T
        sigma = self.b_hyper.sigma_B
        for _ in range(self.cfg.b_mh_steps):
            for k in range(self.K):
                for l in range(self.K):
                    pairs = np.outer(z[:, k], z[:, l]) * v.W
                    if not pairs.any():
                        self.B[k, l] = rng.normal(0.0, sigma)
                        continue
                    old = self.B[k, l]
                    delta = self.cfg.b_mh_scale * rng.normal()
                    new = old + delta
                    sel = pairs > 0
                    x, e = X[sel], v.E[sel]
                    dll = (e * delta - np.logaddexp(0.0, x + delta) + np.logaddexp(0.0, x)).sum()
                    dlp = (old * old - new * new) / (2.0 * sigma * sigma)
                    if np.log(rng.random()) < dll + dlp:
                        self.B[k, l] = new
                        X[sel] += delta

    def _augmented_B(self):
        v, z, K = self.view, self.z.astype(float), self.K
        pos = v.e > 0
        rows, cols, e = v.rows[pos], v.cols[pos], v.e[pos].astype(np.int64)
        X = np.zeros(K * K)
        if rows.size:
            w = (z[rows][:, :, None] * z[cols][:, None, :] * self.B[None]).reshape(rows.size, K * K)
            w /= w.sum(axis=1, keepdims=True)
            X = self.rng.multinomial(e, w).sum(axis=0)
        exposure = z.T @ v.W.astype(float) @ z
        self.B = self.rng.gamma(self.b_hyper.alpha_B + X.reshape(K, K),
                                1.0 / (self.b_hyper.beta_B + exposure))

    # -- summaries ------------------------------------------------------------

    def log_joint(self):
        prods = self.prods()
        lp = (np.log(prods) + (prods - 1.0) * self.log_psi).sum()
        log_pi = np.cumsum(self.log_psi, axis=1)
        lp += np.where(self.z > 0, log_pi, log1mexp(log_pi)).sum()
        if not self._eta_fixed():
            lp += stats.gamma.logpdf(self.eta, self.eta_hyper.alpha_eta,
                                     scale=1.0 / self.eta_hyper.beta_eta).sum()
        lp += lm.log_prior_B(self.B, self.family, self.b_hyper)
        v = self.view
        X = self.rates()
        with np.errstate(invalid="ignore"):
            lp += np.where(v.W, self._ll(X, v.E), 0.0).sum()
        return float(lp)

    def snapshot(self):
        return {"model": self.model, "K": self.K_active, "z": self.z.copy(),
                "B": self.B.copy(), "eta": self.eta.copy()}

    def state_dict(self):
        return {"model": self.model, "iteration": self.iteration,
                "log_psi": self.log_psi, "eta": self.eta, "B": self.B, "z": self.z,
                "eta_hyper": vars(self.eta_hyper).copy(), "b_hyper": vars(self.b_hyper).copy(),
                "rng": rng_state(self.rng)}

    def load_state_dict(self, d):
        self.iteration = int(d["iteration"])
        self.log_psi = np.array(d["log_psi"], dtype=float)
        self.B = np.array(d["B"], dtype=float)
        self.eta = np.array(d["eta"], dtype=float).reshape(self.F, self.B.shape[0])
        self.z = np.array(d["z"], dtype=np.int64)
        self.eta_hyper = type(self.eta_hyper)(**d["eta_hyper"])
        self.b_hyper = type(self.b_hyper)(**d["b_hyper"])
        self.rng = rng_from_state(d["rng"])

    def set_edges(self, edges):
        self.view.set_edges(edges)

    def load_truth(self, truth):
        self.eta = np.array(truth["eta"], dtype=float)
        self.log_psi = np.array(truth["log_psi"], dtype=float)
        self.B = np.array(truth["B"], dtype=float)
        self.z = np.array(truth["z"], dtype=np.int64)
