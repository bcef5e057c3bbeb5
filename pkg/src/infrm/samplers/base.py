"""
Pieces shared by every Gibbs engine: configuration, the training view of the
data, vectorised likelihood tables and hyperparameter moves.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln, log_expit

from infrm.linkmodels import BHyper
from infrm.netdata import TRAIN
from infrm.priors import EtaHyper

MODELS = ("infmm", "cinfmm", "inflf", "immm", "lfrm")


@dataclass
class ModelConfig:
    model: str = "infmm"
    family: str = "binary"          # binary | count | unit (data kind)
    K_max: int = 20                 # fixed K for cinfmm, truncation for inflf
    K_init: int = 5                 # initial communities for the infinite sampler
    truncate: bool = False          # run infmm/immm as a K_max-truncated stick
    alpha: float = 1.0              # iMMM concentration
    eta_init: float = 1.0
    freeze_eta: bool = False
    resample_hyper: bool = False
    random_scan: bool = False
    label_swaps: bool = True        # adjacent-label Metropolis moves (infmm/immm)
    b_mh_steps: int = 1
    b_mh_scale: float = 0.1
    eta_mh_scale: float = 0.5
    eta: EtaHyper = field(default_factory=EtaHyper)
    B: BHyper = field(default_factory=BHyper)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.family not in ("binary", "count", "unit"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.model in ("inflf", "lfrm") and self.family == "unit":
            raise ValueError("unit link data is not supported for latent-feature models")
        if self.K_max < 1 or self.K_init < 1:
            raise ValueError("K_max and K_init must be >= 1")
        if isinstance(self.eta, dict):
            self.eta = EtaHyper(**self.eta)
        if isinstance(self.B, dict):
            self.B = BHyper(**self.B)

    @property
    def uses_metadata(self):
        return self.model in ("infmm", "cinfmm", "inflf")

    def to_dict(self):
        return asdict(self)


@dataclass
class TraceRecord:
    iteration: int
    K: int
    log_joint: float
    auc: float = float("nan")
    loglik: float = float("nan")


class TrainView:
    """Everything a sampler may read from a NetworkData: Train cells only.

    Test and Unobserved cells never leave NetworkData; dense matrices have
    them zeroed through `np.where`, so their stored values cannot leak.
    """

    def __init__(self, net, family):
        self.n = net.n
        self.family = family
        self.W = net.mask == TRAIN
        self.rows, self.cols = np.nonzero(self.W)
        self.set_edges(net.edges)

    def set_edges(self, edges):
        self.E = np.where(self.W, edges, 0.0)
        self.e = self.E[self.rows, self.cols]
        self.loge = np.log(self.e) if self.family == "unit" else None

    @property
    def m(self):
        return self.rows.size


def loglik_table(view, idx, Bsel, family):
    """Log-likelihood of train cells `idx` under each column of Bsel (|idx| x K).

    No domain validation: callers guarantee valid B.
    """
    e = view.e[idx][:, None]
    if family == "binary":
        return np.where(e > 0, np.log(Bsel), np.log1p(-Bsel))
    if family == "count":
        return e * np.log(Bsel) - Bsel - gammaln(e + 1.0)
    if family == "unit":
        return np.log(Bsel) + (Bsel - 1.0) * view.loge[idx][:, None]
    return np.where(e > 0, log_expit(Bsel), log_expit(-Bsel))


def categorical_draw(logp, rng):
    """One draw per row of an unnormalised log-probability table."""
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    cum = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * cum[:, -1]
    k = (cum < u[:, None]).sum(axis=1)
    return np.minimum(k, p.shape[1] - 1), p / cum[:, -1:]


def _gamma_logpdf(x, shape, rate):
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def _mh_positive(value, logpost, rng, scale=0.3):
    """Random-walk MH on log(value) for a positive scalar."""
    prop = value * np.exp(scale * rng.normal())
    log_acc = logpost(prop) - logpost(value) + np.log(prop) - np.log(value)
    return prop if np.log(rng.random()) < log_acc else value


def resample_hyperparameters(eta_hyper, b_hyper, eta, B, family, rng):
    """Metropolis updates of the vague-Gamma hyperparameters (Gamma(1,1) hyperprior)."""
    def hyperprior(x):
        return -x

    if eta is not None and eta.size:
        eta_hyper.alpha_eta = _mh_positive(
            eta_hyper.alpha_eta,
            lambda a: hyperprior(a) + _gamma_logpdf(eta, a, eta_hyper.beta_eta).sum(), rng)
        # rate is conditionally conjugate: Gamma(1 + n*alpha, 1 + sum eta)
        eta_hyper.beta_eta = rng.gamma(1.0 + eta.size * eta_hyper.alpha_eta,
                                       1.0 / (1.0 + eta.sum()))
    if B is None or not B.size:
        return
    if family in ("count", "unit"):
        b_hyper.alpha_B = _mh_positive(
            b_hyper.alpha_B,
            lambda a: hyperprior(a) + _gamma_logpdf(B, a, b_hyper.beta_B).sum(), rng)
        b_hyper.beta_B = rng.gamma(1.0 + B.size * b_hyper.alpha_B, 1.0 / (1.0 + B.sum()))
    elif family == "binary":
        lB, l1B = np.log(B).sum(), np.log1p(-B).sum()

        def beta_lp(a, b):
            return B.size * (gammaln(a + b) - gammaln(a) - gammaln(b)) + (a - 1) * lB + (b - 1) * l1B

        b_hyper.a_B = _mh_positive(b_hyper.a_B, lambda a: hyperprior(a) + beta_lp(a, b_hyper.b_B), rng)
        b_hyper.b_B = _mh_positive(b_hyper.b_B, lambda b: hyperprior(b) + beta_lp(b_hyper.a_B, b), rng)


def rng_state(rng):
    return rng.bit_generator.state


def rng_from_state(state):
    bg = getattr(np.random, state["bit_generator"])()
    bg.state = state
    return np.random.Generator(bg)


def to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return {"__nd__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def from_jsonable(obj):
    if isinstance(obj, dict):
        if "__nd__" in obj:
            return np.array(obj["__nd__"], dtype=obj["dtype"])
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    return obj
