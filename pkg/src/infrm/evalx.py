"""
Posterior predictive scoring, link-prediction metrics and the
cross-validation driver.

A retained snapshot of a mixed-membership model stores pi with one extra
column for the residual (undiscovered) mass; any community pair touching
that column is scored with the marginal predictive, i.e. B integrated
against its prior.
"""
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp
from scipy.stats import rankdata

from infrm import linkmodels as lm
from infrm.netdata import TEST, TRAIN, make_cv_folds

UNIT_THRESHOLD = 0.5


@dataclass
class PredictionMatrix:
    scores: np.ndarray      # predictive probability of a positive edge
    mean: np.ndarray        # predictive mean edge value


def _extended(B, family, hyper, fn):
    """fn(B) padded with the prior expectation for the residual slot."""
    K = B.shape[0]
    out = np.empty((K + 1, K + 1))
    out[:K, :K] = fn(B)
    out[K, :] = out[:, K] = lm.prior_expectation(fn, family, hyper)
    return out


def _positive_fn(family):
    if family == "unit":
        return lambda b: lm.positive_prob(b, "unit", UNIT_THRESHOLD)
    return lambda b: lm.positive_prob(b, family)


def _sample_matrices(snap, cfg):
    """Per-sample n x n (positive probability, mean) matrices."""
    if "z" in snap:
        z = snap["z"].astype(float)
        X = z @ snap["B"] @ z.T
        if cfg.family == "binary":
            p = expit(X)
            return p, p
        return -np.expm1(-X), X
    pi, B, fam, hyper = snap["pi"], snap["B"], cfg.family, cfg.B
    P = _extended(B, fam, hyper, _positive_fn(fam))
    M = _extended(B, fam, hyper, lambda b: lm.mean_edge(b, fam))
    return pi @ P @ pi.T, pi @ M @ pi.T


def predictive_scores(samples, net, cfg):
    """Average predictive edge probabilities and means over retained samples."""
    if not samples:
        raise ValueError("no retained samples")
    P = np.zeros((net.n, net.n))
    M = np.zeros((net.n, net.n))
    for snap in samples:
        p, m = _sample_matrices(snap, cfg)
        P += p
        M += m
    return PredictionMatrix(P / len(samples), M / len(samples))


def _cell_loglik(snap, cfg, rows, cols, e):
    """log p(e_c | sample) for the given cells."""
    fam = cfg.family
    if "z" in snap:
        z = snap["z"].astype(float)
        X = (z[rows] @ snap["B"] * z[cols]).sum(axis=1)
        if fam == "binary":
            return lm.loglik_edge(e, X, "sigmoid")
        return lm.loglik_edge(e, X, "count")
    pi, B = snap["pi"], snap["B"]
    K = B.shape[0]
    # per cell and community pair: K x K known blocks plus the residual border
    ll = np.empty((rows.size, K + 1, K + 1))
    ll[:, :K, :K] = lm.loglik_edge(e[:, None, None], B[None], fam)
    marg = lm.log_marginal(e, fam, cfg.B)
    ll[:, K, :] = marg[:, None]
    ll[:, :, K] = marg[:, None]
    with np.errstate(divide="ignore"):
        w = np.log(pi[rows])[:, :, None] + np.log(pi[cols])[:, None, :]
    return logsumexp((w + ll).reshape(rows.size, -1), axis=1)


def test_loglik(samples, net, cfg, state=TEST, binarize=False):
    """Sum over cells in `state` of log(mean over samples of p(e | sample)).

    With `binarize`, each cell is scored on the event e > 0 (threshold 0.5
    for unit data) using the predictive probability instead of the density.
    """
    rows, cols = net.cells(state)
    if rows.size == 0:
        raise ValueError("no cells in the requested mask state")
    if not samples:
        raise ValueError("no retained samples")
    e = net.edges[rows, cols]
    per = np.empty((len(samples), rows.size))
    for t, snap in enumerate(samples):
        if binarize:
            p, _ = _sample_matrices(snap, cfg)
            p = np.clip(p[rows, cols], 1e-300, 1.0 - 1e-16)
            y = e > (UNIT_THRESHOLD if cfg.family == "unit" else 0)
            per[t] = np.where(y, np.log(p), np.log1p(-p))
        else:
            per[t] = _cell_loglik(snap, cfg, rows, cols, e)
    return float((logsumexp(per, axis=0) - np.log(len(samples))).sum())


def binarized_truth(net, family=None):
    family = net.kind if family is None else family
    return (net.edges > (UNIT_THRESHOLD if family == "unit" else 0)).astype(float)


def zero_one_error(scores, truth, mask, state):
    sel = np.asarray(mask) == state
    if not sel.any():
        raise ValueError("no cells in the requested mask state")
    pred = np.asarray(scores)[sel] > 0.5
    return float(np.mean(pred != (np.asarray(truth)[sel] > 0)))


def auc(scores, truth, mask, state):
    """Mann-Whitney AUC over cells in `state`; ties count one half."""
    sel = np.asarray(mask) == state
    s = np.asarray(scores, dtype=float)[sel]
    y = np.asarray(truth)[sel] > 0
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative cells")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(samples, net, cfg, binarize_loglik=False):
    """The four reported metrics for one chain on one holdout."""
    pred = predictive_scores(samples, net, cfg)
    truth = binarized_truth(net, cfg.family)
    out = {"train_error": zero_one_error(pred.scores, truth, net.mask, TRAIN),
           "test_error": float("nan"), "test_loglik": float("nan"), "auc": float("nan")}
    if (net.mask == TEST).any():
        out["test_error"] = zero_one_error(pred.scores, truth, net.mask, TEST)
        out["test_loglik"] = test_loglik(samples, net, cfg, binarize=binarize_loglik)
        try:
            out["auc"] = auc(pred.scores, truth, net.mask, TEST)
        except ValueError:
            pass
    return out


def coclustering_matrix(labelings):
    """Posterior similarity: fraction of labelings placing i and j together."""
    L = np.asarray(labelings)
    return np.mean([lab[:, None] == lab[None, :] for lab in L], axis=0)


def least_squares_clustering(labelings):
    """The retained labeling closest (squared loss) to the posterior similarity.

    Label-switching invariant; with mixed membership each entity is labelled
    by its dominant community.
    """
    L = np.asarray(labelings)
    if L.ndim != 2 or L.shape[0] == 0:
        raise ValueError("need at least one labeling")
    psm = coclustering_matrix(L)
    loss = [float((((lab[:, None] == lab[None, :]) - psm) ** 2).sum()) for lab in L]
    return L[int(np.argmin(loss))]


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

METRICS = ("train_error", "test_error", "test_loglik", "auc")


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)    # dicts: fold, chain, metrics...

    def aggregate(self):
        out = {}
        for m in METRICS:
            vals = np.array([r[m] for r in self.rows], dtype=float)
            vals = vals[np.isfinite(vals)]
            out[m] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0) \
                if vals.size else (float("nan"), float("nan"))
        return out

    def to_json(self):
        agg = self.aggregate()
        return json.dumps({"rows": self.rows,
                           "aggregate": {m: {"mean": v[0], "std": v[1]} for m, v in agg.items()}},
                          indent=2, sort_keys=True)

    def to_csv(self):
        lines = ["fold,chain," + ",".join(METRICS)]
        for r in self.rows:
            lines.append(f"{r['fold']},{r['chain']}," + ",".join(repr(float(r[m])) for m in METRICS))
        agg = self.aggregate()
        lines.append("mean,std," + ",".join(format_pm(*agg[m]) for m in METRICS))
        return "\n".join(lines) + "\n"

    def table_row(self, model):
        """One row in the column order Training error | Testing error | Testing log likelihood | AUC."""
        agg = self.aggregate()
        return model + "," + ",".join(format_pm(*agg[m]) for m in METRICS)


def format_pm(mean, std):
    return f"{mean:.4f} ∓ {std:.4f}"


def _cv_job(args):
    from infrm.samplers.chain import chain_seed, run_chain
    cfg, fold_net, phi, run, fold, chain, binarize = args
    seed = chain_seed(run.seed, fold * 1000 + chain)
    res = run_chain(cfg, fold_net, phi, run, seed=seed)
    row = {"fold": fold, "chain": chain}
    row.update(evaluate(res.samples, fold_net, cfg, binarize_loglik=binarize))
    return row


def crossvalidate(cfg, net, phi, run, n_folds=10, folds=None, jobs=1, binarize_loglik=False):
    """Hold out each fold in turn, run run.chains chains, collect metrics."""
    plan = make_cv_folds(net, run.seed, n_folds)
    which = range(n_folds) if folds is None else folds
    jobs_args = [(cfg, plan.apply(net, f), phi, run, f, c, binarize_loglik)
                 for f in which for c in range(run.chains)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_cv_job, jobs_args))
    else:
        rows = [_cv_job(a) for a in jobs_args]
    return MetricsReport(rows), plan
