import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infrm import evalx
from infrm.genmodel import plant_communities
from infrm.netdata import TEST, TRAIN, NetworkData
from infrm.samplers.base import ModelConfig
from infrm.samplers.chain import RunConfig


def _net(n=3, e=None, kind="binary"):
    e = np.zeros((n, n)) if e is None else e
    return NetworkData(e, kind, np.zeros((n, n)))


def _mm_snap(pi, B):
    pi = np.asarray(pi, float)
    return {"pi": np.hstack([pi, np.zeros((pi.shape[0], 1))]), "B": np.asarray(B, float)}


def brute_auc(pos, neg):
    return np.mean([1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg)])


def test_scores_degenerate_mixture():
    cfg = ModelConfig()
    pred = evalx.predictive_scores([_mm_snap(np.ones((3, 1)), [[0.3]])], _net(), cfg)
    assert np.allclose(pred.scores, 0.3)


def test_scores_average_samples():
    cfg = ModelConfig()
    a = _mm_snap(np.ones((3, 1)), [[0.2]])
    b = _mm_snap(np.ones((3, 1)), [[0.4]])
    assert np.allclose(evalx.predictive_scores([a, b], _net(), cfg).scores, 0.3)
    with pytest.raises(ValueError):
        evalx.predictive_scores([], _net(), cfg)


def test_scores_empty_features():
    cfg = ModelConfig(model="inflf")
    snap = {"z": np.zeros((3, 2), dtype=int), "B": np.array([[3.0, -1.0], [0.5, 2.0]])}
    assert np.allclose(evalx.predictive_scores([snap], _net(), cfg).scores, 0.5)


def test_residual_column_uses_prior_expectation():
    cfg = ModelConfig()
    snap = {"pi": np.array([[0.0, 1.0]] * 3), "B": np.array([[0.9]])}
    assert np.allclose(evalx.predictive_scores([snap], _net(), cfg).scores, 0.5)


def test_count_scores():
    cfg = ModelConfig(family="count")
    snap = _mm_snap(np.ones((3, 1)), [[2.0]])
    pred = evalx.predictive_scores([snap], _net(kind="count"), cfg)
    assert np.allclose(pred.mean, 2.0)
    assert np.allclose(pred.scores, 1 - np.exp(-2.0))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_binary_scores_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 5))
    pi = rng.dirichlet(np.ones(K + 1), size=4)
    snap = {"pi": pi, "B": rng.uniform(1e-6, 1 - 1e-6, (K, K))}
    s = evalx.predictive_scores([snap], _net(4), ModelConfig()).scores
    assert np.all((s >= 0) & (s <= 1))


def test_zero_one_error_examples():
    truth = np.array([[1, 0], [0, 1]], float)
    mask = np.full((2, 2), TEST)
    assert evalx.zero_one_error(truth, truth, mask, TEST) == 0.0
    assert evalx.zero_one_error(1 - truth, truth, mask, TEST) == 1.0
    wrong = truth.copy()
    wrong[0, 1] = 0.9
    assert evalx.zero_one_error(wrong, truth, mask, TEST) == 0.25
    with pytest.raises(ValueError):
        evalx.zero_one_error(truth, truth, mask, TRAIN)


def _one_cell_net(e=1.0):
    mask = np.zeros((2, 2))
    mask[0, 1] = TEST
    return NetworkData(np.array([[0, e], [0, 0]], float), "binary", mask)


def test_test_loglik_examples():
    cfg = ModelConfig()
    net = _one_cell_net()
    s05 = _mm_snap(np.ones((2, 1)), [[0.5]])
    assert evalx.test_loglik([s05], net, cfg) == pytest.approx(np.log(0.5))
    s2, s6 = _mm_snap(np.ones((2, 1)), [[0.2]]), _mm_snap(np.ones((2, 1)), [[0.6]])
    assert evalx.test_loglik([s2, s6], net, cfg) == pytest.approx(np.log(0.4))
    assert evalx.test_loglik([s2, s6, s2, s6], net, cfg) == pytest.approx(np.log(0.4))
    with pytest.raises(ValueError):
        evalx.test_loglik([s05], _net(2), cfg)


def test_loglik_matches_direct_mixture():
    # sum over community pairs, residual pairs scored by the marginal
    cfg = ModelConfig(family="count")
    mask = np.zeros((2, 2))
    mask[0, 1] = TEST
    net = NetworkData(np.array([[0, 2.0], [0, 0]]), "count", mask)
    pi = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3]])
    B = np.array([[1.0, 3.0], [0.5, 2.0]])
    from scipy import stats
    from infrm.linkmodels import marginal_count
    P = np.empty((3, 3))
    P[:2, :2] = stats.poisson.pmf(2, B)
    P[2, :] = P[:, 2] = marginal_count(2)
    expect = np.log(pi[0] @ P @ pi[1])
    assert evalx.test_loglik([{"pi": pi, "B": B}], net, cfg) == pytest.approx(expect, rel=1e-12)


def test_binarized_loglik():
    cfg = ModelConfig(family="count")
    mask = np.zeros((2, 2))
    mask[0, 1] = TEST
    net = NetworkData(np.array([[0, 3.0], [0, 0]]), "count", mask)
    snap = _mm_snap(np.ones((2, 1)), [[1.0]])
    assert evalx.test_loglik([snap], net, cfg, binarize=True) == pytest.approx(np.log(1 - np.exp(-1)))


def _auc_case(pos, neg):
    s = np.array(pos + neg, float)[None, :]
    y = np.array([1] * len(pos) + [0] * len(neg), float)[None, :]
    return evalx.auc(s, y, np.full(s.shape, TEST), TEST)


def test_auc_examples():
    assert _auc_case([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert _auc_case([0.5, 0.5], [0.5, 0.5]) == 0.5
    assert _auc_case([0.9, 0.3], [0.5, 0.1]) == 0.75
    with pytest.raises(ValueError):
        _auc_case([0.1], [])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_auc_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 31))
    scores = np.round(rng.random((n, n)), int(rng.integers(1, 4)))
    truth = (rng.random((n, n)) < rng.uniform(0.1, 0.9)).astype(float)
    mask = np.where(rng.random((n, n)) < 0.5, TEST, TRAIN)
    sel = mask == TEST
    pos, neg = scores[sel & (truth > 0)], scores[sel & (truth == 0)]
    if pos.size == 0 or neg.size == 0:
        return
    assert evalx.auc(scores, truth, mask, TEST) == brute_auc(pos, neg)


def test_least_squares_clustering():
    a = np.array([0, 0, 1, 1])
    b = np.array([5, 5, 2, 2])
    c = np.array([0, 1, 1, 1])
    assert np.array_equal(evalx.least_squares_clustering([a, b, c]), a)
    psm = evalx.coclustering_matrix([a, b, c])
    assert psm[0, 1] == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        evalx.least_squares_clustering([])


def test_format_pm():
    assert evalx.format_pm(0.5, 0.01) == "0.5000 ∓ 0.0100"


def test_crossvalidate_bookkeeping():
    net, _ = plant_communities(12, 2, within=0.9, between=0.1, seed=1)
    phi = np.zeros((12, 0), dtype=np.int8)
    run = RunConfig(iterations=6, burn_in=3, chains=3, seed=2)
    rep, plan = evalx.crossvalidate(ModelConfig(), net, phi, run)
    assert len(rep.rows) == 30
    assert sorted({(r["fold"], r["chain"]) for r in rep.rows}) == [(f, c) for f in range(10) for c in range(3)]
    again, _ = evalx.crossvalidate(ModelConfig(), net, phi, run)
    assert json.dumps(again.rows) == json.dumps(rep.rows)
    agg = rep.aggregate()
    assert set(agg) == set(evalx.METRICS)
    assert 0 <= agg["train_error"][0] <= 1
    csv = rep.to_csv().splitlines()
    assert csv[0] == "fold,chain,train_error,test_error,test_loglik,auc"
    assert len(csv) == 32 and "∓" in csv[-1]
    doc = json.loads(rep.to_json())
    assert len(doc["rows"]) == 30
    assert rep.table_row("infmm").startswith("infmm,")
