"""Compiled inner loops shared by the mixed-membership samplers."""
import math

import numpy as np
from numba import njit

FAMILY_CODE = {"binary": 0, "count": 1, "unit": 2}


@njit(cache=True)
def edge_ll(code, e, loge, B, logB, log1mB):
    """Log g(e | B) without the B-free constant of the Poisson pmf."""
    if code == 0:
        return logB if e > 0 else log1mB
    if code == 1:
        return e * logB - B
    return logB + (B - 1.0) * loge


@njit(cache=True)
def block_draw(owner, partner, e, loge, logpi, lognew, B, code, sender, u, out, probs):
    """Draw one role's indicators for every cell given the other role's labels.

    Column k of cell c has weight pi[owner_c, k] g(e_c | B[k, partner_c])
    (B[partner_c, k] for receivers); if `lognew` is non-empty it holds the
    extra log weight of opening a new community. Consumes one uniform per
    cell. If probs has rows, the normalised conditionals are stored.
    """
    K = B.shape[0]
    width = K + 1 if lognew.size > 0 else K
    logB = np.log(B)
    log1mB = np.log1p(-B) if code == 0 else np.zeros_like(B)
    w = np.empty(width)
    record = probs.shape[0] > 0
    for c in range(owner.size):
        i = owner[c]
        j = partner[c]
        top = -np.inf
        for k in range(K):
            if sender:
                ll = edge_ll(code, e[c], loge[c], B[k, j], logB[k, j], log1mB[k, j])
            else:
                ll = edge_ll(code, e[c], loge[c], B[j, k], logB[j, k], log1mB[j, k])
            w[k] = logpi[i, k] + ll
            if w[k] > top:
                top = w[k]
        if width > K:
            w[K] = lognew[c]
            if w[K] > top:
                top = w[K]
        total = 0.0
        for k in range(width):
            w[k] = math.exp(w[k] - top)
            total += w[k]
        target = u[c] * total
        acc = 0.0
        pick = width - 1
        for k in range(width):
            acc += w[k]
            if acc >= target:
                pick = k
                break
        out[c] = pick
        if record:
            for k in range(width):
                probs[c, k] = w[k] / total


@njit(cache=True)
def _lbeta(x, y):
    return math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y)


@njit(cache=True)
def adjacent_swaps(N, prods, logu, accepted):
    """Sequential Metropolis decisions for swapping labels k and k+1.

    N (float) and prods are permuted in place as swaps are accepted;
    accepted[k] is set to 1 when the pair (k, k+1) is exchanged. The target
    is prod_i prod_k B(N_ik + 1, T_ik + a_ik) / B(1, a_ik) with T_ik the
    indicators of entity i beyond community k.
    """
    n, K = N.shape
    # tails[i, k] = indicators of i beyond community k; the B(1, a) terms
    # cancel between the current and swapped labelling
    tails = np.zeros((n, K))
    for i in range(n):
        acc = 0.0
        for k in range(K - 1, -1, -1):
            tails[i, k] = acc
            acc += N[i, k]
    for k in range(logu.size):
        delta = 0.0
        for i in range(n):
            n0 = N[i, k]
            n1 = N[i, k + 1]
            a0 = prods[i, k]
            a1 = prods[i, k + 1]
            t1 = tails[i, k + 1]
            old = _lbeta(n0 + 1.0, n1 + t1 + a0) + _lbeta(n1 + 1.0, t1 + a1)
            new = _lbeta(n1 + 1.0, n0 + t1 + a1) + _lbeta(n0 + 1.0, t1 + a0)
            delta += new - old
        if logu[k] < delta:
            accepted[k] = 1
            for i in range(n):
                tmp = N[i, k]
                N[i, k] = N[i, k + 1]
                N[i, k + 1] = tmp
                tmp = prods[i, k]
                prods[i, k] = prods[i, k + 1]
                prods[i, k + 1] = tmp
                tails[i, k] = N[i, k + 1] + tails[i, k + 1]


@njit(cache=True)
def indicator_counts(rows, cols, s, r, n, K):
    """N_ik: sender indicators of row i plus receiver indicators of column i equal to k."""
    N = np.zeros((n, K), dtype=np.int64)
    for c in range(rows.size):
        N[rows[c], s[c]] += 1
        N[cols[c], r[c]] += 1
    return N
