"""Compiled kernels for exact-greedy least-squares regression trees.

Trees are grown level by level over column orders presorted once per
ensemble; ``XT`` is the training matrix transposed (columns contiguous) and
``sorted_vals[f]`` is column ``f`` in ``order[f]`` order. Nodes are numbered
breadth-first, so every node created at a level has a larger id than all
nodes of earlier levels; ``feature == -1`` marks a leaf.
"""

import numpy as np
from numba import njit

TIE_TOL = 1e-11


@njit(cache=True, nogil=True)
def build_tree(XT, order, sorted_vals, resid, feats, max_depth, min_leaf, node_of):
    n = XT.shape[1]
    cap = 2 ** (max_depth + 1) - 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    nsum = np.zeros(cap)
    nsq = np.zeros(cap)
    ncnt = np.zeros(cap, dtype=np.int64)

    for i in range(n):
        node_of[i] = 0
        nsum[0] += resid[i]
        nsq[0] += resid[i] * resid[i]
        ncnt[0] += 1
    n_nodes = 1
    lo, hi = 0, 1

    best_gain = np.zeros(cap)
    best_feat = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)
    lsum = np.zeros(cap)
    lcnt = np.zeros(cap, dtype=np.int64)
    last = np.zeros(cap)
    open_ = np.zeros(cap, dtype=np.bool_)

    for depth in range(max_depth):
        any_open = False
        for nd in range(lo, hi):
            open_[nd] = ncnt[nd] >= 2 * min_leaf
            any_open = any_open or open_[nd]
            best_gain[nd] = 0.0
            best_feat[nd] = -1
        if not any_open:
            break

        for fi in range(feats.shape[0]):
            f = feats[fi]
            for nd in range(lo, hi):
                lsum[nd] = 0.0
                lcnt[nd] = 0
            for t in range(n):
                r = order[f, t]
                nd = node_of[r]
                if nd < lo or not open_[nd]:
                    continue
                x = sorted_vals[f, t]
                c = lcnt[nd]
                if c >= min_leaf and x > last[nd] and ncnt[nd] - c >= min_leaf:
                    sl = lsum[nd]
                    sr = nsum[nd] - sl
                    gain = sl * sl / c + sr * sr / (ncnt[nd] - c) - nsum[nd] * nsum[nd] / ncnt[nd]
                    # candidates arrive by column then threshold; a gain must beat the
                    # best by more than rounding noise, so exact ties keep the earlier one
                    if gain > best_gain[nd] + TIE_TOL * nsq[nd]:
                        best_gain[nd] = gain
                        best_feat[nd] = f
                        best_thr[nd] = last[nd]
                lsum[nd] += resid[r]
                lcnt[nd] += 1
                last[nd] = x

        start = n_nodes
        for nd in range(lo, hi):
            if best_feat[nd] >= 0 and best_gain[nd] > 1e-12 * nsq[nd]:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                left[nd] = n_nodes
                right[nd] = n_nodes + 1
                n_nodes += 2
        if n_nodes == start:
            break

        for i in range(n):
            nd = node_of[i]
            if nd >= lo and feature[nd] >= 0:
                if XT[feature[nd], i] <= threshold[nd]:
                    child = left[nd]
                else:
                    child = right[nd]
                node_of[i] = child
                nsum[child] += resid[i]
                nsq[child] += resid[i] * resid[i]
                ncnt[child] += 1
        lo, hi = start, n_nodes

    for nd in range(n_nodes):
        if feature[nd] < 0 and ncnt[nd] > 0:
            value[nd] = nsum[nd] / ncnt[nd]

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_ensemble(X, offsets, feature, threshold, left, right, value, base, scale):
    n = X.shape[0]
    out = np.empty(n)
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        acc = base
        for t in range(n_trees):
            o = offsets[t]
            nd = 0
            while feature[o + nd] >= 0:
                if X[i, feature[o + nd]] <= threshold[o + nd]:
                    nd = left[o + nd]
                else:
                    nd = right[o + nd]
            acc += scale * value[o + nd]
        out[i] = acc
    return out
