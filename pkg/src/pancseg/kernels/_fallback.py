"""Pure numpy/Python implementations of the hot kernels.

Same contracts as the compiled extension in _core.pyx; used when the
extension is unavailable or PANCSEG_PURE_PYTHON=1 is set.
"""

from __future__ import annotations

from collections import deque

import numpy as np

IMPLEMENTATION = "python"

_NEG_INF = float("-inf")


def best_split(X, y, idx, feats, thr, min_leaf):
    """Best variance-reduction split among candidate (feature, threshold) pairs.

    X: (n_samples, n_features) float64; y: (n_samples,) float64;
    idx: node sample indices; feats: candidate feature indices;
    thr: (len(feats), kt) candidate thresholds; samples with x < t go left.

    Returns (feature_index, threshold, gain); feature_index is -1 when no
    candidate leaves min_leaf samples on both sides.  Ties are broken by
    lowest feature index, then lowest threshold.
    """
    yv = y[idx]
    n = yv.size
    sum_all = float(yv.sum())
    sum2_all = float((yv * yv).sum())
    var_all = sum2_all / n - (sum_all / n) ** 2

    Xn = X[np.ix_(idx, feats)]  # (n, kf)
    mask = Xn[:, :, None] < thr[None, :, :]  # (n, kf, kt)
    cnt_l = mask.sum(axis=0, dtype=np.int64)
    sum_l = np.einsum("i,ijk->jk", yv, mask)
    sum2_l = np.einsum("i,ijk->jk", yv * yv, mask)
    cnt_r = n - cnt_l
    sum_r = sum_all - sum_l
    sum2_r = sum2_all - sum2_l

    valid = (cnt_l >= min_leaf) & (cnt_r >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        var_l = sum2_l / cnt_l - (sum_l / cnt_l) ** 2
        var_r = sum2_r / cnt_r - (sum_r / cnt_r) ** 2
        gain = var_all - (cnt_l / n) * var_l - (cnt_r / n) * var_r
    gain = np.where(valid, gain, _NEG_INF)

    best = (-1, 0.0, _NEG_INF)
    for j in range(len(feats)):
        for k in range(thr.shape[1]):
            g = gain[j, k]
            if g == _NEG_INF:
                continue
            f, t = int(feats[j]), float(thr[j, k])
            if (
                g > best[2]
                or (g == best[2] and (f < best[0] or (f == best[0] and t < best[1])))
            ):
                best = (f, t, float(g))
    return best


def maxflow(n, cap_src, cap_snk, edge_u, edge_v, cap_edge, eps=1e-12):
    """Dinic max-flow on n voxel nodes plus implicit source/sink terminals.

    cap_src/cap_snk: terminal arc capacities per node; (edge_u, edge_v,
    cap_edge) are undirected neighbor arcs with equal capacity both ways.

    Returns (flow_value, source_side) where source_side[v] is True for
    nodes reachable from the source in the final residual graph.
    """
    s, t = n, n + 1
    n_nodes = n + 2
    m = len(edge_u)
    n_arcs = 2 * m + 4 * n
    to = np.empty(n_arcs, dtype=np.int64)
    cap = np.empty(n_arcs, dtype=np.float64)
    heads: list[list[int]] = [[] for _ in range(n_nodes)]

    a = 0

    def add(u, v, c_uv, c_vu):
        nonlocal a
        to[a], cap[a] = v, c_uv
        heads[u].append(a)
        to[a + 1], cap[a + 1] = u, c_vu
        heads[v].append(a + 1)
        a += 2

    for i in range(m):
        add(int(edge_u[i]), int(edge_v[i]), float(cap_edge[i]), float(cap_edge[i]))
    for v in range(n):
        add(s, v, float(cap_src[v]), 0.0)
        add(v, t, float(cap_snk[v]), 0.0)

    level = np.empty(n_nodes, dtype=np.int64)
    flow = 0.0
    while True:
        level.fill(-1)
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for aid in heads[u]:
                v = to[aid]
                if cap[aid] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[t] < 0:
            break
        it = [0] * n_nodes
        # iterative DFS for the blocking flow of this phase
        while True:
            path = []
            u = s
            while u != t:
                if it[u] < len(heads[u]):
                    aid = heads[u][it[u]]
                    v = to[aid]
                    if cap[aid] > eps and level[v] == level[u] + 1:
                        path.append(aid)
                        u = v
                    else:
                        it[u] += 1
                else:
                    level[u] = -1  # dead end; prune from this phase
                    if not path:
                        u = -1
                        break
                    aid = path.pop()
                    u = to[aid ^ 1]
                    it[u] += 1
            if u == -1:
                break
            bottleneck = min(cap[aid] for aid in path)
            for aid in path:
                cap[aid] -= bottleneck
                cap[aid ^ 1] += bottleneck
            flow += bottleneck

    # residual reachability from s gives the source side of the min cut
    src_side = np.zeros(n, dtype=bool)
    seen = np.zeros(n_nodes, dtype=bool)
    seen[s] = True
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for aid in heads[u]:
            v = to[aid]
            if cap[aid] > eps and not seen[v]:
                seen[v] = True
                queue.append(v)
    src_side[:] = seen[:n]
    return flow, src_side
