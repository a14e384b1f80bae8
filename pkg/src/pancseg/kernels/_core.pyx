# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: variance-reduction split search and Dinic max-flow.

Contracts mirror _fallback.py exactly; see that module for documentation.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPLEMENTATION = "cython"

cdef double NEG_INF = float("-inf")


def best_split(
    double[:, ::1] X,
    double[::1] y,
    cnp.int64_t[::1] idx,
    cnp.int64_t[::1] feats,
    double[:, ::1] thr,
    long min_leaf,
):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t kf = feats.shape[0]
    cdef Py_ssize_t kt = thr.shape[1]
    cdef Py_ssize_t i, j, k
    cdef long f
    cdef double yi, xv, t
    cdef double sum_all = 0.0, sum2_all = 0.0

    for i in range(n):
        yi = y[idx[i]]
        sum_all += yi
        sum2_all += yi * yi
    cdef double var_all = sum2_all / n - (sum_all / n) * (sum_all / n)

    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnt_buf = np.zeros(kt, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sum_buf = np.zeros(kt, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sum2_buf = np.zeros(kt, dtype=np.float64)
    cdef cnp.int64_t[::1] cnt_l = cnt_buf
    cdef double[::1] sum_l = sum_buf
    cdef double[::1] sum2_l = sum2_buf

    cdef long best_f = -1
    cdef double best_t = 0.0
    cdef double best_gain = NEG_INF
    cdef double gain, var_l, var_r, sr, sr2
    cdef long cl, cr

    for j in range(kf):
        f = feats[j]
        for k in range(kt):
            cnt_l[k] = 0
            sum_l[k] = 0.0
            sum2_l[k] = 0.0
        for i in range(n):
            xv = X[idx[i], f]
            yi = y[idx[i]]
            for k in range(kt):
                if xv < thr[j, k]:
                    cnt_l[k] += 1
                    sum_l[k] += yi
                    sum2_l[k] += yi * yi
        for k in range(kt):
            cl = cnt_l[k]
            cr = n - cl
            if cl < min_leaf or cr < min_leaf:
                continue
            sr = sum_all - sum_l[k]
            sr2 = sum2_all - sum2_l[k]
            var_l = sum2_l[k] / cl - (sum_l[k] / cl) * (sum_l[k] / cl)
            var_r = sr2 / cr - (sr / cr) * (sr / cr)
            gain = var_all - (<double>cl / n) * var_l - (<double>cr / n) * var_r
            t = thr[j, k]
            if gain > best_gain or (
                gain == best_gain
                and (f < best_f or (f == best_f and t < best_t))
            ):
                best_gain = gain
                best_f = f
                best_t = t
    return best_f, best_t, best_gain


def maxflow(
    long n,
    double[::1] cap_src,
    double[::1] cap_snk,
    cnp.int64_t[::1] edge_u,
    cnp.int64_t[::1] edge_v,
    double[::1] cap_edge,
    double eps=1e-12,
):
    cdef long s = n, t = n + 1
    cdef long n_nodes = n + 2
    cdef long m = edge_u.shape[0]
    cdef long n_arcs = 2 * m + 4 * n
    cdef long i, u, v, a, aid, pos

    cdef cnp.ndarray[cnp.int64_t, ndim=1] to_np = np.empty(n_arcs, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cap_np = np.empty(n_arcs, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tail_np = np.empty(n_arcs, dtype=np.int64)
    cdef cnp.int64_t[::1] to = to_np
    cdef double[::1] cap = cap_np
    cdef cnp.int64_t[::1] tail = tail_np

    a = 0
    for i in range(m):
        u = edge_u[i]
        v = edge_v[i]
        tail[a] = u; to[a] = v; cap[a] = cap_edge[i]
        tail[a + 1] = v; to[a + 1] = u; cap[a + 1] = cap_edge[i]
        a += 2
    for v in range(n):
        tail[a] = s; to[a] = v; cap[a] = cap_src[v]
        tail[a + 1] = v; to[a + 1] = s; cap[a + 1] = 0.0
        a += 2
        tail[a] = v; to[a] = t; cap[a] = cap_snk[v]
        tail[a + 1] = t; to[a + 1] = v; cap[a + 1] = 0.0
        a += 2

    # CSR adjacency over arc ids keyed by tail node
    cdef cnp.ndarray[cnp.int64_t, ndim=1] head_np = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] head = head_np
    for a in range(n_arcs):
        head[tail[a] + 1] += 1
    for u in range(n_nodes):
        head[u + 1] += head[u]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] adj_np = np.empty(n_arcs, dtype=np.int64)
    cdef cnp.int64_t[::1] adj = adj_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fill_np = head_np[:n_nodes].copy()
    cdef cnp.int64_t[::1] fill = fill_np
    for a in range(n_arcs):
        u = tail[a]
        adj[fill[u]] = a
        fill[u] += 1

    cdef cnp.ndarray[cnp.int64_t, ndim=1] level_np = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] level = level_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue_np = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] it_np = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] it = it_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path_np = np.empty(n_nodes + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] path = path_np

    cdef double flow = 0.0
    cdef double bottleneck
    cdef long qh, qt, plen, found

    while True:
        # BFS: level graph
        for u in range(n_nodes):
            level[u] = -1
        level[s] = 0
        queue[0] = s
        qh = 0
        qt = 1
        while qh < qt:
            u = queue[qh]
            qh += 1
            for pos in range(head[u], head[u + 1]):
                aid = adj[pos]
                v = to[aid]
                if cap[aid] > eps and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for u in range(n_nodes):
            it[u] = head[u]
        # DFS blocking flow
        while True:
            plen = 0
            u = s
            found = 1
            while u != t:
                if it[u] < head[u + 1]:
                    aid = adj[it[u]]
                    v = to[aid]
                    if cap[aid] > eps and level[v] == level[u] + 1:
                        path[plen] = aid
                        plen += 1
                        u = v
                    else:
                        it[u] += 1
                else:
                    level[u] = -1
                    if plen == 0:
                        found = 0
                        break
                    plen -= 1
                    aid = path[plen]
                    u = tail[aid]
                    it[u] += 1
            if not found:
                break
            bottleneck = cap[path[0]]
            for i in range(1, plen):
                if cap[path[i]] < bottleneck:
                    bottleneck = cap[path[i]]
            for i in range(plen):
                aid = path[i]
                cap[aid] -= bottleneck
                cap[aid ^ 1] += bottleneck
            flow += bottleneck

    # residual reachability from the source
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] seen_np = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.uint8_t[::1] seen = seen_np
    seen[s] = 1
    queue[0] = s
    qh = 0
    qt = 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for pos in range(head[u], head[u + 1]):
            aid = adj[pos]
            v = to[aid]
            if cap[aid] > eps and seen[v] == 0:
                seen[v] = 1
                queue[qt] = v
                qt += 1
    src_side = seen_np[:n].astype(bool)
    return flow, src_side
