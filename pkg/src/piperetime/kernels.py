"""Hot loops used by timing, relocation and the oracles.

Each public function dispatches to a numba kernel or to a numpy version with
the same contract.  Both are importable directly (``*_nb`` / ``*_np``) so
tests and the benchmark can compare them.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

INF_W = np.int64(1) << 60


# ---------------------------------------------------------------- zero-register DAG

def zero_topo_rank(n, src, dst, w):
    """Topological rank of every node in the zero-weight subgraph, -1 on a cycle."""
    indeg = np.zeros(n, dtype=np.int64)
    zmask = w == 0
    np.add.at(indeg, dst[zmask], 1)
    order = np.argsort(src[zmask], kind="stable")
    zs, zd = src[zmask][order], dst[zmask][order]
    start = np.searchsorted(zs, np.arange(n + 1))
    rank = np.full(n, -1, dtype=np.int64)
    frontier = list(np.nonzero(indeg == 0)[0])
    k = 0
    while frontier:
        v = frontier.pop()
        rank[v] = k
        k += 1
        for j in range(start[v], start[v + 1]):
            x = zd[j]
            indeg[x] -= 1
            if indeg[x] == 0:
                frontier.append(x)
    if k != n:
        return None
    return rank


@njit
def _arrival_nb(n, src, dst, w, delta, rank):
    order = np.argsort(rank)
    arrival = delta.copy()
    pred = np.full(n, -1, dtype=np.int64)
    # bucket zero edges by source
    m = src.shape[0]
    cnt = np.zeros(n + 1, dtype=np.int64)
    for i in range(m):
        if w[i] == 0:
            cnt[src[i] + 1] += 1
    for v in range(n):
        cnt[v + 1] += cnt[v]
    fill = cnt[:-1].copy()
    adj = np.empty(cnt[n], dtype=np.int64)
    for i in range(m):
        if w[i] == 0:
            adj[fill[src[i]]] = dst[i]
            fill[src[i]] += 1
    for t in range(n):
        u = order[t]
        for j in range(cnt[u], cnt[u + 1]):
            x = adj[j]
            cand = arrival[u] + delta[x]
            if cand > arrival[x]:
                arrival[x] = cand
                pred[x] = u
    return arrival, pred


def _arrival_np(n, src, dst, w, delta, rank):
    zmask = w == 0
    zs, zd = src[zmask], dst[zmask]
    arrival = delta.astype(np.float64).copy()
    pred = np.full(n, -1, dtype=np.int64)
    # process edges grouped by the rank of their source so each level sees final arrivals
    order = np.argsort(rank[zs], kind="stable")
    zs, zd = zs[order], zd[order]
    bounds = np.searchsorted(rank[zs], np.arange(n + 1))
    for r in range(n):
        lo, hi = bounds[r], bounds[r + 1]
        if lo == hi:
            continue
        s, d = zs[lo:hi], zd[lo:hi]
        cand = arrival[s] + delta[d]
        better = cand > arrival[d]
        if not better.any():
            continue
        s, d, cand = s[better], d[better], cand[better]
        best = np.full(n, -np.inf)
        np.maximum.at(best, d, cand)
        hit = cand == best[d]
        d2, s2 = d[hit], s[hit]
        _, first = np.unique(d2, return_index=True)
        arrival[d2[first]] = best[d2[first]]
        pred[d2[first]] = s2[first]
    return arrival, pred


def zero_arrival(n, src, dst, w, delta, rank, use_numba=None):
    """Longest node-weighted path ending at each node over zero-register edges."""
    use = HAVE_NUMBA if use_numba is None else use_numba
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    fn = _arrival_nb if use else _arrival_np
    return fn(n, src, dst, w, np.asarray(delta, dtype=np.float64), rank)


# ---------------------------------------------------------------- W / D matrices

@njit
def _wd_nb(n, src, dst, w, delta, rank):
    m = src.shape[0]
    cnt = np.zeros(n + 1, dtype=np.int64)
    for i in range(m):
        cnt[src[i] + 1] += 1
    for v in range(n):
        cnt[v + 1] += cnt[v]
    fill = cnt[:-1].copy()
    adj = np.empty(m, dtype=np.int64)
    adjw = np.empty(m, dtype=np.int64)
    for i in range(m):
        adj[fill[src[i]]] = dst[i]
        adjw[fill[src[i]]] = w[i]
        fill[src[i]] += 1
    big = np.int64(1) << 60
    W = np.full((n, n), big, dtype=np.int64)
    D = np.full((n, n), -np.inf)
    heap = np.empty(m + n + 1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    node_of_rank = np.empty(n, dtype=np.int64)
    for v in range(n):
        node_of_rank[rank[v]] = v
    for s in range(n):
        Ws = W[s]
        Ds = D[s]
        done[:] = False
        Ws[s] = 0
        Ds[s] = delta[s]
        # binary min-heap over key = W * n + rank
        size = 1
        heap[0] = rank[s]
        while size > 0:
            key = heap[0]
            size -= 1
            last = heap[size]
            i = 0
            while True:
                c = 2 * i + 1
                if c >= size:
                    break
                if c + 1 < size and heap[c + 1] < heap[c]:
                    c += 1
                if heap[c] < last:
                    heap[i] = heap[c]
                    i = c
                else:
                    break
            if size > 0:
                heap[i] = last
            u = node_of_rank[key % n]
            if done[u] or key // n != Ws[u]:
                continue
            done[u] = True
            for j in range(cnt[u], cnt[u + 1]):
                x = adj[j]
                nw = Ws[u] + adjw[j]
                nd = Ds[u] + delta[x]
                if x == s:
                    continue
                if nw < Ws[x]:
                    Ws[x] = nw
                    Ds[x] = nd
                    k = nw * n + rank[x]
                    p = size
                    size += 1
                    while p > 0:
                        q = (p - 1) // 2
                        if heap[q] > k:
                            heap[p] = heap[q]
                            p = q
                        else:
                            break
                    heap[p] = k
                elif nw == Ws[x] and nd > Ds[x]:
                    Ds[x] = nd
    return W, D


def _wd_np(n, src, dst, w, delta, rank=None):
    big = INF_W
    W = np.full((n, n), big, dtype=np.int64)
    D = np.full((n, n), -np.inf)
    delta = np.asarray(delta, dtype=np.float64)
    for u, v, k in zip(src, dst, w):
        if u == v:
            continue
        d = delta[u] + delta[v]
        if k < W[u, v] or (k == W[u, v] and d > D[u, v]):
            W[u, v], D[u, v] = k, d
    idx = np.arange(n)
    W[idx, idx] = 0
    D[idx, idx] = delta
    for k in range(n):
        wk = W[:, k:k + 1] + W[k:k + 1, :]
        dk = D[:, k:k + 1] + D[k:k + 1, :] - delta[k]
        reach = (W[:, k:k + 1] < big) & (W[k:k + 1, :] < big)
        wk = np.where(reach, wk, big)
        better = (wk < W) | ((wk == W) & (dk > D) & reach)
        W = np.where(better, wk, W)
        D = np.where(better, dk, D)
    return W, D


def wd_matrices(n, src, dst, w, delta, rank, use_numba=None):
    """All-pairs (min registers, max delay among register-minimal paths).

    Unreachable pairs have W = INF_W and D = -inf.  The diagonal is the empty
    path: W = 0 and D = delta.
    """
    use = HAVE_NUMBA if use_numba is None else use_numba
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64), np.zeros((0, 0))
    delta = np.asarray(delta, dtype=np.float64)
    if use:
        return _wd_nb(n, src, dst, w, delta, rank)
    return _wd_np(n, src, dst, w, delta, rank)


# ---------------------------------------------------------------- Bellman-Ford

@njit
def _bf_nb(nv, a, b, c):
    """Constraint x[b] <= x[a] + c per arc; all vertices start at 0."""
    dist = np.zeros(nv, dtype=np.int64)
    pred = np.full(nv, -1, dtype=np.int64)
    m = a.shape[0]
    last = -1
    for it in range(nv + 1):
        last = -1
        for i in range(m):
            nd = dist[a[i]] + c[i]
            if nd < dist[b[i]]:
                dist[b[i]] = nd
                pred[b[i]] = i
                last = b[i]
        if last < 0:
            break
    return dist, pred, last


def _bf_np(nv, a, b, c):
    dist = np.zeros(nv, dtype=np.int64)
    pred = np.full(nv, -1, dtype=np.int64)
    last = -1
    for _ in range(nv + 1):
        cand = dist[a] + c
        new = dist.copy()
        np.minimum.at(new, b, cand)
        changed = new < dist
        if not changed.any():
            return dist, pred, -1
        hit = np.nonzero(cand == new[b])[0]
        hit = hit[changed[b[hit]]]
        # first arc index reaching each improved vertex
        _, first = np.unique(b[hit], return_index=True)
        pred[b[hit[first]]] = hit[first]
        dist = new
        last = int(b[hit[first[-1]]])
    return dist, pred, last


def bellman_ford(nv, a, b, c, use_numba=None):
    """Returns (dist, pred_arc, last_relaxed).  last_relaxed >= 0 flags a negative cycle."""
    use = HAVE_NUMBA if use_numba is None else use_numba
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    if a.size == 0:
        return np.zeros(nv, dtype=np.int64), np.full(nv, -1, dtype=np.int64), -1
    fn = _bf_nb if use else _bf_np
    dist, pred, last = fn(nv, a, b, c)
    return dist, pred, int(last)


def negative_cycle(nv, a, b, c, pred, start):
    """Extract a negative cycle (list of arc indices) by walking predecessors."""
    v = start
    for _ in range(nv):
        if pred[v] < 0:
            break
        v = a[pred[v]]
    seen = {}
    cyc = []
    while v not in seen and pred[v] >= 0:
        seen[v] = len(cyc)
        cyc.append(int(pred[v]))
        v = a[pred[v]]
    if v not in seen:
        return None
    arcs = cyc[seen[v]:][::-1]
    if sum(int(c[i]) for i in arcs) >= 0:
        return None
    return arcs


def find_negative_cycle(nv, a, b, c):
    """Slow but certain: sequential Bellman-Ford with predecessor walk."""
    a, b, c = (np.asarray(x, dtype=np.int64) for x in (a, b, c))
    dist = np.zeros(nv, dtype=np.int64)
    pred = np.full(nv, -1, dtype=np.int64)
    for _ in range(3 * nv + 3):
        last = -1
        for i in range(a.size):
            nd = dist[a[i]] + c[i]
            if nd < dist[b[i]]:
                dist[b[i]] = nd
                pred[b[i]] = i
                last = b[i]
        if last < 0:
            return None
        cyc = negative_cycle(nv, a, b, c, pred, last)
        if cyc is not None:
            return cyc
    return None


# ---------------------------------------------------------------- brute-force oracle

@njit
def _enum_nb(nv, closure, weight, bound):
    """Exhaustive search for min (objective, L1, lex) over integer x with x[0] = 0.

    closure[i, j] is the tightest bound on x[j] - x[i] (INF if none).
    """
    big = np.int64(1) << 60
    x = np.zeros(nv, dtype=np.int64)
    lo = np.zeros(nv, dtype=np.int64)
    hi = np.zeros(nv, dtype=np.int64)
    best = np.zeros(nv, dtype=np.int64)
    best_obj = big
    best_l1 = big
    found = False
    visited = np.int64(0)
    if nv == 1:
        return True, best, np.int64(0), np.int64(1)
    depth = 1
    # bounds for depth 1
    lo[1] = -bound
    hi[1] = bound
    for a in range(1):
        if closure[a, 1] < big:
            hi[1] = min(hi[1], x[a] + closure[a, 1])
        if closure[1, a] < big:
            lo[1] = max(lo[1], x[a] - closure[1, a])
    x[1] = lo[1] - 1
    while depth >= 1:
        x[depth] += 1
        if x[depth] > hi[depth]:
            depth -= 1
            continue
        if depth == nv - 1:
            visited += 1
            obj = np.int64(0)
            l1 = np.int64(0)
            for i in range(1, nv):
                obj += weight[i] * x[i]
                l1 += abs(x[i])
            better = False
            if not found or obj < best_obj:
                better = True
            elif obj == best_obj:
                if l1 < best_l1:
                    better = True
                elif l1 == best_l1:
                    for i in range(1, nv):
                        if x[i] != best[i]:
                            better = x[i] < best[i]
                            break
            if better:
                found = True
                best_obj = obj
                best_l1 = l1
                best[:] = x
            continue
        d = depth + 1
        lo[d] = -bound
        hi[d] = bound
        for a in range(d):
            if closure[a, d] < big:
                hi[d] = min(hi[d], x[a] + closure[a, d])
            if closure[d, a] < big:
                lo[d] = max(lo[d], x[a] - closure[d, a])
        if lo[d] > hi[d]:
            continue
        x[d] = lo[d] - 1
        depth = d
    return found, best, best_obj, visited


def _enum_py(nv, closure, weight, bound):
    big = INF_W
    best = None
    key_best = None
    visited = 0
    x = [0] * nv

    def rec(d):
        nonlocal best, key_best, visited
        if d == nv:
            visited += 1
            obj = sum(int(weight[i]) * x[i] for i in range(1, nv))
            key = (obj, sum(abs(v) for v in x[1:]), x[1:])
            if key_best is None or key < key_best:
                key_best, best = key, list(x)
            return
        lo, hi = -bound, bound
        for a in range(d):
            if closure[a, d] < big:
                hi = min(hi, x[a] + int(closure[a, d]))
            if closure[d, a] < big:
                lo = max(lo, x[a] - int(closure[d, a]))
        for val in range(lo, hi + 1):
            x[d] = val
            rec(d + 1)

    rec(1)
    if best is None:
        return False, np.zeros(nv, dtype=np.int64), 0, visited
    return True, np.array(best, dtype=np.int64), key_best[0], visited


def enumerate_optimum(nv, closure, weight, bound, use_numba=None):
    use = HAVE_NUMBA if use_numba is None else use_numba
    closure = np.asarray(closure, dtype=np.int64)
    weight = np.asarray(weight, dtype=np.int64)
    fn = _enum_nb if use else _enum_py
    found, best, obj, visited = fn(nv, closure, weight, np.int64(bound))
    return bool(found), np.asarray(best), int(obj), int(visited)
