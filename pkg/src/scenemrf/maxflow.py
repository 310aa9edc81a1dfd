"""Exact min s-t cut on real-valued capacities (Dinic's algorithm, numba-compiled).

The graph is given as parallel arrays of directed arcs ``tails -> heads`` with
capacities.  :func:`min_cut` returns the flow value and the minimal source
side of a minimum cut, i.e. the nodes still reachable from the source in the
residual network.  That set is the same for every maximum flow.
"""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _bfs_levels(n, start, head, res, s, eps, level, queue):
    level[:] = -1
    level[s] = 0
    qh = 0
    qt = 1
    queue[0] = s
    while qh < qt:
        u = queue[qh]
        qh += 1
        for a in range(start[u], start[u + 1]):
            v = head[a]
            if res[a] > eps and level[v] < 0:
                level[v] = level[u] + 1
                queue[qt] = v
                qt += 1
    return level


@numba.njit(cache=True)
def _dinic(n, start, head, mate, res, s, t, eps):
    level = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    it = np.empty(n, np.int64)
    path = np.empty(n, np.int64)  # arc used to enter depth d+1
    total = 0.0
    while True:
        _bfs_levels(n, start, head, res, s, eps, level, queue)
        if level[t] < 0:
            break
        for u in range(n):
            it[u] = start[u]
        depth = 0
        u = s
        while True:
            if u == t:
                f = np.inf
                for d in range(depth):
                    if res[path[d]] < f:
                        f = res[path[d]]
                cut = depth
                for d in range(depth):
                    a = path[d]
                    res[a] -= f
                    res[mate[a]] += f
                    if res[a] <= eps and d < cut:
                        cut = d
                total += f
                # resume from the tail of the first saturated arc
                depth = cut
                u = s if depth == 0 else head[path[depth - 1]]
                continue
            advanced = False
            while it[u] < start[u + 1]:
                a = it[u]
                v = head[a]
                if res[a] > eps and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if u == s:
                    break
                level[u] = -1  # dead end for this phase
                depth -= 1
                u = s if depth == 0 else head[path[depth - 1]]
                it[u] += 1
    return total


@numba.njit(cache=True)
def _reachable(n, start, head, res, s, eps):
    seen = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    seen[s] = True
    stack[0] = s
    top = 1
    while top > 0:
        top -= 1
        u = stack[top]
        for a in range(start[u], start[u + 1]):
            v = head[a]
            if res[a] > eps and not seen[v]:
                seen[v] = True
                stack[top] = v
                top += 1
    return seen


def build_residual(n_nodes: int, tails: np.ndarray, heads: np.ndarray, caps: np.ndarray):
    """CSR residual network: every arc gets a zero-capacity mate in the other direction."""
    tails = np.asarray(tails, np.int64)
    heads = np.asarray(heads, np.int64)
    caps = np.asarray(caps, np.float64)
    m = len(tails)
    src = np.concatenate([tails, heads])
    dst = np.concatenate([heads, tails])
    res = np.concatenate([caps, np.zeros(m)])
    mate_unsorted = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    order = np.argsort(src, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(2 * m)
    start = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(np.bincount(src, minlength=n_nodes), out=start[1:])
    return start, dst[order], inv[mate_unsorted[order]], res[order]


def min_cut(n_nodes: int, tails, heads, caps, source: int, sink: int, eps: float | None = None):
    """Maximum flow value and boolean mask of the minimal source side of a min cut."""
    caps = np.asarray(caps, np.float64)
    if np.any(~np.isfinite(caps)) or np.any(caps < 0):
        raise ValueError("capacities must be finite and non-negative")
    if eps is None:
        scale = float(caps.max()) if caps.size else 0.0
        eps = 1e-13 * max(scale, 1.0)
    start, head, mate, res = build_residual(n_nodes, tails, heads, caps)
    if len(head) == 0:
        seen = np.zeros(n_nodes, bool)
        seen[source] = True
        return 0.0, seen
    flow = _dinic(n_nodes, start, head, mate, res, source, sink, eps)
    return float(flow), _reachable(n_nodes, start, head, res, source, eps)
