"""Independent reference computations used by the tests.

Nothing here imports from ``topofl``: each oracle recomputes its quantity
from the definition (enumeration, grid search, finite differences).
"""

from collections import deque
from fractions import Fraction
from itertools import product

import numpy as np


def adjacency_lists(adj):
    adj = np.asarray(adj)
    return [[j for j in range(len(adj)) if adj[i, j] != 0] for i in range(len(adj))]


def bfs_distances(nbrs, s):
    dist = {s: 0}
    q = deque([s])
    while q:
        v = q.popleft()
        for w in nbrs[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def all_shortest_paths(nbrs, s, t):
    """Every shortest s-t path, by depth-first extension of simple paths."""
    d = bfs_distances(nbrs, s).get(t)
    if d is None:
        return []
    paths, stack = [], [[s]]
    while stack:
        path = stack.pop()
        if len(path) - 1 == d:
            if path[-1] == t:
                paths.append(path)
            continue
        for w in nbrs[path[-1]]:
            if w not in path:
                stack.append(path + [w])
    return paths


def betweenness_bruteforce(adj, normalized=True, exact=False):
    """Sum over unordered pairs of the fraction of shortest paths through each node.

    ``exact`` returns the unnormalized sums as Fractions.
    """
    nbrs = adjacency_lists(adj)
    n = len(nbrs)
    c = [Fraction(0)] * n
    for s in range(n):
        for t in range(s + 1, n):
            paths = all_shortest_paths(nbrs, s, t)
            if not paths:
                continue
            for k in range(n):
                if k in (s, t):
                    continue
                through = sum(1 for p in paths if k in p)
                c[k] += Fraction(through, len(paths))
    if exact:
        return c
    if not normalized:
        return [float(x) for x in c]
    if n < 3:
        return [0.0] * n
    pairs = (n - 1) * (n - 2) // 2
    return [float(x / pairs) for x in c]


def closeness_bfs(adj):
    nbrs = adjacency_lists(adj)
    n = len(nbrs)
    out = []
    for k in range(n):
        dist = bfs_distances(nbrs, k)
        reach = [d for v, d in dist.items() if v != k]
        if not reach:
            out.append(0.0)
            continue
        r = len(reach)
        out.append((r / sum(reach)) * (r / (n - 1)))
    return np.array(out)


def random_graph(rng, n, p):
    a = np.triu((rng.random((n, n)) < p).astype(float), 1)
    return a + a.T


def simplex_grid_argmin(v, steps=2000):
    """Minimize |x - v|^2 over a dense grid on the simplex (K = 2 or 3)."""
    v = np.asarray(v, dtype=float)
    g = np.linspace(0.0, 1.0, steps + 1)
    if v.size == 2:
        xs = np.column_stack([g, 1 - g])
    elif v.size == 3:
        a, b = np.meshgrid(g, g, indexing="ij")
        mask = a + b <= 1 + 1e-12
        xs = np.column_stack([a[mask], b[mask], np.clip(1 - a[mask] - b[mask], 0, None)])
    else:
        raise ValueError("grid oracle only for K <= 3")
    return xs[np.argmin(((xs - v) ** 2).sum(axis=1))]


def refine_simplex_argmin(v, x0, width, steps=400):
    """Second, finer grid pass around a coarse minimizer (K = 2 or 3)."""
    v = np.asarray(v, dtype=float)
    g = np.linspace(-width, width, steps + 1)
    best, best_val = None, np.inf
    if v.size == 2:
        for da in g:
            a = x0[0] + da
            x = np.array([a, 1 - a])
            if np.all(x >= 0):
                val = ((x - v) ** 2).sum()
                if val < best_val:
                    best, best_val = x, val
        return best
    a, b = np.meshgrid(x0[0] + g, x0[1] + g, indexing="ij")
    c = 1 - a - b
    ok = (a >= 0) & (b >= 0) & (c >= -1e-15)
    xs = np.column_stack([a[ok], b[ok], np.clip(c[ok], 0, None)])
    return xs[np.argmin(((xs - v) ** 2).sum(axis=1))]


def central_difference(fun, x, h=1e-6, coords=None):
    x = np.asarray(x, dtype=float)
    coords = range(x.size) if coords is None else coords
    out = []
    for i in coords:
        e = np.zeros_like(x)
        e[i] = h
        out.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.array(out)


def relative_error(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / scale


def auc_pairwise(scores, labels):
    scores, labels = np.asarray(scores), np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    u = 0.0
    for p in pos:
        for q in neg:
            u += 1.0 if p > q else 0.5 if p == q else 0.0
    return u / (len(pos) * len(neg))


def softmax_direct(c):
    e = [np.exp(x) for x in c]
    s = sum(e)
    return np.array([x / s for x in e])


def kl_direct(lam, p):
    return sum(a * np.log(a / b) for a, b in zip(lam, p) if a > 0)


def all_binary_vectors(n):
    return [np.array(v) for v in product([0, 1], repeat=n)]
