"""Client topology: similarity graphs over client models and their centralities.

Client models are node embeddings. Pairwise similarities are min-max
normalized into [0, 1], hard-thresholded into an epsilon-graph, and the
graph's centrality is turned into a probability vector by softmax.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .params import ParameterVector, check_same_shape

METRICS = ("l1", "l2", "dot", "cosine")
CENTRALITIES = ("betweenness", "degree", "closeness")


def similarity(a: ParameterVector, b: ParameterVector, metric: str = "dot",
               layer_filter=None) -> float:
    """Raw similarity between two parameter vectors.

    Distances are negated (``l1 -> -|a-b|_1``, ``l2 -> -|a-b|_2``) so that a
    larger score always means "more similar".
    """
    if not a.same_shape(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    x = a.select(layer_filter)
    y = b.select(layer_filter)
    if metric == "dot":
        return float(np.dot(x, y))
    if metric == "cosine":
        nx_, ny_ = np.linalg.norm(x), np.linalg.norm(y)
        if nx_ == 0.0 or ny_ == 0.0:
            raise ValueError("cosine similarity of a zero vector")
        return float(np.dot(x, y) / (nx_ * ny_))
    if metric == "l2":
        return -float(np.linalg.norm(x - y))
    if metric == "l1":
        return -float(np.abs(x - y).sum())
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass
class SimilarityMatrix:
    scores: np.ndarray
    metric: str
    normalized: bool
    degenerate: bool = False
    evaluations: int = 0


def build_similarity_matrix(params: Sequence[ParameterVector], metric: str = "dot",
                            layer_filter=None) -> SimilarityMatrix:
    """Pairwise similarities, min-max normalized over the off-diagonal.

    Each unordered pair is scored once. If every off-diagonal score is equal
    the spread is zero; the matrix is then set to 0.5 off the diagonal and
    ``degenerate`` is raised.
    """
    k = len(params)
    if k < 2:
        raise ValueError("need at least two clients")
    check_same_shape(params)
    raw = np.zeros((k, k))
    count = 0
    for i in range(k):
        for j in range(i + 1, k):
            raw[i, j] = raw[j, i] = similarity(params[i], params[j], metric, layer_filter)
            count += 1

    off = ~np.eye(k, dtype=bool)
    lo, hi = raw[off].min(), raw[off].max()
    degenerate = not hi > lo
    if degenerate:
        scores = np.full((k, k), 0.5)
    else:
        scores = (raw - lo) / (hi - lo)
    np.fill_diagonal(scores, 0.0)
    return SimilarityMatrix(scores, metric, True, degenerate, count)


@dataclass
class ClientTopology:
    """Undirected weighted client graph with symmetric adjacency in [0, 1]."""

    adjacency: np.ndarray
    epsilon: float = 0.0

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self) -> List[List[int]]:
        return [list(np.flatnonzero(row)) for row in self.adjacency]

    def edges(self):
        """Yield ``(k, l, weight)`` for each edge with k < l."""
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        for k, l in zip(rows, cols):
            yield int(k), int(l), float(self.adjacency[k, l])


def build_epsilon_graph(sim: SimilarityMatrix, epsilon: float) -> ClientTopology:
    """Keep the normalized similarities that are at least ``epsilon``."""
    if not sim.normalized:
        raise ValueError("epsilon-graph needs a normalized similarity matrix")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon > 1:
        raise ValueError(f"epsilon={epsilon} > 1 removes every edge")
    w = np.where(sim.scores >= epsilon, sim.scores, 0.0)
    w = np.maximum(w, w.T)
    np.fill_diagonal(w, 0.0)
    return ClientTopology(w, float(epsilon))


@dataclass
class CentralityVector:
    values: np.ndarray
    kind: str


def _bfs_dag(adj: List[List[int]], source: int):
    n = len(adj)
    dist = [-1] * n
    sigma = [0] * n
    preds: List[List[int]] = [[] for _ in range(n)]
    order = []
    dist[source] = 0
    sigma[source] = 1
    queue = deque([source])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, dist, sigma, preds


def betweenness_raw(topology: ClientTopology) -> List[Fraction]:
    """Exact (rational) betweenness on the unweighted edge set of the graph.

    Brandes accumulation, carried out over the common denominator ``L`` of the
    path counts from each source so that only integers are summed in the
    inner loop: with ``G(v) = L * (1 + delta(v)) / sigma(v)`` the recursion is
    ``G(v) = L / sigma(v) + sum of G(w) over successors w``.
    """
    adj = topology.neighbors()
    n = len(adj)
    total = [Fraction(0)] * n
    for s in range(n):
        order, _, sigma, preds = _bfs_dag(adj, s)
        lcm = math.lcm(*(sigma[v] for v in order))
        g = {v: lcm // sigma[v] for v in order}
        for w in reversed(order):
            for v in preds[w]:
                g[v] += g[w]
        for v in order:
            if v != s:
                # delta(v) = sigma(v) * G(v) / L - 1
                total[v] += Fraction(sigma[v] * g[v] - lcm, lcm)
    # every undirected pair was visited from both endpoints
    return [c / 2 for c in total]


def betweenness(topology: ClientTopology) -> CentralityVector:
    """Betweenness normalized by the number of pairs ``(K-1)(K-2)/2``."""
    n = topology.node_count
    if n < 3:
        return CentralityVector(np.zeros(n), "betweenness")
    pairs = (n - 1) * (n - 2) // 2
    raw = betweenness_raw(topology)
    return CentralityVector(np.array([float(c / pairs) for c in raw]), "betweenness")


def degree_centrality(topology: ClientTopology) -> CentralityVector:
    n = topology.node_count
    if n < 2:
        return CentralityVector(np.zeros(n), "degree")
    deg = np.count_nonzero(topology.adjacency, axis=1)
    return CentralityVector(deg / (n - 1), "degree")


def closeness_centrality(topology: ClientTopology) -> CentralityVector:
    """Hop-count closeness, scaled by the reachable fraction when disconnected.

    ``c_k = (r / S) * (r / (K - 1))`` with ``r`` reachable nodes at total
    distance ``S``; this is ``(K - 1) / S`` for a connected graph.
    """
    adj = topology.neighbors()
    n = len(adj)
    out = np.zeros(n)
    for k in range(n):
        _, dist, _, _ = _bfs_dag(adj, k)
        reach = [d for d in dist if d > 0]
        if reach:
            r = len(reach)
            out[k] = (r / sum(reach)) * (r / (n - 1))
    return CentralityVector(out, "closeness")


def centrality(topology: ClientTopology, kind: str = "betweenness") -> CentralityVector:
    if kind == "betweenness":
        return betweenness(topology)
    if kind == "degree":
        return degree_centrality(topology)
    if kind == "closeness":
        return closeness_centrality(topology)
    raise ValueError(f"unknown centrality {kind!r}; expected one of {CENTRALITIES}")


def prior_from_centrality(c) -> np.ndarray:
    """Softmax of centrality values (max-shifted)."""
    values = np.asarray(getattr(c, "values", c), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("centrality values must be finite")
    e = np.exp(values - values.max())
    return e / e.sum()


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: List[ParameterVector]

    @property
    def cluster_count(self) -> int:
        return len(self.centroids)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.cluster_count)


def _kmeans_pp(x: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _assign(x, centers):
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(len(x)), labels]


def _repair_empty(x, centers, labels, d2):
    c = centers.shape[0]
    while True:
        sizes = np.bincount(labels, minlength=c)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            return centers, labels
        # farthest point among those whose cluster can spare one
        donors = sizes[labels] > 1
        cand = np.where(donors, d2, -np.inf)
        idx = int(np.argmax(cand))
        centers[empty[0]] = x[idx]
        labels[idx] = empty[0]
        d2[idx] = 0.0


def cluster_clients(params: Sequence[ParameterVector], n_clusters: int, seed=0,
                    tol: float = 1e-6, max_iter: int = 100) -> ClusterAssignment:
    """Seeded k-means++ / Lloyd clustering of client parameter vectors."""
    k = len(params)
    if not 1 <= n_clusters <= k:
        raise ValueError(f"need 1 <= clusters <= {k}, got {n_clusters}")
    check_same_shape(params)
    rng = np.random.default_rng(seed)
    x = np.stack([p.values for p in params])
    centers = _kmeans_pp(x, n_clusters, rng)
    labels, d2 = _assign(x, centers)
    centers, labels = _repair_empty(x, centers, labels, d2)
    for _ in range(max_iter):
        new = np.stack([x[labels == j].mean(axis=0) for j in range(n_clusters)])
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        labels, d2 = _assign(x, centers)
        centers, labels = _repair_empty(x, centers, labels, d2)
        if shift < tol:
            break
    # centroids consistent with the final labels
    centers = np.stack([x[labels == j].mean(axis=0) for j in range(n_clusters)])
    layout = params[0].layer_index
    return ClusterAssignment(labels.astype(int), [ParameterVector(c, layout) for c in centers])


def clustered_prior(assignment: ClusterAssignment, cluster_topology: ClientTopology,
                    kind: str = "betweenness") -> np.ndarray:
    """Client prior: softmax of cluster centrality split uniformly within clusters."""
    if cluster_topology.node_count != assignment.cluster_count:
        raise ValueError("cluster topology size does not match the cluster count")
    q = prior_from_centrality(centrality(cluster_topology, kind))
    sizes = assignment.sizes()
    return q[assignment.labels] / sizes[assignment.labels]


def topology_to_dict(topology: ClientTopology, centrality_values=None, prior=None,
                     node_ids: Optional[Sequence] = None) -> dict:
    ids = list(node_ids) if node_ids is not None else list(range(topology.node_count))
    return {
        "nodes": ids,
        "edges": [[ids[k], ids[l], w] for k, l, w in topology.edges()],
        "epsilon": topology.epsilon,
        "centrality": [] if centrality_values is None else
        [float(v) for v in getattr(centrality_values, "values", centrality_values)],
        "prior": [] if prior is None else [float(v) for v in prior],
    }


def topology_to_json(topology: ClientTopology, centrality_values=None, prior=None,
                     node_ids=None) -> str:
    return json.dumps(topology_to_dict(topology, centrality_values, prior, node_ids), indent=2)


def topology_to_dot(topology: ClientTopology, node_ids=None, name: str = "topology") -> str:
    ids = list(node_ids) if node_ids is not None else list(range(topology.node_count))
    lines = [f"graph {name} {{"]
    lines += [f'  "{i}";' for i in ids]
    for k, l, w in topology.edges():
        lines.append(f'  "{ids[k]}" -- "{ids[l]}" [label="{w:.4f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
