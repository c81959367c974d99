"""Round-based federated training: FedAvg, FedProx, DRFL and topology-aware FL.

One round samples ``m`` clients, trains each locally from the global model,
averages the local models, and (for the robust strategies) takes one
projected ascent step on the client mixing weights ``lam``. The
topology-aware strategy regularizes that step toward a prior computed from
the centrality of a graph over the clients' latest local models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import metrics
from .data import ClientDataset, FederationSplit
from .models import LocalTrainConfig, ModelSpec, init_params, local_train, loss, predict
from .params import ParameterVector, check_same_shape
from .robust import DualConfig, sample_clients, uniform, update_lambda
from .topology import (CENTRALITIES, METRICS, ClientTopology, ClusterAssignment,
                       SimilarityMatrix, build_epsilon_graph, build_similarity_matrix,
                       centrality, cluster_clients, clustered_prior, prior_from_centrality)

STRATEGIES = ("fedavg", "fedprox", "drfl", "tfl")

# stream tags for SeedSequence-derived generators
_INIT, _SAMPLE, _CLIENT, _CLUSTER = 0, 1, 2, 3


@dataclass(frozen=True)
class TopologyConfig:
    metric: str = "dot"
    epsilon: float = 0.4
    centrality: str = "betweenness"
    update_frequency: int = 5
    layer_filter: Optional[tuple] = None
    clusters: Optional[int] = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.centrality not in CENTRALITIES:
            raise ValueError(f"unknown centrality {self.centrality!r}; expected one of {CENTRALITIES}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.update_frequency < 1:
            raise ValueError("update_frequency must be >= 1")
        if self.clusters is not None and self.clusters < 1:
            raise ValueError("clusters must be >= 1")
        if self.layer_filter is not None:
            object.__setattr__(self, "layer_filter", tuple(self.layer_filter))


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str = "tfl"
    m: int = 5
    rounds: int = 50
    dual: DualConfig = field(default_factory=DualConfig)
    topo: TopologyConfig = field(default_factory=TopologyConfig)
    local: LocalTrainConfig = field(default_factory=LocalTrainConfig)
    eval_interval: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")

    @property
    def robust(self) -> bool:
        return self.strategy in ("drfl", "tfl")


@dataclass
class ClientState:
    n_samples: int
    params: Optional[ParameterVector] = None
    loss: float = float("nan")


@dataclass
class TopologyResult:
    topology: ClientTopology
    centrality: np.ndarray
    prior: np.ndarray
    similarity: SimilarityMatrix
    assignment: Optional[ClusterAssignment] = None


@dataclass
class FederationState:
    spec: ModelSpec
    global_params: ParameterVector
    clients: List[ClientState]
    lam: np.ndarray
    prior: np.ndarray
    topology: Optional[TopologyResult] = None
    round: int = 0
    comm_params: int = 0

    @classmethod
    def initial(cls, spec: ModelSpec, datasets: Sequence[ClientDataset], theta0: ParameterVector):
        k = len(datasets)
        return cls(spec, theta0, [ClientState(len(d)) for d in datasets], uniform(k), uniform(k))

    @property
    def n_clients(self) -> int:
        return len(self.clients)


@dataclass
class RoundRecord:
    round: int
    sampled: np.ndarray
    lam: np.ndarray
    prior: np.ndarray
    mean_train_loss: float
    if_metric: Optional[float] = None
    oof_metric: Optional[float] = None
    wall_ms: float = 0.0
    comm_params: int = 0
    topology_refreshed: bool = False
    similarity_evaluations: int = 0


def aggregate(params_list: Sequence[ParameterVector]) -> ParameterVector:
    """Coordinate-wise mean of the given parameter vectors."""
    if not params_list:
        raise ValueError("nothing to aggregate")
    check_same_shape(params_list)
    stacked = np.stack([p.values for p in params_list])
    return params_list[0].with_values(stacked.mean(axis=0))


def evaluate_all_losses(spec: ModelSpec, params: ParameterVector,
                        datasets: Sequence[ClientDataset]) -> np.ndarray:
    """Loss of one model on every client's full local data."""
    return np.array([loss(spec, params, d.batch) for d in datasets])


def learn_topology(local_params: Sequence[ParameterVector], topo: TopologyConfig,
                   seed=0) -> TopologyResult:
    """Similarity graph, centrality and prior over the given client models.

    With ``topo.clusters`` set the graph is built over k-means centroids and
    the cluster prior is split evenly among each cluster's members.
    """
    if topo.clusters is not None:
        assignment = cluster_clients(local_params, topo.clusters, seed)
        nodes = assignment.centroids
    else:
        assignment, nodes = None, local_params
    if len(nodes) < 2:
        # one node: no pairs to compare, every client gets equal mass
        sim = SimilarityMatrix(np.zeros((1, 1)), topo.metric, True, True, 0)
        graph = ClientTopology(np.zeros((1, 1)), topo.epsilon)
    else:
        sim = build_similarity_matrix(nodes, topo.metric, topo.layer_filter)
        graph = build_epsilon_graph(sim, topo.epsilon)
    cent = centrality(graph, topo.centrality)
    if assignment is None:
        prior = prior_from_centrality(cent)
    else:
        prior = clustered_prior(assignment, graph, topo.centrality)
    return TopologyResult(graph, cent.values, prior, sim, assignment)


def refresh_topology(state: FederationState, topo: TopologyConfig, seed=0):
    """Topology and prior from the clients' latest local models."""
    missing = [k for k, c in enumerate(state.clients) if c.params is None]
    if missing:
        raise ValueError(f"clients without a local model: {missing}")
    result = learn_topology([c.params for c in state.clients], topo, seed)
    return result.topology, result.prior


def client_seed(run_seed: int, client_id: int, round_: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([run_seed, _CLIENT, client_id, round_])


def _train_clients(state, datasets, cfg, ids, round_, run_seed, executor):
    local = cfg.local if cfg.strategy == "fedprox" else replace(cfg.local, prox_mu=0.0)
    anchor = state.global_params if cfg.strategy == "fedprox" else None

    def job(c):
        return local_train(state.spec, state.global_params, datasets[c].batch, local,
                           anchor=anchor, seed=client_seed(run_seed, c, round_))

    if executor is None:
        results = {c: job(c) for c in ids}
    else:
        futures = {c: executor.submit(job, c) for c in ids}
        results = {c: f.result() for c, f in futures.items()}
    for c in sorted(ids):
        state.clients[c].params, state.clients[c].loss = results[c]
    return results


def _lambda_step(state, datasets, cfg, round_, run_seed, refresh):
    """Topology refresh (tfl only) followed by one ascent step on ``lam``."""
    evaluations = 0
    if cfg.strategy == "tfl":
        if refresh:
            state.topology = learn_topology([c.params for c in state.clients], cfg.topo,
                                            np.random.SeedSequence([run_seed, _CLUSTER, round_]))
            state.prior = state.topology.prior
            evaluations = state.topology.similarity.evaluations
        dual, prior = cfg.dual, state.prior
    else:
        dual, prior = replace(cfg.dual, q=0.0), uniform(state.n_clients)
    losses = evaluate_all_losses(state.spec, state.global_params, datasets)
    state.lam = update_lambda(state.lam, losses, prior, dual)
    return evaluations


def warm_start(state: FederationState, datasets, cfg: StrategyConfig, run_seed: int = 0,
               executor=None) -> RoundRecord:
    """Round 0: every client trains once so each has a local model."""
    start = time.perf_counter()
    ids = list(range(state.n_clients))
    _train_clients(state, datasets, cfg, ids, 0, run_seed, executor)
    state.global_params = aggregate([state.clients[c].params for c in ids])
    evaluations = 0
    if cfg.strategy == "tfl":
        state.topology = learn_topology([c.params for c in state.clients], cfg.topo,
                                        np.random.SeedSequence([run_seed, _CLUSTER, 0]))
        state.prior = state.topology.prior
        evaluations = state.topology.similarity.evaluations
    state.round = 0
    state.comm_params += 2 * len(ids) * len(state.global_params)
    return RoundRecord(0, np.array(ids), state.lam.copy(), state.prior.copy(),
                       float(np.mean([state.clients[c].loss for c in ids])),
                       wall_ms=1000 * (time.perf_counter() - start),
                       comm_params=state.comm_params,
                       topology_refreshed=cfg.strategy == "tfl",
                       similarity_evaluations=evaluations)


def run_round(state: FederationState, datasets, cfg: StrategyConfig, run_seed: int = 0,
              executor=None) -> RoundRecord:
    """Advance ``state`` by one communication round and describe what happened.

    Local training for the sampled clients may run on ``executor``; the
    outcome does not depend on completion order.
    """
    start = time.perf_counter()
    t = state.round + 1
    k = state.n_clients
    if cfg.m > k:
        raise ValueError(f"m={cfg.m} exceeds the number of clients {k}")
    rng = np.random.default_rng(np.random.SeedSequence([run_seed, _SAMPLE, t]))
    if cfg.robust:
        sampled = sample_clients(state.lam, cfg.m, rng)
    else:
        sampled = rng.choice(k, size=cfg.m, replace=False)
    _train_clients(state, datasets, cfg, list(sampled), t, run_seed, executor)
    state.global_params = aggregate([state.clients[c].params for c in sorted(sampled)])

    refreshed, evaluations = False, 0
    if cfg.robust:
        refreshed = cfg.strategy == "tfl" and t % cfg.topo.update_frequency == 0
        evaluations = _lambda_step(state, datasets, cfg, t, run_seed, refreshed)
    state.round = t
    state.comm_params += 2 * cfg.m * len(state.global_params)
    return RoundRecord(t, np.asarray(sampled), state.lam.copy(), state.prior.copy(),
                       float(np.mean([state.clients[c].loss for c in sampled])),
                       wall_ms=1000 * (time.perf_counter() - start),
                       comm_params=state.comm_params, topology_refreshed=refreshed,
                       similarity_evaluations=evaluations)


def default_spec(split: FederationSplit, hidden_dim: Optional[int] = None) -> ModelSpec:
    first = split.in_federation[0]
    d = first.features.shape[1]
    if first.task == "regression":
        out = 1 if first.labels.ndim == 1 else first.labels.shape[1]
        return ModelSpec("linear_regression", d, out)
    if hidden_dim:
        return ModelSpec("mlp1", d, first.num_classes, hidden_dim)
    return ModelSpec("softmax_classifier", d, first.num_classes)


def evaluate(spec: ModelSpec, params: ParameterVector, datasets: Sequence[ClientDataset]) -> float:
    """Pooled task metric: accuracy, MSE, or ROC-AUC for binary tasks."""
    x = np.concatenate([d.features for d in datasets])
    y = np.concatenate([d.labels for d in datasets])
    out = predict(spec, params, x)
    task = datasets[0].task
    if task == "regression":
        return metrics.mse(out, y.reshape(out.shape))
    if task == "binary":
        return metrics.roc_auc(out[:, 1], y)
    return metrics.accuracy(out.argmax(axis=1), y)


@dataclass
class ExperimentResult:
    records: List[RoundRecord]
    state: FederationState
    topologies: Dict[int, TopologyResult] = field(default_factory=dict)

    @property
    def final_params(self) -> ParameterVector:
        return self.state.global_params


def run_experiment(cfg: StrategyConfig, split: FederationSplit, seed: int = 0,
                   spec: Optional[ModelSpec] = None, executor=None,
                   stop_after: Optional[int] = None) -> ExperimentResult:
    """Warm-start round followed by ``cfg.rounds`` rounds.

    IF and OOF metrics are computed at round 0, every ``eval_interval``
    rounds, and at the last round. ``stop_after`` truncates the run early
    (used to inspect the state at a given round).
    """
    datasets = split.in_federation
    spec = spec or default_spec(split)
    theta0 = init_params(spec, np.random.SeedSequence([seed, _INIT]))
    state = FederationState.initial(spec, datasets, theta0)
    last = cfg.rounds if stop_after is None else min(cfg.rounds, stop_after)

    def scored(rec):
        if rec.round % cfg.eval_interval == 0 or rec.round == last:
            rec.if_metric = evaluate(spec, state.global_params, datasets)
            if split.out_of_federation:
                rec.oof_metric = evaluate(spec, state.global_params, split.out_of_federation)
        if rec.topology_refreshed:
            topologies[rec.round] = state.topology
        return rec

    topologies: Dict[int, TopologyResult] = {}
    records = [scored(warm_start(state, datasets, cfg, seed, executor))]
    for _ in range(last):
        records.append(scored(run_round(state, datasets, cfg, seed, executor)))
    return ExperimentResult(records, state, topologies)

