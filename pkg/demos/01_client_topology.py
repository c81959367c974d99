"""Client topology from model weights.

Ten clients train the same model from the same starting point. The first
five each see a differently rotated dataset; the last five share one
rotation. Their weights alone are enough to tell the groups apart.
"""

import numpy as np

from topofl.data import sample_rotated_domain
from topofl.models import LocalTrainConfig, ModelSpec, init_params, local_train
from topofl.topology import (METRICS, build_epsilon_graph, build_similarity_matrix, centrality,
                             prior_from_centrality, topology_to_dot)

rng = np.random.default_rng(0)
spec = ModelSpec("softmax_classifier", input_dim=2, output_dim=3)
theta0 = init_params(spec, seed=0)
cfg = LocalTrainConfig(epochs=5, batch_size=8, eta_theta=0.1)

angles = [0, 45, 90, 135, 180] + [270] * 5
models = []
for angle in angles:
    data = sample_rotated_domain(40, 3, angle, 0.1, rng)
    params, _ = local_train(spec, theta0, data, cfg)
    models.append(params)

# %% similarity to the last client under each metric
for metric in METRICS:
    sim = build_similarity_matrix(models, metric)
    print(f"{metric:>6}: " + " ".join(f"{s:.2f}" for s in sim.scores[9]))

# %% keep strong edges, then score each client by betweenness
sim = build_similarity_matrix(models, "dot")
graph = build_epsilon_graph(sim, epsilon=0.4)
cent = centrality(graph, "betweenness")
prior = prior_from_centrality(cent)
print("edges:", len(list(graph.edges())))
print("betweenness:", np.round(cent.values, 3))
print("prior:", np.round(prior, 3))

print(topology_to_dot(graph, [f"c{i + 1}" for i in range(10)])[:300], "...")
