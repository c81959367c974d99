"""The three model kinds, their gradients, and local SGD."""

import numpy as np

from topofl.models import LocalTrainConfig, ModelSpec, gradient, init_params, local_train, loss

rng = np.random.default_rng(1)
x = rng.normal(size=(64, 3))
labels = (x[:, 0] + x[:, 1] > 0).astype(int)

specs = [ModelSpec("linear_regression", 3, 1),
         ModelSpec("softmax_classifier", 3, 2),
         ModelSpec("mlp1", 3, 2, hidden_dim=8, activation="tanh")]

# %% analytic gradient against a central difference, one coordinate each
for spec in specs:
    y = x @ [1.0, -2.0, 0.5] if spec.task == "regression" else labels
    p = init_params(spec, seed=0)
    h = 1e-6
    e = np.zeros(len(p))
    e[0] = h
    fd = (loss(spec, p.with_values(p.values + e), (x, y))
          - loss(spec, p.with_values(p.values - e), (x, y))) / (2 * h)
    print(f"{spec.kind:>18}: {len(p):3d} params, d/dtheta0 analytic "
          f"{gradient(spec, p, (x, y)).values[0]:+.6f} numeric {fd:+.6f}")

# %% local training, with and without a proximal pull toward the start
spec = specs[2]
start = init_params(spec, seed=0)
for mu in (0.0, 1.0):
    params, final = local_train(spec, start, (x, labels),
                                LocalTrainConfig(epochs=20, batch_size=16, eta_theta=0.2, prox_mu=mu),
                                anchor=start if mu else None)
    drift = np.linalg.norm(params.values - start.values)
    print(f"prox_mu={mu}: last-epoch loss {final:.3f}, distance from start {drift:.3f}")
