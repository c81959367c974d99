"""Client weights that lean toward the worst-off clients.

``lam`` is a distribution over clients. Each step moves it toward clients
with higher loss, while a KL penalty of strength ``q`` pulls it back to a
prior. With ``q = 0`` it drifts freely; a large ``q`` pins it to the prior.
"""

import numpy as np

from topofl.robust import DualConfig, kl_divergence, project_simplex, sample_clients, update_lambda

# %% Euclidean projection onto the simplex
print(project_simplex([1.2, 0.3, -0.5]))   # [0.95 0.05 0.  ]

losses = np.array([0.2, 0.4, 1.5, 0.3])
prior = np.array([0.1, 0.4, 0.1, 0.4])

# %% twenty ascent steps at several regularization strengths
for q in (0.0, 0.1, 1.0, 10.0):
    cfg = DualConfig(q=q, eta_lambda=0.02)
    lam = np.full(4, 0.25)
    for _ in range(20):
        lam = update_lambda(lam, losses, prior, cfg)
    print(f"q={q:<5} lam={np.round(lam, 3)} KL to prior={kl_divergence(lam, prior):.3f}")

# The step is stable only while eta_lambda * q < 2 * min(prior).
# Above that the iterates oscillate instead of settling.

# %% sampling clients in proportion to lam
draws = np.concatenate([sample_clients(lam, 2, seed) for seed in range(2000)])
print("sampling frequency:", np.round(np.bincount(draws, minlength=4) / draws.size, 3))
