"""FedAvg, FedProx, DRFL and topology-aware FL on a leave-one-domain-out task.

Four rotated domains of five clients; the last domain never trains and
measures how well the global model transfers.
"""

from dataclasses import replace

import numpy as np

from topofl.data import make_rotated_domains
from topofl.federation import StrategyConfig, run_experiment
from topofl.models import LocalTrainConfig

base = StrategyConfig("fedavg", m=5, rounds=50, eval_interval=50,
                      local=LocalTrainConfig(epochs=1, batch_size=8, eta_theta=0.1, prox_mu=0.5))

for name in ("fedavg", "fedprox", "drfl", "tfl"):
    cfg = replace(base, strategy=name)
    finals = []
    for seed in range(5):
        split = make_rotated_domains(seed=seed)
        last = run_experiment(cfg, split, seed).records[-1]
        finals.append((last.if_metric, last.oof_metric))
    finals = np.array(finals)
    print(f"{name:>8}: IF {finals[:, 0].mean():.3f}  OOF {finals[:, 1].mean():.3f} "
          f"(+/- {finals[:, 1].std(ddof=1):.3f})")

# %% where did lam end up?
res = run_experiment(replace(base, strategy="tfl"), make_rotated_domains(seed=0), 0)
print("final lam:", np.round(res.records[-1].lam, 3))
print("final prior:", np.round(res.records[-1].prior, 3))
