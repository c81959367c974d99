"""Federated learning simulation with topology-aware distributionally robust weighting."""

from .params import ParameterVector
from .models import LocalTrainConfig, ModelSpec
from .robust import DualConfig
from .federation import StrategyConfig, TopologyConfig, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ParameterVector", "ModelSpec", "LocalTrainConfig", "DualConfig",
    "StrategyConfig", "TopologyConfig", "run_experiment", "__version__",
]
