"""Multi-agent PPO user association."""
from .observe import ObservationSpec, build_observations, nearest_neighbors
from .policy import Adam, Mlp, PolicyModel, config_digest, masked_distribution
from .ppo import (
    RolloutBatch,
    TrainConfig,
    UpdateDiagnostics,
    discounted_return,
    ppo_update,
    returns_vector,
)
from .training import AssociationEnv, EvalReport, MetricSummary, TrainResult, evaluate, train

__all__ = [
    "Adam",
    "AssociationEnv",
    "EvalReport",
    "MetricSummary",
    "Mlp",
    "ObservationSpec",
    "PolicyModel",
    "RolloutBatch",
    "TrainConfig",
    "TrainResult",
    "UpdateDiagnostics",
    "build_observations",
    "config_digest",
    "discounted_return",
    "evaluate",
    "masked_distribution",
    "nearest_neighbors",
    "ppo_update",
    "returns_vector",
    "train",
]
