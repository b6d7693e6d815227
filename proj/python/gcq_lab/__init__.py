"""Python access to the GCQ lane-changing lab."""

import json

from ._gcq import (
    ConfigError,
    DigestMismatchError,
    Env,
    FormatError,
    GcqError,
    Model,
    canonical_config,
    config_digest,
    default_config,
    gradcheck,
    structural_digest,
    train,
)
from ._gcq import evaluate as _evaluate


def evaluate(checkpoint, baselines=("rule_based", "random"), inflows=(0.1, 0.2, 0.3, 0.4, 0.5),
             episodes=10, seed=1, workers=1):
    """Density sweep of a checkpoint; returns the parsed report."""
    return json.loads(_evaluate(checkpoint, list(baselines), list(inflows), episodes, seed, workers))


__all__ = [
    "ConfigError",
    "DigestMismatchError",
    "Env",
    "FormatError",
    "GcqError",
    "Model",
    "canonical_config",
    "config_digest",
    "default_config",
    "evaluate",
    "gradcheck",
    "structural_digest",
    "train",
]
