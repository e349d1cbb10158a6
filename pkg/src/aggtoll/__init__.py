"""Aggregate-based congestion pricing for heterogeneous population games.

The package builds a routing game from a directed network and a set of
groups with different values of time, prices it with no toll, the adaptive
Pigouvian toll or the aggregate toll, integrates replicator dynamics and
checks stability of the resulting rest points.
"""

from .errors import AggTollError
from .game import Game, GroupProfile, social_optimum, social_welfare
from .network import NetworkSpec, enumerate_paths
from .pricing import Policy, PolicyKind
from .dynamics import IntegratorConfig, integrate

__all__ = [
    "AggTollError",
    "Game",
    "GroupProfile",
    "IntegratorConfig",
    "NetworkSpec",
    "Policy",
    "PolicyKind",
    "enumerate_paths",
    "integrate",
    "social_optimum",
    "social_welfare",
]
__version__ = "0.1.0"
