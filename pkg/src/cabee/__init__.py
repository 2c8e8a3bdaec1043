"""Clustered analogy-based expectation equilibria.

Players facing a family of games pool them into a bounded number of
categories so as to predict opponent behavior well, and best-respond to the
per-category average play.  This package computes equilibria of that loop:
fixed analogy partitions (abee), the clustering side (clustering), the
joint fixed point including mixtures over partitions (equilibrium), two
population learning dynamics whose rest points are those fixed points
(learning), four worked game families (applications), and a scenario-file
CLI (cli).
"""

__version__ = "0.1.0"

from .clustering import KL, L2, Divergence, mean_divergence  # noqa: F401
from .env import GameEnvironment, expected_utility, make_environment  # noqa: F401
from .abee import PartitionDistribution, StrategyProfile  # noqa: F401
from .equilibrium import EquilibriumCandidate, cd_abee_search, cd_abee_verify  # noqa: F401
from .partitions import Partition, enumerate_partitions  # noqa: F401
