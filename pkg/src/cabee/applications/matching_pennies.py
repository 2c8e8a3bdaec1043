"""Three matching-pennies games with stake parameters a < b < c.

The row player wants to match (U against L pays 1+x), the column player
wants to mismatch.  With two categories for the row player no pure
clustered equilibrium exists; the mixed-categorization equilibrium makes
the column player's play equally spaced across the games so that two
bundlings tie, while the row population splits evenly between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..abee import PartitionDistribution, StrategyProfile, abee_solve
from ..clustering import L2
from ..env import GameEnvironment, make_environment
from ..equilibrium import (
    GLOBAL,
    EquilibriumCandidate,
    cabee_verify,
    cd_abee_verify,
)
from ..partitions import Partition
from . import HypothesesUnmet


@dataclass(frozen=True)
class MatchingPenniesSpec:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not 0 < self.a < self.b < self.c < 2:
            raise ValueError("stakes must satisfy 0 < a < b < c < 2")

    @property
    def stakes(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


def build_matching_pennies(spec: MatchingPenniesSpec) -> GameEnvironment:
    """Environment with payoff rows U: (1+x, 0), D: (0, 1) for the row
    player and the fixed mismatching pattern for the column player."""
    pr = np.zeros((2, 2, 3))
    pc = np.zeros((2, 2, 3))
    for g, x in enumerate(spec.stakes):
        pr[:, :, g] = [[1 + x, 0], [0, 1]]
        pc[:, :, g] = [[0, 1], [1, 0]]
    return make_environment(
        [1 / 3] * 3,
        pr,
        pc,
        game_labels=("a", "b", "c"),
        action_labels=(("U", "D"), ("L", "R")),
    )


def row_indifference_point(x: float) -> float:
    """Column L-probability at which the row player is indifferent in G_x."""
    return 1.0 / (2.0 + x)


def two_class_row_partitions() -> list[Partition]:
    from ..partitions import partition_list

    return [p for p in partition_list(3, 2) if p.n_classes == 2]


def solve_matching_pennies_cdabee(spec: MatchingPenniesSpec) -> EquilibriumCandidate:
    """The mixed-categorization equilibrium of the three-game family.

    The row player mixes evenly between isolating the lowest-stake game and
    isolating the highest-stake game.  Under the first partition she is
    indifferent exactly in the high game, under the second exactly in the
    low game, which pins the bundled expectations at 1/(2+c) and 1/(2+a)
    and yields equally spaced column mixtures; the aggregate row play is
    then 1/2 everywhere, keeping the column player mixing.
    """
    t_a = row_indifference_point(spec.a)
    t_c = row_indifference_point(spec.c)
    # bundle expectations: ({a,b} under the c-isolating partition) = t_a and
    # ({b,c} under the a-isolating partition) = t_c, with p_b midway
    p_a = (3 * t_a - t_c) / 2
    p_c = (3 * t_c - t_a) / 2
    p_b = (p_a + p_c) / 2
    col = np.array([p_a, p_b, p_c])
    if np.any(col <= 0) or np.any(col >= 1):
        raise HypothesesUnmet(f"column mixture out of range: {col}")
    if not (p_a > t_a and p_c < t_c):
        raise HypothesesUnmet("strict best replies in the isolated games fail")
    env = build_matching_pennies(spec)
    an_low = Partition.from_classes(3, [(0,), (1, 2)])
    an_high = Partition.from_classes(3, [(2,), (0, 1)])
    finest = Partition.finest(3)
    u, dn = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    profile = StrategyProfile(
        plays=(
            {
                an_low: np.stack([u, dn, u]),
                an_high: np.stack([dn, u, dn]),
            },
            {finest: np.stack([col, 1 - col], axis=1)},
        )
    )
    lams = (
        PartitionDistribution((an_low, an_high), (0.5, 0.5)),
        PartitionDistribution.degenerate(finest),
    )
    candidate = EquilibriumCandidate(lams, profile, GLOBAL, L2)
    report = cd_abee_verify(env, candidate, capacities=(2, 3))
    if not report.ok:
        raise HypothesesUnmet(f"construction failed verification: {report}")
    return candidate


def analytic_two_class_abee(spec: MatchingPenniesSpec, partition: Partition):
    """The unique equilibrium for a fixed two-class row partition.

    With the bundle {x1, x2} (x1 < x2) the bundled expectation must sit at
    the x1 indifference point: the row mixes 1/2 in x1, plays U in x2, and
    the column plays 2/(2+x1) in x1, 0 in x2, and the single-game mixture in
    the isolated game.
    """
    (bundle, single) = sorted(partition.classes, key=len, reverse=True)
    if len(bundle) != 2 or len(single) != 1:
        raise ValueError("expected one two-game class and one singleton")
    x1, x2 = bundle
    x3 = single[0]
    stakes = spec.stakes
    col = np.zeros(3)
    col[x1] = 2.0 / (2.0 + stakes[x1])
    col[x2] = 0.0
    col[x3] = row_indifference_point(stakes[x3])
    row = np.full(3, 0.5)
    row[x2] = 1.0
    return row, col


def two_class_refutation(
    spec: MatchingPenniesSpec, modes: tuple[str, ...] = ("local", "global")
) -> dict:
    """Check every two-class row partition's equilibrium against clustering.

    Returns, per partition, the solver output, its match with the analytic
    structure, and the clustered-equilibrium verdicts per mode.
    """
    env = build_matching_pennies(spec)
    finest = Partition.finest(3)
    out = {}
    for part in two_class_row_partitions():
        profiles = abee_solve(env, (part, finest))
        row_ref, col_ref = analytic_two_class_abee(spec, part)
        matches = []
        verdicts = {mode: [] for mode in modes}
        for prof in profiles:
            row = prof.single(0)[:, 0]
            col = prof.single(1)[:, 0]
            matches.append(
                float(max(np.abs(row - row_ref).max(), np.abs(col - col_ref).max()))
            )
            for mode in modes:
                rep = cabee_verify(env, (part, finest), prof, mode, L2, capacities=(2, 3))
                verdicts[mode].append(rep.ok)
        out[part] = {
            "n_equilibria": len(profiles),
            "analytic_gap": min(matches) if matches else None,
            "verdicts": verdicts,
        }
    return out
