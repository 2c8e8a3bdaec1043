"""Population learning dynamics whose rest points are clustered equilibria.

Model 1: each period, fresh subjects see the opponent population's last
aggregate play per game (optionally with measurement noise), cluster it
into at most K categories, and best-respond to their class prototypes
(optionally with payoff noise).  Model 2: dynasties inherit a partition and
prototypes, best-respond to them, then re-sort the games around the
inherited prototypes and pass the result on.

At zero noise the steps are set-valued at ties; the "incumbent" tie-break
selects the current state whenever it is admissible, so a state is a rest
point of the zero-noise step exactly when it is a clustered distributional
equilibrium of the matching mode (global for model 1, local for model 2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .abee import PartitionDistribution, StrategyProfile, aggregate, consistent_expectation
from .clustering import (
    KULLBACK_LEIBLER,
    SQUARED_MEAN_DIFFERENCE,
    Divergence,
    divergence_eval,
    global_cluster,
)
from .env import GameEnvironment, pure_payoffs_against
from .equilibrium import GLOBAL, LOCAL, EquilibriumCandidate, cd_abee_verify
from .partitions import Partition, partition_list

STATE_TOL = 1e-9


@dataclass(frozen=True)
class PerturbationSpec:
    """Noise scales and sources for the simulated dynamics.

    payoff_noise draws action-payoff perturbations on [0, 1]; measurement
    noise draws interior points of the opponent simplex mixed into each
    observation.  Both default to uniform draws and can be swapped for any
    callable with the same signature.
    """

    epsilon: float = 0.0
    seed: int = 0
    payoff_noise: Callable[[np.random.Generator, tuple], np.ndarray] | None = None
    measurement_noise: Callable[[np.random.Generator, tuple], np.ndarray] | None = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("noise scale must be nonnegative")

    def draw_payoff(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.payoff_noise is not None:
            return self.payoff_noise(rng, shape)
        return rng.uniform(0.0, 1.0, size=shape)

    def draw_measurement(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.measurement_noise is not None:
            return self.measurement_noise(rng, shape)
        draws = rng.standard_exponential(shape)
        return draws / draws.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class DynastyRecord:
    partition: Partition
    prototypes: np.ndarray  # (n_classes, n_opponent_actions)
    strategy: np.ndarray  # (n_games, n_own_actions)
    share: float


@dataclass
class PopulationState:
    """Empirical population snapshot for both roles."""

    lams: tuple[PartitionDistribution, PartitionDistribution]
    profile: StrategyProfile
    aggregates: tuple[np.ndarray, np.ndarray]
    t: int = 0
    dynasties: tuple[list[DynastyRecord], list[DynastyRecord]] | None = None
    events: list[str] = field(default_factory=list)

    def lam_weights(self, player: int) -> dict:
        lam = self.lams[player]
        return {p: w for p, w in zip(lam.partitions, lam.weights)}


def state_from_candidate(env: GameEnvironment, candidate: EquilibriumCandidate) -> PopulationState:
    """Population state carrying a candidate's strategies, shares and the
    consistent prototypes per support partition."""
    aggs = aggregate(candidate.profile, candidate.lams)
    dynasties: tuple[list, list] = ([], [])
    for player in (0, 1):
        lam = candidate.lams[player]
        for part, w in zip(lam.partitions, lam.weights):
            protos = consistent_expectation(env, part, aggs[1 - player])
            dynasties[player].append(
                DynastyRecord(part, protos, np.asarray(candidate.profile.plays[player][part], dtype=float), w)
            )
    return PopulationState(
        lams=candidate.lams,
        profile=candidate.profile,
        aggregates=aggs,
        dynasties=dynasties,
    )


def state_distance(s1: PopulationState, s2: PopulationState) -> float:
    """Worst coordinate change between two states; inf on support changes."""
    worst = 0.0
    for player in (0, 1):
        worst = max(worst, float(np.abs(s1.aggregates[player] - s2.aggregates[player]).max()))
        w1, w2 = s1.lam_weights(player), s2.lam_weights(player)
        if set(w1) != set(w2):
            return float("inf")
        worst = max(worst, max(abs(w1[p] - w2[p]) for p in w1))
        for p in w1:
            worst = max(
                worst,
                float(np.abs(s1.profile.plays[player][p] - s2.profile.plays[player][p]).max()),
            )
    return worst


# ---------------------------------------------------------------------------
# model 1: raw data, clustering, best replies
# ---------------------------------------------------------------------------


def _exact_model1_step(
    env: GameEnvironment,
    state: PopulationState,
    capacities: tuple[int, int],
    d: Divergence,
    tie_break: str,
) -> PopulationState:
    """Zero-noise population step.

    Clustering ties and payoff indifferences are broken by the policy:
    "incumbent" keeps the current shares and strategies whenever they are
    admissible, "uniform" splits evenly.
    """
    new_lams = []
    new_plays: tuple[dict, dict] = ({}, {})
    for player in (0, 1):
        data = state.aggregates[1 - player]
        winners, _ = global_cluster(data, env.prior, capacities[player], d)
        winner_keys = {p.key() for p in winners}
        lam = state.lams[player]
        if tie_break == "incumbent" and all(p.key() in winner_keys for p in lam.support):
            new_lam = lam
        else:
            w = 1.0 / len(winners)
            new_lam = PartitionDistribution(tuple(winners), (w,) * len(winners))
        for part in new_lam.support:
            beta = consistent_expectation(env, part, data)
            old = state.profile.plays[player].get(part)
            strat = np.zeros((env.n_games, env.n_actions(player)))
            for ci, cls in enumerate(part.classes):
                for g in cls:
                    pays = pure_payoffs_against(env, player, g, beta[ci])
                    best = pays.max()
                    replies = np.flatnonzero(pays >= best - STATE_TOL)
                    if (
                        tie_break == "incumbent"
                        and old is not None
                        and old[g][np.setdiff1d(np.arange(len(pays)), replies)].sum() <= STATE_TOL
                    ):
                        strat[g] = old[g]
                    else:
                        strat[g, replies] = 1.0 / len(replies)
            new_plays[player][part] = strat
        new_lams.append(new_lam)
    profile = StrategyProfile(plays=new_plays)
    lams = (new_lams[0], new_lams[1])
    return PopulationState(
        lams=lams,
        profile=profile,
        aggregates=aggregate(profile, lams),
        t=state.t + 1,
        dynasties=state.dynasties,
    )


def _dispersion_matrix(
    s: np.ndarray, prior: np.ndarray, parts, d: Divergence
) -> np.ndarray:
    """Dispersion of every partition for every subject's perturbed data.

    s has shape (N, n_games, n_actions); output (N, len(parts)).
    """
    if d.kind == SQUARED_MEAN_DIFFERENCE:
        v = np.asarray(d.action_values)
        s = (s @ v)[:, :, None]
        d = Divergence("squared-euclidean")
    if d.kind == KULLBACK_LEIBLER:
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)
        point = plogp.sum(axis=2) @ prior
    else:
        point = (s**2).sum(axis=2) @ prior
    out = np.empty((s.shape[0], len(parts)))
    for pi, part in enumerate(parts):
        ct = np.zeros(s.shape[0])
        for cls in part.classes:
            idx = list(cls)
            w = prior[idx].sum()
            proto = np.einsum("g,nga->na", prior[idx], s[:, idx, :]) / w
            if d.kind == KULLBACK_LEIBLER:
                with np.errstate(divide="ignore", invalid="ignore"):
                    plp = np.where(proto > 0, proto * np.log(np.where(proto > 0, proto, 1.0)), 0.0)
                ct += w * plp.sum(axis=1)
            else:
                ct += w * (proto**2).sum(axis=1)
        out[:, pi] = point - ct
    return out


def _lloyd_assignments(
    s: np.ndarray, prior: np.ndarray, k: int, d: Divergence, rng: np.random.Generator, rounds: int = 25
) -> np.ndarray:
    """Vectorized Lloyd runs, one per subject, seeded at random data points.

    Returns per-subject game assignments (N, n_games); empty classes simply
    stop attracting games, which matches dropping them.
    """
    n_sub, n_games, n_act = s.shape
    values = None
    work = s
    if d.kind == SQUARED_MEAN_DIFFERENCE:
        values = np.asarray(d.action_values)
        work = (s @ values)[:, :, None]
        d = Divergence("squared-euclidean")
    seeds = np.stack([rng.choice(n_games, size=min(k, n_games), replace=False) for _ in range(n_sub)])
    protos = np.take_along_axis(work, seeds[:, :, None], axis=1)  # (N, k, n_act')
    assign = np.zeros((n_sub, n_games), dtype=int)
    for _ in range(rounds):
        if d.kind == KULLBACK_LEIBLER:
            with np.errstate(divide="ignore", invalid="ignore"):
                logp = np.where(protos > 0, np.log(np.where(protos > 0, protos, 1.0)), -np.inf)
            cross = np.einsum("nga,nka->ngk", work, logp)
            with np.errstate(invalid="ignore"):
                ent = np.where(work > 0, work * np.log(np.where(work > 0, work, 1.0)), 0.0).sum(axis=2)
            dist = ent[:, :, None] - cross
            dist = np.where(np.isnan(dist), np.inf, dist)
        else:
            diff = work[:, :, None, :] - protos[:, None, :, :]
            dist = (diff**2).sum(axis=3)
        new_assign = dist.argmin(axis=2)
        for c in range(protos.shape[1]):
            mask = (new_assign == c).astype(float) * prior[None, :]
            mass = mask.sum(axis=1)
            upd = mass > 0
            if upd.any():
                protos[upd, c, :] = (
                    np.einsum("ng,nga->na", mask[upd], work[upd]) / mass[upd, None]
                )
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign


def model1_step(
    env: GameEnvironment,
    state: PopulationState,
    capacities: tuple[int, int],
    d: Divergence,
    perturbation: PerturbationSpec,
    n_subjects: int = 10_000,
    tie_break: str = "uniform",
    clustering: str = "global",
    rng: np.random.Generator | None = None,
) -> PopulationState:
    """One period of the raw-data dynamics.

    With zero noise the step is deterministic given the tie-break policy
    and n_subjects is irrelevant.  With noise, n_subjects independent
    draws per role are clustered (exhaustively, or by Lloyd runs when
    clustering="lloyd") and best-respond; the new state holds empirical
    frequencies.
    """
    if perturbation.epsilon == 0.0:
        return _exact_model1_step(env, state, capacities, d, tie_break)
    rng = rng or np.random.default_rng((perturbation.seed, state.t))
    eps = perturbation.epsilon
    new_lams = []
    new_plays: tuple[dict, dict] = ({}, {})
    new_aggs = []
    for player in (0, 1):
        data = state.aggregates[1 - player]
        n_act_opp = data.shape[1]
        n_act_own = env.n_actions(player)
        eta = perturbation.draw_measurement(rng, (n_subjects, env.n_games, n_act_opp))
        s = (data[None, :, :] + eps * eta) / (1.0 + eps)
        parts = partition_list(env.n_games, capacities[player])
        if clustering == "lloyd":
            assign = _lloyd_assignments(s, env.prior, capacities[player], d, rng)
            canon = {p.assignment(): pi for pi, p in enumerate(parts)}
            choice = np.array(
                [canon[Partition.from_assignment(a).assignment()] for a in assign]
            )
        else:
            disp = _dispersion_matrix(s, env.prior, parts, d)
            choice = disp.argmin(axis=1)
        counts = np.bincount(choice, minlength=len(parts))
        # subjects' prototypes per game: class means of their own draw under
        # their chosen partition
        proto_by_game = np.empty_like(s)
        for pi in np.flatnonzero(counts):
            members = choice == pi
            for cls in parts[pi].classes:
                idx = list(cls)
                w = env.prior[idx]
                proto = np.einsum("g,nga->na", w, s[members][:, idx, :]) / w.sum()
                for g in idx:
                    proto_by_game[members, g, :] = proto
        rho = perturbation.draw_payoff(rng, (n_subjects, env.n_games, n_act_own))
        utils = np.einsum("abg,ngb->nga", env.payoffs[player], proto_by_game) + eps * rho
        actions = utils.argmax(axis=2)  # (N, n_games)
        onehot = np.eye(n_act_own)[actions]  # (N, n_games, n_act_own)
        new_aggs.append(onehot.mean(axis=0))
        support, weights = [], []
        for pi in np.flatnonzero(counts):
            support.append(parts[pi])
            weights.append(counts[pi] / n_subjects)
            new_plays[player][parts[pi]] = onehot[choice == pi].mean(axis=0)
        new_lams.append(PartitionDistribution(tuple(support), tuple(weights)))
    lams = (new_lams[0], new_lams[1])
    return PopulationState(
        lams=lams,
        profile=StrategyProfile(plays=new_plays),
        aggregates=(new_aggs[0], new_aggs[1]),
        t=state.t + 1,
        dynasties=state.dynasties,
    )


@dataclass
class StationarityReport:
    """Largest step-to-step movement over the last quarter of a run."""

    aggregate_drift: float
    lam_drift: float


def model1_run(
    env: GameEnvironment,
    state: PopulationState,
    steps: int,
    capacities: tuple[int, int],
    d: Divergence,
    perturbation: PerturbationSpec,
    n_subjects: int = 10_000,
    tie_break: str = "uniform",
    clustering: str = "global",
) -> tuple[list[PopulationState], StationarityReport]:
    """Iterate model 1, returning the trajectory and a drift report."""
    rng = np.random.default_rng(perturbation.seed)
    traj = [state]
    for _ in range(steps):
        state = model1_step(
            env, state, capacities, d, perturbation, n_subjects, tie_break, clustering, rng
        )
        traj.append(state)
    tail = max(2, len(traj) // 4)
    agg_drift = 0.0
    lam_drift = 0.0
    for prev, cur in zip(traj[-tail:-1], traj[-tail + 1 :]):
        for player in (0, 1):
            agg_drift = max(
                agg_drift, float(np.abs(cur.aggregates[player] - prev.aggregates[player]).max())
            )
            wp, wc = prev.lam_weights(player), cur.lam_weights(player)
            keys = set(wp) | set(wc)
            lam_drift = max(
                lam_drift, max(abs(wp.get(k, 0.0) - wc.get(k, 0.0)) for k in keys)
            )
    return traj, StationarityReport(agg_drift, lam_drift)


# ---------------------------------------------------------------------------
# model 2: inherited categories and prototypes
# ---------------------------------------------------------------------------


def model2_step(
    env: GameEnvironment,
    state: PopulationState,
    d: Divergence,
) -> PopulationState:
    """One generation of the inherited-categories dynamics.

    Stage 1: every dynasty best-responds game by game to its inherited
    prototypes (at indifference the inherited strategy stands when still
    optimal).  Stage 2: dynasties observe the cross-dynasty aggregates,
    reassign each game to the nearest inherited prototype (ties keep the
    current class), and recompute prototypes consistently with the new
    aggregate.  A prototype whose class empties is dropped and logged.
    """
    if state.dynasties is None:
        raise ValueError("model 2 needs per-dynasty records; build the state from a candidate")
    events: list[str] = []
    # stage 1: best replies to inherited prototypes
    stage1: tuple[list, list] = ([], [])
    for player in (0, 1):
        for rec in state.dynasties[player]:
            strat = np.zeros_like(rec.strategy)
            for ci, cls in enumerate(rec.partition.classes):
                for g in cls:
                    pays = pure_payoffs_against(env, player, g, rec.prototypes[ci])
                    best = pays.max()
                    replies = np.flatnonzero(pays >= best - STATE_TOL)
                    off = np.setdiff1d(np.arange(len(pays)), replies)
                    if rec.strategy[g][off].sum() <= STATE_TOL:
                        strat[g] = rec.strategy[g]
                    else:
                        strat[g, replies] = 1.0 / len(replies)
            stage1[player].append(strat)
    aggs = tuple(
        sum(rec.share * strat for rec, strat in zip(state.dynasties[pl], stage1[pl]))
        for pl in (0, 1)
    )
    # stage 2: reassign games to nearest inherited prototype, refresh
    new_dyn: tuple[list, list] = ([], [])
    for player in (0, 1):
        opp = aggs[1 - player]
        for rec, strat in zip(state.dynasties[player], stage1[player]):
            assign = np.empty(env.n_games, dtype=int)
            for g in range(env.n_games):
                dists = np.array(
                    [divergence_eval(d, opp[g], proto) for proto in rec.prototypes]
                )
                finite_min = dists.min()
                near = np.flatnonzero(dists <= finite_min + 1e-12)
                cur = rec.partition.class_of(g)
                assign[g] = cur if cur in near else near[0]
            live = sorted(set(int(a) for a in assign))
            if len(live) < rec.partition.n_classes:
                events.append(
                    f"t={state.t}: dynasty of player {player} dropped "
                    f"{rec.partition.n_classes - len(live)} class(es)"
                )
            part = Partition.from_assignment(assign)
            protos = consistent_expectation(env, part, opp)
            new_dyn[player].append(DynastyRecord(part, protos, strat, rec.share))
    # population shares per partition
    new_lams = []
    new_plays: tuple[dict, dict] = ({}, {})
    for player in (0, 1):
        weights: dict[Partition, float] = {}
        mix: dict[Partition, np.ndarray] = {}
        for rec in new_dyn[player]:
            weights[rec.partition] = weights.get(rec.partition, 0.0) + rec.share
            mix[rec.partition] = (
                mix.get(rec.partition, 0.0) + rec.share * rec.strategy
            )
        for part, w in weights.items():
            new_plays[player][part] = mix[part] / w
        items = sorted(weights.items(), key=lambda kv: kv[0].key())
        new_lams.append(
            PartitionDistribution(tuple(p for p, _ in items), tuple(w for _, w in items))
        )
    return PopulationState(
        lams=(new_lams[0], new_lams[1]),
        profile=StrategyProfile(plays=new_plays),
        aggregates=aggs,
        t=state.t + 1,
        dynasties=new_dyn,
        events=events,
    )


def _dynasty_distance(s1: PopulationState, s2: PopulationState) -> float:
    if s1.dynasties is None or s2.dynasties is None:
        return float("inf")
    worst = 0.0
    for player in (0, 1):
        if len(s1.dynasties[player]) != len(s2.dynasties[player]):
            return float("inf")
        for r1, r2 in zip(s1.dynasties[player], s2.dynasties[player]):
            if r1.partition != r2.partition:
                return float("inf")
            worst = max(worst, float(np.abs(r1.prototypes - r2.prototypes).max()))
            worst = max(worst, float(np.abs(r1.strategy - r2.strategy).max()))
            worst = max(worst, abs(r1.share - r2.share))
    return worst


def steady_state_check(
    env: GameEnvironment,
    state: PopulationState,
    mode: str,
    d: Divergence,
    capacities: tuple[int, int],
) -> tuple[bool, dict]:
    """Whether the zero-noise step of the mode's dynamics fixes the state.

    Global mode runs the exact model-1 step, local mode the model-2 step,
    both under the incumbent tie-break.  When steady, the state is also
    classified as a clustered distributional equilibrium per mode.
    """
    if mode == GLOBAL:
        nxt = _exact_model1_step(env, state, capacities, d, "incumbent")
        dist = state_distance(state, nxt)
    elif mode == LOCAL:
        nxt = model2_step(env, state, d)
        dist = max(state_distance(state, nxt), _dynasty_distance(state, nxt))
    else:
        raise ValueError(f"unknown mode {mode}")
    steady = dist <= STATE_TOL
    info = {"distance": dist}
    if steady:
        for check_mode in (LOCAL, GLOBAL):
            cand = EquilibriumCandidate(state.lams, state.profile, check_mode, d)
            info[f"is_{check_mode}_cdabee"] = cd_abee_verify(env, cand, capacities).ok
    return steady, info


# ---------------------------------------------------------------------------
# trajectory export
# ---------------------------------------------------------------------------


def write_trajectory_csv(actions_path, shares_path, trajectory, env: GameEnvironment) -> None:
    """Two CSVs: per-game action frequencies and partition shares over time."""
    with open(actions_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "role", "game", "action", "frequency"])
        for state in trajectory:
            for player in (0, 1):
                agg = state.aggregates[player]
                for g in range(env.n_games):
                    for a in range(agg.shape[1]):
                        writer.writerow([state.t, player, g, a, f"{agg[g, a]:.12g}"])
    with open(shares_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "role", "partition", "share"])
        for state in trajectory:
            for player in (0, 1):
                for part, w in zip(state.lams[player].partitions, state.lams[player].weights):
                    writer.writerow([state.t, player, str(part), f"{w:.12g}"])
