"""MDP surface: actions, costs and rewards, implicit transitions, predicates.

A transition samples one historical record from the current belief and
copies that record's values for the batch assays, so cross-assay
correlation is preserved.  The stop action is always legal; premature
stopping is discouraged by the planner's constraint penalties rather than
by restricting the action set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from assayplan.belief import BeliefContext, BeliefWeights, CandidateState
from assayplan.data import Dataset


class EnvError(Exception):
    pass


@dataclass(frozen=True, order=True)
class ActionBatch:
    """A batch of unmeasured assays, or the end-of-experiment action."""

    assays: tuple[str, ...] = ()
    stop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "assays", tuple(sorted(self.assays)))
        if self.stop and self.assays:
            raise EnvError("stop action cannot carry assays")
        if not self.stop and not self.assays:
            raise EnvError("batch must contain at least one assay")

    def sort_key(self):
        # Stop first, then by batch size, then lexicographic.
        return (not self.stop, len(self.assays), self.assays)

    def label(self) -> str:
        return "eox" if self.stop else "{" + ",".join(self.assays) + "}"


EOX = ActionBatch(stop=True)


def batch(*assays: str) -> ActionBatch:
    return ActionBatch(assays=tuple(assays))


@dataclass(frozen=True)
class RewardConfig:
    mode: str = "cost"  # "cost" or "info_per_cost"
    rho: tuple[float, ...] = (1.0,)
    gamma: float = 0.95
    penalty: float = -1e6
    horizon: int | None = None  # None: defaults to the number of assays
    epsilon: float = 0.10
    tau: float = 0.0

    def __post_init__(self):
        if self.mode not in ("cost", "info_per_cost"):
            raise EnvError(f"unknown reward mode {self.mode!r}")
        if not 0 <= self.gamma < 1:
            raise EnvError("gamma must be in [0, 1)")
        if self.penalty >= 0:
            raise EnvError("penalty must be negative")
        if self.mode == "cost" and sum(self.rho) <= 0:
            raise EnvError("cost mode requires sum(rho) > 0")
        if not 0 <= self.tau <= 1:
            raise EnvError("tau must be in [0, 1]")

    def effective_horizon(self, dataset: Dataset) -> int:
        return self.horizon if self.horizon is not None else len(dataset.assay_specs)

    def premature_stop_value(self, dataset: Dataset) -> float:
        """Return assigned to stopping while uncertainty is unresolved.

        Just below the worst legitimate continuation: in cost mode one
        unit worse than running the entire panel, in info mode the zero
        that any positive-information batch beats.  Keeping this at cost
        scale matters: an exploratory try of the stop arm inside a search
        subtree shifts ancestor averages by value/n, and a constraint-size
        penalty there would drown real cost differences.
        """
        if self.mode == "cost":
            max_spend = sum(
                scalarized_cost(a.cost, self.rho) for a in dataset.assay_specs
            )
            return -(max_spend + 1.0)
        return 0.0

    def check_penalty_dominance(
        self, dataset: Dataset, initial_uncertainty: float | None = None
    ) -> list[str]:
        """Verify |penalty| exceeds the largest attainable |return|.

        In cost mode that is the scalarized cost of running every assay
        once; in info-per-cost mode it is bounded by the initial
        uncertainty divided by the cheapest batch cost.
        """
        problems = []
        if self.mode == "cost":
            max_spend = sum(
                scalarized_cost(a.cost, self.rho) for a in dataset.assay_specs
            )
            if abs(self.penalty) <= max_spend:
                problems.append(
                    f"|penalty| {abs(self.penalty)} does not exceed the maximum "
                    f"possible spend {max_spend}"
                )
        else:
            costs = [scalarized_cost(a.cost, self.rho) for a in dataset.assay_specs]
            cheapest = min((c for c in costs if c > 0), default=None)
            if cheapest is None:
                problems.append("info_per_cost mode requires a positive assay cost")
            elif initial_uncertainty is not None:
                bound = initial_uncertainty / cheapest
                if abs(self.penalty) <= bound:
                    problems.append(
                        f"|penalty| {abs(self.penalty)} does not exceed the maximum "
                        f"possible information return {bound:.6g}"
                    )
        return problems


@dataclass(frozen=True)
class TransitionOutcome:
    next_state: CandidateState
    sampled_record: int  # 1-based record index
    revealed: dict[str, float] = field(hash=False, default_factory=dict)


def unmeasured_assays(state: CandidateState, dataset: Dataset) -> list[str]:
    measured = set(state.measured_assays)
    return [a.assay_id for a in dataset.assay_specs if a.assay_id not in measured]


def enumerate_actions(
    state: CandidateState, dataset: Dataset, m: int
) -> list[ActionBatch]:
    """Stop plus every nonempty subset of the unmeasured assays of size <= m,
    in canonical order (by size, then lexicographic)."""
    available = sorted(unmeasured_assays(state, dataset))
    actions = [EOX]
    for size in range(1, min(m, len(available)) + 1):
        for combo in itertools.combinations(available, size):
            actions.append(ActionBatch(assays=combo))
    return actions


def scalarized_cost(cost: tuple[float, ...], rho: tuple[float, ...]) -> float:
    if len(cost) != len(rho):
        raise EnvError(
            f"cost has {len(cost)} components but rho has {len(rho)}"
        )
    return float(sum(r * c for r, c in zip(rho, cost)))


def batch_cost_vector(action: ActionBatch, dataset: Dataset) -> tuple[float, ...]:
    if action.stop:
        return (0.0,) * len(dataset.cost_components)
    totals = [0.0] * len(dataset.cost_components)
    for assay_id in action.assays:
        for i, c in enumerate(dataset.assay(assay_id).cost):
            totals[i] += c
    return tuple(totals)


def step_reward(
    state: CandidateState,
    action: ActionBatch,
    config: RewardConfig,
    dataset: Dataset,
    delta_h: float | None = None,
) -> float:
    """Scalar step reward: negative scalarized cost, or uncertainty
    reduction per unit cost.  The stop action is free in both modes."""
    if action.stop:
        return 0.0
    cost = scalarized_cost(batch_cost_vector(action, dataset), config.rho)
    if config.mode == "cost":
        return -cost
    if delta_h is None:
        raise EnvError("info_per_cost mode requires delta_h")
    if cost <= 0:
        raise EnvError(f"batch {action.label()} has zero scalarized cost")
    return delta_h / cost


def sample_transition(
    state: CandidateState,
    action: ActionBatch,
    weights: BeliefWeights,
    ctx: BeliefContext,
    rng: np.random.Generator,
) -> TransitionOutcome:
    """Draw one historical record by belief weight and copy its outcomes
    for the batch assays (single-record copy keeps assays correlated)."""
    if action.stop:
        raise EnvError("cannot sample a transition for the stop action")
    overlap = set(action.assays) & set(state.measured_assays)
    if overlap:
        raise EnvError(f"batch re-measures assay(s): {sorted(overlap)}")
    idx = ctx.sample_from(weights.distances, rng.random())
    revealed = {
        ctx.dataset.assay(a).outcome_feature: float(ctx.columns[
            ctx.dataset.assay(a).outcome_feature
        ][idx])
        for a in action.assays
    }
    return TransitionOutcome(
        next_state=state.with_observations(revealed, action.assays),
        sampled_record=idx + 1,
        revealed=revealed,
    )


def sample_record_indices(
    weights: BeliefWeights, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Vectorized record draws under the same inverse-CDF rule as
    sample_transition (0-based indices; test utility)."""
    c = np.cumsum(weights.raw)
    u = rng.random(size)
    idx = np.searchsorted(c, u * c[-1], side="right")
    return np.minimum(idx, len(c) - 1)


def transition_distribution(
    state: CandidateState,
    action: ActionBatch,
    weights: BeliefWeights,
    ctx: BeliefContext,
) -> list[tuple[CandidateState, float]]:
    """Exact next-state law: records with identical revealed values merge.

    Enumerates all records, so intended for small datasets (tests and
    oracles).
    """
    if action.stop:
        raise EnvError("stop action has no transition distribution")
    features = [ctx.dataset.assay(a).outcome_feature for a in action.assays]
    merged: dict[tuple[float, ...], float] = {}
    for i in range(ctx.n):
        key = tuple(float(ctx.columns[f][i]) for f in features)
        merged[key] = merged.get(key, 0.0) + float(weights.normalized[i])
    out = []
    for key, prob in sorted(merged.items()):
        revealed = dict(zip(features, key))
        out.append((state.with_observations(revealed, action.assays), prob))
    return out


def is_terminal(
    state: CandidateState,
    h_value: float,
    config: RewardConfig,
    dataset: Dataset,
) -> bool:
    """True when uncertainty is resolved, the horizon is exhausted, or no
    assay remains.  An episode also ends when the stop action is taken;
    that is tracked by the episode loop, not the state."""
    if h_value <= config.epsilon:
        return True
    if state.step >= config.effective_horizon(dataset):
        return True
    return not unmeasured_assays(state, dataset)


def is_feasible(l_value: float, tau: float) -> bool:
    return l_value >= tau
