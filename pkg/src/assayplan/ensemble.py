"""Ensemble planning: majority voting, consensus paths, tolerance sweeps.

Independent trees vote on the action at each decision node; the consensus
path advances with a deterministic representative outcome (the
belief-expected value of each revealed feature, quantized to the nearest
historical value so the advanced prefix matches tree keys).  Tolerance
sweeps re-plan per grid value and report the non-dominated
(spend, tolerance) points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.data import Dataset
from assayplan.env import (
    ActionBatch,
    RewardConfig,
    batch_cost_vector,
    scalarized_cost,
)
from assayplan.planner import PlannerParams, Policy, StateKey, plan

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int = 50
    base_seed: int = 0
    planner: PlannerParams = PlannerParams()

    def __post_init__(self):
        if self.n_members < 1:
            raise ValueError("ensemble size must be >= 1")


@dataclass
class VoteHistogram:
    counts: dict[ActionBatch, int] = field(default_factory=dict)
    abstentions: int = 0

    @property
    def total_votes(self) -> int:
        return sum(self.counts.values())


@dataclass
class MlaspStep:
    action: ActionBatch
    vote_fraction: float
    cumulative_cost: tuple[float, ...]
    post_step_h: float


@dataclass
class Mlasp:
    steps: list[MlaspStep]
    constraint_met: bool
    truncated: bool = False
    final_h: float = float("nan")
    final_l: float = float("nan")

    def total_cost(self) -> tuple[float, ...]:
        if not self.steps:
            return ()
        return self.steps[-1].cumulative_cost

    def spend(self, rho: tuple[float, ...]) -> float:
        cost = self.total_cost()
        return scalarized_cost(cost, rho) if cost else 0.0


@dataclass
class ParetoPoint:
    tolerance: float
    sweep_kind: str  # "tau" or "epsilon"
    spend: float
    first_action: ActionBatch
    constraint_met: bool
    dominated: bool = False


def run_ensemble(
    root_state: CandidateState,
    dataset: Dataset,
    kernel_config: KernelConfig,
    reward_config: RewardConfig,
    config: EnsembleConfig,
) -> list[Policy]:
    """Plan with n_members independent trees, member j seeded with
    base_seed + j (j = 1..n)."""
    policies = []
    for j in range(1, config.n_members + 1):
        params = replace(config.planner, seed=config.base_seed + j)
        _, policy = plan(root_state, dataset, kernel_config, reward_config, params)
        policies.append(policy)
    return policies


def vote_actions(policies: list[Policy], prefix: StateKey) -> VoteHistogram:
    """One vote per policy: its recommendation at the prefix node, if the
    policy visited it; otherwise the policy abstains."""
    hist = VoteHistogram()
    for policy in policies:
        action = policy.recommendation(prefix)
        if action is None:
            hist.abstentions += 1
        else:
            hist.counts[action] = hist.counts.get(action, 0) + 1
    return hist


def _vote_priority(action: ActionBatch, dataset: Dataset | None, rho) -> tuple:
    if dataset is None:
        return (0.0, action.sort_key())
    return (scalarized_cost(batch_cost_vector(action, dataset), rho), action.sort_key())


def top_k_actions(
    histogram: VoteHistogram,
    k: int,
    dataset: Dataset | None = None,
    rho: tuple[float, ...] = (1.0,),
) -> list[ActionBatch]:
    """The k most voted batches; ties resolve to the cheaper batch, then
    canonical order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        histogram.counts.items(),
        key=lambda item: (-item[1],) + _vote_priority(item[0], dataset, rho),
    )
    return [action for action, _ in ranked[:k]]


def expected_outcome(
    ctx: BeliefContext, distances: np.ndarray, feature_id: str
) -> float:
    """Belief-expected value of a feature, quantized to the nearest
    historical value so it matches a tree outcome key."""
    from assayplan import kernels

    raw, _, total = kernels.weights_from_distances(distances, ctx.config.lambda_w)
    col = ctx.columns[feature_id]
    mean = float(raw @ col) / total
    return float(col[int(np.argmin(np.abs(col - mean)))])


def build_mlasp(
    policies: list[Policy],
    root_state: CandidateState,
    dataset: Dataset,
    kernel_config: KernelConfig,
    reward_config: RewardConfig,
) -> Mlasp:
    """Majority-vote consensus path from the root.

    The prefix advances with the expected outcome signature; members whose
    trees never visited the realized prefix abstain at that step.  The
    path ends at a stop vote, a terminal state, or (with a warning flag)
    total abstention.
    """
    if not policies:
        raise ValueError("build_mlasp requires at least one policy")
    ctx = BeliefContext(dataset, kernel_config)
    horizon = reward_config.effective_horizon(dataset)
    assay_feature = {a.assay_id: a.outcome_feature for a in dataset.assay_specs}

    d = ctx.state_distances(root_state)
    key: StateKey = (tuple(sorted(root_state.measured_assays)), ())
    measured = set(root_state.measured_assays)
    step_count = root_state.step
    cumulative = (0.0,) * len(dataset.cost_components)
    stats = ctx.stats_of(d)
    steps: list[MlaspStep] = []

    while True:
        h = stats.uncertainty
        available = [
            a.assay_id for a in dataset.assay_specs if a.assay_id not in measured
        ]
        if h <= reward_config.epsilon or step_count >= horizon or not available:
            return Mlasp(
                steps=steps,
                constraint_met=h <= reward_config.epsilon,
                final_h=h,
                final_l=stats.goal_likelihood,
            )
        hist = vote_actions(policies, key)
        if not hist.counts:
            return Mlasp(
                steps=steps,
                constraint_met=False,
                truncated=True,
                final_h=h,
                final_l=stats.goal_likelihood,
            )
        ranked = top_k_actions(hist, 1, dataset, reward_config.rho)
        action = ranked[0]
        fraction = hist.counts[action] / len(policies)
        if action.stop:
            steps.append(
                MlaspStep(
                    action=action,
                    vote_fraction=fraction,
                    cumulative_cost=cumulative,
                    post_step_h=h,
                )
            )
            return Mlasp(
                steps=steps,
                constraint_met=h <= reward_config.epsilon,
                final_h=h,
                final_l=stats.goal_likelihood,
            )
        revealed = tuple(
            (assay_feature[a], expected_outcome(ctx, d, assay_feature[a]))
            for a in action.assays
        )
        d = ctx.distances_after(d, dict(revealed))
        stats = ctx.stats_of(d)
        cost = batch_cost_vector(action, dataset)
        cumulative = tuple(c + x for c, x in zip(cumulative, cost))
        measured.update(action.assays)
        step_count += 1
        key = (
            tuple(sorted(key[0] + action.assays)),
            tuple(sorted(key[1] + revealed)),
        )
        steps.append(
            MlaspStep(
                action=action,
                vote_fraction=fraction,
                cumulative_cost=cumulative,
                post_step_h=stats.uncertainty,
            )
        )


def pareto_sweep(
    root_state: CandidateState,
    dataset: Dataset,
    kernel_config: KernelConfig,
    reward_config: RewardConfig,
    config: EnsembleConfig,
    grid: list[float],
    sweep_kind: str = "tau",
) -> list[ParetoPoint]:
    """One ensemble per grid value; each point reports the consensus first
    batch and the realized spend along the full consensus path."""
    if not grid:
        raise ValueError("sweep grid must be nonempty")
    if sweep_kind not in ("tau", "epsilon"):
        raise ValueError("sweep_kind must be 'tau' or 'epsilon'")
    points = []
    for value in grid:
        if sweep_kind == "tau":
            rc = replace(reward_config, tau=value)
        else:
            rc = replace(reward_config, epsilon=value)
        policies = run_ensemble(root_state, dataset, kernel_config, rc, config)
        mlasp = build_mlasp(policies, root_state, dataset, kernel_config, rc)
        first = mlasp.steps[0].action if mlasp.steps else ActionBatch(stop=True)
        points.append(
            ParetoPoint(
                tolerance=value,
                sweep_kind=sweep_kind,
                spend=mlasp.spend(rc.rho),
                first_action=first,
                constraint_met=mlasp.constraint_met,
            )
        )
    mark_dominated(points)
    return points


def mark_dominated(points: list[ParetoPoint]):
    """Flag points dominated in (spend, tolerance).

    Lower spend is always better.  For a tau sweep a higher tolerance is
    the stricter, more desirable target; for an epsilon sweep a lower one
    is.
    """
    for p in points:
        p.dominated = False
        for q in points:
            if q is p:
                continue
            if q.sweep_kind == "tau":
                better_tol = q.tolerance >= p.tolerance
                strict_tol = q.tolerance > p.tolerance
            else:
                better_tol = q.tolerance <= p.tolerance
                strict_tol = q.tolerance < p.tolerance
            if q.spend <= p.spend and better_tol and (q.spend < p.spend or strict_tol):
                p.dominated = True
                break


def pareto_front(points: list[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points, deduplicated, sorted by spend."""
    front = []
    seen = set()
    for p in sorted(points, key=lambda p: (p.spend, p.tolerance)):
        if p.dominated:
            continue
        sig = (p.spend, p.tolerance)
        if sig in seen:
            continue
        seen.add(sig)
        front.append(p)
    return front


# -- report emitters -------------------------------------------------------


def mlasp_to_json(mlasp: Mlasp, dataset: Dataset) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "cost_components": list(dataset.cost_components),
        "constraint_met": mlasp.constraint_met,
        "truncated": mlasp.truncated,
        "final_h": mlasp.final_h,
        "final_l": mlasp.final_l,
        "total_cost": list(mlasp.total_cost()),
        "steps": [
            {
                "action": step.action.label(),
                "assays": list(step.action.assays),
                "stop": step.action.stop,
                "vote_fraction": step.vote_fraction,
                "cumulative_cost": list(step.cumulative_cost),
                "post_step_h": step.post_step_h,
            }
            for step in mlasp.steps
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def votes_to_csv(histogram: VoteHistogram) -> str:
    lines = ["schema_version,action,votes"]
    ranked = sorted(
        histogram.counts.items(), key=lambda kv: (-kv[1], kv[0].sort_key())
    )
    for action, count in ranked:
        lines.append(f"{SCHEMA_VERSION},{action.label()},{count}")
    lines.append(f"{SCHEMA_VERSION},abstain,{histogram.abstentions}")
    return "\n".join(lines) + "\n"


def pareto_to_csv(points: list[ParetoPoint]) -> str:
    lines = ["schema_version,sweep,tolerance,spend,first_action,constraint_met,dominated"]
    for p in points:
        lines.append(
            f"{SCHEMA_VERSION},{p.sweep_kind},{p.tolerance!r},{p.spend!r},"
            f"{p.first_action.label()},{int(p.constraint_met)},{int(p.dominated)}"
        )
    return "\n".join(lines) + "\n"
