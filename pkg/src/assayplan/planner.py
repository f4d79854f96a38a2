"""Single-tree MCTS with Double Progressive Widening over the implicit model.

Selection uses UCB1 over expanded actions, with widening slots taking
priority; expansion samples a next state from the belief-weighted record
mixture; rollouts follow a cost-aware heuristic; returns are discounted
from the tree root.

Constraint handling mirrors the constrained objective: entering a state
whose goal likelihood falls below tau adds one flat penalty (undiscounted,
at most once per episode) and stops the episode.  Stopping is always
legal, but stopping while uncertainty is still above epsilon scores a
pessimistic cost-scale value (see RewardConfig.premature_stop_value), so
it is never preferred over a feasible way of resolving the state.
Episodes cut off by the horizon or by assay exhaustion with the
uncertainty target unmet end without penalty and are reported as
constraint-unmet.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.data import Dataset
from assayplan.env import (
    EOX,
    ActionBatch,
    RewardConfig,
    batch_cost_vector,
    scalarized_cost,
)

StateKey = tuple[tuple[str, ...], tuple[tuple[str, float], ...]]


class PlannerError(Exception):
    pass


@dataclass(frozen=True)
class PlannerParams:
    n_itr: int = 20000
    c_ucb: float = 5.0
    k_action: float = 2.0
    alpha_action: float = 0.5
    k_outcome: float = 1.0
    alpha_outcome: float = 0.5
    max_batch: int | None = None  # None: no cap below the assay count
    rollout_depth: int | None = None  # None: bounded by the horizon only
    seed: int = 0

    def __post_init__(self):
        if self.n_itr < 1:
            raise PlannerError("n_itr must be >= 1")
        if self.c_ucb < 0:
            raise PlannerError("c_ucb must be >= 0")
        if self.k_action < 1 or self.k_outcome < 1:
            raise PlannerError("widening k parameters must be >= 1")
        if not (0 < self.alpha_action < 1 and 0 < self.alpha_outcome < 1):
            raise PlannerError("widening alpha parameters must be in (0, 1)")


class Node:
    """Decision node: cached belief state plus per-action edge statistics."""

    __slots__ = (
        "key",
        "distances",
        "measured",
        "step",
        "h",
        "l",
        "terminal",
        "infeasible",
        "n",
        "actions",
        "edge_n",
        "edge_q",
        "edge_children",
        "edge_draws",
        "untried",
        "n_expanded",
    )

    def __init__(self, key, distances, measured, step, h, l, terminal, infeasible,
                 all_actions):
        self.key = key
        self.distances = distances
        self.measured = measured
        self.step = step
        self.h = h
        self.l = l
        self.terminal = terminal
        self.infeasible = infeasible
        self.n = 1  # creation visit
        self.actions: list[ActionBatch] = []
        total = len(all_actions)
        self.edge_n = np.zeros(total, dtype=np.float64)
        self.edge_q = np.zeros(total, dtype=np.float64)
        self.edge_children: list[dict] = []
        self.edge_draws: list[dict] = []
        self.untried = list(all_actions)
        self.n_expanded = 0

    def edge_means(self) -> np.ndarray:
        k = self.n_expanded
        return self.edge_q[:k] / np.maximum(self.edge_n[:k], 1.0)


@dataclass
class SearchTree:
    root: Node
    nodes: list[Node] = field(default_factory=list)

    def dump(self) -> dict:
        """JSON-friendly tree summary for debugging."""
        out = []
        for node in self.nodes:
            out.append(
                {
                    "measured": list(node.key[0]),
                    "revealed": [[f, v] for f, v in node.key[1]],
                    "visits": int(node.n),
                    "h": node.h,
                    "l": node.l,
                    "terminal": node.terminal,
                    "actions": [
                        {
                            "action": a.label(),
                            "visits": int(node.edge_n[i]),
                            "mean_value": float(node.edge_q[i] / node.edge_n[i])
                            if node.edge_n[i]
                            else None,
                        }
                        for i, a in enumerate(node.actions)
                    ],
                }
            )
        return {"nodes": out}


@dataclass(frozen=True)
class Policy:
    root_action: ActionBatch
    root_key: StateKey
    by_state: dict[StateKey, ActionBatch] = field(hash=False, default_factory=dict)

    def recommendation(self, key: StateKey) -> ActionBatch | None:
        return self.by_state.get(key)


class _Search:
    def __init__(self, root_state, dataset, kernel_config, reward_config, params):
        self.dataset = dataset
        self.ctx = BeliefContext(dataset, kernel_config)
        self.rc = reward_config
        self.params = params
        self.horizon = reward_config.effective_horizon(dataset)
        self.m = params.max_batch or len(dataset.assay_specs)
        self.rng = np.random.default_rng(params.seed)
        self.gamma = reward_config.gamma
        self.assay_feature = {
            a.assay_id: a.outcome_feature for a in dataset.assay_specs
        }
        self.assay_cost = {
            a.assay_id: scalarized_cost(a.cost, reward_config.rho)
            for a in dataset.assay_specs
        }
        self.stop_value = reward_config.premature_stop_value(dataset)
        self.nodes: list[Node] = []
        self.root_state = root_state
        d = self.ctx.state_distances(root_state)
        self.root = self._make_node(
            key=(tuple(sorted(root_state.measured_assays)), ()),
            distances=d,
            measured=frozenset(root_state.measured_assays),
            step=root_state.step,
        )

    # -- node construction -------------------------------------------------

    def _available(self, measured) -> list[str]:
        return [
            a.assay_id
            for a in self.dataset.assay_specs
            if a.assay_id not in measured
        ]

    def _make_node(self, key, distances, measured, step) -> Node:
        stats = self.ctx.stats_of(distances)
        h, l = stats.uncertainty, stats.goal_likelihood
        available = self._available(measured)
        terminal = h <= self.rc.epsilon or step >= self.horizon or not available
        infeasible = l < self.rc.tau
        actions = [EOX]
        if not terminal:
            for size in range(1, min(self.m, len(available)) + 1):
                for combo in itertools.combinations(sorted(available), size):
                    actions.append(ActionBatch(assays=combo))
        node = Node(key, distances, measured, step, h, l, terminal, infeasible,
                    actions)
        self.nodes.append(node)
        return node

    def _child_key(self, parent: Node, assays, revealed_pairs) -> StateKey:
        measured = tuple(sorted(parent.key[0] + assays))
        revealed = tuple(sorted(parent.key[1] + revealed_pairs))
        return (measured, revealed)

    # -- search ------------------------------------------------------------

    def run(self) -> SearchTree:
        for _ in range(self.params.n_itr):
            self._simulate(self.root, 0)
        return SearchTree(root=self.root, nodes=self.nodes)

    def _select_edge(self, node: Node) -> int:
        allowed = math.ceil(self.params.k_action * node.n**self.params.alpha_action)
        if node.untried and node.n_expanded < allowed:
            # Uniform over untried batches; the stop action expands last.
            # At a nonterminal node its value is the premature-stop penalty
            # by definition, so sampling it early only corrupts ancestor
            # averages by -penalty/n.
            batch_slots = [i for i, a in enumerate(node.untried) if not a.stop]
            if batch_slots:
                pick = batch_slots[int(self.rng.integers(len(batch_slots)))]
            else:
                pick = 0
            action = node.untried.pop(pick)
            slot = node.n_expanded
            node.actions.append(action)
            node.edge_children.append({})
            node.edge_draws.append({})
            node.n_expanded += 1
            return slot
        k = node.n_expanded
        means = node.edge_q[:k] / np.maximum(node.edge_n[:k], 1.0)
        bonus = self.params.c_ucb * np.sqrt(np.log(node.n) / node.edge_n[:k])
        return int(np.argmax(means + bonus))

    def _sample_child(self, node: Node, slot: int):
        action = node.actions[slot]
        allowed = math.ceil(
            self.params.k_outcome
            * (node.edge_n[slot] + 1.0) ** self.params.alpha_outcome
        )
        children = node.edge_children[slot]
        draws = node.edge_draws[slot]
        if len(children) < allowed:
            idx = self.ctx.sample_from(node.distances, self.rng.random())
            revealed = tuple(
                (self.assay_feature[a], float(self.ctx.columns[
                    self.assay_feature[a]
                ][idx]))
                for a in action.assays
            )
            key = self._child_key(node, action.assays, revealed)
            child = children.get(key)
            if child is None:
                d = self.ctx.distances_after(node.distances, dict(revealed))
                child = self._make_node(
                    key=key,
                    distances=d,
                    measured=node.measured | set(action.assays),
                    step=node.step + 1,
                )
                children[key] = child
                draws[key] = 1
                return child, True
            draws[key] += 1
            return child, False
        keys = list(children)
        counts = np.array([draws[k] for k in keys], dtype=np.float64)
        pick = keys[
            int(self.rng.choice(len(keys), p=counts / counts.sum()))
        ]
        draws[pick] += 1
        return children[pick], False

    def _batch_reward(self, parent: Node, child: Node, action: ActionBatch) -> float:
        cost = sum(self.assay_cost[a] for a in action.assays)
        if self.rc.mode == "cost":
            return -cost
        if cost <= 0:
            raise PlannerError(f"batch {action.label()} has zero scalarized cost")
        return (parent.h - child.h) / cost

    def _simulate(self, node: Node, depth: int) -> float:
        node.n += 1
        slot = self._select_edge(node)
        action = node.actions[slot]
        if action.stop:
            q = self.stop_value if node.h > self.rc.epsilon else 0.0
        else:
            child, is_new = self._sample_child(node, slot)
            r = self.gamma**depth * self._batch_reward(node, child, action)
            if child.infeasible:
                q = r + self.rc.penalty
            elif child.terminal:
                q = r
            elif is_new:
                q = r + self._rollout(child, depth + 1)
            else:
                q = r + self._simulate(child, depth + 1)
        node.edge_n[slot] += 1.0
        node.edge_q[slot] += q
        return q

    def _heuristic_batch(self, available: list[str]) -> list[str]:
        size = int(self.rng.integers(1, min(self.m, len(available)) + 1))
        ranked = sorted(available, key=lambda a: (self.assay_cost[a], a))
        return ranked[:size]

    def _rollout(self, node: Node, depth: int) -> float:
        cap = self.params.rollout_depth
        if cap is None:
            cap = self.horizon
        d = node.distances
        measured = set(node.measured)
        step = node.step
        h = node.h
        t = depth
        total = 0.0
        steps_taken = 0
        while True:
            available = self._available(measured)
            if (
                h <= self.rc.epsilon
                or step >= self.horizon
                or not available
                or steps_taken >= cap
            ):
                return total
            assays = self._heuristic_batch(available)
            idx = self.ctx.sample_from(d, self.rng.random())
            obs = {
                self.assay_feature[a]: float(self.ctx.columns[
                    self.assay_feature[a]
                ][idx])
                for a in assays
            }
            d = self.ctx.distances_after(d, obs)
            stats = self.ctx.stats_of(d)
            cost = sum(self.assay_cost[a] for a in assays)
            if self.rc.mode == "cost":
                total += self.gamma**t * -cost
            else:
                total += self.gamma**t * (h - stats.uncertainty) / cost
            measured.update(assays)
            step += 1
            steps_taken += 1
            t += 1
            h = stats.uncertainty
            if stats.goal_likelihood < self.rc.tau:
                return total + self.rc.penalty


def plan(
    root_state: CandidateState,
    dataset: Dataset,
    kernel_config: KernelConfig,
    reward_config: RewardConfig,
    params: PlannerParams,
) -> tuple[SearchTree, Policy]:
    """Run the full search and extract the greedy policy.

    A root that is already terminal yields a stop recommendation without
    any search iterations.
    """
    search = _Search(root_state, dataset, kernel_config, reward_config, params)
    if search.root.terminal:
        tree = SearchTree(root=search.root, nodes=search.nodes)
        policy = Policy(
            root_action=EOX,
            root_key=search.root.key,
            by_state={search.root.key: EOX},
        )
        return tree, policy
    tree = search.run()
    policy = extract_policy(tree, dataset, reward_config)
    return tree, policy


def _action_priority(action: ActionBatch, dataset: Dataset, rho) -> tuple:
    cost = scalarized_cost(batch_cost_vector(action, dataset), rho)
    return (cost, action.sort_key())


def extract_policy(
    tree: SearchTree, dataset: Dataset, reward_config: RewardConfig
) -> Policy:
    """Greedy action per visited node: argmax mean value, ties broken by
    lower scalarized cost then canonical order."""
    if tree.root.n_expanded < 1:
        raise PlannerError("tree has no expanded root action")
    by_state: dict[StateKey, ActionBatch] = {}
    for node in tree.nodes:
        k = node.n_expanded
        if k < 1:
            continue
        means = node.edge_means()
        best = means.max()
        tied = [node.actions[i] for i in range(k) if means[i] == best]
        choice = min(
            tied, key=lambda a: _action_priority(a, dataset, reward_config.rho)
        )
        by_state[node.key] = choice
    return Policy(
        root_action=by_state[tree.root.key],
        root_key=tree.root.key,
        by_state=by_state,
    )


def rollout(
    state: CandidateState,
    dataset: Dataset,
    kernel_config: KernelConfig,
    reward_config: RewardConfig,
    depth_cap: int,
    rng: np.random.Generator,
) -> float:
    """Standalone heuristic rollout from a state (discounting starts at the
    state, i.e. it is treated as the tree root)."""
    params = PlannerParams(n_itr=1, rollout_depth=depth_cap, seed=0)
    search = _Search(state, dataset, kernel_config, reward_config, params)
    search.rng = rng
    node = search.root
    if node.terminal:
        return 0.0
    return search._rollout(node, 0)
