"""Micro planning instances with exactly computable, decisive optima.

Two families, both sized for exhaustive expectimax (N <= 6 records,
M <= 3 assays, horizon <= 3):

* family A (cost mode): the uncertainty threshold is set between the
  initial uncertainty and the worst single-measurement uncertainty, so
  every batch resolves the state in one step and the optimum is the
  cheapest sufficient batch.
* family B (info mode): features have tiered informativeness and the
  threshold is unreachable, so every episode carries the same flat
  penalty and ordering is purely information-per-cost.  Instances whose
  top-two exact action values are closer than MIN_GAP are discarded at
  generation: a sampling planner cannot (and need not) resolve
  statistically invisible ties.
"""

from __future__ import annotations

import numpy as np

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.env import RewardConfig
from conftest import make_dataset
from oracles import ExpectimaxOracle

KCFG = KernelConfig()
MIN_GAP = 0.15


def cost_mode_instance(seed: int):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(4, 7))
    k = int(rng.integers(2, 4))
    columns = {
        f"f{j}": rng.normal(0, 1 + rng.random(), n).tolist() for j in range(k)
    }
    targets = rng.normal(0, 1, n).tolist()
    costs = sorted(rng.uniform(0.5, 3.0, k))
    while k > 1 and min(np.diff(costs)) < 0.4:
        costs = sorted(rng.uniform(0.5, 3.0, k))
    order = list(rng.permutation(k))
    dataset = make_dataset(
        columns,
        targets,
        goal_range=(-99.0, 99.0),
        assays=[
            (f"a{j}", f"f{j}", (float(costs[order.index(j)]),)) for j in range(k)
        ],
    )
    ctx = BeliefContext(dataset, KCFG)
    h0 = ctx.stats_of(np.zeros(n)).uncertainty
    max_h1 = 0.0
    for j in range(k):
        for v in ctx.columns[f"f{j}"]:
            d = ctx.distances_after(np.zeros(n), {f"f{j}": float(v)})
            max_h1 = max(max_h1, ctx.stats_of(d).uncertainty)
    if max_h1 >= h0:
        return None
    config = RewardConfig(
        mode="cost",
        rho=(1.0,),
        gamma=0.9,
        epsilon=0.5 * (max_h1 + h0),
        tau=0.0,
        horizon=3,
    )
    return dataset, config


def info_mode_instance(seed: int):
    rng = np.random.default_rng(2000 + seed)
    n = int(rng.integers(4, 7))
    k = int(rng.integers(2, 4))
    assignment = rng.integers(0, 2, n)
    while len(set(assignment.tolist())) < 2:
        assignment = rng.integers(0, 2, n)
    tiers = rng.permutation([8.0, 1.0, 0.3][:k])
    columns = {
        f"f{j}": (assignment * tiers[j] + rng.normal(0, 1.0, n)).tolist()
        for j in range(k)
    }
    targets = (assignment * 3.0 + rng.normal(0, 0.3, n)).tolist()
    costs = rng.uniform(0.8, 2.5, k).round(2)
    dataset = make_dataset(
        columns,
        targets,
        goal_range=(-99.0, 99.0),
        assays=[(f"a{j}", f"f{j}", (float(costs[j]),)) for j in range(k)],
    )
    config = RewardConfig(
        mode="info_per_cost",
        rho=(1.0,),
        gamma=0.9,
        epsilon=0.0,
        tau=0.0,
        horizon=3,
    )
    oracle = ExpectimaxOracle(dataset, KCFG, config, m=2)
    d = oracle.ctx.state_distances(CandidateState(known_features={}))
    values = sorted(
        (q for _, q in oracle.action_values(d, set(), 0, 0)), reverse=True
    )
    if values[0] - values[1] < MIN_GAP:
        return None
    return dataset, config


def micro_suite(count: int = 100):
    """Deterministic list of (dataset, reward_config, oracle_action)."""
    instances = []
    half = count // 2
    seed = 0
    while len(instances) < half:
        inst = cost_mode_instance(seed)
        seed += 1
        if inst is not None:
            instances.append(inst)
    seed = 0
    while len(instances) < count:
        inst = info_mode_instance(seed)
        seed += 1
        if inst is not None:
            instances.append(inst)
    return instances
