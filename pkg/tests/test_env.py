import numpy as np
import pytest

from assayplan.belief import BeliefContext, CandidateState, KernelConfig
from assayplan.env import (
    EOX,
    ActionBatch,
    EnvError,
    RewardConfig,
    batch,
    batch_cost_vector,
    enumerate_actions,
    is_feasible,
    is_terminal,
    sample_record_indices,
    sample_transition,
    scalarized_cost,
    step_reward,
    transition_distribution,
)
from conftest import make_dataset, random_dataset

CFG = KernelConfig()


def cns_like_dataset():
    return make_dataset(
        {
            "pgp": [1.0, 2.0, 3.0],
            "bcrp": [0.5, 1.5, 2.5],
            "mrt": [10.0, 20.0, 30.0],
        },
        [0.4, 0.6, 0.8],
        goal_range=(0.5, 1.0),
        assays=[
            ("a_pgp", "pgp", (400.0, 7.0)),
            ("a_bcrp", "bcrp", (400.0, 7.0)),
            ("a_mrt", "mrt", (400.0, 7.0)),
        ],
        cost_components=("money", "days"),
    )


class TestEnumerateActions:
    def test_exhausted_is_stop_only(self):
        dataset = cns_like_dataset()
        s = CandidateState(
            known_features={}, measured_assays=("a_bcrp", "a_mrt", "a_pgp")
        )
        assert enumerate_actions(s, dataset, 3) == [EOX]

    def test_two_assays_cap_one(self):
        dataset = cns_like_dataset()
        s = CandidateState(known_features={}, measured_assays=("a_mrt",))
        actions = enumerate_actions(s, dataset, 1)
        assert actions == [EOX, batch("a_bcrp"), batch("a_pgp")]

    def test_full_power_set_count(self):
        columns = {f"f{j}": [float(j), j + 1.0, j + 2.0] for j in range(6)}
        dataset = make_dataset(columns, [0.0, 1.0, 2.0])
        s = CandidateState(known_features={})
        actions = enumerate_actions(s, dataset, 6)
        assert len(actions) == 64
        assert actions[0] is EOX
        sizes = [len(a.assays) for a in actions[1:]]
        assert sizes == sorted(sizes)

    def test_canonical_order(self):
        dataset = cns_like_dataset()
        s = CandidateState(known_features={})
        actions = enumerate_actions(s, dataset, 2)
        labels = [a.label() for a in actions]
        assert labels == [
            "eox",
            "{a_bcrp}",
            "{a_mrt}",
            "{a_pgp}",
            "{a_bcrp,a_mrt}",
            "{a_bcrp,a_pgp}",
            "{a_mrt,a_pgp}",
        ]


class TestReward:
    def test_three_invitro_batch(self):
        dataset = cns_like_dataset()
        config = RewardConfig(mode="cost", rho=(1.0, 0.0))
        s = CandidateState(known_features={})
        action = batch("a_pgp", "a_bcrp", "a_mrt")
        assert step_reward(s, action, config, dataset) == pytest.approx(-1200.0)

    def test_eox_is_free(self):
        dataset = cns_like_dataset()
        config = RewardConfig(mode="cost", rho=(1.0, 0.0))
        s = CandidateState(known_features={})
        assert step_reward(s, EOX, config, dataset) == 0.0

    def test_info_per_cost(self):
        dataset = make_dataset({"x": [0.0, 1.0, 2.0]}, [0.0, 1.0, 2.0],
                               assays=[("ax", "x", (1.0,))])
        config = RewardConfig(mode="info_per_cost", rho=(1.0,))
        s = CandidateState(known_features={})
        r = step_reward(s, batch("ax"), config, dataset, delta_h=0.5625)
        assert r == pytest.approx(0.5625)

    def test_info_mode_rejects_zero_cost(self):
        dataset = make_dataset({"x": [0.0, 1.0, 2.0]}, [0.0, 1.0, 2.0],
                               assays=[("ax", "x", (0.0,))])
        config = RewardConfig(mode="info_per_cost", rho=(1.0,))
        s = CandidateState(known_features={})
        with pytest.raises(EnvError, match="zero scalarized cost"):
            step_reward(s, batch("ax"), config, dataset, delta_h=0.5)

    def test_cost_mode_sign(self):
        rng = np.random.default_rng(3)
        dataset = random_dataset(rng)
        config = RewardConfig(mode="cost", rho=(1.0,))
        s = CandidateState(known_features={})
        for action in enumerate_actions(s, dataset, 2):
            r = step_reward(s, action, config, dataset)
            if action.stop:
                assert r == 0.0
            else:
                assert r <= 0.0

    def test_penalty_dominance_check(self):
        dataset = cns_like_dataset()
        ok = RewardConfig(mode="cost", rho=(1.0, 0.0), penalty=-1e6)
        assert ok.check_penalty_dominance(dataset) == []
        weak = RewardConfig(mode="cost", rho=(1.0, 0.0), penalty=-1000.0)
        problems = weak.check_penalty_dominance(dataset)
        assert len(problems) == 1 and "1200" in problems[0]


class TestPredicates:
    def test_uncertainty_resolved(self):
        dataset = cns_like_dataset()
        config = RewardConfig(epsilon=0.10)
        s = CandidateState(known_features={})
        assert is_terminal(s, 0.09, config, dataset)

    def test_horizon_exhausted(self):
        dataset = cns_like_dataset()
        config = RewardConfig(epsilon=0.10, horizon=2)
        s = CandidateState(known_features={}, step=2)
        assert is_terminal(s, 0.5, config, dataset)

    def test_live_state(self):
        dataset = cns_like_dataset()
        config = RewardConfig(epsilon=0.10)
        s = CandidateState(known_features={})
        assert not is_terminal(s, 0.5, config, dataset)

    def test_assay_exhaustion(self):
        dataset = cns_like_dataset()
        config = RewardConfig(epsilon=0.10)
        s = CandidateState(
            known_features={}, measured_assays=("a_bcrp", "a_mrt", "a_pgp"), step=1
        )
        assert is_terminal(s, 0.5, config, dataset)

    def test_feasibility(self):
        assert not is_feasible(0.571, 0.6)
        assert is_feasible(0.9, 0.9)
        assert is_feasible(0.0, 0.0)


class TestSampleTransition:
    def test_degenerate_single_record(self):
        # A one-record table has no empirical variance; fix it by hand.
        dataset = make_dataset({"x": [3.5]}, [1.0], sigma2={"x": 1.0},
                               assays=[("ax", "x", (1.0,))])
        ctx = BeliefContext(dataset, CFG)
        s = CandidateState(known_features={})
        w = ctx.weights_of(ctx.state_distances(s), set())
        rng = np.random.default_rng(0)
        out = sample_transition(s, batch("ax"), w, ctx, rng)
        assert out.sampled_record == 1
        assert out.revealed == {"x": 3.5}
        assert out.next_state.known_features["x"] == 3.5
        assert out.next_state.measured_assays == ("ax",)
        assert out.next_state.step == 1

    def test_rejects_measured_overlap(self, toy_dataset):
        ctx = BeliefContext(toy_dataset, CFG)
        s = CandidateState(known_features={}, measured_assays=("ax",))
        w = ctx.weights_of(ctx.state_distances(s), set())
        with pytest.raises(EnvError, match="re-measures"):
            sample_transition(s, batch("ax"), w, ctx, np.random.default_rng(0))

    def test_batch_values_from_single_record(self):
        dataset = make_dataset(
            {"x": [0.0, 1.0, 2.0], "y": [10.0, 11.0, 12.0]},
            [0.0, 1.0, 2.0],
            assays=[("ax", "x", (1.0,)), ("ay", "y", (1.0,))],
        )
        ctx = BeliefContext(dataset, CFG)
        s = CandidateState(known_features={})
        w = ctx.weights_of(ctx.state_distances(s), set())
        rng = np.random.default_rng(42)
        for _ in range(1000):
            out = sample_transition(s, batch("ax", "ay"), w, ctx, rng)
            i = out.sampled_record - 1
            assert out.revealed["x"] == dataset.records[i].features["x"]
            assert out.revealed["y"] == dataset.records[i].features["y"]

    def test_measured_set_monotone(self, toy_dataset):
        ctx = BeliefContext(toy_dataset, CFG)
        s = CandidateState(known_features={})
        w = ctx.weights_of(ctx.state_distances(s), set())
        out = sample_transition(s, batch("ax"), w, ctx, np.random.default_rng(1))
        assert set(out.next_state.measured_assays) > set(s.measured_assays)
        assert len(out.next_state.measured_assays) == len(s.measured_assays) + 1

    def test_fixed_seed_reproducible(self, toy_dataset):
        ctx = BeliefContext(toy_dataset, CFG)
        s = CandidateState(known_features={"x": 1.1})
        w = ctx.weights_of(ctx.state_distances(s), {"x"})
        seq1 = [
            sample_transition(s, batch("ax"), w, ctx,
                              np.random.default_rng(99)).sampled_record
            for _ in range(1)
        ]
        seq2 = [
            sample_transition(s, batch("ax"), w, ctx,
                              np.random.default_rng(99)).sampled_record
            for _ in range(1)
        ]
        assert seq1 == seq2


class TestTransitionDistribution:
    def test_distinct_values_probs_equal_weights(self, toy_dataset):
        ctx = BeliefContext(toy_dataset, CFG)
        s = CandidateState(known_features={"x": 1.1})
        w = ctx.weights_of(ctx.state_distances(s), {"x"})
        dist = transition_distribution(s, batch("ax"), w, ctx)
        assert len(dist) == 3
        probs = sorted(p for _, p in dist)
        assert np.allclose(probs, sorted(w.normalized), atol=1e-12)
        assert sum(p for _, p in dist) == pytest.approx(1.0, abs=1e-12)

    def test_shared_values_merge(self):
        dataset = make_dataset(
            {"x": [0.0, 1.0, 1.0], "y": [1.0, 2.0, 3.0]},
            [0.0, 1.0, 2.0],
            assays=[("ax", "x", (1.0,)), ("ay", "y", (1.0,))],
        )
        ctx = BeliefContext(dataset, CFG)
        s = CandidateState(known_features={})
        w = ctx.weights_of(ctx.state_distances(s), set())
        dist = transition_distribution(s, batch("ax"), w, ctx)
        assert len(dist) == 2
        merged = {
            tuple(sorted(ns.known_features.items())): p for ns, p in dist
        }
        assert merged[(("x", 1.0),)] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_empirical_law_total_variation(self, toy_dataset):
        ctx = BeliefContext(toy_dataset, CFG)
        s = CandidateState(known_features={"x": 1.1})
        w = ctx.weights_of(ctx.state_distances(s), {"x"})
        rng = np.random.default_rng(7)
        n = 100_000
        idx = sample_record_indices(w, rng, n)
        counts = np.bincount(idx, minlength=3) / n
        tv = 0.5 * np.abs(counts - w.normalized).sum()
        assert tv < 0.01


class TestCostHelpers:
    def test_batch_cost_vector(self):
        dataset = cns_like_dataset()
        action = batch("a_pgp", "a_bcrp")
        assert batch_cost_vector(action, dataset) == (800.0, 14.0)
        assert batch_cost_vector(EOX, dataset) == (0.0, 0.0)

    def test_scalarized(self):
        assert scalarized_cost((400.0, 7.0), (1.0, 0.0)) == 400.0
        assert scalarized_cost((400.0, 7.0), (0.5, 2.0)) == 214.0
        with pytest.raises(EnvError):
            scalarized_cost((400.0,), (1.0, 0.0))

    def test_action_batch_validation(self):
        with pytest.raises(EnvError):
            ActionBatch(assays=("a",), stop=True)
        with pytest.raises(EnvError):
            ActionBatch(assays=())
