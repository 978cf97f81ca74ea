"""Exact action selection: DP vs brute force, sampler, weight persistence."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from dirplab import (
    Action,
    CostVector,
    DiscreteDistribution,
    Instance,
    Location,
    PostDecisionState,
    State,
    WeightVector,
    best_action,
    brute_force_action,
    enumerate_actions,
    is_feasible,
    load_weights,
    objective_of,
    random_action,
    save_weights,
)
from dirplab.action_solver import features, value


def micro_instance(rng: np.random.Generator) -> Instance:
    """Small random instance for exhaustive-oracle comparisons."""
    n = int(rng.integers(1, 4))
    q = int(rng.integers(1, 3))
    C = int(rng.integers(1, 5))
    caps = [int(rng.integers(2, 11))] + [int(rng.integers(1, 9)) for _ in range(n)]
    pm = DiscreteDistribution(support=(1,), probs=(1.0,))
    locs = [Location(coords=(0.0, 0.0), capacity=caps[0], dist=0.0, demand_or_supply=pm)]
    for i in range(1, n + 1):
        d = float(rng.uniform(0.5, 8.0))
        locs.append(
            Location(coords=(d, 0.0), capacity=caps[i], dist=d, demand_or_supply=pm)
        )
    costs = CostVector(
        W=float(rng.uniform(0, 20)),
        w=float(rng.uniform(0, 3)),
        h_s=float(rng.uniform(0, 3)),
        h_c=float(rng.uniform(0, 5)),
        ell=float(rng.uniform(0, 30)),
        rho=float(rng.uniform(0, 5)),
    )
    return Instance(locations=tuple(locs), q=q, C=C, costs=costs, seed=0)


def random_state(inst: Instance, rng: np.random.Generator) -> State:
    return State(
        inv=(int(rng.integers(0, min(inst.capacities[0], 10) + 1)),)
        + tuple(int(rng.integers(0, c + 1)) for c in inst.capacities[1:])
    )


def random_weights(inst: Instance, rng: np.random.Generator) -> WeightVector:
    return WeightVector(w=rng.normal(scale=20.0, size=(inst.n + 1, 4)))


class TestValue:
    def test_zero_weights(self):
        wv = WeightVector.zeros(4)
        assert value(wv, PostDecisionState(inv=(3, 1, 2, 0))) == 0.0

    def test_linear_term(self):
        wv = WeightVector(w=np.array([[1.0, 0, 0, 0]]))
        assert value(wv, PostDecisionState(inv=(5,))) == pytest.approx(5.0)

    def test_sqrt_term(self):
        wv = WeightVector(w=np.array([[0, 0, 0, 2.0]]))
        assert value(wv, PostDecisionState(inv=(9,))) == pytest.approx(6.0)

    def test_capacity_scaling_is_reparameterization(self):
        # psi(k, cap) spans the same function family as psi(k)
        assert features(6, cap=12.0) == pytest.approx(features(0.5))

    def test_masked_column_must_be_zero(self):
        with pytest.raises(ValueError):
            WeightVector(w=np.ones((2, 4)), mask=(True, False, True, True))


class TestBestAction:
    def test_zero_weights_sells_everything(self):
        rng = np.random.default_rng(0)
        inst = micro_instance(rng)
        x = random_state(inst, rng)
        a, _ = best_action(inst, x, WeightVector.zeros(inst.n + 1))
        if inst.costs.rho > 0:
            assert a.sell == x.inv[0]
            assert all(d == 0 for d in a.deliver)

    def test_empty_supply_forces_zero_action(self, toy, toy_weights):
        x = State(inv=(0, 1, 2, 0))
        a, _ = best_action(toy, x, toy_weights)
        assert a == Action.zero(3)

    def test_matches_brute_force_on_micro_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(60):
            inst = micro_instance(rng)
            x = random_state(inst, rng)
            wv = random_weights(inst, rng)
            a_dp, o_dp = best_action(inst, x, wv)
            a_bf, o_bf = brute_force_action(inst, x, wv)
            assert o_dp == o_bf  # exact, zero tolerance
            assert a_dp == a_bf

    def test_objective_not_worse_than_zero_action(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            inst = micro_instance(rng)
            x = random_state(inst, rng)
            wv = random_weights(inst, rng)
            _, obj = best_action(inst, x, wv)
            assert obj <= objective_of(inst, x, wv, Action.zero(inst.n)) + 1e-12

    def test_deterministic(self, toy, toy_weights):
        x = State(inv=(8, 1, 3, 2))
        assert best_action(toy, x, toy_weights) == best_action(toy, x, toy_weights)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(42)
        inst = micro_instance(rng)
        x = random_state(inst, rng)
        wv = random_weights(inst, rng)
        a1, _ = best_action(inst, x, wv)
        k = 3.7
        costs2 = CostVector(*(getattr(inst.costs, f) * k for f in ("W", "w", "h_s", "h_c", "ell", "rho")))
        inst2 = dataclasses.replace(inst, costs=costs2)
        a2, _ = best_action(inst2, x, WeightVector(w=wv.w * k))
        assert a1 == a2

    def test_emitted_action_feasible(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            inst = micro_instance(rng)
            x = random_state(inst, rng)
            a, _ = best_action(inst, x, random_weights(inst, rng))
            assert is_feasible(inst, x, a)


class TestEnumerationAndSampler:
    def test_enumeration_actions_all_feasible_and_unique(self):
        rng = np.random.default_rng(3)
        inst = micro_instance(rng)
        x = random_state(inst, rng)
        seen = set()
        for a in enumerate_actions(inst, x):
            assert is_feasible(inst, x, a)
            key = (a.sell, a.deliver, a.vehicles)
            assert key not in seen
            seen.add(key)
        assert seen  # zero action at least

    def test_random_action_always_feasible(self, toy):
        rng = np.random.default_rng(17)
        for _ in range(2_000):
            x = State(inv=tuple(int(rng.integers(0, c + 1)) for c in toy.capacities))
            a = random_action(toy, x, rng)
            assert is_feasible(toy, x, a)

    def test_random_action_zero_supply(self, toy):
        rng = np.random.default_rng(1)
        a = random_action(toy, State(inv=(0, 0, 0, 0)), rng)
        assert a == Action.zero(3)


class TestWeightIO:
    def test_round_trip(self, tmp_path, toy_weights):
        p = tmp_path / "w.txt"
        save_weights(toy_weights, str(p))
        back = load_weights(str(p))
        assert np.array_equal(back.w, toy_weights.w)
        assert back.mask == toy_weights.mask

    def test_bad_format_tag(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("format = something-else\n")
        with pytest.raises(ValueError, match="format"):
            load_weights(str(p))
