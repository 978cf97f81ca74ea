"""Relative value iteration against exact Markov-chain oracles."""

from __future__ import annotations

import itertools
from dataclasses import replace

import numpy as np
import pytest

from dirplab import (
    CostVector,
    Realization,
    State,
    StateSpaceTooLarge,
    action_cost,
    gen_toy,
    is_feasible,
    policy_slice,
    simulate,
    stage_cost,
    transition,
    value_iteration,
    write_slice_csv,
)
from dirplab.dynamics import post_decision


def chain_gain(inst, table):
    """Exact long-run average cost of the tabled policy.

    Builds the transition matrix over pre-decision states, solves for the
    stationary distribution, and averages the exact one-period cost.
    """
    shape = tuple(u + 1 for u in inst.capacities)
    states = list(itertools.product(*(range(d) for d in shape)))
    index = {x: k for k, x in enumerate(states)}
    m = len(states)
    P = np.zeros((m, m))
    r = np.zeros(m)
    supports = [inst.distribution(i).support for i in range(inst.n + 1)]
    probs = [inst.distribution(i).probs for i in range(inst.n + 1)]
    for k, inv in enumerate(states):
        x = State(inv=inv)
        a = table.action_at(x)
        assert is_feasible(inst, x, a)
        s = post_decision(x, a)
        r[k] = action_cost(inst, a)
        for combo in itertools.product(*(range(len(sup)) for sup in supports)):
            p = 1.0
            phi_vals = []
            for i, j in enumerate(combo):
                p *= probs[i][j]
                phi_vals.append(supports[i][j])
            phi = Realization(phi=tuple(phi_vals))
            r[k] += p * stage_cost(inst, s, phi)
            nxt = transition(inst, s, phi)
            P[k, index[nxt.inv]] += p
    # stationary distribution of P via the eigenvector at eigenvalue 1
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    pi = pi / pi.sum()
    assert np.all(pi > -1e-10)
    return float(pi @ r)


@pytest.fixture(scope="module")
def tiny():
    return gen_toy(1, 1, 3)


@pytest.fixture(scope="module")
def tiny_vi(tiny):
    return value_iteration(tiny, eps=1e-4)


class TestGain:
    def test_gain_matches_chain_oracle(self, tiny, tiny_vi):
        assert tiny_vi.gain == pytest.approx(chain_gain(tiny, tiny_vi), rel=1e-3)

    def test_gain_matches_long_simulation(self, toy, toy_vi):
        rep = simulate(toy, toy_vi.policy(), 200_000, 5_000, seed=17)
        assert rep.avg_total == pytest.approx(toy_vi.gain, rel=0.02)

    def test_all_zero_costs(self, tiny):
        free = replace(tiny, costs=CostVector(0, 0, 0, 0, 0, 0))
        table = value_iteration(free, eps=1e-6)
        assert table.gain == pytest.approx(0.0, abs=1e-9)

    def test_lost_sale_only_floor(self, tiny):
        # with only the lost-sales penalty active, the optimum keeps every
        # customer stocked and the gain cannot exceed ell * E[d] in any case
        pen = replace(tiny, costs=CostVector(0, 0, 0, 0, 15, 0))
        table = value_iteration(pen, eps=1e-6)
        worst = 15 * sum(pen.distribution(i).mean for i in range(1, pen.n + 1))
        assert 0.0 <= table.gain <= worst + 1e-9


class TestPolicy:
    def test_feasible_everywhere(self, toy, toy_vi):
        shape = tuple(u + 1 for u in toy.capacities)
        for inv in itertools.product(*(range(d) for d in shape)):
            x = State(inv=inv)
            assert is_feasible(toy, x, toy_vi.action_at(x))

    def test_empty_state_idles(self, toy, toy_vi):
        a = toy_vi.action_at(State(inv=(0,) * (toy.n + 1)))
        assert a.sell == 0 and sum(a.deliver) == 0 and sum(a.vehicles) == 0

    def test_deterministic(self, tiny, tiny_vi):
        again = value_iteration(tiny, eps=1e-4)
        assert again.gain == tiny_vi.gain
        assert np.array_equal(again.sell, tiny_vi.sell)
        assert np.array_equal(again.deliver, tiny_vi.deliver)

    def test_converged_metadata(self, toy, toy_vi):
        assert toy_vi.span < 0.01
        assert toy_vi.iterations >= 2
        assert toy_vi.warnings == []

    def test_max_iters_warning(self, tiny):
        table = value_iteration(tiny, eps=1e-12, max_iters=2)
        assert table.warnings and "max_iters" in table.warnings[0]


class TestGuards:
    def test_state_space_bound(self, toy):
        with pytest.raises(StateSpaceTooLarge):
            value_iteration(toy, max_states=10)

    def test_eps_validation(self, tiny):
        with pytest.raises(ValueError):
            value_iteration(tiny, eps=0.0)


class TestSlices:
    def test_slice_shape(self, toy, toy_vi):
        fixed = {k: 0 for k in range(toy.n + 1) if k not in (0, 1)}
        grid = policy_slice(toy_vi, fixed, (0, 1))
        assert len(grid) == toy.capacities[0] + 1
        assert len(grid[0]) == toy.capacities[1] + 1

    def test_slice_matches_pointwise(self, toy, toy_vi):
        fixed = {k: 1 for k in range(toy.n + 1) if k not in (0, 2)}
        grid = policy_slice(toy_vi, fixed, (0, 2))
        inv = [0] * (toy.n + 1)
        for k, v in fixed.items():
            inv[k] = v
        inv[0], inv[2] = 5, 3
        assert grid[5][3] == toy_vi.action_at(State(inv=tuple(inv)))

    def test_missing_fixed_rejected(self, toy, toy_vi):
        with pytest.raises(ValueError):
            policy_slice(toy_vi, {}, (0, 1))

    def test_csv_export(self, toy, toy_vi, tmp_path):
        fixed = {k: 0 for k in range(toy.n + 1) if k not in (0, 1)}
        p = tmp_path / "slice.csv"
        write_slice_csv(toy_vi, fixed, (0, 1), 1, str(p))
        lines = p.read_text().strip().splitlines()
        assert len(lines) == toy.capacities[0] + 2  # header + one row per level
        assert lines[0].startswith("x0\\x1")
