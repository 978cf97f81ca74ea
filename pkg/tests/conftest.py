"""Shared fixtures: reference instances and cached expensive artifacts."""

from __future__ import annotations

import pytest

from dirplab import (
    Instance,
    Location,
    CostVector,
    DiscreteDistribution,
    TrainerConfig,
    gen_toy,
    scaled_config,
    train,
)
from dirplab.instance import TOY_COSTS
from dirplab.vi import value_iteration


def point_mass(v: int) -> DiscreteDistribution:
    return DiscreteDistribution(support=(v,), probs=(1.0,))


def worked_example_instance() -> Instance:
    """The hand-worked single-period example: 3 customers, C=4, q=3,
    capacities (18,9,8,7), deterministic realization (16,4,5,3),
    distances d1=2, d3=3."""
    locs = (
        Location(coords=(0.0, 0.0), capacity=18, dist=0.0, demand_or_supply=point_mass(16)),
        Location(coords=(2.0, 0.0), capacity=9, dist=2.0, demand_or_supply=point_mass(4)),
        Location(coords=(4.0, 0.0), capacity=8, dist=4.0, demand_or_supply=point_mass(5)),
        Location(coords=(3.0, 0.0), capacity=7, dist=3.0, demand_or_supply=point_mass(3)),
    )
    return Instance(locations=locs, q=3, C=4, costs=TOY_COSTS, seed=0)


@pytest.fixture(scope="session")
def fig_instance() -> Instance:
    return worked_example_instance()


@pytest.fixture(scope="session")
def toy() -> Instance:
    return gen_toy(3, 2, 7)


@pytest.fixture(scope="session")
def toy_vi(toy):
    return value_iteration(toy)


@pytest.fixture(scope="session")
def toy_weights(toy):
    """A modestly trained weight vector for tests that need plausible values."""
    return train(toy, scaled_config(TrainerConfig(seed=5), 5_000)).weights
