"""Scenario-lookahead decisions on top of trained weights.

At execution time each state decision is refined by evaluating candidate
first-stage actions against sampled supply/demand scenarios: the scenario
stage charges holding and lost sales at the resulting pre-decision state,
and the per-scenario continuation is the exact one-step constrained argmin
with the value approximation as terminal cost. With an empty horizon the
procedure reduces exactly to the plain constrained argmin.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .action_solver import WeightVector, best_action, objective_of
from .dynamics import Action, State, is_feasible, post_decision
from .instance import Instance


@dataclass(frozen=True)
class LookaheadConfig:
    horizon: int = 1
    n_scenarios: int = 20
    time_limit: float = 120.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be >= 1")


@dataclass(frozen=True)
class Scenario:
    """Realization matrix: phi[t][i] for lookahead periods t and locations i."""

    phi: tuple[tuple[int, ...], ...]


def sample_scenarios(inst: Instance, cfg: LookaheadConfig, decision_seed: int) -> list[Scenario]:
    """Independent draws per (scenario, period, location), seeded per decision."""
    rng = np.random.default_rng((cfg.seed, decision_seed))
    scenarios = []
    for _ in range(cfg.n_scenarios):
        rows = []
        for _t in range(cfg.horizon):
            phi = []
            for i in range(inst.n + 1):
                dist = inst.distribution(i)
                u = rng.random()
                idx = int(np.searchsorted(dist.cumulative(), u, side="right"))
                idx = min(idx, len(dist.support) - 1)
                phi.append(dist.support[idx])
            rows.append(tuple(phi))
        scenarios.append(Scenario(phi=tuple(rows)))
    return scenarios


def _scenario_cost(
    inst: Instance,
    s_inv: tuple[int, ...],
    scenario: Scenario,
    wv: WeightVector,
    cache: dict | None = None,
) -> float:
    """Stage terms plus exact continuation for one scenario.

    The scenario supplier inventory is NOT capped and excess is not force-sold:
    the lookahead stage charges plain holding at the uncapped level, mirroring
    the two-stage program it approximates. Horizons beyond the first period are
    evaluated as an open-loop rollout of one-step argmins.
    """
    c = inst.costs
    n = inst.n
    inv = list(s_inv)
    total = 0.0
    for t, phi in enumerate(scenario.phi):
        # Pre-decision inventories for this scenario period.
        x0 = inv[0] + phi[0]
        xs = [x0]
        for i in range(1, n + 1):
            lost = max(0, phi[i] - inv[i])
            held = max(0, inv[i] - phi[i])
            total += c.h_c * held + c.ell * lost
            xs.append(held)
        total += c.h_s * x0
        x = State(inv=tuple(xs))
        if cache is not None and x.inv in cache:
            a, obj = cache[x.inv]
        else:
            a, obj = best_action(inst, x, wv)
            if cache is not None:
                cache[x.inv] = (a, obj)
        if t == len(scenario.phi) - 1:
            total += obj  # c_x(a) + terminal value at s'
        else:
            total += _plain_action_cost(inst, a)
            s = post_decision(x, a)
            inv = list(s.inv)
    return total


def _plain_action_cost(inst: Instance, a: Action) -> float:
    c = inst.costs
    total = -c.rho * a.sell
    for b, d in zip(a.vehicles, inst.distances[1:]):
        total += b * (c.W + 2.0 * c.w * d)
    return total


def lookahead_objective(
    inst: Instance,
    x: State,
    a: Action,
    scenarios: list[Scenario],
    wv: WeightVector,
    workers: int = 1,
    cache: dict | None = None,
) -> float:
    """First-stage cost plus the scenario-average continuation cost."""
    if not is_feasible(inst, x, a):
        raise ValueError("candidate action is infeasible at this state")
    if not scenarios or len(scenarios[0].phi) == 0:
        return objective_of(inst, x, wv, a)
    s = post_decision(x, a)
    first_stage = _plain_action_cost(inst, a)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sc: _scenario_cost(inst, s.inv, sc, wv, cache), scenarios))
    else:
        parts = [_scenario_cost(inst, s.inv, sc, wv, cache) for sc in scenarios]
    # Fixed summation order keeps totals deterministic regardless of workers.
    return first_stage + sum(parts) / len(scenarios)


def _neighbors(inst: Instance, x: State, a: Action):
    """Move set: +-1 on one delivery, +-1 on a0, unit shift between customers,
    add/remove one full vehicle-load. Vehicle counts stay minimal."""
    n = inst.n
    C = inst.C

    def mk(sell: int, deliver: list[int]) -> Action | None:
        if sell < 0 or any(d < 0 for d in deliver):
            return None
        cand = Action(
            sell=sell,
            deliver=tuple(deliver),
            vehicles=tuple(-(-d // C) for d in deliver),
        )
        return cand if is_feasible(inst, x, cand) else None

    for i in range(n):
        for step in (1, -1):
            d = list(a.deliver)
            d[i] += step
            cand = mk(a.sell, d)
            if cand:
                yield cand
        for step in (C, -C):
            d = list(a.deliver)
            d[i] += step
            cand = mk(a.sell, d)
            if cand:
                yield cand
    for step in (1, -1):
        cand = mk(a.sell + step, list(a.deliver))
        if cand:
            yield cand
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = list(a.deliver)
            d[i] += 1
            d[j] -= 1
            cand = mk(a.sell, d)
            if cand:
                yield cand


def lcrl_decide(
    inst: Instance,
    x: State,
    wv: WeightVector,
    cfg: LookaheadConfig,
    decision_seed: int = 0,
    cache: dict | None = None,
) -> Action:
    """Local search over first-stage actions from the plain argmin start."""
    start, _ = best_action(inst, x, wv)
    if cfg.horizon == 0:
        return start
    if cfg.time_limit <= 0:
        return start
    deadline = time.monotonic() + cfg.time_limit
    scenarios = sample_scenarios(inst, cfg, decision_seed)

    incumbent = start
    best_obj = lookahead_objective(inst, x, start, scenarios, wv, workers=cfg.workers, cache=cache)
    improved = True
    while improved and time.monotonic() < deadline:
        improved = False
        for cand in _neighbors(inst, x, incumbent):
            if time.monotonic() >= deadline:
                break
            obj = lookahead_objective(inst, x, cand, scenarios, wv, workers=cfg.workers, cache=cache)
            if obj < best_obj:
                incumbent = cand
                best_obj = obj
                improved = True
                break
    return incumbent


def lcrl_policy(inst: Instance, wv: WeightVector, cfg: LookaheadConfig):
    """Simulation policy: one seeded lookahead decision per period.

    Second-stage argmin results are memoized across periods; the weights are
    frozen, so cached entries never go stale."""
    cache: dict = {}

    def policy(x: State, period: int) -> Action:
        return lcrl_decide(inst, x, wv, cfg, decision_seed=period, cache=cache)

    return policy
