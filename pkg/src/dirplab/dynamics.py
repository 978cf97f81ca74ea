"""MDP mechanics: feasibility, costs, transitions, and period simulation.

A period runs: pre-decision state x -> action a (paying the action cost)
-> post-decision state s -> supply/demand realization phi (paying the
stochastic stage cost) -> next pre-decision state x'.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance


class InfeasibleActionError(RuntimeError):
    """A policy emitted an action violating the feasible-action constraints."""


@dataclass(frozen=True)
class State:
    inv: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.inv):
            raise ValueError("inventories must be >= 0")


@dataclass(frozen=True)
class Action:
    """sell units from the supplier (a0), deliver[i] units to customer i+1
    using vehicles[i] vehicles."""

    sell: int
    deliver: tuple[int, ...]
    vehicles: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.deliver) != len(self.vehicles):
            raise ValueError("deliver and vehicles must have equal length")

    @staticmethod
    def zero(n: int) -> "Action":
        return Action(sell=0, deliver=(0,) * n, vehicles=(0,) * n)

    def total_vehicles(self) -> int:
        return sum(self.vehicles)


@dataclass(frozen=True)
class PostDecisionState:
    inv: tuple[int, ...]


@dataclass(frozen=True)
class Realization:
    phi: tuple[int, ...]


def feasibility_violation(inst: Instance, x: State, a: Action) -> str | None:
    """Return a description of the first violated constraint, or None."""
    n = inst.n
    if len(x.inv) != n + 1 or len(a.deliver) != n:
        return "dimension mismatch between state and action"
    if a.sell < 0:
        return f"negative sell quantity a0={a.sell}"
    for i, (d, b) in enumerate(zip(a.deliver, a.vehicles), start=1):
        if d < 0:
            return f"negative delivery a{i}={d}"
        if b < 0 or int(b) != b:
            return f"vehicle count b{i}={b} must be a non-negative integer"
        if d > inst.C * b:
            return f"delivery a{i}={d} exceeds vehicle capacity C*b{i}={inst.C * b}"
        if x.inv[i] + d > inst.locations[i].capacity:
            return (
                f"customer {i} inventory {x.inv[i]}+{d} exceeds capacity "
                f"{inst.locations[i].capacity}"
            )
    if a.sell + sum(a.deliver) > x.inv[0]:
        return (
            f"total outflow {a.sell + sum(a.deliver)} exceeds supplier inventory {x.inv[0]}"
        )
    if sum(a.vehicles) > inst.q:
        return f"total vehicles {sum(a.vehicles)} exceeds fleet size {inst.q}"
    return None


def is_feasible(inst: Instance, x: State, a: Action) -> bool:
    return feasibility_violation(inst, x, a) is None


def post_decision(x: State, a: Action) -> PostDecisionState:
    s0 = x.inv[0] - a.sell - sum(a.deliver)
    return PostDecisionState(inv=(s0,) + tuple(xi + ai for xi, ai in zip(x.inv[1:], a.deliver)))


def action_cost(inst: Instance, a: Action) -> float:
    """-rho*a0 plus per-customer transport b_i*(W + 2*w*d_i)."""
    c = inst.costs
    total = -c.rho * a.sell
    for b, d in zip(a.vehicles, inst.distances[1:]):
        total += b * (c.W + 2.0 * c.w * d)
    return total


def stage_cost(inst: Instance, s: PostDecisionState, phi: Realization) -> float:
    """Holding, lost sales, and forced overflow sale after the realization."""
    c = inst.costs
    u0 = inst.locations[0].capacity
    arrived = s.inv[0] + phi.phi[0]
    total = -c.rho * max(0, arrived - u0) + c.h_s * min(arrived, u0)
    for si, fi in zip(s.inv[1:], phi.phi[1:]):
        total += c.h_c * max(0, si - fi) + c.ell * max(0, fi - si)
    return total


def stage_cost_components(inst: Instance, s: PostDecisionState, phi: Realization) -> dict[str, float]:
    c = inst.costs
    u0 = inst.locations[0].capacity
    arrived = s.inv[0] + phi.phi[0]
    hold_c = 0.0
    lost = 0.0
    for si, fi in zip(s.inv[1:], phi.phi[1:]):
        hold_c += c.h_c * max(0, si - fi)
        lost += c.ell * max(0, fi - si)
    return {
        "supplier_holding": c.h_s * min(arrived, u0),
        "customer_holding": hold_c,
        "lost_sales": lost,
        "overflow_sale": -c.rho * max(0, arrived - u0),
    }


def transition(inst: Instance, s: PostDecisionState, phi: Realization) -> State:
    u0 = inst.locations[0].capacity
    x0 = min(s.inv[0] + phi.phi[0], u0)
    return State(inv=(x0,) + tuple(max(0, si - fi) for si, fi in zip(s.inv[1:], phi.phi[1:])))


class RealizationStream:
    """Per-location realization streams, deterministic in (seed, location, period).

    Each location has its own generator seeded by (seed, location); outcome at
    a period is the inverse-CDF transform of that location's uniform stream at
    the same index. Policies that differ in decision logic therefore consume
    identical realizations, enabling paired comparisons.
    """

    BLOCK = 8192

    def __init__(self, inst: Instance, seed: int):
        self.inst = inst
        self.seed = seed
        self._rngs = [np.random.default_rng((seed, i)) for i in range(inst.n + 1)]
        self._supports = [np.asarray(inst.distribution(i).support) for i in range(inst.n + 1)]
        self._cums = [inst.distribution(i).cumulative() for i in range(inst.n + 1)]
        self._blocks: list[list[int]] = [[] for _ in range(inst.n + 1)]

    def _extend(self, loc: int, upto: int) -> None:
        blk = self._blocks[loc]
        while len(blk) <= upto:
            u = self._rngs[loc].random(self.BLOCK)
            idx = np.searchsorted(self._cums[loc], u, side="right")
            idx = np.minimum(idx, len(self._supports[loc]) - 1)
            blk.extend(int(v) for v in self._supports[loc][idx])

    def get(self, period: int) -> Realization:
        phi = []
        for loc in range(self.inst.n + 1):
            if period >= len(self._blocks[loc]):
                self._extend(loc, period)
            phi.append(self._blocks[loc][period])
        return Realization(phi=tuple(phi))

    def prefetch(self, periods: int) -> list[list[int]]:
        """Materialize the first `periods` outcomes per location (fast path)."""
        for loc in range(self.inst.n + 1):
            self._extend(loc, periods - 1)
        return [blk[:periods] for blk in self._blocks]


COMPONENTS = ("transport", "supplier_holding", "customer_holding", "lost_sales", "sales_profit")


@dataclass
class SimReport:
    periods: int
    warmup: int
    avg_total: float
    avg_components: dict[str, float]
    seed: int
    trace: list[dict] | None = field(default=None, repr=False)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["component", "avg_per_period"])
            for name in COMPONENTS:
                writer.writerow([name, repr(self.avg_components[name])])
            writer.writerow(["total", repr(self.avg_total)])


def simulate(
    inst: Instance,
    policy,
    periods: int,
    warmup: int,
    seed: int,
    *,
    initial: State | None = None,
    keep_trace: bool = False,
) -> SimReport:
    """Run the period timeline under `policy(state, period) -> Action`.

    Averages cost components over the post-warmup periods. Any infeasible
    action raises InfeasibleActionError naming the violated constraint:
    benchmark policies must repair internally, never here.
    """
    if not periods > warmup >= 0:
        raise ValueError("need periods > warmup >= 0")
    c = inst.costs
    n = inst.n
    u0 = inst.locations[0].capacity
    caps = inst.capacities
    trans_cost = [c.W + 2.0 * c.w * d for d in inst.distances]
    stream = RealizationStream(inst, seed)
    phis = stream.prefetch(periods)

    x = initial if initial is not None else State(inv=(0,) * (n + 1))
    inv = list(x.inv)
    sums = {name: 0.0 for name in COMPONENTS}
    trace: list[dict] | None = [] if keep_trace else None
    counted = 0

    for t in range(periods):
        state = State(inv=tuple(inv))
        a = policy(state, t)
        violation = feasibility_violation(inst, state, a)
        if violation is not None:
            raise InfeasibleActionError(
                f"policy emitted infeasible action at period {t}, state {state.inv}: {violation}"
            )
        transport = 0.0
        for i in range(n):
            transport += a.vehicles[i] * trans_cost[i + 1]
        sales = -c.rho * a.sell

        s0 = inv[0] - a.sell - sum(a.deliver)
        phi0 = phis[0][t]
        arrived = s0 + phi0
        overflow = arrived - u0 if arrived > u0 else 0
        sales += -c.rho * overflow
        sup_hold = c.h_s * (arrived if arrived < u0 else u0)

        cust_hold = 0.0
        lost = 0.0
        new_inv = [u0 if arrived > u0 else arrived]
        for i in range(1, n + 1):
            si = inv[i] + a.deliver[i - 1]
            fi = phis[i][t]
            left = si - fi
            if left >= 0:
                cust_hold += c.h_c * left
                new_inv.append(left)
            else:
                lost += c.ell * (-left)
                new_inv.append(0)
            if si > caps[i]:
                raise InfeasibleActionError(
                    f"post-decision inventory {si} exceeds capacity at customer {i}"
                )
        inv = new_inv

        if t >= warmup:
            counted += 1
            sums["transport"] += transport
            sums["supplier_holding"] += sup_hold
            sums["customer_holding"] += cust_hold
            sums["lost_sales"] += lost
            sums["sales_profit"] += sales
        if trace is not None:
            trace.append(
                {
                    "period": t,
                    "state": tuple(state.inv),
                    "action": a,
                    "phi": (phi0,) + tuple(phis[i][t] for i in range(1, n + 1)),
                    "transport": transport,
                    "supplier_holding": sup_hold,
                    "customer_holding": cust_hold,
                    "lost_sales": lost,
                    "sales_profit": sales,
                }
            )

    avgs = {name: v / counted for name, v in sums.items()}
    return SimReport(
        periods=periods,
        warmup=warmup,
        avg_total=math.fsum(avgs.values()),
        avg_components=avgs,
        seed=seed,
        trace=trace,
    )


def zero_policy(x: State, period: int) -> Action:
    return Action.zero(len(x.inv) - 1)
