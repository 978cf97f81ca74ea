"""Decomposed relative value iteration: the optimality oracle for small instances.

Each iteration sweeps the per-location expectations (customers N..1, then the
supplier), building the post-decision value table, then minimizes over the
feasible action set per state. In the undiscounted average-cost setting the
per-iteration increments converge to the long-run gain, so the stopping rule
is span(increment) < eps; the gain is the mean of the final increment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dynamics import Action, State
from .instance import Instance

DEFAULT_MAX_STATES = 2_000_000


class StateSpaceTooLarge(RuntimeError):
    pass


@dataclass
class PolicyTable:
    """Optimal action per flattened pre-decision state, with values and gain."""

    inst: Instance
    shape: tuple[int, ...]
    sell: np.ndarray           # flat int array, a0 per state
    deliver: np.ndarray        # (n_states, N) int array
    values: np.ndarray         # final relative pre-decision values, flat
    post_values: np.ndarray    # final post-decision value table V0, flat
    gain: float
    iterations: int
    span: float
    warnings: list[str] = field(default_factory=list)

    def action_at(self, x: State) -> Action:
        idx = int(np.ravel_multi_index(x.inv, self.shape))
        deliver = tuple(int(v) for v in self.deliver[idx])
        C = self.inst.C
        return Action(
            sell=int(self.sell[idx]),
            deliver=deliver,
            vehicles=tuple(-(-a // C) for a in deliver),
        )

    def policy(self):
        def _policy(x: State, period: int) -> Action:
            return self.action_at(x)

        return _policy


def _delivery_patterns(inst: Instance):
    """All delivery vectors with minimal vehicles and total fleet within q,
    ordered by the solver tie-breaking (vehicles, units, lexicographic)."""
    C = inst.C
    caps = inst.capacities
    ranges = [range(caps[i] + 1) for i in range(1, inst.n + 1)]
    patterns = []
    for d in product(*ranges):
        veh = sum(-(-a // C) for a in d)
        if veh <= inst.q:
            patterns.append((sum(d), veh, d))
    patterns.sort(key=lambda p: (p[1], p[0], p[2]))
    return patterns


def _lex_improves(cand, cur):
    better = cand[-1] < cur[-1]
    for c, o in zip(reversed(cand[:-1]), reversed(cur[:-1])):
        better = (c < o) | ((c == o) & better)
    return better


def _expectation_sweeps(inst: Instance, V: np.ndarray) -> np.ndarray:
    """Post-decision values V0(s) = E[c_s(phi) + V(x')], location by location."""
    c = inst.costs
    n = inst.n
    T = V
    for i in range(n, 0, -1):
        dist = inst.distribution(i)
        ui = inst.capacities[i]
        levels = np.arange(ui + 1)
        acc = np.zeros_like(T)
        for phi, p in zip(dist.support, dist.probs):
            nxt = np.maximum(levels - phi, 0)
            cost = c.h_c * np.maximum(levels - phi, 0) + c.ell * np.maximum(phi - levels, 0)
            shape = [1] * T.ndim
            shape[i] = ui + 1
            acc += p * (np.take(T, nxt, axis=i) + cost.reshape(shape))
        T = acc
    dist = inst.distribution(0)
    u0 = inst.capacities[0]
    levels = np.arange(u0 + 1)
    acc = np.zeros_like(T)
    for phi, p in zip(dist.support, dist.probs):
        arrived = levels + phi
        nxt = np.minimum(arrived, u0)
        cost = -c.rho * np.maximum(arrived - u0, 0) + c.h_s * np.minimum(arrived, u0)
        shape = [1] * T.ndim
        shape[0] = u0 + 1
        acc += p * (np.take(T, nxt, axis=0) + cost.reshape(shape))
    return acc


def _sell_prefix(inst: Instance, V0: np.ndarray):
    """Best supplier sell decision folded into the table.

    W0[j, y] = min_{a0 <= j} -rho*a0 + V0[j - a0, y], with the smallest
    minimizing a0 recorded; computed as a running prefix recurrence along the
    supplier axis.
    """
    rho = inst.costs.rho
    W0 = V0.copy()
    A0 = np.zeros(V0.shape, dtype=np.int64)
    for j in range(1, V0.shape[0]):
        shifted = -rho + W0[j - 1]
        keep = V0[j] <= shifted  # tie keeps a0 = 0
        W0[j] = np.where(keep, V0[j], shifted)
        A0[j] = np.where(keep, 0, A0[j - 1] + 1)
    return W0, A0


def value_iteration(
    inst: Instance,
    eps: float = 0.01,
    max_iters: int = 10_000,
    max_states: int = DEFAULT_MAX_STATES,
) -> PolicyTable:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    n_states = inst.state_space_size()
    if n_states > max_states:
        raise StateSpaceTooLarge(
            f"state space has {n_states} states, above the bound {max_states}"
        )
    n = inst.n
    shape = tuple(u + 1 for u in inst.capacities)
    c = inst.costs
    patterns = _delivery_patterns(inst)
    trans_costs = [c.W + 2.0 * c.w * d for d in inst.distances]

    V = np.zeros(shape)
    warnings: list[str] = []
    prev_span = np.inf
    gain = 0.0
    span = np.inf
    it = 0
    best_pat = np.zeros(shape, dtype=np.int64)
    best_a0 = np.zeros(shape, dtype=np.int64)

    for it in range(1, max_iters + 1):
        V0 = _expectation_sweeps(inst, V)
        W0, A0 = _sell_prefix(inst, V0)

        Vnew = np.full(shape, np.inf)
        kveh = np.zeros(shape, dtype=np.int64)
        kunits = np.zeros(shape, dtype=np.int64)
        ka0 = np.zeros(shape, dtype=np.int64)
        best_pat.fill(0)
        for p_idx, (tot, veh, d) in enumerate(patterns):
            tcost = sum(-(-a // inst.C) * trans_costs[i + 1] for i, a in enumerate(d))
            # Feasible region: x0 >= tot and x_i <= U_i - d_i; pure slicing.
            src = (slice(0, shape[0] - tot),) + tuple(
                slice(d[i - 1], shape[i]) for i in range(1, n + 1)
            )
            dst = (slice(tot, shape[0]),) + tuple(
                slice(0, shape[i] - d[i - 1]) for i in range(1, n + 1)
            )
            cand_obj = tcost + W0[src]
            cand_a0 = A0[src]
            veh_arr = np.full(cand_obj.shape, veh, dtype=np.int64)
            units_arr = np.full(cand_obj.shape, tot, dtype=np.int64)
            improve = _lex_improves(
                (cand_obj, veh_arr, units_arr, cand_a0),
                (Vnew[dst], kveh[dst], kunits[dst], ka0[dst]),
            )
            np.copyto(Vnew[dst], cand_obj, where=improve)
            np.copyto(kveh[dst], veh, where=improve)
            np.copyto(kunits[dst], tot, where=improve)
            np.copyto(ka0[dst], cand_a0, where=improve)
            np.copyto(best_pat[dst], p_idx, where=improve)
        best_a0 = ka0

        delta = Vnew - V
        span = float(delta.max() - delta.min())
        gain = float(delta.mean())
        if it > 1 and span > prev_span + 1e-9:
            warnings.append(f"span increased at iteration {it}: {prev_span} -> {span}")
        prev_span = span
        V = Vnew - Vnew.flat[0]  # relative normalization keeps values bounded
        if span < eps:
            break
    else:
        warnings.append(f"max_iters={max_iters} reached with span {span}")

    V0 = _expectation_sweeps(inst, V)
    flat_pat = best_pat.reshape(-1)
    deliver = np.array([patterns[k][2] for k in flat_pat], dtype=np.int64)
    return PolicyTable(
        inst=inst,
        shape=shape,
        sell=best_a0.reshape(-1).copy(),
        deliver=deliver,
        values=V.reshape(-1).copy(),
        post_values=V0.reshape(-1).copy(),
        gain=gain,
        iterations=it,
        span=span,
        warnings=warnings,
    )


def policy_slice(
    table: PolicyTable, fixed: dict[int, int], axes: tuple[int, int]
) -> list[list[Action]]:
    """2-D slice of the policy: vary the two axis locations, fix the rest."""
    ax_a, ax_b = axes
    n_loc = len(table.shape)
    for i in range(n_loc):
        if i not in (ax_a, ax_b) and i not in fixed:
            raise ValueError(f"location {i} must be fixed or an axis")
    grid = []
    for va in range(table.shape[ax_a]):
        row = []
        for vb in range(table.shape[ax_b]):
            inv = [0] * n_loc
            for i, v in fixed.items():
                inv[i] = v
            inv[ax_a] = va
            inv[ax_b] = vb
            row.append(table.action_at(State(inv=tuple(inv))))
        grid.append(row)
    return grid


def write_slice_csv(
    table: PolicyTable, fixed: dict[int, int], axes: tuple[int, int], customer: int, path: str
) -> None:
    """CSV grid of the delivery quantity to one customer over a policy slice."""
    grid = policy_slice(table, fixed, axes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{axes[0]}\\x{axes[1]}"] + list(range(table.shape[axes[1]])))
        for va, row in enumerate(grid):
            writer.writerow([va] + [a.deliver[customer - 1] for a in row])
