"""Exact per-state action selection against a separable value approximation.

The objective c_x(a) + v(s') separates across locations because the value
approximation is a per-location basis expansion, so the argmin over the
feasible action set is solved exactly by a dynamic program over customers
with state (units allocated, vehicles used). A guarded exhaustive
enumerator serves as the test oracle, and a feasible-action sampler backs
epsilon-greedy exploration.

Tie-breaking everywhere: smaller objective, then fewer total vehicles, then
smaller total delivered quantity, then smaller sell quantity a0, then the
lexicographically smallest delivery vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Action, PostDecisionState, State
from .instance import Instance

FEATURE_NAMES = ("s", "s2", "s3", "sqrt_s")
N_FEATURES = 4

WEIGHTS_FORMAT_TAG = "dirp-weights-v1"


def features(k: float, cap: float = 1.0) -> tuple[float, float, float, float]:
    """Basis evaluated at one inventory level: (u, u^2, u^3, sqrt(u)) for u = k/cap.

    Levels are expressed as a fill fraction of the location capacity so the
    cubic term stays O(1); this is an exact reparameterization of the raw
    polynomial basis (weights absorb the fixed powers of cap) but keeps the
    online learner's step sizes stable.
    """
    u = k / cap
    return (u, u * u, u * u * u, math.sqrt(u))


@dataclass(frozen=True)
class WeightVector:
    """Per-location feature weights; disabled mask columns are exactly zero."""

    w: np.ndarray                 # shape (N+1, 4)
    mask: tuple[bool, bool, bool, bool] = (True, True, True, True)

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[1] != N_FEATURES:
            raise ValueError(f"weights must have shape (N+1, {N_FEATURES})")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        for f, enabled in enumerate(self.mask):
            if not enabled and np.any(w[:, f] != 0.0):
                raise ValueError(f"masked-out feature column {FEATURE_NAMES[f]} must be zero")
        object.__setattr__(self, "w", w)

    @staticmethod
    def zeros(n_locations: int, mask=(True, True, True, True)) -> "WeightVector":
        return WeightVector(w=np.zeros((n_locations, N_FEATURES)), mask=mask)

    @property
    def n_locations(self) -> int:
        return self.w.shape[0]

    def location_values(self, i: int, upto: int, cap: float = 1.0) -> np.ndarray:
        """Tabulate v_i(k) = w[i] . psi(k, cap) for k in [0, upto]."""
        ks = np.arange(upto + 1, dtype=float) / cap
        return self.w[i, 0] * ks + self.w[i, 1] * ks**2 + self.w[i, 2] * ks**3 + self.w[i, 3] * np.sqrt(ks)


def value(wv: WeightVector, s: PostDecisionState, caps: tuple[int, ...] | None = None) -> float:
    total = 0.0
    for i, si in enumerate(s.inv):
        psi = features(si, caps[i] if caps else 1.0)
        row = wv.w[i]
        total += row[0] * psi[0] + row[1] * psi[1] + row[2] * psi[2] + row[3] * psi[3]
    return total


def save_weights(wv: WeightVector, path: str) -> None:
    lines = [f"format = {WEIGHTS_FORMAT_TAG}"]
    lines.append(f"locations = {wv.n_locations}")
    lines.append("mask = " + " ".join(str(int(m)) for m in wv.mask))
    lines.append("features = " + " ".join(FEATURE_NAMES))
    for i in range(wv.n_locations):
        lines.append(f"location {i} = " + " ".join(repr(float(v)) for v in wv.w[i]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path: str) -> WeightVector:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    kv = {}
    rows = {}
    for ln in lines:
        key, _, val = ln.partition("=")
        key = key.strip()
        if key.startswith("location "):
            rows[int(key.split()[1])] = [float(v) for v in val.split()]
        else:
            kv[key] = val.strip()
    if kv.get("format") != WEIGHTS_FORMAT_TAG:
        raise ValueError(f"{path}: bad or missing weights format tag")
    n_loc = int(kv["locations"])
    mask = tuple(bool(int(v)) for v in kv["mask"].split())
    w = np.zeros((n_loc, N_FEATURES))
    for i in range(n_loc):
        if i not in rows:
            raise ValueError(f"{path}: missing weights row for location {i}")
        w[i] = rows[i]
    return WeightVector(w=w, mask=mask)


def _lex_improves(cand: tuple[np.ndarray, ...], cur: tuple[np.ndarray, ...]) -> np.ndarray:
    """Vectorized strict lexicographic comparison over aligned key arrays."""
    better = cand[-1] < cur[-1]
    for c, o in zip(reversed(cand[:-1]), reversed(cur[:-1])):
        better = (c < o) | ((c == o) & better)
    return better


def _supplier_stage(inst: Instance, x0: int, wv: WeightVector):
    """For every pre-sell supplier level j: the best -rho*a0 + v0(j - a0).

    Returns (obj[j], a0[j]) with ties broken toward smaller a0.
    """
    rho = inst.costs.rho
    v0 = wv.location_values(0, x0, cap=inst.capacities[0])
    obj = np.empty(x0 + 1)
    a0s = np.empty(x0 + 1, dtype=np.int64)
    sell_gain = -rho * np.arange(x0 + 1, dtype=float)
    for j in range(x0 + 1):
        cand = sell_gain[: j + 1] + v0[j::-1]
        k = int(np.argmin(cand))  # argmin returns the first minimizer: smallest a0
        obj[j] = cand[k]
        a0s[j] = k
    return obj, a0s


def best_action(inst: Instance, x: State, wv: WeightVector) -> tuple[Action, float]:
    """Exact minimizer of c_x(a) + v(s'(x, a)) over the feasible action set.

    Backward DP over customers on (units allocated, vehicles used); each
    customer uses the minimal vehicle count ceil(a_i / C), which is never
    beaten by a larger one because transport cost increases in b_i.
    """
    n = inst.n
    x0 = x.inv[0]
    q = inst.q
    C = inst.C
    costs = inst.costs
    caps = inst.capacities

    sup_obj, sup_a0 = _supplier_stage(inst, x0, wv)

    inf = np.inf
    # DP keys per (units u, vehicles r) already committed before this customer:
    # objective, vehicles used downstream, units downstream, chosen a0.
    obj = np.tile(sup_obj[::-1].reshape(-1, 1), (1, q + 1))  # h_{N+1}[u, r] = sup_obj[x0-u]
    veh = np.zeros((x0 + 1, q + 1), dtype=np.int64)
    units = np.zeros((x0 + 1, q + 1), dtype=np.int64)
    a0k = np.tile(sup_a0[::-1].reshape(-1, 1), (1, q + 1))
    choices: list[np.ndarray] = []

    for i in range(n, 0, -1):
        trans = costs.W + 2.0 * costs.w * inst.distances[i]
        vtab = wv.location_values(i, caps[i], cap=caps[i])
        amax = min(caps[i] - x.inv[i], x0)
        nobj = np.full((x0 + 1, q + 1), inf)
        nveh = np.zeros((x0 + 1, q + 1), dtype=np.int64)
        nunits = np.zeros((x0 + 1, q + 1), dtype=np.int64)
        na0 = np.zeros((x0 + 1, q + 1), dtype=np.int64)
        choice = np.zeros((x0 + 1, q + 1), dtype=np.int64)
        for a in range(amax + 1):
            b = -(-a // C)
            if b > q:
                break
            t = b * trans + vtab[x.inv[i] + a]
            cand_obj = t + obj[a:, b:]
            cand_veh = b + veh[a:, b:]
            cand_units = a + units[a:, b:]
            cand_a0 = a0k[a:, b:]
            sl = (slice(0, x0 + 1 - a), slice(0, q + 1 - b))
            improve = _lex_improves(
                (cand_obj, cand_veh, cand_units, cand_a0),
                (nobj[sl], nveh[sl], nunits[sl], na0[sl]),
            )
            np.copyto(nobj[sl], cand_obj, where=improve)
            np.copyto(nveh[sl], cand_veh, where=improve)
            np.copyto(nunits[sl], cand_units, where=improve)
            np.copyto(na0[sl], cand_a0, where=improve)
            np.copyto(choice[sl], a, where=improve)
        obj, veh, units, a0k = nobj, nveh, nunits, na0
        choices.append(choice)
    choices.reverse()  # choices[i-1] now belongs to customer i

    deliver = []
    vehicles = []
    u = 0
    r = 0
    for i in range(1, n + 1):
        a = int(choices[i - 1][u, r])
        b = -(-a // C)
        deliver.append(a)
        vehicles.append(b)
        u += a
        r += b
    a0 = int(sup_a0[x0 - u])
    action = Action(sell=a0, deliver=tuple(deliver), vehicles=tuple(vehicles))
    return action, float(obj[0, 0] if n > 0 else sup_obj[x0])


def objective_of(inst: Instance, x: State, wv: WeightVector, a: Action) -> float:
    """Objective c_x(a) + v(s'), accumulated in the same association order as
    the DP so that oracle comparisons are float-exact."""
    costs = inst.costs
    s0 = x.inv[0] - a.sell - sum(a.deliver)
    acc = -costs.rho * a.sell + float(wv.location_values(0, s0, cap=inst.capacities[0])[s0])
    for i in range(inst.n, 0, -1):
        trans = costs.W + 2.0 * costs.w * inst.distances[i]
        si = x.inv[i] + a.deliver[i - 1]
        acc = a.vehicles[i - 1] * trans + float(wv.location_values(i, si, cap=inst.capacities[i])[si]) + acc
    return acc


class ActionSpaceTooLarge(RuntimeError):
    pass


def enumerate_actions(inst: Instance, x: State, limit: int = 2_000_000):
    """Yield every feasible action with minimal vehicle counts, plus every a0.

    Actions with non-minimal b_i are excluded: they are never optimal and
    never preferred by the tie-breaking (fewer vehicles wins).
    """
    n = inst.n
    C = inst.C
    count = 0

    def rec(i: int, left: int, veh_left: int, prefix: list[int]):
        nonlocal count
        if i > n:
            for a0 in range(left + 1):
                count += 1
                if count > limit:
                    raise ActionSpaceTooLarge(f"enumeration exceeded {limit} actions")
                yield Action(
                    sell=a0,
                    deliver=tuple(prefix),
                    vehicles=tuple(-(-a // C) for a in prefix),
                )
            return
        hi = min(inst.capacities[i] - x.inv[i], left, veh_left * C)
        for a in range(hi + 1):
            b = -(-a // C)
            prefix.append(a)
            yield from rec(i + 1, left - a, veh_left - b, prefix)
            prefix.pop()

    yield from rec(1, x.inv[0], inst.q, [])


def brute_force_action(
    inst: Instance, x: State, wv: WeightVector, limit: int = 2_000_000
) -> tuple[Action, float]:
    """Exhaustive oracle with the same objective and tie-breaking as best_action."""
    best: tuple | None = None
    best_a: Action | None = None
    for a in enumerate_actions(inst, x, limit=limit):
        key = (
            objective_of(inst, x, wv, a),
            a.total_vehicles(),
            sum(a.deliver),
            a.sell,
            a.deliver,
        )
        if best is None or key < best:
            best = key
            best_a = a
    assert best is not None and best_a is not None
    return best_a, best[0]


def random_action(inst: Instance, x: State, rng: np.random.Generator) -> Action:
    """Sample a feasible action: shuffled customer order, uniform quantities.

    Always feasible by construction; not uniform over the action set.
    """
    n = inst.n
    C = inst.C
    left = x.inv[0]
    veh_left = inst.q
    deliver = [0] * n
    vehicles = [0] * n
    order = rng.permutation(n)
    for idx in order:
        i = int(idx) + 1
        hi = min(inst.capacities[i] - x.inv[i], left, veh_left * C)
        a = int(rng.integers(0, hi + 1)) if hi > 0 else 0
        b = -(-a // C)
        deliver[i - 1] = a
        vehicles[i - 1] = b
        left -= a
        veh_left -= b
    a0 = int(rng.integers(0, left + 1)) if left > 0 else 0
    return Action(sell=a0, deliver=tuple(deliver), vehicles=tuple(vehicles))
