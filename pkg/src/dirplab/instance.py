"""Problem instances: cost parameters, discretized supply/demand, generators, file I/O.

An instance describes a single supplier (location 0) and N customers, each with
an integer inventory capacity and a discrete distribution of per-period supply
(location 0) or demand (locations 1..N). Two seeded generator families are
provided: ``gen_toy`` (small, solvable exactly) and ``gen_main`` (benchmark
scale). Instances are immutable value objects, safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

FORMAT_TAG = "dirp-instance-v1"


class InstanceError(ValueError):
    """Raised for invalid instance data or malformed instance files."""


@dataclass(frozen=True)
class CostVector:
    """Cost parameters: (W, w, h_s, h_c, ell, rho).

    W    fixed cost per vehicle dispatch
    w    cost per unit distance (each dispatch drives 2*d_i)
    h_s  supplier holding cost per unit per period
    h_c  customer holding cost per unit per period
    ell  lost-sale penalty per unit
    rho  profit per unit sold externally
    """

    W: float
    w: float
    h_s: float
    h_c: float
    ell: float
    rho: float

    def __post_init__(self) -> None:
        for name, v in self.as_tuple_named():
            if v < 0:
                raise InstanceError(f"cost component {name} must be >= 0, got {v}")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.W, self.w, self.h_s, self.h_c, self.ell, self.rho)

    def as_tuple_named(self):
        return zip(("W", "w", "h_s", "h_c", "ell", "rho"), (self.W, self.w, self.h_s, self.h_c, self.ell, self.rho))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Discrete distribution over non-negative integer outcomes."""

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.probs):
            raise InstanceError("support and probs must have equal length")
        if len(self.support) == 0:
            raise InstanceError("empty distribution support")
        if any(int(k) != k or k < 0 for k in self.support):
            raise InstanceError("support values must be non-negative integers")
        if any(a >= b for a, b in zip(self.support, self.support[1:])):
            raise InstanceError("support values must be strictly increasing")
        if any(p < 0 for p in self.probs):
            raise InstanceError("probabilities must be >= 0")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise InstanceError(f"probs must sum to 1 within 1e-9, got {total!r}")

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in zip(self.support, self.probs))

    @property
    def max_outcome(self) -> int:
        return self.support[-1]

    def cumulative(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.probs, dtype=float))


@dataclass(frozen=True)
class Location:
    """One node of the network; index 0 is the supplier."""

    coords: tuple[float, float]
    capacity: int
    dist: float
    demand_or_supply: DiscreteDistribution

    def __post_init__(self) -> None:
        if self.capacity < 0:
            raise InstanceError("location capacity must be >= 0")
        if self.dist < 0:
            raise InstanceError("location distance must be >= 0")


@dataclass(frozen=True)
class Instance:
    """Immutable problem instance.

    locations[0] is the supplier; its distribution is the supply process.
    """

    locations: tuple[Location, ...]
    q: int
    C: int
    costs: CostVector
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if len(self.locations) < 2:
            raise InstanceError("instance needs a supplier and at least one customer")
        if self.q < 1:
            raise InstanceError("fleet size q must be >= 1")
        if self.C < 1:
            raise InstanceError("vehicle capacity C must be >= 1")
        if self.locations[0].dist != 0.0:
            raise InstanceError("supplier distance from itself must be 0")

    @property
    def n(self) -> int:
        """Number of customers."""
        return len(self.locations) - 1

    @property
    def capacities(self) -> tuple[int, ...]:
        return tuple(loc.capacity for loc in self.locations)

    @property
    def distances(self) -> tuple[float, ...]:
        return tuple(loc.dist for loc in self.locations)

    def distribution(self, i: int) -> DiscreteDistribution:
        return self.locations[i].demand_or_supply

    def state_space_size(self) -> int:
        size = 1
        for u in self.capacities:
            size *= u + 1
        return size


def discretize_normal(mean: float, std: float, cap: int) -> DiscreteDistribution:
    """Discretize a normal(mean, std) onto integers in [0, cap].

    Each integer k receives the normal mass of the unit cell [k-0.5, k+0.5];
    the boundary cells absorb the clipped tails, and the result is
    renormalized to sum to exactly 1.
    """
    if mean < 0:
        raise InstanceError(f"mean must be >= 0, got {mean}")
    if std <= 0:
        raise InstanceError(f"std must be > 0, got {std}")
    if cap < 1:
        raise InstanceError(f"cap must be >= 1, got {cap}")
    lo = max(0, int(round(mean - 3.0 * std)))
    hi = min(cap, int(math.ceil(mean + 3.0 * std)))
    if lo > hi:
        raise InstanceError(
            f"empty support range for mean={mean}, std={std}, cap={cap} (lo={lo} > hi={hi})"
        )
    ks = np.arange(lo, hi + 1)
    upper = norm.cdf((ks + 0.5 - mean) / std)
    lower = norm.cdf((ks - 0.5 - mean) / std)
    probs = upper - lower
    probs[0] = upper[0]          # absorb lower tail
    probs[-1] = 1.0 - lower[-1]  # absorb upper tail
    keep = probs > 1e-15         # drop zero-mass boundary cells
    ks, probs = ks[keep], probs[keep]
    probs = probs / probs.sum()
    return DiscreteDistribution(support=tuple(int(k) for k in ks), probs=tuple(float(p) for p in probs))


def _round_pos(x: float) -> int:
    """Round to nearest integer (ties away from zero), floored at 1."""
    return max(1, int(math.floor(x + 0.5)))


def _euclid(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _generate(
    N: int,
    q: int,
    seed: int,
    *,
    mean_lo: int,
    mean_hi: int,
    cap_factor_cust: float,
    cap_factor_sup: float,
    veh_cap_factor: float,
    costs: CostVector,
    family: str,
    dstd_mult: float,
    sstd_mult: float,
    cap_mult: float,
) -> Instance:
    if N < 1:
        raise InstanceError("N must be >= 1")
    if q < 1:
        raise InstanceError("q must be >= 1")
    rng = np.random.default_rng(seed)
    # Fixed draw order: coordinates for all N+1 locations, then demand means,
    # then demand std fractions. Changing this order changes every instance.
    coords = [(float(x), float(y)) for x, y in rng.uniform(0.0, 10.0, size=(N + 1, 2))]
    means = [int(m) for m in rng.integers(mean_lo, mean_hi + 1, size=N)]
    std_fracs = rng.uniform(0.25, 0.75, size=N)

    total_mean = sum(means)
    C = _round_pos(veh_cap_factor * total_mean / q)
    supply_mean = float(total_mean)
    supply_std = 0.6 * supply_mean * sstd_mult

    u_sup = _round_pos(cap_factor_sup * supply_mean * cap_mult)
    supplier = Location(
        coords=coords[0],
        capacity=u_sup,
        dist=0.0,
        demand_or_supply=discretize_normal(supply_mean, supply_std, u_sup),
    )
    locations = [supplier]
    for i in range(1, N + 1):
        u_i = _round_pos(cap_factor_cust * means[i - 1] * cap_mult)
        std_i = float(std_fracs[i - 1]) * means[i - 1] * dstd_mult
        locations.append(
            Location(
                coords=coords[i],
                capacity=u_i,
                dist=_euclid(coords[0], coords[i]),
                demand_or_supply=discretize_normal(means[i - 1], std_i, u_i),
            )
        )
    meta = {
        "family": family,
        "N": N,
        "q": q,
        "seed": seed,
        "dstd_mult": dstd_mult,
        "sstd_mult": sstd_mult,
        "cap_mult": cap_mult,
        "rounding": "nearest-min-1",
    }
    return Instance(locations=tuple(locations), q=q, C=C, costs=costs, seed=seed, meta=meta)


MAIN_COSTS = CostVector(15, 1.5, 0.1, 0.2, 30, 2.5)
TOY_COSTS = CostVector(15, 1.5, 2, 4, 15, 2.5)


def gen_main(
    N: int, q: int, seed: int, *, dstd_mult: float = 1.0, sstd_mult: float = 1.0, cap_mult: float = 1.0
) -> Instance:
    """Benchmark-scale family: demand means in [6,12], U_i = 10 E[demand_i],
    U_0 = 2.5 E[supply], C = 2 E[total demand]/q."""
    return _generate(
        N, q, seed,
        mean_lo=6, mean_hi=12,
        cap_factor_cust=10.0, cap_factor_sup=2.5,
        veh_cap_factor=2.0,
        costs=MAIN_COSTS,
        family="main",
        dstd_mult=dstd_mult, sstd_mult=sstd_mult, cap_mult=cap_mult,
    )


def gen_toy(
    N: int, q: int, seed: int, *, dstd_mult: float = 1.0, sstd_mult: float = 1.0, cap_mult: float = 1.0
) -> Instance:
    """Small family amenable to exact value iteration: demand means in [2,4],
    U_i = 2 E[demand_i], U_0 = 1.5 E[supply], C = 1.25 E[total demand]/q."""
    return _generate(
        N, q, seed,
        mean_lo=2, mean_hi=4,
        cap_factor_cust=2.0, cap_factor_sup=1.5,
        veh_cap_factor=1.25,
        costs=TOY_COSTS,
        family="toy",
        dstd_mult=dstd_mult, sstd_mult=sstd_mult, cap_mult=cap_mult,
    )


# ---------------------------------------------------------------------------
# File format (versioned, line-oriented key/value with nested location blocks)
# ---------------------------------------------------------------------------

def save(inst: Instance, path: str) -> None:
    lines = [f"format = {FORMAT_TAG}"]
    lines.append(f"n = {inst.n}")
    lines.append(f"q = {inst.q}")
    lines.append(f"vehicle_capacity = {inst.C}")
    lines.append("costs = " + " ".join(repr(c) for c in inst.costs.as_tuple()))
    lines.append(f"seed = {inst.seed}")
    for i, loc in enumerate(inst.locations):
        lines.append(f"location {i}")
        lines.append(f"  coords = {loc.coords[0]!r} {loc.coords[1]!r}")
        lines.append(f"  capacity = {loc.capacity}")
        lines.append(f"  dist = {loc.dist!r}")
        lines.append("  support = " + " ".join(str(k) for k in loc.demand_or_supply.support))
        lines.append("  probs = " + " ".join(repr(p) for p in loc.demand_or_supply.probs))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_kv(line: str, path: str):
    if "=" not in line:
        raise InstanceError(f"{path}: malformed line (expected 'key = value'): {line!r}")
    key, _, value = line.partition("=")
    return key.strip(), value.strip()


def load(path: str) -> Instance:
    with open(path) as fh:
        raw = [ln.rstrip("\n") for ln in fh if ln.strip()]
    top: dict[str, str] = {}
    loc_fields: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    for line in raw:
        if line.startswith("location "):
            current = {}
            loc_fields.append(current)
            continue
        key, value = _parse_kv(line, path)
        (current if current is not None else top)[key] = value

    def require(d: dict[str, str], key: str, where: str) -> str:
        if key not in d:
            raise InstanceError(f"{path}: missing field {key!r} in {where}")
        return d[key]

    if top.get("format") != FORMAT_TAG:
        raise InstanceError(f"{path}: bad or missing 'format' tag (expected {FORMAT_TAG!r})")
    try:
        n = int(require(top, "n", "header"))
        q = int(require(top, "q", "header"))
        C = int(require(top, "vehicle_capacity", "header"))
        seed = int(require(top, "seed", "header"))
        cost_parts = [float(v) for v in require(top, "costs", "header").split()]
    except ValueError as exc:
        raise InstanceError(f"{path}: unparseable header field: {exc}") from exc
    if len(cost_parts) != 6:
        raise InstanceError(f"{path}: field 'costs' needs 6 components, got {len(cost_parts)}")
    if len(loc_fields) != n + 1:
        raise InstanceError(f"{path}: expected {n + 1} location blocks, found {len(loc_fields)}")

    locations = []
    for i, d in enumerate(loc_fields):
        where = f"location {i}"
        try:
            cx, cy = (float(v) for v in require(d, "coords", where).split())
            capacity = int(require(d, "capacity", where))
            dist = float(require(d, "dist", where))
            support = tuple(int(v) for v in require(d, "support", where).split())
            probs = tuple(float(v) for v in require(d, "probs", where).split())
        except ValueError as exc:
            raise InstanceError(f"{path}: unparseable field in {where}: {exc}") from exc
        locations.append(
            Location(
                coords=(cx, cy),
                capacity=capacity,
                dist=dist,
                demand_or_supply=DiscreteDistribution(support=support, probs=probs),
            )
        )
    return Instance(
        locations=tuple(locations),
        q=q,
        C=C,
        costs=CostVector(*cost_parts),
        seed=seed,
        meta={"loaded_from": path},
    )
