"""Experiment harness: method comparisons, sensitivity sweeps, curve exports.

Everything here is plumbing over the solver modules: it trains/derives
policies, simulates them on paired realization streams, and writes CSV
tables. No plotting — downstream tools render the CSVs.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .action_solver import N_FEATURES, WeightVector, features
from .crl import TrainerConfig, greedy_policy, scaled_config, train
from .dynamics import SimReport, simulate
from .heuristics import SSConfig, po2_heuristic, ss_heuristic
from .instance import Instance
from .lcrl import LookaheadConfig, lcrl_policy
from .vi import DEFAULT_MAX_STATES, StateSpaceTooLarge, value_iteration

METHODS = ("crl", "lcrl", "ss", "po2", "vi")

# Feature-mask rows of the basis ablation study: each tuple flags which of
# (s, s^2, s^3, sqrt s) is active.
ABLATION_MASKS: tuple[tuple[int, int, int, int], ...] = (
    (1, 1, 1, 1),
    (1, 1, 1, 0),
    (1, 1, 0, 1),
    (1, 0, 1, 1),
    (0, 1, 1, 1),
    (1, 1, 0, 0),
    (1, 0, 0, 1),
    (1, 0, 0, 0),
)


@dataclass(frozen=True)
class Protocol:
    """Per-method budgets. Desk defaults keep a full compare run in minutes."""

    train_periods: int = 20_000
    sim_periods: int = 10_000
    sim_warmup: int = 1_000
    lcrl_sim_periods: int = 500
    lcrl_scenarios: int = 20
    lookahead: int = 1
    workers: int = 1
    vi_max_states: int = DEFAULT_MAX_STATES

    @staticmethod
    def full() -> "Protocol":
        return Protocol(
            train_periods=100_000,
            sim_periods=60_000,
            sim_warmup=1_000,
            lcrl_sim_periods=3_000,
            lcrl_scenarios=20,
        )


@dataclass(frozen=True)
class ExperimentSpec:
    instances: tuple[Instance, ...]
    methods: tuple[str, ...] = ("crl", "lcrl", "ss", "po2")
    seeds: tuple[int, ...] = (0,)
    protocol: Protocol = Protocol()
    out_dir: str | None = None

    def __post_init__(self) -> None:
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")


@dataclass
class CellResult:
    instance: str
    method: str
    seed: int
    avg_cost: float
    gap_pct: float | None  # vs VI gain, when VI present
    delta_pct: float | None  # vs the reference method
    train_time: float
    sim_time_per_period: float
    components: dict[str, float] = field(default_factory=dict)


def _run_method(inst: Instance, method: str, seed: int, proto: Protocol):
    """Derive the policy and return (SimReport|gain, train_time, sim_time)."""
    t0 = time.perf_counter()
    if method == "vi":
        table = value_iteration(inst, max_states=proto.vi_max_states)
        train_time = time.perf_counter() - t0
        return table.gain, None, train_time, 0.0
    if method in ("crl", "lcrl"):
        cfg = scaled_config(TrainerConfig(seed=seed), proto.train_periods)
        result = train(inst, cfg)
        train_time = time.perf_counter() - t0
        if method == "crl":
            pol = greedy_policy(inst, result.weights)
            periods = proto.sim_periods
        else:
            la = LookaheadConfig(
                horizon=proto.lookahead,
                n_scenarios=proto.lcrl_scenarios,
                seed=seed,
                workers=proto.workers,
            )
            pol = lcrl_policy(inst, result.weights, la)
            periods = proto.lcrl_sim_periods
        t1 = time.perf_counter()
        sim = simulate(inst, pol, periods, min(proto.sim_warmup, periods // 10), seed=seed)
        return sim.avg_total, sim, train_time, (time.perf_counter() - t1) / periods
    if method == "ss":
        cfg = SSConfig(sim_periods=proto.sim_periods, sim_warmup=proto.sim_warmup, seed=seed)
        _, rep = ss_heuristic(inst, cfg)
        train_time = time.perf_counter() - t0
        assert rep.sim is not None
        return rep.best_cost, rep.sim, train_time, 0.0
    if method == "po2":
        _, rep = po2_heuristic(
            inst, seed=seed, sim_periods=proto.sim_periods, sim_warmup=proto.sim_warmup
        )
        train_time = time.perf_counter() - t0
        assert rep.sim is not None
        return rep.sim.avg_total, rep.sim, train_time, 0.0
    raise ValueError(method)


def _components(sim: SimReport | None) -> dict[str, float]:
    if sim is None:
        return {}
    return dict(sim.avg_components)


def compare(spec: ExperimentSpec) -> list[CellResult]:
    """Run every (instance, method, seed) cell and fill in relative columns.

    The delta reference is the lookahead method when present, else plain CRL,
    else the first method listed. The gap column is relative to the VI gain
    when VI is among the methods and the state space permits it.
    """
    results: list[CellResult] = []
    proto = spec.protocol
    for idx, inst in enumerate(spec.instances):
        name = inst.meta.get("name", f"inst{idx}")
        vi_gain: float | None = None
        per_method: dict[str, list[CellResult]] = {}
        for method in spec.methods:
            for seed in spec.seeds:
                if method == "vi":
                    if vi_gain is not None:
                        continue
                    try:
                        gain, _, tt, st = _run_method(inst, method, seed, proto)
                    except StateSpaceTooLarge:
                        break
                    vi_gain = gain
                    cell = CellResult(name, "vi", seed, gain, 0.0, None, tt, st)
                    results.append(cell)
                    per_method.setdefault("vi", []).append(cell)
                    continue
                cost, sim, tt, st = _run_method(inst, method, seed, proto)
                cell = CellResult(
                    name, method, seed, cost, None, None, tt, st, _components(sim)
                )
                results.append(cell)
                per_method.setdefault(method, []).append(cell)
        reference = "lcrl" if "lcrl" in per_method else "crl" if "crl" in per_method else None
        if reference is None and per_method:
            reference = next(iter(per_method))
        ref_cost = (
            float(np.mean([c.avg_cost for c in per_method[reference]])) if reference else None
        )
        for cells in per_method.values():
            for c in cells:
                if vi_gain is not None and vi_gain != 0:
                    c.gap_pct = 100.0 * (c.avg_cost - vi_gain) / abs(vi_gain)
                if ref_cost:
                    c.delta_pct = 100.0 * (c.avg_cost - ref_cost) / abs(ref_cost)
    if spec.out_dir:
        write_results_csv(results, Path(spec.out_dir) / "compare.csv")
    return results


def write_results_csv(results: list[CellResult], path: str | Path) -> None:
    comp_keys = sorted({k for r in results for k in r.components})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["instance", "method", "seed", "avg_cost", "gap_pct", "delta_pct",
             "train_time_s", "sim_time_per_period_s", *comp_keys]
        )
        for r in results:
            w.writerow(
                [r.instance, r.method, r.seed, f"{r.avg_cost:.6f}",
                 "" if r.gap_pct is None else f"{r.gap_pct:.3f}",
                 "" if r.delta_pct is None else f"{r.delta_pct:.3f}",
                 f"{r.train_time:.3f}", f"{r.sim_time_per_period:.6f}",
                 *[f"{r.components.get(k, float('nan')):.6f}" for k in comp_keys]]
            )


# ---------------------------------------------------------------------------
# value-function regression and curves
# ---------------------------------------------------------------------------


def fit_vi_regression(inst: Instance, post_values: np.ndarray) -> tuple[WeightVector, float]:
    """Least-squares fit of exact post-decision values onto the feature basis.

    The design matrix stacks the per-location feature columns plus an
    intercept; a tiny ridge term keeps the normal equations well conditioned.
    Returns the fitted WeightVector and the intercept.
    """
    shape = tuple(c + 1 for c in inst.capacities)
    vals = np.asarray(post_values, dtype=float).reshape(-1)
    if vals.size != int(np.prod(shape)):
        raise ValueError("value array does not match the instance state space")
    grids = np.meshgrid(*[np.arange(c + 1) for c in inst.capacities], indexing="ij")
    cols = []
    for g, cap in zip(grids, inst.capacities):
        lv = g.reshape(-1).astype(float) / cap
        cols.extend([lv, lv**2, lv**3, np.sqrt(lv)])
    cols.append(np.ones_like(vals))
    X = np.stack(cols, axis=1)
    A = X.T @ X + 1e-8 * np.eye(X.shape[1])
    beta = np.linalg.solve(A, X.T @ vals)
    w = beta[:-1].reshape(inst.n + 1, N_FEATURES)
    return WeightVector(w=w), float(beta[-1])


def value_curves(
    weight_sets: list[tuple[str, WeightVector]], location: int, upto: int, cap: float | None = None
) -> list[dict[str, float]]:
    """Per-level long-run profit predictions (-w . psi) for each weight set."""
    rows = []
    scale = cap if cap is not None else max(upto, 1)
    for level in range(upto + 1):
        psi = features(level, scale)
        row: dict[str, float] = {"level": float(level)}
        for label, wv in weight_sets:
            row[label] = float(-np.dot(wv.w[location], psi))
        rows.append(row)
    return rows


def write_curves_csv(rows: list[dict[str, float]], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0].keys()) if rows else ["level"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


# ---------------------------------------------------------------------------
# ablation and sweeps
# ---------------------------------------------------------------------------


@dataclass
class AblationRow:
    mask: tuple[int, int, int, int]
    avg_cost: float
    delta_pct: float
    train_time: float


def ablate_basis(
    instances: list[Instance],
    masks: tuple[tuple[int, int, int, int], ...] = ABLATION_MASKS,
    seed: int = 0,
    proto: Protocol = Protocol(),
    workers: int = 1,
) -> list[AblationRow]:
    """Train one CRL agent per feature mask on each instance; report the
    average simulated cost per mask relative to the full basis."""

    def run_cell(args):
        inst, mask = args
        cfg = scaled_config(TrainerConfig(seed=seed, mask=mask), proto.train_periods)
        t0 = time.perf_counter()
        result = train(inst, cfg)
        tt = time.perf_counter() - t0
        sim = simulate(
            inst, greedy_policy(inst, result.weights),
            proto.sim_periods, proto.sim_warmup, seed=seed,
        )
        return sim.avg_total, tt

    cells = [(inst, mask) for mask in masks for inst in instances]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(run_cell, cells))
    else:
        outs = [run_cell(c) for c in cells]

    rows = []
    per_mask: dict[tuple[int, ...], list[tuple[float, float]]] = {}
    for (inst, mask), out in zip(cells, outs):
        per_mask.setdefault(mask, []).append(out)
    full_cost = None
    for mask in masks:
        costs = [c for c, _ in per_mask[mask]]
        times = [t for _, t in per_mask[mask]]
        avg = float(np.mean(costs))
        if mask == (1, 1, 1, 1):
            full_cost = avg
        rows.append(AblationRow(mask=mask, avg_cost=avg, delta_pct=0.0,
                                train_time=float(np.mean(times))))
    base = full_cost if full_cost else rows[0].avg_cost
    for r in rows:
        r.delta_pct = 100.0 * (r.avg_cost - base) / abs(base)
    return rows


EPS_DECAYS = (0.999966, 0.999983, 0.999991)


def sweep_eps(
    inst: Instance, seed: int = 0, proto: Protocol = Protocol(),
    decays: tuple[float, ...] = EPS_DECAYS,
) -> list[dict[str, float]]:
    """Retrain with each exploration-decay rate on identical streams."""
    rows = []
    for decay in decays:
        cfg = scaled_config(TrainerConfig(seed=seed, eps_decay=decay), proto.train_periods)
        t0 = time.perf_counter()
        result = train(inst, cfg)
        tt = time.perf_counter() - t0
        sim = simulate(inst, greedy_policy(inst, result.weights),
                       proto.sim_periods, proto.sim_warmup, seed=seed)
        rows.append({"eps_decay": decay, "avg_cost": sim.avg_total, "train_time_s": tt})
    return rows


def sweep_horizon(
    inst: Instance, seed: int = 0, proto: Protocol = Protocol(),
    horizons: tuple[int, ...] = (1, 2, 3),
) -> list[dict[str, float]]:
    """Rerun the lookahead policy with growing horizons on identical streams."""
    cfg = scaled_config(TrainerConfig(seed=seed), proto.train_periods)
    result = train(inst, cfg)
    rows = []
    for T in horizons:
        la = LookaheadConfig(horizon=T, n_scenarios=proto.lcrl_scenarios,
                             seed=seed, workers=proto.workers)
        pol = lcrl_policy(inst, result.weights, la)
        t0 = time.perf_counter()
        sim = simulate(inst, pol, proto.lcrl_sim_periods,
                       min(proto.sim_warmup, proto.lcrl_sim_periods // 10), seed=seed)
        per_period = (time.perf_counter() - t0) / proto.lcrl_sim_periods
        rows.append({"horizon": T, "avg_cost": sim.avg_total,
                     "sim_time_per_period_s": per_period})
    return rows


def write_rows_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
