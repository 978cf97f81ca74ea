"""Online differential semi-gradient TD(lambda) over post-decision states.

Training runs a single trajectory: at the current post-decision state the
realization is observed first, then an epsilon-greedy action is chosen at
the resulting pre-decision state (random feasible sample, or the exact
constrained argmin). The temporal difference updates an average-cost
baseline, an eligibility trace, and the per-location feature weights.
Feasibility holds by construction at every step; no repair ever occurs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .action_solver import N_FEATURES, WeightVector, best_action, random_action
from .dynamics import (
    Action,
    PostDecisionState,
    RealizationStream,
    State,
    post_decision,
    stage_cost,
    transition,
)
from .instance import Instance

DELTA_GUARD = 1e9
WEIGHT_GUARD = 1e12


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    periods: int = 100_000
    lam: float = 0.9
    alpha_num: float = 40.0
    alpha_den: float = 5000.0
    eps_decay: float = 0.999983
    seed: int = 0
    mask: tuple[bool, bool, bool, bool] = (True, True, True, True)
    log_interval: int = 0  # 0 disables logging

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.alpha_num <= 0:
            raise ValueError("alpha_num must be > 0")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ValueError("eps_decay must be in (0, 1]")

    def alpha(self, t: int) -> float:
        return self.alpha_num / (self.alpha_den + t - 1)

    def eps(self, t: int) -> float:
        return self.eps_decay**t


@dataclass
class TrainState:
    w: np.ndarray                    # (N+1, 4), masked columns stay 0
    cbar: float
    z: np.ndarray                    # (N+1, 4) eligibility trace
    t: int                           # next period index, starting at 1
    s: tuple[int, ...]               # current post-decision inventories

    @staticmethod
    def initial(inst: Instance) -> "TrainState":
        shape = (inst.n + 1, N_FEATURES)
        return TrainState(w=np.zeros(shape), cbar=0.0, z=np.zeros(shape), t=1, s=(0,) * (inst.n + 1))


def feature_matrix(inv: tuple[int, ...], mask, caps: tuple[int, ...] | None = None) -> np.ndarray:
    """psi(s) arranged per location: columns (u, u^2, u^3, sqrt u) for the
    capacity-fill fraction u = s/U, masked per the active basis."""
    s = np.asarray(inv, dtype=float)
    if caps is not None:
        s = s / np.asarray(caps, dtype=float)
    psi = np.stack([s, s**2, s**3, np.sqrt(s)], axis=1)
    for f, enabled in enumerate(mask):
        if not enabled:
            psi[:, f] = 0.0
    return psi


def _masked_value(w: np.ndarray, psi: np.ndarray) -> float:
    return float(np.sum(w * psi))


def td_step(
    state: TrainState,
    inst: Instance,
    cfg: TrainerConfig,
    stream: RealizationStream,
    rng: np.random.Generator,
) -> TrainState:
    """One loop body: observe phi at s, act epsilon-greedily at x, update."""
    t = state.t
    alpha = cfg.alpha(t)
    eps = cfg.eps(t)

    s_pd = PostDecisionState(inv=state.s)
    phi = stream.get(t - 1)
    c_stage = stage_cost(inst, s_pd, phi)
    x = transition(inst, s_pd, phi)

    wv = WeightVector(w=state.w, mask=cfg.mask)
    if rng.random() < eps:
        a = random_action(inst, x, rng)
    else:
        a, _ = best_action(inst, x, wv)
    c_action = _action_cost(inst, a)
    s_next = post_decision(x, a)

    psi_s = feature_matrix(state.s, cfg.mask, inst.capacities)
    psi_next = feature_matrix(s_next.inv, cfg.mask, inst.capacities)
    delta = c_stage + c_action + _masked_value(state.w, psi_next) - state.cbar - _masked_value(state.w, psi_s)
    if not math.isfinite(delta) or abs(delta) > DELTA_GUARD:
        raise DivergenceError(f"TD error diverged at period {t} (delta={delta!r}, alpha={alpha})")

    cbar = state.cbar + alpha * delta
    z = cfg.lam * state.z + psi_s
    w = state.w + alpha * delta * z
    if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > WEIGHT_GUARD:
        raise DivergenceError(f"weights diverged at period {t} (alpha={alpha})")
    return TrainState(w=w, cbar=cbar, z=z, t=t + 1, s=s_next.inv)


def _action_cost(inst: Instance, a: Action) -> float:
    c = inst.costs
    total = -c.rho * a.sell
    for b, d in zip(a.vehicles, inst.distances[1:]):
        total += b * (c.W + 2.0 * c.w * d)
    return total


@dataclass
class TrainResult:
    weights: WeightVector
    cbar: float
    log: list[dict] = field(default_factory=list)

    def write_log(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["period", "cbar", "eps", "alpha", "delta"])
            writer.writeheader()
            writer.writerows(self.log)


def train(inst: Instance, cfg: TrainerConfig) -> TrainResult:
    """Run cfg.periods TD steps from an all-zero cold start; returns final weights."""
    stream = RealizationStream(inst, cfg.seed)
    # Exploration stream kept separate from the environment stream so greedy
    # and random branches see identical realizations.
    rng = np.random.default_rng((cfg.seed, 0x5EED))
    state = TrainState.initial(inst)
    log: list[dict] = []
    for _ in range(cfg.periods):
        prev_cbar = state.cbar
        state = td_step(state, inst, cfg, stream, rng)
        t = state.t - 1
        if cfg.log_interval and (t % cfg.log_interval == 0 or t == cfg.periods):
            alpha = cfg.alpha(t)
            log.append(
                {
                    "period": t,
                    "cbar": state.cbar,
                    "eps": cfg.eps(t),
                    "alpha": alpha,
                    "delta": (state.cbar - prev_cbar) / alpha,
                }
            )
    return TrainResult(weights=WeightVector(w=state.w, mask=cfg.mask), cbar=state.cbar, log=log)


def greedy_policy(inst: Instance, wv: WeightVector):
    """Frozen-weight policy: the exact constrained argmin at every state.

    Argmins are memoized per pre-decision state; the weights never change
    under this policy, so cached actions stay valid."""
    cache: dict[tuple[int, ...], Action] = {}

    def policy(x: State, period: int) -> Action:
        a = cache.get(x.inv)
        if a is None:
            a, _ = best_action(inst, x, wv)
            cache[x.inv] = a
        return a

    return policy


def scaled_config(base: TrainerConfig, periods: int, reference_periods: int = 100_000) -> TrainerConfig:
    """Compress the exploration schedule into a shorter budget.

    The decay exponent is rescaled so epsilon traces the same trajectory over
    `periods` that the base decay traces over `reference_periods`.
    """
    ratio = reference_periods / periods
    return replace(base, periods=periods, eps_decay=base.eps_decay**ratio)
