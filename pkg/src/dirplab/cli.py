"""Command-line entry points over the solver laboratory.

Every subcommand is seeded and writes CSV (or the structured instance text
format); exit status is nonzero when a feasibility or schedule invariant is
violated.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .action_solver import load_weights, save_weights
from .crl import TrainerConfig, greedy_policy, scaled_config, train
from .dynamics import simulate, zero_policy
from .heuristics import (
    ScheduleInfeasible,
    SelectionInfeasible,
    SSConfig,
    po2_heuristic,
    ss_heuristic,
)
from .instance import gen_main, gen_toy, load, save
from .lcrl import LookaheadConfig, lcrl_policy
from .vi import StateSpaceTooLarge, value_iteration, write_slice_csv


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirplab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--family", choices=["toy", "main"], default="toy")
    p.add_argument("-n", type=int, default=3)
    p.add_argument("-q", type=int, default=2)
    p.add_argument("--out", required=True)
    _add_seed(p)

    p = sub.add_parser("simulate", help="simulate a trained or trivial policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--weights")
    p.add_argument("--periods", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=1_000)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("train-crl", help="train the learning agent")
    p.add_argument("--instance", required=True)
    p.add_argument("--periods", type=int, default=20_000)
    p.add_argument("--out", required=True, help="weights file")
    p.add_argument("--log")
    _add_seed(p)

    p = sub.add_parser("vi", help="exact relative value iteration")
    p.add_argument("--instance", required=True)
    p.add_argument("--eps", type=float, default=0.01)
    _add_seed(p)

    p = sub.add_parser("slice", help="2-D policy slice of the exact policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--axes", default="1,2", help="two location indices, comma separated")
    p.add_argument("--out", required=True)
    _add_seed(p)

    p = sub.add_parser("ss", help="iterative (s,S) heuristic")
    p.add_argument("--instance", required=True)
    p.add_argument("--xi0", type=float)
    p.add_argument("--m", type=float, default=1.1)
    p.add_argument("--tstar", type=int, default=20)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("po2", help="power-of-two cyclic heuristic")
    p.add_argument("--instance", required=True)
    p.add_argument("--tau", type=int, default=4)
    p.add_argument("--out")
    _add_seed(p)

    p = sub.add_parser("compare", help="run the method comparison table")
    p.add_argument("--instance", required=True, nargs="+")
    p.add_argument("--methods", default="crl,lcrl,ss,po2")
    p.add_argument("--full", action="store_true")
    p.add_argument("--out-dir", required=True)
    _add_seed(p)

    p = sub.add_parser("ablate", help="basis-function ablation")
    p.add_argument("--instance", required=True, nargs="+")
    p.add_argument("--out", required=True)
    _add_seed(p)

    p = sub.add_parser("sweep", help="sensitivity sweeps")
    p.add_argument("--instance", required=True)
    p.add_argument("--what", choices=["eps", "horizon"], required=True)
    p.add_argument("--out", required=True)
    _add_seed(p)

    p = sub.add_parser("curves", help="value-curve CSV from a weights file")
    p.add_argument("--weights", required=True)
    p.add_argument("--location", type=int, default=1)
    p.add_argument("--upto", type=int, default=20)
    p.add_argument("--out", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (SelectionInfeasible, ScheduleInfeasible, StateSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    if args.cmd == "gen":
        gen = gen_toy if args.family == "toy" else gen_main
        inst = gen(args.n, args.q, args.seed)
        save(inst, args.out)
        print(f"wrote {args.out} ({inst.n} customers, q={inst.q}, C={inst.C})")
        return 0

    if args.cmd == "simulate":
        inst = load(args.instance)
        if args.weights:
            pol = greedy_policy(inst, load_weights(args.weights))
        else:
            pol = zero_policy
        rep = simulate(inst, pol, args.periods, args.warmup, seed=args.seed)
        if args.out:
            rep.to_csv(args.out)
        print(f"avg cost/period = {rep.avg_total:.4f}")
        return 0

    if args.cmd == "train-crl":
        inst = load(args.instance)
        cfg = scaled_config(TrainerConfig(seed=args.seed), args.periods)
        result = train(inst, cfg)
        save_weights(result.weights, args.out)
        if args.log:
            result.write_log(args.log)
        print(f"trained {args.periods} periods; cbar = {result.cbar:.4f}")
        return 0

    if args.cmd == "vi":
        inst = load(args.instance)
        table = value_iteration(inst, eps=args.eps)
        print(f"gain = {table.gain:.6f} after {table.iterations} iterations "
              f"(span {table.span:.2e})")
        for w in table.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return 0

    if args.cmd == "slice":
        inst = load(args.instance)
        table = value_iteration(inst)
        i, j = (int(v) for v in args.axes.split(","))
        # fix the supplier at full stock (otherwise no delivery is possible)
        # and any other unlisted customer at empty
        fixed = {
            k: (inst.capacities[0] if k == 0 else 0)
            for k in range(inst.n + 1)
            if k not in (i, j)
        }
        write_slice_csv(table, fixed, (i, j), customer=max(i, 1), path=args.out)
        print(f"wrote {args.out}")
        return 0

    if args.cmd == "ss":
        inst = load(args.instance)
        cfg = SSConfig(xi0=args.xi0, m=args.m, tstar=args.tstar, seed=args.seed)
        _, rep = ss_heuristic(inst, cfg)
        print("selected: "
              + ", ".join(f"{c.customer}:(s={c.s},S={c.S})" for c in rep.selection))
        print(f"avg cost/period = {rep.best_cost:.4f}")
        if args.out and rep.sim:
            rep.sim.to_csv(args.out)
        return 0

    if args.cmd == "po2":
        inst = load(args.instance)
        _, rep = po2_heuristic(inst, tau=args.tau, seed=args.seed)
        print("selected: "
              + ", ".join(f"{c.customer}:(t={c.interval},S={c.order_up_to})"
                          for c in rep.selection))
        assert rep.sim is not None
        print(f"avg cost/period = {rep.sim.avg_total:.4f}")
        if args.out:
            rep.sim.to_csv(args.out)
        return 0

    if args.cmd == "compare":
        instances = tuple(load(p) for p in args.instance)
        proto = bench.Protocol.full() if args.full else bench.Protocol()
        spec = bench.ExperimentSpec(
            instances=instances,
            methods=tuple(args.methods.split(",")),
            seeds=(args.seed,),
            protocol=proto,
            out_dir=args.out_dir,
        )
        results = bench.compare(spec)
        for r in results:
            print(f"{r.instance:>10} {r.method:>5} cost={r.avg_cost:.3f} "
                  f"delta={'' if r.delta_pct is None else f'{r.delta_pct:+.1f}%'}")
        return 0

    if args.cmd == "ablate":
        instances = [load(p) for p in args.instance]
        rows = bench.ablate_basis(instances, seed=args.seed)
        bench.write_rows_csv(
            [{"mask": "".join(map(str, r.mask)), "avg_cost": r.avg_cost,
              "delta_pct": r.delta_pct, "train_time_s": r.train_time}
             for r in rows],
            args.out,
        )
        print(f"wrote {args.out}")
        return 0

    if args.cmd == "sweep":
        inst = load(args.instance)
        rows = (bench.sweep_eps(inst, seed=args.seed) if args.what == "eps"
                else bench.sweep_horizon(inst, seed=args.seed))
        bench.write_rows_csv(rows, args.out)
        print(f"wrote {args.out}")
        return 0

    if args.cmd == "curves":
        wv = load_weights(args.weights)
        rows = bench.value_curves([("crl", wv)], args.location, args.upto)
        bench.write_curves_csv(rows, args.out)
        print(f"wrote {args.out}")
        return 0

    raise AssertionError(args.cmd)


if __name__ == "__main__":
    raise SystemExit(main())
