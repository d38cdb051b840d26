"""Command-line entry point: ``gsslsf {exp1,exp2,exp3,separate}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench, lsf
from .errors import GssError
from .graphs import read_edgelist


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--lambda-ratio", type=float, help="spectral cutoff fraction of lambda_max")
    p.add_argument("--solver", choices=["adam", "closed-form"], help="how to fit the spectral gains")
    p.add_argument("--gamma", help="baseline gamma: one shared value or comma-separated per source")
    p.add_argument("--k-override", help="comma-separated truncation sizes, one per source")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--lr", type=float, help="Adam peak learning rate")
    p.add_argument("--max-iter", type=int, help="Adam iteration budget")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsslsf",
        description="Graph signal separation with learnable spectral filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for n in (1, 2, 3):
        p = sub.add_parser(f"exp{n}", help=f"run experiment {n}")
        _common(p)
        p.add_argument("--nodes", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help="base seed; trial t uses seed + t")
        p.add_argument("--plot", action="store_true", default=None, help="also write an SVG chart")
        p.add_argument("--dump-instance", action="store_true", default=None,
                       help="write every mixture instance as CSV next to the report")
        p.add_argument("--timing", action="store_true", default=None,
                       help="record wall times in the CSV (breaks byte-identical reruns)")
        p.add_argument("--workers", type=int, help="trials run concurrently")

    p = sub.add_parser("separate", help="separate a user-supplied mixture")
    _common(p)
    p.add_argument("--mixture", required=True,
                   help="one value per line, or a CSV with a 'mixture' column")
    p.add_argument("--graph", action="append", required=True,
                   help="edge-list file ('N M' then 'u v' lines); repeat once per source")
    p.add_argument("--baseline", action="store_true", help="also run the smoothness baseline")
    p.add_argument("--seed", type=int, default=0, help="seed of the latent excitation")
    p.add_argument("--trace", help="write the fit's loss trace to this CSV")
    return parser


def _floats(text):
    return bench._floats(text) if text is not None else None


def _experiment_config(n: int, args) -> bench.ExperimentConfig:
    kw = bench.load_config(args.config) if args.config else {}
    kw["experiment"] = n
    adam = dict(kw.pop("adam", {}))
    flags = {
        "nodes": args.nodes,
        "trials": args.trials,
        "base_seed": args.seed,
        "lambda_ratio": args.lambda_ratio,
        "solver": bench._solver(args.solver) if args.solver else None,
        "gammas": _floats(args.gamma),
        "k_override": bench._ints(args.k_override) if args.k_override else None,
        "output": args.out,
        "plot": args.plot,
        "dump_instance": args.dump_instance,
        "record_timing": args.timing,
        "workers": args.workers,
    }
    kw.update({k: v for k, v in flags.items() if v is not None})
    if args.lr is not None:
        adam["lr"] = args.lr
    if args.max_iter is not None:
        adam["max_iter"] = args.max_iter
    kw["adam"] = lsf.AdamConfig(**adam)
    return bench.ExperimentConfig(**kw)


def _separate(args) -> int:
    kw = bench.load_config(args.config) if args.config else {}
    adam = lsf.AdamConfig(**{**kw.get("adam", {}),
                             **({"lr": args.lr} if args.lr is not None else {}),
                             **({"max_iter": args.max_iter} if args.max_iter is not None else {})})
    solver = bench._solver(args.solver) if args.solver else kw.get("solver", "gradient")
    k_override = bench._ints(args.k_override) if args.k_override else kw.get("k_override")
    gammas = _floats(args.gamma) or kw.get("gammas")
    ratio = args.lambda_ratio if args.lambda_ratio is not None else kw.get("lambda_ratio", 0.1)
    out = args.out or kw.get("output") or "components.csv"

    mixture = bench.read_mixture(args.mixture)
    graphs = [read_edgelist(p) for p in args.graph]
    res = bench.run_separate(
        mixture, graphs, lambda_ratio=ratio, solver=solver, k_override=k_override,
        gammas=gammas, with_baseline=args.baseline, adam=adam,
        latent_seed=args.seed, output=out,
    )
    if args.trace:
        lsf.write_loss_trace(res.fit, args.trace)
    print(f"k = {res.k}  solver = {res.fit.solver}  status = {res.fit.status}  "
          f"iterations = {res.fit.iterations_run}  final loss = {res.fit.final_loss:.6g}")
    if res.gammas is not None:
        print(f"baseline gammas = {list(res.gammas)}")
    print(f"components written to {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "separate":
            return _separate(args)
        cfg = _experiment_config(int(args.command[-1]), args)
        report = bench.run_experiment(cfg)
        print(report.table())
        if cfg.output:
            print(f"report written to {cfg.output}")
        return 0
    except (GssError, OSError, ValueError, KeyError) as exc:
        print(f"gsslsf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
