"""Command-line entry point.

Subcommands: gen-data, train, probe, verify-theory, ablate. Every
subcommand with a --seed flag is end-to-end deterministic. Exit codes:
0 success, 1 usage error, 2 data/format error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import datakit, evalkit, theory, trainer
from .errors import ConfigError, FormatViolation, InvalidSpec, NonFinite, PnnclrError
from .rng import RngStream, TAG_THEORY

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnnclr", description="pseudo-NN contrastive learning engine")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic blob dataset")
    g.add_argument("--classes", type=int, default=8)
    g.add_argument("--per-class", type=int, default=500)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--center-scale", type=float, default=1.0)
    g.add_argument("--std", type=float, default=2.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="run contrastive training")
    t.add_argument("--config", default=None, help="key = value config file")
    t.add_argument("--dataset", required=True)
    t.add_argument("--method", choices=("simclr", "nnclr", "pnnclr"), default=None)
    t.add_argument("--steps", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--resume", default=None, help="checkpoint to resume from")

    pr = sub.add_parser("probe", help="linear-probe a checkpointed encoder")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--dataset", required=True)
    pr.add_argument("--split", type=float, default=0.8, help="train fraction")
    pr.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify-theory", help="check support-set probability analysis")
    v.add_argument("--nc", type=int, action="append", default=None)
    v.add_argument("--ne", type=int, action="append", default=None)
    v.add_argument("--nq", type=int, action="append", default=None)
    v.add_argument("--trials", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--csv", default=None)

    a = sub.add_parser("ablate", help="hyperparameter sweep with probe evaluation")
    a.add_argument("--axis", required=True,
                   choices=("alpha", "beta", "queue", "batch", "embedding", "method"))
    a.add_argument("--values", required=True, help="comma-separated axis values")
    a.add_argument("--dataset", required=True)
    a.add_argument("--config", default=None)
    a.add_argument("--seeds", type=int, default=3)
    a.add_argument("--steps", type=int, default=None)
    a.add_argument("--split", type=float, default=0.8)
    a.add_argument("--out", required=True, help="output CSV")
    return p


def _cmd_gen_data(args) -> int:
    spec = datakit.BlobSpec(args.classes, args.per_class, args.dim,
                            args.center_scale, args.std, args.seed)
    ds = datakit.gen_blobs(spec)
    datakit.save_dataset(ds, args.out)
    print(f"wrote {ds.n} samples ({ds.class_count} classes, dim {ds.dim}) to {args.out}")
    return EXIT_OK


def _train_overrides(args) -> dict:
    return {"method": args.method, "steps": args.steps, "seed": args.seed}


def _cmd_train(args) -> int:
    cfg = datakit.parse_config(path=args.config, overrides=_train_overrides(args))
    ds = datakit.load_dataset(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "train_log.csv")
    ckpt_path = os.path.join(args.out, "checkpoint.pnnc")
    state = trainer.load_checkpoint(args.resume) if args.resume else None
    if state is not None:
        cfg = state.config
    state, rows = trainer.train(cfg, ds, log_path=log_path, checkpoint_path=ckpt_path,
                                state=state)
    print(f"trained {state.step} steps; log: {log_path}; checkpoint: {ckpt_path}")
    return EXIT_OK


def _cmd_probe(args) -> int:
    state = trainer.load_checkpoint(args.checkpoint)
    ds = datakit.load_dataset(args.dataset)
    train_ds, test_ds = datakit.split(ds, args.split, args.seed)
    result = evalkit.linear_probe(state.online, train_ds, test_ds, seed=args.seed)
    print(result.record())
    return EXIT_OK


def _cmd_verify_theory(args) -> int:
    if args.nc or args.ne or args.nq:
        if not (args.nc and args.ne and args.nq) or not len(args.nc) == len(args.ne) == len(args.nq):
            print("error: --nc/--ne/--nq must be given the same number of times", file=sys.stderr)
            return EXIT_USAGE
        specs = [theory.PopulationSpec(c, e, q) for c, e, q in zip(args.nc, args.ne, args.nq)]
    else:
        specs = [theory.PopulationSpec(1000, 1000, 10000),
                 theory.PopulationSpec(100, 100, 10000),
                 theory.PopulationSpec(10, 1000, 10000)]

    rows = []
    print(f"{'N_c':>6} {'N_e':>6} {'N_q':>7} {'lower':>10} {'exact':>10} "
          f"{'MC est':>10} {'MC se':>9} {'upper':>10}  result")
    all_ok = True
    for i, spec in enumerate(specs):
        exact = theory.p_b_exact(spec)
        lower, upper = theory.p_b_bounds(spec)
        est, se = theory.p_b_monte_carlo(spec, args.trials,
                                         RngStream(args.seed, (TAG_THEORY, i)))
        # the estimated se collapses to 0 when every trial hits, so the
        # agreement band also uses the binomial se at the exact probability
        se_ref = float(np.sqrt(exact * (1.0 - exact) / args.trials))
        ok = (lower <= exact + 1e-12 and exact <= upper + 1e-12
              and abs(est - exact) <= 3 * max(se, se_ref) + 1e-12)
        all_ok = all_ok and ok
        print(f"{spec.num_classes:>6} {spec.items_per_class:>6} {spec.queue_size:>7} "
              f"{lower:>10.6f} {exact:>10.6f} {est:>10.6f} {se:>9.6f} {upper:>10.6f}  "
              f"{'PASS' if ok else 'FAIL'}")
        rows.append((spec, lower, exact, est, se, upper, ok))

    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as f:
            f.write("nc,ne,nq,lower,exact,mc_estimate,mc_se,upper,pass\n")
            for spec, lower, exact, est, se, upper, ok in rows:
                f.write(f"{spec.num_classes},{spec.items_per_class},{spec.queue_size},"
                        f"{lower!r},{exact!r},{est!r},{se!r},{upper!r},{int(ok)}\n")
    return EXIT_OK if all_ok else EXIT_NUMERIC


# the method axis decomposes the pNNCLR modifications over the NNCLR baseline:
# swu = EMA target on the baseline, +pnn = shrinkage with beta 0, +noise = beta > 0
_METHOD_AXIS = {
    "baseline": {"method": "nnclr", "use_ema": "off"},
    "swu": {"method": "nnclr", "use_ema": "on"},
    "swu+pnn": {"method": "pnnclr", "use_ema": "on", "beta": 0.0},
    "swu+pnn+noise": {"method": "pnnclr", "use_ema": "on"},
}


def _axis_overrides(axis: str, value: str) -> dict:
    if axis == "alpha":
        return {"alpha": float(value)}
    if axis == "beta":
        return {"beta": float(value)}
    if axis == "queue":
        return {"queue_capacity": int(value)}
    if axis == "batch":
        return {"batch_size": int(value)}
    if axis == "embedding":
        return {"projection_dim": int(value)}
    if axis == "method":
        if value not in _METHOD_AXIS:
            raise ConfigError(f"method axis value must be one of {sorted(_METHOD_AXIS)}")
        return dict(_METHOD_AXIS[value])
    raise ConfigError(f"unknown axis {axis!r}")


def _cmd_ablate(args) -> int:
    ds = datakit.load_dataset(args.dataset)
    train_ds, test_ds = datakit.split(ds, args.split, seed=0)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values or args.seeds < 1:
        print("error: need at least one value and one seed", file=sys.stderr)
        return EXIT_USAGE

    out_rows = []
    for value in values:
        top1s = []
        for seed in range(args.seeds):
            overrides = _axis_overrides(args.axis, value)
            overrides["seed"] = seed
            if args.steps is not None:
                overrides["steps"] = args.steps
            cfg = datakit.parse_config(path=args.config, overrides=overrides)
            state, _ = trainer.train(cfg, train_ds)
            res = evalkit.linear_probe(state.online, train_ds, test_ds, seed=seed)
            top1s.append(res.top1)
        mean = float(np.mean(top1s))
        std = float(np.std(top1s))
        out_rows.append((value, mean, std))
        print(f"{args.axis}={value}: mean top1 {mean:.4f} (std {std:.4f}, {args.seeds} seeds)")

    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("value,mean_top1,std_top1\n")
        for value, mean, std in out_rows:
            f.write(f"{value},{mean!r},{std!r}\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "probe":
            return _cmd_probe(args)
        if args.command == "verify-theory":
            return _cmd_verify_theory(args)
        if args.command == "ablate":
            return _cmd_ablate(args)
        return EXIT_USAGE
    except NonFinite as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatViolation, ConfigError, InvalidSpec, FileNotFoundError, IsADirectoryError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except PnnclrError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
