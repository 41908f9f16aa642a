"""Command line front end.

Subcommands: gen-data, train, evaluate, baseline, bench, ete. Each takes
--config <path>, an optional --seed override (applied to the seed the
command consumes: data for gen-data, train for train, eval otherwise) and
--out <dir>. Exit codes: 0 success, 1 configuration error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline
from .netmodel import ConfigError


def _add_common(parser):
    parser.add_argument("--config", required=True, help="run config JSON")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed this command consumes")
    parser.add_argument("--out", default="out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cranpower",
        description="C-RAN power workbench: exact beamforming, a boosted-tree "
                    "surrogate, and a DQN sleep-mode policy.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="label random states with the exact solver")
    _add_common(p)
    p.add_argument("--count", type=int, default=None, help="row count override")
    p.add_argument("--pattern-mode", default=pipeline.PATTERN_RANDOM,
                   choices=[pipeline.PATTERN_RANDOM, pipeline.PATTERN_ALL_ON,
                            pipeline.PATTERN_ONE_OFF])

    p = sub.add_parser("train", help="fit the surrogate pair and pre-train the DQN")
    _add_common(p)
    p.add_argument("--dataset", default=None,
                   help="existing dataset CSV (default: regenerate)")
    p.add_argument("--redraw-channel", action="store_true",
                   help="draw a fresh channel per training episode")

    p = sub.add_parser("evaluate", help="greedy online run with regular tuning")
    _add_common(p)
    p.add_argument("--scheme", default=None,
                   choices=list(pipeline.DQN_SCHEMES))
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--artifacts", default=None,
                   help="artifacts directory (default: --out)")
    p.add_argument("--no-tune", action="store_true",
                   help="disable online fine-tuning")
    p.add_argument("--demand-max-sweep", default=None,
                   help="comma-separated demand ceilings for the sweep file")

    p = sub.add_parser("baseline", help="all-on or one-closed reference run")
    _add_common(p)
    p.add_argument("--scheme", required=True,
                   choices=[pipeline.SCHEME_AO, pipeline.SCHEME_OC])
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--demand-max-sweep", default=None)

    p = sub.add_parser("bench", help="surrogate vs solver timing")
    _add_common(p)
    p.add_argument("--inputs", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--artifacts", default=None)

    p = sub.add_parser("ete", help="paired surrogate-vs-solver policy comparison")
    _add_common(p)
    p.add_argument("--slots", type=int, default=None)
    p.add_argument("--artifacts", default=None)
    return parser


def _load_config(args) -> pipeline.RunConfig:
    config = pipeline.RunConfig.from_file(args.config)
    if args.seed is not None:
        seeds = config.seeds
        if args.command == "gen-data":
            seeds = replace(seeds, data=args.seed)
        elif args.command == "train":
            seeds = replace(seeds, train=args.seed)
        else:
            seeds = replace(seeds, eval=args.seed)
        config.seeds = seeds
    if getattr(args, "redraw_channel", False):
        config.redraw_channel = True
    return config


def _artifacts_dir(args):
    return Path(args.artifacts) if getattr(args, "artifacts", None) else Path(args.out)


def _sweep_values(raw):
    return [float(v) for v in raw.split(",") if v.strip()]


def _cmd_gen_data(args, config, out):
    count = args.count if args.count is not None else config.dataset_size
    rows = pipeline.gen_dataset(config, count=count, pattern_mode=args.pattern_mode)
    path = out / "dataset.csv"
    pipeline.write_dataset_csv(rows, path, config)
    print(f"wrote {len(rows)} rows to {path} "
          f"({int(rows.feasible.sum())} feasible, "
          f"{rows.solver_failures} solver failures skipped)")


def _cmd_train(args, config, out):
    dataset = None
    if args.dataset:
        dataset = pipeline.read_dataset_csv(args.dataset, config)
    _, summary = pipeline.train_offline(config, out_dir=out, dataset=dataset)
    print(json.dumps({k: v for k, v in summary.items() if k != "timing"},
                     indent=2, sort_keys=True))
    print(f"artifacts saved under {out}")


def _cmd_evaluate(args, config, out):
    scheme = args.scheme or (config.scheme if config.scheme in pipeline.DQN_SCHEMES
                             else pipeline.SCHEME_DQN_GBDT)
    slots = args.slots if args.slots is not None else config.eval_slots
    artifacts = pipeline.Artifacts.load(_artifacts_dir(args))
    tuning = False if args.no_tune else None
    report = pipeline.run_online(config, artifacts, slots, scheme=scheme,
                                 tuning=tuning)
    tag = scheme.lower().replace("-", "_")
    report.to_csv(out / f"eval_{tag}.csv")
    report.trajectory_to_csv(out / f"trajectory_{tag}.csv",
                             config.network.num_users)
    with open(out / f"eval_{tag}_timing.json", "w") as f:
        json.dump(report.timing, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"{scheme}: average power {report.average_power_w!r} W over "
          f"{slots} slots, {report.infeasible_count} infeasible")
    if args.demand_max_sweep:
        rows = pipeline.demand_sweep(config, artifacts, slots,
                                     _sweep_values(args.demand_max_sweep), scheme)
        pipeline._write_csv(out / f"sweep_{tag}.csv",
                            ["demand_max_mbps", "scheme", "average_power_w",
                             "infeasible_count"], rows)


def _cmd_baseline(args, config, out):
    slots = args.slots if args.slots is not None else config.eval_slots
    report = pipeline.run_baseline(config, args.scheme, slots)
    tag = args.scheme.lower()
    report.to_csv(out / f"baseline_{tag}.csv")
    report.trajectory_to_csv(out / f"trajectory_{tag}.csv",
                             config.network.num_users)
    print(f"{args.scheme}: average power {report.average_power_w!r} W over "
          f"{slots} slots, {report.infeasible_count} infeasible")
    if args.demand_max_sweep:
        rows = pipeline.demand_sweep(config, None, slots,
                                     _sweep_values(args.demand_max_sweep),
                                     args.scheme)
        pipeline._write_csv(out / f"sweep_{tag}.csv",
                            ["demand_max_mbps", "scheme", "average_power_w",
                             "infeasible_count"], rows)


def _cmd_bench(args, config, out):
    artifacts = pipeline.Artifacts.load(_artifacts_dir(args))
    row = pipeline.bench_timing(config, artifacts, inputs=args.inputs,
                                repeats=args.repeats)
    pipeline.write_timing_csv([row], out / "timing.csv")
    print(f"{row['num_rrhs']} RRHs / {row['num_users']} users: "
          f"surrogate {row['gbdt_s_per_input']:.6f} s, "
          f"solver {row['socp_s_per_input']:.6f} s per input "
          f"({row['speedup']:.1f}x)")


def _cmd_ete(args, config, out):
    slots = args.slots if args.slots is not None else config.eval_slots
    artifacts = pipeline.Artifacts.load(_artifacts_dir(args))
    result = pipeline.ete_compare(config, artifacts, slots)
    result.to_csv(out / "ete.csv")
    print(f"average-power gap {result.average_gap_rel * 100:.3f}%, "
          f"action agreement {result.action_agreement * 100:.2f}% "
          f"over {slots} paired slots")


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "baseline": _cmd_baseline,
    "bench": _cmd_bench,
    "ete": _cmd_ete,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        _COMMANDS[args.command](args, config, out)
    except Exception as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
