"""Experiment runner: hierarchy artifacts, sensitivity grids, cost curves,
and clusterability reports as deterministic CSV/JSON files.

Verbs: cluster | sensitivity | cost-curve | clusterability | gen.
Every output embeds the resolved run configuration and master seed, so
re-running the embedded configuration reproduces the file byte for byte.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import Dataset, DegenerateDataError, kmedian_cost, partition_kmedian_cost
from .datasets import (
    DataFormatError,
    DbscanParams,
    check_well_clusterable,
    dbscan,
    gen_line_instance,
    gen_random_points,
    gen_rhst_adversarial,
    gen_well_clusterable,
    load_csv,
    save_csv,
)
from .estimators import ALGORITHM_NAMES, make_estimator
from .sensitivity import DeletionSchedule, sensitivity_sweep

_TREE_ALGOS = ("stable", "clnss-greedy", "clnss-deterministic")


class ConfigError(ValueError):
    pass


def _parse_kv(spec: str) -> tuple:
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not key or not value:
                raise ConfigError(f"bad generator parameter {item!r} in {spec!r}")
            try:
                params[key] = int(value)
            except ValueError:
                try:
                    params[key] = float(value)
                except ValueError:
                    raise ConfigError(f"non-numeric generator parameter {item!r}") from None
    return name, params


def _make_generated(spec: str, seed: int) -> tuple:
    name, params = _parse_kv(spec)
    meta = {"generator": name, "params": params, "seed": seed}
    try:
        if name == "line":
            return gen_line_instance(int(params["n"]), float(params.get("d1", 0.5))), meta
        if name == "adversarial":
            return gen_rhst_adversarial(int(params["n"])), meta
        if name == "random":
            rng = np.random.default_rng(seed)
            return (
                gen_random_points(
                    int(params["n"]),
                    int(params.get("d", 2)),
                    float(params.get("spread", 10.0)),
                    int(params.get("clusters", 0)),
                    rng,
                ),
                meta,
            )
        if name == "wellclusterable":
            rng = np.random.default_rng(seed)
            ds, part = gen_well_clusterable(
                int(params["m"]),
                int(params.get("ppc", 20)),
                float(params.get("separation", 2.5)),
                int(params.get("d", 2)),
                rng,
            )
            meta["planted_blocks"] = [sorted(b) for b in part.sorted_blocks()]
            return ds, meta
    except KeyError as exc:
        raise ConfigError(f"generator {name!r} is missing parameter {exc}") from None
    raise ConfigError(f"unknown generator {name!r} (line|adversarial|random|wellclusterable)")


def _load_input(args) -> tuple:
    if getattr(args, "generator", None):
        return _make_generated(args.generator, args.seed)
    if getattr(args, "input", None):
        ds = load_csv(args.input, has_header=args.header, scale=args.scale)
        return ds, {"input": str(args.input), "scaled": bool(args.scale)}
    raise ConfigError("provide --input FILE or --generator SPEC")


def _parse_k_range(args, n: int) -> list:
    if args.k_range:
        lo, _, hi = args.k_range.partition(":")
        try:
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"bad --k-range {args.k_range!r}, expected A:B") from None
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad --k-range {args.k_range!r}")
        return list(range(lo, min(hi, n) + 1))
    if args.k is not None:
        if args.k < 1:
            raise ConfigError("--k must be >= 1")
        return [min(args.k, n)]
    return None


def _parse_schedule(args) -> DeletionSchedule:
    spec = args.delete
    trials = args.trials
    try:
        if spec == "point":
            return DeletionSchedule.random_count(1, trials)
        if spec == "point-all":
            return DeletionSchedule.single_point_all()
        if spec.startswith("count:"):
            return DeletionSchedule.random_count(int(spec.split(":", 1)[1]), trials)
        if spec.startswith("frac:"):
            return DeletionSchedule.random_fraction(float(spec.split(":", 1)[1]), trials)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad --delete {spec!r}: {exc}") from None
    raise ConfigError(f"bad --delete {spec!r} (point | point-all | count:N | frac:F)")


def _config_dict(args, extra=None) -> dict:
    skip = {"func", "config"}
    out = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if extra:
        out.update(extra)
    return out


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not serializable: {obj!r}")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n")


def _write_csv(path: Path, rows, config: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write("# config: " + json.dumps(config, sort_keys=True, default=_json_default) + "\n")
        writer = csv.writer(handle)
        for row in rows:
            writer.writerow(row)


def _check_epsilon_compat(args) -> None:
    eps = getattr(args, "epsilon", None)
    if args.algorithm != "stable" and eps:
        raise ConfigError(f"--epsilon only applies to the stable algorithm, not {args.algorithm!r}")


def cmd_cluster(args) -> int:
    dataset, source = _load_input(args)
    _check_epsilon_compat(args)
    n = dataset.n
    ks = _parse_k_range(args, n)
    k_top = max(ks) if ks else min(n, 16)
    eps = (args.epsilon or [1.0])[0]
    est = make_estimator(
        args.algorithm, n_clusters=k_top, epsilon=eps, max_levels=k_top, random_state=args.seed
    )
    est.fit(dataset.points)
    levels = []
    for k in range(1, k_top + 1):
        part = est.level_partition(k)
        entry = {"k": k, "blocks": [sorted(b) for b in part.sorted_blocks()]}
        if args.algorithm in _TREE_ALGOS:
            entry["tree_cost"] = float(est.tree_costs_[k - 1])
            entry["euclidean_cost"] = float(est.euclidean_costs_[k - 1])
        else:
            entry["euclidean_cost"] = partition_kmedian_cost(dataset, part)[0]
        levels.append(entry)
    payload = {
        "config": _config_dict(args, {"source": source}),
        "n": n,
        "dim": dataset.dim,
        "algorithm": args.algorithm,
        "centers": [int(c) for c in getattr(est, "centers_", [])],
        "levels": levels,
    }
    _write_json(Path(args.out), payload)
    print(f"wrote {args.out}")
    return 0


def cmd_sensitivity(args) -> int:
    dataset, source = _load_input(args)
    _check_epsilon_compat(args)
    ks = _parse_k_range(args, dataset.n) or [2]
    schedule = _parse_schedule(args)
    eps_list = args.epsilon or [1.0]
    if args.algorithm != "stable":
        eps_list = [None]
    outdir = Path(args.out)
    config = _config_dict(args, {"source": source})
    summaries = []
    for eps in eps_list:
        est = make_estimator(
            args.algorithm, epsilon=eps if eps is not None else 1.0, random_state=args.seed
        )
        reports = sensitivity_sweep(
            est, dataset.points, ks, schedule, master_seed=args.seed, workers=args.workers
        )
        tag = args.algorithm if eps is None else f"{args.algorithm}_eps{eps:g}"
        for k in ks:
            rep = reports[k]
            _write_csv(outdir / f"sensitivity_{tag}_k{k}.csv", rep.csv_rows(), config)
            summaries.append(rep.summary() | {"epsilon": eps})
    _write_json(outdir / f"sensitivity_{args.algorithm}_summary.json", {"config": config, "cells": summaries})
    print(f"wrote {outdir}")
    return 0


def cmd_cost_curve(args) -> int:
    dataset, source = _load_input(args)
    for algo in args.algorithm_list:
        if algo not in ALGORITHM_NAMES:
            raise ConfigError(f"unknown algorithm {algo!r}")
    if "stable" not in args.algorithm_list and args.epsilon:
        raise ConfigError("--epsilon given but the stable algorithm is not in --algorithm")
    ks = _parse_k_range(args, dataset.n) or list(range(1, min(dataset.n, 10) + 1))
    eps = (args.epsilon or [1.0])[0]
    rows = [("k", "algorithm", "cost")]
    for algo in args.algorithm_list:
        est = make_estimator(
            algo, n_clusters=max(ks), epsilon=eps, max_levels=max(ks), random_state=args.seed
        )
        est.fit(dataset.points)
        for k in ks:
            if algo in _TREE_ALGOS:
                cost = kmedian_cost(dataset, est.hierarchy_.centers[:k])
            else:
                cost = partition_kmedian_cost(dataset, est.level_partition(k))[0]
            rows.append((k, algo, repr(float(cost))))
    _write_csv(Path(args.out), rows, _config_dict(args, {"source": source}))
    print(f"wrote {args.out}")
    return 0


def cmd_clusterability(args) -> int:
    dataset, source = _load_input(args)
    params = DbscanParams(eps=args.eps, min_samples=args.min_samples)
    partition, noise = dbscan(dataset, params)
    if partition.k == 0:
        raise ConfigError("DBSCAN found no clusters; adjust --eps/--min-samples")
    covered = Dataset(
        dataset.points[dataset.rows_of(sorted(partition.ground))], np.asarray(sorted(partition.ground))
    )
    report = check_well_clusterable(covered, partition)
    clusters = []
    for i, block in enumerate(partition.sorted_blocks()):
        nearest = report.nearest_other(i)
        clusters.append(
            {
                "cluster": i,
                "size": len(block),
                "max_intra": report.max_intra[i],
                "min_inter": None if nearest == float("inf") else nearest,
            }
        )
    config = _config_dict(args, {"source": source})
    payload = {
        "config": config,
        "verdict": report.verdict,
        "witnesses": [list(w) for w in report.witnesses],
        "noise_ids": sorted(noise),
        "clusters": clusters,
        "pairwise_min_inter": [list(t) for t in report.min_inter],
    }
    out = Path(args.out)
    _write_json(out.with_suffix(".json"), payload)
    rows = [("cluster", "size", "max_intra", "min_inter")]
    for c in clusters:
        rows.append((c["cluster"], c["size"], repr(c["max_intra"]), repr(c["min_inter"])))
    _write_csv(out.with_suffix(".csv"), rows, config)
    print(f"wrote {out.with_suffix('.json')} and {out.with_suffix('.csv')}")
    return 0


def cmd_gen(args) -> int:
    dataset, meta = _make_generated(args.generator, args.seed)
    save_csv(dataset, args.out, meta={"config": _config_dict(args), **meta})
    print(f"wrote {args.out} ({dataset.n} points, dim {dataset.dim})")
    return 0


def _add_io_options(sub, generator_only=False):
    if not generator_only:
        sub.add_argument("--input", help="CSV file of points, one per row")
        sub.add_argument("--header", action="store_true", help="skip the first CSV row")
        sub.add_argument("--scale", action="store_true", help="min-max scale each column")
    sub.add_argument(
        "--generator",
        help="synthetic input, e.g. line:n=100,d1=0.5 | adversarial:n=128 | "
        "random:n=500,d=2,clusters=4 | wellclusterable:m=4,ppc=20",
    )
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument("--out", required=True, help="output path (file or directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hkmedian", description=__doc__)
    parser.add_argument("--config", help="JSON file of default option values; flags override")
    sub = parser.add_subparsers(dest="command", required=True)
    parser._hk_subparsers = []
    original_add_parser = sub.add_parser

    def tracked_add_parser(*args, **kwargs):
        child = original_add_parser(*args, **kwargs)
        parser._hk_subparsers.append(child)
        return child

    sub.add_parser = tracked_add_parser

    p_cluster = sub.add_parser("cluster", help="run one algorithm, write the hierarchy as JSON")
    _add_io_options(p_cluster)
    p_cluster.add_argument("--algorithm", default="stable", choices=ALGORITHM_NAMES)
    p_cluster.add_argument("--k", type=int, help="deepest level to write")
    p_cluster.add_argument("--k-range", help="A:B inclusive")
    p_cluster.add_argument("--epsilon", type=float, action="append")
    p_cluster.set_defaults(func=cmd_cluster)

    p_sens = sub.add_parser("sensitivity", help="shared-seed deletion stability grid")
    _add_io_options(p_sens)
    p_sens.add_argument("--algorithm", default="stable", choices=ALGORITHM_NAMES)
    p_sens.add_argument("--k", type=int)
    p_sens.add_argument("--k-range", help="A:B inclusive")
    p_sens.add_argument("--epsilon", type=float, action="append", help="repeatable (stable only)")
    p_sens.add_argument(
        "--delete", default="point", help="point | point-all | count:N | frac:F (default point)"
    )
    p_sens.add_argument("--trials", type=int, default=100)
    p_sens.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_sens.set_defaults(func=cmd_sensitivity)

    p_cost = sub.add_parser("cost-curve", help="k-median cost of each algorithm across k")
    _add_io_options(p_cost)
    p_cost.add_argument(
        "--algorithm",
        dest="algorithm_list",
        action="append",
        default=None,
        help="repeatable; defaults to all algorithms",
    )
    p_cost.add_argument("--k", type=int)
    p_cost.add_argument("--k-range", help="A:B inclusive")
    p_cost.add_argument("--epsilon", type=float, action="append")
    p_cost.set_defaults(func=cmd_cost_curve)

    p_clu = sub.add_parser("clusterability", help="DBSCAN partition plus the separation report")
    _add_io_options(p_clu)
    p_clu.add_argument("--eps", type=float, required=True, help="DBSCAN neighborhood radius")
    p_clu.add_argument("--min-samples", type=int, default=3)
    p_clu.set_defaults(func=cmd_clusterability)

    p_gen = sub.add_parser("gen", help="write a generated dataset as CSV with a meta sidecar")
    _add_io_options(p_gen, generator_only=True)
    p_gen.set_defaults(func=cmd_gen)
    return parser


def _apply_config_file(parser, argv):
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        raise ConfigError("--config needs a file path") from None
    try:
        defaults = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(defaults, dict):
        raise ConfigError("config file must hold a JSON object")
    mapped = {k.replace("-", "_"): v for k, v in defaults.items()}
    # subparsers parse into their own namespace, so each needs the defaults
    for child in [parser] + parser._hk_subparsers:
        child.set_defaults(**{k: v for k, v in mapped.items() if k in _dests(child)})
    return argv


def _dests(parser) -> set:
    return {action.dest for action in parser._actions}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if getattr(args, "algorithm_list", "sentinel") is None:
            args.algorithm_list = list(ALGORITHM_NAMES)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, DegenerateDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
