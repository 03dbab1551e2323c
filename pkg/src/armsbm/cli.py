"""Command-line front end: simulate trajectories, run estimators, benchmark
policies over Monte Carlo replications, calibrate the tolerance constant, and
ingest edge lists into the binary trajectory format.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .community import hamming_loss
from .dmts import DmtsError, ingest_edge_list, read_dmts, write_dmts
from .harness import (
    DEFAULT_BURN_IN,
    DEFAULT_REPS,
    ExperimentConfig,
    aggregate,
    build_policy,
    run_experiment,
    write_summary_csv,
    write_trajectory_csv,
)
from .model import SCENARIO_NAMES, ParamSchedule, make_scenario, simulate
from .pipeline import run as run_pipeline
from .window import DEFAULT_C_TAU, GridExhaustedError, calibrate_ctau

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_GRID_EXHAUSTED = 4

_FLOAT_FMT = "%.10g"

DEFAULT_CALIBRATION_GRID = [0.05 * 2**j for j in range(9)]


class UsageError(ValueError):
    pass


def _read_config(path: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DmtsError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise DmtsError(f"cannot read config {path}: {exc}") from exc
    return out


def _parse_ranks(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--ranks expects K,r1,r2, got {text!r}")
    try:
        k, r1, r2 = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--ranks expects integers, got {text!r}") from None
    return k, r1, r2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", action="append", default=None, choices=list(SCENARIO_NAMES))
    p.add_argument("--policy", action="append", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t-max", type=int, default=None, dest="t_max")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--c-tau", type=float, default=None, dest="c_tau")
    p.add_argument("--ranks", type=str, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--config", type=str, default=None)


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the optional config file (flags win)."""
    if not getattr(args, "config", None):
        return args
    cfg = _read_config(args.config)
    casts = {
        "n": int,
        "t_max": int,
        "reps": int,
        "seed": int,
        "burn_in": int,
        "c_tau": float,
        "ranks": str,
        "out": str,
        "input": str,
        "alpha": float,
        "bootstrap": int,
        "grid": str,
    }
    lists = {"scenario", "policy"}
    for key, raw in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, dest) is not None:
            continue  # explicit flag wins
        if dest in lists:
            setattr(args, dest, [v.strip() for v in raw.split(",") if v.strip()])
        elif dest in casts:
            setattr(args, dest, casts[dest](raw))
        else:
            setattr(args, dest, raw)
    return args


def _out_dir(args: argparse.Namespace) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _single(values: list[str] | None, what: str, default: str | None = None) -> str:
    if not values:
        if default is not None:
            return default
        raise UsageError(f"exactly one --{what} is required")
    if len(values) > 1:
        raise UsageError(f"exactly one --{what} is allowed")
    return values[0]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _single(args.scenario, "scenario")
    z, schedule, horizon = make_scenario(scenario, n=args.n, t_max=args.t_max)
    snapshots = simulate(z, schedule, horizon, seed=args.seed or 0)
    out = _out_dir(args)
    path = os.path.join(out, f"{scenario}.dmts")
    write_dmts(path, snapshots)
    t_count, n, _, l_count = snapshots.shape
    density = snapshots.mean()
    print(f"wrote {path}: n={n} L={l_count} T={t_count} density={density:.4f}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.n is None or args.t_max is None or args.layers is None:
        raise UsageError("ingest requires --n, --layers and --t-max")
    snapshots = ingest_edge_list(args.edge_list, args.n, args.layers, args.t_max)
    out = _out_dir(args)
    base = os.path.splitext(os.path.basename(args.edge_list))[0]
    path = os.path.join(out, f"{base}.dmts")
    write_dmts(path, snapshots)
    print(f"wrote {path}: n={args.n} L={args.layers} T={args.t_max} edges={int(snapshots.sum()) // 2}")
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    policies = args.policy or ["adaptive"]
    seed = args.seed or 0
    ranks = _parse_ranks(args.ranks) if args.ranks else (2, 2, 2)
    c_tau = args.c_tau if args.c_tau is not None else DEFAULT_C_TAU
    truth = None
    if args.input:
        snapshots = read_dmts(args.input)
    else:
        scenario = _single(args.scenario, "scenario")
        z, schedule, horizon = make_scenario(scenario, n=args.n, t_max=args.t_max)
        snapshots = simulate(z, schedule, horizon, seed=seed)
        truth = (z, schedule)
    out = _out_dir(args)
    k_communities = ranks[0]
    for name in policies:
        policy = build_policy(name, ranks, c_tau=c_tau, seed=seed)
        results = run_pipeline(snapshots, policy, truth=truth)
        path = os.path.join(out, f"estimate_{name}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t", "k_hat", "degenerate_frac", "switch_rate"]
            header += [f"size_{j + 1}" for j in range(k_communities)]
            if truth is not None:
                header += ["err_theta", "err_delta", "err_z"]
            writer.writerow(header)
            prev_labels = None
            for bundle, metrics in results:
                labels = bundle.z_hat.labels
                # fraction of nodes whose community changes between consecutive
                # steps, minimized over label permutations
                switch = 0.0 if prev_labels is None else hamming_loss(labels, prev_labels)
                prev_labels = labels
                sizes = np.bincount(labels, minlength=k_communities)
                row = [bundle.t, bundle.k_hat, _FLOAT_FMT % bundle.degenerate_frac,
                       _FLOAT_FMT % switch]
                row += [int(s) for s in sizes]
                if metrics is not None:
                    row += [
                        _FLOAT_FMT % metrics.err_theta,
                        _FLOAT_FMT % metrics.err_delta,
                        _FLOAT_FMT % metrics.err_z,
                    ]
                writer.writerow(row)
        print(f"wrote {path} ({len(results)} steps)")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    scenarios = args.scenario or list(SCENARIO_NAMES)
    policies = tuple(args.policy or ["adaptive", "full-history", "fixed-30", "fixed-20"])
    ranks = _parse_ranks(args.ranks) if args.ranks else (2, 2, 2)
    out = _out_dir(args)
    all_results = []
    for scenario in scenarios:
        config = ExperimentConfig(
            scenario=scenario,
            policies=policies,
            reps=args.reps if args.reps is not None else DEFAULT_REPS,
            seed=args.seed or 0,
            n=args.n,
            t_max=args.t_max,
            burn_in=args.burn_in if args.burn_in is not None else DEFAULT_BURN_IN,
            c_tau=args.c_tau if args.c_tau is not None else DEFAULT_C_TAU,
            ranks=ranks,
        )
        all_results.extend(run_experiment(config))
    burn_in = args.burn_in if args.burn_in is not None else DEFAULT_BURN_IN
    rows = aggregate(all_results, burn_in)
    summary_path = os.path.join(out, "summary.csv")
    trajectory_path = os.path.join(out, "trajectories.csv")
    write_summary_csv(summary_path, rows)
    write_trajectory_csv(trajectory_path, all_results)
    meta_path = os.path.join(out, "bench_meta.txt")
    with open(meta_path, "w") as fh:
        fh.write(f"scenarios={','.join(scenarios)}\n")
        fh.write(f"policies={','.join(policies)}\n")
        fh.write(f"reps={config.reps}\n")
        fh.write(f"seed={config.seed}\n")
        fh.write(f"burn_in={burn_in}\n")
        fh.write(f"c_tau={config.c_tau}\n")
        fh.write(f"ranks={','.join(str(r) for r in ranks)}\n")
        fh.write("kmeans_restarts=20\n")
        fh.write("reference_replications=50\n")
    print(f"wrote {summary_path} and {trajectory_path}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    from .model import Membership
    from .model import _regime  # stationary weak-signal training regime

    n = args.n if args.n is not None else 30
    t_snap = args.t_max if args.t_max is not None else 36
    seed = args.seed or 0
    alpha = args.alpha if args.alpha is not None else 0.05
    b = args.bootstrap if args.bootstrap is not None else 20
    burn_in = args.burn_in if args.burn_in is not None else DEFAULT_BURN_IN
    grid = (
        [float(v) for v in args.grid.split(",")] if args.grid else DEFAULT_CALIBRATION_GRID
    )
    z = Membership.balanced(n, 2)
    schedule = ParamSchedule.constant(_regime(1))
    train = simulate(z, schedule, t_snap - 1, seed=seed)[1:]  # drop the initial state
    c, curve = calibrate_ctau(train, grid, burn_in=burn_in, alpha=alpha, b=b, seed=seed + 1)
    out = _out_dir(args)
    path = os.path.join(out, "calibration.txt")
    with open(path, "w") as fh:
        fh.write(f"c_tau={_FLOAT_FMT % c}\n")
        fh.write(f"alpha={_FLOAT_FMT % alpha}\nbootstrap={b}\nburn_in={burn_in}\n")
        fh.write(f"n={n}\nT={t_snap}\nseed={seed}\n")
        for cand in sorted(curve):
            fh.write(f"acceptance[{_FLOAT_FMT % cand}]={_FLOAT_FMT % curve[cand]}\n")
    print(f"calibrated c_tau={c:g} (wrote {path})")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msbm",
        description="Streaming estimation benchmark for dynamic multilayer networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a benchmark scenario to a .dmts file")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="run one or more policies over a trajectory")
    _add_common(p)
    p.add_argument("--input", type=str, default=None, help=".dmts trajectory to estimate on")
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("bench", help="Monte Carlo benchmark with metric aggregation")
    _add_common(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("calibrate", help="bootstrap-calibrate the tolerance constant")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--bootstrap", type=int, default=None)
    p.add_argument("--grid", type=str, default=None, help="comma-separated candidate constants")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("ingest", help="build a .dmts trajectory from a (t,i,j,l) edge list")
    _add_common(p)
    p.add_argument("edge_list", type=str)
    p.add_argument("--layers", type=int, default=None)
    p.set_defaults(fn=cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return args.fn(args)
    except GridExhaustedError as exc:
        print(f"error: {exc}; enlarge the candidate grid", file=sys.stderr)
        return EXIT_GRID_EXHAUSTED
    except DmtsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
