"""Command-line entry point.

One executable, seven subcommands: ``gen-graph``, ``spectral``,
``verify``, ``sample``, ``couple``, ``birthdeath``, and ``experiment``.
Every run that writes files also writes a ``manifest.json`` recording the
resolved configuration, master seed, and a content digest per output, so
reruns can be audited byte for byte (timestamps live only in the
manifest).

Exit codes: 0 when every emitted verdict passed, 1 when any failed, 2 on
usage errors (unknown subcommand, malformed flags or config, structural
impossibilities such as odd n*d for a regular graph).

Config files use the plain ``key = value`` format documented in
:mod:`stein_ising.experiments`; flags override config values, which
override built-in defaults.  ``STEIN_ISING_JOBS`` sets the default worker
count.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .exact import verify_battery
from .experiments import (
    EXPERIMENTS,
    load_config_file,
    make_config,
    run_experiment,
    write_result,
)
from .graphs import (
    complete_graph,
    disjoint_cliques,
    load_graph,
    random_regular,
    save_graph,
    spectral_report,
)
from .ising import curie_weiss
from .mcmc import (
    birth_death_hitting,
    BirthDeathChain,
    coalescence_times,
    contraction_profile,
    magnetization_samples,
)
from .reporting import RunManifest, write_csv

USAGE_ERROR = 2


def _default_jobs():
    env = os.environ.get("STEIN_ISING_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _new_manifest(args, seed):
    config = {
        key: value for key, value in sorted(vars(args).items())
        if key not in ("func",) and value is not None
    }
    config["version"] = __version__
    return RunManifest(
        command=args.command,
        master_seed=seed,
        config=config,
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    )


def _emit(out_dir, manifest, paths):
    os.makedirs(out_dir, exist_ok=True)
    for path in paths:
        manifest.record_output(path)
    manifest.write(out_dir)


def _print_records(records):
    for record in records:
        print(json.dumps(record.to_dict(), sort_keys=True))


def _exit_code(records):
    return 0 if all(record.passed for record in records) else 1


def _resolve(args, config, key, default, cast):
    """Flag value if given, else config-file value, else the default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in config:
        return cast(config[key])
    return default


def _load_config(args):
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return {}


class UsageError(Exception):
    pass


def _build_graph(kind, n, d, seed):
    if kind == "regular":
        if (n * d) % 2 != 0:
            raise UsageError(
                f"no {d}-regular graph on {n} vertices exists: "
                f"n*d = {n * d} is odd (parity obstruction)"
            )
        return random_regular(n, d, seed=seed)
    if kind == "cliques":
        if n % d != 0:
            raise UsageError(
                f"clique size {d} does not divide {n} vertices"
            )
        return disjoint_cliques(n, d)
    if kind == "complete":
        return complete_graph(n)
    raise UsageError(f"unknown graph type {kind!r}")


# -- subcommands -------------------------------------------------------------

def _cmd_gen_graph(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 0, int)
    n = _resolve(args, config, "n", None, int)
    d = _resolve(args, config, "d", None, int)
    kind = _resolve(args, config, "graph-type", "regular", str)
    if n is None or d is None:
        raise UsageError("gen-graph needs --n and --d")
    graph = _build_graph(kind, n, d, seed)
    out_dir = args.out_dir or "stein-ising-out"
    os.makedirs(out_dir, exist_ok=True)
    manifest = _new_manifest(args, seed)
    path = os.path.join(out_dir, f"graph-{kind}-n{n}-d{d}.txt")
    save_graph(graph, path)
    _emit(out_dir, manifest, [path])
    print(f"wrote {path} ({graph.num_edges} edges)")
    return 0


def _cmd_spectral(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 0, int)
    if args.graph:
        graph = load_graph(args.graph)
    else:
        n = _resolve(args, config, "n", None, int)
        d = _resolve(args, config, "d", None, int)
        if n is None or d is None:
            raise UsageError("spectral needs --graph, or --n and --d")
        kind = _resolve(args, config, "graph-type", "regular", str)
        graph = _build_graph(kind, n, d, seed)
    report = spectral_report(graph)
    payload = {
        "n": report.n,
        "degree": report.degree,
        "epsilon": report.epsilon,
        "second_max_abs": report.second_max_abs,
        "is_connected": report.is_connected,
        "method": report.method,
    }
    print(json.dumps(payload, sort_keys=True))
    out_dir = args.out_dir or "stein-ising-out"
    manifest = _new_manifest(args, seed)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "spectral.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(out_dir, manifest, [path])
    return 0


def _cmd_verify(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 7, int)
    n = _resolve(args, config, "n", 6, int)
    beta = _resolve(args, config, "beta", 0.5, float)
    trials = _resolve(args, config, "trials", 100, int)
    tol = _resolve(args, config, "tol", 1e-10, float)
    records = verify_battery(n, beta, trials, seed, tol=tol)
    _print_records(records)
    out_dir = args.out_dir or "stein-ising-out"
    manifest = _new_manifest(args, seed)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "verify.json")
    with open(path, "w") as fh:
        json.dump([record.to_dict() for record in records], fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    _emit(out_dir, manifest, [path])
    return _exit_code(records)


def _cmd_sample(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 0, int)
    n = _resolve(args, config, "n", 128, int)
    beta = _resolve(args, config, "beta", 1.2, float)
    d = _resolve(args, config, "d", 0, int)
    sampler = _resolve(args, config, "sampler", "plain", str)
    samples = _resolve(args, config, "samples", 100_000, int)
    thin = _resolve(args, config, "thin", 0, int) or None
    if d > 0:
        kind = _resolve(args, config, "graph-type", "regular", str)
        from .graphs import interaction_from_graph
        J = interaction_from_graph(_build_graph(kind, n, d, seed), beta,
                                   scale="per-d")
    else:
        J = curie_weiss(n, beta)
    hist = magnetization_samples(J, samples, sampler=sampler, seed=seed,
                                 thin=thin)
    rows = []
    for value, mass in zip(hist.values, hist.masses):
        if mass == 0.0:
            continue
        rows.append({
            "seed": seed, "n": n, "beta": beta, "d": d or "",
            "estimator": "magnetization_mass", "value": mass, "se": "",
            "m": value,
        })
    out_dir = args.out_dir or "stein-ising-out"
    manifest = _new_manifest(args, seed)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "magnetization.csv")
    write_csv(csv_path, ["seed", "n", "beta", "d", "estimator", "value",
                         "se", "m"], rows)
    summary = {
        "mean": hist.mean(),
        "flip_symmetry_gap": hist.flip_symmetry_gap(),
        "samples": hist.num_samples,
        "sampler": sampler,
    }
    if beta > 1.0:
        profile = contraction_profile(beta)
        summary["m_star"] = profile.m_star
        summary["outlier_fraction_0.15"] = hist.outlier_fraction(
            profile.m_star, 0.15)
    json_path = os.path.join(out_dir, "magnetization.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(out_dir, manifest, [csv_path, json_path])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_couple(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 0, int)
    n = _resolve(args, config, "n", 64, int)
    beta = _resolve(args, config, "beta", 1.2, float)
    pairs = _resolve(args, config, "pairs", 100, int)
    sampler = _resolve(args, config, "sampler", "restricted", str)
    times = coalescence_times(n, beta, pairs, seed=seed,
                              restricted=(sampler == "restricted"),
                              jobs=args.jobs)
    rows = [{
        "seed": seed, "n": n, "beta": beta, "d": "",
        "estimator": "coalescence_updates", "value": int(t), "se": "",
        "pair": idx,
    } for idx, t in enumerate(times)]
    finished = times[times >= 0]
    summary = {
        "pairs": pairs,
        "coalesced_fraction": float(len(finished)) / pairs,
        "median_updates": float(np.median(finished)) if len(finished) else None,
        "mean_sweeps": float(finished.mean() / n) if len(finished) else None,
    }
    out_dir = args.out_dir or "stein-ising-out"
    manifest = _new_manifest(args, seed)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "coalescence.csv")
    write_csv(csv_path, ["seed", "n", "beta", "d", "estimator", "value",
                         "se", "pair"], rows)
    json_path = os.path.join(out_dir, "coalescence.json")
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit(out_dir, manifest, [csv_path, json_path])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_birthdeath(args):
    config = _load_config(args)
    seed = _resolve(args, config, "seed", 0, int)
    r = _resolve(args, config, "r", 8, int)
    alpha = _resolve(args, config, "alpha", 0.8, float)
    start = _resolve(args, config, "start", None, int)
    runs = _resolve(args, config, "runs", 100_000, int)
    if start is None:
        start = (r - 1) // 2
    chain = BirthDeathChain(r=r, alpha=alpha)
    report = birth_death_hitting(chain, start, runs=runs, seed=seed)
    rows = [{
        "seed": seed, "n": r, "beta": "", "d": "",
        "estimator": "hit_top_probability", "value": report.simulated,
        "se": report.se, "exact": report.exact, "alpha": alpha, "start": start,
    }]
    for tail in report.tail_rows:
        rows.append({
            "seed": seed, "n": r, "beta": "", "d": "",
            "estimator": f"tail_fraction_K{tail.extra['K']}",
            "value": tail.lhs, "se": tail.extra["se"],
            "exact": "", "alpha": alpha, "start": tail.extra["start"],
        })
    _print_records([report.agreement, *report.tail_rows])
    out_dir = args.out_dir or "stein-ising-out"
    manifest = _new_manifest(args, seed)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "birthdeath.csv")
    write_csv(csv_path, ["seed", "n", "beta", "d", "estimator", "value",
                         "se", "exact", "alpha", "start"], rows)
    _emit(out_dir, manifest, [csv_path])
    return 0 if report.holds else 1


def _cmd_experiment(args):
    overrides = _load_config(args)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    name = args.name
    if name not in EXPERIMENTS:
        raise UsageError(
            f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}"
        )
    result = run_experiment(name, overrides, jobs=args.jobs)
    cfg = result.config
    out_dir = args.out_dir if args.out_dir else (cfg.out_dir or "stein-ising-out")
    manifest = _new_manifest(args, cfg.seed)
    manifest.config["experiment"] = cfg.to_dict()
    paths = write_result(result, out_dir)
    _emit(out_dir, manifest, paths)
    for record in result.records:
        status = "pass" if record.passed else "FAIL"
        print(f"[{status}] {record.check_name}: lhs={record.lhs:.6g} "
              f"rhs={record.rhs:.6g}")
    return 0 if result.passed else 1


# -- parser ------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (default: subcommand-specific)")
    common.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="worker threads (env STEIN_ISING_JOBS)")
    common.add_argument("--out-dir", default=None,
                        help="directory for outputs and manifest "
                             "(default: stein-ising-out)")
    common.add_argument("--config", default=None,
                        help="plain-text key=value config file")

    parser = argparse.ArgumentParser(
        prog="stein-ising",
        description=__doc__.split("\n\n")[0],
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", parents=[common],
                       help="generate a graph and save its edge list")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--graph-type", choices=("regular", "cliques", "complete"))
    p.set_defaults(func=_cmd_gen_graph)

    p = sub.add_parser("spectral", parents=[common],
                       help="eigenvalue report for a generated or loaded graph")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--graph", help="load an edge-list file instead")
    p.add_argument("--graph-type", choices=("regular", "cliques", "complete"))
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("verify", parents=[common],
                       help="exact-engine inequality battery at enumerable size")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sample", parents=[common],
                       help="magnetization histogram from a Glauber chain")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--graph-type", choices=("regular", "cliques", "complete"))
    p.add_argument("--sampler", choices=("plain", "restricted"))
    p.add_argument("--samples", type=int)
    p.add_argument("--thin", type=int)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("couple", parents=[common],
                       help="coalescence times of the monotone coupling")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--pairs", type=int)
    p.add_argument("--sampler", choices=("plain", "restricted"))
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("birthdeath", parents=[common],
                       help="gambler's-ruin hitting probabilities vs closed form")
    p.add_argument("--r", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--start", type=int)
    p.add_argument("--runs", type=int)
    p.set_defaults(func=_cmd_birthdeath)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a named study and write CSV + verdicts")
    p.add_argument("name", help=f"one of {sorted(EXPERIMENTS)}")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
