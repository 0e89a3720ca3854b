"""Command-line entry point: ``relaysim {simulate,pmf,validate,oracle} CONFIG``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Optional, Sequence


from . import __version__
from .config import ConfigError, Experiment, config_hash, parse_config
from .engine import build_pipeline, resolve_threads, simulate_ber, sweep
from .oracle import exact_ber_small, oracle_supported
from .output import ResultRow, Stopwatch, emit_results

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("relaysim")


def _select(experiments, name: Optional[str]):
    if name is None:
        return experiments
    picked = [e for e in experiments if e.name == name]
    if not picked:
        raise ConfigError(f"no experiment named {name!r}; available: {', '.join(e.name for e in experiments)}")
    return picked


def _with_seed(exp: Experiment, seed: Optional[int]) -> Experiment:
    if seed is None:
        return exp
    return Experiment(exp.name, exp.config.with_(seed=seed), exp.sweep)


def _run_experiment(exp: Experiment, threads: int) -> list:
    if exp.sweep is None:
        return [ResultRow(exp.name, exp.config, simulate_ber(exp.config, threads=threads))]
    points = sweep(exp.config, exp.sweep.axis, exp.sweep.values, threads=threads)
    return [ResultRow(exp.name, p.config, p.estimate) for p in points]


def cmd_simulate(args) -> int:
    experiments = [_with_seed(e, args.seed) for e in _select(parse_config(args.config), args.experiment)]
    threads = resolve_threads(args.threads)
    clock = Stopwatch()
    tables = {}
    for exp in experiments:
        rows = _run_experiment(exp, threads)
        tables[exp.name] = rows
        for r in rows:
            print(f"{exp.name}: hops={r.config.hops} snr_db={r.config.snr_db:g} ber={r.estimate.ber:.6g} "
                  f"(+/- {r.estimate.ci95_halfwidth:.2g})")
    manifest = {
        "tool": "relaysim",
        "version": __version__,
        "config_file": str(args.config),
        "config_hash": config_hash(experiments),
        "seeds": {e.name: e.config.seed for e in experiments},
        "threads": threads,
        "wall_time_s": round(clock.elapsed, 3),
    }
    emit_results(tables, args.out, manifest=manifest)
    return EXIT_OK


def cmd_pmf(args) -> int:
    print("experiment,group,quantity,index,value")
    for exp in _select(parse_config(args.config), args.experiment):
        pipe = build_pipeline(exp.config)
        for k, state in enumerate(pipe.groups, start=1):
            if state is None:
                continue
            if state.per_trial:
                print(f"{exp.name},{k},marginal,*,per_trial")
                continue
            for i, v in enumerate(state.marginals):
                print(f"{exp.name},{k},marginal,{i},{v:.6g}")
            if state.pmf is not None:
                for i, v in enumerate(state.pmf.probs):
                    print(f"{exp.name},{k},pmf,{i},{v:.6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    parse_config(args.config)
    return EXIT_OK


def cmd_oracle(args) -> int:
    threads = resolve_threads(args.threads)
    print(f"{'experiment':<24} {'exact':>10} {'simulated':>10} {'ci95':>9} {'z':>6}")
    for exp in _select(parse_config(args.config), args.experiment):
        cfg = exp.config
        if not oracle_supported(cfg):
            print(f"{exp.name:<24} {'n/a':>10}  (needs known_csi, per_campaign, <=2 relay groups of <=2 nodes)")
            continue
        exact = exact_ber_small(cfg)
        est = simulate_ber(cfg, threads=threads)
        se = math.sqrt(exact * (1 - exact) / est.trials) if 0 < exact < 1 else float("nan")
        z = (est.ber - exact) / se if se > 0 else float("nan")
        print(f"{exp.name:<24} {exact:>10.6g} {est.ber:>10.6g} {est.ci95_halfwidth:>9.2g} {z:>6.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relaysim", description="BER simulator for decode-and-forward relay networks")
    p.add_argument("--version", action="version", version=f"relaysim {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run experiments and write CSV results")
    s.add_argument("config")
    s.add_argument("--experiment", help="run only this experiment")
    s.add_argument("--out", default="results", help="output directory (default: results)")
    s.add_argument("--threads", type=int, help="worker threads (default: $RELAYSIM_THREADS or 1)")
    s.add_argument("--seed", type=int, help="override every experiment's seed")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pmf", help="print the per-group pmfs and marginals")
    s.add_argument("config")
    s.add_argument("--experiment")
    s.set_defaults(func=cmd_pmf)

    s = sub.add_parser("validate", help="check an experiment file and exit")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("oracle", help="compare simulation with exact BER on small instances")
    s.add_argument("config")
    s.add_argument("--experiment")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_oracle)
    return p


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> int:
    return run_command(sys.argv[1:])
