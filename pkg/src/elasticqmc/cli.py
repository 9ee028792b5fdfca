"""Command-line driver.

Subcommands
-----------
run --preset {1,2,3,4a,4b} [--paper-scale] [--workers k] [--out dir]
reference --config file [--rebuild]
plotdata --report csv --out file [--slope k]
gen-vector --b 2 --m m --alpha a --s s --weights file [--product] [--out file]
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .experiments import (PRESETS, CacheCorruptError, ConfigError, ReferenceCache,
                          build_reference, emit_plot_data, load_config, preset_config,
                          read_report, run_experiment)
from .qmc import ProductWeights, SPODWeights, cbc_construct, save_vector
from .qmc.io import format_vector

log = logging.getLogger("elasticqmc")


def _cache(args) -> ReferenceCache:
    return ReferenceCache(args.cache_dir)


def cmd_run(args) -> int:
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = args.out
    cfg = preset_config(args.preset, args.paper_scale, **overrides)
    report = run_experiment(cfg, _cache(args), rebuild_reference=args.rebuild_reference)
    scale = "paper" if args.paper_scale else "desk"
    path = report.write(Path(cfg.out) / f"example{args.preset}_{scale}.csv")
    sys.stdout.write(report.to_csv())
    log.info("wrote %s", path)
    return 0


def cmd_reference(args) -> int:
    cfg = load_config(args.config, args.paper_scale)
    if args.workers is not None:
        from dataclasses import replace
        cfg = replace(cfg, workers=args.workers)
    res = build_reference(cfg, _cache(args), rebuild=args.rebuild)
    status = "cache hit" if res.hit else f"{res.n_solves} solves in {res.wall_time:.1f}s"
    print(f"{res.value!r}  key={res.key}  ({status})")
    return 0


def cmd_plotdata(args) -> int:
    report = read_report(args.report)
    emit_plot_data(report, args.out, slope=args.slope)
    return 0


def _read_weights(path) -> np.ndarray:
    try:
        w = np.loadtxt(path, ndmin=1, comments="#")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read weights ({exc})") from None
    return np.asarray(w, dtype=float).ravel()


def cmd_gen_vector(args) -> int:
    w = _read_weights(args.weights)
    if w.size < args.s:
        raise ConfigError(f"{args.weights}: {w.size} weights for s={args.s}")
    w = w[:args.s]
    weights = ProductWeights(w) if args.product else SPODWeights(w, args.alpha)
    res = cbc_construct(args.b, args.m, args.s, args.alpha, weights)
    if args.out:
        save_vector(res.vector, args.out)
    else:
        sys.stdout.write(format_vector(res.vector))
    log.info("criterion %.6e", res.criterion)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elasticqmc",
                                 description="QMC finite element experiments for random elasticity.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    ap.add_argument("--cache-dir", default=None,
                    help="reference cache directory (default: $ELASTICQMC_CACHE or .reference-cache)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an example preset and write its table")
    p.add_argument("--preset", required=True, choices=PRESETS)
    p.add_argument("--paper-scale", action="store_true",
                   help="full resolution, s=256 and J=128 (hours to days on one machine)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: results)")
    p.add_argument("--rebuild-reference", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reference", help="build or look up a cached reference value")
    p.add_argument("--config", required=True)
    p.add_argument("--paper-scale", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--rebuild", action="store_true", help="ignore and overwrite a cached value")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("plotdata", help="convert a report CSV into plot columns")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--slope", type=float, default=2.0, help="order of the guide line")
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("gen-vector", help="construct an interlaced generating vector by CBC")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--weights", required=True,
                   help="file of weights, one per coordinate (SPOD sequence by default)")
    p.add_argument("--product", action="store_true", help="treat the weights as product weights")
    p.add_argument("--out", default=None, help="vector file (default: stdout)")
    p.set_defaults(func=cmd_gen_vector)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CacheCorruptError, ValueError, RuntimeError, OSError) as exc:
        print(f"elasticqmc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
