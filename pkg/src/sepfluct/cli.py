"""Command-line experiment runner.

Subcommands::

    sepfluct grid build --manifold circle --n 2000 [--eps auto] [--seed 0] --out grid.bin
    sepfluct grid inspect grid.bin
    sepfluct run <config.yaml | recipe-name> [--seed S] [--replicas R] [--threads W] [--out DIR]
    sepfluct report <dir> [--failures]
    sepfluct recipes

Environment overrides (below command-line flags, above the config file):
``SEPFLUCT_SEED``, ``SEPFLUCT_REPLICAS``, ``SEPFLUCT_THREADS``, ``SEPFLUCT_OUT``.

Exit codes: 0 success, 1 at least one check failed, 2 invalid usage or
configuration, 3 I/O failure, 4 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .grid import GridError, build_grid, grid_summary, load_grid
from .manifold import from_tag

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SIMULATION = 4

ENV_PREFIX = "SEPFLUCT_"
ENV_KEYS = {"seed": int, "replicas": int, "threads": int, "out": str}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepfluct", description="Exclusion-process fluctuation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", help="build or inspect grid files")
    gsub = g.add_subparsers(dest="grid_command", required=True)
    b = gsub.add_parser("build", help="sample a grid and write it")
    b.add_argument("--manifold", required=True, choices=["circle", "torus1", "torus2", "sphere"])
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--eps", default="auto")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out", required=True)
    i = gsub.add_parser("inspect", help="print a grid summary as JSON")
    i.add_argument("path")

    r = sub.add_parser("run", help="run an experiment config or bundled recipe")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--replicas", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--out")
    r.add_argument("--quiet", action="store_true")

    rep = sub.add_parser("report", help="summarize a finished run")
    rep.add_argument("dir")
    rep.add_argument("--failures", action="store_true", help="only list failed checks")

    sub.add_parser("recipes", help="list bundled recipes")
    return p


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key, typ in ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is None or raw == "":
            continue
        try:
            out[key] = typ(raw)
        except ValueError as exc:
            raise cfgmod.ConfigError([(ENV_PREFIX + key.upper(), f"cannot parse {raw!r}")]) from exc
    return out


def resolve_config(source: str, flags: dict, environ=None) -> cfgmod.ExperimentConfig:
    """Load a config file or recipe and apply environment then flag overrides."""
    path = Path(source)
    if not path.is_file():
        recipe = cfgmod.recipe_path(source)
        if recipe is None:
            raise FileNotFoundError(f"no config file or recipe named {source!r}")
        path = recipe
    cfg = cfgmod.parse_config(path)
    merged = env_overrides(environ)
    merged.update({k: v for k, v in flags.items() if v is not None})
    if "out" in merged:
        merged["output"] = merged.pop("out")
    return cfgmod.with_overrides(cfg, **merged)


def _cmd_grid(args) -> int:
    if args.grid_command == "build":
        eps = args.eps if args.eps == "auto" else float(args.eps)
        seed = args.seed if args.seed is not None else env_overrides().get("seed", 0)
        g = build_grid(from_tag(args.manifold), args.n, eps=eps, seed=seed)
        g.save(args.out)
        print(json.dumps(grid_summary(g), indent=2, sort_keys=True))
        return EXIT_OK
    g = load_grid(args.path)
    print(json.dumps(grid_summary(g), indent=2, sort_keys=True))
    return EXIT_OK


def run_experiment(cfg: cfgmod.ExperimentConfig, quiet: bool = False) -> int:
    """Run ``cfg``, write artifacts under ``cfg.output`` and return the exit status."""
    from .analysis.experiment import run_ensemble
    from .analysis.report import format_table, write_report
    from .fluctuation import write_trajectory_csv

    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    say = (lambda msg: None) if quiet else (lambda msg: print(f"[sepfluct] {msg}", file=sys.stderr))
    (out / "config.yaml").write_text(cfg.dump())
    result = run_ensemble(cfg, progress=say)
    grids = out / "grids"
    for rung in result.rungs:
        grids.mkdir(exist_ok=True)
        rung.grid.save(grids / f"grid_N{rung.n}_seed{rung.grid.seed}.bin")
        if cfg.trajectories:
            d = rung.data
            write_trajectory_csv(out / f"trajectories_N{rung.n}.csv",
                                 ((d.first_replica + r, [d.trajectory(d.first_replica + r, nm) for nm in d.names])
                                  for r in range(d.replicas)))
    rep = write_report(out, cfg.to_dict(), result.stats)
    if not quiet:
        print(format_table(rep["checks"]))
        s = rep["summary"]
        print(f"\n{s['passed']}/{s['total']} checks passed; report in {out}")
    return EXIT_OK if result.stats.passed else EXIT_CHECKS_FAILED


def _cmd_report(args) -> int:
    from .analysis.report import format_table, load_report

    rep = load_report(args.dir)
    print(format_table(rep["checks"], failures_only=args.failures))
    s = rep["summary"]
    print(f"\n{s['passed']}/{s['total']} checks passed (generated {rep['header']['generated']})")
    return EXIT_OK if s["failed"] == 0 else EXIT_CHECKS_FAILED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "grid":
            return _cmd_grid(args)
        if args.command == "recipes":
            print("\n".join(cfgmod.recipe_names()))
            return EXIT_OK
        if args.command == "report":
            return _cmd_report(args)
        flags = {"seed": args.seed, "replicas": args.replicas, "threads": args.threads, "out": args.out}
        cfg = resolve_config(args.config, flags)
        return run_experiment(cfg, quiet=args.quiet)
    except cfgmod.ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except GridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (RuntimeError, FloatingPointError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
