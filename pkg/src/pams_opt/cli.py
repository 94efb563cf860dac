"""Command line entry point ``pams-opt``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, validation
from .config import ExperimentConfig, load_config
from .errors import ConfigError, PamsError
from .schemes import theorem_chain


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pams-opt",
                                 description="Pinching-antenna WPT-MEC optimizer and sweeps")
    ap.add_argument("command", choices=("solve", "sweep", "compare", "validate"))
    ap.add_argument("--config", help="JSON experiment config (defaults used when omitted)")
    ap.add_argument("--seed", type=int, help="override the base seed")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--replications", type=int, help="override the replication count")
    ap.add_argument("--threads", type=int,
                    help=f"worker processes (default: ${harness.THREADS_ENV} or 1)")
    ap.add_argument("--exhaustive", action="store_true",
                    help="compare: enumerate activation patterns instead of cross-entropy (N <= 8)")
    return ap


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed, output=args.out, replications=args.replications)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def cmd_solve(cfg: ExperimentConfig, out) -> int:
    params, topo = harness.point_setup(cfg, 0)
    result = {"params": params.to_dict(), "topology": topo.to_dict(), "seed": cfg.seed,
              "schemes": {}}
    for scheme in cfg.schemes:
        acts, trace = None, None
        if scheme not in ("full-pa", "conventional-array"):
            acts, trace = harness.search(scheme, topo, params, cfg.ce,
                                         harness.stream(cfg.seed, 0, harness.CE_STREAM))
        obj, inner = harness.score(scheme, topo, params, acts)
        result["schemes"][scheme] = {
            "objective_bits": obj,
            "activations": None if acts is None else acts.to_dict(),
            "ce_iterations": 0 if trace is None else trace.iterations,
            "inner": inner.to_dict(),
        }
    text = json.dumps(result, indent=2, default=_json_default)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "solution.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(cfg: ExperimentConfig, threads) -> int:
    table = harness.run(cfg, out_dir=cfg.output, threads=threads)
    print(harness.report(table, cfg.output), end="")
    return 0


def cmd_compare(cfg: ExperimentConfig, exhaustive: bool) -> int:
    params, topo = harness.point_setup(cfg, 0)
    budget = "exhaustive" if exhaustive else cfg.ce
    rep = theorem_chain(topo, params, budget)
    for name, v in rep.objectives.items():
        print(f"{name:<14}{v:>22.10g}")
    for v in rep.violations:
        print(f"VIOLATION {v}")
    print("chain holds" if rep.ok else "chain violated")
    return 0 if rep.ok else 1


def cmd_validate(cfg: ExperimentConfig) -> int:
    results = validation.run_suites(cfg.params, seed=cfg.seed)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.ok for r in results) else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.threads)
        if args.command == "compare":
            return cmd_compare(cfg, args.exhaustive)
        return cmd_validate(cfg)
    except ConfigError as exc:
        where = args.config or "<defaults>"
        print(f"{where}:{exc}", file=sys.stderr)
        return 2
    except (PamsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
