"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

from . import bench, validate
from .errors import ConfigError, DimensionMismatch, GridTooLarge, NumericalInstability

COMMAND_KINDS = {
    "simulate": ("dispersion", "landscape_evolution"),
    "escape": ("escape",),
    "bench": ("minibatch_compare", "dimension_sweep"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="saddlewave",
                                     description="Wave-packet saddle escape experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "evolve a wave packet on a grid"),
                        ("escape", "run one optimisation trajectory"),
                        ("bench", "mini-batch comparison or dimension sweep"),
                        ("validate", "run the quick invariant checks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML file with flat key = value pairs")
        p.add_argument("--seed", type=int)
        p.add_argument("--profile", choices=sorted(bench.PROFILES), default="ci")
        p.add_argument("--out", help="output directory")
    return parser


def _summary_lines(result):
    if isinstance(result, bench.HistogramResult):
        return [f"{k} = {v:.6g}" for k, v in result.summary.items()]
    if isinstance(result, dict):
        return [f"n={n} {k} = {v:.6g}" for n, h in result.items() for k, v in h.summary.items()]
    if isinstance(result, bench.DispersionResult):
        return [f"t = {t:.6g} var = {' '.join(f'{v:.6g}' for v in var)}"
                for t, var in zip(result.times, result.variances)]
    cert = result.certified_point is not None
    return [f"iterations = {len(result.iterates) - 1}", f"f_final = {result.fvals[-1]:.9g}",
            f"certified = {cert}"]


def run_command(args) -> int:
    if args.command == "validate":
        ok = True
        for name, passed, detail in validate.run_all():
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
            ok &= passed
        return 0 if ok else 3
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = bench.load_config(args.config)
    allowed = COMMAND_KINDS[args.command]
    cfg.setdefault("kind", allowed[0])
    if cfg["kind"] not in allowed:
        raise ConfigError(f"'{args.command}' runs kinds {allowed}, config has {cfg['kind']!r}")
    spec = bench.spec_from_dict(cfg, profile=args.profile, seed=args.seed, out=args.out)
    result = bench.run(spec)
    for path in bench.write_outputs(spec, result):
        print(f"wrote {path}")
    for line in _summary_lines(result):
        print(line)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except (ConfigError, DimensionMismatch, GridTooLarge) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalInstability, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
