"""Command-line entry point: one subcommand per experiment kind."""

from __future__ import annotations

import argparse

from .harness import EXPERIMENTS, run

_HELP = {
    "stability": "lattice stability constant, max frequency, Legendre-Hadamard minimum",
    "dispersion": "dynamical-symbol eigenvalues over a Brillouin-zone sample",
    "stress-consistency": "atomistic vs Cauchy-Born stress gap over a spacing sweep",
    "static-converge": "static equilibrium convergence rate study",
    "dynamic-converge": "lattice dynamics vs Cauchy-Born wave convergence rate study",
    "instability-demo": "exponential growth of the unstable chain vs its stable continuum",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latcb",
        description="Atomistic-to-continuum (Cauchy-Born) numerical laboratory.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--workers", type=int, default=1, help="parallel sweep jobs")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(
        args.config,
        out_dir=args.out,
        workers=args.workers,
        seed=args.seed,
        expect_experiment=args.experiment,
    )


if __name__ == "__main__":
    raise SystemExit(main())
