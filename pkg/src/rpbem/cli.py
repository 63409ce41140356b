"""Command-line experiment runner.

Subcommands mirror the experiment drivers; every configuration field can be
set from a JSON config file and overridden by a flag of the same name.
BLAS thread limits are applied through the environment before numpy loads,
so this module must not import numerics at module scope.
"""

import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

_COMMANDS = (
    "psi-table",
    "quad-cases",
    "converge",
    "quad-influence",
    "long-term",
    "torus",
    "adapt-1d",
    "adapt-3d",
)

_FIELD_HELP = {
    "out_dir": "output directory root",
    "mesh": "sphere, torus, or a path to an OFF file",
    "refinement": "icosphere subdivision level",
    "steps": "number of time grid points",
    "horizon": "final time T",
    "p": "temporal enrichment order",
    "levels": "comma-separated grid-point counts for sweeps",
    "p_list": "comma-separated enrichment orders for sweeps",
    "threads": "BLAS/OpenMP thread cap (0 = leave untouched)",
}


def build_parser():
    import dataclasses

    from .experiments import ExperimentConfig

    parser = argparse.ArgumentParser(
        prog="rpbem",
        description="Space-time boundary element experiments for the retarded potential equation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="JSON config file")
        for f in dataclasses.fields(ExperimentConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.type in ("tuple", tuple) or isinstance(f.default, tuple):
                p.add_argument(flag, default=None, help=_FIELD_HELP.get(f.name, ""), type=str)
            elif isinstance(f.default, bool):
                p.add_argument(flag, default=None, type=int, help=_FIELD_HELP.get(f.name, ""))
            elif isinstance(f.default, int):
                p.add_argument(flag, default=None, type=int, help=_FIELD_HELP.get(f.name, ""))
            elif isinstance(f.default, float):
                p.add_argument(flag, default=None, type=float, help=_FIELD_HELP.get(f.name, ""))
            else:
                p.add_argument(flag, default=None, type=str, help=_FIELD_HELP.get(f.name, ""))
    return parser


def _apply_thread_cap(argv):
    # peek at --threads before importing numpy
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif a.startswith("--threads="):
            n = a.split("=", 1)[1]
        else:
            continue
        if int(n) > 0:
            for var in _THREAD_VARS:
                os.environ[var] = str(int(n))
        return


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    _apply_thread_cap(argv)
    parser = build_parser()
    args = parser.parse_args(argv)

    import dataclasses

    from .experiments import EXPERIMENT_DEFAULTS, ExperimentConfig, run_experiment

    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig(**EXPERIMENT_DEFAULTS.get(args.command, {}))
    for f in dataclasses.fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if isinstance(f.default, tuple):
            val = tuple(int(x) for x in str(val).split(","))
        cfg = dataclasses.replace(cfg, **{f.name: val})
    result = run_experiment(args.command, cfg)
    out = os.path.join(cfg.out_dir, args.command)
    print(f"{args.command}: outputs in {out}")
    if isinstance(result, dict):
        for key in list(result)[:6]:
            val = result[key]
            if isinstance(val, (int, float, str)):
                print(f"  {key} = {val}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
