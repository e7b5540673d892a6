"""Command-line entry point: ``fuzzyspace <subcommand> [--config PATH] ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 non-convergence (partial output kept).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import RunConfig
from .errors import ConfigError, NonConvergenceError, NumericalError
from .pipeline import Run, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NONCONVERGED = 0, 2, 3, 4

SUBCOMMANDS = ("spectrum", "observables", "states", "distances", "embed", "fit", "pipeline", "validate")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration (see docs/config.md)")
    common.add_argument("--outdir", metavar="PATH", help="run directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--workers", type=int, help="worker processes for the distance stage")
    common.add_argument("--resume", action="store_true", help="reuse artifacts already in the run directory")
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    parser = argparse.ArgumentParser(prog="fuzzyspace", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "write spectrum.csv (analytic and/or numeric)",
        "observables": "write observables.json and curves.csv",
        "states": "generate localized states (states.json)",
        "distances": "Connes distance matrix (distances.csv + distances.json)",
        "embed": "SMACOF embedding (embedding.csv)",
        "fit": "ellipsoid fit of the embedding (fit.json)",
        "pipeline": "run every stage and write report.json and manifest.json",
        "validate": "check self-adjointness, first-order condition and spectral symmetry",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "observables":
            p.add_argument("--spectrum", metavar="PATH", help="read eigenvalues from this CSV instead")
    return parser


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = {"seed": args.seed, "workers": args.workers}
    if args.outdir:
        over["output_dir"] = args.outdir
    return cfg.override(**over)


def _validate(run: Run) -> int:
    from .triple import validate_triple

    rep = validate_triple(run.triple)
    out = {"passed": rep.passed, "failures": rep.failures,
           "hermiticity_defect": rep.hermiticity_defect, "first_order_defect": rep.first_order_defect,
           "symmetry_defect": rep.symmetry_defect, "tol": rep.tol, "trials": rep.trials}
    with open(run.path("validation.json"), "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    print(("PASS" if rep.passed else "FAIL " + ",".join(rep.failures)) + f"  ({run.path('validation.json')})")
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stage = args.command
    try:
        if stage == "pipeline":
            run = run_pipeline(cfg, resume=args.resume)
            print(f"pipeline finished: {run.outdir / 'report.json'}")
            return EXIT_OK
        run = Run(cfg, resume=args.resume)
        if stage == "validate":
            return _validate(run)
        if stage == "observables" and args.spectrum:
            run.stage_observables(args.spectrum)
        else:
            run.run_stage(stage)
        run.write_manifest("nonconverged" if run.nonconverged else "ok")
        if run.nonconverged:
            raise NonConvergenceError("some distance pairs did not converge; partial output kept")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"stage {getattr(exc, 'stage', stage)}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (NumericalError, ValueError, ArithmeticError, OSError) as exc:
        print(f"stage {getattr(exc, 'stage', stage)} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
