"""Command line entry point: ``rlse-delta <experiment> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .diagnostics import write_csv

log = logging.getLogger("rlse_delta")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file; flags override it")
    common.add_argument("--a", type=float, help="domain half-width")
    grid = common.add_mutually_exclusive_group()
    grid.add_argument("--M", type=int, help="nodes per half domain (h = a/M)")
    grid.add_argument("--h", type=float, help="mesh size (must divide a)")
    common.add_argument("--tau", type=float)
    common.add_argument("--T", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--mode", choices=[m.value for m in ex.Mode])
    common.add_argument("--fp-tol", dest="fp_tol", type=float)
    common.add_argument("--fp-max-iters", dest="fp_max_iters", type=int)
    common.add_argument("--record-every", dest="record_every", type=int)
    common.add_argument("--sweep", type=_floats, help="h, tau or eps values, halving")
    common.add_argument("--eps-values", dest="eps_values", type=_floats,
                        help="one table block per eps (space/time sweeps)")
    common.add_argument("--reference", choices=["fine", "analytic"])
    common.add_argument("--h-ref", dest="h_ref", type=float)
    common.add_argument("--tau-ref", dest="tau_ref", type=float)
    common.add_argument("--eta", type=float, help="perturbation amplitude")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--meta", action="store_true",
                        help="also write <out>.meta.json with the resolved config")
    common.add_argument("--state-out", dest="state_out",
                        help="solve: write the final field as x,re,im CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="rlse-delta",
        description="Crank-Nicolson solver for the regularized logarithmic "
                    "Schrodinger equation with a delta potential.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for exp in ex.Experiment:
        sub.add_parser(exp.value, parents=[common])
    return parser


_NOT_CONFIG = {"config", "meta", "state_out", "verbose", "experiment"}


def resolve(args: argparse.Namespace) -> ex.ExperimentConfig:
    values = {}
    if args.config is not None:
        values.update(ex.parse_config_text(args.config.read_text()))
        values.pop("experiment", None)
    cli = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and v is not None}
    if "M" in cli or "h" in cli:
        values.pop("M", None)
        values.pop("h", None)
    values.update(cli)
    if "h" in values:
        values.setdefault("a", ex.DEFAULTS[ex.Experiment(args.experiment)].get("a", 12.0))
    return ex.make_config(args.experiment, **ex.resolve_values(values))


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
    except (ValueError, KeyError) as exc:
        print(f"rlse-delta: bad configuration: {exc}", file=sys.stderr)
        return 2

    meta: dict = {}
    status = 0
    exp = cfg.experiment
    try:
        if exp in (ex.Experiment.CONVERGE_SPACE, ex.Experiment.CONVERGE_TIME,
                   ex.Experiment.CONVERGE_EPS):
            driver = {ex.Experiment.CONVERGE_SPACE: ex.converge_space,
                      ex.Experiment.CONVERGE_TIME: ex.converge_time,
                      ex.Experiment.CONVERGE_EPS: ex.converge_eps}[exp]
            try:
                table = driver(cfg)
            except ex.ExperimentError as exc:
                table = exc.partial
                print(f"rlse-delta: {exp.value} failed: {exc}", file=sys.stderr)
                status = 1
            meta = {"complete": table.complete, "failure": table.failure}
            _emit(table.to_csv(), cfg.out)
        elif exp is ex.Experiment.STABILITY:
            series = ex.stability_run(cfg)
            meta = {"blow_up_t": series.blow_up_t, "blow_up_reason": series.blow_up_reason,
                    "max_e_min": max(series.e_min), "initial_e_min": series.e_min[0]}
            _emit(series.to_csv(), cfg.out)
        else:
            U, series, summary = ex.run_series(cfg)
            meta = {"summary": summary}
            _emit(series.to_csv(), cfg.out)
            if summary["blow_up"] is not None:
                print(f"rlse-delta: {exp.value} run failed at {summary['blow_up']['reason']}",
                      file=sys.stderr)
                status = 1
            if args.state_out:
                rows = zip(U.grid.x, np.real(U.values), np.imag(U.values))
                Path(args.state_out).write_text(write_csv(("x", "re", "im"), rows))
            if exp is ex.Experiment.CONSERVE:
                print(json.dumps(summary), file=sys.stderr)
    except Exception as exc:  # report which experiment died, then fail
        print(f"rlse-delta: {exp.value} failed: {exc}", file=sys.stderr)
        return 1

    if args.meta and cfg.out:
        ex.write_metadata(str(cfg.out) + ".meta.json", cfg, status=status, **meta)
    return status


if __name__ == "__main__":
    sys.exit(main())
