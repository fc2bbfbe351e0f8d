"""Command-line entry point ``vlasov-spray``.

Exit codes: 0 success, 1 usage or configuration error, 2 failed check,
predicate or step, 3 parameters outside the blow-up window.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys

import numpy as np

from .blowup import blowup_certify
from .coupled import run
from .diagnostics import check_identities, functionals
from .errors import ConfigError, DomainError, IntegrationError, SeriesFormatError, StepError
from .grid import PhaseGrid
from .kinetic import FieldSampler, characteristic_trajectory
from .params import ModelParams
from .picard import picard_iterate
from .presets import make_preset
from .series import read_series, write_series

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_WINDOW = 3

log = logging.getLogger("vlasov_spray")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def cmd_simulate(args) -> int:
    from .config import parse_config

    cfg = parse_config(args.config)
    if args.threads is not None:
        cfg.threads = args.threads
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    meta = cfg.metadata()
    try:
        series = run(cfg.scenario(), snapshot_path=os.path.join(out, "failure.snap"), meta=meta,
                     final_path=os.path.join(out, "final.snap"))
    except StepError as exc:
        print(f"step failed: {exc}", file=sys.stderr)
        if exc.required_dt is not None:
            print(f"required dt <= {exc.required_dt:.6g}", file=sys.stderr)
        print(f"last valid state: {os.path.join(out, 'failure.snap')}", file=sys.stderr)
        return EXIT_FAIL
    path = os.path.join(out, "series.csv")
    write_series(series, path)
    print(f"wrote {len(series)} records to {path} (config hash {meta['config_hash']})")
    return EXIT_OK


def certify_config(cfg):
    """Evaluate the blow-up certificate for the initial data of ``cfg``.

    The functionals are computed on a three-dimensional grid with the
    configured certify resolution and the grid extents of ``cfg``.
    """
    params3 = dataclasses.replace(cfg.params, dim=3)
    g = cfg.grid
    grid3 = PhaseGrid(3, cfg.certify_resolution, cfg.certify_xi_resolution,
                      g.x_extent if g.dim == 3 else g.x_extent[0], g.xi_extent if g.dim == 3 else g.xi_extent[0])
    fluid, kinetic = make_preset(cfg.preset, grid3, params3, cfg.preset_options)
    record = functionals(fluid, kinetic, grid3, params3, 0.0, with_dissipation=False)
    return blowup_certify(record, params3)


def cmd_certify(args) -> int:
    from .config import parse_config

    cfg = parse_config(args.config)
    if not cfg.params.blowup_window():
        p = cfg.params
        print(f"window_ok=false\nnote=gamma={p.gamma} delta={p.delta} outside 1 < gamma < 5/3, "
              f"gamma - 1/3 < delta < gamma")
        return EXIT_WINDOW
    report = certify_config(cfg)
    print(report.format_block())
    return EXIT_OK if report.predicate_paper else EXIT_FAIL


def cmd_check(args) -> int:
    series = read_series(args.series)
    meta = series.meta
    params = ModelParams(**meta["params"]) if "params" in meta else None
    records = series.records
    tol_c = args.tol_conservation
    if tol_c is None:
        tol_c = 1e-10 if all(r.m_f == 0.0 for r in records) else 1e-6
    report = check_identities(records, tol_conservation=tol_c, tol_rate=args.tol_rate, params=params,
                              dim=series.dim)
    print(report.table())
    print(report.summary_line())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_characteristics(args) -> int:
    from .config import parse_config

    cfg = parse_config(args.config)
    fluid, _ = make_preset(cfg.preset, cfg.grid, cfg.params, cfg.preset_options)
    d = cfg.grid.dim
    if args.x0.size != d or args.xi0.size != d:
        raise ConfigError(f"--x0 and --xi0 need {d} components")
    sampler = FieldSampler(cfg.grid, cfg.params, fluid.rho, fluid.velocity())
    s, X, Xi = characteristic_trajectory(args.x0, args.xi0, sampler, 0.0, args.t1, args.dt)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["s"] + [f"X_{a + 1}" for a in range(d)] + [f"Xi_{a + 1}" for a in range(d)])
    for k in range(len(s)):
        writer.writerow([format(v, ".17g") for v in (s[k], *X[k], *Xi[k])])
    return EXIT_OK


def cmd_picard(args) -> int:
    from .config import parse_config

    cfg = parse_config(args.config)
    if cfg.grid.dim != 1:
        raise ConfigError("picard needs a one-dimensional grid ([grid] dim = 1)")
    fluid, kinetic = make_preset(cfg.preset, cfg.grid, cfg.params, cfg.preset_options)
    n0 = cfg.params.to_sound_variable(fluid.rho)
    report = picard_iterate(cfg.grid, cfg.params, n0, fluid.velocity()[0], kinetic.f, iterations=args.iters,
                            t_short=args.t_short, cfl_number=cfg.cfl, threads=cfg.threads,
                            weight_p=cfg.weight_p, weight_a=cfg.weight_a)
    print(report.format_table())
    return EXIT_OK if report.contraction() and not report.diverged else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vlasov-spray", description="Kinetic-fluid spray simulations and diagnostics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a configured scenario and write its time series")
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=None, help="override [time] threads")
    p.add_argument("--out", default=None, help="output directory (default: [paths] output_dir)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="evaluate the finite-lifetime certificate for the initial data")
    p.add_argument("config")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("check", help="check the functional identities of a written time series")
    p.add_argument("series")
    p.add_argument("--tol-conservation", type=_positive, default=None)
    p.add_argument("--tol-rate", type=_positive, default=5e-2)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("characteristics", help="integrate one particle path in the initial fluid field")
    p.add_argument("config")
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--xi0", type=_vector, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--dt", type=_positive, required=True)
    p.set_defaults(func=cmd_characteristics)

    p = sub.add_parser("picard", help="successive-approximation residuals on a short horizon")
    p.add_argument("config")
    p.add_argument("--iters", type=int, default=6)
    p.add_argument("--t-short", type=_positive, default=None)
    p.set_defaults(func=cmd_picard)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, SeriesFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"error: {exc} (last valid s={exc.last_valid_s:.6g})", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
