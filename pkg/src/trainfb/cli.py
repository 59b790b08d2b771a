"""
Command-line front end.

    trainfb optimize  [options]   optimal split per scheme at one block length
    trainfb sweep-tt  [options]   best feedback length versus total budget
    trainfb sweep-t   [options]   optimal lengths and net rate versus block length
    trainfb validate  [options]   Monte Carlo check of the rate lower bound

Options may also come from a JSON file given with ``--config``; explicit
flags override file values. Exit codes: 0 success, 2 invalid configuration,
3 infeasible optimization, 4 failed validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import sweeps
from .core import (BudgetTooSmall, ConfigError, Infeasible, InfeasibleSplit, SchemeKind,
                   SingularChannel, SystemConfig, TrainFbError, ZeroAllocation)

log = logging.getLogger("trainfb")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 2, 3, 4

DEFAULTS = {
    "nt": 4,
    "snr_db": 10.0,
    "t": 1000,
    "t_list": list(sweeps.DEFAULT_T_LIST),
    "tt_list": list(sweeps.DEFAULT_TT_LIST),
    "schemes": [k.value for k in sweeps.ALL_SCHEMES],
    "constellations": [2, 4, 16, 64],
    "trials": 0,
    "seed": 1,
    "out": None,
    "integral": True,
    "jobs": 1,
    "plot": False,
}

FIGURES = {
    "sweep-tt": ("tfb_vs_tt",),
    "sweep-t": ("lengths_vs_t", "rate_vs_t"),
}


def _int_list(text):
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON file with option values")
    common.add_argument("--nt", type=int, help="BS antennas = users (default 4)")
    common.add_argument("--snr-db", dest="snr_db", type=float, help="nominal SNR in dB (default 10)")
    common.add_argument("--t", type=int, help="coherence block length (default 1000)")
    common.add_argument("--t-list", dest="t_list", type=_int_list,
                        help="block lengths for sweep-t, e.g. 100,1000,10000")
    common.add_argument("--tt-list", dest="tt_list", type=_int_list,
                        help="budgets for sweep-tt, e.g. 20,50,100")
    common.add_argument("--schemes", type=_str_list,
                        help="comma-separated subset of analog,tdd,digital-errorfree,digital-qam")
    common.add_argument("--constellations", type=_int_list,
                        help="QAM orders searched by digital-qam (default 2,4,16,64)")
    common.add_argument("--trials", type=int, help="Monte Carlo blocks (validate)")
    common.add_argument("--seed", type=int, help="random seed (default 1)")
    common.add_argument("--jobs", type=int, help="concurrent sweep points / trial chunks")
    common.add_argument("--out", help="output file (default: stdout)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--integral", dest="integral", action="store_const", const=True,
                      help="integer T1 and Tfb (default)")
    mode.add_argument("--continuous", dest="integral", action="store_const", const=False,
                      help="real-valued T1 and Tfb")
    common.add_argument("--plot", action="store_const", const=True,
                        help="also render figures next to the output file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="trainfb",
        description="Optimize downlink training and CSI feedback lengths for ZF MIMO broadcast.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="optimal split per scheme at one T")
    sub.add_parser("sweep-tt", parents=[common], help="best feedback length versus budget")
    sub.add_parser("sweep-t", parents=[common], help="optimal lengths and rate versus T")
    sub.add_parser("validate", parents=[common], help="Monte Carlo bound validation (JSON)")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        opts.update(data)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def make_run(command: str, opts: dict) -> sweeps.RunConfig:
    sweep = {"sweep-t": "t", "sweep-tt": "tt"}.get(command, "fixed")
    cfg = SystemConfig(int(opts["nt"]), float(opts["snr_db"]), int(opts["t"]))
    kinds = tuple(SchemeKind.parse(s) for s in opts["schemes"])
    return sweeps.RunConfig(
        cfg=cfg, schemes=kinds, sweep=sweep,
        t_list=tuple(int(x) for x in opts["t_list"]),
        tt_list=tuple(int(x) for x in opts["tt_list"]),
        trials=int(opts["trials"]), seed=int(opts["seed"]), output_path=opts["out"],
        integral=bool(opts["integral"]),
        constellations=tuple(int(m) for m in opts["constellations"]),
        jobs=int(opts["jobs"]),
    ).check()


def figure_paths(command: str, out) -> list:
    base = Path(out) if out else Path(command)
    stem = base.with_suffix("") if base.suffix else base
    return [stem.parent / f"{stem.name}_{name}.png" for name in FIGURES.get(command, ())]


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(command: str, opts: dict) -> int:
    run_cfg = make_run(command, opts)
    if command == "validate":
        report = sweeps.validation_report(run_cfg)
        _emit(sweeps.report_to_json(report), run_cfg.output_path)
        failed = [r["scheme"] for r in report["results"] if not r["bound_holds"]]
        if failed:
            log.error("lower bound violated for: %s", ", ".join(failed))
            return EXIT_VALIDATION
        return EXIT_OK

    if command == "optimize":
        rows, columns = sweeps.optimize_rows(run_cfg), sweeps.OPTIMIZE_COLUMNS
    elif command == "sweep-tt":
        rows, columns = sweeps.sweep_tt_rows(run_cfg), sweeps.SWEEP_TT_COLUMNS
    else:
        rows, columns = sweeps.sweep_t_rows(run_cfg), sweeps.SWEEP_T_COLUMNS
    _emit(sweeps.rows_to_csv(rows, columns), run_cfg.output_path)

    if opts.get("plot") and command in FIGURES:
        from . import report as figs

        paths = figure_paths(command, run_cfg.output_path)
        if command == "sweep-tt":
            figs.plot_feedback_vs_budget(rows, paths[0], n_t=run_cfg.cfg.n_t)
        else:
            figs.plot_lengths_vs_blocklength(rows, paths[0])
            figs.plot_rate_vs_blocklength(rows, paths[1])
        for p in paths:
            log.info("wrote %s", p)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        opts = resolve_options(args)
        return run(args.command, opts)
    except (Infeasible, BudgetTooSmall, InfeasibleSplit, ZeroAllocation) as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except SingularChannel as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (ConfigError, TrainFbError, ValueError, OSError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
