"""
Sweep orchestration behind the command-line front end.

Every function here returns complete row lists; nothing is written until a
sweep has fully succeeded, so a failure never leaves a partial CSV behind.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

from . import allocator, gaps
from .core import (DEFAULT_CONSTELLATIONS, BadTrialCount, ConfigError, SchemeKind, SchemeSpec,
                   SystemConfig, validate_config)
from .montecarlo import run_campaign

ALL_SCHEMES = (SchemeKind.ANALOG, SchemeKind.TDD, SchemeKind.DIGITAL_ERRORFREE,
               SchemeKind.DIGITAL_QAM)
DEFAULT_T_LIST = (100, 200, 500, 1000, 2000, 5000, 10000)
DEFAULT_TT_LIST = tuple(range(20, 401, 10))
MIN_VALIDATION_TRIALS = 10_000
VALIDATION_MAX_BITS = 20

OPTIMIZE_COLUMNS = ("scheme", "T", "n_t", "snr_db", "T1", "Tfb", "Tt", "M", "B",
                    "rate_gap_bits", "pe_fb", "net_rate_bits", "zf_rate_bits")
SWEEP_T_COLUMNS = OPTIMIZE_COLUMNS + ("T1_approx", "Tt_approx", "net_rate_approx_bits")
SWEEP_TT_COLUMNS = ("scheme", "Tt", "T1", "Tfb", "M", "B", "loss_bits")


@dataclass(frozen=True)
class RunConfig:
    cfg: SystemConfig
    schemes: Tuple[SchemeKind, ...] = ALL_SCHEMES
    sweep: str = "fixed"
    t_list: Tuple[int, ...] = DEFAULT_T_LIST
    tt_list: Tuple[float, ...] = DEFAULT_TT_LIST
    trials: int = 0
    seed: int = 1
    output_path: Optional[str] = None
    integral: bool = True
    constellations: Tuple[int, ...] = DEFAULT_CONSTELLATIONS
    jobs: int = 1

    def check(self) -> "RunConfig":
        problems = []
        if self.sweep not in ("fixed", "t", "tt"):
            problems.append(f"unknown sweep {self.sweep!r}")
        if not self.schemes:
            problems.append("no schemes selected")
        for name, values in (("t_list", self.t_list), ("tt_list", self.tt_list)):
            if not values:
                problems.append(f"{name} is empty")
            if any(v <= 0 or v != int(v) for v in values):
                problems.append(f"{name} must hold positive integers")
            if any(b <= a for a, b in zip(values, values[1:])):
                problems.append(f"{name} must be strictly increasing")
        if self.trials < 0:
            problems.append(f"trials must be >= 0, got {self.trials}")
        if self.jobs < 1:
            problems.append(f"jobs must be >= 1, got {self.jobs}")
        if problems:
            raise ConfigError(problems)
        return self

    def scheme(self, kind: SchemeKind) -> SchemeSpec:
        cs = self.constellations if kind is SchemeKind.DIGITAL_QAM else None
        return SchemeSpec.build(kind, self.cfg.n_t, cs)

    def at_blocklength(self, t: int) -> SystemConfig:
        return replace(self.cfg, blocklength_t=int(t))


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _number(x):
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return int(x)
    return x


def allocation_row(cfg: SystemConfig, res) -> dict:
    s = res.split
    return {
        "scheme": res.kind.value, "T": cfg.blocklength_t, "n_t": cfg.n_t,
        "snr_db": cfg.snr_db, "T1": _number(s.t1), "Tfb": _number(s.t_fb),
        "Tt": _number(s.t_total), "M": res.constellation_m, "B": res.bits_b,
        "rate_gap_bits": res.rate_gap_bits, "pe_fb": res.pe_fb,
        "net_rate_bits": res.net_rate_bits, "zf_rate_bits": res.zf_rate_bits,
    }


def optimize_rows(run: RunConfig) -> list:
    """One row per scheme at the configured block length."""
    run.check()
    cfg = run.cfg

    def point(kind):
        scheme = run.scheme(kind)
        validate_config(cfg, scheme)
        return allocation_row(cfg, allocator.outer_optimize(cfg, scheme, integral=run.integral))

    return _map(point, run.schemes, run.jobs)


def sweep_t_rows(run: RunConfig) -> list:
    """Optimal lengths and net rate versus block length, with the
    closed-form approximations alongside."""
    run.check()
    points = [(t, kind) for t in run.t_list for kind in run.schemes]

    def point(item):
        t, kind = item
        cfg = run.at_blocklength(t)
        scheme = run.scheme(kind)
        validate_config(cfg, scheme)
        row = allocation_row(cfg, allocator.outer_optimize(cfg, scheme, integral=run.integral))
        row["T1_approx"] = allocator.approx_t1(cfg)
        if kind in (SchemeKind.ANALOG, SchemeKind.TDD):
            k = allocator.k_constant(scheme)
            row["Tt_approx"] = allocator.approx_tt_upper(cfg, k)
            row["net_rate_approx_bits"] = gaps.zf_rate(cfg) - allocator.approx_effective_gap(cfg, k)
        else:
            row["Tt_approx"] = row["net_rate_approx_bits"] = None
        return row

    return _map(point, points, run.jobs)


def sweep_tt_rows(run: RunConfig) -> list:
    """Best split of each budget: feedback length versus total budget."""
    run.check()
    cfg = run.cfg
    r_zf = gaps.zf_rate(cfg)
    points = [(tt, kind) for tt in run.tt_list for kind in run.schemes]

    def point(item):
        tt, kind = item
        scheme = run.scheme(kind)
        if run.integral:
            sol = allocator.inner_split_integer(int(tt), cfg, scheme, r_zf_bits=r_zf)
        else:
            sol = allocator.inner_split(float(tt), cfg, scheme, r_zf_bits=r_zf)
        s = sol.split
        bits = None
        if kind is SchemeKind.DIGITAL_ERRORFREE:
            bits = gaps.quantization_bits(s.t_fb, cfg, gaps.errorfree_bits_per_symbol(cfg))
        elif kind is SchemeKind.DIGITAL_QAM:
            bits = gaps.quantization_bits(s.t_fb, cfg, math.log2(sol.constellation_m))
        return {"scheme": kind.value, "Tt": _number(float(tt)), "T1": _number(s.t1),
                "Tfb": _number(s.t_fb), "M": sol.constellation_m, "B": bits,
                "loss_bits": sol.loss_bits}

    return _map(point, points, run.jobs)


def validation_report(run: RunConfig) -> dict:
    """Simulate every scheme at its optimized split and compare the empirical
    per-user rate with the analytic lower bound."""
    run.check()
    if run.trials < MIN_VALIDATION_TRIALS:
        raise BadTrialCount(
            f"validation needs at least {MIN_VALIDATION_TRIALS} trials, got {run.trials}")
    cfg = run.cfg
    records = []
    for kind in run.schemes:
        scheme = run.scheme(kind)
        res = allocator.outer_optimize(cfg, scheme, integral=True)
        bits = None
        if kind in (SchemeKind.DIGITAL_ERRORFREE, SchemeKind.DIGITAL_QAM):
            bits = min(int(math.floor(res.bits_b + 1e-9)), VALIDATION_MAX_BITS)
        camp = run_campaign(cfg, scheme, res.split, run.trials, run.seed, bits_b=bits,
                            constellation_m=res.constellation_m, workers=run.jobs)
        records.append({
            "scheme": kind.value, "t1": _number(res.split.t1), "tfb": _number(res.split.t_fb),
            "M": res.constellation_m, "B": bits, "pe_fb": camp.pe_fb,
            "bound_bits": camp.bound_bits, "empirical_bits": camp.mean_rate_bits,
            "stderr_bits": camp.stderr_bits, "bound_holds": camp.bound_holds,
            "trials": camp.trials, "skipped": camp.skipped, "seed": run.seed,
        })
    return {"n_t": cfg.n_t, "snr_db": cfg.snr_db, "T": cfg.blocklength_t,
            "trials": run.trials, "seed": run.seed, "results": records}


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"
