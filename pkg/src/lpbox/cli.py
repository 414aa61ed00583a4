"""
Command line interface.

Subcommands::

    lpbox design     multi-trial design runs with per-trial reports and a summary
    lpbox oracle     exhaustive minimum for small instances
    lpbox eval       metrics of a sequence file
    lpbox msequence  write an LFSR m-sequence

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .admm import AdmmConfig, DivergenceError, solve
from .correlation import metrics, objective_psl_form, pslr_from_psl
from .oracle import MAX_BITS, Metric, exhaustive_min, score
from .reference import benchmark_psl_2sqrtN, m_sequence
from .sequences import ConfigError, Mode, ShiftSpec

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4
EMIT_KINDS = ("trace", "correlation", "summary", "sequence")

log = logging.getLogger("lpbox")


@dataclass
class ExperimentConfig:
    """
    One design experiment: problem, solver settings and trial schedule.

    Trial ``t`` uses ``seeds[t]`` when `seeds` is given, else ``seed + t``.
    """

    n: int
    m: int = 1
    mode: str = "aperiodic"
    intervals: str = "1:N-1"
    solver: AdmmConfig = field(default_factory=AdmmConfig)
    trials: int = 1
    seed: int = 0
    seeds: list | None = None
    output_dir: str = "."
    emit: tuple = EMIT_KINDS
    workers: int = 1
    threads: int = 1
    oracle: bool = True

    def __post_init__(self):
        if int(self.n) < 2:
            raise ConfigError("n: must be >= 2")
        if int(self.m) < 1:
            raise ConfigError("m: must be >= 1")
        self.n, self.m = int(self.n), int(self.m)
        self.mode = Mode.parse(self.mode).value
        if self.seeds is not None:
            self.seeds = [int(s) for s in self.seeds]
            self.trials = len(self.seeds)
        if int(self.trials) < 1:
            raise ConfigError("trials: must be >= 1")
        bad = set(self.emit) - set(EMIT_KINDS)
        if bad:
            raise ConfigError(f"emit: unknown kind {sorted(bad)[0]!r}")
        self.emit = tuple(k for k in EMIT_KINDS if k in self.emit)
        if int(self.workers) < 1 or int(self.threads) < 1:
            raise ConfigError("workers/threads: must be >= 1")
        self.shift()

    def shift(self) -> ShiftSpec:
        return ShiftSpec.from_expression(self.n, self.intervals, self.mode)

    def trial_seeds(self) -> list:
        return list(self.seeds) if self.seeds is not None else [self.seed + t for t in range(self.trials)]

    def to_dict(self) -> dict:
        """Settings that determine the results (excludes paths and parallelism)."""
        return {"schema_version": io.SCHEMA_VERSION, "n": self.n, "m": self.m,
                "mode": self.mode, "intervals": self.intervals,
                "lag_ranges": [list(r) for r in self.shift().intervals],
                "seeds": self.trial_seeds(), "solver": self.solver.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("schema_version", None)
        solver = data.pop("solver", {}) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown experiment setting")
        if "n" not in data:
            raise ConfigError("n: required")
        return cls(solver=AdmmConfig.from_dict(solver), **data)


def _stats(values) -> dict:
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "min": float(a.min()), "max": float(a.max())}


def _run_trial(args) -> dict:
    cfg, seed = args
    shift = cfg.shift()
    solver_cfg = AdmmConfig.from_dict({**cfg.solver.to_dict(), "seed": seed})
    out = Path(cfg.output_dir) / f"trial_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = solve(cfg.n, cfg.m, shift, solver_cfg, threads=cfg.threads)
    except DivergenceError as e:
        report = e.report
        io.dump_json(report.to_dict(), out / "report.json")
        if "trace" in cfg.emit:
            io.emit_trace(report.records, out / "trace.csv")
        return {"seed": seed, "status": "diverged", "iterations": report.iterations}
    io.dump_json(report.to_dict(), out / "report.json")
    if "trace" in cfg.emit:
        io.emit_trace(report.records, out / "trace.csv")
    if "correlation" in cfg.emit:
        io.emit_correlation_csv(report.x_init, shift, out / "correlation_init.csv")
        io.emit_correlation_csv(report.x_final, shift, out / "correlation_final.csv")
    if "sequence" in cfg.emit:
        io.write_sequence_file(report.x_init, out / "sequence_init.txt")
        io.write_sequence_file(report.x_final, out / "sequence.txt")
    a, b = report.metrics_init, report.metrics_final
    row = {"seed": seed, "status": report.status, "iterations": report.iterations,
           "isl_init": a["isl"], "isl_final": b["isl"],
           "psl_init": a["psl"], "psl_final": b["psl"],
           "islr_init_db": a["islr_db"], "islr_final_db": b["islr_db"],
           "pslr_init_db": a["pslr_db"], "pslr_final_db": b["pslr_db"],
           "delta_pslr_db": b["pslr_db"] - a["pslr_db"],
           "objective_final": objective_psl_form(report.x_final, shift)}
    return row


def run_experiment(cfg: ExperimentConfig) -> tuple:
    """
    Run every trial, write per-trial files and the summary.

    Returns
    -------
    (exit_code, summary)
    """
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, s) for s in cfg.trial_seeds()]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(_run_trial, jobs))
    else:
        rows = [_run_trial(j) for j in jobs]

    ok = [r for r in rows if r["status"] != "diverged"]
    summary = {"config": cfg.to_dict(), "trials": rows,
               "diverged": len(rows) - len(ok)}
    if ok:
        summary["aggregate"] = {k: _stats([r[k] for r in ok]) for k in (
            "islr_init_db", "islr_final_db", "pslr_init_db", "pslr_final_db",
            "delta_pslr_db", "psl_init", "psl_final")}
    if cfg.mode == "periodic":
        b = benchmark_psl_2sqrtN(cfg.n)
        summary["benchmark_2sqrtN"] = {"psl": b, "pslr_db": pslr_from_psl(b, cfg.n, cfg.m)}
    if cfg.oracle and cfg.n * cfg.m <= MAX_BITS and ok:
        best = exhaustive_min(cfg.n, cfg.m, cfg.shift(), Metric.PSL).value
        summary["oracle"] = {"metric": "psl", "optimum": best}
        for r in ok:
            r["oracle_gap"] = r["psl_final"] - best
    if "summary" in cfg.emit:
        io.dump_json(summary, Path(cfg.output_dir) / "summary.json")
    return (EXIT_DIVERGED if len(ok) < len(rows) else EXIT_OK), summary


# ---------------------------------------------------------------------------
# argument handling

def _add_problem_args(p, need_n=True):
    p.add_argument("--n", type=int, required=need_n, help="sequence length N")
    p.add_argument("--m", type=int, default=None, help="number of sequences M")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--intervals", default=None,
                   help='lag ranges, e.g. "1:N-1" or "1:N/4,N/2:3N/4"')


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpbox", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="run design trials")
    d.add_argument("--config", help="JSON experiment file (schema_version 1)")
    _add_problem_args(d, need_n=False)
    d.add_argument("--seed", type=int, required=True, help="base seed")
    d.add_argument("--trials", type=int, required=True)
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--emit", default=None, help="comma list of " + ",".join(EMIT_KINDS))
    d.add_argument("--workers", type=int, default=None, help="parallel trials")
    d.add_argument("--threads", type=int, default=None, help="threads inside a trial")
    d.add_argument("--no-oracle", action="store_true", help="skip the exhaustive optimum")
    for f in fields(AdmmConfig):
        if f.name == "seed":
            continue
        kind = {"bool": None, "int": int, "float": float}.get(f.type, str)
        flag = "--" + f.name.replace("_", "-")
        if kind is None:
            d.add_argument(flag, dest=f.name, action="store_true", default=None)
        else:
            d.add_argument(flag, dest=f.name, type=kind, default=None)

    o = sub.add_parser("oracle", help="exhaustive minimum (N*M <= %d)" % MAX_BITS)
    _add_problem_args(o)
    o.add_argument("--metric", choices=[m.value for m in Metric], default="psl")
    o.add_argument("--workers", type=int, default=1)
    o.add_argument("--split-bits", type=int, default=0)
    o.add_argument("--out", help="write the argmin as a sequence file")

    e = sub.add_parser("eval", help="metrics of a sequence file")
    e.add_argument("path")
    e.add_argument("--mode", choices=[m.value for m in Mode], default="aperiodic")
    e.add_argument("--intervals", default="1:N-1")
    e.add_argument("--csv", help="also write the correlation CSV")

    s = sub.add_parser("msequence", help="LFSR m-sequence")
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--taps", type=lambda v: int(v, 0), default=None,
                   help="polynomial bitmask incl. leading term, e.g. 0x11d")
    s.add_argument("--out", required=True)
    return ap


def _design_config(args) -> ExperimentConfig:
    data = io.load_config_file(args.config) if args.config else {}
    data.pop("schema_version", None)
    solver = dict(data.pop("solver", {}) or {})
    for f in fields(AdmmConfig):
        v = getattr(args, f.name, None)
        if v is not None and f.name != "seed":
            solver[f.name] = v
    for name in ("n", "m", "mode", "intervals", "workers", "threads"):
        v = getattr(args, name)
        if v is not None:
            data[name] = v
    data.update(seed=args.seed, trials=args.trials, output_dir=args.out)
    data.pop("seeds", None)
    if args.emit is not None:
        data["emit"] = [k.strip() for k in args.emit.split(",") if k.strip()]
    if args.no_oracle:
        data["oracle"] = False
    return ExperimentConfig.from_dict({**data, "solver": solver})


def _print(obj):
    print(json.dumps(obj, sort_keys=True, indent=1))


def _cmd_design(args) -> int:
    cfg = _design_config(args)
    code, summary = run_experiment(cfg)
    agg = summary.get("aggregate")
    if agg:
        print(f"trials={cfg.trials} PSLR {agg['pslr_init_db']['mean']:.2f} -> "
              f"{agg['pslr_final_db']['mean']:.2f} dB, best PSL {agg['psl_final']['min']:g}")
    if code == EXIT_DIVERGED:
        print(f"{summary['diverged']} trial(s) diverged", file=sys.stderr)
    return code


def _cmd_oracle(args) -> int:
    shift = ShiftSpec.from_expression(args.n, args.intervals or "1:N-1", args.mode or "aperiodic")
    res = exhaustive_min(args.n, args.m or 1, shift, args.metric, args.workers, args.split_bits)
    if args.out:
        io.write_sequence_file(res.argmin, args.out)
    _print({"metric": args.metric, "value": res.value, "ties": res.ties,
            "argmin": res.argmin.data.astype(int).T.tolist()})
    return EXIT_OK


def _cmd_eval(args) -> int:
    x = io.read_sequence_file(args.path)
    shift = ShiftSpec.from_expression(x.n_len, args.intervals, args.mode)
    out = metrics(x, shift)
    out["objective"] = objective_psl_form(x, shift)
    out.update(n=x.n_len, m=x.m_count, mode=shift.mode.value)
    if x.n_len * x.m_count <= MAX_BITS:
        out["psl_exact"] = score(x, shift, "psl")
    if args.csv:
        io.emit_correlation_csv(x, shift, args.csv)
    _print(out)
    return EXIT_OK


def _cmd_msequence(args) -> int:
    x = m_sequence(args.degree, args.taps)
    io.write_sequence_file(x, args.out)
    print(f"wrote length-{x.n_len} m-sequence to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"design": _cmd_design, "oracle": _cmd_oracle,
               "eval": _cmd_eval, "msequence": _cmd_msequence}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
