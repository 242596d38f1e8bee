"""Command-line front end: ``medcon run | sweep | validate``.

Exit codes: 0 success, 2 usage or scenario error, 3 parameters rejected,
4 numeric blow-up during a run.
"""

from __future__ import annotations

import argparse
import io
import csv
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import ensemble_stats
from .engine import ensemble_metrics, run
from .analysis import compute_metrics
from .errors import (
    ConfigurationError,
    ConsensusError,
    ConstraintViolationError,
    NumericDomainError,
    ScenarioError,
    StatsUndefinedError,
)
from .protocol import LENIENT, STRICT, BoundaryWarning, validate_params
from .scenario import apply_point, load_scenario, load_sweep, scenario_dict, shipped_scenarios
from .traceio import atomic_write, write_metrics, write_plot_data, write_trace

log = logging.getLogger("median_consensus")

EXIT_USAGE = 2
EXIT_REJECTED = 3
EXIT_NUMERIC = 4


def _apply_overrides(config, args):
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    if getattr(args, "strict", False):
        config = replace(config, validation=STRICT)
    if getattr(args, "quantize", None) is not None:
        config = replace(config, options=replace(config.options, quantization=args.quantize))
    return config


def _out_dir(args, parser):
    if not args.out:
        parser.error("--out must be a non-empty directory path")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args, parser) -> int:
    sc = load_scenario(args.scenario)
    out = _out_dir(args, parser)
    config = _apply_overrides(sc.config, args)
    config.check()
    runs = args.runs or 1
    seeds = [config.loss.rng_seed + i for i in range(runs)]
    reports = []
    for i, seed in enumerate(seeds):
        cfg = config.with_seed(seed)
        trace = run(cfg)
        target = out if runs == 1 else out / f"run_{i:03d}"
        target.mkdir(exist_ok=True)
        echo = scenario_dict(cfg, sc.name, sc.description)
        write_trace(trace, target / "trace.csv", scenario=echo, seed=seed)
        report = compute_metrics(trace)
        write_metrics(report, target / "metrics.json", {"scenario": sc.name, "seed": seed})
        write_plot_data(trace, target)
        reports.append(report)
        log.info("run %d: t_s=%s t_c=%s eps_ss=%.4g", i, report.t_s, report.t_c, report.epsilon_ss)
    if runs > 1:
        _write_summary(out / "summary.csv", [({}, reports)])
    r = reports[0]
    print(f"{sc.name}: t_s={r.t_s} t_c={r.t_c} eps_ss={100 * r.epsilon_ss:.3f}% -> {out}")
    return 0


def _stat_cells(values):
    try:
        s = ensemble_stats(values)
        return [repr(s.mean), repr(s.std), s.count]
    except StatsUndefinedError:
        return ["", "", 0]


def _write_summary(path, rows):
    dims = list(rows[0][0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dims + ["runs", "t_s_mean", "t_s_std", "t_s_reached", "t_c_mean", "t_c_std",
                       "t_c_reached", "eps_mean", "eps_std"])
    for point, reports in rows:
        ts = [r.t_s for r in reports]
        tc = [r.t_c for r in reports]
        eps = [r.epsilon_ss if r.t_s is not None else None for r in reports]
        w.writerow([repr(point[d]) for d in dims] + [len(reports)]
                   + _stat_cells(ts) + _stat_cells(tc) + _stat_cells(eps)[:2])
    atomic_write(path, buf.getvalue())


def cmd_sweep(args, parser) -> int:
    spec = load_sweep(args.scenario)
    out = _out_dir(args, parser)
    base = _apply_overrides(spec.base.config, args)
    runs = args.runs or spec.runs
    seed_base = args.seed if args.seed is not None else spec.seed_base
    rows = []
    for point in spec.points():
        cfg = apply_point(base, point)
        cfg.check()
        reports = ensemble_metrics(cfg, runs, seed_base, workers=args.workers)
        rows.append((point, reports))
        ts = [r.t_s for r in reports]
        log.info("%s: %d/%d settled", point, sum(t is not None for t in ts), runs)
    _write_summary(out / "summary.csv", rows)
    print(f"sweep over {', '.join(d for d, _ in spec.dimensions)}: {len(rows)} points x {runs} runs -> {out / 'summary.csv'}")
    return 0


def cmd_validate(args, parser) -> int:
    sc = load_scenario(args.scenario)
    mode = STRICT if args.strict else LENIENT
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        report = validate_params(sc.config.params, LENIENT)
    print(f"{sc.name}: n={sc.config.n}")
    print(report.format())
    if mode == STRICT:
        validate_params(sc.config.params, STRICT)
    return 0 if report.ok else EXIT_REJECTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medcon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--scenario", required=True,
                       help="scenario file or shipped scenario name (" + ", ".join(shipped_scenarios()) + ")")
        p.add_argument("--strict", action="store_true", help="reject beta == 1/n^2")
        if out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--seed", type=int, help="override the loss seed")
            p.add_argument("--runs", type=int, help="ensemble size")
            p.add_argument("--quantize", type=float, metavar="STEP",
                           help="round transmitted x to multiples of STEP")

    p = sub.add_parser("run", help="simulate one scenario and write trace, metrics and plot data")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="ensemble statistics over swept parameters")
    common(p)
    p.add_argument("--workers", type=int, default=None, help="parallel processes per sweep point")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("validate", help="check the stability conditions of a scenario")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "runs", None) is not None and args.runs < 1:
        parser.error("--runs must be >= 1")
    try:
        return args.func(args, parser)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstraintViolationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except NumericDomainError as exc:
        print(f"error: numeric blow-up at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConsensusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
