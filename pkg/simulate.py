#!/usr/bin/env python3
"""
simulate.py - KernelFTRL experiment runner

Subcommands:
- run           one experiment from a JSON config
- sweep         horizon x seed grid with a log-log slope fit
- audit         property suites for the solver and the estimator
- oracle-check  kgr against the explicit feature-space oracle
"""

import argparse
import logging
import os
import sys
import time

from environments.contexts import ContextDistribution
from harness.config import (
    ConfigError,
    ExperimentConfig,
    build_contexts,
    build_kernel,
    load_config,
)
from harness.output import write_json, write_regret_csv, write_run_outputs
from harness.regret import decomposition_diagnostic, empirical_regret
from harness.schedules import regret_bound
from harness.simulator import run
from harness.suites import SUITES, audit_suite, oracle_check, sweep
from kernels.mercer import ContextDomainError, UnsupportedKernelError

EXIT_ERROR = 1
EXIT_CONFIG = 2


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(seed=args.seed, out=args.out, max_m=args.max_m, threads=args.threads)


def cmd_run(args) -> int:
    """Single experiment: regret.csv, run.json and friends in the output directory."""
    config = _load(args)
    kernel = build_kernel(config.kernel)
    contexts: ContextDistribution = build_contexts(config.contexts, kernel)
    print(f"🎲 Running T={config.T}, K={config.K}, learner={config.learner}, seed={config.seeds.master}")

    started = time.perf_counter()
    record = run(config, kernel=kernel, contexts=contexts)
    elapsed = time.perf_counter() - started
    if not record.complete:
        print(f"⚠️ Wall-clock cap reached: stopped after {record.rounds}/{config.T} rounds")

    curve = empirical_regret(record, kernel, at=config.checkpoints)
    diag = None
    if config.diagnostics and config.learner == "kgr" and record.rounds:
        diag = decomposition_diagnostic(record, kernel, contexts, config.diagnostics)
        status = "✅" if diag["consistent"] else "❌"
        print(f"{status} Decomposition: R~={diag['R_tilde']['mean']:.4g} B*={diag['B_star']['mean']:.4g} "
              f"B={diag['B']['mean']:.4g} vs regret {diag['regret']['mean']:.4g}")

    bound = None
    p = record.params
    if record.m_eps is not None and record.rounds >= 2:
        bound = regret_bound(record.rounds, record.K, p.M, p.eta, p.beta, p.eps, record.m_eps)

    written = write_run_outputs(
        record, curve, config.output.dir,
        buffer=config.output.buffer,
        loss_sequence=config.output.loss_sequence,
        diag=diag,
        regret_bound=bound,
    )
    print(f"✅ {record.rounds} rounds in {elapsed:.1f}s, regret {curve.final:.6g} ± {curve.final_stderr:.3g}, "
          f"{record.total_kernel_evals} kernel evaluations")
    for path in written:
        print(f"💾 {path}")
    return 0


def cmd_sweep(args) -> int:
    """Horizon x seed grid from the config's sweep section (or --horizons / --seeds)."""
    config = _load(args)
    horizons = args.horizons or list(config.sweep.horizons)
    seeds = args.seeds or list(config.sweep.seeds) or [config.seeds.master]
    if not horizons:
        raise ConfigError("sweep needs horizons (config sweep.horizons or --horizons)")
    print(f"🎲 Sweep over T={horizons} x {len(seeds)} seed(s) on {config.threads} worker(s)")

    table, summary = sweep(config, horizons, seeds, n_jobs=config.threads)
    os.makedirs(config.output.dir, exist_ok=True)
    csv_path = os.path.join(config.output.dir, "sweep.csv")
    table.to_csv(csv_path, index=False, float_format="%.17g")
    json_path = write_json(summary, os.path.join(config.output.dir, "sweep_summary.json"))

    for T, mean in zip(summary["horizons"], summary["mean_regret"]):
        print(f"   T={T:>6}  mean regret {mean:.6g}")
    if summary["slope"] is not None:
        print(f"📈 Log-log slope {summary['slope']:.3f}")
    print(f"💾 {csv_path}")
    print(f"💾 {json_path}")
    return 0


def cmd_audit(args) -> int:
    """Property suites; exit status 1 when any audit fails."""
    only = args.suite or None
    print(f"🔍 Audits {only or list(SUITES)} at scale {args.scale:g}")
    report = audit_suite(seed=args.seed or 0, scale=args.scale, only=only)
    out_dir = args.out or "results"
    path = write_json(report, os.path.join(out_dir, "audit.json"))
    for name in (only or SUITES):
        print(f"{'✅' if report[name]['passed'] else '❌'} {name}")
    print(f"💾 {path}")
    return 0 if report["passed"] else EXIT_ERROR


def cmd_oracle_check(args) -> int:
    """kgr vs oracle_kgr on random instances."""
    report = oracle_check(n_instances=args.instances, seed=args.seed or 0, dump=args.dump)
    status = "✅" if report["passed"] else "❌"
    print(f"{status} {report['n_instances']} instances: max rel err q={report['max_rel_err_q']:.2e} "
          f"b={report['max_rel_err_b']:.2e} compiled={report['max_rel_err_compiled']:.2e}")
    if args.dump or args.out:
        path = write_json(report, os.path.join(args.out or "results", "oracle_check.json"))
        print(f"💾 {path}")
    return 0 if report["passed"] else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Kernelized contextual bandits with log-barrier FTRL and Kernel Geometric Resampling"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=int, default=None, help="Master seed (unsigned 64-bit)")
    common.add_argument("--out", "-o", type=str, default=None, help="Output directory")
    common.add_argument("--max-m", type=int, default=None, help="Cap on the resample count M")
    common.add_argument("--threads", type=int, default=None, help="Parallel workers for independent runs")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="Run one experiment")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", parents=[common], help="Horizon x seed grid")
    p_sweep.add_argument("--horizons", type=int, nargs="+", default=None, help="Horizons T")
    p_sweep.add_argument("--seeds", type=int, nargs="+", default=None, help="Master seeds")
    p_sweep.set_defaults(func=cmd_sweep)

    p_audit = sub.add_parser("audit", parents=[common], help="Property audits")
    p_audit.add_argument("--suite", choices=SUITES, action="append", help="Run only this suite (repeatable)")
    p_audit.add_argument("--scale", type=float, default=1.0, help="Multiplier on sample counts")
    p_audit.set_defaults(func=cmd_audit)

    p_oracle = sub.add_parser("oracle-check", parents=[common], help="kgr vs feature-space oracle")
    p_oracle.add_argument("--instances", type=int, default=1000, help="Random instances")
    p_oracle.add_argument("--dump", action="store_true", help="Write every instance to oracle_check.json")
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    """Command-line interface for the simulator."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"❌ Config error: {e}")
        return EXIT_CONFIG
    except (ValueError, ContextDomainError, UnsupportedKernelError, OSError) as e:
        print(f"❌ {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
