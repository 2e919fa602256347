"""Command-line entry point: ``biased-mppi {run,sweep,compare,validate}``.

Precedence is defaults < ``--config`` file < flags. Every output directory
gets the fully merged config as ``config.toml`` so a run can be repeated from
its own outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import metrics
from .scenarios import SCENARIOS, ConfigError, load_config
from .scenarios.config import to_toml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCEPTANCE = 3


def _positive(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _k_list(v: str) -> list:
    return [_positive(s) for s in v.split(",") if s.strip()]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biased-mppi", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", choices=SCENARIOS)
        sp.add_argument("--config", type=Path, help="TOML file merged over the scenario defaults")
        sp.add_argument("--samples", type=_positive, help="number of samples K")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--runs", type=_positive, default=1)
        sp.add_argument("--steps", type=_positive, help="episode length override (control steps)")
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--jobs", type=_positive, default=1, help="parallel episode workers")
        sp.add_argument("--no-logs", action="store_true", help="skip per-episode JSONL logs")

    r = sub.add_parser("run", help="run N episodes of one variant")
    common(r)
    r.add_argument("--variant", default="biased", choices=("vanilla", "biased", "switching"))

    s = sub.add_parser("sweep", help="variants x K x runs comparison table")
    common(s)
    s.add_argument("--variants", default="vanilla,biased")
    s.add_argument("--k-list", type=_k_list, help="comma separated K values (default: --samples or the config)")
    s.add_argument("--unpaired", action="store_true", help="average arrival/distance over each variant's own successes")

    c = sub.add_parser("compare", help="two variants at one K, paired statistics")
    common(c)
    c.add_argument("--variants", default="vanilla,biased")

    v = sub.add_parser("validate", help="fast property checks and smoke runs")
    v.add_argument("--only", action="append", help="run only the named check (repeatable)")
    return p


def _config(args):
    if args.scenario is None and args.config is None:
        raise ConfigError("give --scenario or --config")
    cfg = load_config(args.scenario, args.config)
    return cfg.with_overrides(samples=args.samples, steps=args.steps)


def _prepare_out(args, cfg) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(to_toml(cfg.raw))
    return out


def _write_logs(out: Path, logs) -> None:
    d = out / "logs"
    d.mkdir(exist_ok=True)
    for log in logs:
        log.write(d / f"{log.scenario}_{log.variant}_K{log.samples}_seed{log.seed}_run{log.run:03d}.jsonl")


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _prepare_out(args, cfg)
    results = metrics.run_episodes(cfg, args.variant, args.seed, range(args.runs), args.jobs)
    if not args.no_logs:
        _write_logs(out, [log for log, _ in results])
    runs = [m for _, m in results]
    (out / "runs.csv").write_text(metrics.runs_csv(runs))
    row = {"scenario": cfg.scenario, "variant": args.variant, "samples": cfg.plan.samples, **metrics.aggregate(runs).row()}
    (out / "summary.csv").write_text(metrics.rows_csv([row]))
    _report([row])
    return EXIT_OK


def _sweep(args, k_list) -> int:
    cfg = _config(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    out = _prepare_out(args, cfg)
    on_logs = None if args.no_logs else (lambda v, K, logs: _write_logs(out, logs))
    res = metrics.sweep(
        cfg, variants, k_list, args.seed, args.runs, args.jobs, paired=not getattr(args, "unpaired", False), on_logs=on_logs
    )
    all_runs = [m for K in k_list for v in variants for m in res.runs[(v, int(K))]]
    (out / "runs.csv").write_text(metrics.runs_csv(all_runs))
    (out / "comparison.csv").write_text(metrics.rows_csv(res.rows))
    _report(res.rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    k_list = args.k_list or [args.samples or load_config(args.scenario, args.config).plan.samples]
    return _sweep(args, k_list)


def cmd_compare(args) -> int:
    return _sweep(args, [args.samples or load_config(args.scenario, args.config).plan.samples])


def cmd_validate(args) -> int:
    from .validate import run_checks

    results = run_checks(args.only)
    if args.only and not results:
        raise ConfigError(f"no check named {args.only}")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def _report(rows) -> None:
    for r in rows:
        arr = r["time_to_arrival_mean"]
        print(
            f"{r['scenario']:9s} {r['variant']:9s} K={r['samples']:<5d} runs {r['runs']:3d}  "
            f"success {r['success']:3d}  collision {r['collision']:3d}  deadlock {r['deadlock']:3d}  "
            f"violations {r['rule_violation_experiments']:3d}  cost median {r['total_cost_median']:.4g}"
            + ("" if arr != arr else f"  arrival {arr:.2f}+-{r['time_to_arrival_std']:.2f} s")
        )


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
