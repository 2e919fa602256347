"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

The closed-loop comparisons (4 to 7) are marked slow; deselect with
``-m "not slow"`` for a quick pass.
"""

import os
import time

import numpy as np
import pytest

from biased_mppi import cli, validate
from biased_mppi.metrics import aggregate, run_episodes
from biased_mppi.scenarios import load_config

JOBS = os.cpu_count() or 1


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, seconds=None, budget=None):
        within = budget is None or seconds < budget
        line = f"CRITERION {n} {'PASS' if ok and within else 'FAIL'}: {detail}"
        if seconds is not None:
            line += f" [{seconds:.0f}s" + (f" / budget {budget:.0f}s]" if budget else "]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line

    return emit


def runs(scenario, variant, K, n, seed=0):
    cfg = load_config(scenario).with_overrides(samples=K)
    return [m for _, m in run_episodes(cfg, variant, seed, range(n), JOBS)]


def test_1_weight_properties(report):
    ok, detail = validate.check_weights()
    report(1, ok, detail)


def test_2_riccati(report):
    ok, detail = validate.check_riccati()
    report(2, ok, detail)


def test_3_dynamics(report):
    t0 = time.perf_counter()
    ok, detail = validate.check_dynamics()
    report(3, ok, detail, time.perf_counter() - t0, 60)


@pytest.mark.slow
def test_4_pendulum(report):
    t0 = time.perf_counter()
    b100 = runs("pendulum", "biased", 100, 20)
    sw = runs("pendulum", "switching", 100, 20)
    v100 = runs("pendulum", "vanilla", 100, 20)
    b50 = runs("pendulum", "biased", 50, 20)
    v500 = runs("pendulum", "vanilla", 500, 20)
    med = {k: aggregate(r).total_cost.median for k, r in
           {"b100": b100, "sw": sw, "v100": v100, "b50": b50, "v500": v500}.items()}
    succ = aggregate(b100).outcomes["success"]
    a = succ >= 19
    b = med["b100"] < med["sw"] and med["b100"] < med["v100"]
    c = med["b50"] < med["v500"]
    detail = (
        f"(a) biased K=100 success {succ}/20 {'ok' if a else 'no'}; "
        f"(b) median cost biased {med['b100']:.1f} vs switching {med['sw']:.1f} vs vanilla {med['v100']:.1f} {'ok' if b else 'no'}; "
        f"(c) biased K=50 {med['b50']:.1f} vs vanilla K=500 {med['v500']:.1f} {'ok' if c else 'no'}"
    )
    report(4, a and b and c, detail, time.perf_counter() - t0, 600)


@pytest.mark.slow
def test_5_crossing(report):
    t0 = time.perf_counter()
    s = {(v, K): aggregate(runs("crossing", v, K, 20)) for K in (50, 200) for v in ("biased", "vanilla")}
    clean = all(s[("biased", K)].collisions == 0 and s[("biased", K)].rule_violation_experiments == 0 for K in (50, 200))
    van = s[("vanilla", 50)]
    events = van.collisions >= 1 or van.rule_violation_experiments >= 2
    sb, sv = s[("biased", 200)].time_to_arrival.std, s[("vanilla", 200)].time_to_arrival.std
    spread = sb < sv
    detail = (
        "biased collisions/violation experiments "
        + ", ".join(f"K={K} {s[('biased', K)].collisions}/{s[('biased', K)].rule_violation_experiments}" for K in (50, 200))
        + f"; vanilla K=50 {van.collisions}/{van.rule_violation_experiments}"
        + f"; arrival std K=200 biased {sb:.2f} s vs vanilla {sv:.2f} s"
    )
    report(5, clean and events and spread, detail, time.perf_counter() - t0, 1200)


@pytest.mark.slow
def test_6_braking(report):
    t0 = time.perf_counter()
    b = aggregate(runs("braking", "biased", 300, 10))
    v = aggregate(runs("braking", "vanilla", 300, 10))
    nb, nv = b.outcomes["collision"], v.outcomes["collision"]
    report(6, nb == 0 and nv >= 3, f"collision runs biased {nb}/10, vanilla {nv}/10", time.perf_counter() - t0, 300)


@pytest.mark.slow
def test_7_corridor(report):
    t0 = time.perf_counter()
    b = aggregate(runs("corridor", "biased", 500, 20))
    v = aggregate(runs("corridor", "vanilla", 500, 20))
    b50 = aggregate(runs("corridor", "biased", 50, 20))
    ok = b.outcomes["success"] >= v.outcomes["success"] and b.outcomes["collision"] <= v.outcomes["collision"]
    detail = (
        f"K=500 success biased {b.outcomes['success']} vs vanilla {v.outcomes['success']}, "
        f"collision runs {b.outcomes['collision']} vs {v.outcomes['collision']}; "
        f"biased K=50 deadlocks {b50.outcomes['deadlock']} (reported only)"
    )
    report(7, ok, detail, time.perf_counter() - t0, 1800)


def test_8_bias_demo(report):
    pairs = validate.bias_demo()
    ok = all(b < v for b, v in pairs)
    report(8, ok, "speed with/without braking sample " + ", ".join(f"{b:.3f}/{v:.3f}" for b, v in pairs))


def test_9_lambda_schedule(report):
    ok, detail = validate.check_lambda_schedule()
    report(9, ok, detail)


def test_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    base = ["run", "--scenario", "crossing", "--samples", "50", "--runs", "8", "--steps", "40", "--seed", "3", "--no-logs"]
    outs = []
    for i, jobs in enumerate((1, 1, 8)):
        out = tmp_path / f"o{i}"
        assert cli.main(base + ["--jobs", str(jobs), "--out", str(out)]) == cli.EXIT_OK
        outs.append(((out / "runs.csv").read_bytes(), (out / "summary.csv").read_bytes()))
    ok = outs[0] == outs[1] == outs[2]
    report(10, ok, "runs.csv and summary.csv identical across two --jobs 1 runs and --jobs 8", time.perf_counter() - t0, 120)
