"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 5]

Two levels: a single batched rollout per model, and a short closed-loop
episode per scenario (planner, ancillaries and plant together). Both backends
must give the same numbers, which is checked on the fly.
"""

import argparse
import math
import time

import numpy as np

from biased_mppi import _accel
from biased_mppi import dynamics as dyn
from biased_mppi.costs import GoalObstacleCostConfig, MultiAgentCostConfig
from biased_mppi.models import MultiVesselModel, PendulumModel, UnicycleBoxModel
from biased_mppi.scenarios import load_config, run_episode


def best_of(fn, repeat):
    out = None
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def rollout_cases(K):
    gen = np.random.default_rng(0)
    pend = PendulumModel(dyn.PendulumParams(), 0.02)
    uni = UnicycleBoxModel(0.1, GoalObstacleCostConfig(goal=(8.0, 0.0)))
    uni.observe_box(np.array([3.0, -1.0, 0.0, 1.0]))
    cfg = load_config("crossing")
    ves = MultiVesselModel(dyn.VesselParams(), 2, 0.2, MultiAgentCostConfig(**cfg.cost))
    ves.set_context([[20.0, 0.0], [0.0, 20.0]])
    lo, hi = ves.u_min, ves.u_max
    return {
        "pendulum rollout": (pend, np.zeros(4), gen.normal(0, 3, (K, 50, 1))),
        "unicycle rollout": (uni, np.zeros(3), gen.uniform(-1, 1, (K, 30, 2))),
        "2-vessel rollout": (ves, np.zeros(12), gen.uniform(lo, hi, (K, 30, len(hi)))),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=500)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'case':28s} {'numpy':>10s} {'numba':>10s} {'speed-up':>9s}")
    for name, (model, x0, U) in rollout_cases(args.samples).items():
        t = {}
        res = {}
        for flag in (False, True):
            _accel.USE_NUMBA = flag
            model.rollout(x0, U)  # compile / warm caches
            t[flag], res[flag] = best_of(lambda: model.rollout(x0, U), args.repeat)
        assert np.allclose(res[False][1], res[True][1], rtol=1e-9), name
        print(f"{name + f' K={args.samples}':28s} {t[False] * 1e3:8.2f}ms {t[True] * 1e3:8.2f}ms {t[False] / t[True]:8.1f}x")

    episodes = [("pendulum", 100, 50), ("braking", 300, 20), ("crossing", 200, 20)]
    for scen, K, steps in episodes:
        cfg = load_config(scen).with_overrides(samples=K, steps=steps)
        t = {}
        logs = {}
        for flag in (False, True):
            _accel.USE_NUMBA = flag
            run_episode(cfg.with_overrides(steps=2), 0, 0, "biased")
            t[flag], logs[flag] = best_of(lambda: run_episode(cfg, 0, 0, "biased"), max(1, args.repeat // 2))
        a = np.asarray(logs[False].states(0))
        b = np.asarray(logs[True].states(0))
        drift = float(np.max(np.abs(a - b)))
        print(f"{f'{scen} episode {steps} steps K={K}':28s} {t[False]:9.2f}s {t[True]:9.2f}s {t[False] / t[True]:8.1f}x"
              f"  (max state gap {drift:.1e})")


if __name__ == "__main__":
    main()
