"""Fast self-checks: exact properties of the planner maths plus short smoke runs.

Each check returns ``(passed, detail)``. :func:`run_checks` drives them and is
what ``biased-mppi validate`` calls.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import controllers, dynamics, engine
from .scenarios import load_config


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


# --------------------------------------------------------------------------
# planner maths
# --------------------------------------------------------------------------


def check_weights() -> tuple[bool, str]:
    gen = np.random.default_rng(12345)
    problems = []
    for _ in range(50):
        K = int(gen.integers(2, 400))
        costs = gen.uniform(0, 1e3, K) * gen.choice([1e-3, 1.0, 1e3])
        lam = float(10.0 ** gen.uniform(-3, 3))
        wb = engine.compute_weights(costs, lam)
        if abs(wb.weights.sum() - 1.0) > 1e-12:
            problems.append(f"sum {wb.weights.sum()!r}")
        if np.any(wb.weights < 0):
            problems.append("negative weight")
        shifted = engine.compute_weights(costs + gen.uniform(-1e3, 1e3), lam)
        if not np.allclose(shifted.weights, wb.weights, rtol=1e-9, atol=1e-15):
            problems.append("baseline shift changed weights")
        perm = gen.permutation(K)
        if not np.allclose(engine.compute_weights(costs[perm], lam).weights, wb.weights[perm], rtol=0, atol=1e-15):
            problems.append("permutation changed weights")
    costs = np.array([3.0, 1.0, 2.0, 5.0])
    w0 = engine.compute_weights(costs, 1e-9).weights
    if not (abs(w0[1] - 1.0) < 1e-12):
        problems.append(f"lambda->0 weights {w0}")
    winf = engine.compute_weights(costs, 1e12).weights
    if np.max(np.abs(winf - 0.25)) > 1e-6:
        problems.append(f"lambda->inf weights {winf}")
    return (not problems), ("ok" if not problems else "; ".join(sorted(set(problems))))


def check_lambda_schedule() -> tuple[bool, str]:
    cfg = engine.PlanConfig(samples=20, horizon=2, dt=0.1, sigma=(1.0,), eta_min=5.0, eta_max=10.0, lambda0=1.0)
    state = engine.PlannerState.initial(cfg)
    seq = []
    for eta in (12.0, 3.0, 7.0):
        state = engine.PlannerState(nominal=state.nominal, lam=engine.update_lambda(state, eta, cfg))
        seq.append(state.lam)
    want = [0.9, 0.9 * 1.2, 0.9 * 1.2]
    ok = all(abs(a - b) <= 1e-15 for a, b in zip(seq, want))
    return ok, f"lambda sequence {seq}"


def check_riccati() -> tuple[bool, str]:
    P = controllers.solve_dare(1.0, 1.0, 1.0, 1.0)
    golden = (1 + math.sqrt(5)) / 2
    if abs(float(P[0, 0]) - golden) > 1e-9:
        return False, f"scalar case gave {P[0, 0]!r}"
    gen = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        A = gen.standard_normal((4, 4))
        B = gen.standard_normal((4, 2))
        M = gen.standard_normal((4, 4))
        Q = M @ M.T + 0.1 * np.eye(4)
        R = np.eye(2)
        P = controllers.solve_dare(A, B, Q, R)
        worst = max(worst, controllers.dare_residual(A, B, Q, R, P) / max(1.0, np.linalg.norm(P)))
    return worst < 1e-9, f"worst relative residual {worst:.2e}"


def check_dynamics() -> tuple[bool, str]:
    p = dynamics.PendulumParams()
    for x in ([0.3, 0.0, 0.0, 0.0], [0.0, math.pi, 0.0, 0.0]):
        if np.max(np.abs(dynamics.pendulum_step(x, 0.0, 0.02, p) - x)) > 1e-12:
            return False, f"equilibrium {x} drifts"
    free = dynamics.PendulumParams(arm_damping=0.0, pendulum_damping=0.0, torque_constant=1e-12)
    x = np.array([0.0, 2.5, 1.0, 0.0])
    e0 = dynamics.pendulum_energy(x, free)
    for _ in range(5000):
        x = dynamics.pendulum_step(x, 0.0, 1e-3, free)
    drift = abs(dynamics.pendulum_energy(x, free) - e0) / abs(e0)
    if drift > 1e-3:
        return False, f"energy drift {drift:.2e}"
    A, B = dynamics.pendulum_linearize(p)
    pa = p.as_array()
    eps = 1e-6
    J = np.zeros((4, 5))
    for i in range(5):
        z = np.zeros(5)
        z[i] = eps
        f = []
        for s in (1, -1):
            th, al, thd, ald, u = s * z
            a1, a2 = dynamics.pendulum_rates(al, thd, ald, u, pa)
            f.append(np.array([thd, ald, a1, a2]))
        J[:, i] = (f[0] - f[1]) / (2 * eps)
    err = max(np.max(np.abs(J[:, :4] - A)), np.max(np.abs(J[:, 4:] - B)))
    return err < 1e-4, f"energy drift {drift:.1e}, linearisation error {err:.1e}"


class _ZeroCost:
    def __init__(self, m: int):
        self.u_min = np.full(m, -np.inf)
        self.u_max = np.full(m, np.inf)

    def rollout(self, x0, inputs):
        K, T, _ = inputs.shape
        return np.zeros((K, T + 1, len(x0))), np.zeros(K)


def bias_demo(seeds=range(5), iterations: int = 200, samples: int = 20) -> list[tuple[float, float]]:
    """Speed command after ``iterations`` steps with zero cost, ``(with braking, without)`` per seed."""
    out = []
    model = _ZeroCost(2)
    brake = lambda x0, T: np.zeros((T, 2))  # noqa: E731
    nominal = np.tile([1.0, 0.0], (10, 1))
    for seed in seeds:
        speeds = []
        for J in (1, 0):
            cfg = engine.PlanConfig(
                samples=samples, horizon=10, dt=0.1, sigma=(0.1, 0.1), ancillary=J, eta_min=2.0, eta_max=5.0, seed=seed
            )
            planner = engine.Planner(cfg, model, [brake] * J, nominal=nominal)
            for _ in range(iterations):
                res = planner.step(np.zeros(3))
            speeds.append(abs(float(res.command[0])))
        out.append(tuple(speeds))
    return out


def check_bias() -> tuple[bool, str]:
    pairs = bias_demo()
    ok = all(b < v for b, v in pairs)
    return ok, "speed with/without braking " + ", ".join(f"{b:.3f}/{v:.3f}" for b, v in pairs)


# --------------------------------------------------------------------------
# smoke runs
# --------------------------------------------------------------------------


def _smoke(scenario: str, variant: str, runs: int, steps: Optional[int], samples: Optional[int], require) -> Callable:
    def check() -> tuple[bool, str]:
        from .metrics import aggregate, run_episodes

        cfg = load_config(scenario)
        if samples is not None:
            cfg = cfg.with_overrides(samples=samples)
        if steps is not None:
            cfg = cfg.with_overrides(steps=steps)
        got = [m for _, m in run_episodes(cfg, variant, 0, range(runs))]
        s = aggregate(got)
        ok = require(s) and all(m.total_cost >= 0 and m.total_effort >= 0 for m in got)
        return ok, f"{variant} K={cfg.plan.samples}: " + ", ".join(f"{k} {v}" for k, v in s.outcomes.items() if v)

    return check


CHECKS = [
    ("weights", check_weights),
    ("lambda-schedule", check_lambda_schedule),
    ("riccati", check_riccati),
    ("dynamics", check_dynamics),
    ("bias-demo", check_bias),
    ("smoke-pendulum", _smoke("pendulum", "biased", 5, None, None, lambda s: s.outcomes["success"] >= 4)),
    ("smoke-braking", _smoke("braking", "biased", 5, None, None, lambda s: s.collisions == 0)),
    ("smoke-crossing", _smoke("crossing", "biased", 5, None, 50, lambda s: s.collisions == 0)),
    ("smoke-corridor", _smoke("corridor", "biased", 5, 60, 50, lambda s: s.collisions == 0)),
]


def run_checks(names=None, echo: Optional[Callable[[str], None]] = print) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        if names and name not in names:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported by name
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        r = CheckResult(name, bool(ok), detail, time.perf_counter() - t0)
        results.append(r)
        if echo is not None:
            echo(f"{'PASS' if r.passed else 'FAIL'} {name}: {detail} ({r.seconds:.1f}s)")
    return results
