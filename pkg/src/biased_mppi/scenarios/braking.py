"""Sudden-obstacle braking: a unicycle heads for a goal and a box is thrown across its path."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .. import controllers as ctl
from ..costs import GoalObstacleCostConfig
from ..dynamics import constant_velocity_propagate, unicycle_step
from ..engine import PlanConfig, Planner
from ..models import UnicycleBoxModel
from ..rng import derive_seed, substream
from .config import ConfigError, ScenarioConfig
from .log import EpisodeLog, StepRecord


def box_spec(cfg: ScenarioConfig, seed: int, run: int) -> Optional[dict]:
    """Injection trigger and box kinematics relative to the robot; ``None`` if disabled."""
    ob = cfg.obstacle
    if not ob or not ob.get("enabled", True):
        return None
    gen = substream(seed, run, 0xB0C)
    return {
        "aim": bool(ob.get("aim", False)),
        "trigger_x": float(ob.get("trigger_x", 3.0)),
        "ahead": float(ob.get("ahead", 2.5)) + gen.uniform(-1, 1) * float(ob.get("ahead_jitter", 0.0)),
        "lateral": float(ob.get("lateral", -1.5)) + gen.uniform(-1, 1) * float(ob.get("lateral_jitter", 0.0)),
        "speed": float(ob.get("speed", 1.0)) + gen.uniform(-1, 1) * float(ob.get("speed_jitter", 0.0)),
    }


def run_braking_episode(
    cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps: Optional[int] = None
) -> EpisodeLog:
    if variant not in ("vanilla", "biased"):
        raise ConfigError(f"braking has no variant {variant!r}")
    steps = cfg.steps if steps is None else int(steps)
    cost = GoalObstacleCostConfig(goal=tuple(cfg.cost.get("goal", (8.0, 0.0))), radius=float(cfg.cost.get("radius", 0.5)),
                                  penalty=float(cfg.cost.get("penalty", 100.0)))
    model = UnicycleBoxModel(
        cfg.dt,
        cost,
        v_bounds=tuple(cfg.plant.get("v_bounds", (0.0, 2.0))),
        w_bounds=tuple(cfg.plant.get("w_bounds", (-2.0, 2.0))),
    )
    names = list(cfg.ancillary) if variant == "biased" else []
    if any(n != "braking" for n in names):
        raise ConfigError(f"braking scenario only knows the 'braking' ancillary, got {names}")
    stepper = lambda x, u: unicycle_step(x, u, cfg.dt)
    ancillary = [ctl.Ancillary("braking", ctl.ConstantPolicy([0.0, 0.0]), stepper) for _ in names]
    plan = PlanConfig.from_covariance(
        cfg.plan.covariance,
        samples=cfg.plan.samples,
        horizon=cfg.plan.horizon,
        dt=cfg.dt,
        ancillary=len(names),
        lambda0=cfg.plan.lambda0,
        eta_min=cfg.plan.eta_min,
        eta_max=cfg.plan.eta_max,
        seed=derive_seed(seed, run, 0),
    )
    planner = Planner(plan, model, ancillary)
    spec = box_spec(cfg, seed, run)
    goal = np.asarray(cost.goal, dtype=float)
    tol = float(cfg.extra.get("goal_tolerance", 0.5))

    x = np.asarray(cfg.extra.get("initial_state", [0.0, 0.0, 0.0]), dtype=float)
    log = EpisodeLog(
        scenario="braking",
        variant=variant,
        samples=cfg.plan.samples,
        seed=seed,
        run=run,
        dt=cfg.dt,
        initial=[x.tolist()],
        meta={"box": spec, "goal": goal.tolist(), "ancillary": names, "config_digest": cfg.digest()},
    )
    box_p = box_v = None
    outcome = "timeout"
    for k in range(steps):
        events = []
        if spec is not None and box_p is None and x[0] >= spec["trigger_x"]:
            lateral = spec["lateral"]
            if spec["aim"]:
                # thrown so that it crosses the robot's line when the robot gets there
                v_now = max(float(log.records[-1].commands[0][0]) if log.records else 0.0, 0.5)
                lateral += -spec["speed"] * spec["ahead"] / v_now
            box_p = np.array([x[0] + spec["ahead"], x[1] + lateral])
            box_v = np.array([0.0, spec["speed"]])
            events.append(("obstacle_injected", -1))
        model.observe_box(None if box_p is None else np.concatenate([box_p, box_v]))
        res = planner.step(x)
        u = res.command
        x = unicycle_step(x, np.clip(u, model.u_min, model.u_max), cfg.dt)
        if box_p is not None:
            box_p = constant_velocity_propagate(box_p, box_v, cfg.dt)
        hit = box_p is not None and np.hypot(*(x[:2] - box_p)) < cost.radius
        if hit:
            events.append(("collision", 0))
        arrived = not hit and np.hypot(*(x[:2] - goal)) < tol
        if arrived:
            events.append(("goal_reached", 0))
        d = res.diagnostics
        log.append(
            StepRecord(
                step=k,
                t=(k + 1) * cfg.dt,
                states=[x.tolist()],
                commands=[u.tolist()],
                diagnostics={
                    "lambda": d["lambda"],
                    "eta": d["eta"],
                    "ancillary_weight": dict(zip(names, d["ancillary_weight"].tolist())),
                    "box": None if box_p is None else box_p.tolist(),
                },
                events=events,
            )
        )
        if hit:
            outcome = "collision"
            break
        if arrived:
            outcome = "success"
            break
    log.outcome = outcome if steps > 0 else None
    return log
