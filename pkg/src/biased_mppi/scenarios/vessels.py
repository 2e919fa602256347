"""Decentralised multi-vessel episodes: intersection crossing and the corridor.

Every agent runs its own planner over the joint input space of all agents.
Its own channels are sampled around its shifted plan. The other agents'
channels are sampled around a go-to-goal proposal toward the goal the agent
*guesses* for them: their observed position pushed ``goal_estimate_horizon``
seconds ahead at their current velocity (their position if they are not
moving). Only observed states cross agent boundaries; each agent executes the
first ego input of its own plan.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional

import numpy as np

from .. import controllers as ctl
from ..costs import CorridorMap, MultiAgentCostConfig, multi_agent_cost
from ..dynamics import VesselParams, body_to_world, vessel_step
from ..engine import PlanConfig, Planner
from ..models import MultiVesselModel
from ..rng import derive_seed, substream
from .config import ConfigError, ScenarioConfig
from .log import EpisodeLog, StepRecord

PRIMITIVES = ("go_slow", "go_fast", "braking", "go_to_goal")


def vessel_params(cfg: ScenarioConfig) -> VesselParams:
    try:
        return VesselParams.from_dict(cfg.plant) if cfg.plant else VesselParams()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[plant]: {exc}") from exc


def corridor_map(cfg: ScenarioConfig) -> CorridorMap:
    c = cfg.extra.get("corridor")
    if not c:
        return CorridorMap()
    return CorridorMap(
        width=float(c.get("width", 1e9)),
        center=float(c.get("center", 0.0)),
        narrows=tuple(tuple(float(v) for v in n) for n in c.get("narrows", ())),
    )


def tracker_gains(cfg: ScenarioConfig) -> ctl.TrackerGains:
    g = dict(cfg.extra.get("tracker", {}))
    if "Q" in g:
        g["Q"] = tuple(g["Q"])
    return ctl.TrackerGains(**g)


def initial_agents(cfg: ScenarioConfig, seed: int, run: int) -> tuple[np.ndarray, np.ndarray]:
    """Start states ``(n, 6)`` and goals ``(n, 2)``; depends only on ``(seed, run)``.

    Explicit ``[[agents]]`` entries are used when present (starts jittered);
    otherwise agents are spread over the corridor end slots, half starting on
    each side, with goals shuffled among the slots on the far side.
    """
    gen = substream(seed, run, 0xA6E)
    jitter = float(cfg.extra.get("start_jitter", 0.0))
    hjit = float(cfg.extra.get("heading_jitter", 0.0))
    if cfg.agents:
        starts, goals = [], []
        for a in cfg.agents:
            s = np.asarray(a["start"], dtype=float)
            g = np.asarray(a["goal"], dtype=float)
            if s.shape != (3,) or g.shape != (2,):
                raise ConfigError("agent start must be [x, y, heading] and goal [x, y]")
            direction = (g - s[:2]) / max(np.linalg.norm(g - s[:2]), 1e-9)
            s = s.copy()
            s[:2] += direction * gen.uniform(-jitter, jitter)
            s[2] += gen.uniform(-hjit, hjit)
            starts.append(s)
            goals.append(g)
    else:
        n = int(cfg.extra.get("n_agents", 4))
        left = [np.asarray(p, dtype=float) for p in cfg.extra["left_slots"]]
        right = [np.asarray(p, dtype=float) for p in cfg.extra["right_slots"]]
        n_left = (n + 1) // 2
        if n_left > len(left) or n - n_left > len(right):
            raise ConfigError(f"not enough corridor slots for {n} agents")
        lperm = gen.permutation(len(left))
        rperm = gen.permutation(len(right))
        gl = gen.permutation(len(left))
        gr = gen.permutation(len(right))
        starts, goals = [], []
        for i in range(n_left):
            p = left[lperm[i]]
            starts.append(np.array([p[0] + gen.uniform(-jitter, jitter), p[1], gen.uniform(-hjit, hjit)]))
            goals.append(right[gr[i]].copy())
        for i in range(n - n_left):
            p = right[rperm[i]]
            starts.append(np.array([p[0] + gen.uniform(-jitter, jitter), p[1], math.pi + gen.uniform(-hjit, hjit)]))
            goals.append(left[gl[i]].copy())
    states = np.zeros((len(starts), 6))
    states[:, :3] = np.array(starts)
    return states, np.array(goals)


def estimate_goal(state, horizon: float, bounds, still: float) -> np.ndarray:
    """Constant-velocity guess of where another vessel is heading."""
    v = body_to_world(state)
    if math.hypot(*v) < still:
        return np.asarray(state[:2], dtype=float).copy()
    g = np.asarray(state[:2], dtype=float) + horizon * v
    if bounds is not None:
        g[0] = min(max(g[0], bounds[0]), bounds[1])
        g[1] = min(max(g[1], bounds[2]), bounds[3])
    return g


class _JointProposal:
    """An ego primitive embedded in the joint input space around ``base``."""

    def __init__(self, primitive, ego: int, base: np.ndarray):
        self.primitive = primitive
        self.ego = ego
        self.base = base

    def __call__(self, x0, horizon):
        out = self.base.copy()
        b = 4 * self.ego
        out[:, b : b + 4] = self.primitive(np.asarray(x0).reshape(-1, 6)[self.ego], horizon)
        return out


class VesselAgent:
    """One decentralised planner."""

    def __init__(self, index, n, cfg: ScenarioConfig, params, tracker, cost, corridor, goal, names, seed):
        self.index = index
        self.goal = np.asarray(goal, dtype=float)
        self.tracker = tracker
        self.names = list(names)
        ex = cfg.extra
        self.cruise = float(ex.get("cruise_speed", 1.2))
        self.approach = float(ex.get("approach_time", 2.0))
        specs = {
            "go_slow": ctl.PrimitiveSpec("go_slow", thrust=float(ex.get("go_slow_thrust", 2.0))),
            "go_fast": ctl.PrimitiveSpec("go_fast", thrust=float(ex.get("go_fast_thrust", 6.0))),
            "braking": ctl.PrimitiveSpec("braking"),
            "go_to_goal": ctl.PrimitiveSpec("go_to_goal", cruise_speed=self.cruise, approach_time=self.approach),
        }
        unknown = [nm for nm in self.names if nm not in specs]
        if unknown:
            raise ConfigError(f"unknown vessel primitives {unknown}; expected some of {PRIMITIVES}")
        self.primitives = [ctl.VesselPrimitive(specs[nm], tracker, cfg.dt, self.goal) for nm in self.names]
        cov = np.tile(np.asarray(cfg.plan.covariance, dtype=float), n)
        self.plan_cfg = PlanConfig.from_covariance(
            cov,
            samples=cfg.plan.samples,
            horizon=cfg.plan.horizon,
            dt=cfg.dt,
            ancillary=len(self.names),
            lambda0=cfg.plan.lambda0,
            eta_min=cfg.plan.eta_min,
            eta_max=cfg.plan.eta_max,
            seed=seed,
        )
        # plan against slightly inflated radii so model mismatch does not
        # leave the executed trajectory hovering right on a rule boundary
        margin = float(ex.get("planning_margin", 0.0))
        plan_cost = replace(cost, safe_distance=cost.safe_distance + margin, row_radius=cost.row_radius + margin)
        self.model = MultiVesselModel(params, n, cfg.dt, plan_cost, corridor)
        self.planner = Planner(self.plan_cfg, self.model, [None] * len(self.names))
        self.horizon_s = float(ex.get("goal_estimate_horizon", 10.0))
        self.bounds = ex.get("map_bounds")
        self.still = float(ex.get("stationary_speed", 0.05))

    def act(self, observed: np.ndarray, active: np.ndarray):
        n = len(observed)
        T = self.plan_cfg.horizon
        goals = np.empty((n, 2))
        others = np.zeros((T, 4 * n))
        for j in range(n):
            if j == self.index:
                goals[j] = self.goal
                continue
            goals[j] = estimate_goal(observed[j], self.horizon_s, self.bounds, self.still)
            if active[j]:
                others[:, 4 * j : 4 * j + 4] = ctl.tracked_proposal(
                    self.tracker, observed[j], T, self.plan_cfg.dt, goals[j], self.cruise, self.approach
                )
        self.model.set_context(goals, active.astype(float))
        ego = slice(4 * self.index, 4 * self.index + 4)

        def centre(mean):
            out = others.copy()
            out[:, ego] = mean[:, ego]
            return out

        self.planner.ancillary = [_JointProposal(p, self.index, others) for p in self.primitives]
        res = self.planner.step(observed.reshape(-1), mean_fn=centre)
        d = res.diagnostics
        diag = {
            "lambda": d["lambda"],
            "eta": d["eta"],
            "ancillary_weight": dict(zip(self.names, d["ancillary_weight"].tolist())),
            "goal_estimates": goals.tolist(),
        }
        return res.command[ego], diag


def run_vessel_episode(
    cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps: Optional[int] = None
) -> EpisodeLog:
    if variant not in ("vanilla", "biased"):
        raise ConfigError(f"{cfg.scenario} has no variant {variant!r}")
    steps = cfg.steps if steps is None else int(steps)
    params = vessel_params(cfg)
    cost = MultiAgentCostConfig(**cfg.cost)
    corridor = corridor_map(cfg)
    tracker = ctl.VelocityTracker(params, cfg.dt, tracker_gains(cfg))
    states, goals = initial_agents(cfg, seed, run)
    n = len(states)
    names = list(cfg.ancillary) if variant == "biased" else []
    agents = [
        VesselAgent(i, n, cfg, params, tracker, cost, corridor, goals[i], names, derive_seed(seed, run, i))
        for i in range(n)
    ]
    tol = float(cfg.extra.get("goal_tolerance", 1.0))
    dl_speed = float(cfg.extra.get("deadlock_speed", 0.05))
    dl_steps = int(round(float(cfg.extra.get("deadlock_time", 10.0)) / cfg.dt))
    active = np.ones(n, dtype=bool)
    slow_for = 0

    log = EpisodeLog(
        scenario=cfg.scenario,
        variant=variant,
        samples=cfg.plan.samples,
        seed=seed,
        run=run,
        dt=cfg.dt,
        initial=states.tolist(),
        meta={"goals": goals.tolist(), "ancillary": names, "config_digest": cfg.digest()},
    )
    outcome = "timeout"
    for k in range(steps):
        observed = states.copy()
        commands = np.zeros((n, 4))
        diags = {}
        for i in range(n):
            if active[i]:
                commands[i], diags[str(i)] = agents[i].act(observed, active)
        for i in range(n):
            if active[i]:
                states[i] = vessel_step(states[i], commands[i], cfg.dt, params)

        events = []
        _, flags = multi_agent_cost(states, goals, cost, active.astype(float), corridor, return_flags=True)
        for i in range(n):
            if flags[i] & 1 or flags[i] & 4:
                events.append(("collision", i))
            if flags[i] & 2:
                events.append(("rule_violation", i))
        collided = any(e == "collision" for e, _ in events)
        for i in range(n):
            if active[i] and not collided and np.hypot(*(states[i, :2] - goals[i])) < tol:
                active[i] = False
                events.append(("goal_reached", i))
        speeds = np.hypot(states[:, 3], states[:, 4])
        slow_for = slow_for + 1 if active.any() and np.all(speeds[active] < dl_speed) else 0
        if slow_for >= dl_steps and k >= dl_steps:
            events.append(("deadlock", -1))
        log.append(
            StepRecord(
                step=k,
                t=(k + 1) * cfg.dt,
                states=states.tolist(),
                commands=commands.tolist(),
                diagnostics=diags,
                events=events,
            )
        )
        if collided:
            outcome = "collision"
            break
        if any(e == "deadlock" for e, _ in events):
            outcome = "deadlock"
            break
        if not active.any():
            outcome = "success"
            break
    log.outcome = outcome if steps > 0 else None
    return log


def run_crossing_episode(cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps=None) -> EpisodeLog:
    return run_vessel_episode(cfg, seed, run, variant, steps)


def run_corridor_episode(cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps=None) -> EpisodeLog:
    return run_vessel_episode(cfg, seed, run, variant, steps)
