"""Stage costs for the three experiment families.

Stage functions take unpacked state components so they run on scalars in
jitted rollouts and on arrays in the numpy path. The public wrappers
(``pendulum_running_cost``, ``goal_obstacle_cost``, ``multi_agent_cost``)
take ordinary vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import _accel


@dataclass(frozen=True)
class PendulumCostConfig:
    theta_ref: float = 1.0
    alpha_ref: float = 0.0


@dataclass(frozen=True)
class GoalObstacleCostConfig:
    goal: tuple = (8.0, 0.0)
    radius: float = 0.5
    penalty: float = 100.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"collision radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class MultiAgentCostConfig:
    goal_weight: float = 1.0
    safe_distance: float = 1.0
    collision_penalty: float = 2000.0
    row_radius: float = 6.0
    row_penalty: float = 50.0
    speed_threshold: float = 0.3
    starboard_sector_deg: float = 112.5
    crossing_min_deg: float = 22.5
    crossing_max_deg: float = 157.5
    wall_penalty: float = 2000.0
    wall_margin: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if not (self.safe_distance > 0 and self.row_radius > 0):
            raise ValueError("radii must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.goal_weight,
                self.safe_distance,
                self.collision_penalty,
                self.row_radius,
                self.row_penalty,
                self.speed_threshold,
                math.radians(self.starboard_sector_deg),
                math.radians(self.crossing_min_deg),
                math.radians(self.crossing_max_deg),
                self.wall_penalty,
                self.wall_margin,
            ]
        )


@dataclass(frozen=True)
class CorridorMap:
    """Channel along x centred on ``y = center``; ``narrows`` are ``(x_start, x_end, width)``."""

    width: float = 1.0e9
    center: float = 0.0
    narrows: tuple = ()

    def as_array(self) -> np.ndarray:
        flat = [0.5 * self.width, self.center, float(len(self.narrows))]
        for x0, x1, w in self.narrows:
            flat += [x0, x1, 0.5 * w]
        return np.array(flat, dtype=float)

    def half_width(self, x):
        return _half_width(np.asarray(x, dtype=float), self.as_array())


# --------------------------------------------------------------------------
# stage functions (scalar- and array-polymorphic)
# --------------------------------------------------------------------------


def pendulum_stage(th, al, thd, ald, th_r, al_r):
    e = np.mod(al - al_r + np.pi, 2.0 * np.pi) - np.pi
    return 100.0 * ((th - th_r) ** 2 + e * e) + thd * thd + 2.0 * ald * ald


def goal_obstacle_stage(px, py, gx, gy, bx, by, radius, penalty):
    goal = np.sqrt((px - gx) ** 2 + (py - gy) ** 2)
    hit = np.sqrt((px - bx) ** 2 + (py - by) ** 2) < radius
    return goal + penalty * hit


def _half_width(x, mp):
    hw = mp[0] + 0.0 * x
    for s in range(int(mp[2])):
        inside = (x >= mp[3 + 3 * s]) & (x <= mp[4 + 3 * s])
        hw = inside * mp[5 + 3 * s] + (1 - inside) * hw
    return hw


def _make_multi_agent_stage(half_width):
    def stage(px, py, psi, spd, gx, gy, active, cp, mp, out, flags):
        """Per-agent cost into ``out``; per-agent rule/collision flags into ``flags``.

        ``flags[i]`` gets bit 1 for a collision, bit 2 for a right-of-way
        violation, bit 4 for a wall contact.
        """
        n = len(px)
        # sector tests as dot/cross products against the cosines of the limits
        cos_sector = np.cos(cp[6])
        cos_min = np.cos(cp[7])
        cos_max = np.cos(cp[8])
        cx = np.cos(psi)
        sx = np.sin(psi)
        for i in range(n):
            dgx = px[i] - gx[i]
            dgy = py[i] - gy[i]
            acc = cp[0] * np.sqrt(dgx * dgx + dgy * dgy)
            hx = cx[i]
            hy = sx[i]
            moving = spd[i] > cp[5]
            n_coll = 0.0 * acc
            n_row = 0.0 * acc
            for j in range(n):
                if j == i:
                    continue
                dx = px[j] - px[i]
                dy = py[j] - py[i]
                dist = np.sqrt(dx * dx + dy * dy)
                pair = active[j] > 0.5
                hit = pair & (dist < cp[1])
                fwd = hx * dx + hy * dy
                left = hx * dy - hy * dx
                # bearing in [-sector, 0)
                starboard = (left < 0.0) & (fwd >= dist * cos_sector)
                # heading difference in (min, max), turning left
                sin_d = hx * sx[j] - hy * cx[j]
                cos_d = hx * cx[j] + hy * sx[j]
                crossing = (sin_d > 0.0) & (cos_d < cos_min) & (cos_d > cos_max)
                viol = pair & moving & starboard & crossing & (dist < cp[3])
                acc = acc + cp[2] * hit + cp[4] * viol
                n_coll = n_coll + hit
                n_row = n_row + viol
            off = np.abs(py[i] - mp[1]) - half_width(px[i], mp)
            wall = off > -cp[10]
            acc = acc + cp[9] * wall
            out[i] = active[i] * acc
            flags[i] = (active[i] > 0.5) * (1 * (n_coll > 0.0) + 2 * (n_row > 0.0) + 4 * (off > 0.0))

    return stage


pendulum_stage_jit = _accel.njit(pendulum_stage)
goal_obstacle_stage_jit = _accel.njit(goal_obstacle_stage)
_half_width_jit = _accel.njit(_half_width)
multi_agent_stage = _make_multi_agent_stage(_half_width)
multi_agent_stage_jit = _accel.njit(_make_multi_agent_stage(_half_width_jit))


# --------------------------------------------------------------------------
# public wrappers
# --------------------------------------------------------------------------


def pendulum_running_cost(x, cfg: PendulumCostConfig = PendulumCostConfig()) -> float:
    th, al, thd, ald = np.asarray(x, dtype=float)
    return float(pendulum_stage(th, al, thd, ald, cfg.theta_ref, cfg.alpha_ref))


def goal_obstacle_cost(p_robot, p_box, cfg: GoalObstacleCostConfig = GoalObstacleCostConfig()) -> float:
    px, py = np.asarray(p_robot, dtype=float)
    if p_box is None:
        bx = by = np.inf
    else:
        bx, by = np.asarray(p_box, dtype=float)
    gx, gy = cfg.goal
    return float(goal_obstacle_stage(px, py, gx, gy, bx, by, cfg.radius, cfg.penalty))


def multi_agent_cost(
    states,
    goals,
    cfg: MultiAgentCostConfig = MultiAgentCostConfig(),
    active=None,
    corridor: CorridorMap = CorridorMap(),
    return_flags: bool = False,
):
    """Per-agent stage cost for vessel states ``(N, 6)`` and goals ``(N, 2)``."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    goals = np.atleast_2d(np.asarray(goals, dtype=float))
    if len(states) != len(goals):
        raise ValueError(f"{len(states)} agents but {len(goals)} goals")
    n = len(states)
    active = np.ones(n) if active is None else np.asarray(active, dtype=float)
    speed = np.hypot(states[:, 3], states[:, 4])
    out = np.zeros(n)
    flags = np.zeros(n, dtype=np.int64)
    multi_agent_stage(
        states[:, 0], states[:, 1], states[:, 2], speed, goals[:, 0], goals[:, 1],
        active, cfg.as_array(), corridor.as_array(), out, flags,
    )
    if return_flags:
        return out, flags
    return out


def rollout_cost(trajectory, stage) -> float:
    """Sum of ``stage(x)`` over steps ``1..T``; the shared initial state is excluded."""
    trajectory = np.asarray(trajectory)
    return float(sum(stage(x) for x in trajectory[1:]))
