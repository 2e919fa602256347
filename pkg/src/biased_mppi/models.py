"""Batched rollout models: plant dynamics plus stage cost, evaluated for K samples.

These are the hot loops. Each model has an ``@njit`` kernel (one sample at a
time, scalar state) and a numpy kernel (all samples at once, ``(K,)`` state
components); :data:`biased_mppi._accel.USE_NUMBA` picks one. Kernels are pure
functions of their arguments.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from .costs import (
    CorridorMap,
    GoalObstacleCostConfig,
    MultiAgentCostConfig,
    PendulumCostConfig,
    goal_obstacle_stage,
    goal_obstacle_stage_jit,
    multi_agent_stage,
    multi_agent_stage_jit,
    pendulum_stage,
    pendulum_stage_jit,
)
from .dynamics import (
    P_VMAX,
    PendulumParams,
    VesselParams,
    pendulum_rk4,
    pendulum_rk4_jit,
    unicycle_components,
    unicycle_components_jit,
    vessel_components,
    vessel_components_jit,
)

# --------------------------------------------------------------------------
# pendulum
# --------------------------------------------------------------------------


@_accel.njit
def _pendulum_rollout_nb(x0, U, dt, p, th_r, al_r):
    K, T = U.shape[0], U.shape[1]
    traj = np.empty((K, T + 1, 4))
    costs = np.zeros(K)
    for k in range(K):
        th, al, thd, ald = x0[0], x0[1], x0[2], x0[3]
        traj[k, 0, 0] = th
        traj[k, 0, 1] = al
        traj[k, 0, 2] = thd
        traj[k, 0, 3] = ald
        c = 0.0
        for t in range(T):
            th, al, thd, ald = pendulum_rk4_jit(th, al, thd, ald, U[k, t, 0], dt, p)
            traj[k, t + 1, 0] = th
            traj[k, t + 1, 1] = al
            traj[k, t + 1, 2] = thd
            traj[k, t + 1, 3] = ald
            c += pendulum_stage_jit(th, al, thd, ald, th_r, al_r)
        costs[k] = c
    return traj, costs


def _pendulum_rollout_np(x0, U, dt, p, th_r, al_r):
    K, T = U.shape[0], U.shape[1]
    traj = np.empty((K, T + 1, 4))
    traj[:, 0] = x0
    th, al, thd, ald = (np.full(K, v) for v in x0)
    costs = np.zeros(K)
    for t in range(T):
        th, al, thd, ald = pendulum_rk4(th, al, thd, ald, U[:, t, 0], dt, p)
        traj[:, t + 1] = np.stack([th, al, thd, ald], axis=1)
        costs += pendulum_stage(th, al, thd, ald, th_r, al_r)
    return traj, costs


class PendulumModel:
    """Rotary pendulum rollouts under the swing-up/tracking stage cost."""

    def __init__(self, params: PendulumParams, dt: float, cost: PendulumCostConfig = PendulumCostConfig()):
        self.params = params
        self.dt = float(dt)
        self.cost = cost
        self._p = params.as_array()
        self.u_max = np.array([self._p[P_VMAX]])
        self.u_min = -self.u_max

    def rollout(self, x0, inputs):
        x0 = np.ascontiguousarray(x0, dtype=float)
        U = np.ascontiguousarray(inputs, dtype=float)
        kernel = _pendulum_rollout_nb if _accel.USE_NUMBA else _pendulum_rollout_np
        return kernel(x0, U, self.dt, self._p, self.cost.theta_ref, self.cost.alpha_ref)


# --------------------------------------------------------------------------
# unicycle with a constant-velocity obstacle
# --------------------------------------------------------------------------


@_accel.njit
def _unicycle_rollout_nb(x0, U, dt, goal, box, radius, penalty):
    K, T = U.shape[0], U.shape[1]
    traj = np.empty((K, T + 1, 3))
    costs = np.zeros(K)
    for k in range(K):
        x, y, h = x0[0], x0[1], x0[2]
        traj[k, 0, 0] = x
        traj[k, 0, 1] = y
        traj[k, 0, 2] = h
        c = 0.0
        for t in range(T):
            x, y, h = unicycle_components_jit(x, y, h, U[k, t, 0], U[k, t, 1], dt)
            traj[k, t + 1, 0] = x
            traj[k, t + 1, 1] = y
            traj[k, t + 1, 2] = h
            tau = (t + 1) * dt
            bx = box[0] + box[2] * tau
            by = box[1] + box[3] * tau
            c += goal_obstacle_stage_jit(x, y, goal[0], goal[1], bx, by, radius, penalty)
        costs[k] = c
    return traj, costs


def _unicycle_rollout_np(x0, U, dt, goal, box, radius, penalty):
    K, T = U.shape[0], U.shape[1]
    traj = np.empty((K, T + 1, 3))
    traj[:, 0] = x0
    x, y, h = (np.full(K, v) for v in x0)
    costs = np.zeros(K)
    for t in range(T):
        x, y, h = unicycle_components(x, y, h, U[:, t, 0], U[:, t, 1], dt)
        traj[:, t + 1] = np.stack([x, y, h], axis=1)
        tau = (t + 1) * dt
        costs += goal_obstacle_stage(x, y, goal[0], goal[1], box[0] + box[2] * tau, box[1] + box[3] * tau, radius, penalty)
    return traj, costs


class UnicycleBoxModel:
    """Velocity-controlled unicycle heading for a goal past an optionally moving box.

    ``box`` is ``(x, y, vx, vy)`` as observed at plan time, propagated with a
    constant-velocity model across the horizon; ``None`` means nothing seen yet.
    """

    def __init__(self, dt: float, cost: GoalObstacleCostConfig, v_bounds=(0.0, 2.0), w_bounds=(-2.0, 2.0)):
        self.dt = float(dt)
        self.cost = cost
        self.u_min = np.array([v_bounds[0], w_bounds[0]], dtype=float)
        self.u_max = np.array([v_bounds[1], w_bounds[1]], dtype=float)
        self.box = None

    def observe_box(self, box):
        self.box = None if box is None else np.asarray(box, dtype=float)

    def rollout(self, x0, inputs):
        x0 = np.ascontiguousarray(x0, dtype=float)
        U = np.ascontiguousarray(inputs, dtype=float)
        box = np.array([1e9, 1e9, 0.0, 0.0]) if self.box is None else self.box
        goal = np.asarray(self.cost.goal, dtype=float)
        kernel = _unicycle_rollout_nb if _accel.USE_NUMBA else _unicycle_rollout_np
        return kernel(x0, U, self.dt, goal, box, self.cost.radius, self.cost.penalty)


# --------------------------------------------------------------------------
# joint multi-vessel rollouts
# --------------------------------------------------------------------------


@_accel.njit
def _vessels_rollout_nb(x0, U, dt, vp, goals, active, cp, mp):
    K, T = U.shape[0], U.shape[1]
    n = x0.shape[0]
    traj = np.empty((K, T + 1, n, 6))
    costs = np.zeros(K)
    px = np.empty(n)
    py = np.empty(n)
    psi = np.empty(n)
    spd = np.empty(n)
    stage = np.empty(n)
    flags = np.zeros(n, dtype=np.int64)
    gx = goals[:, 0].copy()
    gy = goals[:, 1].copy()
    for k in range(K):
        s = x0.copy()
        traj[k, 0] = s
        c = 0.0
        for t in range(T):
            for i in range(n):
                if active[i] > 0.5:
                    b = 4 * i
                    s[i, 0], s[i, 1], s[i, 2], s[i, 3], s[i, 4], s[i, 5] = vessel_components_jit(
                        s[i, 0], s[i, 1], s[i, 2], s[i, 3], s[i, 4], s[i, 5],
                        U[k, t, b], U[k, t, b + 1], U[k, t, b + 2], U[k, t, b + 3], dt, vp,
                    )
                px[i] = s[i, 0]
                py[i] = s[i, 1]
                psi[i] = s[i, 2]
                spd[i] = np.sqrt(s[i, 3] * s[i, 3] + s[i, 4] * s[i, 4])
            traj[k, t + 1] = s
            multi_agent_stage_jit(px, py, psi, spd, gx, gy, active, cp, mp, stage, flags)
            for i in range(n):
                c += stage[i]
        costs[k] = c
    return traj, costs


def _vessels_rollout_np(x0, U, dt, vp, goals, active, cp, mp):
    K, T = U.shape[0], U.shape[1]
    n = x0.shape[0]
    traj = np.empty((K, T + 1, n, 6))
    traj[:, 0] = x0
    s = np.repeat(x0.T[:, :, None], K, axis=2)  # (6, n, K)
    costs = np.zeros(K)
    stage = np.zeros((n, K))
    flags = np.zeros((n, K), dtype=np.int64)
    for t in range(T):
        for i in range(n):
            if active[i] > 0.5:
                f = U[:, t, 4 * i : 4 * i + 4].T
                new = vessel_components(*s[:, i], *f, dt, vp)
                for d in range(6):
                    s[d, i] = new[d]
        traj[:, t + 1] = s.transpose(2, 1, 0)
        spd = np.sqrt(s[3] ** 2 + s[4] ** 2)
        multi_agent_stage(s[0], s[1], s[2], spd, goals[:, 0], goals[:, 1], active, cp, mp, stage, flags)
        costs += stage.sum(axis=0)
    return traj, costs


class MultiVesselModel:
    """Joint rollout of ``n`` vessels; input channels are the agents' thrusts, agent-major."""

    def __init__(
        self,
        params: VesselParams,
        n_agents: int,
        dt: float,
        cost: MultiAgentCostConfig = MultiAgentCostConfig(),
        corridor: CorridorMap = CorridorMap(),
    ):
        self.params = params
        self.n_agents = n_agents
        self.dt = float(dt)
        self.cost = cost
        self.corridor = corridor
        self._vp = params.as_array()
        self._cp = cost.as_array()
        self._mp = corridor.as_array()
        self.u_min = np.tile(params.u_min, n_agents)
        self.u_max = np.tile(params.u_max, n_agents)
        self.goals = np.zeros((n_agents, 2))
        self.active = np.ones(n_agents)

    def set_context(self, goals, active=None):
        self.goals = np.ascontiguousarray(goals, dtype=float).reshape(self.n_agents, 2)
        if active is not None:
            self.active = np.ascontiguousarray(active, dtype=float)

    def rollout(self, x0, inputs):
        x0 = np.ascontiguousarray(x0, dtype=float).reshape(self.n_agents, 6)
        U = np.ascontiguousarray(inputs, dtype=float)
        kernel = _vessels_rollout_nb if _accel.USE_NUMBA else _vessels_rollout_np
        return kernel(x0, U, self.dt, self._vp, self.goals, self.active, self._cp, self._mp)
