"""Ancillary controllers and the tools to build them.

Everything here can *propose* an open-loop input sequence: a feedback law is
rolled forward against the nominal model and the inputs it commands along the
way are recorded. Policies carry their own internal state (the LQI integrator)
and :func:`propose` works on a copy, so the live controller is untouched.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from . import _accel
from .dynamics import (
    PendulumParams,
    _pendulum_inertias,
    VesselParams,
    pendulum_linearize,
    pendulum_step,
    pendulum_swing_energy,
    vessel_components,
    vessel_components_jit,
    vessel_step,
    wrap_angle,
)


class RiccatiError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"DARE did not converge after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual


def dare_residual(A, B, Q, R, P) -> float:
    A, B, Q, R, P = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, R, P))
    BtPA = B.T @ P @ A
    res = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
    return float(np.linalg.norm(res))


def solve_dare(A, B, Q, R, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Stabilising solution of the discrete algebraic Riccati equation.

    Structured doubling: the iteration squares the closed-loop transition at
    every pass, so it converges quadratically once close. The result is
    polished with a few fixed-point (value iteration) steps and checked
    against the residual.
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, R))
    n = A.shape[0]
    eye = np.eye(n)
    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Hk = 0.5 * (Q + Q.T)
    for it in range(max_iter):
        W = eye + Gk @ Hk
        WinvA = np.linalg.solve(W, Ak)
        WinvG = np.linalg.solve(W, Gk)
        H_next = Hk + Ak.T @ Hk @ WinvA
        Gk = Gk + Ak @ WinvG @ Ak.T
        Ak = Ak @ WinvA
        Gk = 0.5 * (Gk + Gk.T)
        H_next = 0.5 * (H_next + H_next.T)
        step = np.linalg.norm(H_next - Hk)
        Hk = H_next
        if not np.all(np.isfinite(Hk)):
            break
        if step <= tol * max(1.0, np.linalg.norm(Hk)) * 1e-3:
            break
    P = Hk
    if np.all(np.isfinite(P)):
        for _ in range(3):
            BtPA = B.T @ P @ A
            P = A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
            P = 0.5 * (P + P.T)
    res = dare_residual(A, B, Q, R, P) if np.all(np.isfinite(P)) else math.inf
    if not res < tol * max(1.0, np.linalg.norm(P)):
        raise RiccatiError(res, it + 1)
    return P


def discretize(A, B, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretisation."""
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * dt)
    return E[:n, :n], E[:n, n:]


@dataclass(frozen=True)
class GainMatrix:
    K: np.ndarray
    P: np.ndarray
    spectral_radius: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.K)):
            raise ValueError("gain matrix has non-finite entries")
        if not self.spectral_radius < 1.0:
            raise ValueError(f"closed loop is not stable (spectral radius {self.spectral_radius:.4f})")

    def dumps(self) -> str:
        return np.array2string(self.K, precision=8, max_line_width=200)


def lqr_gain(A_d, B_d, Q, R) -> GainMatrix:
    A_d, B_d = np.atleast_2d(A_d), np.atleast_2d(B_d)
    R = np.atleast_2d(R)
    P = solve_dare(A_d, B_d, Q, R)
    K = np.linalg.solve(R + B_d.T @ P @ B_d, B_d.T @ P @ A_d)
    rho = float(np.max(np.abs(np.linalg.eigvals(A_d - B_d @ K))))
    return GainMatrix(K=K, P=P, spectral_radius=rho)


def lqi_gain(A_d, B_d, C_track, Q_aug, R, dt: float) -> GainMatrix:
    """LQR on the state augmented with ``z_{k+1} = z_k + dt (C x_k - r)``.

    The returned ``K`` is ``[K_x | K_i]``.
    """
    A_d, B_d = np.atleast_2d(A_d), np.atleast_2d(B_d)
    C = np.atleast_2d(C_track)
    n, m = B_d.shape
    p = C.shape[0]
    A_aug = np.zeros((n + p, n + p))
    A_aug[:n, :n] = A_d
    A_aug[n:, :n] = dt * C
    A_aug[n:, n:] = np.eye(p)
    B_aug = np.vstack([B_d, np.zeros((p, m))])
    return lqr_gain(A_aug, B_aug, Q_aug, R)


# --------------------------------------------------------------------------
# policies
# --------------------------------------------------------------------------


class Policy:
    """Maps a state to an input; may carry internal state updated by :meth:`act`."""

    def act(self, x) -> np.ndarray:
        raise NotImplementedError

    def clone(self) -> "Policy":
        return copy.deepcopy(self)


def propose(policy: Policy, x0, horizon: int, step: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Roll ``policy`` forward through ``step`` and record its inputs, ``(horizon, m)``."""
    pol = policy.clone()
    x = np.asarray(x0, dtype=float)
    out = []
    for _ in range(horizon):
        u = np.atleast_1d(np.asarray(pol.act(x), dtype=float))
        out.append(u)
        x = step(x, u)
    return np.array(out)


class Ancillary:
    """Adapter turning a policy plus a nominal model into an engine proposer."""

    def __init__(self, name: str, policy: Policy, step: Callable):
        self.name = name
        self.policy = policy
        self.step = step

    def __call__(self, x0, horizon: int) -> np.ndarray:
        return propose(self.policy, x0, horizon, self.step)

    def __repr__(self):
        return f"Ancillary({self.name!r})"


class ConstantPolicy(Policy):
    def __init__(self, u):
        self.u = np.atleast_1d(np.asarray(u, dtype=float))

    def act(self, x):
        return self.u.copy()


# --------------------------------------------------------------------------
# pendulum controllers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PendulumGains:
    Q: tuple = (100.0, 100.0, 1.0, 2.0)
    R: float = 1.0
    integral_weight: float = 10.0
    energy_gain: float = 3000.0
    accel_limit: float = 6.0
    arm_position_gain: float = 200.0
    arm_velocity_gain: float = 2.0
    kick: float = 2.0


def pendulum_error(x, theta_ref: float) -> np.ndarray:
    th, al, thd, ald = x
    return np.array([th - theta_ref, float(wrap_angle(al)), thd, ald])


class LQRPolicy(Policy):
    def __init__(self, gain: GainMatrix, theta_ref: float, u_limit: float):
        self.gain = gain
        self.theta_ref = theta_ref
        self.u_limit = u_limit

    def act(self, x):
        u = -(self.gain.K @ pendulum_error(x, self.theta_ref))
        return np.clip(u, -self.u_limit, self.u_limit)


class LQIPolicy(Policy):
    """LQR plus integral action on ``theta - theta_ref``.

    The integrator only runs while the pendulum is within ``active_angle`` of
    upright, so swinging up does not wind it up.
    """

    def __init__(self, gain: GainMatrix, theta_ref: float, u_limit: float, dt: float, active_angle: float = 0.2):
        self.gain = gain
        self.theta_ref = theta_ref
        self.u_limit = u_limit
        self.dt = dt
        self.active_angle = active_angle
        self.z = 0.0

    def act(self, x):
        e = pendulum_error(x, self.theta_ref)
        Kx, Ki = self.gain.K[:, :4], self.gain.K[:, 4]
        u = -(Kx @ e) - Ki * self.z
        self.observe(x)
        return np.clip(u, -self.u_limit, self.u_limit)

    def observe(self, x):
        """Advance the integrator on a measured state without producing an input."""
        if abs(float(wrap_angle(x[1]))) < self.active_angle:
            self.z += self.dt * (x[0] - self.theta_ref)


class EnergyPolicy(Policy):
    """Swing-up by pumping the pendulum's energy toward its upright value."""

    def __init__(self, params: PendulumParams, gains: "PendulumGains", theta_ref: float = 0.0):
        self.params = params
        self.gains = gains
        self.theta_ref = theta_ref

    def act(self, x):
        return np.array([ebc_input(x, self.params, self.gains, self.theta_ref)])


def ebc_input(x, params: PendulumParams, gains: "PendulumGains", theta_ref: float = 0.0) -> float:
    """Energy-pumping voltage.

    ``energy_gain * (E - E_up) * sign(alpha_dot cos alpha)`` is a pivot
    acceleration [m/s^2], saturated at ``accel_limit``. A weak PD pull of the
    arm toward ``theta_ref`` is added: left alone the arm spins up and the
    centrifugal load on the pendulum cancels the pumping. The inverse motor
    model turns the acceleration into a voltage.
    """
    u_limit = params.voltage_limit
    th, al, thd, ald = x
    al = float(wrap_angle(al))
    if abs(ald) < 1e-6 and abs(al) > math.pi - 0.1:
        return float(np.clip(gains.kick, -u_limit, u_limit))
    e = pendulum_swing_energy(x, params)
    pump = float(np.clip(gains.energy_gain * e * np.sign(ald * math.cos(al)), -gains.accel_limit, gains.accel_limit))
    lr = params.arm_length
    acc = pump - lr * (gains.arm_position_gain * (th - theta_ref) + gains.arm_velocity_gain * thd)
    a, _, _, _ = _pendulum_inertias(params.as_array())
    kt, rm = params.torque_constant, params.motor_resistance
    torque = a * acc / lr + params.arm_damping * thd
    return float(np.clip(rm / kt * torque + kt * thd, -u_limit, u_limit))


@dataclass(frozen=True)
class SwitchingConfig:
    alpha_catch: float = 0.2
    alpha_track: float = 0.05
    alpha_dot_track: float = 0.1

    def __post_init__(self):
        if not 0 < self.alpha_track < self.alpha_catch:
            raise ValueError("need 0 < alpha_track < alpha_catch")


def switching_branch(x, cfg: SwitchingConfig) -> str:
    al = abs(float(wrap_angle(x[1])))
    if al < cfg.alpha_track and abs(x[3]) < cfg.alpha_dot_track:
        return "lqi"
    if al < cfg.alpha_catch:
        return "lqr"
    return "ebc"


def switching_input(x, cfg: SwitchingConfig, controllers: dict) -> tuple[np.ndarray, str]:
    """Evaluate the three-branch law; ``controllers`` maps branch name to policy."""
    branch = switching_branch(x, cfg)
    return controllers[branch].act(x), branch


class SwitchingPolicy(Policy):
    def __init__(self, cfg: SwitchingConfig, lqr: Policy, lqi: Policy, ebc: Policy):
        self.cfg = cfg
        self.controllers = {"lqr": lqr, "lqi": lqi, "ebc": ebc}
        self.last_branch = None

    def act(self, x):
        u, self.last_branch = switching_input(x, self.cfg, self.controllers)
        # the LQI integrator follows the plant whether or not LQI is in charge
        if self.last_branch != "lqi":
            self.controllers["lqi"].observe(x)
        return u


@dataclass
class PendulumControllers:
    lqr: LQRPolicy
    lqi: LQIPolicy
    ebc: EnergyPolicy
    lqr_gain: GainMatrix
    lqi_gain: GainMatrix


def build_pendulum_controllers(
    params: PendulumParams, dt: float, theta_ref: float, gains: PendulumGains = PendulumGains()
) -> PendulumControllers:
    A, B = pendulum_linearize(params)
    Ad, Bd = discretize(A, B, dt)
    Q = np.diag(gains.Q)
    R = np.array([[gains.R]])
    g_lqr = lqr_gain(Ad, Bd, Q, R)
    Q_aug = np.diag([*gains.Q, gains.integral_weight])
    C = np.array([[1.0, 0.0, 0.0, 0.0]])
    g_lqi = lqi_gain(Ad, Bd, C, Q_aug, R, dt)
    u_lim = params.voltage_limit
    return PendulumControllers(
        lqr=LQRPolicy(g_lqr, theta_ref, u_lim),
        lqi=LQIPolicy(g_lqi, theta_ref, u_lim, dt),
        ebc=EnergyPolicy(params, gains, theta_ref),
        lqr_gain=g_lqr,
        lqi_gain=g_lqi,
    )


def pendulum_stepper(params: PendulumParams, dt: float):
    return lambda x, u: pendulum_step(x, float(u[0]), dt, params)


# --------------------------------------------------------------------------
# vessel primitives and velocity tracking
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PrimitiveSpec:
    kind: str
    thrust: float = 0.0  # per main thruster, go_slow / go_fast
    cruise_speed: float = 1.2
    approach_time: float = 2.0

    KINDS = ("go_slow", "go_fast", "braking", "go_to_goal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown primitive {self.kind!r}; expected one of {self.KINDS}")


def go_to_goal_reference(p, goal, cruise_speed: float, approach_time: float) -> np.ndarray:
    delta = np.asarray(goal, dtype=float) - np.asarray(p, dtype=float)
    dist = float(np.hypot(*delta))
    if dist < 1e-9:
        return np.zeros(2)
    speed = min(cruise_speed, dist / approach_time)
    return delta / dist * speed


def primitive_sequence(spec: PrimitiveSpec, x0, goal, horizon: int, dt: float) -> np.ndarray:
    """Thrust sequence ``(T, 4)`` for go_slow/go_fast; world velocity references ``(T, 2)`` otherwise.

    go_to_goal steps a kinematic point along its own references to get the
    predicted position at each horizon step.
    """
    if spec.kind in ("go_slow", "go_fast"):
        return np.tile([spec.thrust, spec.thrust, 0.0, 0.0], (horizon, 1))
    if spec.kind == "braking":
        return np.zeros((horizon, 2))
    p = np.asarray(x0, dtype=float)[:2].copy()
    refs = np.empty((horizon, 2))
    for t in range(horizon):
        refs[t] = go_to_goal_reference(p, goal, spec.cruise_speed, spec.approach_time)
        p = p + refs[t] * dt
    return refs


@dataclass(frozen=True)
class TrackerGains:
    Q: tuple = (1.0e6, 1.0e6, 1.0e3)
    R: float = 1.0
    heading_gain: float = 1.0
    max_yaw_rate: float = 0.6


class VelocityTracker:
    """Linear velocity tracker on the drag model, thrusts by pseudo-inverse allocation.

    ``tau = -K_v (nu - nu_ref)`` on body velocities ``nu = (u, v, r)``; the yaw
    rate reference turns the bow toward the commanded course. Pure feedback
    leaves a steady-state lag of ``D / (K_v + D)``, kept under 5% by the
    default weights.
    """

    def __init__(self, params: VesselParams, dt: float, gains: TrackerGains = TrackerGains()):
        self.params = params
        self.dt = dt
        self.gains = gains
        m = np.array(params.mass)
        d = np.array(params.drag)
        Ad = np.diag(m / (m + dt * d))
        Bd = np.diag(dt / (m + dt * d))
        self.gain = lqr_gain(Ad, Bd, np.diag(gains.Q), gains.R * np.eye(3))
        self.alloc_pinv = np.linalg.pinv(params.allocation)

    def body_reference(self, state, v_ref_world) -> np.ndarray:
        psi = state[2]
        c, s = math.cos(psi), math.sin(psi)
        vx, vy = v_ref_world
        u_ref = c * vx + s * vy
        v_ref = -s * vx + c * vy
        speed = math.hypot(vx, vy)
        if speed > 0.05:
            err = float(wrap_angle(math.atan2(vy, vx) - psi))
            r_ref = float(np.clip(self.gains.heading_gain * err, -self.gains.max_yaw_rate, self.gains.max_yaw_rate))
        else:
            r_ref = 0.0
        return np.array([u_ref, v_ref, r_ref])

    def thrust(self, state, nu_ref) -> np.ndarray:
        nu = np.asarray(state[3:6], dtype=float)
        tau = -self.gain.K @ (nu - np.asarray(nu_ref, dtype=float))
        return np.clip(self.alloc_pinv @ tau, self.params.u_min, self.params.u_max)

    def __call__(self, state, v_ref_world) -> np.ndarray:
        return self.thrust(state, self.body_reference(state, v_ref_world))


def velocity_tracking_input(v_ref, state, tracker: VelocityTracker) -> np.ndarray:
    """Thrusts tracking a world-frame velocity reference."""
    return tracker(state, v_ref)


class TrackedReferencePolicy(Policy):
    """Feeds a precomputed world-velocity reference sequence through the tracker."""

    def __init__(self, tracker: VelocityTracker, refs: np.ndarray):
        self.tracker = tracker
        self.refs = np.asarray(refs, dtype=float)
        self.t = 0

    def act(self, x):
        ref = self.refs[min(self.t, len(self.refs) - 1)]
        self.t += 1
        return self.tracker(x, ref)


class GoToGoalPolicy(Policy):
    """Closed-loop go-to-goal: reference recomputed from the current position."""

    def __init__(self, tracker: VelocityTracker, goal, cruise_speed: float = 1.2, approach_time: float = 2.0):
        self.tracker = tracker
        self.goal = np.asarray(goal, dtype=float)
        self.cruise_speed = cruise_speed
        self.approach_time = approach_time

    def act(self, x):
        ref = go_to_goal_reference(x[:2], self.goal, self.cruise_speed, self.approach_time)
        return self.tracker(x, ref)


def _make_tracked_proposal(step):
    def tracked(x0, horizon, dt, vp, K, alloc_pinv, u_min, u_max, goal, mode, cruise, approach, heading_gain, max_yaw):
        """Closed-loop tracker rollout; ``mode`` 0 holds zero velocity, 1 goes to ``goal``."""
        out = np.empty((horizon, 4))
        x, y, psi, u, v, r = x0[0], x0[1], x0[2], x0[3], x0[4], x0[5]
        for t in range(horizon):
            vx = 0.0
            vy = 0.0
            if mode == 1:
                dx = goal[0] - x
                dy = goal[1] - y
                dist = np.sqrt(dx * dx + dy * dy)
                if dist > 1e-9:
                    spd = min(cruise, dist / approach)
                    vx = dx / dist * spd
                    vy = dy / dist * spd
            c = np.cos(psi)
            s = np.sin(psi)
            u_ref = c * vx + s * vy
            v_ref = -s * vx + c * vy
            r_ref = 0.0
            if np.sqrt(vx * vx + vy * vy) > 0.05:
                err = np.arctan2(vy, vx) - psi
                err = np.mod(err + np.pi, 2.0 * np.pi) - np.pi
                r_ref = min(max(heading_gain * err, -max_yaw), max_yaw)
            e0 = u - u_ref
            e1 = v - v_ref
            e2 = r - r_ref
            tau0 = -(K[0, 0] * e0 + K[0, 1] * e1 + K[0, 2] * e2)
            tau1 = -(K[1, 0] * e0 + K[1, 1] * e1 + K[1, 2] * e2)
            tau2 = -(K[2, 0] * e0 + K[2, 1] * e1 + K[2, 2] * e2)
            for i in range(4):
                f = alloc_pinv[i, 0] * tau0 + alloc_pinv[i, 1] * tau1 + alloc_pinv[i, 2] * tau2
                out[t, i] = min(max(f, u_min[i]), u_max[i])
            x, y, psi, u, v, r = step(x, y, psi, u, v, r, out[t, 0], out[t, 1], out[t, 2], out[t, 3], dt, vp)
        return out

    return tracked


_tracked_proposal_np = _make_tracked_proposal(vessel_components)
_tracked_proposal_nb = _accel.njit(_make_tracked_proposal(vessel_components_jit))


def tracked_proposal(tracker: VelocityTracker, x0, horizon: int, dt: float, goal=None, cruise_speed=1.2, approach_time=2.0):
    """Thrust sequence from running the tracker against the nominal vessel model.

    ``goal=None`` tracks a zero velocity (braking); otherwise go-to-goal.
    Equivalent to :func:`propose` with the matching policy, but compiled.
    """
    kernel = _tracked_proposal_nb if _accel.USE_NUMBA else _tracked_proposal_np
    g = tracker.gains
    mode = 0 if goal is None else 1
    goal = np.zeros(2) if goal is None else np.asarray(goal, dtype=float)
    return kernel(
        np.asarray(x0, dtype=float), int(horizon), float(dt), tracker.params.as_array(), tracker.gain.K,
        tracker.alloc_pinv, tracker.params.u_min, tracker.params.u_max, goal, mode,
        float(cruise_speed), float(approach_time), float(g.heading_gain), float(g.max_yaw_rate),
    )


@dataclass
class VesselPrimitive:
    """A primitive that proposes a thrust sequence from the current vessel state."""

    spec: PrimitiveSpec
    tracker: VelocityTracker
    dt: float
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __call__(self, x0, horizon: int) -> np.ndarray:
        if self.spec.kind in ("go_slow", "go_fast"):
            return primitive_sequence(self.spec, x0, self.goal, horizon, self.dt)
        goal = None if self.spec.kind == "braking" else self.goal
        return tracked_proposal(self.tracker, x0, horizon, self.dt, goal, self.spec.cruise_speed, self.spec.approach_time)
