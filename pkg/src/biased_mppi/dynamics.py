"""Discrete-time plant models.

Furuta (rotary) pendulum
    state ``[theta, alpha, theta_dot, alpha_dot]``; ``alpha = 0`` is upright.
    Input is motor voltage; torque ``k_t (u - k_t theta_dot) / R_m``.
    Integrated with one RK4 step per control period.
Vessel (3 DOF)
    state ``[x, y, psi, u, v, r]``: world pose, body-frame velocities.
    Four thrusters: two aft surge thrusters at ``+-w`` lateral offset, a bow
    and a stern sway thruster at ``+-l``. Drag-implicit Euler step.
Unicycle
    state ``[x, y, heading]``, input ``(v, omega)``. Explicit Euler.

The ``*_rates``/``*_step`` helpers operate on unpacked components so the very
same function body runs on scalars inside ``@njit`` loops and on ``(K,)``
arrays in the numpy path.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import _accel
from .rng import substream


# --------------------------------------------------------------------------
# Furuta pendulum
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PendulumParams:
    """Rotary pendulum parameters (SI units).

    Defaults are the Quanser Qube-Servo 2 data-sheet values. ``rotor_inertia``
    is motor rotor plus hub; the arm itself is a uniform rod pivoting at one end.
    """

    arm_mass: float = 0.095  # kg
    arm_length: float = 0.085  # m
    pendulum_mass: float = 0.024  # kg
    pendulum_length: float = 0.129  # m
    rotor_inertia: float = 4.6e-6  # kg m^2
    arm_damping: float = 0.0015  # N m s / rad
    pendulum_damping: float = 5.0e-5  # N m s / rad
    motor_resistance: float = 8.4  # ohm
    torque_constant: float = 0.042  # N m / A (= back-emf V s / rad)
    gravity: float = 9.81  # m / s^2
    voltage_limit: float = 10.0  # V

    def __post_init__(self):
        for name in ("arm_mass", "arm_length", "pendulum_mass", "pendulum_length", "gravity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_dict(cls, d: dict) -> "PendulumParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown pendulum parameters: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# index layout of PendulumParams.as_array()
P_MR, P_LR, P_MP, P_LP, P_JR, P_DR, P_DP, P_RM, P_KT, P_G, P_VMAX = range(11)

PERTURBED_FIELDS = (
    "arm_mass",
    "arm_length",
    "pendulum_mass",
    "pendulum_length",
    "rotor_inertia",
    "arm_damping",
    "pendulum_damping",
    "motor_resistance",
    "torque_constant",
)


def _pendulum_inertias(p):
    a = p[P_JR] + p[P_MR] * p[P_LR] ** 2 / 3.0 + p[P_MP] * p[P_LR] ** 2
    b = p[P_MP] * p[P_LP] ** 2 / 3.0
    c = 0.5 * p[P_MP] * p[P_LR] * p[P_LP]
    d = 0.5 * p[P_MP] * p[P_G] * p[P_LP]
    return a, b, c, d


def pendulum_rates(al, thd, ald, u, p):
    """Accelerations ``(theta_ddot, alpha_ddot)`` from the Euler-Lagrange equations."""
    a = p[P_JR] + p[P_MR] * p[P_LR] ** 2 / 3.0 + p[P_MP] * p[P_LR] ** 2
    b = p[P_MP] * p[P_LP] ** 2 / 3.0
    c = 0.5 * p[P_MP] * p[P_LR] * p[P_LP]
    d = 0.5 * p[P_MP] * p[P_G] * p[P_LP]
    sa = np.sin(al)
    ca = np.cos(al)
    tau = p[P_KT] * (u - p[P_KT] * thd) / p[P_RM]
    m11 = a + b * sa * sa
    m12 = c * ca
    f1 = tau - p[P_DR] * thd - 2.0 * b * sa * ca * thd * ald + c * sa * ald * ald
    f2 = -p[P_DP] * ald + b * sa * ca * thd * thd + d * sa
    det = m11 * b - m12 * m12
    thdd = (b * f1 - m12 * f2) / det
    aldd = (m11 * f2 - m12 * f1) / det
    return thdd, aldd


def _make_rk4(rates):
    def rk4(th, al, thd, ald, u, dt, p):
        k1a, k1b = rates(al, thd, ald, u, p)
        h = 0.5 * dt
        k2a, k2b = rates(al + h * ald, thd + h * k1a, ald + h * k1b, u, p)
        k3a, k3b = rates(al + h * (ald + h * k1b), thd + h * k2a, ald + h * k2b, u, p)
        k4a, k4b = rates(al + dt * (ald + h * k2b), thd + dt * k3a, ald + dt * k3b, u, p)
        # position increments reuse the RK4 velocity stages
        th_n = th + dt / 6.0 * (thd + 2.0 * (thd + h * k1a) + 2.0 * (thd + h * k2a) + (thd + dt * k3a))
        al_n = al + dt / 6.0 * (ald + 2.0 * (ald + h * k1b) + 2.0 * (ald + h * k2b) + (ald + dt * k3b))
        thd_n = thd + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        ald_n = ald + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        return th_n, al_n, thd_n, ald_n

    return rk4


pendulum_rates_jit = _accel.njit(pendulum_rates)
pendulum_rk4 = _make_rk4(pendulum_rates)
pendulum_rk4_jit = _accel.njit(_make_rk4(pendulum_rates_jit))


def pendulum_step(x, u: float, dt: float, params: PendulumParams) -> np.ndarray:
    """One RK4 step; the voltage is clamped to the actuator limit."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite pendulum state {x}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p = params.as_array()
    u = min(max(float(u), -p[P_VMAX]), p[P_VMAX])
    return np.array(pendulum_rk4(x[0], x[1], x[2], x[3], u, dt, p))


def pendulum_linearize(params: PendulumParams) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time ``(A, B)`` at the upright equilibrium, ``u = 0``."""
    a, b, c, d = _pendulum_inertias(params.as_array())
    kt, rm = params.torque_constant, params.motor_resistance
    det = a * b - c * c
    minv = np.array([[b, -c], [-c, a]]) / det
    # generalized forces, linear part: f1 = (kt/Rm) u - (kt^2/Rm + Dr) thd ; f2 = d al - Dp ald
    df_dx = np.array(
        [
            [0.0, 0.0, -(kt * kt / rm + params.arm_damping), 0.0],
            [0.0, d, 0.0, -params.pendulum_damping],
        ]
    )
    df_du = np.array([[kt / rm], [0.0]])
    A = np.zeros((4, 4))
    A[0, 2] = A[1, 3] = 1.0
    A[2:, :] = minv @ df_dx
    B = np.zeros((4, 1))
    B[2:, :] = minv @ df_du
    return A, B


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    w = np.mod(np.asarray(a) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w) if np.ndim(w) else (np.pi if w == -np.pi else float(w))


def pendulum_energy(x, params: PendulumParams) -> float:
    """Total mechanical energy, zero at upright rest."""
    _, al, thd, ald = np.asarray(x, dtype=float)
    a, b, c, d = _pendulum_inertias(params.as_array())
    sa = math.sin(al)
    kin = 0.5 * (a + b * sa * sa) * thd * thd + c * math.cos(al) * thd * ald + 0.5 * b * ald * ald
    return kin + d * (math.cos(al) - 1.0)


def pendulum_swing_energy(x, params: PendulumParams) -> float:
    """Energy of the pendulum link alone in the arm frame, zero at upright rest."""
    _, al, _, ald = np.asarray(x, dtype=float)
    _, b, _, d = _pendulum_inertias(params.as_array())
    return 0.5 * b * ald * ald + d * (math.cos(al) - 1.0)


def perturb_params(params: PendulumParams, std: float, seed: int, run: int = 0) -> PendulumParams:
    """Multiply every physical parameter by an independent ``1 + N(0, std)``.

    Gravity and the voltage limit are left alone. The draw depends only on
    ``(seed, run)`` so every controller sees the same plant for a given run.
    """
    if std == 0:
        return params
    gen = substream(seed, run, 0x9E7)
    scale = 1.0 + std * gen.standard_normal(len(PERTURBED_FIELDS))
    return replace(params, **{name: getattr(params, name) * s for name, s in zip(PERTURBED_FIELDS, scale)})


# --------------------------------------------------------------------------
# Vessel
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VesselParams:
    """Quarter-scale surface vessel, linear drag, four fixed thrusters."""

    mass: tuple = (12.0, 12.0, 1.0)  # surge, sway [kg]; yaw [kg m^2]
    drag: tuple = (6.0, 8.0, 1.2)  # N s/m, N s/m, N m s
    main_offset: float = 0.3  # lateral offset of the aft surge thrusters [m]
    side_offset: float = 0.5  # longitudinal offset of the bow/stern sway thrusters [m]
    thrust_max: tuple = (12.0, 12.0, 3.0, 3.0)  # N
    thrust_min: tuple = (-6.0, -6.0, -3.0, -3.0)  # N

    def __post_init__(self):
        if any(m <= 0 for m in self.mass):
            raise ValueError(f"vessel mass/inertia must be positive, got {self.mass}")
        if np.linalg.matrix_rank(self.allocation) != 3:
            raise ValueError("thruster allocation matrix must have rank 3")

    @property
    def allocation(self) -> np.ndarray:
        """Maps thrusts ``[f_port, f_stbd, f_bow, f_stern]`` to ``[X, Y, N]``."""
        w, l = self.main_offset, self.side_offset
        return np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [-w, w, l, -l]])

    def as_array(self) -> np.ndarray:
        return np.array([*self.mass, *self.drag, self.main_offset, self.side_offset], dtype=float)

    @property
    def u_min(self) -> np.ndarray:
        return np.array(self.thrust_min, dtype=float)

    @property
    def u_max(self) -> np.ndarray:
        return np.array(self.thrust_max, dtype=float)

    @classmethod
    def from_dict(cls, d: dict) -> "VesselParams":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def vessel_components(x, y, psi, u, v, r, f1, f2, f3, f4, dt, vp):
    """Body velocities first (drag treated implicitly), then pose from the new velocities."""
    X = f1 + f2
    Y = f3 + f4
    N = vp[6] * (f2 - f1) + vp[7] * (f3 - f4)
    u_n = (vp[0] * u + dt * X) / (vp[0] + dt * vp[3])
    v_n = (vp[1] * v + dt * Y) / (vp[1] + dt * vp[4])
    r_n = (vp[2] * r + dt * N) / (vp[2] + dt * vp[5])
    c = np.cos(psi)
    s = np.sin(psi)
    x_n = x + dt * (c * u_n - s * v_n)
    y_n = y + dt * (s * u_n + c * v_n)
    psi_n = psi + dt * r_n
    return x_n, y_n, psi_n, u_n, v_n, r_n


vessel_components_jit = _accel.njit(vessel_components)


def vessel_step(state, u, dt: float, params: VesselParams) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    f = np.clip(np.asarray(u, dtype=float), params.u_min, params.u_max)
    return np.array(vessel_components(*s, *f, dt, params.as_array()))


def body_to_world(state) -> np.ndarray:
    """World-frame planar velocity of a vessel state."""
    _, _, psi, u, v, _ = state
    return np.array([math.cos(psi) * u - math.sin(psi) * v, math.sin(psi) * u + math.cos(psi) * v])


# --------------------------------------------------------------------------
# Unicycle and constant-velocity propagation
# --------------------------------------------------------------------------


def unicycle_components(x, y, h, v, w, dt):
    return x + v * np.cos(h) * dt, y + v * np.sin(h) * dt, h + w * dt


unicycle_components_jit = _accel.njit(unicycle_components)


def unicycle_step(state, u, dt: float) -> np.ndarray:
    x, y, h = np.asarray(state, dtype=float)
    v, w = np.asarray(u, dtype=float)
    return np.array(unicycle_components(x, y, h, v, w, dt))


def constant_velocity_propagate(p, v, t):
    return np.asarray(p, dtype=float) + np.asarray(v, dtype=float) * t
