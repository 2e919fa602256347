import math
from dataclasses import replace

import numpy as np
import pytest

from biased_mppi import dynamics as dyn
from biased_mppi.dynamics import PendulumParams, VesselParams


P = PendulumParams()


@pytest.mark.parametrize("x", [[0.0, 0.0, 0.0, 0.0], [0.0, math.pi, 0.0, 0.0], [1.3, 0.0, 0.0, 0.0]])
def test_equilibria_fixed(x):
    y = np.array(x)
    for _ in range(100):
        y = dyn.pendulum_step(y, 0.0, 0.02, P)
    assert np.max(np.abs(y - x)) < 1e-12


def test_falls_toward_hanging():
    x = np.array([0.0, math.pi - 0.1, 0.0, 0.0])
    x = dyn.pendulum_step(x, 0.0, 1e-3, P)
    assert x[3] > 0  # alpha accelerates toward pi
    for _ in range(50):
        x = dyn.pendulum_step(x, 0.0, 1e-3, P)
    assert abs(x[1] - math.pi) < 0.1


def test_upright_is_unstable():
    x = np.array([0.0, 0.01, 0.0, 0.0])
    for _ in range(100):
        x = dyn.pendulum_step(x, 0.0, 0.01, P)
    assert abs(x[1]) > 0.1


def test_energy_conserved_without_damping():
    free = replace(P, arm_damping=0.0, pendulum_damping=0.0, torque_constant=1e-12)
    x = np.array([0.2, 2.0, 3.0, -1.0])
    e0 = dyn.pendulum_energy(x, free)
    for _ in range(5000):
        x = dyn.pendulum_step(x, 0.0, 1e-3, free)
    assert abs(dyn.pendulum_energy(x, free) - e0) / abs(e0) < 1e-3


def test_energy_reference_points():
    assert dyn.pendulum_energy([0, 0, 0, 0], P) == 0.0
    hanging = dyn.pendulum_energy([0, math.pi, 0, 0], P)
    assert hanging == pytest.approx(-2 * P.pendulum_mass * P.gravity * P.pendulum_length / 2, rel=1e-12)


def test_linearisation_matches_finite_differences():
    A, B = dyn.pendulum_linearize(P)
    dt = 1e-4
    eps = 1e-6
    x0 = np.zeros(4)
    J = np.zeros((4, 5))
    for i in range(5):
        d = np.zeros(5)
        d[i] = eps
        plus = dyn.pendulum_step(x0 + d[:4], d[4], dt, P)
        minus = dyn.pendulum_step(x0 - d[:4], -d[4], dt, P)
        J[:, i] = (plus - minus) / (2 * eps)
    Ad = np.eye(4) + A * dt
    Bd = B[:, 0] * dt
    assert np.max(np.abs(J[:, :4] - Ad)) < 1e-4
    assert np.max(np.abs(J[:, 4] - Bd)) < 1e-4


def test_linearisation_structure():
    A0, _ = dyn.pendulum_linearize(replace(P, gravity=1e-300))
    A, _ = dyn.pendulum_linearize(P)
    assert abs(A0[3, 1]) < 1e-250 and A[3, 1] > 0
    A2, _ = dyn.pendulum_linearize(replace(P, pendulum_mass=2 * P.pendulum_mass))
    a, b, c, d = dyn._pendulum_inertias(P.as_array())
    a2, b2, c2, d2 = dyn._pendulum_inertias(replace(P, pendulum_mass=2 * P.pendulum_mass).as_array())
    assert d2 == pytest.approx(2 * d)
    # the alpha-row stiffness is d * a / (a b - c^2); recompute with the doubled mass
    assert A2[3, 1] == pytest.approx(d2 * a2 / (a2 * b2 - c2 * c2), rel=1e-12)


def test_voltage_clamped():
    x = np.zeros(4)
    assert np.array_equal(dyn.pendulum_step(x, 100.0, 0.02, P), dyn.pendulum_step(x, P.voltage_limit, 0.02, P))


def test_step_rejects_bad_input():
    with pytest.raises(ValueError):
        dyn.pendulum_step([np.nan, 0, 0, 0], 0.0, 0.02, P)
    with pytest.raises(ValueError):
        dyn.pendulum_step([0, 0, 0, 0], 0.0, 0.0, P)
    with pytest.raises(ValueError):
        PendulumParams(arm_mass=0.0)


def test_wrap_angle():
    assert dyn.wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert dyn.wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert np.allclose(dyn.wrap_angle(np.array([0.1, 2 * math.pi + 0.1])), [0.1, 0.1])


def test_perturb_params():
    assert dyn.perturb_params(P, 0.0, 3) == P
    assert dyn.perturb_params(P, 0.05, 3, 1) == dyn.perturb_params(P, 0.05, 3, 1)
    assert dyn.perturb_params(P, 0.05, 3, 1) != dyn.perturb_params(P, 0.05, 3, 2)
    q = dyn.perturb_params(P, 0.05, 3, 1)
    assert q.gravity == P.gravity and q.voltage_limit == P.voltage_limit


def test_perturbation_spread():
    ratios = np.array(
        [dyn.perturb_params(P, 0.05, 0, r).arm_mass / P.arm_mass for r in range(10_000)]
    )
    assert 0.045 <= ratios.std(ddof=1) <= 0.055
    assert abs(ratios.mean() - 1.0) < 0.002


# vessel ----------------------------------------------------------------------

V = VesselParams()


def test_vessel_rest():
    s = np.array([1.0, 2.0, 0.3, 0.0, 0.0, 0.0])
    assert np.array_equal(dyn.vessel_step(s, np.zeros(4), 0.1, V), s)


def test_vessel_pure_surge():
    s = np.zeros(6)
    for _ in range(100):
        s = dyn.vessel_step(s, [2.0, 2.0, 0.0, 0.0], 0.1, V)
    assert s[0] > 0 and s[1] == 0.0 and s[2] == 0.0 and s[4] == 0.0 and s[5] == 0.0


def test_vessel_surge_steady_state():
    s = np.zeros(6)
    F = 3.0
    for _ in range(600):
        s = dyn.vessel_step(s, [F, F, 0.0, 0.0], 0.1, V)
    assert s[3] == pytest.approx(2 * F / V.drag[0], rel=0.01)


def test_vessel_thrust_clamped():
    hi = dyn.vessel_step(np.zeros(6), [1e6, 1e6, 0, 0], 0.1, V)
    lim = dyn.vessel_step(np.zeros(6), [V.u_max[0], V.u_max[1], 0, 0], 0.1, V)
    assert np.array_equal(hi, lim)


def test_body_to_world():
    s = np.array([0, 0, math.pi / 2, 1.0, 0.0, 0.0])
    assert np.allclose(dyn.body_to_world(s), [0.0, 1.0])


# unicycle ------------------------------------------------------------------


@pytest.mark.parametrize(
    "x,u,want",
    [
        ([0, 0, 0], [1, 0], [0.1, 0, 0]),
        ([0, 0, math.pi / 2], [1, 0], [0, 0.1, math.pi / 2]),
        ([2, 3, 1], [0, 1.5], [2, 3, 1.15]),
    ],
)
def test_unicycle(x, u, want):
    assert np.allclose(dyn.unicycle_step(x, u, 0.1), want, atol=1e-15)


@pytest.mark.parametrize("p,v,t,want", [((0, 0), (1, 1), 0.5, (0.5, 0.5)), ((3, 4), (0, 0), 2.0, (3, 4)), ((3, 4), (1, 2), 0.0, (3, 4))])
def test_constant_velocity(p, v, t, want):
    assert np.allclose(dyn.constant_velocity_propagate(np.array(p, float), np.array(v, float), t), want)
