import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from biased_mppi.costs import (
    CorridorMap,
    GoalObstacleCostConfig,
    MultiAgentCostConfig,
    PendulumCostConfig,
    goal_obstacle_cost,
    multi_agent_cost,
    pendulum_running_cost,
    rollout_cost,
)


@pytest.mark.parametrize(
    "x,want",
    [
        ([1.0, 0.0, 0.0, 0.0], 0.0),
        ([0.0, math.pi, 0.0, 0.0], 100 * (1 + math.pi**2)),
        ([1.0, 0.0, 1.0, 1.0], 3.0),
    ],
)
def test_pendulum_cost(x, want):
    assert pendulum_running_cost(x) == pytest.approx(want, abs=1e-9)


def test_pendulum_cost_hanging_value():
    assert pendulum_running_cost([0.0, math.pi, 0.0, 0.0]) == pytest.approx(1086.9604, abs=1e-4)


angle = st.floats(-10, 10)


@given(angle, angle, angle, angle)
def test_pendulum_cost_nonnegative(th, al, thd, ald):
    assert pendulum_running_cost([th, al, thd, ald]) >= 0


def test_pendulum_cost_zero_only_at_reference():
    assert pendulum_running_cost([1.0, 0.0, 0.0, 0.0]) == 0
    assert pendulum_running_cost([1.0, 0.0, 0.0, 1e-3]) > 0


def test_pendulum_cost_custom_reference():
    assert pendulum_running_cost([0.0, 0.0, 0.0, 0.0], PendulumCostConfig(theta_ref=0.0)) == 0


@pytest.mark.parametrize(
    "robot,goal,box,want",
    [
        ((0, 0), (1, 0), (5, 5), 1.0),
        ((0, 0), (0, 0), (0.3, 0), 100.0),
        ((0, 0), (3, 4), (0.5, 0), 5.0),
        ((0, 0), (3, 4), None, 5.0),
    ],
)
def test_goal_obstacle_cost(robot, goal, box, want):
    assert goal_obstacle_cost(robot, box, GoalObstacleCostConfig(goal=goal)) == pytest.approx(want, abs=1e-12)


def vessel(x, y, psi, speed=0.0):
    return [x, y, psi, speed, 0.0, 0.0]


def test_multi_agent_at_goals():
    s = [vessel(0, 0, 0), vessel(10, 0, 0)]
    assert np.all(multi_agent_cost(s, [[0, 0], [10, 0]]) == 0)


def test_multi_agent_collision_symmetric():
    s = [vessel(0, 0, 0), vessel(0.5, 0, math.pi)]
    cost, flags = multi_agent_cost(s, [[0, 0], [0.5, 0]], MultiAgentCostConfig(safe_distance=1.0), return_flags=True)
    assert np.all(cost >= 2000.0)
    assert np.all(flags & 1)


def test_right_of_way_predicate():
    b = (3 * math.cos(-math.pi / 4), 3 * math.sin(-math.pi / 4))
    s = [vessel(0, 0, 0.0, 1.0), vessel(b[0], b[1], math.pi / 2, 1.0)]
    goals = [[0, 0], list(b)]
    cost, flags = multi_agent_cost(s, goals, MultiAgentCostConfig(row_radius=5.0), return_flags=True)
    assert flags[0] & 2 and not flags[1] & 2
    assert cost[0] == pytest.approx(50.0)
    assert cost[1] == 0.0


def test_right_of_way_needs_speed_and_range():
    b = (3 * math.cos(-math.pi / 4), 3 * math.sin(-math.pi / 4))
    slow = [vessel(0, 0, 0.0, 0.2), vessel(b[0], b[1], math.pi / 2, 1.0)]
    _, flags = multi_agent_cost(slow, [[0, 0], list(b)], MultiAgentCostConfig(row_radius=5.0), return_flags=True)
    assert not flags[0] & 2
    far = [vessel(0, 0, 0.0, 1.0), vessel(6, -6, math.pi / 2, 1.0)]
    _, flags = multi_agent_cost(far, [[0, 0], [6, -6]], MultiAgentCostConfig(row_radius=5.0), return_flags=True)
    assert not flags[0] & 2


def test_port_side_no_penalty():
    s = [vessel(0, 0, 0.0, 1.0), vessel(2, 2, -math.pi / 2, 1.0)]
    _, flags = multi_agent_cost(s, [[0, 0], [2, 2]], return_flags=True)
    assert not flags[0] & 2


def test_inactive_agents_ignored():
    s = [vessel(0, 0, 0), vessel(0.5, 0, math.pi)]
    cost = multi_agent_cost(s, [[5, 0], [0.5, 0]], active=[1.0, 0.0])
    assert cost[0] == pytest.approx(5.0)
    assert cost[1] == 0.0


def test_corridor_walls():
    corridor = CorridorMap(width=10.0, narrows=((15.0, 22.0, 4.0),))
    assert corridor.half_width(10.0) == 5.0 and corridor.half_width(18.0) == 2.0
    inside = multi_agent_cost([vessel(18, 0, 0)], [[18, 0]], corridor=corridor)
    _, flags = multi_agent_cost([vessel(18, 2.5, 0)], [[18, 2.5]], corridor=corridor, return_flags=True)
    assert inside[0] == 0.0
    assert flags[0] & 4


def test_cost_config_validation():
    with pytest.raises(ValueError):
        MultiAgentCostConfig(row_penalty=-1.0)
    with pytest.raises(ValueError):
        MultiAgentCostConfig(safe_distance=0.0)


def test_rollout_cost_convention():
    traj = np.arange(5.0)
    assert rollout_cost(traj, lambda x: 0.0) == 0.0
    assert rollout_cost(traj, lambda x: 2.5) == 2.5 * 4
    assert rollout_cost(traj, lambda x: x) == 1 + 2 + 3 + 4
