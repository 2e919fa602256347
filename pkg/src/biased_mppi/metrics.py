"""Episode scoring, aggregation over runs, and variant x K sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .costs import (
    GoalObstacleCostConfig,
    MultiAgentCostConfig,
    PendulumCostConfig,
    goal_obstacle_cost,
    multi_agent_cost,
    pendulum_running_cost,
)
from .scenarios import EpisodeLog, ScenarioConfig, from_dict, run_episode
from .scenarios.pendulum import is_upright
from .scenarios.vessels import corridor_map

OUTCOMES = ("success", "deadlock", "collision", "timeout")


@dataclass
class RunMetrics:
    scenario: str
    variant: str
    samples: int
    seed: int
    run: int
    outcome: str
    total_cost: float
    total_effort: float
    collisions: int
    rule_violation: bool
    rule_violation_steps: int
    time_to_arrival: list  # seconds per agent, None where the agent never arrived
    distance_traveled: list  # metres per agent

    @property
    def mean_arrival(self) -> Optional[float]:
        t = [a for a in self.time_to_arrival if a is not None]
        return float(np.mean(t)) if t and len(t) == len(self.time_to_arrival) else None

    @property
    def mean_distance(self) -> float:
        return float(np.mean(self.distance_traveled)) if self.distance_traveled else 0.0


def _path_length(xy: np.ndarray) -> float:
    if len(xy) < 2:
        return 0.0
    return float(np.sum(np.hypot(np.diff(xy[:, 0]), np.diff(xy[:, 1]))))


def score_episode(log: EpisodeLog, cfg: ScenarioConfig) -> RunMetrics:
    """Metrics of one episode; a pure function of the log and the config.

    Total cost sums the stage cost over every logged state including the
    initial one. Effort sums absolute command values over channels and steps.
    """
    n_agents = len(log.initial)
    effort = 0.0
    for r in log.records:
        effort += float(np.sum(np.abs(np.asarray(r.commands, dtype=float))))

    arrival: list = [None] * n_agents
    arrival_step: list = [None] * n_agents
    for step, ev, agent in log.events("goal_reached"):
        if 0 <= agent < n_agents and arrival[agent] is None:
            arrival[agent] = (step + 1) * log.dt
            arrival_step[agent] = step
    collision_steps = sorted({s for s, _, _ in log.events("collision")})
    violation_steps = sorted({s for s, _, _ in log.events("rule_violation")})
    deadlock = bool(log.events("deadlock"))

    total = 0.0
    if cfg.scenario == "pendulum":
        cc = PendulumCostConfig(**cfg.cost)
        for x in log.states(0):
            total += pendulum_running_cost(x, cc)
    elif cfg.scenario == "braking":
        cc = GoalObstacleCostConfig(
            goal=tuple(cfg.cost.get("goal", (8.0, 0.0))),
            radius=float(cfg.cost.get("radius", 0.5)),
            penalty=float(cfg.cost.get("penalty", 100.0)),
        )
        traj = log.states(0)
        boxes = [None] + [r.diagnostics.get("box") for r in log.records]
        for x, b in zip(traj, boxes):
            total += goal_obstacle_cost(x[:2], b, cc)
    else:
        cc = MultiAgentCostConfig(**cfg.cost)
        corridor = corridor_map(cfg)
        goals = np.asarray(log.meta["goals"], dtype=float)
        active = np.ones(n_agents)
        all_states = [np.asarray(log.initial, dtype=float)] + [np.asarray(r.states, dtype=float) for r in log.records]
        for k, s in enumerate(all_states):
            total += float(np.sum(multi_agent_cost(s, goals, cc, active, corridor)))
            for i in range(n_agents):
                if arrival_step[i] is not None and arrival_step[i] == k - 1:
                    active[i] = 0.0

    distance = []
    for i in range(n_agents):
        traj = log.states(i)
        if arrival_step[i] is not None:
            traj = traj[: arrival_step[i] + 2]
        distance.append(_path_length(traj[:, :2]) if cfg.scenario != "pendulum" else 0.0)

    if collision_steps:
        outcome = "collision"
    elif deadlock:
        outcome = "deadlock"
    elif cfg.scenario == "pendulum":
        outcome = "success" if log.records and is_upright(log.states(0)[-1], cfg) else "timeout"
    elif n_agents and all(a is not None for a in arrival):
        outcome = "success"
    else:
        outcome = "timeout"

    return RunMetrics(
        scenario=log.scenario,
        variant=log.variant,
        samples=log.samples,
        seed=log.seed,
        run=log.run,
        outcome=outcome,
        total_cost=total,
        total_effort=effort,
        collisions=len(collision_steps),
        rule_violation=bool(violation_steps),
        rule_violation_steps=len(violation_steps),
        time_to_arrival=arrival,
        distance_traveled=distance if cfg.scenario != "pendulum" else [],
    )


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Stat:
    count: int
    mean: float
    std: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    single: bool  # n == 1, std reported as 0

    @classmethod
    def of(cls, values: Iterable[float]) -> "Stat":
        v = np.sort(np.asarray([x for x in values if x is not None], dtype=float))
        if len(v) == 0:
            nan = math.nan
            return cls(0, nan, nan, nan, nan, nan, nan, nan, False)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        return cls(len(v), float(np.mean(v)), std, float(med), float(q1), float(q3), float(v[0]), float(v[-1]), len(v) == 1)


@dataclass
class Summary:
    runs: int
    outcomes: dict
    collisions: int
    rule_violation_experiments: int
    total_cost: Stat
    total_effort: Stat
    time_to_arrival: Stat
    distance_traveled: Stat
    filtered: int = 0  # runs dropped by a paired filter

    def row(self) -> dict:
        out = {
            "runs": self.runs,
            **{o: self.outcomes.get(o, 0) for o in OUTCOMES},
            "collisions": self.collisions,
            "rule_violation_experiments": self.rule_violation_experiments,
        }
        for name in ("total_cost", "total_effort", "time_to_arrival", "distance_traveled"):
            s = getattr(self, name)
            for f in ("count", "mean", "std", "median", "q1", "q3", "min", "max"):
                out[f"{name}_{f}"] = getattr(s, f)
        return out


def aggregate(runs: Sequence[RunMetrics], keep: Optional[set] = None) -> Summary:
    """Summary statistics over ``runs``.

    Outcome tallies always use every run. Arrival time and distance are taken
    over successful runs, restricted to ``keep`` (a set of ``(seed, run)``)
    when a paired comparison is wanted.
    """
    outcomes = {o: 0 for o in OUTCOMES}
    for r in runs:
        outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
    ok = [r for r in runs if r.outcome == "success"]
    if keep is not None:
        ok = [r for r in ok if (r.seed, r.run) in keep]
    n_success = outcomes["success"]
    return Summary(
        runs=len(runs),
        outcomes=outcomes,
        collisions=sum(r.collisions for r in runs),
        rule_violation_experiments=sum(1 for r in runs if r.rule_violation),
        total_cost=Stat.of(r.total_cost for r in runs),
        total_effort=Stat.of(r.total_effort for r in runs),
        time_to_arrival=Stat.of(r.mean_arrival for r in ok),
        distance_traveled=Stat.of(r.mean_distance for r in ok),
        filtered=n_success - len(ok),
    )


def paired_keys(*groups: Sequence[RunMetrics]) -> set:
    """``(seed, run)`` keys that succeeded in every group."""
    sets = [{(r.seed, r.run) for r in g if r.outcome == "success"} for g in groups]
    return set.intersection(*sets) if sets else set()


# --------------------------------------------------------------------------
# running episodes
# --------------------------------------------------------------------------


def _episode_job(args):
    raw, seed, run, variant = args
    cfg = from_dict(raw)
    log = run_episode(cfg, seed, run, variant)
    return log, score_episode(log, cfg)


def run_episodes(
    cfg: ScenarioConfig, variant: str, seed: int, runs: Sequence[int], jobs: int = 1
) -> list[tuple[EpisodeLog, RunMetrics]]:
    """Run episodes for each run index; results come back in run order whatever ``jobs`` is."""
    tasks = [(cfg.raw, seed, r, variant) for r in runs]
    if jobs <= 1 or len(tasks) <= 1:
        return [_episode_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_episode_job, tasks))


@dataclass
class SweepResult:
    rows: list  # one dict per (variant, K)
    runs: dict = field(default_factory=dict)  # (variant, K) -> list[RunMetrics]


def sweep(
    cfg: ScenarioConfig,
    variants: Sequence[str],
    k_list: Sequence[int],
    seed: int,
    n_runs: int,
    jobs: int = 1,
    paired: bool = True,
    on_logs: Optional[Callable] = None,
) -> SweepResult:
    """Cross product variants x K x runs; one summary row per (variant, K).

    Plant randomisation and initial conditions depend on ``(seed, run)`` only,
    so every variant meets the same episodes. With ``paired`` the arrival and
    distance statistics at each K use only runs that all variants solved.
    """
    result = SweepResult(rows=[])
    for K in k_list:
        sub = cfg.with_overrides(samples=int(K))
        for v in variants:
            out = run_episodes(sub, v, seed, range(n_runs), jobs)
            if on_logs is not None:
                on_logs(v, int(K), [log for log, _ in out])
            result.runs[(v, int(K))] = [m for _, m in out]
    for K in k_list:
        groups = [result.runs[(v, int(K))] for v in variants]
        keep = paired_keys(*groups) if paired else None
        for v in variants:
            s = aggregate(result.runs[(v, int(K))], keep)
            result.rows.append({"scenario": cfg.scenario, "variant": v, "samples": int(K), **s.row()})
    return result


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

RUN_COLUMNS = (
    "scenario",
    "variant",
    "samples",
    "seed",
    "run",
    "outcome",
    "total_cost",
    "total_effort",
    "collisions",
    "rule_violation",
    "rule_violation_steps",
    "time_to_arrival",
    "distance_traveled",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def runs_csv(runs: Sequence[RunMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in runs:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in RUN_COLUMNS])
    return buf.getvalue()


def rows_csv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    cols = list(rows[0].keys())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()
