"""Closed-loop experiments. :func:`run_episode` dispatches on the config's scenario id."""

from typing import Optional

from .braking import run_braking_episode
from .config import SCENARIOS, VARIANTS, ConfigError, PlanSpec, ScenarioConfig, from_dict, load_config
from .log import EpisodeLog, StepRecord
from .pendulum import run_pendulum_episode
from .vessels import run_corridor_episode, run_crossing_episode

_RUNNERS = {
    "pendulum": run_pendulum_episode,
    "crossing": run_crossing_episode,
    "corridor": run_corridor_episode,
    "braking": run_braking_episode,
}


def run_episode(cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps: Optional[int] = None) -> EpisodeLog:
    return _RUNNERS[cfg.scenario](cfg, seed, run, variant, steps)


__all__ = [
    "SCENARIOS",
    "VARIANTS",
    "ConfigError",
    "EpisodeLog",
    "PlanSpec",
    "ScenarioConfig",
    "StepRecord",
    "from_dict",
    "load_config",
    "run_braking_episode",
    "run_corridor_episode",
    "run_crossing_episode",
    "run_episode",
    "run_pendulum_episode",
]
