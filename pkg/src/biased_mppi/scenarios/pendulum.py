"""Pendulum swing-up: planner on the nominal model, plant with perturbed parameters."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .. import controllers as ctl
from ..costs import PendulumCostConfig
from ..dynamics import PendulumParams, pendulum_step, perturb_params, wrap_angle
from ..engine import PlanConfig, Planner
from ..models import PendulumModel
from ..rng import derive_seed
from .config import ConfigError, ScenarioConfig
from .log import EpisodeLog, StepRecord


def nominal_params(cfg: ScenarioConfig) -> PendulumParams:
    try:
        return PendulumParams.from_dict(cfg.plant) if cfg.plant else PendulumParams()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[plant]: {exc}") from exc


def _gains(cfg: ScenarioConfig) -> ctl.PendulumGains:
    g = dict(cfg.extra.get("gains", {}))
    if "Q" in g:
        g["Q"] = tuple(g["Q"])
    try:
        return ctl.PendulumGains(**g)
    except TypeError as exc:
        raise ConfigError(f"[extra.gains]: {exc}") from exc


def switching_config(cfg: ScenarioConfig) -> ctl.SwitchingConfig:
    return ctl.SwitchingConfig(**cfg.extra.get("switching", {}))


def is_upright(x, cfg: ScenarioConfig) -> bool:
    return (
        abs(float(wrap_angle(x[1]))) < cfg.extra.get("success_alpha", 0.05)
        and abs(x[3]) < cfg.extra.get("success_alpha_dot", 0.1)
    )


def run_pendulum_episode(
    cfg: ScenarioConfig, seed: int, run: int = 0, variant: str = "biased", steps: Optional[int] = None
) -> EpisodeLog:
    """Swing up from ``extra.initial_state``; ``variant`` is vanilla, biased or switching."""
    if variant not in ("vanilla", "biased", "switching"):
        raise ConfigError(f"pendulum has no variant {variant!r}")
    steps = cfg.steps if steps is None else int(steps)
    dt = cfg.dt
    nominal = nominal_params(cfg)
    plant = perturb_params(nominal, cfg.perturbation_std, seed, run)
    cost = PendulumCostConfig(**cfg.cost)
    controllers = ctl.build_pendulum_controllers(nominal, dt, cost.theta_ref, _gains(cfg))
    stepper = ctl.pendulum_stepper(nominal, dt)

    names = list(cfg.ancillary) if variant == "biased" else []
    policies = {"lqr": controllers.lqr, "lqi": controllers.lqi, "ebc": controllers.ebc}
    unknown = [n for n in names if n not in policies]
    if unknown:
        raise ConfigError(f"unknown pendulum ancillary controllers {unknown}")
    planner = None
    switching = None
    if variant == "switching":
        switching = ctl.SwitchingPolicy(switching_config(cfg), controllers.lqr, controllers.lqi, controllers.ebc)
    else:
        plan = PlanConfig.from_covariance(
            cfg.plan.covariance,
            samples=cfg.plan.samples,
            horizon=cfg.plan.horizon,
            dt=dt,
            ancillary=len(names),
            lambda0=cfg.plan.lambda0,
            eta_min=cfg.plan.eta_min,
            eta_max=cfg.plan.eta_max,
            seed=derive_seed(seed, run, 0),
        )
        ancillary = [ctl.Ancillary(n, policies[n], stepper) for n in names]
        planner = Planner(plan, PendulumModel(nominal, dt, cost), ancillary)

    x = np.asarray(cfg.extra.get("initial_state", [0.0, np.pi, 0.0, 0.0]), dtype=float)
    log = EpisodeLog(
        scenario="pendulum",
        variant=variant,
        samples=cfg.plan.samples if planner else 0,
        seed=seed,
        run=run,
        dt=dt,
        initial=[x.tolist()],
        meta={"plant": plant.to_dict(), "ancillary": names, "config_digest": cfg.digest()},
    )
    for k in range(steps):
        if switching is not None:
            u = switching.act(x)
            diag = {"mode": switching.last_branch}
        else:
            res = planner.step(x)
            u = res.command
            d = res.diagnostics
            diag = {
                "lambda": d["lambda"],
                "eta": d["eta"],
                "ancillary_weight": dict(zip(names, d["ancillary_weight"].tolist())),
            }
            controllers.lqi.observe(x)
        x = pendulum_step(x, float(u[0]), dt, plant)
        log.append(StepRecord(step=k, t=(k + 1) * dt, states=[x.tolist()], commands=[np.atleast_1d(u).tolist()], diagnostics=diag))
    log.outcome = "success" if steps > 0 and is_upright(x, cfg) else ("timeout" if steps > 0 else None)
    return log
