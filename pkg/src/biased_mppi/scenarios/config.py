"""Scenario configuration files.

Configs are TOML. The bundled defaults live in ``biased_mppi/configs``; a user
file is merged over the default for its scenario (tables merge key by key,
everything else is replaced), and command-line overrides go on top of that.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SCENARIOS = ("pendulum", "crossing", "corridor", "braking")
VARIANTS = ("vanilla", "biased", "switching")


class ConfigError(ValueError):
    """Bad or missing scenario configuration."""


@dataclass(frozen=True)
class PlanSpec:
    samples: int
    horizon: int
    covariance: tuple
    lambda0: float = 1.0
    eta_min: float = 5.0
    eta_max: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    rate_hz: float
    dt: float
    steps: int
    plan: PlanSpec
    ancillary: tuple = ()
    perturbation_std: float = 0.0
    agents: tuple = ()
    obstacle: Optional[dict] = None
    cost: dict = field(default_factory=dict)
    plant: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.steps <= 0:
            raise ConfigError(f"episode length must be positive, got {self.steps}")
        if self.rate_hz <= 0 or self.dt <= 0 or abs(self.rate_hz * self.dt - 1.0) > 1e-9:
            raise ConfigError(f"rate_hz * dt must be 1 (got {self.rate_hz} Hz, dt={self.dt})")
        if self.plan.samples < 1 or self.plan.horizon < 1:
            raise ConfigError("plan.samples and plan.horizon must be positive")
        if self.perturbation_std < 0:
            raise ConfigError("perturbation_std must be non-negative")

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with flag-level overrides; ``samples`` reaches into the plan table."""
        raw = copy.deepcopy(self.raw)
        for k, v in kw.items():
            if v is None:
                continue
            if k == "samples":
                raw.setdefault("plan", {})["samples"] = int(v)
            else:
                raw[k] = v
        return from_dict(raw)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self.raw).encode()).hexdigest()[:16]


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key {key!r} in {where}")
    return d[key]


def from_dict(raw: dict) -> ScenarioConfig:
    try:
        plan = _require(raw, "plan", "config")
        spec = PlanSpec(
            samples=int(_require(plan, "samples", "[plan]")),
            horizon=int(_require(plan, "horizon", "[plan]")),
            covariance=tuple(float(c) for c in _require(plan, "covariance", "[plan]")),
            lambda0=float(plan.get("lambda0", 1.0)),
            eta_min=float(plan.get("eta_min", 5.0)),
            eta_max=float(plan.get("eta_max", 10.0)),
        )
        rate = float(_require(raw, "rate_hz", "config"))
        return ScenarioConfig(
            scenario=str(_require(raw, "scenario", "config")),
            rate_hz=rate,
            dt=float(raw.get("dt", 1.0 / rate)),
            steps=int(_require(raw, "steps", "config")),
            plan=spec,
            ancillary=tuple(raw.get("ancillary", {}).get("names", ())),
            perturbation_std=float(raw.get("perturbation_std", 0.0)),
            agents=tuple(raw.get("agents", ())),
            obstacle=raw.get("obstacle"),
            cost=dict(raw.get("cost", {})),
            plant=dict(raw.get("plant", {})),
            extra=dict(raw.get("extra", {})),
            raw=copy.deepcopy(raw),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def default_path(scenario: str) -> Path:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    return Path(str(resources.files("biased_mppi") / "configs" / f"{scenario}.toml"))


def read_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(scenario: Optional[str] = None, path=None) -> ScenarioConfig:
    """Default config for ``scenario``, with the file at ``path`` merged over it.

    If only ``path`` is given its ``scenario`` key picks the default.
    """
    user = read_toml(path) if path is not None else {}
    name = scenario or user.get("scenario")
    if name is None:
        raise ConfigError("no scenario given and the config file does not name one")
    if user.get("scenario", name) != name:
        raise ConfigError(f"config file is for {user['scenario']!r}, not {name!r}")
    return from_dict(_merge(read_toml(default_path(name)), user))


def dumps(raw: dict) -> str:
    """Stable JSON rendering of a raw config (used for digests and log headers)."""
    return json.dumps(raw, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(o: Any):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def to_toml(raw: dict) -> str:
    """Minimal TOML writer for config dicts (scalars, lists, tables, arrays of tables)."""

    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        raise TypeError(f"cannot write {type(v)} to TOML")

    lines = []

    def table(prefix, d):
        scalars = {k: v for k, v in d.items() if not isinstance(v, dict) and not _is_table_list(v)}
        for k, v in scalars.items():
            lines.append(f"{k} = {val(v)}")
        for k, v in d.items():
            name = f"{prefix}.{k}" if prefix else k
            if isinstance(v, dict):
                lines.append("")
                lines.append(f"[{name}]")
                table(name, v)
            elif _is_table_list(v):
                for item in v:
                    lines.append("")
                    lines.append(f"[[{name}]]")
                    table(name, item)

    table("", raw)
    return "\n".join(lines).lstrip("\n") + "\n"


def _is_table_list(v) -> bool:
    return isinstance(v, (list, tuple)) and len(v) > 0 and all(isinstance(x, dict) for x in v)
