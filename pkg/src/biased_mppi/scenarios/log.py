"""Per-step episode records, serialised as JSON lines (header line first)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EVENTS = ("collision", "rule_violation", "goal_reached", "deadlock", "obstacle_injected")


def _plain(o):
    if isinstance(o, np.ndarray):
        return [_plain(x) for x in o.tolist()]
    if isinstance(o, (list, tuple)):
        return [_plain(x) for x in o]
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


@dataclass
class StepRecord:
    step: int
    t: float
    states: list  # per agent
    commands: list  # per agent
    diagnostics: dict = field(default_factory=dict)
    events: list = field(default_factory=list)  # (name, agent) pairs

    def to_dict(self) -> dict:
        return _plain(
            {
                "step": self.step,
                "t": self.t,
                "states": self.states,
                "commands": self.commands,
                "diagnostics": self.diagnostics,
                "events": [list(e) for e in self.events],
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(
            step=int(d["step"]),
            t=float(d["t"]),
            states=d["states"],
            commands=d["commands"],
            diagnostics=d.get("diagnostics", {}),
            events=[tuple(e) for e in d.get("events", [])],
        )


@dataclass
class EpisodeLog:
    scenario: str
    variant: str
    samples: int
    seed: int
    run: int
    dt: float
    initial: list = field(default_factory=list)  # per-agent state before step 0
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    outcome: Optional[str] = None

    def append(self, record: StepRecord):
        if self.records and record.step <= self.records[-1].step:
            raise ValueError(f"step {record.step} does not follow {self.records[-1].step}")
        if self.records and not record.t > self.records[-1].t:
            raise ValueError("timestamps must increase")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def states(self, agent: int = 0) -> np.ndarray:
        """Executed trajectory of ``agent`` including the initial state, ``(N+1, n)``."""
        rows = [self.initial[agent]] + [r.states[agent] for r in self.records]
        return np.array(rows, dtype=float)

    def commands(self, agent: int = 0) -> np.ndarray:
        return np.array([r.commands[agent] for r in self.records], dtype=float).reshape(len(self.records), -1)

    def events(self, name: Optional[str] = None) -> list:
        """``(step, event, agent)`` triples, optionally filtered by event name."""
        out = []
        for r in self.records:
            for ev, agent in r.events:
                if name is None or ev == name:
                    out.append((r.step, ev, agent))
        return out

    def header(self) -> dict:
        return _plain(
            {
                "scenario": self.scenario,
                "variant": self.variant,
                "samples": self.samples,
                "seed": self.seed,
                "run": self.run,
                "dt": self.dt,
                "initial": self.initial,
                "outcome": self.outcome,
                "meta": self.meta,
            }
        )

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "EpisodeLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty log")
        h = json.loads(lines[0])
        log = cls(
            scenario=h["scenario"],
            variant=h["variant"],
            samples=int(h["samples"]),
            seed=int(h["seed"]),
            run=int(h["run"]),
            dt=float(h["dt"]),
            initial=h.get("initial", []),
            meta=h.get("meta", {}),
            outcome=h.get("outcome"),
        )
        for ln in lines[1:]:
            log.append(StepRecord.from_dict(json.loads(ln)))
        return log

    @classmethod
    def read(cls, path) -> "EpisodeLog":
        with open(path) as fh:
            return cls.loads(fh.read())
