"""Sampling-based MPC loop with ancillary-controller sample injection.

One planning step:

1. shift the previous plan one step forward (repeat-last padding),
2. ask every ancillary controller for an open-loop input sequence,
3. build the batch: ancillary proposals verbatim, then Gaussian
   perturbations of the shifted plan,
4. clamp to actuator bounds and roll every sample out through the model,
5. softmax-weight the samples by cost and average them into the new plan,
6. nudge the temperature so roughly ``eta_min..eta_max`` samples matter.

With ``J = 0`` this is the classical sampler (weights ``exp(-S/lambda)``);
with ``J > 0`` the same weights are used, which is valid for an arbitrary
sampling distribution at the price of a bias toward that distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from . import rng

GAUSSIAN = -1


class RolloutError(RuntimeError):
    """A sample produced a non-finite state or cost."""

    def __init__(self, sample: int, message: str):
        super().__init__(f"sample {sample}: {message}")
        self.sample = sample


class RolloutModel(Protocol):
    """What the planner needs from a plant model plus its cost."""

    u_min: np.ndarray
    u_max: np.ndarray

    def rollout(self, x0: np.ndarray, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``inputs`` is ``(K, T, m)``; returns ``(trajectories (K, T+1, n), costs (K,))``."""
        ...


Proposer = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class PlanConfig:
    samples: int
    horizon: int
    dt: float
    sigma: tuple[float, ...]
    ancillary: int = 0
    lambda0: float = 1.0
    eta_min: float = 2.0
    eta_max: float = 5.0
    seed: int = 0
    lambda_decrease: float = 0.9
    lambda_increase: float = 1.2

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(float(s) for s in np.atleast_1d(self.sigma)))
        if self.samples < 1:
            raise ValueError(f"samples must be positive, got {self.samples}")
        if not 0 <= self.ancillary <= self.samples:
            raise ValueError(f"need 0 <= ancillary <= samples, got J={self.ancillary}, K={self.samples}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if any(s <= 0 for s in self.sigma):
            raise ValueError(f"sampling std must be strictly positive, got {self.sigma}")
        if self.lambda0 <= 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not 0 < self.eta_min < self.eta_max <= self.samples:
            raise ValueError(
                f"need 0 < eta_min < eta_max <= samples, got [{self.eta_min}, {self.eta_max}] with K={self.samples}"
            )

    @property
    def n_inputs(self) -> int:
        return len(self.sigma)

    @classmethod
    def from_covariance(cls, covariance, **kwargs) -> "PlanConfig":
        """Build from a diagonal sampling covariance (variances, not stds)."""
        return cls(sigma=tuple(np.sqrt(np.atleast_1d(np.asarray(covariance, dtype=float)))), **kwargs)


@dataclass(frozen=True)
class PlannerState:
    nominal: np.ndarray
    lam: float
    iteration: int = 0
    seed: int = 0

    @classmethod
    def initial(cls, cfg: PlanConfig, nominal: Optional[np.ndarray] = None) -> "PlannerState":
        if nominal is None:
            nominal = np.zeros((cfg.horizon, cfg.n_inputs))
        nominal = np.array(nominal, dtype=float).reshape(cfg.horizon, cfg.n_inputs)
        return cls(nominal=nominal, lam=float(cfg.lambda0), iteration=0, seed=cfg.seed)


@dataclass(frozen=True)
class WeightedBatch:
    weights: np.ndarray
    eta: float
    min_cost: float


@dataclass(frozen=True)
class Rollout:
    sample: np.ndarray
    trajectory: np.ndarray
    cost: float
    source: int  # ancillary index, or GAUSSIAN


@dataclass
class RolloutBatch:
    samples: np.ndarray  # (K, T, m)
    trajectories: np.ndarray  # (K, T+1, n)
    costs: np.ndarray  # (K,)
    sources: np.ndarray  # (K,)

    def __len__(self):
        return len(self.costs)

    def __getitem__(self, k: int) -> Rollout:
        return Rollout(self.samples[k], self.trajectories[k], float(self.costs[k]), int(self.sources[k]))


@dataclass
class StepResult:
    command: np.ndarray
    state: PlannerState
    diagnostics: dict = field(default_factory=dict)
    batch: Optional[RolloutBatch] = None


def shift_plan(state: PlannerState) -> np.ndarray:
    """Drop the first input and repeat the last one."""
    u = state.nominal
    return np.concatenate([u[1:], u[-1:]], axis=0)


def draw_samples(
    state: PlannerState,
    cfg: PlanConfig,
    ancillary: Sequence[np.ndarray],
    mean: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample batch ``(K, T, m)`` and its source tags.

    Rows ``0..J-1`` are the ancillary sequences, untouched. Rows ``J..K-1``
    are ``mean`` (the shifted plan by default) plus Gaussian noise keyed by
    ``(seed, iteration, k, t, channel)``.
    """
    if len(ancillary) != cfg.ancillary:
        raise ValueError(f"expected {cfg.ancillary} ancillary sequences, got {len(ancillary)}")
    if mean is None:
        mean = shift_plan(state)
    T, m = cfg.horizon, cfg.n_inputs
    J, K = cfg.ancillary, cfg.samples
    out = np.empty((K, T, m))
    for j, seq in enumerate(ancillary):
        seq = np.asarray(seq, dtype=float)
        if seq.shape != (T, m):
            raise ValueError(f"ancillary sequence {j} has shape {seq.shape}, expected {(T, m)}")
        out[j] = seq
    noise = rng.standard_normal(state.seed, state.iteration, J, K - J, T, m)
    out[J:] = mean[None] + noise * np.asarray(cfg.sigma)
    sources = np.full(K, GAUSSIAN, dtype=np.int64)
    sources[:J] = np.arange(J)
    return out, sources


def compute_weights(costs, lam: float) -> WeightedBatch:
    costs = np.asarray(costs, dtype=float)
    if not np.all(np.isfinite(costs)):
        bad = int(np.flatnonzero(~np.isfinite(costs))[0])
        raise RolloutError(bad, f"non-finite cost {costs[bad]}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    baseline = float(costs.min())
    w = np.exp(-(costs - baseline) / lam)
    eta = float(w.sum())
    return WeightedBatch(weights=w / eta, eta=eta, min_cost=baseline)


def update_plan(rollouts, batch: WeightedBatch) -> np.ndarray:
    """Weighted average of the sampled input sequences."""
    if isinstance(rollouts, RolloutBatch):
        samples = rollouts.samples
    elif isinstance(rollouts, np.ndarray):
        samples = rollouts
    else:
        samples = np.stack([r.sample for r in rollouts])
    if len(samples) != len(batch.weights):
        raise ValueError(f"{len(samples)} rollouts but {len(batch.weights)} weights")
    return np.tensordot(batch.weights, samples, axes=(0, 0))


def update_lambda(state: PlannerState, eta: float, cfg: PlanConfig) -> float:
    if eta > cfg.eta_max:
        return cfg.lambda_decrease * state.lam
    if eta < cfg.eta_min:
        return cfg.lambda_increase * state.lam
    return state.lam


def plan_step(
    state: PlannerState,
    x0,
    model: RolloutModel,
    ancillary: Sequence[Proposer],
    cfg: PlanConfig,
    mean_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    keep_batch: bool = False,
) -> StepResult:
    """Run one full planning iteration from state ``x0``.

    ``mean_fn`` may rewrite the shifted plan before Gaussian sampling (used by
    the joint multi-agent planner to centre other agents' channels on their
    predicted behaviour).
    """
    x0 = np.asarray(x0, dtype=float)
    mean = shift_plan(state)
    if mean_fn is not None:
        mean = mean_fn(mean)
    proposals = [np.asarray(p(x0, cfg.horizon), dtype=float) for p in ancillary]
    samples, sources = draw_samples(state, cfg, proposals, mean=mean)
    np.clip(samples, model.u_min, model.u_max, out=samples)

    trajectories, costs = model.rollout(x0, samples)
    bad = ~np.isfinite(costs)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise RolloutError(k, f"non-finite cost {costs[k]} (source {int(sources[k])})")
    weighted = compute_weights(costs, state.lam)
    plan = update_plan(samples, weighted)
    new_lam = update_lambda(state, weighted.eta, cfg)

    J = cfg.ancillary
    w = weighted.weights
    diagnostics = {
        "iteration": state.iteration,
        "lambda": state.lam,
        "eta": weighted.eta,
        "min_cost": weighted.min_cost,
        "command": plan[0].copy(),
        "ancillary_weight": w[:J].copy(),
        "ancillary_best_cost": costs[:J].copy(),
        "gaussian_best_cost": float(costs[J:].min()) if J < len(costs) else float("nan"),
        "next_lambda": new_lam,
    }
    new_state = replace(state, nominal=plan, lam=new_lam, iteration=state.iteration + 1)
    batch = RolloutBatch(samples, trajectories, costs, sources) if keep_batch else None
    return StepResult(command=plan[0].copy(), state=new_state, diagnostics=diagnostics, batch=batch)


class Planner:
    """Stateful convenience wrapper: owns a :class:`PlannerState` and steps it."""

    def __init__(
        self,
        cfg: PlanConfig,
        model: RolloutModel,
        ancillary: Sequence[Proposer] = (),
        nominal: Optional[np.ndarray] = None,
    ):
        if len(ancillary) != cfg.ancillary:
            raise ValueError(f"config expects {cfg.ancillary} ancillary controllers, got {len(ancillary)}")
        self.cfg = cfg
        self.model = model
        self.ancillary = list(ancillary)
        self.state = PlannerState.initial(cfg, nominal)

    def step(self, x0, mean_fn=None, keep_batch=False) -> StepResult:
        result = plan_step(self.state, x0, self.model, self.ancillary, self.cfg, mean_fn=mean_fn, keep_batch=keep_batch)
        self.state = result.state
        return result
