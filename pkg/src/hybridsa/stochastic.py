"""Stochastic sample-path generation with conditional-mean bookkeeping.

Flow increments realize fhat_{k+1} = f_k + v_{k+1} with f_k a flow-map
selection, so the per-step conditional mean stays on the flow map's graph;
jump outcomes realize ghat_{j+1} = g_j + w_{j+1} against a decaying
envelope. Validators check the step-size/noise compatibility conditions
(h summability against the moment order, or exponential summability for
sub-Gaussian noise), and the Monte Carlo harness aggregates the windowed
defect statistic across seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .simulate import (
    Horizon,
    JumpPolicy,
    PREFER_JUMP,
    SimulationResult,
    StepSchedule,
    _simulate,
    benaim_sup,
)
from .system import HybridSystem


class NoiseConfigError(ValueError):
    pass


def _stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Counter-keyed generator: independent per (seed, tag, index)."""
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), (tag << 56) | index]))


@dataclass
class NoiseModel:
    """Flow-increment noise v with an envelope gamma for the moment bounds.

    bounded(radius): |v| <= radius always, so both admissibility branches
    hold with a constant envelope. gaussian(sigma): isotropic normal,
    truncated at 8*sigma to keep desk-scale paths finite (an approximation
    of the sub-Gaussian branch; gamma = sigma^2/2 is the analytic
    certificate, spot-checked empirically).
    """

    kind: str  # "bounded" | "gaussian" | "custom"
    radius: float = 0.0
    sigma: float = 0.0
    p: float = 1.0
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    gamma: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind == "bounded" and self.radius < 0:
            raise NoiseConfigError("radius must be nonnegative")
        if self.kind == "gaussian" and self.sigma < 0:
            raise NoiseConfigError("sigma must be nonnegative")
        if self.gamma is None:
            if self.kind == "bounded":
                self.gamma = lambda _r, rad=self.radius, p=self.p: rad ** (2 * p)
            elif self.kind == "gaussian":
                self.gamma = lambda _r, s=self.sigma: s * s / 2.0
            else:
                self.gamma = lambda _r: 0.0

    @classmethod
    def bounded(cls, radius: float, p: float = 1.0) -> "NoiseModel":
        return cls("bounded", radius=radius, p=p)

    @classmethod
    def gaussian(cls, sigma: float, p: float = 1.0) -> "NoiseModel":
        return cls("gaussian", sigma=sigma, p=p)

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls("bounded", radius=0.0)

    @property
    def is_null(self) -> bool:
        return (self.kind == "bounded" and self.radius == 0.0) or (
            self.kind == "gaussian" and self.sigma == 0.0
        )

    def sample(self, rng: np.random.Generator, d: int) -> np.ndarray:
        if self.kind == "bounded":
            if self.radius == 0.0:
                return np.zeros(d)
            u = rng.normal(size=d)
            n = np.linalg.norm(u)
            if n == 0.0:
                return np.zeros(d)
            r = self.radius * rng.uniform() ** (1.0 / d)
            return (r / n) * u
        if self.kind == "gaussian":
            v = rng.normal(scale=self.sigma, size=d) if self.sigma > 0 else np.zeros(d)
            cap = 8.0 * self.sigma
            n = np.linalg.norm(v)
            if cap > 0 and n > cap:
                v = v * (cap / n)
            return v
        return np.atleast_1d(np.asarray(self.sampler(rng, d), dtype=np.float64))

    def describe(self) -> dict:
        out = {"kind": self.kind, "p": self.p}
        if self.kind == "bounded":
            out["radius"] = self.radius
        if self.kind == "gaussian":
            out["sigma"] = self.sigma
        return out


@dataclass
class JumpNoiseModel:
    """Jump-outcome noise w clipped to the envelope rho_{j+1} * gamma(|x|)."""

    rho: Callable[[int], float]
    mode: str  # "summable" | "decay"
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    gamma: Callable[[float], float] = lambda r: 1.0

    def envelope(self, j_next: int, x: np.ndarray) -> float:
        rho = self.rho(j_next)
        if rho <= 0:
            raise NoiseConfigError(f"rho_{j_next} must be positive")
        return rho * float(self.gamma(float(np.linalg.norm(x))))

    def sample(self, rng: np.random.Generator, j_next: int, x: np.ndarray) -> np.ndarray:
        d = x.size
        if self.sampler is not None:
            w = np.atleast_1d(np.asarray(self.sampler(rng, d), dtype=np.float64))
        else:
            w = rng.normal(size=d)
        bound = self.envelope(j_next, x)
        n = float(np.linalg.norm(w))
        if n > bound:
            w = w * (bound / n) if n > 0 else np.zeros(d)
        return w


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str

    def __bool__(self):
        return self.accepted


def validate_moment_branch(schedule: StepSchedule, p: float) -> Verdict:
    """Accept iff sum h_{k+1}^{1+p} converges (analytic for power schedules)."""
    if p < 1:
        raise NoiseConfigError("moment order p must be >= 1")
    if schedule.kind == "power":
        ok = schedule.a * (1 + p) > 1
        return Verdict(ok, f"power({schedule.a}): a*(1+p) = {schedule.a * (1 + p):.3g} "
                           f"{'>' if ok else '<='} 1")
    if schedule.kind == "constant":
        return Verdict(False, "constant steps: terms do not vanish")
    n = schedule.max_k or 4096
    half = max(2, n // 2)
    s1 = sum(schedule.h(k) ** (1 + p) for k in range(1, half + 1))
    s2 = sum(schedule.h(k) ** (1 + p) for k in range(1, n + 1))
    ok = (s2 - s1) < 1e-3 * max(s1, 1e-12)
    return Verdict(bool(ok), f"partial-sum increment {s2 - s1:.3g} on [{half},{n}]")


def validate_subgaussian_branch(schedule: StepSchedule, c_list: Sequence[float]) -> Verdict:
    """Accept iff sum exp(-c/h_{k+1}) converges for every requested c."""
    if not c_list:
        raise NoiseConfigError("need at least one c > 0")
    if any(c <= 0 for c in c_list):
        raise NoiseConfigError("every c must be positive")
    if schedule.kind == "power":
        return Verdict(True, f"power({schedule.a}): exp(-c*k^a) is summable for all c > 0")
    if schedule.kind == "constant":
        return Verdict(False, "constant steps: exp(-c/h) terms are constant")
    n = schedule.max_k or 4096
    half = max(2, n // 2)
    worst = None
    for c in c_list:
        s1 = sum(math.exp(-c / schedule.h(k)) for k in range(1, half + 1))
        s2 = sum(math.exp(-c / schedule.h(k)) for k in range(1, n + 1))
        if (s2 - s1) >= 1e-6 * max(s1, 1e-12):
            worst = c
            break
    if worst is None:
        return Verdict(True, f"partial sums stabilized for all c in {list(c_list)}")
    return Verdict(False, f"partial sums still growing at c={worst}")


def jump_noise_schedule(
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]],
    rho: Callable[[int], float],
    mode: str,
    gamma: Callable[[float], float] = lambda r: 1.0,
    check_horizon: int = 512,
) -> JumpNoiseModel:
    """Wrap a sampler so realized jump noise obeys the selected rho branch.

    mode "summable" requires sum rho_j < inf; mode "decay" requires
    rho_j -> 0. Both are checked heuristically on [1, check_horizon].
    """
    if mode not in ("summable", "decay"):
        raise NoiseConfigError(f"unknown mode {mode!r}")
    vals = np.array([rho(j) for j in range(1, check_horizon + 1)])
    if np.any(vals <= 0):
        raise NoiseConfigError("rho must be positive")
    if mode == "summable":
        half = check_horizon // 2
        inc = vals[half:].sum()
        if inc >= 1e-3 * max(vals[:half].sum(), 1e-12):
            raise NoiseConfigError(
                f"rho tail sum {inc:.3g} on [{half},{check_horizon}] does not vanish; "
                "not summable"
            )
    else:
        if vals[-1] >= 0.5 * vals[0] or vals[-1] > vals[: check_horizon // 4].min():
            raise NoiseConfigError("rho does not decay to zero")
    return JumpNoiseModel(rho=rho, mode=mode, sampler=sampler, gamma=gamma)


@dataclass
class RandomRun:
    """A seeded stochastic run; identical (config, seed) reproduces it bitwise."""

    seed: int
    result: SimulationResult
    v_trace: np.ndarray
    w_trace: np.ndarray
    noise: NoiseModel
    jump_noise: Optional[JumpNoiseModel] = None


def noisy_simulate(
    system: HybridSystem,
    x0,
    schedule: StepSchedule,
    noise: NoiseModel,
    seed: int,
    horizon: Horizon,
    jump_noise: Optional[JumpNoiseModel] = None,
    policy: JumpPolicy = PREFER_JUMP,
    *,
    jump_rule: Optional[Callable[[np.ndarray, int, np.random.Generator], np.ndarray]] = None,
    post_jump_project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    guard_eps: float = 1e-9,
    system_name: str = "",
) -> RandomRun:
    """Stochastic run: fhat = f + v per flow step, ghat = g + w per jump.

    Noise streams are counter-keyed per step index from the root seed, so
    runs are reproducible and independent across steps. Null noise reduces
    bitwise to the deterministic engine.
    """
    v_rows: list[np.ndarray] = []
    w_rows: list[np.ndarray] = []

    flow_noise = None
    if not noise.is_null:

        def flow_noise(k: int, x: np.ndarray) -> np.ndarray:
            v = noise.sample(_stream(seed, 1, k), x.size)
            v_rows.append(v)
            return v

    jn_hook = None
    if jump_noise is not None:

        def jn_hook(j: int, x: np.ndarray, x_plus: np.ndarray) -> np.ndarray:
            w = jump_noise.sample(_stream(seed, 2, j), j + 1, x)
            out = x_plus + w
            if post_jump_project is not None:
                out = np.atleast_1d(np.asarray(post_jump_project(out), dtype=np.float64))
            w_rows.append(out - x_plus)
            return out

    rule = None
    if jump_rule is not None:

        def rule(x: np.ndarray, j: int) -> np.ndarray:
            return jump_rule(x, j, _stream(seed, 2, j))

    result = _simulate(
        system, x0, schedule, policy, horizon,
        flow_noise=flow_noise, jump_noise=jn_hook, jump_rule=rule,
        guard_eps=guard_eps, seed=seed, system_name=system_name or system.name,
    )
    d = result.d
    v_trace = np.vstack(v_rows) if v_rows else np.empty((0, d))
    w_trace = np.vstack(w_rows) if w_rows else np.empty((0, d))
    return RandomRun(seed, result, v_trace, w_trace, noise, jump_noise)


@dataclass(frozen=True)
class DecayTable:
    checkpoints: tuple[int, ...]
    per_seed: np.ndarray  # (n_seeds, n_checkpoints)
    seeds: tuple[int, ...]
    fraction_decreasing: float
    decaying: bool

    def aggregate(self) -> np.ndarray:
        return self.per_seed.mean(axis=0)


def empirical_benaim_decay(
    runs: Sequence[RandomRun], T: float, checkpoints: Sequence[int],
    required_fraction: float = 0.9,
) -> DecayTable:
    """Windowed defect statistic per seed at the checkpoints, with a trend verdict.

    Verdict: the statistic at the last checkpoint is below the first for at
    least ``required_fraction`` of the seeds.
    """
    ks = tuple(int(k) for k in checkpoints)
    if len(ks) < 2:
        raise ValueError("need at least two checkpoints")
    rows = []
    for run in runs:
        rows.append([benaim_sup(run.result, T, k) for k in ks])
    table = np.asarray(rows)
    dec = np.sum(table[:, -1] < table[:, 0]) if table.size else 0
    frac = float(dec) / max(1, table.shape[0])
    return DecayTable(
        checkpoints=ks,
        per_seed=table,
        seeds=tuple(r.seed for r in runs),
        fraction_decreasing=frac,
        decaying=frac >= required_fraction,
    )


__all__ = [
    "NoiseModel", "JumpNoiseModel", "RandomRun", "DecayTable", "Verdict",
    "noisy_simulate", "validate_moment_branch", "validate_subgaussian_branch",
    "jump_noise_schedule", "empirical_benaim_decay", "NoiseConfigError",
]
