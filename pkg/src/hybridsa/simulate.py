"""Vanishing-step-size simulation of hybrid systems on sequence domains.

The engine advances k with Euler flow steps x+ = x + h_{k+1} * fhat and j
with jump-map selections, records the per-step vectors fhat (applied
increment over h) and fsel (flow-map selection), and exposes the windowed
defect statistic sup_n |sum h_{i+1} (fhat_{i+1} - f_i)| whose decay
certifies a run as an asymptotic simulation, plus the domain compression,
piecewise-linear interpolation, and the integral correction of the
recorded defect.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hybrid_time import (
    HybridArc,
    HybridMapping,
    HybridSequence,
    HybridSequenceDomain,
    HybridTimeDomain,
    _Segment,
)
from .system import HybridSystem


class AdmissibilityError(ValueError):
    """Step-size schedule violates h_k > 0, h_k -> 0, sum h_k = inf."""


class HorizonError(ValueError):
    """The recorded run is too short for the requested statistic."""


class EscapeError(RuntimeError):
    """State left the (inflated) flow and jump sets; carries the partial run."""

    def __init__(self, message: str, partial: "SimulationResult"):
        super().__init__(message)
        self.partial = partial


class StepSchedule:
    """Step sizes h_k, k >= 1, with cached partial sums tau_k.

    power(a) uses h_k = k**-a and is admissible iff 0 < a <= 1 (enforced at
    construction). constant/custom schedules are allowed for plain solver
    runs; their admissibility is reported, not enforced.
    """

    def __init__(self, kind: str, a: float = 0.0, values: Optional[Sequence[float]] = None,
                 h_const: float = 0.0):
        self.kind = kind
        self.a = a
        self.h_const = h_const
        self._values = np.asarray(values, dtype=np.float64) if values is not None else None
        if self._values is not None and np.any(self._values <= 0):
            raise AdmissibilityError("custom step sizes must be positive")
        self._taus = np.zeros(1)
        self._extend_to(64)

    @classmethod
    def power(cls, a: float) -> "StepSchedule":
        if not (0 < a <= 1):
            raise AdmissibilityError(
                f"power schedule needs 0 < a <= 1 for h_k -> 0 with divergent sums; got a={a}"
            )
        return cls("power", a=a)

    @classmethod
    def constant(cls, h: float) -> "StepSchedule":
        if h <= 0:
            raise AdmissibilityError("constant step must be positive")
        return cls("constant", h_const=h)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "StepSchedule":
        return cls("custom", values=values)

    def h(self, k: int) -> float:
        if k < 1:
            raise ValueError("steps are indexed from 1")
        if self.kind == "power":
            return float(k) ** (-self.a)
        if self.kind == "constant":
            return self.h_const
        if k > self._values.size:
            raise HorizonError(f"custom schedule has only {self._values.size} steps")
        return float(self._values[k - 1])

    @property
    def max_k(self) -> Optional[int]:
        return self._values.size if self.kind == "custom" else None

    def _extend_to(self, k: int) -> None:
        n = self._taus.size - 1
        if k <= n:
            return
        if self.kind == "custom":
            k = min(k, self._values.size)
            if k <= n:
                return
        extra = np.array([self.h(i) for i in range(n + 1, k + 1)])
        self._taus = np.concatenate([self._taus, self._taus[-1] + np.cumsum(extra)])

    def tau_of(self, k: int) -> float:
        """Partial sum tau_k = h_1 + ... + h_k (tau_0 = 0)."""
        if k < 0:
            raise ValueError("k must be nonnegative")
        self._extend_to(max(k, 1))
        return float(self._taus[k])

    def taus(self, k: int) -> np.ndarray:
        self._extend_to(max(k, 1))
        return self._taus[: k + 1].copy()

    def m_of(self, t: float) -> int:
        """Largest k with tau_k <= t."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        guess = 64
        while self._taus[-1] <= t:
            if self.kind == "custom" and self._taus.size - 1 >= self._values.size:
                raise HorizonError(f"custom schedule exhausted before reaching t={t}")
            guess = 2 * (self._taus.size - 1)
            self._extend_to(guess)
        return int(np.searchsorted(self._taus, t, side="right") - 1)

    def is_admissible(self, horizon: int = 4096, sum_threshold: float = 10.0) -> bool:
        """power: analytic; otherwise a trend heuristic on [1, horizon]."""
        if self.kind == "power":
            return 0 < self.a <= 1
        if self.kind == "constant":
            return False  # h does not converge to 0
        n = min(horizon, self._values.size)
        hs = self._values[:n]
        shrinking = hs[-1] < 0.1 * hs[: max(1, n // 10)].mean()
        diverging = hs.sum() > sum_threshold or n == self._values.size
        return bool(shrinking and diverging)

    def describe(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "a": self.a}
        if self.kind == "constant":
            return {"kind": "constant", "h": self.h_const}
        return {"kind": "custom", "n": int(self._values.size)}


@dataclass(frozen=True)
class Horizon:
    max_k: Optional[int] = None
    max_j: Optional[int] = None
    max_length: Optional[float] = None

    def __post_init__(self):
        if self.max_k is None and self.max_j is None and self.max_length is None:
            raise ValueError("horizon must bound at least one of k, j, length")


@dataclass(frozen=True)
class JumpPolicy:
    """Resolution of flow-vs-jump when the state sits in both sets."""

    kind: str = "jump"  # "flow" | "jump" | "random"
    p_jump: float = 0.5
    seed: int = 0

    def decides_jump(self, decision_index: int) -> bool:
        if self.kind == "flow":
            return False
        if self.kind == "jump":
            return True
        rng = np.random.Generator(np.random.Philox(key=[self.seed, 3 << 56 | decision_index]))
        return bool(rng.random() < self.p_jump)


PREFER_FLOW = JumpPolicy("flow")
PREFER_JUMP = JumpPolicy("jump")


@dataclass(frozen=True)
class SimFlags:
    terminated_by: str  # "max_k" | "max_j" | "max_length" | "diverged" | "stalled"
    bounded_observed: bool
    complete_in_k: bool
    complete_in_j: bool
    sup_norm: float


@dataclass
class FlowPerturbation:
    """Deterministic step-proportional flow perturbation h * gamma(|x|) * u."""

    gamma: Callable[[float], float]
    direction: np.ndarray

    def vector(self, x: np.ndarray, h: float) -> np.ndarray:
        u = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(u)
        if n == 0:
            return np.zeros_like(u)
        return (h * float(self.gamma(float(np.linalg.norm(x))))) * (u / n)


@dataclass
class SimulationResult:
    """A simulated run with its per-step bookkeeping.

    fhat[k] is the vector applied on the step k -> k+1 (so the state
    difference over h_{k+1} up to one rounding), fsel[k] the flow-map
    selection; they coincide bitwise when no perturbation or noise is on.
    jbar[k] is the j at which step k -> k+1 happened; kbar[j] the k at which
    jump j -> j+1 happened.
    """

    sequence: HybridSequence
    schedule: StepSchedule
    policy: JumpPolicy
    fsel: np.ndarray
    fhat: np.ndarray
    gsel: np.ndarray
    ghat: np.ndarray
    jbar: np.ndarray
    kbar: np.ndarray
    flags: SimFlags
    x0: np.ndarray
    seed: Optional[int] = None
    system_name: str = ""

    @property
    def d(self) -> int:
        return self.sequence.d

    @property
    def max_k(self) -> int:
        return self.sequence.domain.max_k

    @property
    def max_j(self) -> int:
        return self.sequence.domain.max_j

    def state(self, k: int, j: int) -> np.ndarray:
        return self.sequence.value(k, j)

    def flow_states(self) -> np.ndarray:
        """x(k, jbar_k) for each flow step k."""
        out = np.empty((self.max_k, self.d))
        idx = 0
        steps = self.sequence.domain.steps
        for i in range(len(steps) - 1):
            if steps[i + 1][0] == steps[i][0] + 1:
                out[idx] = self.sequence.values[i]
                idx += 1
        return out[:idx]

    def defects(self) -> np.ndarray:
        """h_{k+1} * (fhat_{k+1} - f_k) rows for k = 0..max_k-1."""
        hs = np.array([self.schedule.h(k + 1) for k in range(self.max_k)])
        return hs[:, None] * (self.fhat - self.fsel)


def _simulate(
    system: HybridSystem,
    x0: np.ndarray,
    schedule: StepSchedule,
    policy: JumpPolicy,
    horizon: Horizon,
    *,
    flow_noise: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
    jump_noise: Optional[Callable[[int, np.ndarray, np.ndarray], np.ndarray]] = None,
    jump_rule: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
    perturbation: Optional[FlowPerturbation] = None,
    guard_eps: float = 1e-9,
    seed: Optional[int] = None,
    system_name: str = "",
) -> SimulationResult:
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    if not (system.flow_set.contains(x) or system.jump_set.contains(x)):
        raise ValueError("x0 must belong to the flow or jump set")

    steps = [(0, 0)]
    values = [x.copy()]
    fsel_rows: list[np.ndarray] = []
    fhat_rows: list[np.ndarray] = []
    gsel_rows: list[np.ndarray] = []
    ghat_rows: list[np.ndarray] = []
    jbar: list[int] = []
    kbar: list[int] = []

    k = 0
    j = 0
    decision = 0
    sup_norm = float(np.linalg.norm(x))
    terminated = None

    def partial(flag: str) -> SimulationResult:
        return _pack(
            steps, values, schedule, policy, fsel_rows, fhat_rows, gsel_rows,
            ghat_rows, jbar, kbar, flag, sup_norm, x0, seed, system_name, horizon,
        )

    while True:
        if horizon.max_k is not None and k >= horizon.max_k:
            terminated = "max_k"
            break
        if horizon.max_j is not None and j >= horizon.max_j:
            terminated = "max_j"
            break
        if horizon.max_length is not None and schedule.tau_of(k) + j >= horizon.max_length:
            terminated = "max_length"
            break

        in_c = system.flow_set.contains(x)
        in_d = system.jump_set.contains(x)
        if not in_c and not in_d:
            in_c = system.flow_set.contains(x, inflation=guard_eps)
            in_d = system.jump_set.contains(x, inflation=guard_eps)
            if not in_c and not in_d:
                raise EscapeError(
                    f"state left the flow/jump sets (guard {guard_eps:g}) at (k={k}, j={j})",
                    partial("escaped"),
                )
        if in_c and in_d:
            do_jump = policy.decides_jump(decision)
            decision += 1
        else:
            do_jump = in_d

        if do_jump:
            g = system.jump_map.select(x)
            if jump_rule is not None:
                x_plus = np.atleast_1d(np.asarray(jump_rule(x, j), dtype=np.float64))
            else:
                x_plus = g.copy()
            if jump_noise is not None:
                x_plus = jump_noise(j, x, x_plus)
            gsel_rows.append(g)
            ghat_rows.append(x_plus.copy())
            kbar.append(k)
            j += 1
            x = x_plus
            steps.append((k, j))
            values.append(x.copy())
        else:
            h = schedule.h(k + 1)
            with np.errstate(over="ignore", invalid="ignore"):
                f = system.flow_selection(x, h)
                fhat_vec = f
                if perturbation is not None:
                    fhat_vec = f + perturbation.vector(x, h)
                if flow_noise is not None:
                    v = flow_noise(k, x)
                    if v is not None:
                        fhat_vec = fhat_vec + v
                x_next = x + h * fhat_vec
            if not np.all(np.isfinite(x_next)):
                terminated = "diverged"
                break
            fsel_rows.append(np.asarray(f, dtype=np.float64))
            fhat_rows.append(np.asarray(fhat_vec, dtype=np.float64))
            jbar.append(j)
            k += 1
            x = x_next
            steps.append((k, j))
            values.append(x.copy())
        n = float(np.linalg.norm(x))
        if n > sup_norm:
            sup_norm = n

    return _pack(
        steps, values, schedule, policy, fsel_rows, fhat_rows, gsel_rows,
        ghat_rows, jbar, kbar, terminated, sup_norm, x0, seed, system_name, horizon,
    )


def _pack(steps, values, schedule, policy, fsel, fhat, gsel, ghat, jbar, kbar,
          terminated, sup_norm, x0, seed, system_name, horizon) -> SimulationResult:
    d = values[0].size
    seq = HybridSequence(HybridSequenceDomain(tuple(steps)), np.vstack(values))
    hit_horizon = terminated in ("max_k", "max_j", "max_length")
    flags = SimFlags(
        terminated_by=terminated,
        bounded_observed=terminated != "diverged" and math.isfinite(sup_norm),
        complete_in_k=hit_horizon and len(fsel) > 0,
        complete_in_j=hit_horizon and len(gsel) > 0,
        sup_norm=sup_norm,
    )
    stack = lambda rows: np.vstack(rows) if rows else np.empty((0, d))
    return SimulationResult(
        sequence=seq,
        schedule=schedule,
        policy=policy,
        fsel=stack(fsel),
        fhat=stack(fhat),
        gsel=stack(gsel),
        ghat=stack(ghat),
        jbar=np.asarray(jbar, dtype=np.int64),
        kbar=np.asarray(kbar, dtype=np.int64),
        flags=flags,
        x0=np.atleast_1d(np.asarray(x0, dtype=np.float64)),
        seed=seed,
        system_name=system_name,
    )


def euler_simulate(
    system: HybridSystem,
    x0,
    schedule: StepSchedule,
    policy: JumpPolicy = PREFER_JUMP,
    horizon: Horizon = Horizon(max_k=1000),
    *,
    jump_rule: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
    perturbation: Optional[FlowPerturbation] = None,
    guard_eps: float = 1e-9,
    system_name: str = "",
) -> SimulationResult:
    """Deterministic Euler-type run: flow steps x+ = x + h*f, jumps via G.

    Stops at the first horizon bound hit, or when the next state would be
    non-finite (divergence), or raises EscapeError with the partial result
    when the state leaves the guard-inflated flow/jump sets.
    """
    return _simulate(
        system, x0, schedule, policy, horizon,
        jump_rule=jump_rule, perturbation=perturbation, guard_eps=guard_eps,
        system_name=system_name or system.name,
    )


# -- the defect statistic ------------------------------------------------------------


def benaim_sup(result: SimulationResult, T: float, k: int) -> float:
    """sup over n in [k+1, m(tau_k + T)] of |sum_{i=k}^{n-1} h_{i+1}(fhat-fsel)|."""
    if T <= 0:
        raise ValueError("T must be positive")
    if k < 0 or k >= result.max_k:
        raise HorizonError(f"k={k} outside the recorded flow-step range [0, {result.max_k})")
    m = result.schedule.m_of(result.schedule.tau_of(k) + T)
    if m > result.max_k:
        raise HorizonError(
            f"statistic at k={k} needs flow steps up to m={m}, run has {result.max_k}"
        )
    defects = result.defects()[k:m]
    if defects.shape[0] == 0:
        return 0.0
    sums = np.cumsum(defects, axis=0)
    return float(np.max(np.linalg.norm(sums, axis=1)))


def benaim_series(result: SimulationResult, T: float, ks: Sequence[int]) -> np.ndarray:
    return np.array([benaim_sup(result, T, k) for k in ks])


# -- compression / interpolation -----------------------------------------------------


def compress(result: SimulationResult) -> HybridMapping:
    """Replace the step index k by tau_k: points (tau_k, j) -> x(k, j)."""
    taus = result.schedule.taus(result.max_k)
    pts = []
    for (k, j), v in zip(result.sequence.domain.steps, result.sequence.values):
        pts.append((float(taus[k]), j, v[None, :]))
    return HybridMapping(pts)


def interpolate(result: SimulationResult) -> HybridArc:
    """Piecewise-linear arc through (tau_k, j, x(k,j)); anchors are exact copies."""
    taus = result.schedule.taus(result.max_k)
    steps = result.sequence.domain.steps
    values = result.sequence.values
    segments: list[_Segment] = []
    cur_times = [float(taus[steps[0][0]])]
    cur_vals = [values[0]]
    cur_j = steps[0][1]
    for i in range(1, len(steps)):
        k, j = steps[i]
        if j == cur_j:
            cur_times.append(float(taus[k]))
            cur_vals.append(values[i])
        else:
            segments.append(_Segment(cur_j, np.array(cur_times), np.vstack(cur_vals)))
            cur_times = [float(taus[k])]
            cur_vals = [values[i]]
            cur_j = j
    segments.append(_Segment(cur_j, np.array(cur_times), np.vstack(cur_vals)))
    return HybridArc(segments, _validated=True)


def chi_correction(result: SimulationResult, s: float, i: int, t: float, j: int) -> np.ndarray:
    """Integral over [s, t] of the piecewise-constant defect f_k - fhat_{k+1}.

    (s, i) and (t, j) must lie in the interpolated arc's domain with
    s + i <= t + j; the integral is an exact weighted sum over segments.
    """
    arc = interpolate(result)
    arc.value_at(s, i)
    arc.value_at(t, j)
    if s + i > t + j:
        raise ValueError("need s + i <= t + j")
    # staircase domains order flow times with positions, so t >= s here
    u = result.fsel - result.fhat  # rows: U on [tau_k, tau_{k+1})
    taus = result.schedule.taus(result.max_k)
    ks = int(np.searchsorted(taus, s, side="right") - 1)
    kt = int(np.searchsorted(taus, t, side="right") - 1)
    ks = min(ks, result.max_k - 1) if result.max_k else 0
    kt = min(kt, result.max_k - 1) if result.max_k else 0
    if result.max_k == 0 or t == s:
        return np.zeros(result.d)
    if ks == kt:
        return (t - s) * u[ks]
    total = (float(taus[ks + 1]) - s) * u[ks]
    for m in range(ks + 1, kt):
        total = total + (float(taus[m + 1]) - float(taus[m])) * u[m]
    total = total + (t - float(taus[kt])) * u[kt]
    return total


# -- domain gap diagnostic ------------------------------------------------------------


@dataclass(frozen=True)
class GapReport:
    max_gap: float
    gap_start: float
    gaps_found: bool
    threshold: float
    after_end: Optional[float] = None


def gap_scan(obj, eps: float, schedule: Optional[StepSchedule] = None) -> GapReport:
    """Largest window of positions t+j containing no domain point.

    Accepts a HybridTimeDomain (interval coverage), a HybridSequenceDomain
    (requires the schedule to place k at tau_k), a HybridMapping, or a
    SimulationResult. Windows of size >= 1 + eps flag a candidate as having
    domain gaps too large for tail analysis.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    after_end = None
    if isinstance(obj, SimulationResult):
        obj = compress(obj)
    if isinstance(obj, HybridTimeDomain):
        spans = [(a + j, b + j) for a, b, j in obj.intervals]
        max_gap, gap_start = 0.0, 0.0
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            gap = a1 - b0
            if gap > max_gap:
                max_gap, gap_start = gap, b0
        if not obj.unbounded:
            after_end = spans[-1][1]
        return GapReport(max_gap, gap_start, max_gap >= 1 + eps, 1 + eps, after_end)
    if isinstance(obj, HybridSequenceDomain):
        if schedule is None:
            raise ValueError("sequence domains need the step schedule for positions")
        taus = schedule.taus(obj.max_k)
        totals = np.array(sorted(taus[k] + j for k, j in obj.steps))
    elif isinstance(obj, HybridMapping):
        totals = np.sort(obj.totals())
    else:
        raise TypeError(f"cannot gap-scan {type(obj).__name__}")
    diffs = np.diff(totals)
    if diffs.size == 0:
        return GapReport(0.0, 0.0, False, 1 + eps, float(totals[-1]))
    idx = int(np.argmax(diffs))
    return GapReport(
        float(diffs[idx]), float(totals[idx]), float(diffs[idx]) >= 1 + eps,
        1 + eps, float(totals[-1]),
    )


# -- serialization --------------------------------------------------------------------


def result_to_csv(result: SimulationResult) -> str:
    """Columns k, j, tau_k, x_*, fhat_*, fsel_*; jump rows carry empty vectors."""
    d = result.d
    taus = result.schedule.taus(result.max_k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["k", "j", "tau_k"]
        + [f"x_{i}" for i in range(d)]
        + [f"fhat_{i}" for i in range(d)]
        + [f"fsel_{i}" for i in range(d)]
    )
    steps = result.sequence.domain.steps
    flow_idx = 0
    for i, (k, j) in enumerate(steps):
        x = result.sequence.values[i]
        is_flow_origin = i + 1 < len(steps) and steps[i + 1][0] == k + 1
        if is_flow_origin:
            fh = [repr(float(c)) for c in result.fhat[flow_idx]]
            fs = [repr(float(c)) for c in result.fsel[flow_idx]]
            flow_idx += 1
        else:
            fh = [""] * d
            fs = [""] * d
        writer.writerow(
            [k, j, repr(float(taus[k]))] + [repr(float(c)) for c in x] + fh + fs
        )
    return buf.getvalue()


__all__ = [
    "StepSchedule", "Horizon", "JumpPolicy", "PREFER_FLOW", "PREFER_JUMP",
    "FlowPerturbation", "SimulationResult", "SimFlags",
    "euler_simulate", "benaim_sup", "benaim_series",
    "compress", "interpolate", "chi_correction", "gap_scan", "GapReport",
    "result_to_csv",
    "AdmissibilityError", "HorizonError", "EscapeError",
]
