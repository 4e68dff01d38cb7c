"""Concrete systems with known limiting behavior, packaged for the CLI and tests.

Includes the cubic plant with a clamped reset, the projected random-search
annealing process over a smooth objective, a planar rotation, gradient
descent on a two-well landscape, the timer automaton, and the shrinking
sine band used to exercise the tail-closeness diagnostic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .hybrid_time import HybridArc, HybridMapping
from .system import (
    HybridSystem,
    Hull,
    SetRegion,
    SetValuedMap,
    Singleton,
    all_space,
    box_region,
    empty_region,
    interval_region,
    product_region,
    dwell_automaton,
)

log = logging.getLogger(__name__)


# -- objectives ----------------------------------------------------------------------


@dataclass
class ObjectiveSpec:
    """A function to minimize over a closed set S with projection P_S."""

    theta: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    region: SetRegion
    dim: int
    critical_points: Optional[np.ndarray] = None
    minimizers: Optional[np.ndarray] = None
    name: str = ""

    def validate(self, tol: float = 1e-8) -> None:
        if self.critical_points is not None:
            for c in np.atleast_2d(self.critical_points):
                g = np.linalg.norm(self.gradient(np.atleast_1d(c)))
                if g > tol:
                    raise ValueError(f"listed critical point {c} has |grad| = {g:.3e}")
        if self.minimizers is not None:
            if self.critical_points is None:
                raise ValueError("minimizers listed without critical points")
            crit = np.atleast_2d(self.critical_points)
            for m in np.atleast_2d(self.minimizers):
                if np.min(np.linalg.norm(crit - m, axis=1)) > 1e-9:
                    raise ValueError(f"minimizer {m} is not among the critical points")


def double_well() -> ObjectiveSpec:
    """theta(y) = (y^2 - 1)^2 on the line: critical set {-1, 0, 1}, minima +-1."""
    return ObjectiveSpec(
        theta=lambda y: float((y[0] ** 2 - 1.0) ** 2),
        gradient=lambda y: np.array([4.0 * y[0] * (y[0] ** 2 - 1.0)]),
        region=all_space(1),
        dim=1,
        critical_points=np.array([[-1.0], [0.0], [1.0]]),
        minimizers=np.array([[-1.0], [1.0]]),
        name="double_well",
    )


def rastrigin(a: float = 10.0) -> ObjectiveSpec:
    """1-d Rastrigin-style objective; no critical list, residual |grad| is used."""
    return ObjectiveSpec(
        theta=lambda y: float(a + y[0] ** 2 - a * math.cos(2 * math.pi * y[0])),
        gradient=lambda y: np.array(
            [2.0 * y[0] + 2 * math.pi * a * math.sin(2 * math.pi * y[0])]
        ),
        region=all_space(1),
        dim=1,
        name="rastrigin",
    )


def critical_set_distance(y, objective: ObjectiveSpec, tol: float = 0.0) -> float:
    """Distance to the listed critical set, or the gradient residual surrogate."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if objective.critical_points is not None:
        crit = np.atleast_2d(objective.critical_points)
        return float(np.min(np.linalg.norm(crit - y, axis=1)))
    return float(np.linalg.norm(objective.gradient(y)))


# -- bundles ---------------------------------------------------------------------------


@dataclass
class SystemBundle:
    """A preset system plus the extras needed to run and analyze it."""

    name: str
    system: HybridSystem
    x0_default: np.ndarray
    x0_sampler: Callable[[np.random.Generator], np.ndarray]
    jump_rule: Optional[Callable] = None  # (x, j) or (x, j, rng) per preset
    jump_rule_stochastic: bool = False
    objective: Optional[ObjectiveSpec] = None
    metadata: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)


# -- cubic plant -----------------------------------------------------------------------


def cubic_system() -> SystemBundle:
    """Scalar dz/dt = -z^3 with no jumps; Euler runs from z0^2 >= 3 blow up."""
    system = HybridSystem(
        flow_set=all_space(1),
        flow_map=SetValuedMap.from_function(lambda x: -(x * x * x)),
        jump_set=empty_region(1),
        jump_map=SetValuedMap(lambda x: Singleton(x)),
        state_dim=1,
        name="cubic",
    )
    return SystemBundle(
        name="cubic",
        system=system,
        x0_default=np.array([math.sqrt(3.0)]),
        x0_sampler=lambda rng: np.array([rng.uniform(-2.0, 2.0)]),
        metadata={"equilibrium": [0.0]},
    )


def cubic_reset_system(c: float = 2.0, N: int = 1, delta: float = 1.0) -> SystemBundle:
    """State (z, tau): cubic flow with a timer; at tau >= 1 the jump clamps z.

    Flow set R x [0, N] with rates (-z^3, delta) (timer saturating at N);
    jump set R x [1, inf); jump map (sgn(z) * min(|z|, c), 0). The clamp
    keeps complete runs bounded; the origin component attracts z.
    """
    if c <= 0 or N < 1 or delta <= 0:
        raise ValueError("need c > 0, N >= 1, delta > 0")

    def flow_eval(x):
        z = x[0]
        return Singleton(np.array([-(z * z * z), delta]))

    def sel_h(x, h):
        z = x[0]
        rate = min(delta, max(0.0, (N - x[1])) / h)
        return np.array([-(z * z * z), rate])

    def jump_f(x):
        z = x[0]
        return np.array([np.sign(z) * min(abs(z), c), 0.0])

    system = HybridSystem(
        flow_set=product_region(all_space(1), 1, interval_region(0.0, float(N)), 1,
                                name="RxTimer"),
        flow_map=SetValuedMap(flow_eval),
        jump_set=product_region(all_space(1), 1,
                                interval_region(1.0, math.inf), 1, name="RxArm"),
        jump_map=SetValuedMap.from_function(jump_f),
        state_dim=2,
        name="cubic_reset",
        flow_selection_h=sel_h,
    )
    return SystemBundle(
        name="cubic_reset",
        system=system,
        x0_default=np.array([1.5, 0.0]),
        x0_sampler=lambda rng: np.array([rng.uniform(-1.5, 1.5), 0.0]),
        metadata={"attractor": "{0} x [0,1]", "clamp": c},
        params={"c": c, "N": N, "delta": delta},
    )


# -- annealing -------------------------------------------------------------------------


@dataclass
class AnnealingConfig:
    """Projected random-search annealing over a smooth objective.

    The jump perturbation scale is ell_j = 1/(j*c_j) with c_j >= 1 chosen so
    P(|z_j| > c_j) <= 2^-j (Borel-Cantelli schedule); samples are clipped at
    c_j so ell_j*|z_j| <= 1/j holds surely at desk scale. A capped schedule
    min(ell_tilde_j, beta*ell_j) slows the decay of the global search.
    """

    objective: ObjectiveSpec
    N: int = 2
    delta: float = 0.5
    ell_mode: str = "borel_cantelli"  # or "capped"
    beta: float = 1.0
    ell_tilde: Optional[Callable[[int], float]] = None
    z_sigma: float = 1.0
    clip_z: bool = True
    y0_range: float = 0.1

    def __post_init__(self):
        if self.N < 1 or self.delta <= 0:
            raise ValueError("need N >= 1 and delta > 0")
        if self.ell_mode == "capped" and self.ell_tilde is None:
            raise ValueError("capped schedule needs ell_tilde")

    def c_of(self, j: int) -> float:
        """Quantile with P(|z_j| > c_j) <= 2^-j, floored at 1."""
        if self.objective.dim == 1:
            q = float(stats.norm.isf(2.0 ** -(j + 1))) * self.z_sigma
        else:
            q = math.sqrt(float(stats.chi2.isf(2.0 ** -j, df=self.objective.dim))) * self.z_sigma
        return max(1.0, q)

    def ell_of(self, j: int) -> float:
        base = 1.0 / (j * self.c_of(j))
        if self.ell_mode == "borel_cantelli":
            return base
        return min(self.ell_tilde(j), self.beta * base)


def annealing_system(config: AnnealingConfig) -> SystemBundle:
    """Gradient-descent flow with a dwell timer and projected random-search jumps.

    State (y, tau) in S x [0, N]. Flow rates (-grad theta(y), [0, delta]);
    jumps fire at tau >= 1, draw a candidate P_S(y + ell_{j+1} z_{j+1}), keep
    the objective argmin (ties keep the current point), and decrement tau.
    """
    obj = config.objective
    m = obj.dim
    N, delta = float(config.N), config.delta

    def flow_eval(x):
        g = -np.atleast_1d(obj.gradient(x[:m]))
        return Hull([np.append(g, 0.0), np.append(g, delta)])

    def sel_h(x, h):
        g = -np.atleast_1d(obj.gradient(x[:m]))
        rate = min(delta, max(0.0, (N - x[m])) / h)
        return np.append(g, rate)

    def jump_f(x):
        return np.append(x[:m], x[m] - 1.0)

    def jump_rule(x, j, rng):
        y = x[:m]
        jj = j + 1
        c = config.c_of(jj)
        z = rng.normal(size=m) * config.z_sigma
        if config.clip_z:
            n = np.linalg.norm(z)
            if n > c:
                z = z * (c / n)
        ell = config.ell_of(jj)
        cand = None
        if obj.region.project is not None:
            cand = obj.region.project(y + ell * z)
        if cand is None:
            log.info("projection undefined for jump %d; keeping current point", jj)
            y_plus = y
        else:
            y_plus = cand if obj.theta(cand) < obj.theta(y) else y
        return np.append(y_plus, x[m] - 1.0)

    system = HybridSystem(
        flow_set=product_region(obj.region, m, interval_region(0.0, N), 1, name="SxTimer"),
        flow_map=SetValuedMap(flow_eval),
        jump_set=product_region(obj.region, m, interval_region(1.0, N), 1, name="SxArm"),
        jump_map=SetValuedMap.from_function(jump_f),
        state_dim=m + 1,
        name="annealing",
        flow_selection_h=sel_h,
    )

    def sampler(rng):
        y0 = rng.uniform(-config.y0_range, config.y0_range, size=m)
        return np.append(y0, 0.0)

    meta = {}
    if obj.critical_points is not None:
        meta["critical_points"] = np.atleast_2d(obj.critical_points).tolist()
    if obj.minimizers is not None:
        meta["minimizers"] = np.atleast_2d(obj.minimizers).tolist()
    return SystemBundle(
        name="annealing",
        system=system,
        x0_default=np.append(np.zeros(m), 0.0),
        x0_sampler=sampler,
        jump_rule=jump_rule,
        jump_rule_stochastic=True,
        objective=obj,
        metadata=meta,
        params={"N": config.N, "delta": config.delta, "ell_mode": config.ell_mode},
    )


# -- geometry presets ------------------------------------------------------------------


def rotation_system() -> SystemBundle:
    """Planar rotation dx = (x2, -x1); orbits are circles, no jumps."""
    system = HybridSystem(
        flow_set=all_space(2),
        flow_map=SetValuedMap.from_function(lambda x: np.array([x[1], -x[0]])),
        jump_set=empty_region(2),
        jump_map=SetValuedMap(lambda x: Singleton(x)),
        state_dim=2,
        name="rotation",
    )
    return SystemBundle(
        name="rotation",
        system=system,
        x0_default=np.array([1.0, 0.0]),
        x0_sampler=lambda rng: _unit_circle_point(rng),
        metadata={"invariant": "circles |x| = r"},
    )


def _unit_circle_point(rng):
    a = rng.uniform(0, 2 * math.pi)
    return np.array([math.cos(a), math.sin(a)])


def gradient_system(objective: ObjectiveSpec, name: str = "") -> SystemBundle:
    """Plain gradient descent dy = -grad theta(y); no jumps."""
    m = objective.dim
    system = HybridSystem(
        flow_set=objective.region,
        flow_map=SetValuedMap.from_function(
            lambda x: -np.atleast_1d(objective.gradient(x))
        ),
        jump_set=empty_region(m),
        jump_map=SetValuedMap(lambda x: Singleton(x)),
        state_dim=m,
        name=name or f"gradient({objective.name})",
    )
    return SystemBundle(
        name=name or "gradient",
        system=system,
        x0_default=np.zeros(m),
        x0_sampler=lambda rng: rng.uniform(-1.5, 1.5, size=m),
        objective=objective,
        metadata={"critical_points": None if objective.critical_points is None
                  else np.atleast_2d(objective.critical_points).tolist()},
    )


def two_well_system() -> SystemBundle:
    b = gradient_system(double_well(), name="two_well")
    return b


def contraction_system(rate: float = 1.0, dim: int = 1) -> SystemBundle:
    """Linear contraction dx = -rate * x; the origin is globally attracting."""
    system = HybridSystem(
        flow_set=all_space(dim),
        flow_map=SetValuedMap.from_function(lambda x: -rate * x),
        jump_set=empty_region(dim),
        jump_map=SetValuedMap(lambda x: Singleton(x)),
        state_dim=dim,
        name="contraction",
    )
    return SystemBundle(
        name="contraction",
        system=system,
        x0_default=np.ones(dim),
        x0_sampler=lambda rng: rng.uniform(-1.0, 1.0, size=dim),
        metadata={"equilibrium": [0.0] * dim},
        params={"rate": rate, "dim": dim},
    )


def dwell_system(N: int = 2, delta: float = 0.5) -> SystemBundle:
    system = dwell_automaton(N, delta)
    return SystemBundle(
        name="dwell",
        system=system,
        x0_default=np.array([0.0]),
        x0_sampler=lambda rng: np.array([rng.uniform(0.0, 1.0)]),
        params={"N": N, "delta": delta},
    )


def timer_product(
    plant: SystemBundle, N: int, delta: float,
    jump_state_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    name: str = "",
) -> SystemBundle:
    """Compose a flow-only plant with the timer automaton driving the jumps.

    State (x_plant, tau); jumps fire when tau >= 1, apply jump_state_map to
    the plant coordinates (identity by default), and decrement tau.
    """
    m = plant.system.state_dim
    timer = dwell_automaton(N, delta)
    base = plant.system

    def flow_eval(x):
        f = base.flow_map.select(x[:m])
        return Hull([np.append(f, 0.0), np.append(f, delta)])

    def sel_h(x, h):
        f = base.flow_selection(x[:m], h)
        rate = min(delta, max(0.0, (N - x[m])) / h)
        return np.append(f, rate)

    smap = jump_state_map if jump_state_map is not None else (lambda x: x)

    def jump_f(x):
        return np.append(smap(x[:m]), x[m] - 1.0)

    system = HybridSystem(
        flow_set=product_region(base.flow_set, m, timer.flow_set, 1),
        flow_map=SetValuedMap(flow_eval),
        jump_set=product_region(base.flow_set, m, timer.jump_set, 1),
        jump_map=SetValuedMap.from_function(jump_f),
        state_dim=m + 1,
        name=name or f"{plant.name}*dwell",
        flow_selection_h=sel_h,
    )
    return SystemBundle(
        name=name or f"{plant.name}_dwell",
        system=system,
        x0_default=np.append(plant.x0_default, 0.0),
        x0_sampler=lambda rng: np.append(plant.x0_sampler(rng), 0.0),
        params={"N": N, "delta": delta, "plant": plant.name},
    )


# -- sine band -------------------------------------------------------------------------


def sine_band_curve(grid_dt: float = 0.01, horizon: float = 8.0,
                    band_samples: int = 9) -> HybridMapping:
    """Set-valued band [sin t - e^-t, sin t + e^-t] on a uniform t grid.

    Later tails hug the shifted-sine family ever more tightly, with the fit
    at start s governed by the half-width e^-s.
    """
    n = int(round(horizon / grid_dt))
    offsets = np.linspace(-1.0, 1.0, band_samples)
    pts = []
    for i in range(n + 1):
        t = i * grid_dt
        center = math.sin(t)
        half = math.exp(-t)
        vals = (center + half * offsets)[:, None]
        pts.append((t, 0, vals))
    return HybridMapping(pts)


def sine_band_halfwidth(t: float) -> float:
    return math.exp(-t)


def sine_family_witnesses(grid_dt: float = 0.01):
    """Witness source for the shifted-sine family sin(t + r).

    Given a start value v, returns the two phase branches consistent with
    sin(r) = clip(v): r and pi - r.
    """

    def source(x0: np.ndarray, T: float) -> list[HybridArc]:
        v = float(np.clip(np.atleast_1d(x0)[0], -1.0, 1.0))
        r = math.asin(v)
        arcs = []
        for phase in (r, math.pi - r):
            arcs.append(
                HybridArc.from_flow(
                    lambda t, ph=phase: np.array([math.sin(t + ph)]), T, grid_dt
                )
            )
        return arcs

    return source


# -- registry --------------------------------------------------------------------------


def make_preset(name: str, params: Optional[dict] = None) -> SystemBundle:
    """Build a preset by name; see PRESET_NAMES for the registry."""
    params = dict(params or {})
    if name == "cubic":
        return cubic_system()
    if name == "cubic_reset":
        return cubic_reset_system(**params)
    if name == "annealing":
        obj_name = params.pop("objective", "double_well")
        obj = double_well() if obj_name == "double_well" else rastrigin()
        return annealing_system(AnnealingConfig(objective=obj, **params))
    if name == "rotation":
        return rotation_system()
    if name == "two_well":
        return two_well_system()
    if name == "contraction":
        return contraction_system(**params)
    if name == "dwell":
        return dwell_system(**params)
    if name == "timer_product":
        plant = make_preset(params.pop("plant"), params.pop("plant_params", {}))
        clamp = params.pop("clamp", None)
        smap = None
        if clamp is not None:
            smap = lambda x, c=float(clamp): np.sign(x) * np.minimum(np.abs(x), c)
        return timer_product(plant, jump_state_map=smap, **params)
    raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESET_NAMES)}")


PRESET_NAMES = {
    "cubic": "scalar dz/dt = -z^3, no jumps (Euler blow-up demo)",
    "cubic_reset": "cubic flow with timer-driven clamp reset (params c, N, delta)",
    "annealing": "projected random-search descent on an objective (params N, delta, ...)",
    "rotation": "planar rotation, circular orbits",
    "two_well": "gradient descent on (y^2-1)^2",
    "contraction": "linear contraction dx = -rate*x (params rate, dim)",
    "dwell": "timer automaton alone (params N, delta)",
    "timer_product": "flow-only plant composed with the timer (params plant, N, delta, clamp)",
}


__all__ = [
    "ObjectiveSpec", "double_well", "rastrigin", "critical_set_distance",
    "SystemBundle", "AnnealingConfig",
    "cubic_system", "cubic_reset_system", "annealing_system",
    "rotation_system", "gradient_system", "two_well_system",
    "contraction_system", "dwell_system", "timer_product",
    "sine_band_curve", "sine_band_halfwidth", "sine_family_witnesses",
    "make_preset", "PRESET_NAMES",
]
