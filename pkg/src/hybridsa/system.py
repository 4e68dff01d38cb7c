"""Hybrid inclusion data: flow/jump sets and maps, inflation, restriction.

Value sets of the flow and jump maps are limited to finitely describable
shapes (point, ball, convex hull of points, discrete candidate list) so
membership and distances stay computable. Regularity spot checks are
advisory: closedness and outer semicontinuity are not decidable from
finitely many probes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import nnls


class RegionError(ValueError):
    pass


class MapError(ValueError):
    pass


# -- value sets --------------------------------------------------------------------


class ValueSet:
    """Finite description of a set of vectors in R^d."""

    convex_by_representation = True

    def distance(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def contains(self, y: np.ndarray, tol: float = 0.0) -> bool:
        return self.distance(np.asarray(y, dtype=np.float64)) <= tol

    def representative(self) -> np.ndarray:
        raise NotImplementedError

    def support_points(self) -> np.ndarray:
        """Points generating the set for hull/inflation arithmetic."""
        raise NotImplementedError

    @property
    def is_empty(self) -> bool:
        return False

    def max_norm(self) -> float:
        pts = self.support_points()
        return float(np.max(np.linalg.norm(pts, axis=1))) if pts.size else 0.0


@dataclass(frozen=True)
class EmptySet(ValueSet):
    d: int = 1

    @property
    def is_empty(self) -> bool:
        return True

    def distance(self, y):
        return math.inf

    def representative(self):
        raise MapError("empty value set has no selection")

    def support_points(self):
        return np.empty((0, self.d))


class Singleton(ValueSet):
    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=np.float64))

    def distance(self, y):
        return float(np.linalg.norm(np.asarray(y) - self.value))

    def representative(self):
        return self.value.copy()

    def support_points(self):
        return self.value[None, :]


class Ball(ValueSet):
    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.radius = float(radius)

    def distance(self, y):
        return max(0.0, float(np.linalg.norm(np.asarray(y) - self.center)) - self.radius)

    def representative(self):
        return self.center.copy()

    def support_points(self):
        # center plus axis extremes; a finite stand-in for hull arithmetic
        d = self.center.size
        pts = [self.center]
        for i in range(d):
            e = np.zeros(d)
            e[i] = self.radius
            pts.append(self.center + e)
            pts.append(self.center - e)
        return np.array(pts)

    def closest_point_to(self, y):
        y = np.asarray(y, dtype=np.float64)
        gap = y - self.center
        n = np.linalg.norm(gap)
        if n <= self.radius or n == 0.0:
            return y if n <= self.radius else self.center.copy()
        return self.center + gap * (self.radius / n)


def _hull_distance(points: np.ndarray, y: np.ndarray) -> float:
    """Distance from y to the convex hull of the rows of points."""
    y = np.asarray(y, dtype=np.float64)
    if points.shape[0] == 1:
        return float(np.linalg.norm(y - points[0]))
    if points.shape[0] == 2:
        a, b = points
        ab = b - a
        denom = float(ab @ ab)
        w = 0.0 if denom == 0.0 else float(np.clip((y - a) @ ab / denom, 0.0, 1.0))
        return float(np.linalg.norm(y - (a + w * ab)))
    # min ||P^T lam - y||, lam >= 0, sum lam = 1 via a weighted NNLS row
    w = 1e6
    a_mat = np.vstack([points.T, w * np.ones(points.shape[0])])
    b_vec = np.append(y, w)
    lam, _ = nnls(a_mat, b_vec)
    s = lam.sum()
    if s <= 0:
        return float(np.min(np.linalg.norm(points - y, axis=1)))
    lam = lam / s
    return float(np.linalg.norm(points.T @ lam - y))


class Hull(ValueSet):
    """Convex hull of finitely many points."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))

    def distance(self, y):
        return _hull_distance(self.points, y)

    def representative(self):
        return self.points[0].copy()

    def support_points(self):
        return self.points.copy()


class FiniteSet(ValueSet):
    """Discrete candidate list; not convex unless a single point."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        self.convex_by_representation = (
            np.unique(self.points, axis=0).shape[0] <= 1
        )

    def distance(self, y):
        return float(np.min(np.linalg.norm(self.points - np.asarray(y), axis=1)))

    def representative(self):
        return self.points[0].copy()

    def support_points(self):
        return self.points.copy()


# -- regions -----------------------------------------------------------------------


@dataclass
class SetRegion:
    """A closed subset of R^d: membership predicate, optional projection/box."""

    membership: Callable[[np.ndarray], bool]
    project: Optional[Callable[[np.ndarray], Optional[np.ndarray]]] = None
    bounding_box: Optional[tuple[np.ndarray, np.ndarray]] = None
    name: str = ""
    _grid_cache: Optional[np.ndarray] = field(default=None, repr=False)

    def contains(self, x, inflation: float = 0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.membership(x):
            return True
        if inflation <= 0.0:
            return False
        return self.distance(x) <= inflation

    def distance(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if self.membership(x):
            return 0.0
        if self.project is not None:
            p = self.project(x)
            if p is not None:
                return float(np.linalg.norm(x - p))
        if self.bounding_box is not None:
            return self._sampled_distance(x)
        raise RegionError(
            f"region {self.name or '<anonymous>'} has no projection or bounding box"
        )

    def _sampled_distance(self, x, per_axis: int = 25) -> float:
        if self._grid_cache is None:
            lo, hi = self.bounding_box
            axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(lo.size)]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
            members = np.array([self.membership(p) for p in mesh])
            self._grid_cache = mesh[members]
        if self._grid_cache.size == 0:
            return math.inf
        return float(np.min(np.linalg.norm(self._grid_cache - x, axis=1)))


def all_space(d: int) -> SetRegion:
    return SetRegion(lambda x: True, project=lambda x: x, name=f"R^{d}")


def empty_region(d: int) -> SetRegion:
    return SetRegion(lambda x: False, project=lambda x: None, name="empty")


def box_region(lo, hi, name: str = "box") -> SetRegion:
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))

    def member(x):
        return bool(np.all(x >= lo) and np.all(x <= hi))

    finite = np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
    return SetRegion(
        member,
        project=lambda x: np.clip(x, lo, hi),
        bounding_box=(lo, hi) if finite else None,
        name=name,
    )


def interval_region(lo: float, hi: float, name: str = "interval") -> SetRegion:
    return box_region([lo], [hi], name=name)


def ball_region(center, radius: float, name: str = "ball") -> SetRegion:
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))

    def member(x):
        return bool(np.linalg.norm(x - center) <= radius)

    def project(x):
        gap = x - center
        n = np.linalg.norm(gap)
        if n <= radius:
            return x
        return center + gap * (radius / n)

    return SetRegion(
        member,
        project=project,
        bounding_box=(center - radius, center + radius),
        name=name,
    )


def annulus_region(r_in: float, r_out: float, name: str = "annulus") -> SetRegion:
    def member(x):
        n = np.linalg.norm(x)
        return bool(r_in <= n <= r_out)

    def project(x):
        n = np.linalg.norm(x)
        if n == 0.0:
            return np.array([r_in, 0.0])
        if n < r_in:
            return x * (r_in / n)
        if n > r_out:
            return x * (r_out / n)
        return x

    lo = np.array([-r_out, -r_out])
    hi = np.array([r_out, r_out])
    return SetRegion(member, project=project, bounding_box=(lo, hi), name=name)


def finite_region(points, name: str = "finite") -> SetRegion:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))

    def member(x):
        return bool(np.min(np.linalg.norm(pts - x, axis=1)) == 0.0)

    def project(x):
        return pts[int(np.argmin(np.linalg.norm(pts - x, axis=1)))].copy()

    return SetRegion(
        member, project=project, bounding_box=(pts.min(axis=0), pts.max(axis=0)), name=name
    )


def product_region(a: SetRegion, da: int, b: SetRegion, db: int, name: str = "") -> SetRegion:
    """Cartesian product of two regions over a split of the coordinates."""

    def member(x):
        return a.membership(x[:da]) and b.membership(x[da:])

    def project(x):
        if a.project is None or b.project is None:
            return None
        pa = a.project(x[:da])
        pb = b.project(x[da:])
        if pa is None or pb is None:
            return None
        return np.concatenate([pa, pb])

    bbox = None
    if a.bounding_box is not None and b.bounding_box is not None:
        bbox = (
            np.concatenate([a.bounding_box[0], b.bounding_box[0]]),
            np.concatenate([a.bounding_box[1], b.bounding_box[1]]),
        )
    return SetRegion(member, project=project, bounding_box=bbox,
                     name=name or f"{a.name}x{b.name}")


def intersect_region(a: SetRegion, b: SetRegion, name: str = "") -> SetRegion:
    def member(x):
        return a.membership(x) and b.membership(x)

    bbox = a.bounding_box or b.bounding_box
    if a.bounding_box is not None and b.bounding_box is not None:
        bbox = (
            np.maximum(a.bounding_box[0], b.bounding_box[0]),
            np.minimum(a.bounding_box[1], b.bounding_box[1]),
        )
    return SetRegion(member, project=None, bounding_box=bbox,
                     name=name or f"{a.name}&{b.name}")


# -- maps and systems -------------------------------------------------------------


@dataclass
class SetValuedMap:
    """x -> value set, with a selection picking one element."""

    evaluate: Callable[[np.ndarray], ValueSet]
    selection: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def select(self, x: np.ndarray) -> np.ndarray:
        if self.selection is not None:
            return np.atleast_1d(np.asarray(self.selection(x), dtype=np.float64))
        vs = self.evaluate(x)
        if vs.is_empty:
            raise MapError("selection requested from an empty value set")
        return vs.representative()

    def select_variant(self, x: np.ndarray, idx: int) -> np.ndarray:
        """Cycle through the value set's support points for witness variety."""
        vs = self.evaluate(x)
        if vs.is_empty:
            raise MapError("selection requested from an empty value set")
        if idx == 0:
            return self.select(x)
        pts = vs.support_points()
        return pts[idx % pts.shape[0]].copy()

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray]) -> "SetValuedMap":
        def ev(x):
            return Singleton(f(x))

        return cls(ev, selection=lambda x: np.atleast_1d(np.asarray(f(x), dtype=np.float64)))


@dataclass
class HybridSystem:
    """Flow set/map and jump set/map of a hybrid inclusion."""

    flow_set: SetRegion
    flow_map: SetValuedMap
    jump_set: SetRegion
    jump_map: SetValuedMap
    state_dim: int
    name: str = ""
    # optional step-aware flow selection, e.g. timer saturation; must return
    # an element of flow_map.evaluate(x)
    flow_selection_h: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    hbc_warnings: tuple[str, ...] = ()

    def flow_selection(self, x: np.ndarray, h: float) -> np.ndarray:
        if self.flow_selection_h is not None:
            return np.atleast_1d(np.asarray(self.flow_selection_h(x, h), dtype=np.float64))
        return self.flow_map.select(x)


@dataclass
class InflatedSystem:
    """eps-inflation: sets grow by eps; map values are hull-of-probes + eps."""

    base: HybridSystem
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("inflation radius must be nonnegative")

    def in_flow_set(self, x) -> bool:
        if self.eps == 0.0:
            return self.base.flow_set.contains(x)
        return self.base.flow_set.contains(x, inflation=self.eps)

    def in_jump_set(self, x) -> bool:
        if self.eps == 0.0:
            return self.base.jump_set.contains(x)
        return self.base.jump_set.contains(x, inflation=self.eps)

    def _probe_points(self, x, region: SetRegion) -> np.ndarray:
        """Finite net of (x + eps*B) intersected with the region."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        cands = [x]
        if region.project is not None:
            p = region.project(x)
            if p is not None and np.linalg.norm(p - x) <= self.eps + 1e-12:
                cands.append(p)
        d = x.size
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            for r in (0.25, 0.5, 0.75, 1.0):
                cands.append(x + self.eps * r * e)
                cands.append(x - self.eps * r * e)
        pts = [c for c in cands if region.membership(c)]
        return np.array(pts) if pts else np.empty((0, d))

    def flow_value_distance(self, x, v) -> float:
        """Distance of v to the inflated flow value set at x (0 = member)."""
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        probes = self._probe_points(x, self.base.flow_set)
        if probes.shape[0] == 0:
            return math.inf
        support = []
        for p in probes:
            vs = self.base.flow_map.evaluate(p)
            if vs.is_empty:
                continue
            if isinstance(vs, Ball):
                support.append(vs.closest_point_to(v)[None, :])
                support.append(vs.center[None, :])
            else:
                support.append(vs.support_points())
        if not support:
            return math.inf
        hull = np.vstack(support)
        return max(0.0, _hull_distance(hull, v) - self.eps)

    def flow_value_contains(self, x, v, tol: float = 0.0) -> bool:
        return self.flow_value_distance(x, v) <= tol

    def jump_value_distance(self, x, v) -> float:
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        probes = self._probe_points(x, self.base.jump_set)
        if probes.shape[0] == 0:
            return math.inf
        best = math.inf
        for p in probes:
            vs = self.base.jump_map.evaluate(p)
            if vs.is_empty:
                continue
            best = min(best, vs.distance(v))
        return max(0.0, best - self.eps)

    def jump_value_contains(self, x, v, tol: float = 0.0) -> bool:
        return self.jump_value_distance(x, v) <= tol


def inflate(system: HybridSystem, eps: float) -> InflatedSystem:
    return InflatedSystem(system, eps)


def restrict(system: HybridSystem, region: SetRegion,
             probes: Optional[Sequence[np.ndarray]] = None) -> HybridSystem:
    """Intersect the flow/jump sets with ``region`` and trim jump values to it.

    Probe points of the restricted jump set with an emptied jump value are
    recorded as HBC warnings on the returned system, not raised.
    """

    def jump_eval(x):
        vs = system.jump_map.evaluate(x)
        if vs.is_empty:
            return vs
        pts = vs.support_points()
        keep = np.array([region.membership(p) for p in pts])
        if not keep.any():
            return EmptySet(system.state_dim)
        kept = pts[keep]
        if isinstance(vs, Singleton) or kept.shape[0] == 1:
            return Singleton(kept[0])
        if isinstance(vs, FiniteSet):
            return FiniteSet(kept)
        return Hull(kept)  # hull trimming by vertices: inner approximation

    def jump_sel(x):
        vs = jump_eval(x)
        if vs.is_empty:
            raise MapError("restricted jump map is empty at the requested point")
        return vs.representative()

    warnings = []
    if probes is not None:
        for p in probes:
            p = np.atleast_1d(np.asarray(p, dtype=np.float64))
            if system.jump_set.membership(p) and region.membership(p):
                if jump_eval(p).is_empty:
                    warnings.append(f"restricted jump value empty at {p.tolist()}")

    return HybridSystem(
        flow_set=intersect_region(system.flow_set, region),
        flow_map=system.flow_map,
        jump_set=intersect_region(system.jump_set, region),
        jump_map=SetValuedMap(jump_eval, selection=jump_sel),
        state_dim=system.state_dim,
        name=f"{system.name}|K",
        flow_selection_h=system.flow_selection_h,
        hbc_warnings=tuple(system.hbc_warnings) + tuple(warnings),
    )


# -- solution verification ----------------------------------------------------------


@dataclass(frozen=True)
class FlowIntervalRecord:
    j: int
    max_derivative_distance: float
    max_membership_margin: float


@dataclass(frozen=True)
class JumpRecord:
    t: float
    j: int
    jump_set_margin: float
    jump_value_distance: float


@dataclass(frozen=True)
class SolutionReport:
    passed: bool
    tol: float
    flow_records: tuple[FlowIntervalRecord, ...]
    jump_records: tuple[JumpRecord, ...]
    witness: Optional[str] = None

    @property
    def max_violation(self) -> float:
        worst = 0.0
        for r in self.flow_records:
            worst = max(worst, r.max_derivative_distance, r.max_membership_margin)
        for r in self.jump_records:
            worst = max(worst, r.jump_set_margin, r.jump_value_distance)
        return worst


def verify_solution(arc, system: HybridSystem, tol: float) -> SolutionReport:
    """Check an arc against the inclusion via finite differences at samples.

    Flow intervals: forward difference at each sample against the flow value
    set at that sample, plus the flow-set membership margin. Jumps: jump-set
    membership of the pre state and jump-value distance of the post state.
    """
    segs = arc.segments_effective()
    flow_records = []
    jump_records = []
    witness = None
    for j, times, values in segs:
        n = times.size
        if n < 2:
            continue  # single-point segment: participates in jumps only
        fd_worst = 0.0
        margin_worst = max(system.flow_set.distance(v) for v in values)
        for i in range(n - 1):
            dt = times[i + 1] - times[i]
            fd = (values[i + 1] - values[i]) / dt
            dist = system.flow_map.evaluate(values[i]).distance(fd)
            if dist > fd_worst:
                fd_worst = dist
                if dist > tol and witness is None:
                    witness = f"flow derivative off by {dist:.3e} at (t={times[i]:.6g}, j={j})"
        if margin_worst > tol and witness is None:
            witness = f"flow sample outside C by {margin_worst:.3e} on interval j={j}"
        flow_records.append(FlowIntervalRecord(j, fd_worst, margin_worst))
    for idx in range(len(segs) - 1):
        j, times, values = segs[idx]
        x_pre = values[-1]
        x_post = segs[idx + 1][2][0]
        d_margin = system.jump_set.distance(x_pre)
        g_dist = system.jump_map.evaluate(x_pre).distance(x_post)
        jump_records.append(JumpRecord(float(times[-1]), j, d_margin, g_dist))
        if (d_margin > tol or g_dist > tol) and witness is None:
            witness = (
                f"jump at (t={times[-1]:.6g}, j={j}): set margin {d_margin:.3e}, "
                f"value distance {g_dist:.3e}"
            )
    passed = all(
        r.max_derivative_distance <= tol and r.max_membership_margin <= tol
        for r in flow_records
    ) and all(r.jump_set_margin <= tol and r.jump_value_distance <= tol for r in jump_records)
    return SolutionReport(passed, tol, tuple(flow_records), tuple(jump_records),
                          None if passed else witness)


# -- dwell-time automaton -------------------------------------------------------------


def dwell_automaton(N: int, delta: float) -> HybridSystem:
    """Timer automaton: tau in [0,N] flows with rate in [0,delta]; tau>=1 jumps to tau-1.

    Domains it generates satisfy j - i <= delta*(t - s) + N for all ordered
    time pairs; ``dwell_compatible`` checks that inequality.
    """
    if N < 1 or delta <= 0:
        raise ValueError("need N >= 1 and delta > 0")

    def sel_h(x, h):
        tau = float(x[0])
        rate = min(delta, max(0.0, (N - tau)) / h)
        return np.array([rate])

    return HybridSystem(
        flow_set=interval_region(0.0, float(N), name="[0,N]"),
        flow_map=SetValuedMap(lambda x: Hull([[0.0], [delta]]),
                              selection=lambda x: np.array([delta])),
        jump_set=interval_region(1.0, float(N), name="[1,N]"),
        jump_map=SetValuedMap.from_function(lambda x: np.array([x[0] - 1.0])),
        state_dim=1,
        name=f"dwell(N={N},delta={delta})",
        flow_selection_h=sel_h,
    )


def dwell_compatible(points: Sequence[tuple[float, int]], N: int, delta: float,
                     atol: float = 1e-9) -> tuple[bool, Optional[tuple]]:
    """Check j - i <= delta*(t - s) + N over all ordered pairs of points.

    Returns (ok, witness pair or None). Points are (t, j) domain corners; the
    constraint is monotone in t - s, so checking corners is exhaustive for
    interval domains. Equivalent formulation: with w = j - delta*t, every
    position-ordered pair needs w_later - w_earlier <= N, which a running
    minimum checks in one pass over the sorted points.
    """
    pts = sorted(points, key=lambda p: (p[0] + p[1], p[1]))
    t = np.array([p[0] for p in pts])
    j = np.array([float(p[1]) for p in pts])
    w = j - delta * t
    prefix_min = np.minimum.accumulate(w)
    argmin_so_far = np.zeros(len(pts), dtype=np.int64)
    for b in range(1, len(pts)):
        argmin_so_far[b] = argmin_so_far[b - 1] if w[argmin_so_far[b - 1]] <= w[b] else b
    excess = w - prefix_min
    b = int(np.argmax(excess))
    if excess[b] > N + atol:
        a = int(argmin_so_far[b])
        return False, (pts[a], pts[b])
    return True, None


def domain_corner_points(domain) -> list[tuple[float, int]]:
    """Interval endpoints of a hybrid time domain, as (t, j) pairs."""
    pts = []
    for a, b, j in domain.intervals:
        pts.append((float(a), int(j)))
        if b != a:
            pts.append((float(b), int(j)))
    return pts


# -- HBC spot checks --------------------------------------------------------------------


@dataclass(frozen=True)
class HBCReport:
    failures: tuple[str, ...]
    checked: int

    @property
    def passed(self) -> bool:
        return not self.failures


def check_hbc(system: HybridSystem, probes: Sequence[np.ndarray]) -> HBCReport:
    """Advisory spot checks of the basic conditions on a finite probe set.

    Verifies nonemptiness of F on C and G on D, convexity of F values by
    representation, and records boundedness of value norms. Closedness and
    outer semicontinuity are not checkable from finitely many probes.
    """
    failures = []
    for p in probes:
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        tag = np.array2string(p, precision=4)
        if system.flow_set.membership(p):
            vs = system.flow_map.evaluate(p)
            if vs.is_empty:
                failures.append(f"F empty at {tag} in C")
            elif not vs.convex_by_representation:
                failures.append(f"F value not convex by representation at {tag}")
            elif not np.isfinite(vs.max_norm()):
                failures.append(f"F unbounded at {tag}")
        if system.jump_set.membership(p):
            vs = system.jump_map.evaluate(p)
            if vs.is_empty:
                failures.append(f"G empty at {tag} in D")
            elif not np.isfinite(vs.max_norm()):
                failures.append(f"G unbounded at {tag}")
    return HBCReport(tuple(failures), len(probes))


__all__ = [
    "ValueSet", "EmptySet", "Singleton", "Ball", "Hull", "FiniteSet",
    "SetRegion", "SetValuedMap", "HybridSystem", "InflatedSystem",
    "all_space", "empty_region", "box_region", "interval_region",
    "ball_region", "annulus_region", "finite_region", "product_region",
    "intersect_region",
    "inflate", "restrict", "verify_solution", "dwell_automaton",
    "dwell_compatible", "domain_corner_points", "check_hbc",
    "SolutionReport", "HBCReport", "RegionError", "MapError",
]
