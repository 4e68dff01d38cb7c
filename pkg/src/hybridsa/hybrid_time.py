"""Hybrid time domains, arcs, and their algebra.

A hybrid time domain stacks flow intervals indexed by a jump counter:
([t_0,t_1],0) U ([t_1,t_2],1) U ...; positions are ranked by t+j. Arcs are
sampled trajectories on such domains: per interval a strictly ascending time
grid with one state row per sample.

Exactness contract: tails are slices of the parent's sample arrays and
coordinates are derived (never rebased by arithmetic), so splitting an arc
and re-concatenating the pieces at the recorded cut points reproduces the
original domain and values bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from ._kernels import graph_sup_mindist


class DomainError(ValueError):
    """A hybrid time/sequence domain or a point query is invalid."""


class ConcatenationError(ValueError):
    """Endpoint mismatch beyond the matching tolerance."""


class SplitError(ValueError):
    """Nothing to split, or the sampling is too coarse for the cut window."""


# Relative tolerance for snapping query coordinates onto sample times and for
# validating interval contiguity; results themselves are exact slices.
_SNAP_RTOL = 1e-9


@dataclass(frozen=True, order=False)
class HybridTime:
    """A point (t, j): flow time t >= 0 and jump count j >= 0."""

    t: float
    j: int

    def __post_init__(self):
        if self.t < 0 or self.j < 0:
            raise DomainError(f"hybrid time must be nonnegative, got ({self.t}, {self.j})")

    @property
    def total(self) -> float:
        return self.t + self.j

    def _key(self):
        return (self.total, self.j)

    def __lt__(self, other: "HybridTime"):
        return self._key() < other._key()

    def __le__(self, other: "HybridTime"):
        return self._key() <= other._key()


@dataclass(frozen=True)
class HybridTimeDomain:
    """Ordered flow intervals (t_start, t_end, j) with consecutive j from 0."""

    intervals: tuple[tuple[float, float, int], ...]
    unbounded: bool = False

    def __post_init__(self):
        ivs = self.intervals
        if not ivs:
            raise DomainError("domain needs at least one interval")
        if ivs[0][2] != 0:
            raise DomainError("first interval must carry j=0")
        if ivs[0][0] != 0.0:
            raise DomainError("domain must start at t=0")
        for idx, (a, b, j) in enumerate(ivs):
            if b < a:
                raise DomainError(f"interval {idx} has t_end < t_start")
            if j != ivs[0][2] + idx:
                raise DomainError("jump indices must be consecutive")
            if idx > 0:
                prev_end = ivs[idx - 1][1]
                scale = 1.0 + abs(prev_end)
                if abs(a - prev_end) > _SNAP_RTOL * scale:
                    raise DomainError(
                        f"interval {idx} must start where interval {idx-1} ends "
                        f"({a} != {prev_end})"
                    )

    @property
    def length(self) -> float:
        if self.unbounded:
            return math.inf
        a, b, j = self.intervals[-1]
        return b + j

    def contains(self, at: HybridTime, rtol: float = _SNAP_RTOL) -> bool:
        for a, b, j in self.intervals:
            if j == at.j:
                slack = rtol * (1.0 + abs(b))
                return a - slack <= at.t <= b + slack
        return False

    def to_json(self) -> str:
        return json.dumps([[a, b, j] for a, b, j in self.intervals])

    @classmethod
    def from_json(cls, text: str) -> "HybridTimeDomain":
        raw = json.loads(text)
        return cls(tuple((float(a), float(b), int(j)) for a, b, j in raw))


@dataclass(frozen=True)
class HybridSequenceDomain:
    """Staircase of (k, j) index pairs, starting at (0, 0)."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.steps or self.steps[0] != (0, 0):
            raise DomainError("sequence domain must start at (0, 0)")
        for (k0, j0), (k1, j1) in zip(self.steps, self.steps[1:]):
            if (k1 - k0, j1 - j0) not in ((1, 0), (0, 1)):
                raise DomainError(
                    f"sequence step ({k0},{j0})->({k1},{j1}) must increment exactly "
                    "one coordinate by 1"
                )

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def max_k(self) -> int:
        return self.steps[-1][0]

    @property
    def max_j(self) -> int:
        return self.steps[-1][1]


@dataclass(frozen=True)
class HybridSequence:
    """States on a hybrid sequence domain, one row per (k, j)."""

    domain: HybridSequenceDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.domain):
            raise DomainError("values must be (len(domain), d)")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def value(self, k: int, j: int) -> np.ndarray:
        for idx, kj in enumerate(self.domain.steps):
            if kj == (k, j):
                return self.values[idx]
        raise DomainError(f"({k},{j}) not in domain")


@dataclass(frozen=True)
class _Segment:
    """One flow interval of an arc: absolute times plus state samples."""

    j: int
    times: np.ndarray
    values: np.ndarray


class HybridArc:
    """Sampled single-valued trajectory on a hybrid time domain.

    Segment arrays store absolute coordinates; the arc's own (0, 0) is the
    first sample of the first segment, and effective coordinates subtract
    that origin on access.
    """

    __slots__ = ("_segments",)

    def __init__(self, segments: Sequence[_Segment], _validated: bool = False):
        segs = tuple(segments)
        if not segs:
            raise DomainError("arc needs at least one segment")
        if not _validated:
            d = segs[0].values.shape[1]
            for idx, seg in enumerate(segs):
                if seg.times.ndim != 1 or seg.values.shape != (seg.times.size, d):
                    raise DomainError(f"segment {idx}: times/values shape mismatch")
                if seg.times.size == 0:
                    raise DomainError(f"segment {idx} is empty")
                if np.any(np.diff(seg.times) <= 0):
                    raise DomainError(f"segment {idx}: times must strictly ascend")
                if seg.j != segs[0].j + idx:
                    raise DomainError("segment jump indices must be consecutive")
                if idx > 0:
                    prev_end = segs[idx - 1].times[-1]
                    if abs(seg.times[0] - prev_end) > _SNAP_RTOL * (1.0 + abs(prev_end)):
                        raise DomainError(
                            f"segment {idx} must start where segment {idx-1} ends"
                        )
        self._segments = segs

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_samples(
        cls, segments: Iterable[tuple[int, Sequence[float], np.ndarray]]
    ) -> "HybridArc":
        """Build from (j, times, values) triples in effective coordinates."""
        segs = []
        for j, times, values in segments:
            t = np.asarray(times, dtype=np.float64)
            v = np.atleast_2d(np.asarray(values, dtype=np.float64))
            if v.shape[0] != t.size:
                v = v.T
            segs.append(_Segment(int(j), t, v))
        if segs and (segs[0].times[0] != 0.0 or segs[0].j != 0):
            raise DomainError("arc must start at (0, 0)")
        return cls(segs)

    @classmethod
    def from_flow(
        cls, fn: Callable[[float], np.ndarray], t_end: float, dt: float, t0: float = 0.0
    ) -> "HybridArc":
        """Flow-only arc sampling fn on a uniform grid of [0, t_end]."""
        n = max(1, int(round(t_end / dt)))
        times = np.linspace(0.0, t_end, n + 1)
        values = np.array([np.atleast_1d(np.asarray(fn(t0 + t), dtype=np.float64)) for t in times])
        return cls([_Segment(0, times, values)])

    @classmethod
    def constant(cls, x: np.ndarray, t_end: float = 0.0, dt: float = 1.0) -> "HybridArc":
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if t_end == 0.0:
            return cls([_Segment(0, np.array([0.0]), x[None, :])])
        return cls.from_flow(lambda t: x, t_end, dt)

    # -- coordinates -----------------------------------------------------------

    @property
    def _t0(self) -> float:
        return float(self._segments[0].times[0])

    @property
    def _j0(self) -> int:
        return self._segments[0].j

    @property
    def d(self) -> int:
        return self._segments[0].values.shape[1]

    @property
    def domain(self) -> HybridTimeDomain:
        t0, j0 = self._t0, self._j0
        return HybridTimeDomain(
            tuple(
                (float(s.times[0] - t0), float(s.times[-1] - t0), s.j - j0)
                for s in self._segments
            )
        )

    @property
    def length(self) -> float:
        s = self._segments[-1]
        return float(s.times[-1] - self._t0) + (s.j - self._j0)

    @property
    def last_point(self) -> HybridTime:
        s = self._segments[-1]
        return HybridTime(float(s.times[-1] - self._t0), s.j - self._j0)

    @property
    def is_trivial(self) -> bool:
        return len(self._segments) == 1 and self._segments[0].times.size == 1

    def segments_effective(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        """(j, times, values) per segment, in the arc's own coordinates."""
        t0, j0 = self._t0, self._j0
        return [(s.j - j0, s.times - t0, s.values) for s in self._segments]

    def sample_count(self) -> int:
        return sum(s.times.size for s in self._segments)

    def _locate(self, at: HybridTime) -> tuple[int, int]:
        """Locate the sample for ``at``, snapping within a relative tolerance."""
        t0, j0 = self._t0, self._j0
        j_abs = at.j + j0
        for si, seg in enumerate(self._segments):
            if seg.j != j_abs:
                continue
            eff = seg.times - t0
            pi = int(np.argmin(np.abs(eff - at.t)))
            if abs(eff[pi] - at.t) <= _SNAP_RTOL * (1.0 + abs(at.t)):
                return si, pi
            raise DomainError(
                f"({at.t}, {at.j}) is not a sample point of the arc "
                f"(nearest sample t={eff[pi]})"
            )
        raise DomainError(f"({at.t}, {at.j}) not in the arc's domain")

    def value_at(self, t: float, j: int) -> np.ndarray:
        """State at (t, j); linear interpolation between samples in t."""
        t0, j0 = self._t0, self._j0
        j_abs = j + j0
        for seg in self._segments:
            if seg.j != j_abs:
                continue
            eff = seg.times - t0
            slack = _SNAP_RTOL * (1.0 + abs(t))
            if t < eff[0] - slack or t > eff[-1] + slack:
                break
            i = int(np.searchsorted(eff, t, side="right")) - 1
            i = min(max(i, 0), eff.size - 1)
            if abs(eff[i] - t) <= slack or i == eff.size - 1:
                return seg.values[i].copy()
            w = (t - eff[i]) / (eff[i + 1] - eff[i])
            return (1.0 - w) * seg.values[i] + w * seg.values[i + 1]
        raise DomainError(f"({t}, {j}) not in the arc's domain")

    def start_value(self) -> np.ndarray:
        return self._segments[0].values[0].copy()

    def end_value(self) -> np.ndarray:
        return self._segments[-1].values[-1].copy()

    def graph_points(self, T: Optional[float] = None) -> np.ndarray:
        """Stack samples as rows (t, j, x_0..x_{d-1}), optionally cut at t+j <= T."""
        t0, j0 = self._t0, self._j0
        rows = []
        for seg in self._segments:
            eff_t = seg.times - t0
            eff_j = seg.j - j0
            block = np.column_stack(
                [eff_t, np.full(eff_t.size, float(eff_j)), seg.values]
            )
            if T is not None:
                block = block[eff_t + eff_j <= T]
            if block.size:
                rows.append(block)
        if not rows:
            return np.empty((0, 2 + self.d))
        return np.vstack(rows)

    def state_samples(self) -> np.ndarray:
        return np.vstack([s.values for s in self._segments])

    def __eq__(self, other) -> bool:
        if not isinstance(other, HybridArc):
            return NotImplemented
        mine = self.segments_effective()
        theirs = other.segments_effective()
        if len(mine) != len(theirs):
            return False
        for (ja, ta, va), (jb, tb, vb) in zip(mine, theirs):
            if ja != jb or ta.size != tb.size:
                return False
            if not (np.array_equal(ta, tb) and np.array_equal(va, vb)):
                return False
        return True

    def __repr__(self):
        return (
            f"HybridArc(d={self.d}, segments={len(self._segments)}, "
            f"length={self.length:.6g})"
        )


# -- operations ----------------------------------------------------------------


def length(obj) -> float:
    """Hybrid length sup(t+j); +inf for unbounded domains."""
    if isinstance(obj, HybridTimeDomain):
        return obj.length
    return obj.length


def tail(arc: HybridArc, at: HybridTime) -> HybridArc:
    """The arc after ``at``: coordinates shift so ``at`` becomes (0, 0)."""
    si, pi = arc._locate(at)
    segs = list(arc._segments[si:])
    first = segs[0]
    segs[0] = _Segment(first.j, first.times[pi:], first.values[pi:])
    return HybridArc(segs, _validated=True)


def truncate(arc: HybridArc, T: float) -> HybridArc:
    """Restriction to t+j <= T; interpolates an endpoint inside an interval."""
    if T < 0:
        raise DomainError("truncation horizon must be nonnegative")
    if T >= arc.length:
        return arc
    t0, j0 = arc._t0, arc._j0
    out: list[_Segment] = []
    for seg in arc._segments:
        eff_j = seg.j - j0
        totals = (seg.times - t0) + eff_j
        if totals[0] > T:
            break
        keep = int(np.searchsorted(totals, T, side="right"))
        times = seg.times[:keep]
        values = seg.values[:keep]
        if keep < seg.times.size:
            # cut lands strictly inside the interval: add the boundary sample
            t_star_eff = T - eff_j
            prev_eff = float(times[-1] - t0)
            nxt_eff = float(seg.times[keep] - t0)
            if t_star_eff > prev_eff and t_star_eff < nxt_eff:
                w = (t_star_eff - prev_eff) / (nxt_eff - prev_eff)
                v_star = (1.0 - w) * seg.values[keep - 1] + w * seg.values[keep]
                times = np.append(times, t_star_eff + t0)
                values = np.vstack([values, v_star[None, :]])
            out.append(_Segment(seg.j, times, values))
            break
        out.append(_Segment(seg.j, times, values))
    return HybridArc(out, _validated=True)


def concatenate(
    first: HybridArc, second: HybridArc, at: HybridTime, tol: float = 0.0
) -> HybridArc:
    """Join ``second`` onto ``first`` at ``at`` (a sample point of first).

    The values must agree at the junction within ``tol`` (exact when 0).
    When ``second`` is a tail slice cut at ``at``, the result reproduces the
    parent arrays bit-for-bit.
    """
    si, pi = first._locate(at)
    junction = first._segments[si].values[pi]
    start = second.start_value()
    gap = float(np.linalg.norm(junction - start))
    if gap > tol:
        raise ConcatenationError(
            f"endpoint mismatch {gap:.3e} exceeds tolerance {tol:.3e} at ({at.t},{at.j})"
        )

    cut_seg = first._segments[si]
    head = list(first._segments[:si])
    cut_times = cut_seg.times[: pi + 1]
    cut_values = cut_seg.values[: pi + 1]

    B = float(cut_seg.times[pi])
    dt = B - second._t0
    dj = cut_seg.j - second._j0

    segs2 = second._segments
    first_tail = segs2[0]
    if first_tail.times.size > 1:
        merged_times = np.concatenate([cut_times, first_tail.times[1:] + dt])
        merged_values = np.vstack([cut_values, first_tail.values[1:]])
    else:
        merged_times = cut_times
        merged_values = cut_values
    out = head + [_Segment(cut_seg.j, merged_times, merged_values)]
    for seg in segs2[1:]:
        out.append(_Segment(seg.j + dj, seg.times + dt, seg.values))
    return HybridArc(out)


def split_long(arc: HybridArc, tau: float) -> list[HybridArc]:
    """Cut an arc into pieces of hybrid length in [tau, 2*tau+1).

    Cuts land on sample points with position in [tau, tau+1) relative to the
    current piece; concatenating the pieces at their end points reproduces
    the arc exactly. Pieces except possibly the last have length < tau+1.
    """
    if tau <= 0:
        raise SplitError("tau must be positive")
    if arc.length <= tau:
        raise SplitError(f"arc length {arc.length} <= tau, nothing to split")
    pieces: list[HybridArc] = []
    current = arc
    while current.length >= 2 * tau + 1:
        cut = _cut_point(current, tau)
        pieces.append(truncate(current, cut.total))
        current = tail(current, cut)
    pieces.append(current)
    return pieces


def _cut_point(arc: HybridArc, tau: float) -> HybridTime:
    """First sample with total in [tau, tau+1); error if the window is empty."""
    t0, j0 = arc._t0, arc._j0
    for seg in arc._segments:
        eff_j = seg.j - j0
        totals = (seg.times - t0) + eff_j
        idx = int(np.searchsorted(totals, tau, side="left"))
        if idx == totals.size:
            continue
        total = float(totals[idx])
        if total >= tau + 1:
            raise SplitError(
                f"no sample with position in [{tau}, {tau + 1}); sampling too coarse "
                f"(next sample at {total})"
            )
        return HybridTime(float(seg.times[idx] - t0), eff_j)
    raise SplitError("no cut point found")  # pragma: no cover - guarded by length


def split_long_stream(
    extend: Callable[[float], HybridArc], tau: float
) -> Iterator[HybridArc]:
    """Lazy split of an unbounded arc given by finite prefixes.

    ``extend(T)`` must return the arc restricted to length >= T, with samples
    consistent across calls. Yields pieces of length in [tau, tau+1).
    """
    if tau <= 0:
        raise SplitError("tau must be positive")
    consumed = HybridTime(0.0, 0)
    while True:
        prefix = extend(consumed.total + 2 * tau + 2)
        rest = tail(prefix, consumed)
        cut = _cut_point(rest, tau)
        yield truncate(rest, cut.total)
        consumed = HybridTime(consumed.t + cut.t, consumed.j + cut.j)


def reconstruct(pieces: Sequence[HybridArc], tol: float = 0.0) -> HybridArc:
    """Sequentially concatenate split pieces at their end points."""
    result = pieces[0]
    for nxt in pieces[1:]:
        result = concatenate(result, nxt, result.last_point, tol=tol)
    return result


# -- set-valued mappings ---------------------------------------------------------


class HybridMapping:
    """Sampled, possibly multi-valued mapping on hybrid times.

    Holds (t, j) -> {values} with a finite value set per point. Produced by
    generalized concatenation (at most two values at junctions) and by band
    constructions.
    """

    def __init__(
        self,
        points: Sequence[tuple[float, int, np.ndarray]],
        concatenation_times: Sequence[HybridTime] = (),
        segment_lengths: Sequence[float] = (),
    ):
        self._points = [
            (float(t), int(j), np.atleast_2d(np.asarray(v, dtype=np.float64)))
            for t, j, v in points
        ]
        self._points.sort(key=lambda p: (p[0] + p[1], p[1]))
        self.concatenation_times = tuple(concatenation_times)
        self.segment_lengths = tuple(float(s) for s in segment_lengths)

    @property
    def d(self) -> int:
        return self._points[0][2].shape[1]

    @property
    def length(self) -> float:
        t, j, _ = self._points[-1]
        return t + j

    def points(self) -> list[tuple[float, int, np.ndarray]]:
        return list(self._points)

    def totals(self) -> np.ndarray:
        return np.array([t + j for t, j, _ in self._points])

    def values_at(self, t: float, j: int) -> np.ndarray:
        for pt, pj, v in self._points:
            if pj == j and abs(pt - t) <= _SNAP_RTOL * (1.0 + abs(t)):
                return v
        raise DomainError(f"({t}, {j}) not in mapping domain")

    def multivalued_points(self) -> list[tuple[float, int]]:
        out = []
        for t, j, v in self._points:
            if v.shape[0] > 1 and np.unique(v, axis=0).shape[0] > 1:
                out.append((t, j))
        return out

    def graph_points(self, T: Optional[float] = None) -> np.ndarray:
        rows = []
        for t, j, v in self._points:
            if T is not None and t + j > T:
                continue
            block = np.column_stack(
                [np.full(v.shape[0], t), np.full(v.shape[0], float(j)), v]
            )
            rows.append(block)
        if not rows:
            return np.empty((0, 2 + self.d))
        return np.vstack(rows)

    def state_samples(self) -> np.ndarray:
        return np.vstack([v for _, _, v in self._points])

    def tail(self, at: HybridTime) -> "HybridMapping":
        pts = []
        for t, j, v in self._points:
            if j >= at.j and t >= at.t - _SNAP_RTOL * (1.0 + abs(at.t)):
                pts.append((t - at.t, j - at.j, v))
        if not pts:
            raise DomainError(f"({at.t}, {at.j}) leaves an empty tail")
        return HybridMapping(pts)

    def centroid_at(self, t: float, j: int) -> np.ndarray:
        return self.values_at(t, j).mean(axis=0)

    def __repr__(self):
        return f"HybridMapping(d={self.d}, points={len(self._points)})"


def generalized_concatenate(
    links: Sequence[tuple[HybridArc, HybridTime]]
) -> HybridMapping:
    """Glue arcs end-to-start without requiring endpoint matching.

    Junction points carry both the outgoing arc's end value and the incoming
    arc's start value, so the result is at most two-valued there.
    """
    if not links:
        raise DomainError("need at least one link")
    buckets: dict[tuple[float, int], list[np.ndarray]] = {}
    t_off, j_off = 0.0, 0
    concat_times: list[HybridTime] = []
    seg_lengths: list[float] = []
    for idx, (arc, end) in enumerate(links):
        arc._locate(end)  # membership check
        piece = truncate(arc, end.total)
        for j_eff, times, values in piece.segments_effective():
            for t, v in zip(times, values):
                key = (float(t + t_off), j_eff + j_off)
                buckets.setdefault(key, []).append(v)
        last = idx == len(links) - 1
        t_off = t_off + end.t
        j_off = j_off + end.j
        seg_lengths.append(end.total)
        if not last:
            concat_times.append(HybridTime(t_off, j_off))
    points = []
    for (t, j), vals in buckets.items():
        uniq = np.unique(np.vstack(vals), axis=0)
        points.append((t, j, uniq))
    return HybridMapping(points, concat_times, seg_lengths)


# -- graph closeness --------------------------------------------------------------


@dataclass(frozen=True)
class ClosenessReport:
    close: bool
    eps: float
    sup_forward: float
    sup_backward: float
    witness: Optional[tuple[float, float, np.ndarray]] = None

    @property
    def measure(self) -> float:
        return max(self.sup_forward, self.sup_backward)


def _as_graph(obj, T=None) -> np.ndarray:
    return obj.graph_points(T)


def graph_closeness(a, b, T: float, eps: float) -> ClosenessReport:
    """Two-sided graph inclusion test at tolerance eps on [0, T].

    True iff every graph point of ``a`` with t+j <= T is within eps of the
    graph of ``b`` and vice versa, in the metric max(|dt|, |dj|, |dx|); a
    j mismatch therefore costs at least 1. On failure the witness is the
    worst-offending graph point.
    """
    if T < 0 or eps < 0:
        raise DomainError("T and eps must be nonnegative")
    ga_t = _as_graph(a, T)
    gb_t = _as_graph(b, T)
    ga = _as_graph(a)
    gb = _as_graph(b)
    sup_f, i_f = graph_sup_mindist(ga_t, gb)
    sup_b, i_b = graph_sup_mindist(gb_t, ga)
    close = sup_f <= eps and sup_b <= eps
    witness = None
    if not close:
        if sup_f >= sup_b:
            row = ga_t[i_f]
        else:
            row = gb_t[i_b]
        witness = (float(row[0]), float(row[1]), row[2:].copy())
    return ClosenessReport(close, eps, float(sup_f), float(sup_b), witness)


def closeness_measure(a, b, T: float) -> float:
    """Smallest eps at which graph_closeness(a, b, T, eps) holds."""
    ga_t = _as_graph(a, T)
    gb_t = _as_graph(b, T)
    sup_f, _ = graph_sup_mindist(ga_t, _as_graph(b))
    sup_b, _ = graph_sup_mindist(gb_t, _as_graph(a))
    return max(float(sup_f), float(sup_b))


# -- serialization -----------------------------------------------------------------


def arc_to_csv(arc: HybridArc) -> str:
    """CSV with columns t, j, x_0..x_{d-1}, one row per sample."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "j"] + [f"x_{i}" for i in range(arc.d)])
    for j_eff, times, values in arc.segments_effective():
        for t, v in zip(times, values):
            writer.writerow([repr(float(t)), j_eff] + [repr(float(c)) for c in v])
    return buf.getvalue()


def arc_from_csv(text: str) -> HybridArc:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    d = len(header) - 2
    segs: list[tuple[int, list[float], list[list[float]]]] = []
    for row in reader:
        if not row:
            continue
        t = float(row[0])
        j = int(row[1])
        x = [float(c) for c in row[2 : 2 + d]]
        if segs and segs[-1][0] == j:
            segs[-1][1].append(t)
            segs[-1][2].append(x)
        else:
            segs.append((j, [t], [x]))
    return HybridArc.from_samples(
        (j, np.array(ts), np.array(vs)) for j, ts, vs in segs
    )


__all__ = [
    "HybridTime",
    "HybridTimeDomain",
    "HybridSequenceDomain",
    "HybridSequence",
    "HybridArc",
    "HybridMapping",
    "ClosenessReport",
    "DomainError",
    "ConcatenationError",
    "SplitError",
    "length",
    "tail",
    "truncate",
    "concatenate",
    "split_long",
    "split_long_stream",
    "reconstruct",
    "generalized_concatenate",
    "graph_closeness",
    "closeness_measure",
    "arc_to_csv",
    "arc_from_csv",
]
