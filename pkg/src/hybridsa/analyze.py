"""Limit-set analysis of sample paths: omega estimates, chains, recurrence.

Chains are finite sequences of solution segments, each of hybrid length at
least tau, whose endpoints match the next waypoint within eps; the
chain-recurrent surrogate is the set of reach-graph nodes lying on directed
cycles. All estimators are desk-scale: fixed (tau, eps, net radius) with
stored simulation witnesses for replay.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._kernels import directed_hausdorff, hausdorff
from .hybrid_time import (
    HybridArc,
    HybridMapping,
    HybridTime,
    arc_from_csv,
    arc_to_csv,
    closeness_measure,
    tail,
    truncate,
)
from .simulate import (
    Horizon,
    JumpPolicy,
    PREFER_FLOW,
    PREFER_JUMP,
    SimulationResult,
    StepSchedule,
    compress,
    euler_simulate,
    interpolate,
)
from .system import HybridSystem, SetRegion, verify_solution


class BoundednessError(ValueError):
    pass


class AnalysisHorizonError(ValueError):
    pass


# -- omega limits -------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaEstimate:
    points: np.ndarray
    tail_threshold: float
    hausdorff_trace: tuple[tuple[float, float], ...]
    converged: bool
    eps_used: float

    def distance_to(self, target: np.ndarray) -> float:
        """sup over the cloud of the distance to a finite target set."""
        target = np.atleast_2d(np.asarray(target, dtype=np.float64))
        return directed_hausdorff(self.points, target)


def _totals_and_values(obj) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(obj, SimulationResult):
        obj = compress(obj)
    if isinstance(obj, HybridMapping):
        totals = obj.totals()
        values = obj.state_samples()
        reps = np.array([v.shape[0] for _, _, v in obj.points()])
        totals = np.repeat(totals, reps)
        return totals, values
    if isinstance(obj, HybridArc):
        g = obj.graph_points()
        return g[:, 0] + g[:, 1], g[:, 2:]
    raise TypeError(f"cannot take omega estimate of {type(obj).__name__}")


def omega_estimate(
    obj,
    thresholds: Optional[Sequence[float]] = None,
    eps: float = 0.05,
    bound: float = 1e12,
) -> OmegaEstimate:
    """Tail value clouds S_n at increasing position thresholds n.

    The estimate is the last cloud; the Hausdorff trace between consecutive
    clouds documents stabilization, and the run converges when the
    second-to-last cloud already sits within eps of the estimate. Default
    thresholds are 25/50/75/90% of the recorded length.
    """
    totals, values = _totals_and_values(obj)
    if not np.all(np.isfinite(values)) or np.max(np.linalg.norm(values, axis=1)) > bound:
        raise BoundednessError("input values are unbounded; omega estimate undefined")
    top = float(totals.max())
    if thresholds is None:
        thresholds = [0.25 * top, 0.5 * top, 0.75 * top, 0.9 * top]
    thresholds = sorted(float(x) for x in thresholds)
    if thresholds[-1] >= top:
        raise AnalysisHorizonError(
            f"max threshold {thresholds[-1]} exceeds recorded length {top}"
        )
    clouds = []
    for thr in thresholds:
        cloud = values[totals >= thr]
        if cloud.shape[0] == 0:
            raise AnalysisHorizonError(f"no domain points past threshold {thr}")
        clouds.append(cloud)
    trace = []
    for thr, a, b in zip(thresholds[1:], clouds, clouds[1:]):
        trace.append((thr, hausdorff(a, b)))
    converged = True
    if len(clouds) >= 2:
        converged = directed_hausdorff(clouds[-2], clouds[-1]) <= eps
    return OmegaEstimate(
        points=clouds[-1],
        tail_threshold=thresholds[-1],
        hausdorff_trace=tuple(trace),
        converged=bool(converged),
        eps_used=eps,
    )


# -- chains ---------------------------------------------------------------------------


@dataclass
class Chain:
    """Candidate (tau, eps)-chain: links (arc, end time) plus waypoints."""

    links: list[tuple[HybridArc, HybridTime]]
    waypoints: np.ndarray  # (k*+1, d)
    tau: float
    eps: float
    internal_region: Optional[SetRegion] = None

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=np.float64))
        if len(self.links) + 1 != self.waypoints.shape[0]:
            raise ValueError(
                f"{len(self.links)} links need {len(self.links) + 1} waypoints, "
                f"got {self.waypoints.shape[0]}"
            )


@dataclass(frozen=True)
class ChainFailure:
    link: int
    kind: str
    detail: str


@dataclass(frozen=True)
class ChainVerdict:
    valid: bool
    failures: tuple[ChainFailure, ...]


def verify_chain(
    chain: Chain,
    system: HybridSystem,
    internal: bool = False,
    sol_tol: float = 1e-6,
    generalized: bool = False,
    start_tol: float = 1e-9,
) -> ChainVerdict:
    """Check a chain against a system: anchoring, lengths, eps-closeness,
    solution quality, and (internal mode) range containment up to each end.

    Plain mode requires each link to start at its waypoint (within
    start_tol); generalized mode relaxes the first link's start to within
    eps of the first waypoint.
    """
    failures: list[ChainFailure] = []
    for m, (arc, end) in enumerate(chain.links):
        start_gap = float(np.linalg.norm(arc.start_value() - chain.waypoints[m]))
        allowed = chain.eps if (generalized and m == 0) else start_tol
        if start_gap > allowed:
            failures.append(ChainFailure(m, "start", f"start gap {start_gap:.3e} > {allowed:.3e}"))
        try:
            arc._locate(end)
        except Exception as exc:
            failures.append(ChainFailure(m, "end", f"end time not in domain: {exc}"))
            continue
        if end.total < chain.tau:
            failures.append(
                ChainFailure(m, "length", f"segment length {end.total:.6g} < tau {chain.tau}")
            )
        target = chain.waypoints[m + 1]
        hop = float(np.linalg.norm(arc.value_at(end.t, end.j) - target))
        if hop > chain.eps:
            failures.append(
                ChainFailure(m, "closeness", f"waypoint gap {hop:.3e} > eps {chain.eps}")
            )
        report = verify_solution(arc, system, sol_tol)
        if not report.passed:
            failures.append(ChainFailure(m, "solution", report.witness or "solution check failed"))
        if internal:
            if chain.internal_region is None:
                failures.append(ChainFailure(m, "internal", "no internal region attached"))
            else:
                g = arc.graph_points(T=end.total)
                for row in g:
                    if not chain.internal_region.contains(row[2:]):
                        failures.append(
                            ChainFailure(
                                m, "internal",
                                f"range leaves the region at (t={row[0]:.6g}, j={int(row[1])})",
                            )
                        )
                        break
    return ChainVerdict(not failures, tuple(failures))


# -- reach graphs ---------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    witness: int  # index into ReachGraph.witnesses
    end: HybridTime


@dataclass
class ReachGraph:
    nodes: np.ndarray
    edges: dict[int, list[Edge]]
    witnesses: list[HybridArc]
    tau: float
    eps: float
    net_radius: float
    region: SetRegion
    internal: bool
    partial: bool = False

    def successors(self, u: int) -> list[int]:
        return [e.v for e in self.edges.get(u, [])]

    def adjacency(self) -> dict[int, list[int]]:
        return {u: sorted({e.v for e in es}) for u, es in self.edges.items()}

    def edge_between(self, u: int, v: int) -> Optional[Edge]:
        for e in self.edges.get(u, []):
            if e.v == v:
                return e
        return None


def _net_nodes(region: SetRegion, net_radius: float) -> np.ndarray:
    if region.bounding_box is None:
        raise ValueError("region needs a bounding box to build a net")
    lo, hi = region.bounding_box
    axes = []
    for i in range(lo.size):
        n = max(1, int(math.floor((hi[i] - lo[i]) / net_radius)) + 1)
        axes.append(lo[i] + net_radius * np.arange(n + 1)[: n + 1])
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    keep = np.array([region.membership(p) for p in mesh])
    return mesh[keep]


def _default_variants(n_variants: int, seed: int) -> list[tuple[JumpPolicy, int]]:
    out = []
    for i in range(n_variants):
        if i % 2 == 0:
            out.append((PREFER_JUMP, i))
        else:
            out.append((JumpPolicy("random", p_jump=0.5, seed=seed + i), i))
    return out


def build_reach_graph(
    system: HybridSystem,
    region: SetRegion,
    net_radius: float,
    tau: float,
    eps: float,
    internal: bool = False,
    budget: Optional[int] = None,
    *,
    n_variants: int = 4,
    seed: int = 0,
    step: Optional[float] = None,
    length_margin: float = 1.0,
    jump_rule: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
) -> ReachGraph:
    """Net the region and connect u -> v when a simulated solution from u
    passes within eps of v at position >= tau (prefix inside the region for
    internal mode). Multiple policy/selection variants run per node; each
    edge stores its witness arc and end time for replay.
    """
    nodes = _net_nodes(region, net_radius)
    h = step if step is not None else min(0.05, max(net_radius / 4.0, 1e-3))
    schedule = StepSchedule.constant(h)
    horizon = Horizon(max_length=tau + length_margin + 2 * h)
    edges: dict[int, list[Edge]] = {}
    witnesses: list[HybridArc] = []
    sims = 0
    partial = False
    variants = _default_variants(n_variants, seed)

    for u, x_u in enumerate(nodes):
        seen: set[int] = set()
        for policy, _variant in variants:
            if budget is not None and sims >= budget:
                partial = True
                break
            sims += 1
            try:
                result = euler_simulate(
                    system, x_u, schedule, policy, horizon, jump_rule=jump_rule,
                )
            except Exception:
                continue
            arc = interpolate(result)
            g = arc.graph_points()
            totals = g[:, 0] + g[:, 1]
            states = g[:, 2:]
            if internal:
                inside = np.array([region.contains(s, inflation=1e-9) for s in states])
                prefix_ok = np.cumprod(inside).astype(bool)
            else:
                prefix_ok = np.ones(totals.size, dtype=bool)
            eligible = (totals >= tau) & prefix_ok
            if not eligible.any():
                continue
            wit_index = None
            dists = np.linalg.norm(states[:, None, :] - nodes[None, :, :], axis=2)
            for v in range(nodes.shape[0]):
                if v in seen:
                    continue
                hits = np.flatnonzero(eligible & (dists[:, v] <= eps))
                if hits.size == 0:
                    continue
                if wit_index is None:
                    witnesses.append(arc)
                    wit_index = len(witnesses) - 1
                row = g[hits[0]]
                end = HybridTime(float(row[0]), int(row[1]))
                edges.setdefault(u, []).append(Edge(u, v, wit_index, end))
                seen.add(v)
        if partial:
            break
    return ReachGraph(nodes, edges, witnesses, tau, eps, net_radius, region, internal, partial)


# -- recurrence -----------------------------------------------------------------------


@dataclass(frozen=True)
class RecurrentEstimate:
    nodes: tuple[int, ...]
    classes: tuple[tuple[int, ...], ...]


def _tarjan_scc(adjacency: dict[int, list[int]], n: int) -> list[list[int]]:
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, iter(adjacency.get(root, [])))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if index[child] == -1:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack[child] = True
                    work.append((child, iter(adjacency.get(child, []))))
                    advanced = True
                    break
                if on_stack[child]:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)
    return sccs


def chain_recurrent_estimate(
    graph: Union[ReachGraph, dict[int, list[int]]], n_nodes: Optional[int] = None
) -> RecurrentEstimate:
    """Nodes on directed cycles: nontrivial strongly connected components
    plus self-loop singletons; the classes are the component partition."""
    if isinstance(graph, ReachGraph):
        adjacency = graph.adjacency()
        n = graph.nodes.shape[0]
    else:
        adjacency = {u: sorted(set(vs)) for u, vs in graph.items()}
        n = n_nodes if n_nodes is not None else (
            max([0] + [u for u in adjacency] + [v for vs in adjacency.values() for v in vs]) + 1
        )
    sccs = _tarjan_scc(adjacency, n)
    recurrent: list[int] = []
    classes: list[tuple[int, ...]] = []
    for comp in sccs:
        if len(comp) > 1 or comp[0] in adjacency.get(comp[0], []):
            comp_sorted = tuple(sorted(comp))
            classes.append(comp_sorted)
            recurrent.extend(comp_sorted)
    return RecurrentEstimate(tuple(sorted(recurrent)), tuple(sorted(classes)))


@dataclass(frozen=True)
class ChainSearchFailure:
    reason: str
    reachable: tuple[int, ...] = ()


def find_chain(
    graph: ReachGraph,
    x,
    y,
    system: Optional[HybridSystem] = None,
    sol_tol: float = 1e-6,
) -> Union[Chain, ChainSearchFailure]:
    """Shortest-hop reach-graph path from x's node to y's node, as a Chain.

    Fails when x or y is farther than eps from every node, when no path
    exists, or when the assembled chain does not verify (the returned chain
    always does). x = y on a self-loop node yields a single-link chain.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    du = np.linalg.norm(graph.nodes - x, axis=1)
    dv = np.linalg.norm(graph.nodes - y, axis=1)
    u = int(np.argmin(du))
    v = int(np.argmin(dv))
    if du[u] > graph.eps:
        return ChainSearchFailure(f"x is {du[u]:.3g} from the nearest node (> eps)")
    if dv[v] > graph.eps:
        return ChainSearchFailure(f"y is {dv[v]:.3g} from the nearest node (> eps)")

    # BFS over node hops; a path needs at least one edge
    parent: dict[int, int] = {}
    frontier = [u]
    visited = {u}
    found = u == v and graph.edge_between(u, u) is not None
    if found:
        path = [u, u]
    else:
        path = None
        while frontier and path is None:
            nxt = []
            for a in frontier:
                for b in graph.successors(a):
                    if b == v:
                        parent[b] = a
                        path = [b]
                        break
                    if b not in visited:
                        visited.add(b)
                        parent[b] = a
                        nxt.append(b)
                if path is not None:
                    break
            frontier = nxt
        if path is None:
            return ChainSearchFailure("no path in the reach graph", tuple(sorted(visited)))
        while path[-1] != u:
            path.append(parent[path[-1]])
        path.reverse()

    links: list[tuple[HybridArc, HybridTime]] = []
    waypoints = []
    for a, b in zip(path, path[1:]):
        edge = graph.edge_between(a, b)
        arc = graph.witnesses[edge.witness]
        links.append((arc, edge.end))
        waypoints.append(arc.start_value())
    final_gap = float(np.linalg.norm(
        links[-1][0].value_at(links[-1][1].t, links[-1][1].j) - y
    ))
    if final_gap > graph.eps:
        return ChainSearchFailure(
            f"last witness ends {final_gap:.3g} from y (> eps)", tuple(sorted(visited))
        )
    waypoints.append(y)
    chain = Chain(
        links, np.vstack(waypoints), graph.tau, graph.eps,
        internal_region=graph.region if graph.internal else None,
    )
    if system is not None:
        verdict = verify_chain(chain, system, internal=graph.internal, sol_tol=sol_tol)
        if not verdict.valid:
            return ChainSearchFailure(
                "assembled chain failed verification: "
                + "; ".join(f.detail for f in verdict.failures[:3])
            )
    return chain


# -- invariance and tail closeness ----------------------------------------------------


@dataclass(frozen=True)
class InvarianceReport:
    successes: tuple[bool, ...]
    witnesses: tuple[Optional[int], ...]

    @property
    def all_invariant(self) -> bool:
        return all(self.successes)


def weak_invariance_probe(
    system: HybridSystem,
    region: SetRegion,
    samples: Sequence[np.ndarray],
    T: float,
    tol: float,
    *,
    n_variants: int = 4,
    seed: int = 0,
    step: float = 0.01,
    jump_rule: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
) -> InvarianceReport:
    """For each sample, search policy variants for a simulated solution that
    stays within tol of the region for hybrid length T."""
    schedule = StepSchedule.constant(step)
    horizon = Horizon(max_length=T + 2 * step)
    variants = _default_variants(n_variants, seed)
    successes = []
    witnesses: list[Optional[int]] = []
    for x in samples:
        ok = False
        hit = None
        for policy, variant in variants:
            try:
                result = euler_simulate(
                    system, x, schedule, policy, horizon, jump_rule=jump_rule,
                    guard_eps=max(tol, 1e-9),
                )
            except Exception:
                continue
            g = interpolate(result).graph_points(T=T)
            if g.shape[0] == 0:
                continue
            if all(region.contains(row[2:], inflation=tol) for row in g):
                ok = True
                hit = variant
                break
        successes.append(ok)
        witnesses.append(hit)
    return InvarianceReport(tuple(successes), tuple(witnesses))


@dataclass(frozen=True)
class TailClosenessRow:
    start: HybridTime
    eps_fit: float
    witnesses_tried: int
    inconclusive: bool


@dataclass(frozen=True)
class TailClosenessTable:
    rows: tuple[TailClosenessRow, ...]

    @property
    def is_decaying(self) -> bool:
        fits = [r.eps_fit for r in self.rows if not r.inconclusive]
        return len(fits) >= 2 and fits[-1] < fits[0]


WitnessSource = Callable[[np.ndarray, float], Sequence[HybridArc]]


def _system_witness_source(
    system: HybridSystem, step: float, n_variants: int, seed: int,
    jump_rule=None,
) -> WitnessSource:
    schedule = StepSchedule.constant(step)
    variants = _default_variants(n_variants, seed)

    def source(x0: np.ndarray, T: float) -> list[HybridArc]:
        out = []
        for policy, _ in variants:
            try:
                result = euler_simulate(
                    system, x0, schedule, policy, Horizon(max_length=T + 2 * step),
                    jump_rule=jump_rule,
                )
            except Exception:
                continue
            out.append(interpolate(result))
        return out

    return source


def tail_closeness_diagnostic(
    candidate,
    witness_source: Union[HybridSystem, WitnessSource],
    T: float,
    starts: Sequence[HybridTime],
    *,
    step: float = 0.01,
    n_variants: int = 4,
    seed: int = 0,
) -> TailClosenessTable:
    """Fit, per tail start, the smallest eps at which some witness curve is
    graph-close to the candidate's tail on [0, T] and starts within eps of it.

    A decaying table across increasing starts is the asymptotic-curve
    signature; rows with no usable witness are marked inconclusive.
    """
    if isinstance(witness_source, HybridSystem):
        witness_source = _system_witness_source(witness_source, step, n_variants, seed)
    rows = []
    for at in starts:
        if isinstance(candidate, HybridMapping):
            tail_map = candidate.tail(at)
            start_values = candidate.values_at(at.t, at.j)
            x0 = start_values.mean(axis=0)
        else:
            tail_map = tail(candidate, at)
            x0 = candidate.value_at(at.t, at.j)
            start_values = x0[None, :]
        witnesses = list(witness_source(x0, T))
        best = math.inf
        for w in witnesses:
            fit = closeness_measure(tail_map, truncate(w, min(T, w.length)), T)
            anchor = float(np.min(np.linalg.norm(start_values - w.start_value(), axis=1)))
            best = min(best, max(fit, anchor))
        rows.append(
            TailClosenessRow(at, best, len(witnesses), inconclusive=not witnesses)
        )
    return TailClosenessTable(tuple(rows))


# -- serialization --------------------------------------------------------------------


def save_chain(chain: Chain, directory: Union[str, Path], name: str = "chain") -> Path:
    """Write chain.json plus one CSV per link arc; returns the JSON path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    links = []
    for m, (arc, end) in enumerate(chain.links):
        ref = f"{name}_link_{m}.csv"
        (directory / ref).write_text(arc_to_csv(arc))
        links.append({"arc_ref": ref, "end": [end.t, end.j]})
    payload = {
        "schema_version": 1,
        "waypoints": chain.waypoints.tolist(),
        "links": links,
        "tau": chain.tau,
        "eps": chain.eps,
        "internal": chain.internal_region is not None,
    }
    path = directory / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def load_chain(path: Union[str, Path],
               internal_region: Optional[SetRegion] = None) -> Chain:
    path = Path(path)
    payload = json.loads(path.read_text())
    links = []
    for entry in payload["links"]:
        arc = arc_from_csv((path.parent / entry["arc_ref"]).read_text())
        end = HybridTime(float(entry["end"][0]), int(entry["end"][1]))
        links.append((arc, end))
    return Chain(
        links,
        np.asarray(payload["waypoints"], dtype=np.float64),
        float(payload["tau"]),
        float(payload["eps"]),
        internal_region=internal_region,
    )


def save_reach_graph(graph: ReachGraph, directory: Union[str, Path],
                     name: str = "reach_graph") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, arc in enumerate(graph.witnesses):
        (directory / f"{name}_witness_{i}.csv").write_text(arc_to_csv(arc))
    payload = {
        "schema_version": 1,
        "nodes": graph.nodes.tolist(),
        "edges": [
            {"u": e.u, "v": e.v, "witness_ref": f"{name}_witness_{e.witness}.csv",
             "end": [e.end.t, e.end.j]}
            for es in graph.edges.values() for e in es
        ],
        "tau": graph.tau,
        "eps": graph.eps,
        "net_radius": graph.net_radius,
        "internal": graph.internal,
        "partial": graph.partial,
    }
    path = directory / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


__all__ = [
    "OmegaEstimate", "omega_estimate",
    "Chain", "ChainVerdict", "ChainFailure", "verify_chain",
    "ReachGraph", "Edge", "build_reach_graph",
    "RecurrentEstimate", "chain_recurrent_estimate",
    "ChainSearchFailure", "find_chain",
    "InvarianceReport", "weak_invariance_probe",
    "TailClosenessRow", "TailClosenessTable", "tail_closeness_diagnostic",
    "save_chain", "load_chain", "save_reach_graph",
    "BoundednessError", "AnalysisHorizonError",
]
