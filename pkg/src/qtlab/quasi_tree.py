"""Quasi-tree of spaces over a projection family, with formula validation.

Members whose mutual projections through every third member stay at or below
K get bridged by unit edges between their projection sets. Distances in the
resulting carrier are then pinched by the cutoff sum of projection distances:

    (1/4) sum_Y [d_Y(x, z)]_K  <=  d_C(x, z)  <=  2 sum_Y [d_Y(x, z)]_K + 3K

for K >= 4 xi under the strong axioms. The validator checks both sides with
exact rationals; the bottleneck checker probes tree-likeness of any carrier.
"""

from __future__ import annotations

import csv
import heapq
import io
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import EmptyFamily
from .metric_core import WeightedGraph, to_dot
from .projections import (
    PointRef,
    ProjectionFamily,
    check_strong_axioms,
    cutoff,
    extended_distance,
)
from .rationals import as_fraction, rat_str


@dataclass
class QuasiTreeOfSpaces:
    carrier: WeightedGraph
    bridge_edges: list
    K: Fraction
    family: ProjectionFamily
    bridged_pairs: list = field(default_factory=list)

    def vertex(self, member, v) -> tuple:
        return (member, v)

    def to_dot(self, name: str = "quasitree") -> str:
        attrs = {}
        for u, v in self.bridge_edges:
            attrs[(u, v)] = {"bridge": "1"}
        return to_dot(self.carrier, name=name, edge_attrs=attrs)


def build_quasi_tree(fam: ProjectionFamily, K, check: bool = True) -> QuasiTreeOfSpaces:
    """Assemble the bridged carrier at cutoff K.

    Pairs (X, Z) are bridged iff every third member sees them at distance at
    most K; then every vertex of pi_X(Z) joins every vertex of pi_Z(X) by a
    unit edge. With check=True the strong axioms are probed at xi = K/4 and a
    failure warns (the formula validator is the real contract).
    """
    K = as_fraction(K)
    idxs = sorted(fam.indices(), key=str)
    if not idxs:
        raise EmptyFamily("build_quasi_tree needs at least one member")
    if check and len(idxs) >= 2:
        report = check_strong_axioms(fam, K / 4)
        if not report.verdict:
            warnings.warn(
                f"family fails strong axioms at xi = {rat_str(K / 4)} "
                f"(witnessed {rat_str(report.xi_witnessed)}); "
                "distance formula not guaranteed",
                stacklevel=2,
            )
    carrier = WeightedGraph()
    for idx in idxs:
        g = fam.graph(idx)
        for v in g.vertices():
            carrier.add_vertex((idx, v))
        for u, v, ln in g.edges():
            carrier.add_edge((idx, u), (idx, v), ln)
    bridges = []
    bridged_pairs = []
    for i, X in enumerate(idxs):
        for Z in idxs[i + 1 :]:
            admitted = True
            for Y in idxs:
                if Y == X or Y == Z:
                    continue
                if not (fam.has_projection(Y, X) and fam.has_projection(Y, Z)):
                    continue
                d = fam.set_diameter(Y, fam.projection(Y, X) | fam.projection(Y, Z))
                if d > K:
                    admitted = False
                    break
            if not admitted:
                continue
            bridged_pairs.append((X, Z))
            for u in sorted(fam.projection(X, Z), key=str):
                for v in sorted(fam.projection(Z, X), key=str):
                    carrier.add_edge((X, u), (Z, v), 1)
                    bridges.append(((X, u), (Z, v)))
    return QuasiTreeOfSpaces(
        carrier=carrier, bridge_edges=bridges, K=K, family=fam, bridged_pairs=bridged_pairs
    )


@dataclass
class FormulaReport:
    K: Fraction
    slack: bool
    verdict: bool
    pairs: int = 0
    failures: int = 0
    rows: list = field(default_factory=list)
    worst_lower_margin: Optional[Fraction] = None
    worst_upper_margin: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "K": rat_str(self.K),
            "slack": self.slack,
            "pairs": self.pairs,
            "failures": self.failures,
            "worst_lower_margin": (
                None if self.worst_lower_margin is None else rat_str(self.worst_lower_margin)
            ),
            "worst_upper_margin": (
                None if self.worst_upper_margin is None else rat_str(self.worst_upper_margin)
            ),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair", "lhs", "mid", "rhs", "margin"])
        for r in self.rows:
            w.writerow(
                [
                    r["pair"],
                    rat_str(r["lhs"]),
                    rat_str(r["mid"]),
                    rat_str(r["rhs"]),
                    rat_str(r["margin"]),
                ]
            )
        return buf.getvalue()


def _point_label(member, v) -> str:
    return f"{member}|{v}"


def validate_distance_formula(
    qt: QuasiTreeOfSpaces, samples, slack: bool = False
) -> FormulaReport:
    """Check the two-sided cutoff-sum formula on carrier vertex pairs.

    Each sample is ((X, x), (Z, z)) naming member and vertex. slack widens
    the constants to (1/8, 4, +3K) for perturbed-endpoint tolerance.
    """
    fam = qt.family
    K = qt.K
    lo_coef = Fraction(1, 8) if slack else Fraction(1, 4)
    hi_coef = Fraction(4) if slack else Fraction(2)
    report = FormulaReport(K=K, slack=slack, verdict=True)
    idxs = sorted(fam.indices(), key=str)
    for (X, x), (Z, z) in samples:
        px, pz = PointRef(X, x), PointRef(Z, z)
        total = Fraction(0)
        for Y in idxs:
            total += cutoff(extended_distance(fam, Y, px, pz), K)
        dist = qt.carrier.shortest_distance((X, x), (Z, z))
        lhs = lo_coef * total
        rhs = hi_coef * total + 3 * K
        lower_margin = dist - lhs
        upper_margin = rhs - dist
        ok = lower_margin >= 0 and upper_margin >= 0
        report.pairs += 1
        if not ok:
            report.failures += 1
            report.verdict = False
        if report.worst_lower_margin is None or lower_margin < report.worst_lower_margin:
            report.worst_lower_margin = lower_margin
        if report.worst_upper_margin is None or upper_margin < report.worst_upper_margin:
            report.worst_upper_margin = upper_margin
        report.rows.append(
            {
                "pair": f"{_point_label(X, x)} -- {_point_label(Z, z)}",
                "lhs": lhs,
                "mid": dist,
                "rhs": rhs,
                "margin": min(lower_margin, upper_margin),
                "ok": ok,
            }
        )
    return report


def _dijkstra_banned(g: WeightedGraph, s, t, banned_edge):
    """Shortest path avoiding one undirected edge; None when disconnected."""
    bu, bv = banned_edge
    dist = {s: Fraction(0)}
    prev = {}
    heap = [(Fraction(0), 0, s)]
    counter = 1
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == t:
            path = [t]
            while path[-1] != s:
                path.append(prev[path[-1]])
            path.reverse()
            return d, path
        for v, ln in g._adj[u].items():
            if (u == bu and v == bv) or (u == bv and v == bu):
                continue
            nd = d + ln
            if v not in dist or nd < dist[v] or (nd == dist[v] and str(u) < str(prev.get(v, u))):
                if v not in done:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, counter, v))
                    counter += 1
    return None


@dataclass
class BottleneckReport:
    delta: Fraction
    verdict: bool
    pairs: int = 0
    alternatives: int = 0
    worst_delta: Fraction = Fraction(0)
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "delta": rat_str(self.delta),
            "pairs": self.pairs,
            "alternatives": self.alternatives,
            "worst_delta": rat_str(self.worst_delta),
        }


def bottleneck_check(g: WeightedGraph, samples, delta) -> BottleneckReport:
    """Probe tree-likeness: alternative routes must pass near midpoints.

    For each sampled pair a shortest path is taken, its metric midpoint vertex
    m fixed, and for every edge of that path the best route avoiding the edge
    is found; the distance from that route to m is the witnessed delta. Trees
    witness 0 (no alternatives); a 4n-cycle witnesses about n.
    """
    delta = as_fraction(delta)
    report = BottleneckReport(delta=delta, verdict=True)
    for x, y in samples:
        total, path = g.shortest_path(x, y)
        half = total / 2
        mid = path[0]
        walked = Fraction(0)
        best_off = half
        for u, v in zip(path, path[1:]):
            walked += g.edge_length(u, v)
            off = abs(walked - half)
            if off < best_off:
                best_off = off
                mid = v
        from_mid = g.shortest_from(mid)
        pair_delta = Fraction(0)
        alts = 0
        for u, v in zip(path, path[1:]):
            found = _dijkstra_banned(g, x, y, (u, v))
            if found is None:
                continue
            alts += 1
            approach = min(from_mid[w] for w in found[1])
            if approach > pair_delta:
                pair_delta = approach
        report.pairs += 1
        report.alternatives += alts
        if pair_delta > report.worst_delta:
            report.worst_delta = pair_delta
        report.rows.append(
            {"pair": f"{x} -- {y}", "delta": pair_delta, "alternatives": alts}
        )
    report.verdict = report.worst_delta <= delta
    return report
