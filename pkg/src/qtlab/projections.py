"""Projection families over indexed member spaces, with axiom checking.

A family holds member graphs Y and extensional projection sets pi_Y(X). The
projection distance is d_Y(X, Z) = diam_Y(pi_Y(X) u pi_Y(Z)). The checked
axioms, at a cutoff xi:

  (1) diam pi_Y(X) <= xi for all X != Y;
  (2) d_Y(X, Z) > xi implies d_X(Y, Z) <= xi for all distinct X, Y, Z;
  (3) {Y : d_Y(X, Z) > xi} is finite (reported as a count profile here, the
      window being finite already).

Axiom (2) over a triple {A, B, C} with values a = d_A(B, C), b = d_B(A, C),
c = d_C(A, B) says at most one of a, b, c may exceed xi, so the least passing
xi is the max over triples of the second-largest value (joined with the max
diameter from axiom 1). That closed form is what xi_witnessed reports.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .errors import EmptyFamily, IndexClash, LipschitzViolation
from .metric_core import WeightedGraph
from .rationals import as_fraction, rat_str


def cutoff(t, K) -> Fraction:
    """[t]_K: keep t when t >= K (boundary included), else 0."""
    t = as_fraction(t)
    return t if t >= as_fraction(K) else Fraction(0)


class ProjectionFamily:
    """Indexed member graphs plus an extensional projection table."""

    def __init__(self) -> None:
        self._members: dict = {}
        self._proj: dict[tuple, frozenset] = {}
        self._line_params: dict = {}
        self._pair_dist: dict[tuple, Fraction] = {}

    def add_member(self, idx, graph: WeightedGraph, line_params: Optional[dict] = None) -> None:
        """line_params maps vertices to integer positions when the member is a
        unit-length path graph; the interval hull then gives diameters."""
        if idx in self._members:
            raise IndexClash(f"member index {idx!r} already present")
        self._members[idx] = graph
        if line_params is not None:
            self._line_params[idx] = dict(line_params)

    def indices(self) -> list:
        return list(self._members)

    def graph(self, idx) -> WeightedGraph:
        return self._members[idx]

    def member_count(self) -> int:
        return len(self._members)

    def set_projection(self, target, source, vertices: Iterable) -> None:
        vs = frozenset(vertices)
        if not vs:
            raise ValueError(f"empty projection pi_{target!r}({source!r})")
        g = self._members[target]
        for v in vs:
            if not g.has_vertex(v):
                raise ValueError(f"projection vertex {v!r} not in member {target!r}")
        self._proj[(target, source)] = vs

    def projection(self, target, source) -> frozenset:
        return self._proj[(target, source)]

    def has_projection(self, target, source) -> bool:
        return (target, source) in self._proj

    def pairs(self) -> list:
        """Stored (target, source) keys in deterministic order."""
        return sorted(self._proj, key=lambda p: (str(p[0]), str(p[1])))

    def member_distance(self, idx, u, v) -> Fraction:
        if u == v:
            return Fraction(0)
        params = self._line_params.get(idx)
        if params is not None and u in params and v in params:
            return Fraction(abs(params[u] - params[v]))
        key = (idx, u, v) if str(u) <= str(v) else (idx, v, u)
        if key not in self._pair_dist:
            self._pair_dist[key] = self._members[idx].shortest_distance(u, v)
        return self._pair_dist[key]

    def set_diameter(self, idx, vertices) -> Fraction:
        vs = list(vertices)
        if len(vs) <= 1:
            return Fraction(0)
        params = self._line_params.get(idx)
        if params is not None and all(v in params for v in vs):
            ps = [params[v] for v in vs]
            return Fraction(max(ps) - min(ps))
        best = Fraction(0)
        for a, b in itertools.combinations(vs, 2):
            d = self.member_distance(idx, a, b)
            if d > best:
                best = d
        return best

    def prepare_distances(self) -> None:
        """Batch-fill the pair cache for every vertex involved in projections.

        One BFS per involved vertex per member instead of one per pair."""
        involved: dict = {}
        for (tgt, _), vs in self._proj.items():
            involved.setdefault(tgt, set()).update(vs)
        for idx, vs in involved.items():
            if idx in self._line_params:
                continue
            g = self._members[idx]
            vs = sorted(vs, key=str)
            for i, u in enumerate(vs):
                rest = set(vs[i + 1 :])
                if not rest:
                    continue
                dist = g.shortest_from(u, targets=rest)
                for v in vs[i + 1 :]:
                    key = (idx, u, v) if str(u) <= str(v) else (idx, v, u)
                    self._pair_dist[key] = dist[v]


def projection_distance(fam: ProjectionFamily, Y, X, Z) -> Fraction:
    """d_Y(X, Z) = diam of pi_Y(X) u pi_Y(Z) inside Y."""
    return fam.set_diameter(Y, fam.projection(Y, X) | fam.projection(Y, Z))


@dataclass(frozen=True)
class PointRef:
    """A concrete point x in member X; member-only refs leave vertex None."""

    member: object
    vertex: object = None


def extended_distance(fam: ProjectionFamily, Y, x: PointRef, z: PointRef) -> Fraction:
    """d_Y extended to points, by the three-case rule.

    Distinct members on both sides reduce to d_Y(X, Z); a point inside Y pairs
    with the projection of the far side; two points inside Y use Y's metric.
    """
    xin = x.member == Y
    zin = z.member == Y
    if xin and zin:
        return fam.member_distance(Y, x.vertex, z.vertex)
    if xin or zin:
        inner, outer = (x, z) if xin else (z, x)
        pts = {inner.vertex} | set(fam.projection(Y, outer.member))
        return fam.set_diameter(Y, pts)
    return projection_distance(fam, Y, x.member, z.member)


@dataclass
class AxiomReport:
    verdict: bool
    xi: Fraction
    xi_witnessed: Fraction
    strong: bool = False
    complete: bool = True
    members: int = 0
    pairs_checked: int = 0
    triples_checked: int = 0
    max_projection_diameter: Fraction = Fraction(0)
    axiom3_max_count: int = 0
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "strong_axioms": self.strong,
            "complete": self.complete,
            "xi": rat_str(self.xi),
            "xi_witnessed": rat_str(self.xi_witnessed),
            "members": self.members,
            "pairs_checked": self.pairs_checked,
            "triples_checked": self.triples_checked,
            "max_projection_diameter": rat_str(self.max_projection_diameter),
            "axiom3_max_count": self.axiom3_max_count,
            "violations": self.violations[:50],
        }


def _triple_values(fam: ProjectionFamily, idxs, budget: Optional[int]):
    """Yield (triple, (a, b, c)) with d values keyed to each choice of middle."""
    count = 0
    for A, B, C in itertools.combinations(idxs, 3):
        if budget is not None and count >= budget:
            return
        count += 1
        yield (A, B, C), (
            projection_distance(fam, A, B, C),
            projection_distance(fam, B, A, C),
            projection_distance(fam, C, A, B),
        )


def verify_axioms(
    fam: ProjectionFamily,
    xi,
    triple_budget: Optional[int] = None,
    strong: bool = False,
) -> AxiomReport:
    """Check axioms (1)-(3) at cutoff xi; also the strong variant on request.

    The strong variant additionally requires pi_X(Y) == pi_X(Z) as sets once
    d_Y(X, Z) > xi. A blown triple budget returns a report flagged incomplete
    instead of raising.
    """
    xi = as_fraction(xi)
    idxs = sorted(fam.indices(), key=str)
    if not idxs:
        raise EmptyFamily("verify_axioms needs at least one member")
    fam.prepare_distances()
    report = AxiomReport(
        verdict=True, xi=xi, xi_witnessed=Fraction(0), strong=strong, members=len(idxs)
    )
    witness = Fraction(0)
    for Y, X in itertools.permutations(idxs, 2):
        diam = fam.set_diameter(Y, fam.projection(Y, X))
        report.pairs_checked += 1
        if diam > report.max_projection_diameter:
            report.max_projection_diameter = diam
        if diam > witness:
            witness = diam
        if diam > xi:
            report.violations.append(
                {"axiom": 1, "target": str(Y), "source": str(X), "diam": rat_str(diam)}
            )
    total = len(idxs) * (len(idxs) - 1) * (len(idxs) - 2) // 6
    if triple_budget is not None and total > triple_budget:
        report.complete = False
    exceed_counts: dict[tuple, int] = {}
    for (A, B, C), (a, b, c) in _triple_values(fam, idxs, triple_budget):
        report.triples_checked += 1
        second = sorted((a, b, c))[1]
        if second > witness:
            witness = second
        if second > xi:
            report.violations.append(
                {
                    "axiom": 2,
                    "triple": [str(A), str(B), str(C)],
                    "values": [rat_str(a), rat_str(b), rat_str(c)],
                }
            )
        for mid, val in ((A, a), (B, b), (C, c)):
            if val > xi:
                pair = tuple(sorted((str(x) for x in (A, B, C) if x != mid)))
                exceed_counts[pair] = exceed_counts.get(pair, 0) + 1
        if strong:
            for mid, others, val in ((A, (B, C), a), (B, (A, C), b), (C, (A, B), c)):
                for tgt in others:
                    far = others[0] if tgt is others[1] else others[1]
                    if fam.projection(tgt, mid) != fam.projection(tgt, far):
                        # val must stay at or below the cutoff for this triple
                        if val > xi:
                            report.violations.append(
                                {
                                    "axiom": "strong",
                                    "middle": str(mid),
                                    "target": str(tgt),
                                    "far": str(far),
                                    "d": rat_str(val),
                                }
                            )
                        if val > witness:
                            witness = val
    report.axiom3_max_count = max(exceed_counts.values(), default=0)
    report.xi_witnessed = witness
    report.verdict = not report.violations
    return report


def check_strong_axioms(
    fam: ProjectionFamily, xi, triple_budget: Optional[int] = None
) -> AxiomReport:
    return verify_axioms(fam, xi, triple_budget=triple_budget, strong=True)


def pushforward_family(
    fam: ProjectionFamily,
    vertex_maps: dict,
    target_graphs: dict,
    L,
    line_params: Optional[dict] = None,
) -> ProjectionFamily:
    """Map every member through its vertex map, checking the edge Lipschitz
    bound d'(f(u), f(v)) <= L * len(u, v); violations raise with a witness."""
    L = as_fraction(L)
    out = ProjectionFamily()
    for idx in fam.indices():
        g = fam.graph(idx)
        vmap = vertex_maps[idx]
        h = target_graphs[idx]
        for u, v, ln in g.edges():
            du = h.shortest_distance(vmap[u], vmap[v])
            if du > L * ln:
                raise LipschitzViolation(
                    f"member {idx!r} edge ({u!r}, {v!r}): image distance {du} "
                    f"> {L} * {ln}"
                )
        out.add_member(idx, h, line_params=(line_params or {}).get(idx))
    for (tgt, src), vs in fam._proj.items():
        out.set_projection(tgt, src, {vertex_maps[tgt][v] for v in vs})
    return out


def _encode_vertex(v):
    if isinstance(v, tuple):
        return ["t"] + [_encode_vertex(x) for x in v]
    if isinstance(v, str):
        return ["s", v]
    if isinstance(v, int):
        return ["i", v]
    if isinstance(v, Fraction):
        return ["q", rat_str(v)]
    raise TypeError(f"vertex {v!r} not JSON-encodable")


def _decode_vertex(e):
    tag = e[0]
    if tag == "t":
        return tuple(_decode_vertex(x) for x in e[1:])
    if tag == "s":
        return e[1]
    if tag == "i":
        return e[1]
    if tag == "q":
        return Fraction(e[1])
    raise ValueError(f"bad vertex encoding {e!r}")


def family_to_json(fam: ProjectionFamily) -> str:
    doc = {"members": [], "projections": []}
    for idx in sorted(fam.indices(), key=str):
        g = fam.graph(idx)
        rows = []
        for u, v, ln in g.edges():
            eu, ev = _encode_vertex(u), _encode_vertex(v)
            if json.dumps(eu) > json.dumps(ev):
                eu, ev = ev, eu
            rows.append([eu, ev, rat_str(ln)])
        edges = sorted(rows, key=json.dumps)
        verts = sorted([_encode_vertex(v) for v in g.vertices()], key=json.dumps)
        entry = {"index": _encode_vertex(idx), "vertices": verts, "edges": edges}
        params = fam._line_params.get(idx)
        if params is not None:
            entry["line_params"] = sorted(
                [[_encode_vertex(v), n] for v, n in params.items()], key=json.dumps
            )
        doc["members"].append(entry)
    for (tgt, src) in sorted(fam._proj, key=lambda p: (str(p[0]), str(p[1]))):
        doc["projections"].append(
            {
                "target": _encode_vertex(tgt),
                "source": _encode_vertex(src),
                "vertices": sorted(
                    [_encode_vertex(v) for v in fam._proj[(tgt, src)]], key=json.dumps
                ),
            }
        )
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def family_from_json(text: str) -> ProjectionFamily:
    doc = json.loads(text)
    fam = ProjectionFamily()
    for entry in doc["members"]:
        g = WeightedGraph()
        for ev in entry["vertices"]:
            g.add_vertex(_decode_vertex(ev))
        for eu, ev, ln in entry["edges"]:
            g.add_edge(_decode_vertex(eu), _decode_vertex(ev), Fraction(ln))
        params = None
        if "line_params" in entry:
            params = {_decode_vertex(ev): n for ev, n in entry["line_params"]}
        fam.add_member(_decode_vertex(entry["index"]), g, line_params=params)
    for p in doc["projections"]:
        fam.set_projection(
            _decode_vertex(p["target"]),
            _decode_vertex(p["source"]),
            {_decode_vertex(ev) for ev in p["vertices"]},
        )
    return fam
