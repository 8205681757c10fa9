"""Exact graph metrics: weighted graphs, free-group tree windows, lines.

Distances are exact rationals throughout. Dijkstra runs on integer weights
after clearing denominators; graphs whose scaled weights are all equal fall
back to plain BFS.
"""

from __future__ import annotations

import heapq
import itertools
import random
from collections import deque
from fractions import Fraction
from typing import Hashable, Iterable, Iterator, Optional, Sequence, Union

from . import words
from .errors import BudgetExceeded, DisconnectedPair, RadiusExceeded, UnsupportedFormat
from .rationals import as_fraction

Vertex = Hashable


class WeightedGraph:
    """Undirected graph with positive rational edge lengths (default 1)."""

    def __init__(self) -> None:
        self._adj: dict[Vertex, dict[Vertex, Fraction]] = {}
        self._dirty = True
        self._scale = 1
        self._uniform: Optional[Fraction] = None
        self._iadj: dict[Vertex, list[tuple[Vertex, int]]] = {}

    def add_vertex(self, v: Vertex) -> None:
        if v not in self._adj:
            self._adj[v] = {}
            self._dirty = True

    def add_edge(self, u: Vertex, v: Vertex, length=1) -> None:
        ln = as_fraction(length)
        if ln <= 0:
            raise ValueError(f"edge length must be positive, got {ln}")
        if u == v:
            raise ValueError("loops are not allowed")
        self.add_vertex(u)
        self.add_vertex(v)
        old = self._adj[u].get(v)
        # re-adding an edge keeps the shorter length so unions are idempotent
        if old is None or ln < old:
            self._adj[u][v] = ln
            self._adj[v][u] = ln
            self._dirty = True

    def has_vertex(self, v: Vertex) -> bool:
        return v in self._adj

    def has_edge(self, u: Vertex, v: Vertex) -> bool:
        return u in self._adj and v in self._adj[u]

    def edge_length(self, u: Vertex, v: Vertex) -> Fraction:
        return self._adj[u][v]

    def vertices(self) -> Iterator[Vertex]:
        return iter(self._adj)

    def vertex_count(self) -> int:
        return len(self._adj)

    def edge_count(self) -> int:
        return sum(len(nb) for nb in self._adj.values()) // 2

    def edges(self) -> Iterator[tuple[Vertex, Vertex, Fraction]]:
        seen = set()
        for u, nb in self._adj.items():
            for v, ln in nb.items():
                if v not in seen:
                    yield (u, v, ln)
            seen.add(u)

    def neighbors(self, v: Vertex) -> Iterator[Vertex]:
        return iter(self._adj[v])

    def _prepare(self) -> None:
        if not self._dirty:
            return
        denoms = {ln.denominator for _, _, ln in self.edges()}
        scale = 1
        for d in denoms:
            scale = scale * d // _gcd(scale, d)
        self._scale = scale
        weights = set()
        iadj: dict[Vertex, list[tuple[Vertex, int]]] = {v: [] for v in self._adj}
        for u, nb in self._adj.items():
            row = iadj[u]
            for v, ln in nb.items():
                w = int(ln * scale)
                row.append((v, w))
                weights.add(w)
        self._iadj = iadj
        self._uniform = (
            Fraction(next(iter(weights)), scale) if len(weights) == 1 else None
        )
        self._dirty = False

    def shortest_from(
        self, source: Vertex, targets: Optional[set] = None
    ) -> dict[Vertex, Fraction]:
        """Exact distances from source; stops early once targets are settled."""
        if source not in self._adj:
            raise DisconnectedPair(f"unknown vertex {source!r}")
        self._prepare()
        remaining = set(targets) if targets is not None else None
        if self._uniform is not None:
            return self._bfs_from(source, remaining)
        scale = self._scale
        dist: dict[Vertex, int] = {source: 0}
        out: dict[Vertex, Fraction] = {}
        heap: list[tuple[int, int, Vertex]] = [(0, 0, source)]
        counter = itertools.count(1)
        done = set()
        iadj = self._iadj
        while heap:
            d, _, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            out[u] = Fraction(d, scale)
            if remaining is not None:
                remaining.discard(u)
                if not remaining:
                    break
            for v, w in iadj[u]:
                nd = d + w
                if v not in done and (v not in dist or nd < dist[v]):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, next(counter), v))
        return out

    def _bfs_from(
        self, source: Vertex, remaining: Optional[set]
    ) -> dict[Vertex, Fraction]:
        unit = self._uniform
        steps: dict[Vertex, int] = {source: 0}
        q = deque([source])
        iadj = self._iadj
        while q:
            u = q.popleft()
            if remaining is not None:
                remaining.discard(u)
                if not remaining:
                    break
            du = steps[u]
            for v, _ in iadj[u]:
                if v not in steps:
                    steps[v] = du + 1
                    q.append(v)
        return {v: unit * k for v, k in steps.items()}

    def shortest_distance(self, x: Vertex, y: Vertex) -> Fraction:
        if x not in self._adj or y not in self._adj:
            raise DisconnectedPair(f"unknown vertex in pair ({x!r}, {y!r})")
        if x == y:
            return Fraction(0)
        dist = self.shortest_from(x, targets={y})
        if y not in dist:
            raise DisconnectedPair(f"no path between {x!r} and {y!r}")
        return dist[y]

    def shortest_path(self, x: Vertex, y: Vertex) -> tuple[Fraction, list[Vertex]]:
        """One shortest path, deterministic (smallest str(vertex) wins ties)."""
        dist = self.shortest_from(x)
        if y not in dist:
            raise DisconnectedPair(f"no path between {x!r} and {y!r}")
        path = [y]
        cur = y
        while cur != x:
            best = None
            for v in self._adj[cur]:
                if v in dist and dist[v] + self._adj[cur][v] == dist[cur]:
                    if best is None or str(v) < str(best):
                        best = v
            path.append(best)
            cur = best
        path.reverse()
        return dist[y], path

    def connected(self, x: Vertex, y: Vertex, banned: Optional[set] = None) -> bool:
        if banned is None:
            banned = set()
        if x in banned or y in banned:
            return False
        seen = {x}
        q = deque([x])
        while q:
            u = q.popleft()
            if u == y:
                return True
            for v in self._adj[u]:
                if v not in seen and v not in banned:
                    seen.add(v)
                    q.append(v)
        return False


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


class FreeTree:
    """Window of the Cayley tree of a free group of the given rank.

    Vertices are freely reduced words of length at most `radius`; word
    arithmetic is exact beyond the window, but materializing operations raise
    RadiusExceeded instead of silently truncating.
    """

    def __init__(self, rank: int, radius: int) -> None:
        if rank < 2:
            raise ValueError(f"free rank must be >= 2, got {rank}")
        if radius < 1:
            raise ValueError(f"radius must be >= 1, got {radius}")
        self.rank = rank
        self.radius = radius
        self.gens = words.generators(rank)
        self.letters = self.gens + self.gens.upper()

    def contains(self, w: str) -> bool:
        return len(w) <= self.radius

    def require(self, w: str, what: str = "vertex") -> str:
        if len(w) > self.radius:
            raise RadiusExceeded(
                f"{what} {w!r} needs radius {len(w)}, window has {self.radius}"
            )
        return w

    def vertices(self) -> Iterator[str]:
        yield ""
        frontier = [""]
        for _ in range(self.radius):
            nxt = []
            for w in frontier:
                for c in self.letters:
                    if not w or w[-1] != c.swapcase():
                        nxt.append(w + c)
            frontier = nxt
            yield from frontier

    def neighbors(self, w: str) -> list[str]:
        self.require(w)
        out = []
        if w:
            out.append(w[:-1])
        if len(w) < self.radius:
            for c in self.letters:
                if not w or w[-1] != c.swapcase():
                    out.append(w + c)
        return out

    def distance(self, u: str, v: str) -> int:
        return words.word_dist(u, v)

    def geodesic(self, u: str, v: str) -> list[str]:
        return words.geodesic(u, v)

    def window_graph(self) -> WeightedGraph:
        g = WeightedGraph()
        for w in self.vertices():
            g.add_vertex(w)
            if w:
                g.add_edge(w[:-1], w)
        return g


class Line:
    """A line: an explicit vertex list in a graph, or an axis in a tree.

    The axis of a cyclically reduced word w conjugated by g is the vertex set
    {g * w^k * u : k in Z, u a proper prefix of w}, parameterized so that
    point(n) = g * w^q * w[:r] with n = q*|w| + r.
    """

    def __init__(self, kind, space, data):
        self.kind = kind
        self.space = space
        self._data = data

    @classmethod
    def explicit(cls, graph: WeightedGraph, vertices: Sequence[Vertex]) -> "Line":
        vs = list(vertices)
        if not vs:
            raise ValueError("explicit line needs at least one vertex")
        for u, v in zip(vs, vs[1:]):
            if not graph.has_edge(u, v):
                raise ValueError(f"line step {u!r} -> {v!r} is not an edge")
        return cls("explicit", graph, {"vertices": vs, "index": {v: i for i, v in enumerate(vs)}})

    @classmethod
    def axis(cls, tree: FreeTree, word: str, conj: str = "") -> "Line":
        if not words.is_cyclically_reduced(word):
            raise ValueError(f"axis word must be cyclically reduced: {word!r}")
        if not words.is_reduced(conj):
            raise ValueError(f"conjugator must be reduced: {conj!r}")
        return cls("axis", tree, {"word": word, "conj": conj})

    @property
    def word(self) -> str:
        return self._data["word"]

    @property
    def conj(self) -> str:
        return self._data["conj"]

    def point(self, n: int) -> Vertex:
        if self.kind == "explicit":
            vs = self._data["vertices"]
            if not (0 <= n < len(vs)):
                raise RadiusExceeded(f"explicit line has no param {n}")
            return vs[n]
        w, g = self.word, self.conj
        q, r = divmod(n, len(w))
        if q >= 0:
            tail = w * q + w[:r]
        else:
            tail = words.mul(words.inv(w) * (-q), w[:r])
        return words.mul(g, tail)

    def params(self) -> Iterable[int]:
        if self.kind == "explicit":
            return range(len(self._data["vertices"]))
        raise ValueError("axis lines are infinite; use a window")

    def param_range_in_window(self) -> tuple[int, int]:
        """Inclusive param range whose points stay inside the tree window."""
        if self.kind != "axis":
            vs = self._data["vertices"]
            return (0, len(vs) - 1)
        tree: FreeTree = self.space
        lo = hi = 0
        if len(self.point(0)) > tree.radius:
            raise RadiusExceeded(f"axis base point {self.point(0)!r} outside window")
        while len(self.point(hi + 1)) <= tree.radius:
            hi += 1
        while len(self.point(lo - 1)) <= tree.radius:
            lo -= 1
        return (lo, hi)

    def window_points(self) -> list[tuple[int, Vertex]]:
        if self.kind == "explicit":
            return list(enumerate(self._data["vertices"]))
        lo, hi = self.param_range_in_window()
        return [(n, self.point(n)) for n in range(lo, hi + 1)]

    def param_of(self, v: Vertex) -> int:
        if self.kind == "explicit":
            idx = self._data["index"]
            if v not in idx:
                raise ValueError(f"{v!r} is not on the line")
            return idx[v]
        param, dist = _axis_param(self.word, self.conj, v)
        if dist != 0:
            raise ValueError(f"{v!r} is not on the axis")
        return param

    def contains(self, v: Vertex) -> bool:
        if self.kind == "explicit":
            return v in self._data["index"]
        _, dist = _axis_param(self.word, self.conj, v)
        return dist == 0


def _axis_param(word: str, conj: str, x: str) -> tuple[int, int]:
    """(projection param, tree distance) of vertex x to the axis (word, conj)."""
    s = words.mul(words.inv(conj), x)
    fwd = words.periodic_prefix_len(s, word)
    if fwd > 0:
        return fwd, len(s) - fwd
    back = words.periodic_prefix_len(s, words.inv(word))
    return -back, len(s) - back


def axis_projection_param(target: Line, x: str) -> tuple[int, int]:
    if target.kind != "axis":
        raise ValueError("axis_projection_param needs an axis line")
    return _axis_param(target.word, target.conj, x)


def tree_projection(
    tree: FreeTree, target: Line, source: Union[str, Line]
) -> list[tuple[int, str]]:
    """Nearest-point projection onto a target axis, as sorted (param, vertex).

    A vertex or a disjoint axis projects to a single vertex; axes sharing
    vertices project onto the shared segment. Raises RadiusExceeded if any
    involved point falls outside the tree window.
    """
    if target.kind != "axis":
        raise ValueError("tree_projection target must be an axis")
    if isinstance(source, str):
        tree.require(source, "source")
        param, _ = _axis_param(target.word, target.conj, source)
        v = target.point(param)
        tree.require(v, "projection")
        return [(param, v)]
    if source.kind != "axis":
        raise ValueError("tree_projection source must be a vertex or an axis")
    # Every point of a disjoint convex set projects to the single bridge foot,
    # so one point projection decides everything: if the foot lies on the
    # source the axes intersect, otherwise the foot is the whole projection.
    s0 = source.point(0)
    param, _ = _axis_param(target.word, target.conj, s0)
    foot = target.point(param)
    tree.require(foot, "projection")
    q_param, _ = _axis_param(source.word, source.conj, foot)
    tree.require(source.point(q_param), "source-side foot")
    if not source.contains(foot):
        return [(param, foot)]
    lo = hi = param
    # materialize as we expand: a shared segment running off the window (in
    # particular a source identical to the target) must raise, not spin
    while source.contains(target.point(hi + 1)):
        hi += 1
        tree.require(target.point(hi), "projection")
    while source.contains(target.point(lo - 1)):
        lo -= 1
        tree.require(target.point(lo), "projection")
    out = []
    for n in range(lo, hi + 1):
        v = target.point(n)
        tree.require(v, "projection")
        out.append((n, v))
    return out


def graph_line_projection(
    graph: WeightedGraph, target: Line, source_vertices: Iterable[Vertex]
) -> list[tuple[int, Vertex]]:
    """Nearest-point set on an explicit target line by exhaustive distances."""
    src = list(source_vertices)
    if not src:
        raise ValueError("empty source set")
    best: Optional[Fraction] = None
    per_target: dict[int, Fraction] = {}
    for s in src:
        dist = graph.shortest_from(s, targets={v for _, v in target.window_points()})
        for n, v in target.window_points():
            if v in dist:
                d = dist[v]
                if n not in per_target or d < per_target[n]:
                    per_target[n] = d
    if not per_target:
        raise DisconnectedPair("source set sees no target vertex")
    best = min(per_target.values())
    return [(n, target.point(n)) for n in sorted(per_target) if per_target[n] == best]


def four_point_delta(
    graph: WeightedGraph,
    quadruples: Optional[Iterable[tuple]] = None,
    samples: int = 0,
    seed: int = 0,
    budget: int = 250_000,
) -> Fraction:
    """Max four-point hyperbolicity defect over the given or sampled quadruples.

    For each quadruple the three pairings of opposite sides are summed, and the
    defect is (largest - second largest) / 2. Empty input gives 0.
    """
    verts = sorted(graph.vertices(), key=str)
    if quadruples is None:
        if samples > 0:
            rng = random.Random(seed)
            if len(verts) < 4:
                quadruples = []
            else:
                quadruples = [tuple(rng.sample(verts, 4)) for _ in range(samples)]
        else:
            n = len(verts)
            count = n * (n - 1) * (n - 2) * (n - 3) // 24
            if count > budget:
                raise BudgetExceeded(
                    f"{count} quadruples exceed budget {budget}; pass samples="
                )
            quadruples = itertools.combinations(verts, 4)
    quadruples = list(quadruples)
    if not quadruples:
        return Fraction(0)
    needed = sorted({v for q in quadruples for v in q}, key=str)
    dist = {v: graph.shortest_from(v, targets=set(needed)) for v in needed}
    worst = Fraction(0)
    for x, y, z, w in quadruples:
        try:
            s = sorted(
                [
                    dist[x][y] + dist[z][w],
                    dist[x][z] + dist[y][w],
                    dist[x][w] + dist[y][z],
                ]
            )
        except KeyError:
            raise DisconnectedPair(f"quadruple {(x, y, z, w)!r} is not connected")
        delta = (s[2] - s[1]) / 2
        if delta > worst:
            worst = delta
    return worst


def fit_quasi_geodesic_constants(
    graph: WeightedGraph, path: Sequence[Vertex]
) -> tuple[Fraction, Fraction, tuple[int, int]]:
    """Minimal lambda >= 1 (c = lambda) making the path a quasi-geodesic.

    Over all subpath endpoint pairs (i, j) the binding inequality is
    arc(i, j) <= lambda * d(i, j) + c; with the c = lambda convention this
    gives lambda = max(1, max arc/(d+1)). The reverse inequality
    d <= lambda * arc + c holds automatically. Returns (lambda, c, witness).
    """
    vs = list(path)
    if len(vs) < 2:
        return Fraction(1), Fraction(1), (0, 0)
    arc = [Fraction(0)]
    for u, v in zip(vs, vs[1:]):
        if not graph.has_edge(u, v):
            raise ValueError(f"path step {u!r} -> {v!r} is not an edge")
        arc.append(arc[-1] + graph.edge_length(u, v))
    uniq = sorted(set(vs), key=str)
    dist = {v: graph.shortest_from(v, targets=set(uniq)) for v in uniq}
    lam = Fraction(1)
    witness = (0, 0)
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            a = arc[j] - arc[i]
            d = dist[vs[i]][vs[j]]
            cand = a / (d + 1)
            if cand > lam:
                lam = cand
                witness = (i, j)
    return lam, lam, witness


def to_dot(
    graph: WeightedGraph,
    name: str = "g",
    edge_attrs: Optional[dict] = None,
) -> str:
    """Deterministic DOT export; edge lengths go to the `len` attribute."""
    lines = [f"graph {name} {{"]
    for v in sorted(graph.vertices(), key=str):
        lines.append(f'  "{v}";')
    norm = lambda e: tuple(sorted((str(e[0]), str(e[1]))))
    for u, v, ln in sorted(graph.edges(), key=norm):
        a, b = (u, v) if str(u) <= str(v) else (v, u)
        attrs = [f'len="{ln}"']
        extra = (edge_attrs or {}).get((a, b)) or (edge_attrs or {}).get((b, a)) or {}
        for k in sorted(extra):
            attrs.append(f'{k}="{extra[k]}"')
        lines.append(f'  "{a}" -- "{b}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_text(graph: WeightedGraph) -> str:
    """Line format: `v <id>` and `e <id> <id> <len>`, ids must be space-free."""
    out = []
    for v in sorted(graph.vertices(), key=str):
        s = str(v)
        if not s or any(ch.isspace() for ch in s):
            raise UnsupportedFormat(f"vertex id {v!r} not representable in text format")
        out.append(f"v {s}")
    norm = lambda e: tuple(sorted((str(e[0]), str(e[1]))))
    for u, v, ln in sorted(graph.edges(), key=norm):
        a, b = sorted((str(u), str(v)))
        out.append(f"e {a} {b} {ln}")
    return "\n".join(out) + "\n"


def from_text(text: str) -> WeightedGraph:
    g = WeightedGraph()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v" and len(parts) == 2:
            g.add_vertex(parts[1])
        elif parts[0] == "e" and len(parts) == 4:
            g.add_edge(parts[1], parts[2], Fraction(parts[3]))
        else:
            raise UnsupportedFormat(f"bad graph text line {lineno}: {raw!r}")
    return g
