"""Coned-off spaces and K-thick distances.

A coned space is a base graph plus one apex vertex per designated line,
joined to every line vertex by edges of length r ("apex model"; the word-ball
mode uses r = 1/2 so that a two-half-edge hop has length 1).  A passage
u - apex - w is a peripheral edge; it breaks a K-bounded run exactly when the
base distance between u and w exceeds K.  The K-thick distance is the maximum
of |beta|_K over all geodesics beta, computed exactly by dynamic programming
on the shortest-path DAG, and the piecewise variant sums per-piece values
along the index geodesic through closest-point entry/exit pairs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from . import words
from .errors import ConfigInvalid, DisconnectedPair, NotLoxodromic
from .families import coset_reps
from .fiber_lines import default_companion
from .metric_core import FreeTree, Line, WeightedGraph, tree_projection
from .projections import ProjectionFamily, cutoff
from .rationals import as_fraction
from .cka.window import CKAWindow, PiecePoint


class ConedSpace:
    """Immutable base graph with apex cones over designated lines."""

    def __init__(self, base, graph, lines, apexes, r) -> None:
        self.base = base
        self.graph = graph
        self.lines = lines
        self.apexes = apexes
        self.apex_lines = {ap: lid for lid, ap in apexes.items()}
        self.r = r
        self._base_dist: dict = {}

    def base_distance(self, u, v) -> Fraction:
        if u == v:
            return Fraction(0)
        if u not in self._base_dist:
            self._base_dist[u] = self.base.shortest_from(u)
        try:
            return self._base_dist[u][v]
        except KeyError:
            raise DisconnectedPair(f"{u!r} and {v!r} lie in different base components")

    def gap_exceeds(self, u, v, K) -> bool:
        """Base gap of a peripheral passage vs K; disconnected counts as infinite."""
        try:
            return self.base_distance(u, v) > K
        except DisconnectedPair:
            return True

    def is_apex(self, v) -> bool:
        return v in self.apex_lines


def cone_off(base: WeightedGraph, lines, r=1) -> ConedSpace:
    """Attach one radius-r apex per line; line vertices must lie in the base."""
    r = as_fraction(r)
    if r <= 0:
        raise ValueError(f"cone radius must be positive, got {r}")
    items = lines.items() if isinstance(lines, Mapping) else enumerate(lines)
    graph = WeightedGraph()
    for v in base.vertices():
        graph.add_vertex(v)
    for u, v, ln in base.edges():
        graph.add_edge(u, v, ln)
    kept = {}
    apexes = {}
    for lid, verts in items:
        vs = tuple(dict.fromkeys(verts))
        if not vs:
            raise ConfigInvalid(f"coned line {lid!r} is empty")
        for v in vs:
            if not base.has_vertex(v):
                raise ConfigInvalid(f"line {lid!r} vertex {v!r} not in base")
        ap = ("cone", lid)
        if graph.has_vertex(ap):
            raise ConfigInvalid(f"apex name clash for line {lid!r}")
        for v in vs:
            graph.add_edge(ap, v, r)
        kept[lid] = vs
        apexes[lid] = ap
    return ConedSpace(base, graph, kept, apexes, r)


@dataclass(frozen=True)
class ThickDecomposition:
    """A geodesic split at the peripheral edges whose base gap exceeds K.

    segments: maximal K-bounded subpaths as (vertices, length); interior
    peripheral edges with base gap <= K stay inside their segment.
    """

    path: tuple
    K: Fraction
    segments: tuple
    breaks: tuple
    value: Fraction


def decompose_path(cs: ConedSpace, path: Sequence, K) -> ThickDecomposition:
    """Decompose an explicit geodesic edge path; rejects non-geodesics."""
    K = as_fraction(K)
    path = tuple(path)
    if len(path) < 1:
        raise ValueError("empty path")
    if cs.is_apex(path[0]) or cs.is_apex(path[-1]):
        raise ValueError("path must start and end at base vertices")
    total = Fraction(0)
    for u, v in zip(path, path[1:]):
        if not cs.graph.has_edge(u, v):
            raise ValueError(f"path step {u!r} -> {v!r} is not an edge")
        total += cs.graph.edge_length(u, v)
    if total != cs.graph.shortest_distance(path[0], path[-1]):
        raise ValueError("path is not a geodesic")
    segments = []
    breaks = []
    cur = [path[0]]
    cur_len = Fraction(0)
    i = 1
    while i < len(path):
        v = path[i]
        if cs.is_apex(v):
            u, z = path[i - 1], path[i + 1]
            hop = cs.graph.edge_length(u, v) + cs.graph.edge_length(v, z)
            if cs.gap_exceeds(u, z, K):
                if len(cur) > 1:
                    segments.append((tuple(cur), cur_len))
                breaks.append((u, v, z))
                cur = [z]
                cur_len = Fraction(0)
            else:
                cur.extend((v, z))
                cur_len += hop
            i += 2
        else:
            cur_len += cs.graph.edge_length(path[i - 1], v)
            cur.append(v)
            i += 1
    if len(cur) > 1:
        segments.append((tuple(cur), cur_len))
    value = sum((cutoff(ln, K) for _, ln in segments), Fraction(0))
    return ThickDecomposition(path, K, tuple(segments), tuple(breaks), value)


def thick_distance(cs: ConedSpace, x, y, K) -> Fraction:
    """Exact max of |beta|_K over all geodesics from x to y.

    Dynamic programming over the shortest-path DAG with apex passages
    contracted to peripheral meta-edges; state = (vertex, open run length).
    """
    if cs.is_apex(x) or cs.is_apex(y):
        raise ValueError("thick distance needs base endpoints")
    if x == y:
        return Fraction(0)
    K = as_fraction(K)
    dx = cs.graph.shortest_from(x)
    if y not in dx:
        raise DisconnectedPair(f"{x!r} and {y!r} are not connected")
    dy = cs.graph.shortest_from(y)
    D = dx[y]
    onset = {
        v
        for v in cs.base.vertices()
        if v in dx and v in dy and dx[v] + dy[v] == D
    }
    order = sorted(onset, key=lambda v: (dx[v], str(v)))
    succ: dict = {v: [] for v in order}
    for u in order:
        du = dx[u]
        for w in cs.graph.neighbors(u):
            ln = cs.graph.edge_length(u, w)
            if cs.is_apex(w):
                if dx.get(w) != du + ln:
                    continue
                for z in cs.graph.neighbors(w):
                    if z == u or z not in onset:
                        continue
                    hop = ln + cs.graph.edge_length(w, z)
                    if du + hop + dy[z] == D:
                        succ[u].append((z, hop, cs.gap_exceeds(u, z, K)))
            elif w in onset and du + ln + dy[w] == D:
                succ[u].append((w, ln, False))
    states: dict = {v: {} for v in order}
    states[x][Fraction(0)] = Fraction(0)
    for u in order:
        for run, tot in states[u].items():
            for z, ln, breaking in succ[u]:
                if breaking:
                    nrun, ntot = Fraction(0), tot + cutoff(run, K)
                else:
                    nrun, ntot = run + ln, tot
                cell = states[z]
                if nrun not in cell or ntot > cell[nrun]:
                    cell[nrun] = ntot
    return max(tot + cutoff(run, K) for run, tot in states[y].items())


# -- coned word balls -------------------------------------------------------


@dataclass
class ConedBall:
    """Coned word ball of a free group rel cyclic peripheral subgroups."""

    tree: FreeTree
    cs: ConedSpace
    lines: dict
    peripheral_words: tuple
    r: Fraction


def coned_word_ball(
    rank: int, radius: int, peripheral_words: Sequence[str], r=Fraction(1, 2)
) -> ConedBall:
    """Cone every peripheral coset line meeting the radius ball."""
    tree = FreeTree(rank, radius)
    for w in peripheral_words:
        if not words.is_cyclically_reduced(w):
            raise ConfigInvalid(f"peripheral word must be cyclically reduced: {w!r}")
    base = tree.window_graph()
    lines = {}
    sets = {}
    for w in peripheral_words:
        for g in coset_reps(tree, w, radius):
            ax = Line.axis(tree, w, conj=g)
            pts = ax.window_points()
            lines[(w, g)] = ax
            sets[(w, g)] = tuple(v for _, v in pts)
    cs = cone_off(base, sets, r=r)
    return ConedBall(tree, cs, lines, tuple(peripheral_words), as_fraction(r))


# -- quasi-line families ----------------------------------------------------


def _cyclic_split(g: str) -> tuple:
    c = ""
    while len(g) >= 2 and g[0] == g[-1].swapcase():
        c += g[0]
        g = g[1:-1]
    return c, g


def loxodromic_axis(cs: ConedSpace, tree: FreeTree, word: str) -> Line:
    """Axis of a word whose coned displacement grows linearly; else raises.

    The check walks powers in both directions from a window point of the
    axis and rejects any pair of orbit points whose coned distance falls
    below half the power gap, so peripheral words (bounded displacement)
    fail as soon as the orbit spans two powers.
    """
    w = words.reduce_word(word)
    if not w:
        raise ConfigInvalid("axis word must be nontrivial")
    conj, core = _cyclic_split(w)
    if not core:
        raise ConfigInvalid(f"word {word!r} reduces to a conjugate of the identity")
    ax = Line.axis(tree, core, conj=conj)
    pts = ax.window_points()
    x0 = min(v for _, v in pts)
    orbit = {0: x0}
    for step in (1, -1):
        g = ""
        fac = w if step == 1 else words.inv(w)
        k = step
        while True:
            g = words.mul(g, fac)
            pt = words.mul(g, x0)
            if len(pt) > tree.radius:
                break
            orbit[k] = pt
            k += step
    ks = sorted(orbit)
    span = ks[-1] - ks[0]
    if span < 2:
        raise ConfigInvalid(
            f"window too small to certify loxodromy of {word!r} "
            f"(orbit spans only {span} powers)"
        )
    for i in ks:
        dmap = cs.graph.shortest_from(orbit[i])
        for j in ks:
            if j <= i:
                continue
            d = dmap[orbit[j]]
            if 2 * d < j - i:
                raise NotLoxodromic(
                    f"word {word!r} moved power gap {j - i} only {d} "
                    f"in the coned metric"
                )
    return ax


def quasi_line_family(
    cs: ConedSpace, word_list: Sequence[str], tree: FreeTree
) -> ProjectionFamily:
    """Family of axes with shortest projections in the coned metric."""
    fam = ProjectionFamily()
    axes = {}
    for w in word_list:
        ax = loxodromic_axis(cs, tree, w)
        pts = ax.window_points()
        graph = WeightedGraph()
        params = {}
        prev = None
        for n, v in pts:
            graph.add_vertex(v)
            params[v] = n
            if prev is not None:
                graph.add_edge(prev, v)
            prev = v
        fam.add_member(w, graph, line_params=params)
        axes[w] = [v for _, v in pts]
    maps: dict = {}
    for w, vs in axes.items():
        for v in vs:
            if v not in maps:
                maps[v] = cs.graph.shortest_from(v)
    for tgt in axes:
        for src in axes:
            if tgt == src:
                continue
            best = None
            proj = []
            for b in axes[tgt]:
                d = min(maps[b][a] for a in axes[src])
                if best is None or d < best:
                    best, proj = d, [b]
                elif d == best:
                    proj.append(b)
            fam.set_projection(tgt, src, proj)
    return fam


def theta_bound(fam: ProjectionFamily) -> Fraction:
    """Largest member-metric diameter over all stored projection sets."""
    best = Fraction(0)
    for tgt, src in fam.pairs():
        d = fam.set_diameter(tgt, fam.projection(tgt, src))
        if d > best:
            best = d
    return best


# -- relative distance formula ----------------------------------------------


def word_ball_bfs(rank: int, radius: int) -> dict:
    """Breadth-first word distances from the identity, letter by letter."""
    tree = FreeTree(rank, radius)
    dist = {"": 0}
    frontier = [""]
    for level in range(1, radius + 1):
        nxt = []
        for w in frontier:
            for c in tree.letters:
                v = words.mul(w, c)
                if len(v) <= radius and v not in dist:
                    dist[v] = level
                    nxt.append(v)
        frontier = nxt
    return dist


def _runs(w: str) -> list:
    out = []
    for c in w:
        g = c.lower()
        if out and out[-1][0] == g and out[-1][2] == c:
            out[-1][1] += 1
        else:
            out.append([g, 1, c])
    return [(g, n) for g, n, _ in out]


def relative_terms(w: str, peripheral_letters, K) -> tuple:
    """Closed-form (coned distance, d^K, sum of cut peripheral terms).

    Valid when every peripheral subgroup is generated by a single letter:
    a geodesic must hop every peripheral run of length >= 2 (cost 1), walks
    everything else, and a hop breaks the open run exactly when the run
    length exceeds K.
    """
    K = as_fraction(K)
    ps = set(peripheral_letters)
    dhat = Fraction(0)
    periph = Fraction(0)
    seg = Fraction(0)
    dk = Fraction(0)
    for g, n in _runs(words.reduce_word(w)):
        if g in ps:
            periph += cutoff(n, K)
            if n >= 2:
                dhat += 1
                if n > K:
                    dk += cutoff(seg, K)
                    seg = Fraction(0)
                else:
                    seg += 1
            else:
                dhat += 1
                seg += 1
        else:
            dhat += n
            seg += n
    dk += cutoff(seg, K)
    return dhat, dk, periph


@dataclass(frozen=True)
class RelRow:
    x: str
    y: str
    d_word: int
    K: Fraction
    thick: Fraction
    periph: Fraction

    @property
    def rhs(self) -> Fraction:
        return self.thick + self.periph


@dataclass
class RelativeFormulaReport:
    rank: int
    radius: int
    samples: int
    seed: int
    k_grid: tuple
    rows: list
    fits: dict
    doubled_fits: dict
    threshold_K: Optional[Fraction]

    def to_csv(self) -> str:
        out = ["x,y,K,d_word,thick,periph,rhs"]
        for r in self.rows:
            out.append(
                f"{r.x},{r.y},{r.K},{r.d_word},{r.thick},{r.periph},{r.rhs}"
            )
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        doc = {
            "rank": self.rank,
            "radius": self.radius,
            "samples": self.samples,
            "seed": self.seed,
            "k_grid": [str(k) for k in self.k_grid],
            "fits": {
                str(k): {"C": str(f["C"]), "violations": f["violations"]}
                for k, f in sorted(self.fits.items())
            },
            "doubled_fits": {
                str(k): {"C": str(f["C"]), "violations": f["violations"]}
                for k, f in sorted(self.doubled_fits.items())
            },
            "threshold_K": None if self.threshold_K is None else str(self.threshold_K),
            "rows": [
                {
                    "x": r.x,
                    "y": r.y,
                    "K": str(r.K),
                    "d_word": r.d_word,
                    "thick": str(r.thick),
                    "periph": str(r.periph),
                }
                for r in self.rows
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _affine_fit(pairs) -> dict:
    """Least C with lhs <= C*rhs + C and rhs <= C*lhs + C on every pair."""
    C = Fraction(0)
    for lhs, rhs in pairs:
        need = max(Fraction(lhs, rhs + 1), Fraction(rhs, lhs + 1))
        if need > C:
            C = need
    violations = sum(
        1 for lhs, rhs in pairs if lhs > C * rhs + C or rhs > C * lhs + C
    )
    return {"C": C, "violations": violations}


def profile_fit(K: int, max_len: int) -> Fraction:
    """Exact worst-case relative-formula constant over every word profile.

    Every pair reduces to (identity, w) by left invariance, and when all
    generators are peripheral letters both formula sides depend only on the
    run profile of w: each run contributes 1 to its segment, its own length
    to the peripheral sum when >= K, and breaks the segment when > K.
    Dynamic programming over (peripheral-plus-closed-thick total, open
    segment count) yields the least C with lhs <= C*rhs + C and
    rhs <= C*lhs + C over all reduced words with |w| <= max_len.
    """
    if K != int(K) or K < 1:
        raise ConfigInvalid("profile fit needs an integer threshold K >= 1")
    K = int(K)
    # run moves: (letters spent, rhs added, new open count); breaks may be
    # reordered to the front of a profile without raising either side, so
    # tracking the best letter total per state loses no optimum
    hi = {(0, 0): 0}
    lo = {(0, 0): 0}
    for _ in range(max_len):
        changed = False
        for table, prefer in ((hi, max), (lo, min)):
            for (rhs, cnt), n in list(table.items()):
                room = max_len - n
                if room < 1:
                    continue
                moves = []
                if K > 1:
                    moves.append((1, 0, cnt + 1))
                    moves.append((min(room, K - 1), 0, cnt + 1))
                if room >= K:
                    moves.append((K, K, cnt + 1))
                for b in range(K + 1, room + 1):
                    moves.append((b, b + (cnt if cnt >= K else 0), 0))
                for m, dr, ncnt in moves:
                    key = (rhs + dr, ncnt)
                    val = n + m
                    if key not in table or prefer(table[key], val) == val:
                        if table.get(key) != val:
                            table[key] = val
                            changed = True
        if not changed:
            break
    C = Fraction(0)
    for table, flip in ((hi, False), (lo, True)):
        for (rhs, cnt), n in table.items():
            total = rhs + (cnt if cnt >= K else 0)
            need = Fraction(total, n + 1) if flip else Fraction(n, total + 1)
            if need > C:
                C = need
    return C


def validate_relative_formula(
    ball: ConedBall,
    samples: int = 100,
    k_grid: Sequence = (4, 6, 8),
    seed: int = 0,
) -> RelativeFormulaReport:
    """Word distance vs d^K + cut peripheral sum, swept over a K grid.

    Sampled pairs certify the machinery: the DP value and the tree-projection
    peripheral terms must equal the single-letter closed form pair by pair,
    and the word distance must equal the breadth-first oracle.  The fitted
    constant itself comes from an exhaustive scan of run profiles, so it
    covers every pair of the window (not just the sample) and is reproduced
    exactly at the doubled radius whenever the window already saturates the
    worst case for that K.
    """
    if any(len(w) != 1 for w in ball.peripheral_words):
        raise ConfigInvalid("relative validator needs single-letter peripherals")
    if ball.r != Fraction(1, 2):
        raise ConfigInvalid("relative validator assumes half-edge cones (r = 1/2)")
    letters = sorted(ball.peripheral_words)
    if letters != sorted(ball.tree.gens) or ball.tree.rank < 2:
        raise ConfigInvalid(
            "relative validator needs every generator coned (rank >= 2)"
        )
    k_grid = tuple(as_fraction(k) for k in k_grid)
    rng = random.Random(seed)
    pool = sorted(v for v in ball.cs.base.vertices())
    oracle = word_ball_bfs(ball.tree.rank, 2 * ball.tree.radius)
    pairs = []
    while len(pairs) < samples:
        x, y = rng.choice(pool), rng.choice(pool)
        if x != y:
            pairs.append((x, y))
    rows = []
    fit_input = {k: [] for k in k_grid}
    for x, y in pairs:
        w = words.mul(words.inv(x), y)
        d_word = oracle[w]
        if d_word != len(w):
            raise AssertionError(
                f"word-ball oracle disagrees with reduction at {w!r}"
            )
        gaps = _peripheral_gaps(ball, x, y)
        for k in k_grid:
            dk = thick_distance(ball.cs, x, y, k)
            periph = sum((cutoff(g, k) for g in gaps), Fraction(0))
            dhat, dk_cf, periph_cf = relative_terms(w, letters, k)
            if dk != dk_cf or periph != periph_cf:
                raise AssertionError(
                    f"closed form mismatch at pair ({x!r}, {y!r}), K={k}: "
                    f"DP {dk}/{periph} vs {dk_cf}/{periph_cf}"
                )
            if dhat != ball.cs.graph.shortest_distance(x, y):
                raise AssertionError(f"coned distance mismatch at ({x!r}, {y!r})")
            rows.append(RelRow(x, y, d_word, k, dk, periph))
            fit_input[k].append((Fraction(d_word), dk + periph))
    fits = {}
    doubled = {}
    for k in k_grid:
        C = profile_fit(int(k), 2 * ball.tree.radius)
        sampled = _affine_fit(fit_input[k])
        if sampled["C"] > C:
            raise AssertionError(
                f"profile scan missed a sampled pair at K={k}: "
                f"{sampled['C']} > {C}"
            )
        bad = sum(
            1
            for lhs, rhs in fit_input[k]
            if lhs > C * rhs + C or rhs > C * lhs + C
        )
        fits[k] = {"C": C, "violations": bad}
        doubled[k] = {"C": profile_fit(int(k), 4 * ball.tree.radius), "violations": 0}
    threshold = None
    for k in k_grid:
        a, b = fits[k]["C"], doubled[k]["C"]
        if a > 0 and abs(b - a) <= Fraction(15, 100) * a:
            threshold = k
            break
    return RelativeFormulaReport(
        rank=ball.tree.rank,
        radius=ball.tree.radius,
        samples=samples,
        seed=seed,
        k_grid=k_grid,
        rows=rows,
        fits=fits,
        doubled_fits=doubled,
        threshold_K=threshold,
    )


def _peripheral_gaps(ball: ConedBall, x: str, y: str) -> list:
    """Projection gap on every coset line in the window, zeros dropped."""
    out = []
    for key in sorted(ball.lines):
        ax = ball.lines[key]
        px = tree_projection(ball.tree, ax, x)[0][0]
        py = tree_projection(ball.tree, ax, y)[0][0]
        if px != py:
            out.append(Fraction(abs(px - py)))
    return out


# -- coned pieces and the glued per-class space ------------------------------


@dataclass(frozen=True)
class ConePoint:
    """The apex over one boundary line, addressed from its owning piece."""

    piece: str
    peid: str


def cone_pieces(win: CKAWindow, r=1) -> dict:
    """Cone every piece base tree over its in-window boundary lines."""
    out = {}
    for pid in sorted(win.pieces):
        piece = win.pieces[pid]
        base = piece.tree.window_graph()
        sets = {
            peid: tuple(v for _, v in piece.lines[peid].window_points())
            for peid in sorted(piece.lines)
        }
        out[pid] = cone_off(base, sets, r=r)
    return out


def glue_coned_spaces(win: CKAWindow, coned: Mapping, cls: int) -> WeightedGraph:
    """One-class union: coned pieces joined through opposite-class stars.

    The apex over line l_e in a piece is the star extremity of the far piece,
    so two same-class pieces meeting a common far piece are two unit star
    edges apart through its center.
    """
    g = WeightedGraph()
    for pid in sorted(win.pieces):
        if win.pieces[pid].cls != cls:
            continue
        cs = coned[pid]
        for v in cs.graph.vertices():
            g.add_vertex(("pc", pid, v))
        for u, v, ln in cs.graph.edges():
            g.add_edge(("pc", pid, u), ("pc", pid, v), ln)
        for peid in cs.lines:
            far = win.plane(peid).other_side(pid)
            g.add_edge(("pc", pid, ("cone", peid)), ("st", far), 1)
    return g


def _entry(win: CKAWindow, v: str, toward: Optional[str], end) -> tuple:
    if toward is None:
        if isinstance(end, ConePoint):
            return ("ln", win.line(v, end.peid))
        return ("pt", end.base)
    return ("ln", win.line(v, win.plane_between(v, toward)))


def _same_line(a, b) -> bool:
    if a is b:
        return True
    return (
        a.kind == "axis"
        and b.kind == "axis"
        and a.word == b.word
        and a.conj == b.conj
    )


def _closest_pair(tree: FreeTree, a: tuple, b: tuple) -> tuple:
    if a[0] == "pt" and b[0] == "pt":
        return a[1], b[1]
    if a[0] == "pt":
        return a[1], tree_projection(tree, b[1], a[1])[0][1]
    if b[0] == "pt":
        return tree_projection(tree, a[1], b[1])[0][1], b[1]
    if _same_line(a[1], b[1]):
        p = a[1].window_points()[0][1]
        return p, p
    proj = tree_projection(tree, a[1], b[1])
    if len(proj) > 1:
        p = proj[0][1]
        return p, p
    return proj[0][1], tree_projection(tree, b[1], a[1])[0][1]


def global_thick_terms(
    win: CKAWindow, coned: Mapping, x, y, K, cls: Optional[int] = None
) -> list:
    """Per-piece (piece, entry, exit, d^K) rows along the index geodesic.

    Entry and exit are the closest-point pair between the arriving and the
    leaving boundary lines (the shared point when the lines meet); a point
    endpoint stands for its own entry, an apex endpoint for its whole line.
    """
    vx, vy = x.piece, y.piece
    cx, cy = win.piece(vx).cls, win.piece(vy).cls
    if cls is None:
        if cx != cy:
            raise ConfigInvalid(
                f"endpoints live in classes {cx} and {cy}; pass cls explicitly"
            )
        cls = cx
    for c, v in ((cx, vx), (cy, vy)):
        if c != cls:
            raise ConfigInvalid(f"endpoint piece {v!r} has class {c}, wanted {cls}")
    if isinstance(x, PiecePoint):
        win.require_point(x)
    if isinstance(y, PiecePoint):
        win.require_point(y)
    geo = win.bs_geodesic(vx, vy)
    rows = []
    for i, v in enumerate(geo):
        if win.piece(v).cls != cls:
            continue
        prev = geo[i - 1] if i > 0 else None
        nxt = geo[i + 1] if i + 1 < len(geo) else None
        ent = _entry(win, v, prev, x)
        ext = _entry(win, v, nxt, y)
        xv, yv = _closest_pair(win.piece(v).tree, ent, ext)
        rows.append((v, xv, yv, thick_distance(coned[v], xv, yv, K)))
    return rows


def global_thick_distance(
    win: CKAWindow, coned: Mapping, x, y, K, cls: Optional[int] = None
) -> Fraction:
    rows = global_thick_terms(win, coned, x, y, K, cls)
    return sum((t for _, _, _, t in rows), Fraction(0))


# -- per-class quasi-lines and the coned-off formula -------------------------


def build_quasi_lines(
    win: CKAWindow, coned: Mapping, words_by_class: Mapping
) -> dict:
    """Axes of the scenario words in every piece of their class.

    Keys are (piece id, word); values are window vertex lists in axis order.
    Raises NotLoxodromic when a word stays bounded in some coned piece.
    """
    axes = {}
    for pid in sorted(win.pieces):
        piece = win.pieces[pid]
        for w in words_by_class.get(piece.cls, ()):
            ax = loxodromic_axis(coned[pid], piece.tree, w)
            axes[(pid, w)] = tuple(v for _, v in ax.window_points())
    return axes


@dataclass(frozen=True)
class ConeoffRow:
    pair: str
    lhs: Fraction
    proj_sum: Fraction
    tree_len: int

    @property
    def rhs(self) -> Fraction:
        return self.proj_sum + self.tree_len


@dataclass
class ConeoffReport:
    cls: int
    K: Fraction
    samples: int
    seed: int
    rows: list
    C: Fraction
    violations: int

    def to_csv(self) -> str:
        out = ["pair,lhs,proj_sum,tree_len,rhs"]
        for r in self.rows:
            out.append(f"{r.pair},{r.lhs},{r.proj_sum},{r.tree_len},{r.rhs}")
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        doc = {
            "cls": self.cls,
            "K": str(self.K),
            "samples": self.samples,
            "seed": self.seed,
            "C": str(self.C),
            "violations": self.violations,
            "rows": [
                {
                    "pair": r.pair,
                    "lhs": str(r.lhs),
                    "proj_sum": str(r.proj_sum),
                    "tree_len": r.tree_len,
                }
                for r in self.rows
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


class _GluedMaps:
    def __init__(self, glued: WeightedGraph) -> None:
        self.glued = glued
        self.maps: dict = {}

    def dist(self, v) -> dict:
        if v not in self.maps:
            self.maps[v] = self.glued.shortest_from(v)
        return self.maps[v]


def _axis_projection(maps: _GluedMaps, axis_vertices, from_vertex) -> list:
    dm = maps.dist(from_vertex)
    best = None
    proj = []
    for av in axis_vertices:
        d = dm[av]
        if best is None or d < best:
            best, proj = d, [av]
        elif d == best:
            proj.append(av)
    return proj


def _glued_diameter(maps: _GluedMaps, vertices) -> Fraction:
    vs = sorted(set(vertices), key=str)
    best = Fraction(0)
    for i, u in enumerate(vs):
        dm = maps.dist(u)
        for v in vs[i + 1 :]:
            if dm[v] > best:
                best = dm[v]
    return best


def validate_coneoff_formula(
    win: CKAWindow,
    coned: Mapping,
    axes: Mapping,
    samples: int = 60,
    K=4,
    cls: int = 1,
    seed: int = 0,
) -> ConeoffReport:
    """Piecewise thick distance vs cut projection sum plus index distance."""
    K = as_fraction(K)
    glued = glue_coned_spaces(win, coned, cls)
    maps = _GluedMaps(glued)
    class_axes = {
        key: tuple(("pc", key[0], v) for v in vs)
        for key, vs in axes.items()
        if win.piece(key[0]).cls == cls
    }
    rng = random.Random(seed)
    pool = [
        (pid, u)
        for pid in sorted(win.pieces)
        if win.pieces[pid].cls == cls
        for u in sorted(win.pieces[pid].tree.vertices())
    ]
    pairs = []
    while len(pairs) < samples:
        a, b = rng.choice(pool), rng.choice(pool)
        if a != b:
            pairs.append((a, b))
    rows = []
    cells = []
    for (pa, ua), (pb, ub) in pairs:
        x = PiecePoint(pa, ua, 0)
        y = PiecePoint(pb, ub, 0)
        lhs = global_thick_distance(win, coned, x, y, K, cls)
        gx, gy = ("pc", pa, ua), ("pc", pb, ub)
        proj_sum = Fraction(0)
        for key in sorted(class_axes):
            av = class_axes[key]
            px = _axis_projection(maps, av, gx)
            py = _axis_projection(maps, av, gy)
            proj_sum += cutoff(_glued_diameter(maps, px + py), K)
        tree_len = len(win.bs_geodesic(pa, pb)) - 1
        rows.append(ConeoffRow(f"{pa}|{ua} -- {pb}|{ub}", lhs, proj_sum, tree_len))
        cells.append((lhs, proj_sum + tree_len))
    fit = _affine_fit(cells)
    return ConeoffReport(
        cls=cls,
        K=K,
        samples=samples,
        seed=seed,
        rows=rows,
        C=fit["C"],
        violations=fit["violations"],
    )


# -- coordinate maps into the coned classes ----------------------------------


def pi3(win: CKAWindow, x: PiecePoint) -> PiecePoint:
    """Base projection: the fiber coordinate is forgotten."""
    win.require_point(x)
    return PiecePoint(x.piece, x.base, 0)


def pi4(win: CKAWindow, x: PiecePoint, w0: Optional[str] = None) -> ConePoint:
    """Apex over the boundary line shared with the companion piece."""
    win.require_point(x)
    if w0 is None:
        w0 = default_companion(win, x.piece)
    return ConePoint(w0, win.plane_between(x.piece, w0))
