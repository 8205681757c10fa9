"""Thickened fiber lines over window pieces and their projection system.

Each Bass-Serre vertex v gets a quasi-line carrier: its own fiber axis (the
binding line), one width-1 strip per incident plane, and a copy of each
incident plane in which every far-side fiber line is collapsed by a unit-radius
apex. Projections between same-class carriers land on a single coned line,
recorded by its apex; the resulting two families feed the standard axiom
checker. The distance estimates at the bottom compare carrier distances to the
horizontal/vertical components of special paths.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .cka.paths import _affine, special_path
from .cka.window import CKAWindow, PiecePoint
from .errors import WindowExceeded
from .metric_core import WeightedGraph, tree_projection
from .projections import AxiomReport, ProjectionFamily, projection_distance, verify_axioms
from .rationals import rat_str


@dataclass
class ThickFiberLine:
    owner: str
    cls: int
    carrier: WeightedGraph
    planes: list
    apexes: dict  # (plane id, far-side line index) -> apex vertex
    line_vertices: dict  # same key -> tuple of plane vertices on that line

    def binding_vertex(self, f: int):
        v = ("bind", f)
        if not self.carrier.has_vertex(v):
            raise WindowExceeded(f"binding fiber {f} outside carrier of {self.owner!r}")
        return v

    def distance(self, u, v) -> Fraction:
        return self.carrier.shortest_distance(u, v)


def build_fiber_line(win: CKAWindow, v: str) -> ThickFiberLine:
    """Assemble the carrier for one window piece.

    Plane copies are charted on the owner's side but cover every plane point
    visible from either side's window, so points pushed across from the far
    piece always land inside. The far-side line index of a plane vertex is its
    image h-coordinate under the plane map.
    """
    piece = win.piece(v)
    W = win.W
    g = WeightedGraph()
    for f in range(-W, W + 1):
        g.add_vertex(("bind", f))
        if f > -W:
            g.add_edge(("bind", f - 1), ("bind", f))
    apexes: dict = {}
    line_vertices: dict = {}
    peids = sorted(piece.lines)
    for peid in peids:
        line = piece.lines[peid]
        lo, hi = line.param_range_in_window()
        if not lo <= 0 <= hi:
            raise WindowExceeded(f"marked line anchor of {peid!r} outside window")
        ((m11, m12), _), (t1, _) = _affine(win, peid, v)
        pts: dict = {}
        for h in range(lo, hi + 1):
            for f in range(-W, W + 1):
                pts[(h, f)] = m11 * h + m12 * f + t1
        other = win.plane(peid).other_side(v)
        olo, ohi = win.line(other, peid).param_range_in_window()
        ((n11, n12), (n21, n22)), (s1, s2) = _affine(win, peid, other)
        for ho in range(olo, ohi + 1):
            for fo in range(-W, W + 1):
                key = (n11 * ho + n12 * fo + s1, n21 * ho + n22 * fo + s2)
                pts.setdefault(key, ho)
        groups: dict = {}
        for (h, f) in sorted(pts):
            u = ("pl", peid, h, f)
            g.add_vertex(u)
            if (h - 1, f) in pts:
                g.add_edge(("pl", peid, h - 1, f), u)
            if (h, f - 1) in pts:
                g.add_edge(("pl", peid, h, f - 1), u)
            groups.setdefault(pts[(h, f)], []).append(u)
        for c, us in sorted(groups.items()):
            ap = ("ap", peid, c)
            apexes[(peid, c)] = ap
            line_vertices[(peid, c)] = tuple(us)
            for u in us:
                g.add_edge(ap, u)
        for f in range(-W, W + 1):
            g.add_edge(("bind", f), ("pl", peid, 0, f))
    return ThickFiberLine(v, piece.cls, g, peids, apexes, line_vertices)


@dataclass
class FiberFamily:
    win: CKAWindow
    lines: dict  # piece id -> ThickFiberLine
    class1: ProjectionFamily
    class2: ProjectionFamily
    apex_data: dict  # (target, source) -> (plane id, line index)

    def family_for(self, cls: int) -> ProjectionFamily:
        if cls == 1:
            return self.class1
        if cls == 2:
            return self.class2
        raise ValueError(f"no family for class {cls}")

    def members(self, cls: int) -> list:
        return sorted(
            pid for pid, flv in self.lines.items() if flv.cls == cls
        )

    def cls_of(self, pid: str) -> int:
        return self.lines[pid].cls


def _projection_target_line(win: CKAWindow, target: str, source: str):
    """(plane id, far-side line index) of the projection of fl(source).

    The index is the least parameter on the target-facing boundary line of the
    middle piece among points closest to the next boundary line.
    """
    path = win.bs_geodesic(target, source)
    mid, nxt = path[1], path[2]
    e1 = win.plane_between(target, mid)
    e2 = win.plane_between(mid, nxt)
    tree = win.piece(mid).tree
    proj = tree_projection(tree, win.line(mid, e1), win.line(mid, e2))
    return e1, proj[0][0]


def build_fiber_family(win: CKAWindow) -> FiberFamily:
    lines = {pid: build_fiber_line(win, pid) for pid in sorted(win.pieces)}
    fams = {1: ProjectionFamily(), 2: ProjectionFamily()}
    by_cls: dict = {1: [], 2: []}
    for pid in sorted(lines):
        flv = lines[pid]
        fams[flv.cls].add_member(pid, flv.carrier)
        by_cls[flv.cls].append(pid)
    apex_data: dict = {}
    for cls, pids in by_cls.items():
        for tgt in pids:
            for src in pids:
                if tgt == src:
                    continue
                key = _projection_target_line(win, tgt, src)
                ap = lines[tgt].apexes.get(key)
                if ap is None:
                    raise WindowExceeded(
                        f"projection line {key} of {src!r} misses carrier {tgt!r}"
                    )
                apex_data[(tgt, src)] = key
                fams[cls].set_projection(tgt, src, [ap])
    fams[1].prepare_distances()
    fams[2].prepare_distances()
    return FiberFamily(win, lines, fams[1], fams[2], apex_data)


def project_fiber_line(fam: FiberFamily, target: str, source: str) -> frozenset:
    """The full projected line (with its apex) inside the target carrier."""
    key = fam.apex_data.get((target, source))
    if key is None:
        key = _projection_target_line(fam.win, target, source)
    flv = fam.lines[target]
    if key not in fam.lines[target].apexes:
        raise WindowExceeded(f"projection line {key} missing from carrier {target!r}")
    return frozenset(flv.line_vertices[key]) | {flv.apexes[key]}


def projection_set_diameter(fam: FiberFamily, target: str, source: str) -> Fraction:
    """Exact carrier diameter of the full projection set.

    The apex is adjacent to every line vertex, and the plane grid has no
    triangles, so three or more line vertices force diameter exactly 2.
    """
    key = fam.apex_data[(target, source)]
    flv = fam.lines[target]
    vs = flv.line_vertices[key]
    if len(vs) >= 3:
        return Fraction(2)
    if len(vs) == 2:
        return Fraction(1) if flv.carrier.has_edge(vs[0], vs[1]) else Fraction(2)
    return Fraction(1)


def max_projection_diameter(fam: FiberFamily) -> Fraction:
    best = Fraction(0)
    for tgt, src in fam.apex_data:
        d = projection_set_diameter(fam, tgt, src)
        if d > best:
            best = d
    return best


def check_common_projection(fam: FiberFamily) -> tuple[int, int]:
    """(applicable triples, mismatches) for the far-vertex coincidence rule.

    Whenever a target sits at tree-distance >= 2 from the geodesic joining two
    sources, both sources must store the same projection line.
    """
    win = fam.win
    checked = mismatched = 0
    for cls in (1, 2):
        pids = fam.members(cls)
        for w in pids:
            for i, u in enumerate(pids):
                if u == w:
                    continue
                for v in pids[i + 1 :]:
                    if v == w:
                        continue
                    seg = win.bs_geodesic(u, v)
                    gap = min(len(win.bs_geodesic(w, z)) - 1 for z in seg)
                    if gap < 2:
                        continue
                    checked += 1
                    if fam.apex_data[(w, u)] != fam.apex_data[(w, v)]:
                        mismatched += 1
    return checked, mismatched


@dataclass
class FiberAxiomReport:
    class1: AxiomReport
    class2: AxiomReport
    common_triples: int
    common_mismatches: int
    diam_bound: Fraction
    max_diameter: Fraction

    @property
    def verdict(self) -> bool:
        return (
            self.class1.verdict
            and self.class2.verdict
            and self.common_mismatches == 0
            and self.max_diameter <= self.diam_bound
        )

    @property
    def xi_witnessed(self) -> Fraction:
        return max(self.class1.xi_witnessed, self.class2.xi_witnessed)

    def to_dict(self) -> dict:
        return {
            "verdict": "pass" if self.verdict else "fail",
            "class1": self.class1.to_dict(),
            "class2": self.class2.to_dict(),
            "common_triples": self.common_triples,
            "common_mismatches": self.common_mismatches,
            "diam_bound": rat_str(self.diam_bound),
            "max_diameter": rat_str(self.max_diameter),
        }


def verify_fiber_axioms(fam: FiberFamily, xi, strong: bool = False) -> FiberAxiomReport:
    """Axiom check per class, plus set-coincidence and diameter sweeps.

    The diameter bound is 2r + 3 with unit cone radius r = 1.
    """
    r1 = verify_axioms(fam.class1, xi, strong=strong)
    r2 = verify_axioms(fam.class2, xi, strong=strong)
    checked, mismatched = check_common_projection(fam)
    return FiberAxiomReport(
        class1=r1,
        class2=r2,
        common_triples=checked,
        common_mismatches=mismatched,
        diam_bound=Fraction(5),
        max_diameter=max_projection_diameter(fam),
    )


# -- pointwise maps ---------------------------------------------------------


def pi1(win: CKAWindow, fam: FiberFamily, x: PiecePoint):
    """Binding-line vertex of fl(x.piece) at x's fiber height."""
    win.require_point(x)
    return fam.lines[x.piece].binding_vertex(x.fiber)


def default_companion(win: CKAWindow, pid: str) -> str:
    """Deterministic neighbor choice: across the least incident plane id."""
    piece = win.piece(pid)
    if not piece.lines:
        raise WindowExceeded(f"piece {pid!r} has no incident plane")
    peid = min(piece.lines)
    return win.plane(peid).other_side(pid)


def pi2(win: CKAWindow, fam: FiberFamily, x: PiecePoint, w0: Optional[str] = None):
    """Plane vertex of fl(w0) carrying x, pushed across the shared plane.

    x is slid along the strip from its base to the boundary line first, then
    converted to the companion chart.
    """
    win.require_point(x)
    if w0 is None:
        w0 = default_companion(win, x.piece)
    e0 = win.plane_between(x.piece, w0)
    tree = win.piece(x.piece).tree
    h, _foot = tree_projection(tree, win.line(x.piece, e0), x.base)[0]
    hw, fw = win.plane(e0).convert(x.piece, h, x.fiber)
    u = ("pl", e0, hw, fw)
    if not fam.lines[w0].carrier.has_vertex(u):
        raise WindowExceeded(f"pushed point {u} outside carrier of {w0!r}")
    return u


def _anchor(fam: FiberFamily, v: str, anchor_pid: str, anchor_pt) -> frozenset:
    """x's data seen from fl(v): the carried point at its own vertex, the
    stored member projection elsewhere."""
    if v == anchor_pid:
        return frozenset([anchor_pt])
    return fam.family_for(fam.cls_of(v)).projection(v, anchor_pid)


def _off_path_neighbor(win: CKAWindow, mid: str, banned) -> Optional[str]:
    out = []
    for peid in win.piece(mid).lines:
        other = win.plane(peid).other_side(mid)
        if other not in banned:
            out.append(other)
    return min(out) if out else None


# -- distance estimates -----------------------------------------------------


@dataclass
class LemmaRow:
    pair: str
    estimate: str
    index: int
    lhs: Fraction
    rhs: Fraction

    def to_list(self) -> list:
        return [self.pair, self.estimate, self.index, rat_str(self.lhs), rat_str(self.rhs)]


@dataclass
class LemmaReport:
    rows: list
    pairs: int
    skipped: int
    ratio_env: Fraction
    defect_env: Fraction
    degenerate_rows: int

    def within(self, ratio, defect) -> bool:
        return self.ratio_env <= ratio and self.defect_env <= defect

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "skipped": self.skipped,
            "rows": len(self.rows),
            "degenerate_rows": self.degenerate_rows,
            "ratio_env": rat_str(self.ratio_env),
            "defect_env": rat_str(self.defect_env),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["pair", "estimate", "index", "lhs", "rhs"])
        for row in self.rows:
            wr.writerow(row.to_list())
        return buf.getvalue()


def _line_gap(win: CKAWindow, mid: str, e: str, ea: str, eb: str) -> Fraction:
    """Joint spread on the boundary line of e of the feet of ea's and eb's
    boundary lines, all inside the middle piece."""
    tree = win.piece(mid).tree
    le = win.line(mid, e)
    ps = [p for p, _ in tree_projection(tree, le, win.line(mid, ea))]
    ps += [p for p, _ in tree_projection(tree, le, win.line(mid, eb))]
    return Fraction(max(ps) - min(ps))


def check_distance_estimates(win: CKAWindow, fam: FiberFamily, pairs) -> LemmaReport:
    """Compare carrier distances against special-path components.

    Four estimates per sampled same-class pair: line gaps seen from off-path
    neighbors of odd and even interior vertices (h-odd, h-even) and per-piece
    vertical components recovered through the two pointwise maps (v-even,
    v-odd). Pairs whose endpoints have different classes are skipped.
    """
    rows: list = []
    skipped = 0
    used = 0
    for x, y in pairs:
        if win.piece(x.piece).cls != win.piece(y.piece).cls:
            skipped += 1
            continue
        alpha = win.bs_geodesic(x.piece, y.piece)
        sp = special_path(win, x, y)
        n2 = len(alpha) - 1
        n = n2 // 2
        used += 1
        label = f"{x.piece}|{x.base}|{x.fiber} -- {y.piece}|{y.base}|{y.fiber}"
        fam_even = fam.family_for(win.piece(x.piece).cls)
        px = pi1(win, fam, x)
        py = pi1(win, fam, y)
        w0 = alpha[1] if n2 >= 1 else default_companion(win, x.piece)
        w1 = alpha[-2] if n2 >= 1 else default_companion(win, y.piece)
        fam_odd = fam.family_for(win.piece(w0).cls)
        cx = pi2(win, fam, x, w0)
        cy = pi2(win, fam, y, w1)
        for i in range(1, n + 1):
            mid = alpha[2 * i - 1]
            v = _off_path_neighbor(win, mid, set(alpha))
            if v is None:
                continue
            lhs = projection_distance(fam_even, v, x.piece, y.piece)
            e = win.plane_between(v, mid)
            ea = win.plane_between(alpha[2 * i - 2], mid)
            eb = win.plane_between(mid, alpha[2 * i])
            rows.append(LemmaRow(label, "h-odd", i, lhs, _line_gap(win, mid, e, ea, eb)))
        for i in range(0, n + 1):
            tgt = alpha[2 * i]
            sx = _anchor(fam, tgt, x.piece, px)
            sy = _anchor(fam, tgt, y.piece, py)
            lhs = fam_even.set_diameter(tgt, sx | sy)
            rows.append(
                LemmaRow(label, "v-even", i, lhs, Fraction(sp.segments[2 * i][1]))
            )
        for i in range(0, n):
            mid = alpha[2 * i]
            v = _off_path_neighbor(win, mid, set(alpha) | {w0, w1})
            if v is None:
                continue
            sx = _anchor(fam, v, w0, cx)
            sy = _anchor(fam, v, w1, cy)
            lhs = fam_odd.set_diameter(v, sx | sy)
            e = win.plane_between(v, mid)
            ea = win.plane_between(w0, mid) if i == 0 else win.plane_between(alpha[2 * i - 1], mid)
            eb = win.plane_between(mid, alpha[2 * i + 1])
            rows.append(LemmaRow(label, "h-even", i, lhs, _line_gap(win, mid, e, ea, eb)))
        for i in range(0, n):
            tgt = alpha[2 * i + 1]
            sx = _anchor(fam, tgt, w0, cx)
            sy = _anchor(fam, tgt, w1, cy)
            lhs = fam_odd.set_diameter(tgt, sx | sy)
            rows.append(
                LemmaRow(label, "v-odd", i, lhs, Fraction(sp.segments[2 * i + 1][1]))
            )
    ratio_env = Fraction(1)
    defect_env = Fraction(0)
    degenerate = 0
    for row in rows:
        up = (row.lhs + 1) / (row.rhs + 1)
        ratio_env = max(ratio_env, up, 1 / up)
        defect_env = max(defect_env, abs(row.lhs - row.rhs))
        if row.rhs == 0:
            degenerate += 1
    return LemmaReport(rows, used, skipped, ratio_env, defect_env, degenerate)


# -- vertical distance formula ----------------------------------------------


@dataclass
class VerticalRow:
    pair: str
    d_v: int
    proj_sum: Fraction
    tree_len: int

    @property
    def rhs(self) -> Fraction:
        return self.proj_sum + self.tree_len

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.d_v) / (self.rhs + 1)

    def to_list(self) -> list:
        return [self.pair, self.d_v, rat_str(self.proj_sum), self.tree_len, rat_str(self.ratio)]


@dataclass
class VerticalReport:
    rows: list
    C: Fraction
    violations: int
    pairs: int

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "C": rat_str(self.C),
            "violations": self.violations,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["pair", "d_v", "proj_sum", "tree_len", "ratio"])
        for row in self.rows:
            wr.writerow(row.to_list())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def vertical_formula_report(
    win: CKAWindow, fam: FiberFamily, pairs, C: Optional[Fraction] = None
) -> VerticalReport:
    """Vertical component of special paths against the carrier-projection sum.

    Per pair: d_v <= C * (sum over path vertices of the carrier distance
    between the two endpoint anchors + path length) + C. With no C given the
    least such constant is fitted; otherwise violations are counted.
    """
    rows: list = []
    for x, y in pairs:
        sp = special_path(win, x, y)
        alpha = sp.pieces
        n2 = len(alpha) - 1
        anchors_x: dict = {win.piece(x.piece).cls: (x.piece, pi1(win, fam, x))}
        anchors_y: dict = {win.piece(y.piece).cls: (y.piece, pi1(win, fam, y))}
        w0 = alpha[1] if n2 >= 1 else default_companion(win, x.piece)
        w1 = alpha[-2] if n2 >= 1 else default_companion(win, y.piece)
        anchors_x[win.piece(w0).cls] = (w0, pi2(win, fam, x, w0))
        anchors_y[win.piece(w1).cls] = (w1, pi2(win, fam, y, w1))
        total = Fraction(0)
        for v in alpha:
            cls = win.piece(v).cls
            ax, px = anchors_x[cls]
            ay, py = anchors_y[cls]
            sx = _anchor(fam, v, ax, px)
            sy = _anchor(fam, v, ay, py)
            total += fam.family_for(cls).set_diameter(v, sx | sy)
        label = f"{x.piece}|{x.base}|{x.fiber} -- {y.piece}|{y.base}|{y.fiber}"
        rows.append(VerticalRow(label, sp.d_v, total, n2))
    fitted = max((row.ratio for row in rows), default=Fraction(0))
    if C is None:
        C = fitted
    violations = sum(1 for row in rows if Fraction(row.d_v) > C * row.rhs + C)
    return VerticalReport(rows, C, violations, len(rows))
