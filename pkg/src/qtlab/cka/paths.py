"""Strips, special paths, and their horizontal/vertical components.

A strip inside a piece spans the tree bridge between two boundary lines (or
from a point's base to a line). A special path between two piece points runs
corner to corner: corner i sits on the i-th plane of the Bass-Serre geodesic
where the strip boundary arriving from the previous piece meets the strip
boundary of the next, the meeting fiber solved exactly in the plane chart and
rounded to the nearest integer with ties down."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .. import words
from ..errors import FiberParallel, WindowExceeded
from ..metric_core import tree_projection
from ..rationals import rat_str, round_half_down
from .window import CKAWindow, PiecePoint


@dataclass
class Strip:
    piece: str
    a_ref: object  # plane id or PiecePoint
    b_ref: object
    segment: list  # tree geodesic, a-side end first
    h_a: Optional[int]  # line param of the a-side end, None for a point ref
    h_b: Optional[int]

    @property
    def width(self) -> int:
        return len(self.segment) - 1


def strip_between(win: CKAWindow, pid: str, a, b) -> Strip:
    """The minimal bridge in piece pid between two boundary refs.

    Plane refs use their boundary lines; intersecting lines degenerate to a
    width-0 strip at the least shared param on the first line. Point refs
    contribute their base directly.
    """
    piece = win.piece(pid)
    tree = piece.tree
    if isinstance(a, PiecePoint) and isinstance(b, PiecePoint):
        raise ValueError("a strip needs at least one boundary line")
    if isinstance(a, PiecePoint):
        if a.piece != pid:
            raise ValueError(f"point {a} is not in piece {pid!r}")
        line_b = win.line(pid, b)
        pb, vb = tree_projection(tree, line_b, a.base)[0]
        return Strip(pid, a, b, tree.geodesic(a.base, vb), None, pb)
    if isinstance(b, PiecePoint):
        if b.piece != pid:
            raise ValueError(f"point {b} is not in piece {pid!r}")
        line_a = win.line(pid, a)
        pa, va = tree_projection(tree, line_a, b.base)[0]
        return Strip(pid, a, b, tree.geodesic(va, b.base), pa, None)
    line_a = win.line(pid, a)
    line_b = win.line(pid, b)
    proj = tree_projection(tree, line_a, line_b)
    if len(proj) > 1:
        # overlapping lines: take the least shared param on the first line
        pa, va = proj[0]
        return Strip(pid, a, b, [va], pa, line_b.param_of(va))
    pa, va = proj[0]
    pb, vb = tree_projection(tree, line_b, va)[0]
    return Strip(pid, a, b, tree.geodesic(va, vb), pa, pb)


@dataclass
class Corner:
    plane: str
    frames: dict  # piece id -> (h, f)
    exact_fiber: Fraction  # in the earlier piece's frame
    rounded: bool


@dataclass
class SpecialPath:
    x: PiecePoint
    y: PiecePoint
    pieces: list
    corners: list  # Corner entries, one per crossed plane
    segments: list  # (H, R) per piece
    d_h: int
    d_v: int

    @property
    def total(self) -> int:
        return self.d_h + self.d_v

    def to_json(self) -> str:
        doc = {
            "x": {"piece": self.x.piece, "base": self.x.base, "fiber": self.x.fiber},
            "y": {"piece": self.y.piece, "base": self.y.base, "fiber": self.y.fiber},
            "pieces": list(self.pieces),
            "corners": [
                {
                    "plane": c.plane,
                    "frames": {pid: list(hf) for pid, hf in sorted(c.frames.items())},
                    "exact_fiber": rat_str(c.exact_fiber),
                    "rounded": c.rounded,
                }
                for c in self.corners
            ],
            "segments": [[h, r] for h, r in self.segments],
            "d_h": self.d_h,
            "d_v": self.d_v,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _affine(win: CKAWindow, peid: str, from_piece: str):
    plane = win.plane(peid)
    if from_piece == plane.parent:
        return plane.matrix, plane.translation
    (a, b), (c, d) = plane.matrix
    det = a * d - b * c
    inv = ((d * det, -b * det), (-c * det, a * det))
    t1, t2 = plane.translation
    it = (-(inv[0][0] * t1 + inv[0][1] * t2), -(inv[1][0] * t1 + inv[1][1] * t2))
    return inv, it


def special_path(win: CKAWindow, x: PiecePoint, y: PiecePoint) -> SpecialPath:
    """The canonical corner path from x to y through the Bass-Serre geodesic."""
    win.require_point(x)
    win.require_point(y)
    vs = win.bs_geodesic(x.piece, y.piece)
    k = len(vs) - 1
    if k == 0:
        tree = win.piece(vs[0]).tree
        H = tree.distance(x.base, y.base)
        R = abs(x.fiber - y.fiber)
        return SpecialPath(x, y, vs, [], [(H, R)], H, R)
    pes = [win.plane_between(vs[i], vs[i + 1]) for i in range(k)]
    strips = []
    for i in range(k + 1):
        a = x if i == 0 else pes[i - 1]
        b = y if i == k else pes[i]
        strips.append(strip_between(win, vs[i], a, b))
    corners = []
    for i in range(1, k + 1):
        peid = pes[i - 1]
        h0 = strips[i - 1].h_b
        h1 = strips[i].h_a
        ((m11, m12), (m21, m22)), (t1, t2) = _affine(win, peid, vs[i - 1])
        if m12 == 0:
            raise FiberParallel(f"plane {peid!r}: fiber-parallel chart")
        exact = Fraction(h1 - t1 - m11 * h0, m12)
        f0 = round_half_down(exact)
        if abs(f0) > win.W:
            raise WindowExceeded(f"corner fiber {f0} outside [-{win.W}, {win.W}]")
        h_next = m11 * h0 + m12 * f0 + t1
        f_next = m21 * h0 + m22 * f0 + t2
        if abs(f_next) > win.W:
            raise WindowExceeded(f"corner fiber {f_next} outside [-{win.W}, {win.W}]")
        line_prev = win.line(vs[i - 1], peid)
        lo, hi = line_prev.param_range_in_window()
        if not (lo <= h0 <= hi):
            raise WindowExceeded(f"corner param {h0} outside line window [{lo}, {hi}]")
        line_next = win.line(vs[i], peid)
        lo, hi = line_next.param_range_in_window()
        if not (lo <= h_next <= hi):
            raise WindowExceeded(
                f"corner param {h_next} outside line window [{lo}, {hi}]"
            )
        corners.append(
            Corner(
                plane=peid,
                frames={vs[i - 1]: (h0, f0), vs[i]: (h_next, f_next)},
                exact_fiber=exact,
                rounded=(f0 != exact),
            )
        )
    segments = []
    d_h = 0
    d_v = 0
    for i in range(k + 1):
        tree = win.piece(vs[i]).tree
        if i == 0:
            lbase, lf = x.base, x.fiber
        else:
            h, f = corners[i - 1].frames[vs[i]]
            lbase, lf = win.line(vs[i], pes[i - 1]).point(h), f
        if i == k:
            rbase, rf = y.base, y.fiber
        else:
            h, f = corners[i].frames[vs[i]]
            rbase, rf = win.line(vs[i], pes[i]).point(h), f
        H = tree.distance(lbase, rbase)
        R = abs(lf - rf)
        segments.append((H, R))
        d_h += H
        d_v += R
    return SpecialPath(x, y, vs, corners, segments, d_h, d_v)


def path_components(sp: SpecialPath) -> tuple[int, int, int]:
    """(d_h, d_v, l1 total) of a special path."""
    return sp.d_h, sp.d_v, sp.d_h + sp.d_v


def deck_shift(win: CKAWindow, peid: str, k: int, x: PiecePoint) -> PiecePoint:
    """Translate a point by the k-th power of the plane's parent-side word.

    The element acts on the parent piece as a base translation along its
    boundary axis and on the child piece through the gluing chart: h shifts
    by m11*k*|w| letters (a child boundary-word power) and the fiber by
    m21*k*|w|. Only the plane's two pieces are supported."""
    plane = win.plane(peid)
    w_par = win.line(plane.parent, peid).word
    step = k * len(w_par)
    if x.piece == plane.parent:
        shift = w_par * k if k >= 0 else words.inv(w_par) * (-k)
        return win.piece_point(x.piece, words.mul(shift, x.base), x.fiber)
    if x.piece == plane.child:
        (m11, _), (m21, _) = plane.matrix
        w_c = win.line(plane.child, peid).word
        dh = m11 * step
        if dh % len(w_c) != 0:
            raise ValueError(
                f"translation by {dh} letters is not a power of {w_c!r}"
            )
        j = dh // len(w_c)
        shift = w_c * j if j >= 0 else words.inv(w_c) * (-j)
        return win.piece_point(x.piece, words.mul(shift, x.base), x.fiber + m21 * step)
    raise ValueError(f"point {x} is not in a side of plane {peid!r}")
