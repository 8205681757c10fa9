"""Finite window of the piece space over a graph-of-groups config.

The Bass-Serre window is a rooted tree of pieces expanded to radius R_bs.
Each piece models tree x fiber: a rank-r free-group window of radius R_tree
times integer fibers in [-W, W]. A piece meets each neighbor along a plane:
line x fiber on either side, the two charts related by the edge's integer
affine map. Every boundary line is a coset axis of the piece's boundary word
for that edge; children instantiate one piece per short coset rep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .. import words
from ..errors import ConfigInvalid, RadiusExceeded, WindowExceeded
from ..families import coset_reps
from ..metric_core import FreeTree, Line
from .config import GraphOfGroupsConfig, Matrix, Vec


@dataclass(frozen=True)
class PiecePoint:
    piece: str
    base: str
    fiber: int


@dataclass(frozen=True)
class PlanePoint:
    """A plane point in the frame of one adjacent piece."""

    plane: str
    h: int
    fiber: int
    frame: str  # piece id whose chart (h, fiber) uses


@dataclass
class Piece:
    pid: str
    uvertex: str
    cls: int
    rank: int
    tree: FreeTree
    parent_plane: Optional[str]
    depth: int
    lines: dict  # plane id -> Line (boundary coset axis in this piece)


@dataclass
class Plane:
    peid: str
    parent: str  # piece id nearer the root
    child: str
    uedge: str
    matrix: Matrix  # parent frame -> child frame
    translation: Vec

    def to_child(self, h: int, f) -> tuple:
        (a, b), (c, d) = self.matrix
        t1, t2 = self.translation
        return (a * h + b * f + t1, c * h + d * f + t2)

    def to_parent(self, h: int, f) -> tuple:
        (a, b), (c, d) = self.matrix
        det = a * d - b * c
        inv = ((d * det, -b * det), (-c * det, a * det))
        t1, t2 = self.translation
        x, y = h - t1, f - t2
        return (inv[0][0] * x + inv[0][1] * y, inv[1][0] * x + inv[1][1] * y)

    def convert(self, from_piece: str, h: int, f) -> tuple:
        if from_piece == self.parent:
            return self.to_child(h, f)
        if from_piece == self.child:
            return self.to_parent(h, f)
        raise ValueError(f"piece {from_piece!r} is not a side of plane {self.peid!r}")

    def other_side(self, pid: str) -> str:
        if pid == self.parent:
            return self.child
        if pid == self.child:
            return self.parent
        raise ValueError(f"piece {pid!r} is not a side of plane {self.peid!r}")


class CKAWindow:
    def __init__(self, cfg, center, R_bs, R_tree, W, coset_len):
        self.cfg = cfg
        self.center = center
        self.R_bs = R_bs
        self.R_tree = R_tree
        self.W = W
        self.coset_len = coset_len
        self.pieces: dict[str, Piece] = {}
        self.planes: dict[str, Plane] = {}
        self.root = "r"

    # -- membership --------------------------------------------------------

    def piece(self, pid: str) -> Piece:
        if pid not in self.pieces:
            raise WindowExceeded(f"piece {pid!r} not in window")
        return self.pieces[pid]

    def plane(self, peid: str) -> Plane:
        if peid not in self.planes:
            raise WindowExceeded(f"plane {peid!r} not in window")
        return self.planes[peid]

    def require_point(self, x: PiecePoint) -> PiecePoint:
        p = self.piece(x.piece)
        p.tree.require(x.base, "piece base")
        if abs(x.fiber) > self.W:
            raise WindowExceeded(f"fiber {x.fiber} outside [-{self.W}, {self.W}]")
        return x

    def line(self, pid: str, peid: str) -> Line:
        p = self.piece(pid)
        if peid not in p.lines:
            raise WindowExceeded(f"plane {peid!r} not incident to piece {pid!r}")
        return p.lines[peid]

    # -- index map ----------------------------------------------------------

    def index_map(self, x: Union[PiecePoint, PlanePoint]) -> str:
        """Piece points index to their piece; plane points to the class-1 side."""
        if isinstance(x, PiecePoint):
            return self.piece(x.piece).pid
        if isinstance(x, PlanePoint):
            plane = self.plane(x.plane)
            return plane.parent if self.piece(plane.parent).cls == 1 else plane.child
        raise TypeError(f"cannot index {x!r}")

    # -- tree navigation ----------------------------------------------------

    def bs_geodesic(self, a: str, b: str) -> list[str]:
        """Piece-id path in the Bass-Serre window tree."""
        up_a = self._ancestors(a)
        up_b = self._ancestors(b)
        seen = set(up_a)
        join = next(p for p in up_b if p in seen)
        left = up_a[: up_a.index(join) + 1]
        right = up_b[: up_b.index(join)]
        return left + right[::-1]

    def _ancestors(self, pid: str) -> list[str]:
        out = [self.piece(pid).pid]
        while True:
            pe = self.pieces[out[-1]].parent_plane
            if pe is None:
                return out
            out.append(self.planes[pe].parent)

    def plane_between(self, a: str, b: str) -> str:
        """The plane joining two adjacent pieces."""
        for pid, other in ((a, b), (b, a)):
            pe = self.pieces[pid].parent_plane
            if pe is not None and self.planes[pe].parent == other:
                return pe
        raise WindowExceeded(f"pieces {a!r} and {b!r} are not adjacent")

    def piece_point(self, pid: str, base: str, fiber: int) -> PiecePoint:
        return self.require_point(PiecePoint(pid, base, fiber))


def build_window(
    cfg: GraphOfGroupsConfig,
    center: str,
    R_bs: int,
    R_tree: int,
    W: int,
    coset_len: int = 1,
) -> CKAWindow:
    """Expand the Bass-Serre window to radius R_bs around a center vertex.

    A piece at underlying vertex v sprouts one child per (incident edge,
    short coset rep) pair, minus the attachment already used by its parent;
    the child attaches along the identity coset of its own boundary word.
    """
    if center not in cfg.vertices:
        raise ConfigInvalid(f"center {center!r} is not a vertex")
    if R_bs < 1 or R_tree < 1 or W < 1 or coset_len < 0:
        raise ConfigInvalid("window bounds must be positive")
    win = CKAWindow(cfg, center, R_bs, R_tree, W, coset_len)
    trees: dict[int, FreeTree] = {}

    def tree_for(rank: int) -> FreeTree:
        if rank not in trees:
            trees[rank] = FreeTree(rank, R_tree)
        return trees[rank]

    def new_piece(pid, uvertex, parent_plane, depth):
        v = cfg.vertices[uvertex]
        piece = Piece(
            pid=pid,
            uvertex=uvertex,
            cls=v.cls,
            rank=v.rank,
            tree=tree_for(v.rank),
            parent_plane=parent_plane,
            depth=depth,
            lines={},
        )
        win.pieces[pid] = piece
        return piece

    root = new_piece(win.root, center, None, 0)
    queue = [(root, None, None)]  # (piece, parent underlying edge, parent rep)
    while queue:
        piece, par_eid, par_rep = queue.pop(0)
        if piece.parent_plane is not None:
            w = cfg.word(piece.uvertex, par_eid)
            piece.lines[piece.parent_plane] = Line.axis(piece.tree, w)
        if piece.depth >= R_bs:
            continue
        for eid in cfg.incident(piece.uvertex):
            w = cfg.word(piece.uvertex, eid)
            for rep in sorted(coset_reps(piece.tree, w, coset_len)):
                if piece.parent_plane is not None and eid == par_eid and rep == "":
                    continue
                label = rep if rep else "1"
                child_pid = f"{piece.pid}/{eid}:{label}"
                other = cfg.other_end(eid, piece.uvertex)
                matrix, translation = cfg.transform(eid, piece.uvertex)
                plane = Plane(
                    peid=child_pid,
                    parent=piece.pid,
                    child=child_pid,
                    uedge=eid,
                    matrix=matrix,
                    translation=translation,
                )
                win.planes[child_pid] = plane
                piece.lines[child_pid] = Line.axis(piece.tree, w, conj=rep)
                child = new_piece(child_pid, other, child_pid, piece.depth + 1)
                queue.append((child, eid, rep))
    return win
