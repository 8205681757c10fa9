"""Brute-force distances on the discretized window graph.

Every piece contributes its base-tree window times the fiber range as a unit
grid; plane-incident points of adjacent pieces are identified through the
chart conversion wherever both sides stay inside their windows. Distances are
plain BFS over the quotient. A pair is boundary_suspect when no shortest
route avoids the window shell (outermost base or fiber layer), or an endpoint
sits on the shell itself."""

from __future__ import annotations

from collections import deque

from ..errors import DisconnectedPair, WindowExceeded
from .window import CKAWindow, PiecePoint


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


class WindowOracle:
    """Quotient grid graph of a window with BFS distance queries."""

    def __init__(self, win: CKAWindow):
        self.win = win
        nf = 2 * win.W + 1
        self._nf = nf
        self._base_index: dict[int, dict[str, int]] = {}
        self._base_lists: dict[int, list[str]] = {}
        self._tree_edges: dict[int, list[tuple[int, int]]] = {}
        for piece in win.pieces.values():
            rank = piece.rank
            if rank in self._base_index:
                continue
            verts = list(piece.tree.vertices())
            index = {v: i for i, v in enumerate(verts)}
            edges = []
            for v in verts:
                for u in piece.tree.neighbors(v):
                    if u in index and index[u] < index[v]:
                        edges.append((index[u], index[v]))
            self._base_index[rank] = index
            self._base_lists[rank] = verts
            self._tree_edges[rank] = edges
        self._offsets: dict[str, int] = {}
        total = 0
        self._pids = sorted(win.pieces)
        for pid in self._pids:
            self._offsets[pid] = total
            total += len(self._base_lists[win.pieces[pid].rank]) * nf
        self._total = total
        uf = _UnionFind(total)
        for peid in sorted(win.planes):
            plane = win.planes[peid]
            pline = win.line(plane.parent, peid)
            cline = win.line(plane.child, peid)
            lo, hi = pline.param_range_in_window()
            clo, chi = cline.param_range_in_window()
            for h in range(lo, hi + 1):
                pv = pline.point(h)
                for f in range(-win.W, win.W + 1):
                    h2, f2 = plane.to_child(h, f)
                    if clo <= h2 <= chi and abs(f2) <= win.W:
                        uf.union(
                            self._vid(plane.parent, pv, f),
                            self._vid(plane.child, cline.point(h2), f2),
                        )
        self._root = [uf.find(i) for i in range(total)]
        adj: dict[int, set] = {}
        for pid in self._pids:
            piece = win.pieces[pid]
            off = self._offsets[pid]
            nb = len(self._base_lists[piece.rank])
            for ui, vi in self._tree_edges[piece.rank]:
                for fi in range(nf):
                    a = self._root[off + ui * nf + fi]
                    b = self._root[off + vi * nf + fi]
                    adj.setdefault(a, set()).add(b)
                    adj.setdefault(b, set()).add(a)
            for bi in range(nb):
                for fi in range(nf - 1):
                    a = self._root[off + bi * nf + fi]
                    b = self._root[off + bi * nf + fi + 1]
                    adj.setdefault(a, set()).add(b)
                    adj.setdefault(b, set()).add(a)
        self._adj = {v: sorted(ns) for v, ns in adj.items()}
        shell = set()
        for pid in self._pids:
            piece = win.pieces[pid]
            off = self._offsets[pid]
            for bi, base in enumerate(self._base_lists[piece.rank]):
                on_base_shell = len(base) == win.R_tree
                for fi in range(nf):
                    if on_base_shell or fi == 0 or fi == nf - 1:
                        shell.add(self._root[off + bi * nf + fi])
        self._shell = shell

    # -- ids -----------------------------------------------------------------

    def _vid(self, pid: str, base: str, fiber: int) -> int:
        piece = self.win.pieces[pid]
        bi = self._base_index[piece.rank][base]
        return self._offsets[pid] + bi * self._nf + (fiber + self.win.W)

    def node(self, x: PiecePoint) -> int:
        self.win.require_point(x)
        return self._root[self._vid(x.piece, x.base, x.fiber)]

    def vertex_count(self) -> int:
        return len(self._adj)

    # -- queries ---------------------------------------------------------------

    def _bfs(self, src: int, targets: set, avoid_shell: bool):
        dist = {src: 0}
        if avoid_shell and src in self._shell:
            return {}
        left = set(targets)
        left.discard(src)
        q = deque([src])
        while q and left:
            u = q.popleft()
            du = dist[u]
            for v in self._adj.get(u, ()):
                if v in dist or (avoid_shell and v in self._shell):
                    continue
                dist[v] = du + 1
                left.discard(v)
                q.append(v)
        return dist

    def distances_from(self, x: PiecePoint, ys) -> list:
        """[(distance, boundary_suspect)] aligned with ys; one BFS pair total."""
        src = self.node(x)
        nodes = [self.node(y) for y in ys]
        targets = set(nodes)
        full = self._bfs(src, targets, avoid_shell=False)
        safe = self._bfs(src, targets, avoid_shell=True)
        out = []
        src_shell = src in self._shell
        for n in nodes:
            if n not in full:
                raise DisconnectedPair("window graph is not connected")
            d = full[n]
            suspect = src_shell or n in self._shell or safe.get(n) != d
            out.append((d, suspect))
        return out

    def distance(self, x: PiecePoint, y: PiecePoint) -> int:
        return self.distances_from(x, [y])[0][0]

    def distance_with_flag(self, x: PiecePoint, y: PiecePoint) -> tuple:
        return self.distances_from(x, [y])[0]


def window_oracle(win: CKAWindow) -> WindowOracle:
    """Build (or reuse) the window's oracle."""
    cached = getattr(win, "_oracle", None)
    if cached is None:
        cached = WindowOracle(win)
        win._oracle = cached
    return cached


def brute_force_distance(win: CKAWindow, x: PiecePoint, y: PiecePoint) -> int:
    """Exact quotient-grid distance; raises WindowExceeded off-window."""
    if not isinstance(x, PiecePoint) or not isinstance(y, PiecePoint):
        raise WindowExceeded("oracle points must be piece points")
    return window_oracle(win).distance(x, y)
