"""Builders for the bundled reference projection families."""

from __future__ import annotations

from . import words
from .errors import WindowExceeded
from .metric_core import FreeTree, Line, WeightedGraph, tree_projection
from .projections import ProjectionFamily


def coset_reps(tree: FreeTree, word: str, max_len: int) -> list[str]:
    """Minimal-length coset representatives g<word> with |g| <= max_len.

    For a single-letter word the canonical rep simply avoids a trailing run of
    that letter or its inverse; in general we keep g whenever g is the shortest
    element of g * <word> among window elements."""
    reps = []
    for g in tree.vertices():
        if len(g) > max_len:
            continue
        shorter = False
        for p in (word, words.inv(word)):
            if len(words.mul(g, p)) < len(g):
                shorter = True
                break
        if not shorter:
            # also drop non-canonical equal-length twins: keep the lex-least
            twins = [g]
            for p in (word, words.inv(word)):
                t = words.mul(g, p)
                if len(t) == len(g):
                    twins.append(t)
            if min(twins) != g:
                continue
            reps.append(g)
    return reps


def translate_axis_family(
    rank: int = 2,
    word: str = "a",
    conj_len: int = 4,
    radius: int = 8,
) -> tuple[ProjectionFamily, FreeTree, dict]:
    """Projection family of all window translates g * axis(word) in F_rank.

    Members are unit path graphs on the axis window points, indexed by the
    canonical coset rep; projections are nearest-point sets via the exact
    tree formula. Returns (family, tree, lines-by-index).
    """
    tree = FreeTree(rank, radius)
    fam = ProjectionFamily()
    lines: dict[str, Line] = {}
    for g in coset_reps(tree, word, conj_len):
        ax = Line.axis(tree, word, conj=g)
        lo, hi = ax.param_range_in_window()
        graph = WeightedGraph()
        prev = None
        params = {}
        for n in range(lo, hi + 1):
            v = ax.point(n)
            graph.add_vertex(v)
            params[v] = n
            if prev is not None:
                graph.add_edge(prev, v)
            prev = v
        fam.add_member(g, graph, line_params=params)
        lines[g] = ax
    idxs = fam.indices()
    for tgt in idxs:
        for src in idxs:
            if tgt == src:
                continue
            proj = tree_projection(tree, lines[tgt], lines[src])
            for n, v in proj:
                if not fam.graph(tgt).has_vertex(v):
                    raise WindowExceeded(
                        f"projection of {src!r} onto {tgt!r} leaves the member "
                        f"window at param {n}"
                    )
            fam.set_projection(tgt, src, {v for _, v in proj})
    return fam, tree, lines
