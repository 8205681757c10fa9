"""Quasi-tree construction and distance-formula tests.

The carrier oracle is an independent dict-based Dijkstra rebuilt from the
carrier's edge list; formula sums are recomputed from raw projection data."""

import heapq
import random
from fractions import Fraction

import pytest

from qtlab.errors import EmptyFamily
from qtlab.families import translate_axis_family
from qtlab.metric_core import FreeTree, Line, WeightedGraph, tree_projection
from qtlab.projections import PointRef, ProjectionFamily, cutoff, extended_distance
from qtlab.quasi_tree import (
    bottleneck_check,
    build_quasi_tree,
    validate_distance_formula,
)


def oracle_dijkstra(edges, s, t):
    adj = {}
    for u, v, ln in edges:
        adj.setdefault(u, []).append((v, ln))
        adj.setdefault(v, []).append((u, ln))
    dist = {s: Fraction(0)}
    heap = [(Fraction(0), 0, s)]
    n = 1
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == t:
            return d
        for v, ln in adj.get(u, ()):
            nd = d + ln
            if v not in done and (v not in dist or nd < dist[v]):
                dist[v] = nd
                heapq.heappush(heap, (nd, n, v))
                n += 1
    return None


def subfamily(tree, lines: dict) -> ProjectionFamily:
    fam = ProjectionFamily()
    for idx, ax in lines.items():
        g = WeightedGraph()
        params = {}
        lo, hi = ax.param_range_in_window()
        prev = None
        for n in range(lo, hi + 1):
            v = ax.point(n)
            g.add_vertex(v)
            params[v] = n
            if prev is not None:
                g.add_edge(prev, v)
            prev = v
        fam.add_member(idx, g, line_params=params)
    for tgt in lines:
        for src in lines:
            if tgt != src:
                fam.set_projection(
                    tgt, src, {v for _, v in tree_projection(tree, lines[tgt], lines[src])}
                )
    return fam


class TestBuild:
    def test_empty_family(self):
        with pytest.raises(EmptyFamily):
            build_quasi_tree(ProjectionFamily(), 4)

    def test_single_member_is_member_copy(self):
        tree = FreeTree(2, 6)
        fam = subfamily(tree, {"a0": Line.axis(tree, "a")})
        qt = build_quasi_tree(fam, 4, check=False)
        assert qt.bridge_edges == []
        assert qt.carrier.vertex_count() == fam.graph("a0").vertex_count()
        assert qt.carrier.edge_count() == fam.graph("a0").edge_count()
        assert qt.carrier.shortest_distance(("a0", "AA"), ("a0", "aaa")) == 5

    def test_two_members_always_bridged(self):
        tree = FreeTree(2, 8)
        fam = subfamily(
            tree, {"": Line.axis(tree, "a"), "aaab": Line.axis(tree, "a", conj="aaab")}
        )
        qt = build_quasi_tree(fam, 1, check=False)
        assert len(qt.bridged_pairs) == 1
        # the two projection sets are singletons one bridge apart
        assert qt.carrier.shortest_distance(("", "aaa"), ("aaab", "aaab")) == 1

    def test_middle_blocks_outer_pair(self):
        tree = FreeTree(2, 8)
        K = 2
        lines = {
            "X": Line.axis(tree, "a", conj="b"),
            "Y": Line.axis(tree, "a"),
            "Z": Line.axis(tree, "a", conj="aaaab"),
        }
        fam = subfamily(tree, lines)
        # the middle member separates the outer feet by 2K
        assert fam.set_diameter("Y", fam.projection("Y", "X") | fam.projection("Y", "Z")) == 2 * K
        qt = build_quasi_tree(fam, K, check=False)
        pairs = set(qt.bridged_pairs)
        assert ("X", "Y") in pairs
        assert ("Y", "Z") in pairs
        assert ("X", "Z") not in pairs

    def test_carrier_matches_oracle_dijkstra(self):
        tree = FreeTree(2, 8)
        lines = {
            "X": Line.axis(tree, "a", conj="b"),
            "Y": Line.axis(tree, "a"),
            "Z": Line.axis(tree, "a", conj="aaaab"),
        }
        fam = subfamily(tree, lines)
        qt = build_quasi_tree(fam, 2, check=False)
        edges = list(qt.carrier.edges())
        rng = random.Random(3)
        verts = sorted(qt.carrier.vertices(), key=str)
        for _ in range(25):
            s, t = rng.choice(verts), rng.choice(verts)
            assert qt.carrier.shortest_distance(s, t) == oracle_dijkstra(edges, s, t)

    def test_bridge_edges_join_projection_sets(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        for (X, u), (Z, v) in qt.bridge_edges:
            assert u in fam.projection(X, Z)
            assert v in fam.projection(Z, X)

    def test_removing_bridges_recovers_members(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        member_edges = sum(fam.graph(i).edge_count() for i in fam.indices())
        assert qt.carrier.edge_count() == member_edges + len(qt.bridge_edges)

    def test_weak_family_warns(self):
        tree = FreeTree(2, 8)
        lines = {
            "a0": Line.axis(tree, "a"),
            "b0": Line.axis(tree, "b"),
            "ab": Line.axis(tree, "ab"),
            "W": Line.axis(tree, "a", conj="b"),
        }
        fam = subfamily(tree, lines)
        # crossing axes give unequal segment projections: strong cutoff is 2,
        # so probing at K/4 = 1/2 must warn
        with pytest.warns(UserWarning):
            build_quasi_tree(fam, 2, check=True)

    def test_dot_tags_bridges(self):
        tree = FreeTree(2, 8)
        fam = subfamily(
            tree, {"": Line.axis(tree, "a"), "b": Line.axis(tree, "a", conj="b")}
        )
        qt = build_quasi_tree(fam, 4, check=False)
        dot = qt.to_dot()
        assert 'bridge="1"' in dot
        assert dot.count('bridge="1"') == len(qt.bridge_edges)


class TestDistanceFormula:
    def test_single_member_reduces_to_cutoff(self):
        tree = FreeTree(2, 6)
        fam = subfamily(tree, {"a0": Line.axis(tree, "a")})
        qt = build_quasi_tree(fam, 4, check=False)
        samples = [
            (("a0", "AA"), ("a0", "aaa")),
            (("a0", ""), ("a0", "a")),
        ]
        rep = validate_distance_formula(qt, samples)
        assert rep.verdict
        # d = 5 >= K contributes itself; d = 1 < K relies on the +3K slack
        assert rep.rows[0]["lhs"] == Fraction(5, 4)
        assert rep.rows[0]["mid"] == 5
        assert rep.rows[1]["lhs"] == 0
        assert rep.rows[1]["rhs"] == 12

    def test_small_projections_bounded_by_3K(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        samples = [(("", ""), ("b", "b")), (("", ""), ("ab", "ab"))]
        rep = validate_distance_formula(qt, samples)
        assert rep.verdict
        for row in rep.rows:
            if row["lhs"] == 0:
                assert row["mid"] <= 12

    def test_formula_holds_on_sampled_pairs(self):
        fam, tree, lines = translate_axis_family(conj_len=3, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        rng = random.Random(11)
        verts = sorted(qt.carrier.vertices(), key=str)
        samples = []
        while len(samples) < 200:
            a, b = rng.choice(verts), rng.choice(verts)
            if a != b:
                samples.append((a, b))
        rep = validate_distance_formula(qt, samples)
        assert rep.verdict
        assert rep.failures == 0
        assert rep.pairs == 200
        assert rep.worst_lower_margin >= 0
        assert rep.worst_upper_margin >= 0

    def test_formula_sum_matches_independent_sum(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        K = 4
        qt = build_quasi_tree(fam, K, check=False)
        x, z = ("b", "baaa"), ("B", "BAAA")
        rep = validate_distance_formula(qt, [(x, z)])
        total = Fraction(0)
        for Y in fam.indices():
            total += cutoff(extended_distance(fam, Y, PointRef(*x), PointRef(*z)), K)
        assert rep.rows[0]["lhs"] == total / 4
        assert rep.rows[0]["rhs"] == 2 * total + 3 * K

    def test_slack_widens_bounds(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        samples = [(("", "aaa"), ("b", "baa"))]
        strict = validate_distance_formula(qt, samples)
        slack = validate_distance_formula(qt, samples, slack=True)
        assert slack.rows[0]["lhs"] <= strict.rows[0]["lhs"]
        assert slack.rows[0]["rhs"] >= strict.rows[0]["rhs"]

    def test_distances_monotone_in_K(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        rng = random.Random(5)
        verts = None
        samples = None
        prev = None
        for K in (2, 4, 8):
            qt = build_quasi_tree(fam, K, check=False)
            if samples is None:
                verts = sorted(qt.carrier.vertices(), key=str)
                samples = [
                    (rng.choice(verts), rng.choice(verts)) for _ in range(30)
                ]
            dists = [qt.carrier.shortest_distance(a, b) for a, b in samples]
            if prev is not None:
                assert all(d1 >= d0 for d0, d1 in zip(prev, dists))
            prev = dists

    def test_carrier_never_beats_member_metric_upward(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        g = fam.graph("")
        for u, v in ((("", ""), ("", "aaa")), (("", "AA"), ("", "aa"))):
            intra = g.shortest_distance(u[1], v[1])
            assert qt.carrier.shortest_distance(u, v) <= intra

    def test_csv_deterministic(self):
        fam, tree, lines = translate_axis_family(conj_len=2, radius=8)
        qt = build_quasi_tree(fam, 4, check=False)
        samples = [(("", ""), ("b", "baa"))]
        a = validate_distance_formula(qt, samples).to_csv()
        b = validate_distance_formula(qt, samples).to_csv()
        assert a == b
        assert a.splitlines()[0] == "pair,lhs,mid,rhs,margin"
        assert a.endswith("\n")


class TestBottleneck:
    def test_tree_has_no_alternatives(self):
        tree = FreeTree(2, 3)
        g = tree.window_graph()
        samples = [("", "aba"), ("AA", "bb"), ("ab", "BA")]
        rep = bottleneck_check(g, samples, 0)
        assert rep.verdict
        assert rep.worst_delta == 0
        assert rep.alternatives == 0

    def test_cycle_witnesses_quarter_length(self):
        n = 3
        g = WeightedGraph()
        size = 4 * n
        for i in range(size):
            g.add_edge(i, (i + 1) % size)
        rep = bottleneck_check(g, [(0, 2 * n)], n)
        assert rep.worst_delta == n
        assert rep.verdict
        assert not bottleneck_check(g, [(0, 2 * n)], n - 1).verdict

    def test_quasi_tree_carrier_is_treelike(self):
        worst = {}
        for conj_len in (2, 3):
            fam, tree, lines = translate_axis_family(conj_len=conj_len, radius=8)
            qt = build_quasi_tree(fam, 4, check=False)
            rng = random.Random(13)
            verts = sorted(qt.carrier.vertices(), key=str)
            samples = []
            while len(samples) < 15:
                a, b = rng.choice(verts), rng.choice(verts)
                if a != b:
                    samples.append((a, b))
            rep = bottleneck_check(qt.carrier, samples, 6)
            worst[conj_len] = rep.worst_delta
            assert rep.verdict
        # stability: enlarging the family does not inflate the bottleneck
        assert abs(worst[3] - worst[2]) <= 3
