"""Fiber-line carriers, the projection system over window pieces, and the
vertical distance checks, pinned against hand-expanded flip values."""

import random
from fractions import Fraction

import pytest

from qtlab.cka import GraphOfGroupsConfig, PiecePoint, build_window
from qtlab.errors import WindowExceeded
from qtlab.fiber_lines import (
    FiberFamily,
    build_fiber_family,
    build_fiber_line,
    check_common_projection,
    check_distance_estimates,
    default_companion,
    max_projection_diameter,
    pi1,
    pi2,
    project_fiber_line,
    projection_set_diameter,
    vertical_formula_report,
    verify_fiber_axioms,
)
from qtlab.metric_core import four_point_delta
from qtlab.quasi_tree import bottleneck_check


def flip_doc():
    return {
        "vertex": {
            "v": {"rank": 2, "words": {"e1": "a"}},
            "w": {"rank": 2, "words": {"e1": "a"}},
        },
        "edge": {
            "e1": {"ends": ["v", "w"], "matrix": [[0, 1], [1, 0]], "translation": [0, 0]},
        },
    }


def twisted_doc():
    doc = flip_doc()
    doc["edge"]["e1"]["matrix"] = [[1, 1], [1, 0]]
    return doc


def star_doc():
    return {
        "vertex": {
            "hub": {"rank": 3, "words": {"e1": "a", "e2": "b", "e3": "c"}},
            "l1": {"rank": 2, "words": {"e1": "a"}},
            "l2": {"rank": 2, "words": {"e2": "a"}},
            "l3": {"rank": 2, "words": {"e3": "a"}},
        },
        "edge": {
            "e1": {"ends": ["hub", "l1"], "matrix": [[0, 1], [1, 0]], "translation": [0, 0]},
            "e2": {"ends": ["hub", "l2"], "matrix": [[1, 1], [1, 0]], "translation": [0, 0]},
            "e3": {"ends": ["hub", "l3"], "matrix": [[0, 1], [1, 0]], "translation": [1, 0]},
        },
    }


@pytest.fixture(scope="module")
def flip():
    win = build_window(GraphOfGroupsConfig.from_dict(flip_doc()), "v", 2, 3, 8)
    return win, build_fiber_family(win)


class TestCarrier:
    def test_leaf_piece_shape(self, flip):
        win, fam = flip
        fl = fam.lines["r/e1:1/e1:b"]
        assert fl.planes == ["r/e1:1/e1:b"]
        assert fl.carrier.has_vertex(("bind", 0))
        assert fl.carrier.has_vertex(("pl", "r/e1:1/e1:b", 0, 0))

    def test_adjacent_apexes_within_three(self, flip):
        win, fam = flip
        fl = fam.lines["r/e1:1/e1:b"]
        keys = sorted(k for k in fl.apexes if k[0] == "r/e1:1/e1:b")
        for a, b in zip(keys, keys[1:]):
            assert fl.distance(fl.apexes[a], fl.apexes[b]) <= 3

    def test_cone_shortcut_on_wide_plane(self):
        win = build_window(GraphOfGroupsConfig.from_dict(flip_doc()), "v", 2, 6, 16)
        fl = build_fiber_line(win, "r/e1:1")
        # the same far-side line at plane-distance 24 collapses through its apex
        u = ("pl", "r/e1:1", -12, 3)
        v = ("pl", "r/e1:1", 12, 3)
        assert fl.carrier.has_vertex(u) and fl.carrier.has_vertex(v)
        assert fl.distance(u, v) == 2

    def test_marked_line_rungs(self, flip):
        win, fam = flip
        fl = fam.lines["r"]
        for f in (-8, 0, 5):
            assert fl.carrier.has_edge(("bind", f), ("pl", "r/e1:1", 0, f))

    def test_quasi_line_diagnostics_stable(self):
        deltas = []
        for rt, w in ((3, 8), (6, 16)):
            win = build_window(GraphOfGroupsConfig.from_dict(flip_doc()), "v", 2, rt, w)
            fl = build_fiber_line(win, "r/e1:1")
            deltas.append(four_point_delta(fl.carrier, samples=150, seed=3))
            binding = [("bind", f) for f in range(-w, w + 1, max(1, w // 4))]
            rep = bottleneck_check(fl.carrier, [(binding[0], binding[-1])], delta=6)
            assert rep.verdict
        assert all(d <= 6 for d in deltas)
        assert abs(deltas[0] - deltas[1]) <= 2


class TestProjections:
    def test_family_shape(self, flip):
        win, fam = flip
        assert fam.class1.member_count() == 7
        assert fam.class2.member_count() == 3
        assert fam.members(2) == ["r/e1:1", "r/e1:B", "r/e1:b"]

    def test_projection_is_coned_line(self, flip):
        win, fam = flip
        full = project_fiber_line(fam, "r", "r/e1:1/e1:b")
        apexes = [u for u in full if u[0] == "ap"]
        assert len(apexes) == 1
        key = fam.apex_data[("r", "r/e1:1/e1:b")]
        assert key == ("r/e1:1", 0)
        assert fam.lines["r"].apexes[key] in full
        assert full - {fam.lines["r"].apexes[key]} == set(
            fam.lines["r"].line_vertices[key]
        )

    def test_diameter_formula_matches_dijkstra(self, flip):
        win, fam = flip
        rng = random.Random(4)
        keys = rng.sample(sorted(fam.apex_data), 12)
        for tgt, src in keys:
            full = sorted(project_fiber_line(fam, tgt, src), key=str)
            g = fam.lines[tgt].carrier
            best = Fraction(0)
            for i, u in enumerate(full):
                dist = g.shortest_from(u, targets=set(full[i + 1 :]))
                for v in full[i + 1 :]:
                    best = max(best, dist[v])
            assert projection_set_diameter(fam, tgt, src) == best

    def test_diameter_bound(self, flip):
        win, fam = flip
        assert max_projection_diameter(fam) == 2

    def test_far_target_sets_coincide(self, flip):
        win, fam = flip
        u, v = "r/e1:b/e1:b", "r/e1:b/e1:B"
        w = "r/e1:B/e1:b"
        assert fam.apex_data[(w, u)] == fam.apex_data[(w, v)]
        assert fam.class1.projection(w, u) == fam.class1.projection(w, v)
        checked, mismatched = check_common_projection(fam)
        assert checked == 60
        assert mismatched == 0

    def test_mirror_equivariance(self, flip):
        win, fam = flip

        def mirror(pid):
            return pid.translate(str.maketrans("bB", "Bb"))

        for (tgt, src), (peid, c) in fam.apex_data.items():
            assert fam.apex_data[(mirror(tgt), mirror(src))] == (mirror(peid), c)


class TestAxioms:
    @pytest.mark.parametrize(
        "doc_fn,center,m1,m2,triples",
        [
            (flip_doc, "v", 7, 3, 60),
            (twisted_doc, "v", 7, 3, 60),
            (star_doc, "hub", 31, 15, 12180),
        ],
    )
    def test_scenarios_pass(self, doc_fn, center, m1, m2, triples):
        win = build_window(GraphOfGroupsConfig.from_dict(doc_fn()), center, 2, 3, 8)
        fam = build_fiber_family(win)
        assert fam.class1.member_count() == m1
        assert fam.class2.member_count() == m2
        rep = verify_fiber_axioms(fam, xi=1)
        assert rep.verdict
        assert rep.xi_witnessed == 0
        assert rep.common_triples == triples
        assert rep.common_mismatches == 0
        assert rep.max_diameter == 2 <= 5

    def test_planted_corruption_fails(self, flip):
        win, _ = flip
        fam = build_fiber_family(win)
        w, u = "r/e1:B/e1:b", "r/e1:b/e1:b"
        other = next(
            k for k in fam.lines[w].apexes if k != fam.apex_data[(w, u)]
        )
        fam.apex_data[(w, u)] = other
        fam.class1.set_projection(w, u, [fam.lines[w].apexes[other]])
        rep = verify_fiber_axioms(fam, xi=1)
        assert rep.common_mismatches > 0
        assert not rep.verdict


class TestPointMaps:
    def test_binding_heights(self, flip):
        win, fam = flip
        assert pi1(win, fam, PiecePoint("r", "", 0)) == ("bind", 0)
        assert pi1(win, fam, PiecePoint("r", "ab", 7)) == ("bind", 7)
        with pytest.raises(WindowExceeded):
            pi1(win, fam, PiecePoint("r", "", 9))

    def test_fiber_translation_equivariance(self, flip):
        win, fam = flip
        for k in (-3, 2):
            base = pi1(win, fam, PiecePoint("r", "b", 1))
            assert pi1(win, fam, PiecePoint("r", "b", 1 + k)) == (base[0], base[1] + k)

    def test_companion_choice(self, flip):
        win, fam = flip
        assert default_companion(win, "r") == "r/e1:1"
        assert default_companion(win, "r/e1:b") == "r"

    def test_on_plane_point_embeds_as_itself(self, flip):
        win, fam = flip
        # base on the boundary line: the push is the chart conversion alone
        u = pi2(win, fam, PiecePoint("r", "a", 3))
        assert u == ("pl", "r/e1:1", 3, 1)

    def test_off_plane_point_pushed_along_strip(self, flip):
        win, fam = flip
        u = pi2(win, fam, PiecePoint("r", "ba", 3))
        assert u == ("pl", "r/e1:1", 3, 0)

    def test_fiber_separation_saturates(self, flip):
        win, fam = flip
        img0 = pi2(win, fam, PiecePoint("r", "", 0))
        fl = fam.lines["r/e1:1"]
        got = [
            fl.distance(img0, pi2(win, fam, PiecePoint("r", "", k))) for k in (1, 2, 5)
        ]
        assert got == [1, 2, 2]


class TestDistanceEstimates:
    def test_same_piece_pair_single_row(self, flip):
        win, fam = flip
        rep = check_distance_estimates(
            win, fam, [(PiecePoint("r", "b", 2), PiecePoint("r", "ab", -2))]
        )
        assert [r.estimate for r in rep.rows] == ["v-even"]
        row = rep.rows[0]
        assert row.lhs == row.rhs == 4

    def test_mixed_class_pair_skipped(self, flip):
        win, fam = flip
        rep = check_distance_estimates(
            win, fam, [(PiecePoint("r", "", 0), PiecePoint("r/e1:1", "", 0))]
        )
        assert rep.pairs == 0
        assert rep.skipped == 1

    def test_degenerate_companion_rows(self, flip):
        win, fam = flip
        x = PiecePoint("r", "", 0)
        y = PiecePoint("r/e1:b/e1:b", "", 6)
        rep = check_distance_estimates(win, fam, [(x, y)])
        hevens = [r for r in rep.rows if r.estimate == "h-even"]
        assert hevens and all(r.rhs == 0 for r in hevens)
        assert all(r.lhs <= 2 for r in hevens)
        assert rep.degenerate_rows >= 1

    def test_vertical_rows_additive_envelope(self, flip):
        win, fam = flip
        pairs = [
            (PiecePoint("r", "", 5), PiecePoint("r/e1:1/e1:b", "a", -3)),
            (PiecePoint("r", "", 0), PiecePoint("r/e1:b/e1:b", "", 6)),
            (PiecePoint("r/e1:1", "a", 4), PiecePoint("r/e1:b", "", -4)),
        ]
        rep = check_distance_estimates(win, fam, pairs)
        for row in rep.rows:
            if row.estimate == "v-even":
                assert abs(row.lhs - row.rhs) <= 3
        assert rep.ratio_env <= 6
        assert rep.defect_env <= 8

    def test_csv_deterministic(self, flip):
        win, fam = flip
        pairs = [(PiecePoint("r", "b", 2), PiecePoint("r", "ab", -2))]
        a = check_distance_estimates(win, fam, pairs).to_csv()
        b = check_distance_estimates(win, fam, pairs).to_csv()
        assert a == b
        assert a.startswith("pair,estimate,index,lhs,rhs\n")


class TestVerticalFormula:
    def test_same_piece_exact(self, flip):
        win, fam = flip
        rep = vertical_formula_report(
            win, fam, [(PiecePoint("r", "b", 2), PiecePoint("r", "ab", -2))]
        )
        row = rep.rows[0]
        assert row.d_v == 4
        assert row.proj_sum == 4
        assert row.tree_len == 0

    def test_pure_vertical_crossing_hand_expanded(self, flip):
        win, fam = flip
        rep = vertical_formula_report(
            win, fam, [(PiecePoint("r", "", 5), PiecePoint("r/e1:1", "", 5))]
        )
        row = rep.rows[0]
        assert row.d_v == 10
        assert row.proj_sum == 16
        assert row.tree_len == 1
        assert abs(row.d_v - row.rhs) <= 9

    def test_fitted_constant_and_violations(self, flip):
        win, fam = flip
        rng = random.Random(7)
        pids = sorted(win.pieces)
        pairs = []
        for _ in range(50):
            pa, pb = rng.choice(pids), rng.choice(pids)
            ta, tb = win.pieces[pa].tree, win.pieces[pb].tree
            pairs.append(
                (
                    PiecePoint(pa, rng.choice(sorted(ta.vertices())), rng.randint(-6, 6)),
                    PiecePoint(pb, rng.choice(sorted(tb.vertices())), rng.randint(-6, 6)),
                )
            )
        rep = vertical_formula_report(win, fam, pairs)
        assert rep.violations == 0
        assert Fraction(1, 3) < rep.C <= 1
        recheck = vertical_formula_report(win, fam, pairs, C=rep.C)
        assert recheck.violations == 0
        strict = vertical_formula_report(win, fam, pairs, C=rep.C / 4)
        assert strict.violations > 0

    def test_csv_shape(self, flip):
        win, fam = flip
        rep = vertical_formula_report(
            win, fam, [(PiecePoint("r", "", 1), PiecePoint("r", "a", -1))]
        )
        text = rep.to_csv()
        assert text.splitlines()[0] == "pair,d_v,proj_sum,tree_len,ratio"
        assert rep.to_json().endswith("\n")
