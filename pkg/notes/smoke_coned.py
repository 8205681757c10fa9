import time
from fractions import Fraction

from qtlab.coned_off import (
    ConedBall, ConePoint, cone_off, cone_pieces, coned_word_ball,
    decompose_path, global_thick_distance, global_thick_terms,
    glue_coned_spaces, loxodromic_axis, quasi_line_family, relative_terms,
    theta_bound, thick_distance, validate_coneoff_formula,
    validate_relative_formula, build_quasi_lines, word_ball_bfs,
)
from qtlab.metric_core import WeightedGraph
from qtlab.projections import verify_axioms
from qtlab.cka.window import build_window, PiecePoint
from qtlab.cka.config import GraphOfGroupsConfig

t0 = time.time()

# 1. trivial cone_off checks
base = WeightedGraph()
for i in range(6):
    base.add_edge(i, i + 1)
cs = cone_off(base, {"L": [0, 3, 6]}, r=1)
print("coned d(0,6):", cs.graph.shortest_distance(0, 6))  # through apex: 2
print("d^K K=3:", thick_distance(cs, 0, 6, 3), "| K=0:", thick_distance(cs, 0, 6, 0))

# spec example: x,y far on one coned line -> |beta|_K = 0 for K > 2r
print("far on line K=3 (>2r=2):", thick_distance(cs, 0, 6, 3))

# no cones: tree -> [d]_K
cs2 = cone_off(base, {}, r=1)
print("no cones d^4(0,6):", thick_distance(cs2, 0, 6, 4), "d^7:", thick_distance(cs2, 0, 6, 7))

# 2. the 12-vertex two-geodesic example: need DP != naive single-geodesic
# cycle with a chord line: path A: x-u-ap-w-y vs path B around
g = WeightedGraph()
# x=0, ring 0-1-2-3-4 and 0-5-6-7-4 ; line on {1,3} and {5,7}
for a, b in [(0,1),(1,2),(2,3),(3,4),(0,5),(5,6),(6,7),(7,4)]:
    g.add_edge(a, b)
cs3 = cone_off(g, {"p": [1, 3], "q": [5, 7]}, r=Fraction(1,2))
print("12v d(0,4):", cs3.graph.shortest_distance(0, 4))
for K in (0, 1, 2, 3):
    print("  K=", K, "d^K:", thick_distance(cs3, 0, 4, K))

# 3. f2 ball F2 rel <a>: distance b -> a^50 b ... desk version radius 5
ballsm = coned_word_ball(2, 4, ["a"], r=1)
x, y = "b", "aaab"
print("coned F2 <a>-cosets d(b, a^3 b):", ballsm.cs.graph.shortest_distance(x, y), "<= 2r+2 =", 4)

t1 = time.time()
ball = coned_word_ball(2, 5, ["a", "b"], r=Fraction(1, 2))
print("f2_rel ball built:", ball.cs.graph.vertex_count(), "vertices,",
      len(ball.lines), "cosets,", round(time.time() - t1, 2), "s")

# antitone counterexample check: x = BABAB, y = aaaaa -> w = babab a^5
w_ce = "babababaaaaa"[:0]  # placeholder
x_ce, y_ce = "BABAB", "aaaaa"
for K in (4, 6, 8):
    print("  ce K=", K, "d^K:", thick_distance(ball.cs, x_ce, y_ce, K))

t1 = time.time()
rep = validate_relative_formula(ball, samples=60, k_grid=(4, 6, 8), seed=0)
print("relative formula:", round(time.time() - t1, 2), "s")
for k in sorted(rep.fits):
    print("  K=", k, "C=", rep.fits[k]["C"], "violations=", rep.fits[k]["violations"],
          "| doubled C=", rep.doubled_fits[k]["C"])
print("threshold_K:", rep.threshold_K)

# 4. quasi-line family in coned F2 window (cone only <b>-cosets so a is loxodromic)
ball_b = coned_word_ball(2, 5, ["b"], r=Fraction(1, 2))
fam = quasi_line_family(ball_b.cs, ["a", "baB"], ball_b.tree)
print("qlf members:", fam.indices())
print("  pi_a(baB axis):", sorted(fam.projection("a", "baB")))
print("  pi_baB(a axis):", sorted(fam.projection("baB", "a")))
print("  theta:", theta_bound(fam))
repax = verify_axioms(fam, xi=1)
print("  axioms verdict at xi=1:", repax.verdict if hasattr(repax, "verdict") else repax)

# NotLoxodromic check
try:
    quasi_line_family(ball.cs, ["a"], ball.tree)
    print("  !! a not flagged")
except Exception as e:
    print("  a ->", type(e).__name__)

# 5. CKA pieces: flip window
doc = {
    "vertex": {"v": {"rank": 2, "words": {"e1": "a"}},
               "w": {"rank": 2, "words": {"e1": "a"}}},
    "edge": {"e1": {"ends": ["v", "w"], "matrix": [[0, 1], [1, 0]],
                     "translation": [0, 0]}},
}
cfg = GraphOfGroupsConfig.from_dict(doc)
win = build_window(cfg, center="v", R_bs=2, R_tree=3, W=8, coset_len=1)
coned = cone_pieces(win, r=1)
print("pieces coned:", len(coned))
root_cs = coned["r"]
print("root coned lines:", sorted(root_cs.lines))

x = PiecePoint("r", "bb", 0)
y = PiecePoint("r", "BB", 0)
print("same piece gtd K=4:", global_thick_distance(win, coned, x, y, 4))
print("  base dist:", 4)

# two class-1 pieces: r and r/e1:1/e1:b etc. list pieces by class
cls1 = [p for p in sorted(win.pieces) if win.pieces[p].cls == 1]
cls2 = [p for p in sorted(win.pieces) if win.pieces[p].cls == 2]
print("cls1:", cls1)
print("cls2:", cls2)
x2 = PiecePoint(cls1[1], "bb", 0)
terms = global_thick_terms(win, coned, x, x2, 4)
print("cross terms:", [(v, xv, yv, str(t)) for v, xv, yv, t in terms])

glued = glue_coned_spaces(win, coned, 1)
print("glued cls1 vertices:", glued.vertex_count())

# inspect which letter each class cones, to pick loxodromic words per class
for pid in ("r", cls2[0]):
    pc = win.pieces[pid]
    lw = sorted({getattr(pc.lines[peid], "word", "?") for peid in pc.lines})
    print("piece", pid, "cls", pc.cls, "line words:", lw)

axes = build_quasi_lines(
    win, coned, {1: ["b", "abA", "Aba"], 2: ["b", "abA", "Aba"]}
)
print("axes count:", len(axes), "sample:", sorted(axes)[:3])

t1 = time.time()
co = validate_coneoff_formula(win, coned, axes, samples=40, K=4, cls=1, seed=0)
print("coneoff: C=", co.C, "violations=", co.violations,
      round(time.time() - t1, 2), "s")
for r_ in co.rows[:5]:
    print("   ", r_.pair, r_.lhs, r_.proj_sum, r_.tree_len)

from qtlab.coned_off import pi3, pi4
p = PiecePoint("r", "ab", 5)
print("pi3:", pi3(win, p), "pi4:", pi4(win, p))

print("total", round(time.time() - t0, 2), "s")
