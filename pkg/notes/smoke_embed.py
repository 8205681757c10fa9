import sys, time, warnings

sys.path.insert(0, "/root/pkg/src")
sys.path.insert(0, "/root/pkg/tests")

from qtlab.cka.window import PiecePoint, PlanePoint
from qtlab.embedding_report import (
    build_embedding_space,
    embed,
    orbit_site,
    product_distance,
    fit_qi_constants,
    frame_pairs,
    site_pool,
    stability_gap,
)
from test_cka_space import flip_window

t0 = time.time()
with warnings.catch_warnings(record=True) as wlist:
    warnings.simplefilter("always")
    win = flip_window()
    space = build_embedding_space(win, K=4)
print("build", round(time.time() - t0, 2), "warnings:",
      [str(w.message)[:90] for w in wlist], flush=True)

o = PiecePoint("r", "", 0)
print("site of center:", orbit_site(win, o), flush=True)
eo = embed(space, o)
print("embed center:", eo, flush=True)

k = PiecePoint("r", "", 3)
ek = embed(space, k)
print("embed fiber+3:", ek, flush=True)
print("fiber translate: tree/x1/x2 fixed:", eo.tree == ek.tree,
      eo.x1 == ek.x1, eo.x2 == ek.x2, "f moved:", eo.f1 != ek.f1,
      eo.f2 != ek.f2, flush=True)
print("d(o, o+3) =", product_distance(space, eo, ek), flush=True)

# both chart reps of one plane point agree
pp = PlanePoint("r/e1:1", 2, -1, "r")
plane = win.planes["r/e1:1"]
h2, f2 = plane.to_child(2, -1)
qq = PlanePoint("r/e1:1", h2, f2, "r/e1:1")
print("reps agree:", embed(space, pp) == embed(space, qq), flush=True)

# the pair that used to collapse: grandchild-plane points h = -2 vs 2
a = PlanePoint("r/e1:1/e1:B", -2, 0, "r/e1:1")
b = PlanePoint("r/e1:1/e1:B", 2, 0, "r/e1:1")
ea, eb = embed(space, a), embed(space, b)
print("grandchild-plane pair product:", product_distance(space, ea, eb), flush=True)

pool = site_pool(win)
print("pool size:", len(pool), flush=True)
print("frame size:", len(frame_pairs(win, 4)), flush=True)

t0 = time.time()
rep = fit_qi_constants(space, samples=200, seed=20260815)
print("fit time", round(time.time() - t0, 2), flush=True)
print(rep.headline(), flush=True)
print("mu", rep.mu, "spot", rep.spot_checks, "dropped", rep.dropped, flush=True)
print("row0", rep.rows[0], flush=True)
print("row1", rep.rows[1], flush=True)
need = lambda r: max(r.d_window / (r.d_product + 1), r.d_product / (r.d_window + 1))
hi = max(rep.rows, key=need)
print("argmax pair:", hi, flush=True)
ratios = sorted(r.ratio for r in rep.rows)
print("ratio min/max", ratios[0], ratios[-1], flush=True)

t0 = time.time()
win2 = flip_window(R_tree=6, W=16)
space2 = build_embedding_space(win2, K=4)
print("doubled build", round(time.time() - t0, 2), flush=True)
t0 = time.time()
rep2 = fit_qi_constants(space2, samples=120, seed=20260815, spot_checks=4)
print("doubled fit time", round(time.time() - t0, 2), flush=True)
print(rep2.headline(), flush=True)
hi2 = max(rep2.rows, key=need)
print("doubled argmax pair:", hi2, flush=True)
print("stability gap:", stability_gap(rep, rep2), float(stability_gap(rep, rep2)), flush=True)
