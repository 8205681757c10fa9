"""Product embedding of the window orbit and the constants it earns.

The equivariant map is defined on plane points: every sampled point carries
the plane it sits on, its class-1 side is the home piece and the class-2
side the companion, so both chart representations embed identically.  The
five coordinates are the home vertex, one vertex in each per-class carrier
of bridged fiber lines, and one base point or apex in each per-class run of
coned pieces; coordinate distances add l1.  The fit reports the least
lambda = c making both embedding inequalities hold over a deterministic
witness frame plus random bulk pairs, with the window metric read off
special paths and spot-checked against the exhaustive oracle.
"""

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from .coned_off import cone_pieces, global_thick_terms, pi3, pi4
from .errors import (
    ConfigInvalid,
    InsufficientSample,
    LipschitzViolation,
    WindowExceeded,
)
from .fiber_lines import FiberFamily, build_fiber_family, pi1, pi2
from .quasi_tree import build_quasi_tree
from .rationals import as_fraction, rat_str
from .cka.oracle import window_oracle
from .cka.paths import special_path
from .cka.window import CKAWindow, PiecePoint, PlanePoint


@dataclass
class EmbeddingSpace:
    """The five coordinate targets for one window, built once and reused."""

    win: CKAWindow
    fibers: FiberFamily
    trees: dict  # class -> bridged carrier of that class's fiber lines
    coned: Mapping  # piece id -> coned base tree
    K: Fraction
    r: Fraction
    _maps: dict = field(default_factory=dict, repr=False)
    _thick: dict = field(default_factory=dict, repr=False)

    def carrier_distance(self, cls: int, u, v) -> Fraction:
        if u == v:
            return Fraction(0)
        key = (cls, u)
        dmap = self._maps.get(key)
        if dmap is None:
            dmap = self.trees[cls].carrier.shortest_from(u)
            self._maps[key] = dmap
        return dmap[v]

    def thick_sum(self, cls: int, x, y) -> Fraction:
        key = (cls, str(x), str(y))
        hit = self._thick.get(key)
        if hit is None:
            rows = global_thick_terms(self.win, self.coned, x, y, self.K, cls=cls)
            hit = sum((t for _, _, _, t in rows), Fraction(0))
            self._thick[key] = hit
            self._thick[(cls, str(y), str(x))] = hit
        return hit


def build_embedding_space(win: CKAWindow, K, r=1, check: bool = True) -> EmbeddingSpace:
    K = as_fraction(K)
    if K <= 0:
        raise ConfigInvalid(f"carrier cutoff must be positive, got {rat_str(K)}")
    fam = build_fiber_family(win)
    return EmbeddingSpace(
        win=win,
        fibers=fam,
        trees={
            1: build_quasi_tree(fam.class1, K, check=check),
            2: build_quasi_tree(fam.class2, K, check=check),
        },
        coned=cone_pieces(win, r=r),
        K=K,
        r=as_fraction(r),
    )


@dataclass(frozen=True)
class OrbitSite:
    """A plane point resolved into both charts, with its class sides."""

    peid: str
    v: str  # class-1 side
    w: str  # class-2 side
    h_v: int
    f_v: int
    h_w: int
    f_w: int


def orbit_site(win: CKAWindow, x: Union[PiecePoint, PlanePoint]) -> OrbitSite:
    """Resolve a plane-incident point to its plane chart data.

    A PlanePoint names its plane; a PiecePoint must have its base on some
    boundary line (least plane id wins when lines intersect).  Interior
    points raise ConfigInvalid: the equivariant map lives on plane points
    and is extended to the rest of the space only coarsely.
    """
    if isinstance(x, PlanePoint):
        plane = win.plane(x.plane)
        frame, h, f = x.frame, x.h, x.fiber
        if frame not in (plane.parent, plane.child):
            raise ConfigInvalid(f"frame {frame!r} is not a side of {plane.peid!r}")
    else:
        win.require_point(x)
        piece = win.piece(x.piece)
        peid = None
        for cand in sorted(piece.lines):
            if piece.lines[cand].contains(x.base):
                peid = cand
                break
        if peid is None:
            raise ConfigInvalid(
                f"{x} is not on any boundary plane; the equivariant map "
                "is defined on plane points only"
            )
        plane = win.plane(peid)
        frame, h, f = x.piece, piece.lines[peid].param_of(x.base), x.fiber
    other = plane.other_side(frame)
    h2, f2 = plane.convert(frame, h, f)
    if win.piece(frame).cls == 1:
        return OrbitSite(plane.peid, frame, other, h, f, h2, f2)
    return OrbitSite(plane.peid, other, frame, h2, f2, h, f)


def site_rep(win: CKAWindow, site: OrbitSite) -> PiecePoint:
    """The class-1-side PiecePoint carrying the site."""
    base = win.line(site.v, site.peid).point(site.h_v)
    return win.require_point(PiecePoint(site.v, base, site.f_v))


@dataclass(frozen=True)
class EmbeddingCoordinates:
    tree: str
    f1: tuple  # (piece id, carrier vertex) in the class-1 fiber carrier
    f2: tuple
    x1: object  # PiecePoint or ConePoint in a class-1 piece
    x2: object


def embed(space: EmbeddingSpace, x: Union[PiecePoint, PlanePoint]) -> EmbeddingCoordinates:
    """Coordinates of one orbit point.

    The home piece is the class-1 side of the point's plane and the
    companion its class-2 side, so both chart representations agree.  Sites
    whose chart or pushed image leaves a carrier raise WindowExceeded, so
    callers sample clear of the shell.
    """
    win = space.win
    site = orbit_site(win, x)
    rep = site_rep(win, site)
    return EmbeddingCoordinates(
        tree=site.v,
        f1=(site.v, pi1(win, space.fibers, rep)),
        f2=(site.w, pi2(win, space.fibers, rep, site.w)),
        x1=pi3(win, rep),
        x2=pi4(win, rep, site.w),
    )


def product_distance(
    space: EmbeddingSpace, a: EmbeddingCoordinates, b: EmbeddingCoordinates
) -> Fraction:
    """l1 sum of the five coordinate distances."""
    t = Fraction(len(space.win.bs_geodesic(a.tree, b.tree)) - 1)
    f1 = space.carrier_distance(1, a.f1, b.f1)
    f2 = space.carrier_distance(2, a.f2, b.f2)
    x1 = space.thick_sum(1, a.x1, b.x1)
    x2 = space.thick_sum(2, a.x2, b.x2)
    return t + f1 + f2 + x1 + x2


def _site_label(s: OrbitSite) -> str:
    return f"{s.peid}@{s.h_v},{s.f_v}"


@dataclass(frozen=True)
class QIRow:
    pair: str
    d_window: Fraction
    d_product: Fraction

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.d_product, self.d_window + 1)


@dataclass(frozen=True)
class QIFitReport:
    """Fitted embedding constants on one window.

    lam is the least value with d_window <= lam*d_product + lam and
    d_product <= lam*d_window + lam across the retained rows (the additive
    constant is tied to the multiplicative one); mu bounds the special-path
    length against the exhaustive oracle on the spot-checked subsample.
    """

    lam: Fraction
    c: Fraction
    violations: int
    rows: list
    mu: Fraction
    spot_checks: int
    dropped: int
    R_bs: int
    R_tree: int
    W: int
    K: Fraction
    r: Fraction
    seed: int

    def headline(self) -> str:
        window = (
            f"R_bs:{self.R_bs}|R_tree:{self.R_tree}|W:{self.W}"
            f"|K:{rat_str(self.K)}|r:{rat_str(self.r)}|seed:{self.seed}"
        )
        return (
            f"QI(lambda={rat_str(self.lam)}, c={rat_str(self.c)}, "
            f"violations={self.violations}, pairs={len(self.rows)}, "
            f"window={window})"
        )

    def to_csv(self) -> str:
        out = ["pair,d_window,d_product,ratio"]
        for row in self.rows:
            out.append(
                f"{row.pair},{rat_str(row.d_window)},"
                f"{rat_str(row.d_product)},{rat_str(row.ratio)}"
            )
        return "\n".join(out) + "\n"

    def to_json(self) -> str:
        doc = {
            "lambda": rat_str(self.lam),
            "c": rat_str(self.c),
            "violations": self.violations,
            "pairs": len(self.rows),
            "mu": rat_str(self.mu),
            "spot_checks": self.spot_checks,
            "dropped": self.dropped,
            "window": {
                "R_bs": self.R_bs,
                "R_tree": self.R_tree,
                "W": self.W,
                "K": rat_str(self.K),
                "r": rat_str(self.r),
                "seed": self.seed,
            },
            "rows": [
                {
                    "pair": row.pair,
                    "d_window": rat_str(row.d_window),
                    "d_product": rat_str(row.d_product),
                    "ratio": rat_str(row.ratio),
                }
                for row in self.rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def site_pool(win: CKAWindow) -> list:
    """In-window plane points with one base step and two fiber steps of
    shell slack on both charts, deduplicated by glued location."""
    out = []
    seen = set()
    fmax = win.W - 2
    for peid in sorted(win.planes):
        plane = win.planes[peid]
        pline = win.line(plane.parent, peid)
        lo, hi = pline.param_range_in_window()
        clo, chi = win.line(plane.child, peid).param_range_in_window()
        for h in range(lo + 1, hi):
            for f in range(-fmax, fmax + 1):
                h2, f2 = plane.to_child(h, f)
                if not (clo < h2 < chi and abs(f2) <= fmax):
                    continue
                pt = PlanePoint(peid, h, f, plane.parent)
                site = orbit_site(win, pt)
                key = (site.v, site.h_v, site.f_v)
                if key in seen:
                    continue
                seen.add(key)
                out.append(pt)
    if not out:
        raise InsufficientSample(
            f"window R_tree={win.R_tree}, W={win.W} has no interior plane points"
        )
    return out


def frame_pairs(win: CKAWindow, K) -> list:
    """Deterministic witness pairs, swept the same way at every window size.

    Random pairs rarely pin the extremal families, so each plane gets
    explicit rays and antipodes in both chart directions out to twice the
    cutoff, mixed corners, and a crossing pair to the least plane.  Pairs
    whose sites fall outside the interior pool are skipped.
    """
    kd = max(1, int(K))
    pool = site_pool(win)
    allowed = {(p.plane, p.h, p.fiber) for p in pool}
    by_plane = {}
    for p in pool:
        by_plane.setdefault(p.plane, []).append(p)
    out = []
    seen = set()

    def push(a, b):
        if a == b or (a, b) in seen or (b, a) in seen:
            return
        seen.add((a, b))
        out.append((a, b))

    def at(peid, h, f):
        if (peid, h, f) in allowed:
            return PlanePoint(peid, h, f, win.plane(peid).parent)
        return None

    centers = {}
    for peid, sites in sorted(by_plane.items()):
        c = min(sites, key=lambda s: (abs(s.h) + abs(s.fiber), s.h, s.fiber))
        centers[peid] = c
        for d in range(1, 2 * kd + 1):
            for p in (
                at(peid, c.h + d, c.fiber),
                at(peid, c.h - d, c.fiber),
                at(peid, c.h, c.fiber + d),
                at(peid, c.h, c.fiber - d),
            ):
                if p is not None:
                    push(c, p)
            mh = (at(peid, c.h - d, c.fiber), at(peid, c.h + d, c.fiber))
            if None not in mh:
                push(*mh)
            mf = (at(peid, c.h, c.fiber - d), at(peid, c.h, c.fiber + d))
            if None not in mf:
                push(*mf)
        for d in (1, kd):
            for sh in (1, -1):
                for sf in (1, -1):
                    p = at(peid, c.h + sh * d, c.fiber + sf * d)
                    if p is not None:
                        push(c, p)
    base = min(centers)
    for peid, c in sorted(centers.items()):
        if peid != base:
            push(centers[base], c)
    return out


def fit_qi_constants(
    space: EmbeddingSpace,
    samples: int = 200,
    seed: int = 0,
    spot_checks: int = 12,
    pairs: Optional[list] = None,
    frame: bool = True,
) -> QIFitReport:
    """Fit the embedding constants on the witness frame plus `samples` random
    interior pairs.

    Pairs the embedding or the special path cannot carry are dropped, as are
    pairs whose spot check flags possible shell interference; at least 50
    usable pairs must remain.  A positive product distance between identical
    orbit representatives is a hard LipschitzViolation (the embedding would
    not even be well defined).
    """
    win = space.win
    rng = random.Random(seed)
    if pairs is None:
        pairs = frame_pairs(win, space.K) if frame else []
        pool = site_pool(win)
        kept = 0
        attempts = 0
        while kept < samples and attempts < 40 * samples:
            attempts += 1
            x, y = rng.choice(pool), rng.choice(pool)
            if x == y:
                continue
            pairs.append((x, y))
            kept += 1

    rows = []
    fitted = []
    dropped = 0
    spot = []
    mu = Fraction(0)
    for x, y in pairs:
        try:
            rx = site_rep(win, orbit_site(win, x))
            ry = site_rep(win, orbit_site(win, y))
            d_win = special_path(win, rx, ry).total
            d_prod = product_distance(space, embed(space, x), embed(space, y))
        except WindowExceeded:
            dropped += 1
            continue
        if rx == ry and d_prod > 0:
            raise LipschitzViolation(
                f"identical orbit representatives separate in the product: "
                f"{x} -- {y}"
            )
        if len(spot) < spot_checks:
            spot.append((rx, ry, d_win, len(rows)))
        rows.append(
            QIRow(
                _site_label(orbit_site(win, x))
                + " -- "
                + _site_label(orbit_site(win, y)),
                d_win,
                d_prod,
            )
        )
        fitted.append((d_win, d_prod))

    oracle = window_oracle(win)
    suspect_rows = set()
    for rx, ry, d_win, row_idx in spot:
        exact, suspect = oracle.distance_with_flag(rx, ry)
        if suspect:
            suspect_rows.add(row_idx)
            continue
        if d_win < exact:
            raise AssertionError(
                f"special path length {rat_str(d_win)} undercuts the "
                f"oracle distance {rat_str(exact)} for {rx} -- {ry}"
            )
        if exact > 0:
            ratio = Fraction(d_win, exact)
            if ratio > mu:
                mu = ratio
    if suspect_rows:
        dropped += len(suspect_rows)
        rows = [r for i, r in enumerate(rows) if i not in suspect_rows]
        fitted = [f for i, f in enumerate(fitted) if i not in suspect_rows]
    if len(rows) < 50:
        raise InsufficientSample(
            f"{len(rows)} usable pairs after {dropped} drops; need at least 50"
        )

    lam = Fraction(0)
    for d_win, d_prod in fitted:
        need = max(Fraction(d_win, d_prod + 1), Fraction(d_prod, d_win + 1))
        if need > lam:
            lam = need
    violations = 0
    for d_win, d_prod in fitted:
        # the Lipschitz direction may never fail at the fitted constant,
        # whatever fitting convention produced it
        if d_prod > lam * d_win + lam:
            raise LipschitzViolation(
                f"product gap {rat_str(d_prod)} above the fitted envelope "
                f"{rat_str(lam)}*{rat_str(d_win)} + {rat_str(lam)}"
            )
        if d_win > lam * d_prod + lam:
            violations += 1
    return QIFitReport(
        lam=lam,
        c=lam,
        violations=violations,
        rows=rows,
        mu=mu,
        spot_checks=len(spot) - len(suspect_rows),
        dropped=dropped,
        R_bs=win.R_bs,
        R_tree=win.R_tree,
        W=win.W,
        K=space.K,
        r=space.r,
        seed=seed,
    )


def stability_gap(a: QIFitReport, b: QIFitReport) -> Fraction:
    """Relative movement of the fitted multiplicative constant."""
    if a.lam == 0:
        raise ConfigInvalid("cannot normalize a zero fit")
    return abs(b.lam - a.lam) / a.lam
