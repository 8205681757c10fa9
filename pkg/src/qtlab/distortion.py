"""Cyclic-subgroup distortion measured on exact word balls.

A presentation is a finite inverse-closed set of labeled matrices acting by
exact integer or rational arithmetic, so an element key is the matrix itself
and breadth-first search from the identity produces true word lengths.  A
distortion profile walks the powers of one element through a ball and fits
a growth exponent of n against |g^n| on the largest available decade in
log-log scale: undistorted directions fit 1, quadratic distortion fits 1/2,
exponential distortion pushes the exponent toward 0 as the radius grows.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import log
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import BallCapExceeded, ConfigInvalid, InsufficientRange
from .rationals import as_fraction

Matrix = tuple

DEFAULT_BALL_CAP = 400_000


def _entry(x):
    if isinstance(x, bool):
        raise ConfigInvalid(f"matrix entry {x!r} is not a number")
    if isinstance(x, int):
        return x
    try:
        q = as_fraction(x)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from None
    return q.numerator if q.denominator == 1 else q


def to_matrix(rows) -> Matrix:
    """Normalize nested rows into a hashable square matrix with exact
    entries (ints where possible, fractions otherwise)."""
    m = tuple(tuple(_entry(x) for x in row) for row in rows)
    if not m or any(len(row) != len(m) for row in m):
        raise ConfigInvalid(f"matrix rows {rows!r} are not square")
    return m


def mat_identity(dim: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(dim)) for i in range(dim))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    cols = tuple(zip(*b))
    return tuple(
        tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a
    )


def mat_power(m: Matrix, n: int) -> Matrix:
    if n < 0:
        raise ConfigInvalid(f"profile powers must be nonnegative, got {n}")
    out = mat_identity(len(m))
    base = m
    while n:
        if n & 1:
            out = mat_mul(out, base)
        n >>= 1
        if n:
            base = mat_mul(base, base)
    return out


@dataclass(frozen=True)
class MatrixGroupPresentation:
    """Labeled inverse-closed generating matrices of one lattice."""

    name: str
    labels: tuple
    matrices: tuple

    @property
    def dim(self) -> int:
        return len(self.matrices[0])

    def generator(self, label: str) -> Matrix:
        try:
            return self.matrices[self.labels.index(label)]
        except ValueError:
            raise ConfigInvalid(
                f"{self.name!r} has no generator {label!r}; "
                f"labels are {list(self.labels)}"
            ) from None


def presentation(name: str, gens: Mapping) -> MatrixGroupPresentation:
    """Validate and freeze a generating set.

    Every generator must have its inverse among the generators (which also
    certifies invertibility), and the identity may not appear.
    """
    if not gens:
        raise ConfigInvalid(f"presentation {name!r} has no generators")
    labels = tuple(sorted(gens))
    mats = tuple(to_matrix(gens[lab]) for lab in labels)
    dim = len(mats[0])
    ident = mat_identity(dim)
    for lab, m in zip(labels, mats):
        if len(m) != dim:
            raise ConfigInvalid(f"generator {lab!r} has dimension {len(m)}, not {dim}")
        if m == ident:
            raise ConfigInvalid(f"generator {lab!r} is the identity")
    pool = set(mats)
    for lab, m in zip(labels, mats):
        if not any(mat_mul(m, other) == ident for other in pool):
            raise ConfigInvalid(f"generator {lab!r} has no inverse in the set")
    return MatrixGroupPresentation(name=name, labels=labels, matrices=mats)


def presentation_from_doc(name: str, doc: Mapping) -> MatrixGroupPresentation:
    """Presentation from a config mapping {"generators": {label: rows}}."""
    gens = doc.get("generators")
    if not isinstance(gens, Mapping) or not gens:
        raise ConfigInvalid(f"lattice {name!r} needs a 'generators' table")
    return presentation(name, gens)


@dataclass(frozen=True)
class WordBall:
    """Exact word lengths of every element within one radius."""

    radius: int
    table: Mapping

    @property
    def size(self) -> int:
        return len(self.table)


def word_ball(
    p: MatrixGroupPresentation, radius: int, cap: int = DEFAULT_BALL_CAP
) -> WordBall:
    """Breadth-first word lengths out to `radius`, capped at `cap` elements."""
    if radius < 0:
        raise ConfigInvalid(f"radius must be nonnegative, got {radius}")
    ident = mat_identity(p.dim)
    table = {ident: 0}
    frontier = [ident]
    for d in range(1, radius + 1):
        new = []
        for m in frontier:
            for g in p.matrices:
                prod = mat_mul(m, g)
                if prod not in table:
                    if len(table) >= cap:
                        raise BallCapExceeded(
                            f"{p.name} ball reached {cap} elements at distance {d}"
                        )
                    table[prod] = d
                    new.append(prod)
        frontier = new
    return WordBall(radius=radius, table=table)


def check_subadditive(p: MatrixGroupPresentation, ball: WordBall) -> int:
    """Assert |gh| <= |g| + |h| over every in-budget pair; returns the count.

    Quadratic in ball size, so callers keep the radius small."""
    items = list(ball.table.items())
    checked = 0
    for g, lg in items:
        for h, lh in items:
            if lg + lh > ball.radius:
                continue
            got = ball.table.get(mat_mul(g, h))
            if got is None or got > lg + lh:
                raise AssertionError(
                    f"|gh| = {got} exceeds |g| + |h| = {lg + lh} in {p.name}"
                )
            checked += 1
    return checked


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of log|g^n| against log n on [lo, hi]."""

    exponent: float
    intercept: float
    residual: float
    lo: int
    hi: int
    points: int


@dataclass(frozen=True)
class DistortionProfile:
    element: str
    radius: int
    rows: tuple  # (n, word length) pairs in increasing n
    fit: ExponentFit

    def to_csv(self) -> str:
        out = ["n,length"]
        for n, length in self.rows:
            out.append(f"{n},{length}")
        return "\n".join(out) + "\n"


def _fit_largest_decade(rows: Sequence, element: str) -> ExponentFit:
    usable = [(n, l) for n, l in rows if l > 0]
    if len(usable) < 3:
        raise InsufficientRange(
            f"{element}: {len(usable)} positive-length rows; need at least 3"
        )
    hi = usable[-1][0]
    lo = max(1, -(-hi // 10))
    pts = [(log(n), log(l)) for n, l in usable if lo <= n <= hi]
    if len(pts) < 2:
        raise InsufficientRange(
            f"{element}: decade [{lo}, {hi}] holds {len(pts)} rows; need 2"
        )
    xbar = sum(x for x, _ in pts) / len(pts)
    ybar = sum(y for _, y in pts) / len(pts)
    den = sum((x - xbar) ** 2 for x, _ in pts)
    if den == 0:
        raise InsufficientRange(f"{element}: decade [{lo}, {hi}] has one abscissa")
    slope = sum((x - xbar) * (y - ybar) for x, y in pts) / den
    intercept = ybar - slope * xbar
    rss = sum((y - (slope * x + intercept)) ** 2 for x, y in pts)
    return ExponentFit(
        exponent=slope,
        intercept=intercept,
        residual=(rss / len(pts)) ** 0.5,
        lo=lo,
        hi=hi,
        points=len(pts),
    )


def _resolve_element(p: MatrixGroupPresentation, g) -> tuple:
    if isinstance(g, str):
        return g, p.generator(g)
    if isinstance(g, (list, tuple)) and g and isinstance(g[0], str):
        m = mat_identity(p.dim)
        for lab in g:
            m = mat_mul(m, p.generator(lab))
        return "".join(g), m
    return "element", to_matrix(g)


def distortion_profile(
    p: MatrixGroupPresentation,
    g,
    ball: WordBall,
    ns: Optional[Iterable] = None,
) -> DistortionProfile:
    """Rows (n, |g^n|) for powers of g inside the ball, with the fitted
    growth exponent.

    g is a generator label, a list of labels (their product), or a matrix.
    By default powers are walked consecutively and stop at the first one
    outside the ball; pass `ns` explicitly (e.g. powers of two) to probe
    past gaps, since distorted directions do not fill intervals.  Powers
    outside the ball are skipped, not errors.
    """
    name, gm = _resolve_element(p, g)
    rows = []
    if ns is None:
        cur = gm
        n = 1
        while cur in ball.table:
            rows.append((n, ball.table[cur]))
            cur = mat_mul(cur, gm)
            n += 1
    else:
        for n in sorted({int(n) for n in ns}):
            if n < 1:
                continue
            length = ball.table.get(mat_power(gm, n))
            if length is not None:
                rows.append((n, length))
    return DistortionProfile(
        element=name,
        radius=ball.radius,
        rows=tuple(rows),
        fit=_fit_largest_decade(rows, name),
    )


def heisenberg() -> MatrixGroupPresentation:
    """Integer Heisenberg lattice; the commutator of x and y is central."""
    return presentation(
        "heisenberg",
        {
            "x": [[1, 1, 0], [0, 1, 0], [0, 0, 1]],
            "X": [[1, -1, 0], [0, 1, 0], [0, 0, 1]],
            "y": [[1, 0, 0], [0, 1, 1], [0, 0, 1]],
            "Y": [[1, 0, 0], [0, 1, -1], [0, 0, 1]],
        },
    )


def heisenberg_center() -> Matrix:
    return to_matrix([[1, 0, 1], [0, 1, 0], [0, 0, 1]])


def integer_plane() -> MatrixGroupPresentation:
    """Rank-two free abelian control case as affine translations."""
    return presentation(
        "z2",
        {
            "x": [[1, 0, 1], [0, 1, 0], [0, 0, 1]],
            "X": [[1, 0, -1], [0, 1, 0], [0, 0, 1]],
            "y": [[1, 0, 0], [0, 1, 1], [0, 0, 1]],
            "Y": [[1, 0, 0], [0, 1, -1], [0, 0, 1]],
        },
    )


def baumslag_solitar(n: int) -> MatrixGroupPresentation:
    """BS(1, n) as affine maps: a adds one, t multiplies by n."""
    if n < 2:
        raise ConfigInvalid(f"affine model needs n >= 2, got {n}")
    return presentation(
        f"bs1{n}",
        {
            "a": [[1, 1], [0, 1]],
            "A": [[1, -1], [0, 1]],
            "t": [[n, 0], [0, 1]],
            "T": [[Fraction(1, n), 0], [0, 1]],
        },
    )


def sol_lattice() -> MatrixGroupPresentation:
    """Plane-by-cyclic lattice twisted by [[2, 1], [1, 1]]."""
    return presentation(
        "sol",
        {
            "t": [[2, 1, 0], [1, 1, 0], [0, 0, 1]],
            "T": [[1, -1, 0], [-1, 2, 0], [0, 0, 1]],
            "u": [[1, 0, 1], [0, 1, 0], [0, 0, 1]],
            "U": [[1, 0, -1], [0, 1, 0], [0, 0, 1]],
            "v": [[1, 0, 0], [0, 1, 1], [0, 0, 1]],
            "V": [[1, 0, 0], [0, 1, -1], [0, 0, 1]],
        },
    )
