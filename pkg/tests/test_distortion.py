"""Word-ball BFS and distortion profiles on the bundled lattices, pinned
against the exact values the search produces at desk radii."""

import pytest

from qtlab.distortion import (
    DEFAULT_BALL_CAP,
    MatrixGroupPresentation,
    baumslag_solitar,
    check_subadditive,
    distortion_profile,
    heisenberg,
    heisenberg_center,
    integer_plane,
    mat_identity,
    mat_mul,
    mat_power,
    presentation,
    presentation_from_doc,
    sol_lattice,
    to_matrix,
    word_ball,
)
from qtlab.errors import BallCapExceeded, ConfigInvalid, InsufficientRange


@pytest.fixture(scope="module")
def h3_ball():
    return word_ball(heisenberg(), 12)


@pytest.fixture(scope="module")
def bs_ball():
    return word_ball(baumslag_solitar(2), 12)


class TestPresentations:
    def test_labels_sorted_and_closed(self):
        p = heisenberg()
        assert p.labels == ("X", "Y", "x", "y")
        assert p.dim == 3
        ident = mat_identity(3)
        for m in p.matrices:
            assert any(mat_mul(m, o) == ident for o in p.matrices)

    def test_identity_generator_rejected(self):
        with pytest.raises(ConfigInvalid):
            presentation("bad", {"e": [[1, 0], [0, 1]], "x": [[1, 1], [0, 1]]})

    def test_missing_inverse_rejected(self):
        with pytest.raises(ConfigInvalid):
            presentation("bad", {"x": [[1, 1], [0, 1]]})

    def test_non_square_rejected(self):
        with pytest.raises(ConfigInvalid):
            to_matrix([[1, 0, 0], [0, 1, 0]])

    def test_inexact_entry_rejected(self):
        with pytest.raises(ConfigInvalid):
            to_matrix([[0.5, 0], [0, 1]])
        with pytest.raises(ConfigInvalid):
            to_matrix([[True, 0], [0, 1]])

    def test_fraction_strings_accepted(self):
        m = to_matrix([["1/2", 0], [0, 1]])
        assert m == baumslag_solitar(2).generator("T")

    def test_unknown_label(self):
        with pytest.raises(ConfigInvalid):
            heisenberg().generator("q")

    def test_from_doc(self):
        doc = {
            "generators": {
                "a": [[1, 1], [0, 1]],
                "A": [[1, -1], [0, 1]],
                "t": [[2, 0], [0, 1]],
                "T": [["1/2", 0], [0, 1]],
            }
        }
        p = presentation_from_doc("bs12", doc)
        assert p.matrices == baumslag_solitar(2).matrices
        with pytest.raises(ConfigInvalid):
            presentation_from_doc("empty", {})

    def test_bs_needs_scale_two(self):
        with pytest.raises(ConfigInvalid):
            baumslag_solitar(1)


class TestWordBall:
    def test_radius_zero(self):
        ball = word_ball(heisenberg(), 0)
        assert ball.table == {mat_identity(3): 0}

    def test_negative_radius(self):
        with pytest.raises(ConfigInvalid):
            word_ball(heisenberg(), -1)

    def test_heisenberg_sizes(self, h3_ball):
        assert h3_ball.size == 8871
        assert word_ball(heisenberg(), 4).size == 135

    def test_commutator_length(self, h3_ball):
        # xyXY reaches the central element in four letters and no fewer
        assert h3_ball.table[heisenberg_center()] == 4

    def test_closed_under_generators(self):
        p = heisenberg()
        ball = word_ball(p, 4)
        for m, length in ball.table.items():
            if length == ball.radius:
                continue
            for g in p.matrices:
                assert ball.table[mat_mul(m, g)] <= length + 1

    def test_subadditive_exhaustive(self):
        p = heisenberg()
        assert check_subadditive(p, word_ball(p, 4)) == 813

    def test_plane_ball_is_l1(self):
        ball = word_ball(integer_plane(), 5)
        assert ball.size == 61
        for m, length in ball.table.items():
            assert length == abs(m[0][2]) + abs(m[1][2])

    def test_cap(self):
        with pytest.raises(BallCapExceeded):
            word_ball(sol_lattice(), 12, cap=1000)
        assert DEFAULT_BALL_CAP >= 300_000


class TestProfiles:
    def test_plane_exponent_exact(self):
        ball = word_ball(integer_plane(), 10)
        prof = distortion_profile(integer_plane(), "x", ball)
        assert prof.rows == tuple((n, n) for n in range(1, 11))
        assert prof.fit.exponent == 1.0
        assert prof.fit.intercept == 0.0
        assert prof.fit.residual == 0.0
        assert (prof.fit.lo, prof.fit.hi, prof.fit.points) == (1, 10, 10)

    def test_explicit_powers_match_default_when_undistorted(self):
        ball = word_ball(integer_plane(), 10)
        a = distortion_profile(integer_plane(), "x", ball)
        b = distortion_profile(integer_plane(), "x", ball, ns=range(1, 50))
        assert a.rows == b.rows

    def test_heisenberg_center_quadratic(self, h3_ball):
        prof = distortion_profile(heisenberg(), ["x", "y", "X", "Y"], h3_ball)
        assert prof.element == "xyXY"
        assert prof.rows == (
            (1, 4), (2, 6), (3, 8), (4, 8), (5, 10), (6, 10),
            (7, 12), (8, 12), (9, 12),
        )
        assert 0.4 <= prof.fit.exponent <= 0.6
        assert prof.fit.exponent == pytest.approx(0.5104743589101476, rel=1e-9)

    def test_center_as_matrix(self, h3_ball):
        prof = distortion_profile(heisenberg(), heisenberg_center(), h3_ball)
        assert prof.element == "element"
        assert prof.rows[0] == (1, 4)

    def test_bs_powers_of_two(self, bs_ball):
        assert bs_ball.size == 13513
        prof = distortion_profile(
            baumslag_solitar(2), "a", bs_ball, ns=[2 ** k for k in range(13)]
        )
        assert prof.rows == ((1, 1), (2, 2), (4, 4), (8, 6), (16, 8), (32, 10), (64, 12))
        for n, length in prof.rows:
            k = n.bit_length() - 1
            assert length <= 3 * k + 3
        assert prof.fit.exponent == pytest.approx(0.33219280948873636, rel=1e-9)

    def test_bs_consecutive_walk_hits_no_gap_until_43(self, bs_ball):
        prof = distortion_profile(baumslag_solitar(2), "a", bs_ball)
        assert prof.rows[-1] == (42, 12)
        assert len(prof.rows) == 42

    def test_sol_compression_signature(self):
        # the threshold radius for a small fitted exponent is out of desk
        # range; what is checkable is that compression has started and the
        # exponent strictly drops as the radius grows
        sol = sol_lattice()
        b12 = word_ball(sol, 12)
        assert b12.size == 142241
        p12 = distortion_profile(sol, "v", b12, ns=range(1, 200))
        assert p12.rows[-2:] == ((13, 11), (14, 12))
        assert p12.fit.exponent == pytest.approx(0.9505328711376992, rel=1e-9)
        assert p12.fit.exponent < 1
        b13 = word_ball(sol, 13)
        p13 = distortion_profile(sol, "v", b13, ns=range(1, 200))
        assert p13.fit.exponent == pytest.approx(0.8803933157685289, rel=1e-9)
        assert p13.fit.exponent < p12.fit.exponent

    def test_insufficient_range(self):
        ball = word_ball(integer_plane(), 2)
        with pytest.raises(InsufficientRange):
            distortion_profile(integer_plane(), "x", ball)

    def test_negative_power_rejected(self):
        with pytest.raises(ConfigInvalid):
            mat_power(mat_identity(2), -1)

    def test_csv(self, h3_ball):
        prof = distortion_profile(heisenberg(), ["x", "y", "X", "Y"], h3_ball)
        lines = prof.to_csv().splitlines()
        assert lines[0] == "n,length"
        assert lines[1] == "1,4"
        assert len(lines) == 10
