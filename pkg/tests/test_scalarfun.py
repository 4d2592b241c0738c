import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from adcert import poly as P
from adcert import scalarfun as sf
from adcert.errors import BadParams, Discontinuous, GapOrOverlap, InvalidPolicy
from adcert.scalarfun import AlgebraicRoot, Piece

rationals = st.fractions(min_value=-8, max_value=8, max_denominator=16).map(mpq)


def relu_pieces(owner_left=True):
    return [Piece.make(None, 0, False, owner_left, ()),
            Piece.make(0, None, not owner_left, False, (0, 1))]


class TestMakePiecewise:
    def test_relu_sets(self):
        f = sf.make_piecewise(relu_pieces())
        bp = sf.breakpoints(f)
        assert bp.ndf == {0} and bp.bdz == {0} and bp.ncdf == {0}

    def test_gap_rejected(self):
        with pytest.raises(GapOrOverlap):
            sf.make_piecewise([Piece.make(None, 0, False, False, ()),
                               Piece.make(0, None, False, False, (0, 1))])

    def test_overlap_rejected(self):
        with pytest.raises(GapOrOverlap):
            sf.make_piecewise([Piece.make(None, 0, False, True, ()),
                               Piece.make(0, None, True, False, (0, 1))])

    def test_jump_rejected(self):
        with pytest.raises(Discontinuous):
            sf.make_piecewise([Piece.make(None, 0, False, True, ()),
                               Piece.make(0, None, False, False, (1, 1))])

    def test_override_only_at_kinks(self):
        f = sf.make_piecewise(relu_pieces(), {0: 5})
        assert f.adf(mpq(0)) == 5
        assert not sf.is_consistent(f)
        with pytest.raises(InvalidPolicy):
            sf.make_piecewise(relu_pieces(), {1: 5})

    def test_owner_decides_adf(self):
        left = sf.make_piecewise(relu_pieces(True))
        right = sf.make_piecewise(relu_pieces(False))
        assert left.adf(mpq(0)) == 0 and right.adf(mpq(0)) == 1
        assert sf.is_consistent(left) and sf.is_consistent(right)

    def test_smooth_joint_not_ndf(self):
        f = sf.make_piecewise([Piece.make(None, 0, False, True, (0, 1)),
                               Piece.make(0, None, False, False, (0, 1, 1))])
        assert sf.breakpoints(f).ndf == frozenset()

    def test_singleton_piece(self):
        f = sf.make_piecewise([Piece.make(None, 0, False, False, ()),
                               Piece.make(0, 0, True, True, ()),
                               Piece.make(0, None, False, False, (0, 1))])
        assert f(mpq(0)) == 0
        assert f.boundary_at(mpq(0)).singleton == 1


class TestCatalog:
    def test_hard_sigmoid(self):
        f = sf.catalog("hard_sigmoid")
        bp = sf.breakpoints(f)
        assert bp.ndf == {-3, 3}
        assert bp.bdz == {-3}
        assert f(mpq(0)) == mpq(1, 2)

    def test_sawtooth(self):
        f = sf.catalog("sawtooth_kinks", points=[1, 2], values=[1, 2])
        assert sf.breakpoints(f).ndf == {1, 2}
        assert f(mpq(3, 2)) == mpq(3, 2)

    def test_sawtooth_needs_kinks(self):
        with pytest.raises(BadParams):
            sf.catalog("sawtooth_kinks", points=[0], values=[0], left_slope=1, right_slope=1)

    def test_hermite_single_point(self):
        f = sf.catalog("hermite_zero_slope1", points=[0])
        assert f.pieces[0].coeffs == (0, 1)

    def test_hermite_slope1_extra_zero_rejected(self):
        with pytest.raises(BadParams):
            sf.catalog("hermite_zero_slope1", points=[0, 1])

    def test_hermite_alternating(self):
        f = sf.catalog("hermite_zeros", points=[0, 1])
        assert f.pieces[0].coeffs == (0, 1, -1)
        assert sf.breakpoints(f).bdz == {0, 1}

    def test_irrational_bdz(self):
        f = sf.catalog("polynomial", coeffs=[-2, 0, 1])
        bdz = sf.breakpoints(f).bdz
        assert len(bdz) == 2 and all(isinstance(r, AlgebraicRoot) for r in bdz)
        assert sorted(r.approx() for r in bdz) == pytest.approx([-2 ** 0.5, 2 ** 0.5], abs=1e-3)

    def test_unknown_name(self):
        with pytest.raises(BadParams):
            sf.catalog("tanh")

    def test_roundtrip_dict(self):
        f = sf.catalog("leaky_relu", slope=mpq(1, 3), owner="right")
        assert sf.from_dict(f.to_dict()) == f
        assert sf.from_dict({"catalog": "relu"}) == sf.catalog("relu")


class TestEvaluation:
    @given(rationals)
    def test_relu_values(self, x):
        f = sf.catalog("relu")
        assert sf.eval_fn(f, x) == max(x, 0)

    @given(rationals)
    def test_adf_matches_derivative_off_breakpoints(self, x):
        f = sf.catalog("sawtooth_kinks", points=[-1, 0, 2], values=[1, 0, 3], left_slope=2)
        if x in sf.breakpoints(f).ndf:
            assert sf.adf_eval(f, x) in sf.one_sided_derivatives(f, x)
        else:
            l, r = sf.one_sided_derivatives(f, x)
            assert l == r == sf.adf_eval(f, x)

    @given(rationals)
    def test_continuity(self, x):
        f = sf.catalog("hard_sigmoid")
        eps = mpq(1, 10 ** 6)
        assert abs(f(x + eps) - f(x)) <= eps
