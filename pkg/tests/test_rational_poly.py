from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from adcert import poly as P
from adcert.rational import Q, fmt, parse, parse_list

small = st.fractions(min_value=-20, max_value=20, max_denominator=12).map(Q)
polys = st.lists(st.integers(-6, 6), min_size=0, max_size=6).map(P.poly)


class TestRational:
    def test_parse_forms(self):
        assert parse("3/4") == mpq(3, 4)
        assert parse("−1") == -1
        assert parse("0.25") == mpq(1, 4)
        assert parse_list("-1,0,1/2") == [-1, 0, mpq(1, 2)]

    def test_fmt_always_has_denominator(self):
        assert fmt(0) == "0/1"
        assert fmt(mpq(-6, 4)) == "-3/2"

    def test_zero_denominator(self):
        with pytest.raises(ValueError):
            parse("1/0")

    def test_q_accepts_fraction(self):
        assert Q(Fraction(2, 6)) == mpq(1, 3)

    @given(small)
    def test_roundtrip(self, q):
        assert parse(fmt(q)) == q


class TestPoly:
    def test_trim_and_degree(self):
        assert P.poly([1, 2, 0, 0]) == (1, 2)
        assert P.degree(P.poly([])) == -1

    @given(polys, polys, small)
    def test_mul_evaluates_as_product(self, p, q, x):
        assert P.evaluate(P.mul(p, q), x) == P.evaluate(p, x) * P.evaluate(q, x)

    @given(polys, polys, small)
    def test_compose(self, p, q, x):
        assert P.evaluate(P.compose(p, q), x) == P.evaluate(p, P.evaluate(q, x))

    @given(polys, polys)
    def test_divmod(self, p, q):
        if not q:
            return
        quo, rem = P.divmod_poly(p, q)
        assert P.add(P.mul(quo, q), rem) == p
        assert P.degree(rem) < P.degree(q)

    @settings(max_examples=60)
    @given(st.lists(st.integers(-4, 4), min_size=1, max_size=4, unique=True))
    def test_rational_roots_found(self, roots):
        p = (1,)
        for r in roots:
            p = P.mul(p, P.poly([-r, 1]))
        assert sorted(P.rational_roots(p)) == sorted(roots)

    def test_sturm_counts_irrational_roots(self):
        p = P.poly([-2, 0, 1])  # x^2 - 2
        assert P.count_roots(p, None, None) == 2
        assert P.count_roots(p, 0, 2) == 1
        assert P.rational_roots(p) == []
        ivs = P.isolate_real_roots(p, None, None)
        assert len(ivs) == 2
        for a, b in ivs:
            assert P.count_roots(p, a, b) == 1

    def test_square_free(self):
        p = P.mul(P.poly([-1, 1]), P.mul(P.poly([-1, 1]), P.poly([2, 1])))
        sf = P.square_free(p)
        assert P.degree(sf) == 2
