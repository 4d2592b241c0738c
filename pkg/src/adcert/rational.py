"""Exact rationals backed by GMP, plus the "p/q" text format used in configs and reports."""

from fractions import Fraction
from numbers import Integral

from gmpy2 import mpq

Rational = type(mpq(0))

ZERO = mpq(0)
ONE = mpq(1)


def Q(x):
    """Coerce ints, "p/q" strings, Fractions, floats (exactly) or mpq values to an mpq."""
    if isinstance(x, Rational):
        return x
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, (Integral, Fraction, float)):
        return mpq(x)
    if hasattr(x, "numerator") and hasattr(x, "denominator"):
        return mpq(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {x!r} to a rational")


def parse(text):
    s = text.strip().replace("−", "-")
    if not s:
        raise ValueError("empty rational literal")
    if "/" in s:
        num, den = s.split("/", 1)
        d = int(den)
        if d == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return mpq(int(num), d)
    if any(c in s for c in ".eE"):
        return mpq(Fraction(s))
    return mpq(int(s))


def fmt(q):
    """Render as "p/q", always with an explicit denominator."""
    q = Q(q)
    return f"{q.numerator}/{q.denominator}"


def parse_list(text):
    return [parse(t) for t in text.split(",") if t.strip()]


def vec(xs):
    return tuple(Q(x) for x in xs)
