"""Univariate polynomials over the rationals.

A polynomial is a tuple of mpq coefficients, lowest degree first, with no
trailing zeros; the zero polynomial is the empty tuple.
"""

from math import isqrt

from gmpy2 import mpq

from .rational import Q

ZERO_POLY = ()


def trim(coeffs):
    c = list(coeffs)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def poly(coeffs):
    return trim(Q(c) for c in coeffs)


def degree(p):
    return len(p) - 1  # -1 for the zero polynomial


def evaluate(p, x):
    n = len(p)
    if n <= 2:
        if n == 2:
            return p[0] + p[1] * x
        return mpq(p[0]) if n else mpq(0)
    acc = mpq(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def add(p, q):
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] += c
    return trim(out)


def neg(p):
    return tuple(-c for c in p)


def sub(p, q):
    return add(p, neg(q))


def scale(p, k):
    if k == 0:
        return ZERO_POLY
    return tuple(c * k for c in p)


def mul(p, q, cap=None):
    """Product; with ``cap`` the result is truncated modulo t^(cap+1)."""
    if not p or not q:
        return ZERO_POLY
    n = len(p) + len(q) - 1
    if cap is not None:
        n = min(n, cap + 1)
    out = [mpq(0)] * n
    for i, a in enumerate(p):
        if a == 0 or i >= n:
            continue
        for j, b in enumerate(q):
            if i + j >= n:
                break
            out[i + j] += a * b
    return trim(out)


def power(p, e, cap=None):
    out = (mpq(1),)
    for _ in range(e):
        out = mul(out, p, cap)
    return out


def deriv(p):
    return trim(p[k] * k for k in range(1, len(p)))


def compose(p, q, cap=None):
    """p(q(t)) by Horner, optionally truncated at degree ``cap``."""
    out = ZERO_POLY
    for c in reversed(p):
        out = add(mul(out, q, cap), (c,) if c else ZERO_POLY)
    return out


def shift(p, a):
    """p(t + a)."""
    return compose(p, trim((a, mpq(1))))


def divmod_poly(a, b):
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(a)
    lead = b[-1]
    qlen = max(len(a) - len(b) + 1, 0)
    quot = [mpq(0)] * qlen
    for k in range(qlen - 1, -1, -1):
        c = a[k + len(b) - 1] / lead
        quot[k] = c
        if c:
            for j, bc in enumerate(b):
                a[k + j] -= c * bc
    return trim(quot), trim(a[: len(b) - 1])


def monic(p):
    return tuple(c / p[-1] for c in p) if p else p


def gcd(p, q):
    while q:
        p, q = q, divmod_poly(p, q)[1]
    return monic(p)


def square_free(p):
    """Product of the distinct irreducible factors of p (monic)."""
    if degree(p) <= 0:
        return monic(p)
    g = gcd(p, deriv(p))
    return monic(divmod_poly(p, g)[0])


def sign_at(p, x):
    """Sign of p at a rational x, or at -inf/+inf when x is None with ``side``."""
    v = evaluate(p, x)
    return (v > 0) - (v < 0)


def sign_at_infinity(p, positive):
    if not p:
        return 0
    s = 1 if p[-1] > 0 else -1
    if not positive and degree(p) % 2 == 1:
        s = -s
    return s


def sturm_chain(p):
    chain = [p, deriv(p)]
    while chain[-1]:
        r = divmod_poly(chain[-2], chain[-1])[1]
        if not r:
            break
        chain.append(neg(r))
    return [c for c in chain if c]


def _variations(signs):
    signs = [s for s in signs if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _variations_at(chain, x):
    if x == "-inf":
        return _variations([sign_at_infinity(c, False) for c in chain])
    if x == "+inf":
        return _variations([sign_at_infinity(c, True) for c in chain])
    return _variations([sign_at(c, x) for c in chain])


def count_roots(p, lo=None, hi=None):
    """Number of distinct real roots of p in the half-open interval (lo, hi].

    ``None`` stands for an infinite endpoint.
    """
    if not p:
        raise ValueError("the zero polynomial has infinitely many roots")
    if degree(p) == 0:
        return 0
    chain = sturm_chain(square_free(p))
    a = "-inf" if lo is None else lo
    b = "+inf" if hi is None else hi
    return _variations_at(chain, a) - _variations_at(chain, b)


def _divisors(n):
    n = abs(int(n))
    if n > 10**14:
        raise ValueError("coefficient too large for rational root extraction")
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def rational_roots(p):
    """Sorted list of distinct rational roots of a nonzero polynomial."""
    p = square_free(p)
    roots = set()
    if degree(p) <= 0:
        return []
    if p[0] == 0:
        roots.add(mpq(0))
        k = 0
        while p[k] == 0:
            k += 1
        p = p[k:]
    if degree(p) >= 1:
        den = 1
        for c in p:
            den = den * c.denominator // _gcd_int(den, c.denominator)
        ints = [int(c * den) for c in p]
        for a in _divisors(ints[0]):
            for b in _divisors(ints[-1]):
                for cand in (mpq(a, b), mpq(-a, b)):
                    if evaluate(p, cand) == 0:
                        roots.add(cand)
    return sorted(roots)


def _gcd_int(a, b):
    while b:
        a, b = b, a % b
    return abs(a)


def remove_rational_roots(p):
    """Divide out every rational root (with multiplicity); returns the cofactor."""
    for r in rational_roots(p):
        lin = (-r, mpq(1))
        while True:
            q, rem = divmod_poly(p, lin)
            if rem:
                break
            p = q
    return p


def isolate_real_roots(p, lo=None, hi=None):
    """Disjoint rational intervals (a, b], one per distinct real root in (lo, hi]."""
    sf = square_free(p)
    if degree(sf) <= 0:
        return []
    chain = sturm_chain(sf)
    bound = 1 + max(abs(c / sf[-1]) for c in sf[:-1]) if degree(sf) > 0 else mpq(1)
    a = -bound if lo is None else lo
    b = bound if hi is None else hi
    out = []

    def rec(a, b, n):
        if n == 0:
            return
        if n == 1:
            out.append((a, b))
            return
        m = (a + b) / 2
        va, vm, vb = (_variations_at(chain, x) for x in (a, m, b))
        rec(a, m, va - vm)
        rec(m, b, vm - vb)

    rec(a, b, _variations_at(chain, a) - _variations_at(chain, b))
    return out
