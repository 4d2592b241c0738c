"""Continuous piecewise-polynomial scalar activations with an AD derivative policy.

The policy lives in two places.  Each breakpoint is owned by exactly one
piece (the one whose interval contains it), and the default AD derivative at
a point is the derivative of its owning piece.  On top of that, a
per-breakpoint override constant can replace that value.
"""

from bisect import bisect_left
from dataclasses import dataclass

from gmpy2 import mpq

from . import poly as P
from .errors import BadParams, Discontinuous, GapOrOverlap, InvalidPolicy
from .rational import Q, fmt, parse


@dataclass(frozen=True)
class Piece:
    lo: object  # mpq, or None for -inf
    hi: object  # mpq, or None for +inf
    lo_closed: bool
    hi_closed: bool
    coeffs: tuple

    @staticmethod
    def make(lo, hi, lo_closed, hi_closed, coeffs):
        lo = None if lo is None else Q(lo)
        hi = None if hi is None else Q(hi)
        return Piece(lo, hi, bool(lo_closed) and lo is not None,
                     bool(hi_closed) and hi is not None, P.poly(coeffs))

    @property
    def is_singleton(self):
        return self.lo is not None and self.lo == self.hi

    def is_empty(self):
        if self.lo is None or self.hi is None:
            return False
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def contains(self, x):
        if self.lo is not None and (x < self.lo or (x == self.lo and not self.lo_closed)):
            return False
        if self.hi is not None and (x > self.hi or (x == self.hi and not self.hi_closed)):
            return False
        return True

    def closure_contains(self, x):
        return (self.lo is None or x >= self.lo) and (self.hi is None or x <= self.hi)


@dataclass(frozen=True)
class AlgebraicRoot:
    """An irrational real root: the unique root of ``poly`` in (lo, hi]."""

    poly: tuple
    lo: object
    hi: object

    def approx(self, steps=60):
        """Float estimate by bisection (the polynomial changes sign across a simple root)."""
        p = self.poly
        lo, hi = self.lo, self.hi
        if P.evaluate(p, hi) == 0:
            return float(hi)
        s_hi = P.evaluate(p, hi) > 0
        for _ in range(steps):
            mid = (lo + hi) / 2
            v = P.evaluate(p, mid)
            if v == 0:
                return float(mid)
            if (v > 0) == s_hi:
                hi = mid
            else:
                lo = mid
        return float((lo + hi) / 2)


@dataclass(frozen=True)
class BreakpointSets:
    ndf: frozenset
    bdz: frozenset
    ncdf: frozenset


@dataclass(frozen=True)
class Boundary:
    """Pieces meeting at a breakpoint b (indices into the piece list)."""

    point: object
    left: int
    right: int
    singleton: object  # int or None
    owner: int


class PiecewiseFn:
    """Validated continuous piecewise-polynomial function with an adf policy.

    Build with :func:`make_piecewise` or :func:`catalog`; instances are
    immutable and hashable.
    """

    __slots__ = ("pieces", "overrides", "_bps", "_bounds", "_gap", "_dpolys",
                 "_breaks", "_key", "_adf_at_bp", "_affine", "_coeffs")

    def __init__(self, pieces, overrides):
        self.pieces = tuple(pieces)
        self.overrides = dict(overrides)
        self._dpolys = tuple(P.deriv(p.coeffs) for p in self.pieces)
        bounds = []
        gap = []
        k = 0
        n = len(self.pieces)
        while k < n:
            piece = self.pieces[k]
            if piece.hi is None:
                gap.append(k)
                break
            gap.append(k)
            b = piece.hi
            if k + 1 < n and self.pieces[k + 1].is_singleton:
                s, r = k + 1, k + 2
                owner = s
            else:
                s, r = None, k + 1
                owner = k if piece.hi_closed else r
            bounds.append(Boundary(b, k, r, s, owner))
            k = r
        self._bounds = tuple(bounds)
        self._bps = [bd.point for bd in bounds]
        self._gap = tuple(gap)
        self._breaks = None
        self._key = (self.pieces, tuple(sorted(self.overrides.items())))
        self._adf_at_bp = tuple(
            self.overrides.get(bd.point, P.evaluate(self._dpolys[bd.owner], bd.point))
            for bd in bounds)
        self._affine = len(self.pieces) == 1 and P.degree(self.pieces[0].coeffs) <= 1
        self._coeffs = tuple(p.coeffs for p in self.pieces)

    def __eq__(self, other):
        return isinstance(other, PiecewiseFn) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"PiecewiseFn({len(self.pieces)} pieces, overrides={self.overrides})"

    @property
    def boundaries(self):
        return self._bounds

    @property
    def is_affine(self):
        """A single polynomial piece of degree at most one (no breakpoints)."""
        return self._affine

    def boundary_at(self, x):
        """The Boundary record at x, or None if x is not a breakpoint."""
        k = bisect_left(self._bps, x)
        if k < len(self._bps) and self._bps[k] == x:
            return self._bounds[k]
        return None

    def locate(self, x):
        """Index of the piece whose interval contains x."""
        k = bisect_left(self._bps, x)
        if k < len(self._bps) and self._bps[k] == x:
            return self._bounds[k].owner
        return self._gap[k]

    def closure_candidates(self, x):
        """Indices of every piece whose closure contains x."""
        k = bisect_left(self._bps, x)
        if k < len(self._bps) and self._bps[k] == x:
            bd = self._bounds[k]
            if bd.singleton is None:
                return (bd.left, bd.right)
            return (bd.left, bd.singleton, bd.right)
        return (self._gap[k],)

    def piece_value(self, k, x):
        return P.evaluate(self.pieces[k].coeffs, x)

    def piece_deriv(self, k, x):
        return P.evaluate(self._dpolys[k], x)

    def __call__(self, x):
        return P.evaluate(self._coeffs[self.locate(x)], x)

    def eval_at(self, x):
        """(f(x), Boundary at x or None) with a single search."""
        bps = self._bps
        k = bisect_left(bps, x)
        if k < len(bps) and bps[k] == x:
            bd = self._bounds[k]
            return P.evaluate(self._coeffs[bd.owner], x), bd
        return P.evaluate(self._coeffs[self._gap[k]], x), None

    def adf(self, x):
        k = bisect_left(self._bps, x)
        if k < len(self._bps) and self._bps[k] == x:
            return self._adf_at_bp[k]
        return P.evaluate(self._dpolys[self._gap[k]], x)

    def breakpoints(self):
        if self._breaks is None:
            self._breaks = _compute_breakpoints(self)
        return self._breaks

    def to_dict(self):
        out = {"pieces": [
            {"lo": None if p.lo is None else fmt(p.lo),
             "hi": None if p.hi is None else fmt(p.hi),
             "lo_closed": p.lo_closed, "hi_closed": p.hi_closed,
             "coeffs": [fmt(c) for c in p.coeffs]}
            for p in self.pieces]}
        if self.overrides:
            out["overrides"] = {fmt(k): fmt(v) for k, v in sorted(self.overrides.items())}
        return out


def _jump_derivs(f, bd):
    return f.piece_deriv(bd.left, bd.point), f.piece_deriv(bd.right, bd.point)


def _compute_breakpoints(f):
    ndf = set()
    for bd in f.boundaries:
        dl, dr = _jump_derivs(f, bd)
        if dl != dr:
            ndf.add(bd.point)
    # With polynomial pieces, equal one-sided derivatives at a joint make the
    # derivative continuous there, so the two sets coincide.
    ncdf = set(ndf)
    return BreakpointSets(frozenset(ndf), frozenset(_zero_set_boundary(f)), frozenset(ncdf))


def _zero_set_boundary(f):
    intervals = []  # closed intervals [a, b], a/b may be None
    points = set()
    for piece in f.pieces:
        c = piece.coeffs
        if not c:
            intervals.append((piece.lo, piece.hi))
            continue
        for r in P.rational_roots(c):
            if piece.closure_contains(r):
                points.add(r)
        rest = P.remove_rational_roots(c)
        if P.degree(rest) >= 1:
            for a, b in P.isolate_real_roots(rest, piece.lo, piece.hi):
                points.add(AlgebraicRoot(P.square_free(rest), a, b))
    # merge zero intervals that touch
    def lo_key(iv):
        return (0, 0) if iv[0] is None else (1, iv[0])
    merged = []
    for a, b in sorted(intervals, key=lo_key):
        if merged:
            pa, pb = merged[-1]
            if pb is None or (a is not None and a <= pb):
                merged[-1] = (pa, None if pb is None or b is None else max(pb, b))
                continue
        merged.append((a, b))
    out = set()
    for a, b in merged:
        if a is not None:
            out.add(a)
        if b is not None:
            out.add(b)
    for x in points:
        if isinstance(x, AlgebraicRoot):
            out.add(x)
            continue
        inside = any((a is None or a < x) and (b is None or x < b) for a, b in merged)
        if not inside:
            out.add(x)
    return out


def make_piecewise(pieces, overrides=None):
    """Validate a list of Piece (or 5-tuples) and build a PiecewiseFn.

    ``overrides`` maps breakpoints to AD derivative constants.
    """
    ps = [p if isinstance(p, Piece) else Piece.make(*p) for p in pieces]
    if not ps:
        raise GapOrOverlap("no pieces")
    for p in ps:
        if p.is_empty():
            raise GapOrOverlap(f"empty interval ({p.lo}, {p.hi})")
    if ps[0].lo is not None:
        raise GapOrOverlap("first piece must extend to -inf")
    if ps[-1].hi is not None:
        raise GapOrOverlap("last piece must extend to +inf")
    for a, b in zip(ps, ps[1:]):
        if a.hi is None or b.lo is None or a.hi != b.lo:
            raise GapOrOverlap(f"pieces do not meet: {a.hi} vs {b.lo}")
        if a.hi_closed == b.lo_closed:
            kind = "overlap" if a.hi_closed else "gap"
            raise GapOrOverlap(f"{kind} at {fmt(a.hi)}")
    for a, b in zip(ps, ps[1:]):
        x = a.hi
        if P.evaluate(a.coeffs, x) != P.evaluate(b.coeffs, x):
            raise Discontinuous(f"value jump at {fmt(x)}")
    ov = {Q(k): Q(v) for k, v in (overrides or {}).items()}
    f = PiecewiseFn(ps, ov)
    ndf = f.breakpoints().ndf
    for x in ov:
        if x not in ndf:
            raise InvalidPolicy(f"override at {fmt(x)}, where the function is differentiable")
    for bd in f.boundaries:
        if bd.point not in ndf and bd.point not in ov:
            if f.piece_deriv(bd.owner, bd.point) != f.piece_deriv(bd.left, bd.point):
                raise InvalidPolicy(f"singleton piece at {fmt(bd.point)} has the wrong derivative")
    return f


def eval_fn(f, x):
    return f(Q(x))


def adf_eval(f, x):
    return f.adf(Q(x))


def breakpoints(f):
    return f.breakpoints()


def one_sided_derivatives(f, x):
    """(left, right) derivative limits of f at x."""
    x = Q(x)
    bd = f.boundary_at(x)
    if bd is None:
        d = f.piece_deriv(f.locate(x), x)
        return d, d
    return _jump_derivs(f, bd)


def is_consistent(f):
    """Every ndf point gets an AD value equal to one of the one-sided derivatives."""
    for x in f.breakpoints().ndf:
        if f.adf(x) not in one_sided_derivatives(f, x):
            return False
    return True


def from_dict(d):
    if "catalog" in d:
        return catalog(d["catalog"], **d.get("params", {}))
    pieces = [Piece.make(None if p.get("lo") is None else parse(p["lo"]),
                         None if p.get("hi") is None else parse(p["hi"]),
                         p.get("lo_closed", False), p.get("hi_closed", False),
                         [parse(c) for c in p["coeffs"]])
              for p in d["pieces"]]
    ov = {parse(k): parse(v) for k, v in d.get("overrides", {}).items()}
    return make_piecewise(pieces, ov)


# ---------------------------------------------------------------- catalog

def _two_sided(b, left, right, owner):
    if owner not in ("left", "right"):
        raise BadParams(f"owner must be 'left' or 'right', got {owner!r}")
    lc = owner == "left"
    return [Piece.make(None, b, False, lc, left), Piece.make(b, None, not lc, False, right)]


def _identity():
    return make_piecewise([Piece.make(None, None, False, False, [0, 1])])


def _relu(owner="left", override=None):
    ov = {0: override} if override is not None else None
    return make_piecewise(_two_sided(0, [], [0, 1], owner), ov)


def _leaky_relu(slope, owner="left"):
    slope = Q(slope)
    if slope == 1:
        raise BadParams("slope 1 gives the identity")
    return make_piecewise(_two_sided(0, [0, slope], [0, 1], owner))


def _hard_sigmoid(owner="left"):
    lc = owner == "left"
    return make_piecewise([
        Piece.make(None, -3, False, lc, []),
        Piece.make(-3, 3, not lc, lc, [mpq(1, 2), mpq(1, 6)]),
        Piece.make(3, None, not lc, False, [1]),
    ])


def _polynomial(coeffs):
    return make_piecewise([Piece.make(None, None, False, False, list(coeffs))])


def _line_through(x0, y0, slope):
    return [y0 - slope * x0, slope]


def _sawtooth_kinks(points, values, left_slope=0, right_slope=0, owner="right"):
    xs = [Q(x) for x in points]
    ys = [Q(v) for v in values]
    if len(xs) != len(ys) or not xs:
        raise BadParams("points and values must be non-empty and of equal length")
    if any(a >= b for a, b in zip(xs, xs[1:])):
        raise BadParams("points must be strictly increasing")
    if owner not in ("left", "right"):
        raise BadParams(f"owner must be 'left' or 'right', got {owner!r}")
    slopes = [Q(left_slope)]
    slopes += [(ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]) for k in range(len(xs) - 1)]
    slopes.append(Q(right_slope))
    for k, x in enumerate(xs):
        if slopes[k] == slopes[k + 1]:
            raise BadParams(f"no kink at {fmt(x)}: equal slopes on both sides")
    lc = owner == "left"
    bounds = [None] + xs + [None]
    pieces = []
    for k in range(len(xs) + 1):
        anchor = k - 1 if k > 0 else 0
        line = _line_through(xs[anchor], ys[anchor], slopes[k])
        pieces.append(Piece.make(bounds[k], bounds[k + 1], k > 0 and not lc,
                                 k < len(xs) and lc, line))
    return make_piecewise(pieces)


def hermite_zero_interpolant(points, slopes):
    """Minimal-degree polynomial with h(x_j) = 0 and h'(x_j) = slopes[j]."""
    xs = [Q(x) for x in points]
    ss = [Q(s) for s in slopes]
    if len(set(xs)) != len(xs):
        raise BadParams("duplicate interpolation points")
    if not xs or len(xs) != len(ss):
        raise BadParams("points and slopes must be non-empty and of equal length")
    if any(s == 0 for s in ss):
        raise BadParams("zero slope would not give a sign change")
    base = (mpq(1),)
    for x in xs:
        base = P.mul(base, (-x, mpq(1)))
    dbase = P.deriv(base)
    # h = base * q with q(x_j) = s_j / base'(x_j); q is the Lagrange interpolant
    q = ()
    for j, xj in enumerate(xs):
        target = ss[j] / P.evaluate(dbase, xj)
        basis = (mpq(1),)
        for k, xk in enumerate(xs):
            if k != j:
                basis = P.scale(P.mul(basis, (-xk, mpq(1))), 1 / (xj - xk))
        q = P.add(q, P.scale(basis, target))
    return P.mul(base, q)


def _hermite(points, slopes):
    h = hermite_zero_interpolant(points, slopes)
    if P.count_roots(h) != len(points):
        raise BadParams(
            f"the minimal Hermite interpolant has {P.count_roots(h)} real zeros, "
            f"not the {len(points)} prescribed")
    return _polynomial(h)


def _hermite_zero_slope1(points):
    return _hermite(points, [1] * len(points))


def _hermite_zeros(points, slopes=None):
    if slopes is None:
        slopes = [(-1) ** j for j in range(len(points))]
    return _hermite(points, slopes)


_CATALOG = {
    "identity": _identity,
    "relu": _relu,
    "leaky_relu": _leaky_relu,
    "hard_sigmoid": _hard_sigmoid,
    "polynomial": _polynomial,
    "sawtooth_kinks": _sawtooth_kinks,
    "hermite_zero_slope1": _hermite_zero_slope1,
    "hermite_zeros": _hermite_zeros,
}

CATALOG_NAMES = tuple(_CATALOG)


def catalog(name, **params):
    try:
        build = _CATALOG[name]
    except KeyError:
        raise BadParams(f"unknown activation {name!r}") from None
    try:
        return build(**params)
    except TypeError as exc:
        raise BadParams(f"bad parameters for {name}: {exc}") from None
