"""Reference networks with known answers: the introductory counterexamples and the
lower-bound constructions for the non-differentiable and incorrect sets.

Parameters are numbered w_1..w_W in the order the layers consume them.
"""

from dataclasses import dataclass, field

from gmpy2 import mpq

from . import network as nw
from . import scalarfun as sf
from .errors import BadParams, PreconditionViolated
from .rational import Q, fmt


def equispaced(lo, hi, count):
    """``count`` evenly spaced rationals from lo to hi inclusive."""
    lo, hi = Q(lo), Q(hi)
    if count < 1:
        raise BadParams("count must be positive")
    if count == 1:
        return (lo,)
    step = (hi - lo) / (count - 1)
    return tuple(lo + k * step for k in range(count))


def standard_grid(size):
    """The grid {k / (size/2) : k = -size/2 .. size/2 - 1}: symmetric-ish, contains 0."""
    if size < 2 or size % 2:
        raise BadParams("standard grids need an even size >= 2")
    half = size // 2
    return tuple(mpq(k, half) for k in range(-half, half))


def parse_grid(spec):
    """Grid from a tuple/list of rationals, "16eq", or "equispaced:lo:hi:count"."""
    if isinstance(spec, str):
        s = spec.strip()
        if s.endswith("eq") and s[:-2].isdigit():
            return standard_grid(int(s[:-2]))
        if s.startswith("equispaced:"):
            _, lo, hi, count = s.split(":")
            return equispaced(lo, hi, int(count))
        from .rational import parse_list

        return tuple(sorted(set(parse_list(s))))
    return tuple(sorted(set(Q(x) for x in spec)))


@dataclass(frozen=True)
class AnswerSheet:
    """What the construction is known to compute, for tests and reports."""

    name: str
    description: str
    params: dict = field(default_factory=dict)
    frozen: dict = field(default_factory=dict)  # 0-based param index -> value
    grid: tuple = ()
    lower_bound: tuple = ()  # (tallied set "nd" or "inc", factor, sum kind)
    facts: dict = field(default_factory=dict)

    def to_dict(self):
        def enc(v):
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            if isinstance(v, dict):
                return {str(k): enc(x) for k, x in v.items()}
            if isinstance(v, (bool, int, str)) or v is None:
                return v
            return fmt(v)

        return {"name": self.name, "description": self.description,
                "params": enc(self.params), "frozen": enc(self.frozen),
                "grid": enc(self.grid), "lower_bound": enc(self.lower_bound),
                "facts": enc(self.facts)}


def _relu(owner="left"):
    return sf.catalog("relu", owner=owner)


def _ident():
    return sf.catalog("identity")


def _selectors(n, signs=None):
    """WSB layer on the datum 1 whose neuron i reads s_i * w_i."""
    signs = signs or [1] * n
    mats = []
    for i, s in enumerate(signs):
        row = [0] * n
        row[i % n] = s
        mats.append([row])
    return mats


# ------------------------------------------------------------ intro programs

def intro_identity():
    l1 = nw.wsb_layer(1, 1, [[[1]], [[-1]]], [0, 0], [_relu(), _relu()])
    l2 = nw.polynomial_layer(2, 0, [[(1, (0,), ()), (-1, (1,), ())]], [_ident()])
    net = nw.Network((l1, l2), (1,))
    return net, AnswerSheet(
        "intro_identity", "ReLU(w) - ReLU(-w), the identity written with two ReLUs",
        facts={"function": "identity", "ad_at_0": mpq(0), "gradient": mpq(1)})


def intro_half():
    l1 = nw.wsb_layer(1, 1, [[[1]], [[-1]]], [0, 0], [_relu(), _relu()])
    l2 = nw.polynomial_layer(2, 0, [[(1, (0,), ()), (mpq(-1, 2), (1,), ())]], [_ident()])
    net = nw.Network((l1, l2), (1,))
    return net, AnswerSheet(
        "intro_half", "ReLU(w) - ReLU(-w)/2",
        facts={"ad_at_0": mpq(0), "limit_gradients_at_0": (mpq(1, 2), mpq(1))})


def intro_grid_adversary(M=(-1, 0, 1), lam=7):
    """Affine function of slope 1 on which AD returns ``lam`` at every grid point.

    z(x) = sum_{c in M} [a x + b (ReLU(x - c) - ReLU(c - x))] with
    a = lam - (|M|-1)/|M| and b = 1/|M| - a.  At x = c the two ReLUs of c
    contribute 0 to AD while every other pair contributes b.
    """
    grid = parse_grid(M)
    lam = Q(lam)
    m = len(grid)
    a = lam - mpq(m - 1, m)
    b = mpq(1, m) - a
    mats, consts, acts = [], [], []
    for c in grid:
        mats += [[[1]], [[-1]]]
        consts += [-c, c]
        acts += [_relu(), _relu()]
    mats.append([[1]])
    consts.append(0)
    acts.append(_ident())
    l1 = nw.wsb_layer(1, 1, mats, consts, acts)
    terms = []
    for k in range(m):
        terms += [(b, (2 * k,), ()), (-b, (2 * k + 1,), ())]
    terms.append((m * a, (2 * m,), ()))
    l2 = nw.polynomial_layer(2 * m + 1, 0, [terms], [_ident()])
    net = nw.Network((l1, l2), (1,))
    offset = -b * sum(grid)
    return net, AnswerSheet(
        "intro_grid_adversary", "affine x + offset whose AD is lam on the whole grid",
        params={"M": grid, "lam": lam}, grid=grid,
        facts={"offset": offset, "slope": mpq(1), "ad_on_grid": lam})


# ------------------------------------------------------- lower-bound families

def _check_family(grid, n, alpha, n_min):
    if n < n_min:
        raise PreconditionViolated(f"n must be >= {n_min}")
    if alpha < 1:
        raise PreconditionViolated("alpha must be >= 1")
    if alpha * (n - 1) > len(grid):
        raise PreconditionViolated("alpha must be <= |M|/(n-1)")


def _first_points(grid, alpha, points):
    if points is not None:
        pts = tuple(sorted(Q(x) for x in points))
        if len(pts) != alpha or len(set(pts)) != alpha:
            raise PreconditionViolated("need alpha distinct points")
        if not set(pts) <= set(grid):
            raise PreconditionViolated("points must lie in M")
        return pts
    return tuple(grid[:alpha])


def kinked_positive(points):
    """Piecewise-linear h > 0 with kinks exactly at ``points``: values 1, 2, 1, ...

    It is constant outside [x_1, x_alpha], except for a single point, where
    slope 1 on the right creates the kink.
    """
    vals = [1 + (j % 2) for j in range(len(points))]
    right = 1 if len(points) == 1 else 0
    return sf.catalog("sawtooth_kinks", points=list(points), values=vals, right_slope=right)


def even_kinked(pos_points, with_zero):
    """Even piecewise-linear h > 0; kinks at +-pos_points and, if asked, at 0.

    AD uses the right slope at every kink.
    """
    pos = sorted(pos_points)
    if with_zero:
        vals = {mpq(0): mpq(2)}
        vals.update({x: mpq(1 + (j % 2)) for j, x in enumerate(pos)})
    else:
        vals = {x: mpq(1 + (j % 2)) for j, x in enumerate(pos)}
    xs = sorted(set(vals) | {-x for x in vals})
    ys = [vals[abs(x)] for x in xs]
    tail = 1 if (len(pos) == 1 and not with_zero) or (not pos and with_zero) else 0
    return sf.catalog("sawtooth_kinks", points=xs, values=ys,
                      left_slope=-tail, right_slope=tail, owner="right")


def _sum_layer(n_in, coefs, act=None):
    terms = [(c, (j,), ()) for j, c in enumerate(coefs) if c != 0]
    return nw.affine_bias_layer(n_in, 0, [terms], [act or _ident()])


def thm3_bias_lb(M="16eq", n=3, alpha=2, points=None):
    grid = parse_grid(M)
    _check_family(grid, n, alpha, 2)
    pts = _first_points(grid, alpha, points)
    h = kinked_positive(pts)
    l1 = nw.affine_bias_layer(1, 0, [[(1, (0,), ())] for _ in range(n)], [h] * n)
    l2 = _sum_layer(n, [1] * n)
    net = nw.Network((l1, l2), (0,))
    m = len(grid)
    exact = 1 - (1 - mpq(alpha, m)) ** n
    return net, AnswerSheet(
        "thm3_bias_lb", "w_{n+1} + sum_i h(w_i) with bias layers; h has alpha kinks on M",
        params={"M": grid, "n": n, "alpha": alpha, "points": pts}, grid=grid,
        lower_bound=("nd", mpq(1, 2), "bias_ndf"),
        facts={"nd_density": exact})


def thm7_ndf_lb_kinks(M="16eq", n=4, alpha=1, points=None):
    grid = parse_grid(M)
    _check_family(grid, n, alpha, 4)
    pts = _first_points(grid, alpha, points)
    h = kinked_positive(pts)
    l1 = nw.wsb_layer(1, n, _selectors(n), [0] * n, [h] * n)
    l2 = _sum_layer(n, [1] * n)
    net = nw.Network((l1, l2), (1,))
    return net, AnswerSheet(
        "thm7_ndf_lb_kinks", "w_{n+1} + sum_i h(1 * w_i), WSB first layer, h > 0 kinked",
        params={"M": grid, "n": n, "alpha": alpha, "points": pts}, grid=grid,
        lower_bound=("nd", mpq(1, 9), "union_all"))


def thm7_ndf_lb_zeros(M="16eq", n=4, alpha=1, points=None):
    grid = parse_grid(M)
    _check_family(grid, n, alpha, 4)
    pts = _first_points(grid, alpha, points)
    h = sf.catalog("hermite_zeros", points=list(pts))
    l1 = nw.wsb_layer(1, n, _selectors(n), [0] * n, [h] * n)
    mats = [[[1 if j == i else 0] for j in range(n)] for i in range(n)]
    l2 = nw.wsb_layer(n, 1, mats, [0] * n, [_relu()] * n)
    l3 = _sum_layer(n, [1] * n)
    net = nw.Network((l1, l2, l3), (1,))
    return net, AnswerSheet(
        "thm7_ndf_lb_zeros", "w_{n+2} + sum_i ReLU(h(w_i) w_{n+1}), h analytic with alpha zeros",
        params={"M": grid, "n": n, "alpha": alpha, "points": pts}, grid=grid,
        lower_bound=("nd", mpq(1, 9), "union_all"),
        facts={"hermite_slopes": tuple((-1) ** j for j in range(alpha))})


def _thm9_points(grid, alpha, points):
    if points is not None:
        pos = tuple(sorted(Q(x) for x in points))
        if any(x <= 0 for x in pos) or not set(pos) <= set(grid):
            raise PreconditionViolated("points must be positive elements of M")
    else:
        pos = tuple(x for x in grid if x > 0)[: alpha // 2]
    if len(pos) != alpha // 2:
        raise PreconditionViolated(f"M needs {alpha // 2} positive elements")
    if alpha % 2 and 0 not in grid:
        raise PreconditionViolated("odd alpha needs 0 in M")
    return pos


def thm9_inc_lb_kinks(M="16eq", n=4, alpha=2, points=None):
    grid = parse_grid(M)
    _check_family(grid, n, alpha, 4)
    pos = _thm9_points(grid, alpha, points)
    h = even_kinked(pos, alpha % 2 == 1)
    signs = [1] * n + [-1] * n
    l1 = nw.wsb_layer(1, n, _selectors(n, signs), [0] * (2 * n), [h] * (2 * n))
    l2 = _sum_layer(2 * n, [1] * n + [-1] * n)
    net = nw.Network((l1, l2), (1,))
    return net, AnswerSheet(
        "thm9_inc_lb_kinks", "w_{n+1} + sum_i h(w_i) - h(-w_i), h even, right-slope AD",
        params={"M": grid, "n": n, "alpha": alpha, "positive_kinks": pos}, grid=grid,
        lower_bound=("inc", mpq(1, 13), "union_all"),
        facts={"function": "w_{n+1}"})


def thm9_inc_lb_zeros(M="16eq", n=4, alpha=1, points=None):
    grid = parse_grid(M)
    _check_family(grid, n, alpha, 4)
    pts = _first_points(grid, alpha, points)
    h = sf.catalog("hermite_zeros", points=list(pts))
    l1 = nw.wsb_layer(1, n, _selectors(n), [0] * n, [h] * n)
    mats = []
    for s in (1, -1):
        for i in range(n):
            mats.append([[s if j == i else 0] for j in range(n)])
    l2 = nw.wsb_layer(n, 1, mats, [0] * (2 * n), [_relu()] * (2 * n))
    l3 = _sum_layer(2 * n, [1] * n + [-1] * n)
    net = nw.Network((l1, l2, l3), (1,))
    return net, AnswerSheet(
        "thm9_inc_lb_zeros",
        "w_{n+2} + sum_i ReLU(h(w_i) w_{n+1}) - ReLU(-h(w_i) w_{n+1})",
        params={"M": grid, "n": n, "alpha": alpha, "points": pts}, grid=grid,
        lower_bound=("inc", mpq(1, 13), "union_all"))


FIXTURES = {
    "intro_identity": intro_identity,
    "intro_half": intro_half,
    "intro_grid_adversary": intro_grid_adversary,
    "thm3_bias_lb": thm3_bias_lb,
    "thm7_ndf_lb_kinks": thm7_ndf_lb_kinks,
    "thm7_ndf_lb_zeros": thm7_ndf_lb_zeros,
    "thm9_inc_lb_kinks": thm9_inc_lb_kinks,
    "thm9_inc_lb_zeros": thm9_inc_lb_zeros,
}

_ALIASES = {"a": "alpha", "lambda": "lam", "λ": "lam"}


def fixture(name, **params):
    try:
        build = FIXTURES[name]
    except KeyError:
        raise BadParams(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}") from None
    params = {_ALIASES.get(k, k): v for k, v in params.items()}
    try:
        return build(**params)
    except TypeError as exc:
        raise BadParams(f"bad parameters for {name}: {exc}") from None


def parse_fixture_spec(spec):
    """"thm3_bias_lb,M=16eq,n=3,a=2" -> (name, params).  M lists use ';'."""
    name, *rest = [s.strip() for s in spec.split(",")]
    params = {}
    for item in rest:
        if "=" not in item:
            raise BadParams(f"fixture parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        k = _ALIASES.get(k.strip(), k.strip())
        v = v.strip()
        if k == "M":
            params[k] = v.replace(";", ",")
        elif k == "points":
            params[k] = [Q(x) for x in v.split(";") if x]
        elif k in ("n", "alpha"):
            params[k] = int(v)
        else:
            params[k] = Q(v)
    return name, params
