"""Seeded random networks for the property and acceptance tests."""

import random

from gmpy2 import mpq

from adcert import network as nw
from adcert import scalarfun as sf
from adcert.errors import BadParams

COEFS = (mpq(1), mpq(-1), mpq(2), mpq(-2), mpq(1, 2), mpq(-1, 2), mpq(3, 2))


def grid_of(size):
    return {3: (mpq(-1), mpq(0), mpq(1)),
            5: (mpq(-1), mpq(-1, 2), mpq(0), mpq(1, 2), mpq(1))}[size]


def pwl(rng, grid, max_kinks=3):
    """Continuous piecewise-linear activation with kinks at grid points."""
    while True:
        k = rng.randint(1, max_kinks)
        pts = sorted(rng.sample(list(grid), min(k, len(grid))))
        vals = [mpq(rng.randint(-3, 3), rng.choice((1, 2))) for _ in pts]
        try:
            return sf.catalog("sawtooth_kinks", points=pts, values=vals,
                              left_slope=rng.choice(COEFS + (mpq(0),)),
                              right_slope=rng.choice(COEFS + (mpq(0),)),
                              owner=rng.choice(("left", "right")))
        except BadParams:
            continue


def random_activation(rng, grid):
    r = rng.random()
    if r < 0.3:
        return sf.catalog("relu", owner=rng.choice(("left", "right")))
    if r < 0.4:
        return sf.catalog("identity")
    if r < 0.5:
        return sf.catalog("leaky_relu", slope=rng.choice((mpq(1, 2), mpq(-1))),
                          owner=rng.choice(("left", "right")))
    return pwl(rng, grid)


def _row(rng, in_dim, u_dim, used):
    terms = []
    for j in range(in_dim):
        if rng.random() < 0.75:
            if u_dim and rng.random() < 0.6:
                k = rng.randrange(u_dim)
                used.add(k)
                terms.append((rng.choice(COEFS), (j,), (k,)))
            else:
                terms.append((rng.choice(COEFS), (j,), ()))
    if not terms:
        terms.append((rng.choice(COEFS), (rng.randrange(in_dim),), ()))
    return terms


def random_bias_net(rng, grid, max_w=4, max_layers=3, max_width=3, activation=None):
    """All-bias network with L <= max_layers, N_l <= max_width and W <= max_w."""
    while True:
        L = rng.randint(1, max_layers)
        widths = [rng.randint(1, max_width) for _ in range(L - 1)] + [1]
        u_dims = [rng.randint(0, 1) for _ in range(L)]
        if sum(widths) + sum(u_dims) <= max_w:
            break
    datum = (rng.choice((mpq(1), mpq(-1), mpq(1, 2), mpq(2))),)
    layers = []
    prev = 1
    act = activation or (lambda: random_activation(rng, grid))
    for n, u in zip(widths, u_dims):
        used = set()
        f = [_row(rng, prev, u, used) for _ in range(n)]
        layers.append(nw.affine_bias_layer(prev, u, f, [act() for _ in range(n)]))
        prev = n
    return nw.Network(tuple(layers), datum)


def random_mixed_net(rng, grid, max_w=5):
    """Mixed network: WSB hidden layers and a bias output layer, or any mix of both."""
    while True:
        L = rng.randint(2, 3)
        widths = [rng.randint(1, 3) for _ in range(L - 1)] + [1]
        kinds = [rng.choice((nw.WSB, nw.AFFINE_BIAS)) for _ in range(L - 1)] + [nw.AFFINE_BIAS]
        params = [rng.randint(1, 2) if k == nw.WSB else rng.randint(0, 1) for k in kinds]
        W = sum(p + (n if k == nw.AFFINE_BIAS else 0) for p, n, k in zip(params, widths, kinds))
        if W <= max_w:
            break
    datum = (mpq(1),)
    layers = []
    prev = 1
    for n, k, p in zip(widths, kinds, params):
        acts = [random_activation(rng, grid) for _ in range(n)]
        if k == nw.WSB:
            mats = []
            for _ in range(n):
                m = [[mpq(0)] * p for _ in range(prev)]
                for col in range(p):
                    if rng.random() < 0.8:
                        m[rng.randrange(prev)][col] = rng.choice(COEFS)
                mats.append(m)
            consts = [rng.choice((mpq(0), mpq(0), mpq(1, 2), mpq(-1))) for _ in range(n)]
            layers.append(nw.wsb_layer(prev, p, mats, consts, acts))
        else:
            used = set()
            f = [_row(rng, prev, p, used) for _ in range(n)]
            layers.append(nw.affine_bias_layer(prev, p, f, acts))
        prev = n
    return nw.Network(tuple(layers), datum)


def random_point(rng, net, grid=None):
    if grid is not None:
        return tuple(rng.choice(grid) for _ in range(net.W))
    return tuple(mpq(rng.randint(-12, 12), rng.randint(1, 6)) for _ in range(net.W))


def bias_suite(count=24, seed=7):
    """(net, grid) pairs: half with |M| = 3, half with |M| = 5."""
    rng = random.Random(seed)
    out = []
    for k in range(count):
        grid = grid_of(3 if k % 2 == 0 else 5)
        out.append((random_bias_net(rng, grid), grid))
    return out
