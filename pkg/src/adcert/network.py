"""Layered networks z_L(w; c) with polynomial pre-activations and exact forward evaluation.

Three pre-activation kinds are supported:

* ``affine_bias``: y_i = f_i(x, u) + v_i, with f_i a multilinear polynomial
  in the layer input x and the weights u.  The layer's parameter block is
  (u_1..u_U, v_1..v_N).
* ``wsb`` (well-structured biaffine): y_i = x^T M_i u + c_i, where every
  column of M_i has at most one nonzero entry.
* ``polynomial``: y_i = f_i(x, u) with no bias slot.  This covers layers that
  belong to neither class, such as a fixed linear read-out.
"""

from dataclasses import dataclass, field

from gmpy2 import mpq

from . import scalarfun as sf
from .errors import BadBiaffinePattern, ConfigError, DimMismatch, LengthMismatch
from .rational import Q, fmt, parse

AFFINE_BIAS = "affine_bias"
CONST, X_ONLY, P_ONLY, X_TIMES_P, GENERAL = range(5)  # Term.shape
WSB = "wsb"
POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class Term:
    """coef * prod(x[j] for j in xs) * prod(p[k] for k in ps); k is a layer-local index."""

    coef: object
    xs: tuple
    ps: tuple
    shape: int = field(default=0, init=False, compare=False, repr=False)

    def __post_init__(self):
        nx, np_ = len(self.xs), len(self.ps)
        shape = {(0, 0): CONST, (1, 0): X_ONLY, (0, 1): P_ONLY, (1, 1): X_TIMES_P}.get((nx, np_), GENERAL)
        object.__setattr__(self, "shape", shape)


@dataclass(frozen=True)
class Layer:
    kind: str
    in_dim: int
    out_dim: int
    n_params: int
    taus: tuple  # per neuron: tuple of Term
    activations: tuple
    u_dim: int = 0
    f_terms: tuple = ()
    matrices: tuple = ()
    constants: tuple = ()
    shape_keys: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "shape_keys", tuple(_shape_key(t) for t in self.taus))

    @property
    def has_bias(self):
        return self.kind == AFFINE_BIAS

    def proportional(self, a, b):
        """lam with tau_b - lam * tau_a constant, or None."""
        ka, kb = self.shape_keys[a], self.shape_keys[b]
        if ka is None or kb is None or ka[0] != kb[0]:
            return None
        return kb[1] / ka[1]

    def bias_index(self, i):
        """Layer-local index of v_i (bias layers only)."""
        return self.u_dim + i


def _shape_key(terms):
    """(normalized non-constant part, leading coefficient), or None if tau is constant."""
    acc = {}
    for t in terms:
        if t.xs or t.ps:
            key = (tuple(sorted(t.xs)), tuple(sorted(t.ps)))
            acc[key] = acc.get(key, 0) + t.coef
    monos = sorted((k, c) for k, c in acc.items() if c != 0)
    if not monos:
        return None
    lead = monos[0][1]
    return tuple((k, c / lead) for k, c in monos), lead


def _check_acts(acts, n):
    acts = tuple(acts)
    if len(acts) != n:
        raise DimMismatch(f"{len(acts)} activations for {n} neurons")
    for a in acts:
        if not isinstance(a, sf.PiecewiseFn):
            raise TypeError("activations must be PiecewiseFn instances")
    return acts


def _compile_terms(f, in_dim, u_dim):
    f_terms = []
    for terms in f:
        row = []
        for coef, xs, us in terms:
            xs, us = tuple(xs), tuple(us)
            if len(set(xs)) != len(xs) or len(set(us)) != len(us):
                raise ConfigError("f_i must be multilinear (no repeated variables)")
            if any(not 0 <= j < in_dim for j in xs) or any(not 0 <= k < u_dim for k in us):
                raise DimMismatch("term references a variable outside the layer")
            row.append(Term(Q(coef), xs, us))
        f_terms.append(tuple(t for t in row if t.coef != 0))
    return tuple(f_terms)


def affine_bias_layer(in_dim, u_dim, f, activations):
    """Bias layer; ``f[i]`` is a list of (coef, x_indices, u_indices) triples."""
    out_dim = len(f)
    acts = _check_acts(activations, out_dim)
    f_terms = _compile_terms(f, in_dim, u_dim)
    taus = tuple(row + (Term(mpq(1), (), (u_dim + i,)),) for i, row in enumerate(f_terms))
    return Layer(AFFINE_BIAS, in_dim, out_dim, u_dim + out_dim, taus, acts,
                 u_dim=u_dim, f_terms=f_terms)


def polynomial_layer(in_dim, n_params, f, activations):
    """Layer without bias slots: y_i = f_i(x, u), f_i multilinear."""
    acts = _check_acts(activations, len(f))
    f_terms = _compile_terms(f, in_dim, n_params)
    return Layer(POLYNOMIAL, in_dim, len(f), n_params, f_terms, acts,
                 u_dim=n_params, f_terms=f_terms)


def dense_bias_layer(in_dim, out_dim, activations):
    """y_i = sum_j W_ij x_j + b_i with W stored row-major before the biases."""
    f = [[(1, (j,), (i * in_dim + j,)) for j in range(in_dim)] for i in range(out_dim)]
    return affine_bias_layer(in_dim, in_dim * out_dim, f, activations)


def wsb_layer(in_dim, n_params, matrices, constants, activations):
    out_dim = len(matrices)
    acts = _check_acts(activations, out_dim)
    if len(constants) != out_dim:
        raise DimMismatch("one constant per neuron required")
    mats = []
    taus = []
    for i, m in enumerate(matrices):
        m = tuple(tuple(Q(v) for v in row) for row in m)
        if len(m) != in_dim or any(len(row) != n_params for row in m):
            raise DimMismatch(f"M_{i + 1} must be {in_dim} x {n_params}")
        for k in range(n_params):
            if sum(1 for j in range(in_dim) if m[j][k] != 0) > 1:
                raise BadBiaffinePattern(f"column {k + 1} of M_{i + 1} has 2+ nonzeros")
        mats.append(m)
        c = Q(constants[i])
        row = tuple(Term(m[j][k], (j,), (k,)) for j in range(in_dim)
                    for k in range(n_params) if m[j][k] != 0)
        if c != 0:
            row += (Term(c, (), ()),)
        taus.append(row)
    return Layer(WSB, in_dim, out_dim, n_params, tuple(taus), acts,
                 matrices=tuple(mats), constants=tuple(Q(c) for c in constants))


@dataclass(frozen=True)
class ForwardTrace:
    y: tuple  # y[l-1] = y_l
    z: tuple  # z[0] = c, z[l] = z_l

    @property
    def output(self):
        return self.z[-1]


@dataclass(frozen=True)
class NetworkInfo:
    has_bias: bool
    wsb_ok: bool
    S: tuple  # S[l-1] for l = 1..L+1: True means "full" (all of R), False "empty"


@dataclass(frozen=True)
class Network:
    layers: tuple
    input_datum: tuple
    offsets: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_datum", tuple(Q(c) for c in self.input_datum))
        offs, total = [], 0
        for layer in self.layers:
            offs.append(total)
            total += layer.n_params
        object.__setattr__(self, "offsets", tuple(offs))
        prev = len(self.input_datum)
        for l, layer in enumerate(self.layers, 1):
            if layer.in_dim != prev:
                raise DimMismatch(f"layer {l} expects {layer.in_dim} inputs, gets {prev}")
            prev = layer.out_dim
        if not self.layers:
            raise DimMismatch("a network needs at least one layer")

    @property
    def L(self):
        return len(self.layers)

    @property
    def W(self):
        return sum(layer.n_params for layer in self.layers)

    @property
    def N(self):
        return sum(layer.out_dim for layer in self.layers)

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    def idx(self):
        """All neuron indices (l, i), 1-based layer, 0-based neuron."""
        return [(l, i) for l, layer in enumerate(self.layers, 1) for i in range(layer.out_dim)]

    def activation(self, l, i):
        return self.layers[l - 1].activations[i]

    def global_param(self, l, k):
        return self.offsets[l - 1] + k

    def to_dict(self):
        layers = []
        for layer in self.layers:
            d = {"kind": layer.kind, "in_dim": layer.in_dim, "out_dim": layer.out_dim}
            if layer.kind in (AFFINE_BIAS, POLYNOMIAL):
                d["u_dim"] = layer.u_dim
                d["f"] = [[{"coef": fmt(t.coef), "x": list(t.xs), "u": list(t.ps)} for t in row]
                          for row in layer.f_terms]
            else:
                d["n_params"] = layer.n_params
                d["matrices"] = [[[fmt(v) for v in row] for row in m] for m in layer.matrices]
                d["constants"] = [fmt(c) for c in layer.constants]
            d["activations"] = [a.to_dict() for a in layer.activations]
            layers.append(d)
        return {"input": [fmt(c) for c in self.input_datum], "layers": layers}


def from_dict(d):
    try:
        layers = []
        for ld in d["layers"]:
            acts = [sf.from_dict(a) for a in ld["activations"]]
            if ld["kind"] == AFFINE_BIAS:
                f = [[(parse(t["coef"]), t.get("x", []), t.get("u", [])) for t in row]
                     for row in ld["f"]]
                layers.append(affine_bias_layer(ld["in_dim"], ld.get("u_dim", 0), f, acts))
            elif ld["kind"] == POLYNOMIAL:
                f = [[(parse(t["coef"]), t.get("x", []), t.get("u", [])) for t in row]
                     for row in ld["f"]]
                layers.append(polynomial_layer(ld["in_dim"], ld.get("u_dim", 0), f, acts))
            elif ld["kind"] == WSB:
                mats = [[[parse(v) for v in row] for row in m] for m in ld["matrices"]]
                layers.append(wsb_layer(ld["in_dim"], ld["n_params"], mats,
                                        [parse(c) for c in ld["constants"]], acts))
            else:
                raise ConfigError(f"unknown layer kind {ld['kind']!r}")
        return Network(tuple(layers), tuple(parse(c) for c in d["input"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed network config: {exc!r}") from None


def validate(net):
    has_bias = all(layer.has_bias for layer in net.layers)
    wsb_ok = all(layer.has_bias or layer.kind == WSB for layer in net.layers)
    S = tuple(not layer.has_bias for layer in net.layers) + (False,)
    return NetworkInfo(has_bias, wsb_ok, S)


def has_bias(net):
    return all(layer.has_bias for layer in net.layers)


def check_point(net, w):
    w = tuple(Q(x) for x in w)
    if len(w) != net.W:
        raise LengthMismatch(f"expected {net.W} parameters, got {len(w)}")
    return w


def eval_tau(terms, x, p):
    y = mpq(0)
    for t in terms:
        v = t.coef
        for j in t.xs:
            v = v * x[j]
        for k in t.ps:
            v = v * p[k]
        y += v
    return y


def tau_partials(terms, x, p):
    """(dict x_j -> dy/dx_j, dict p_k -> dy/dp_k) at (x, p)."""
    dx, dp = {}, {}
    for t in terms:
        shape = t.shape
        if shape == X_TIMES_P:
            j, k = t.xs[0], t.ps[0]
            dx[j] = dx.get(j, 0) + t.coef * p[k]
            dp[k] = dp.get(k, 0) + t.coef * x[j]
            continue
        if shape == X_ONLY:
            j = t.xs[0]
            dx[j] = dx.get(j, 0) + t.coef
            continue
        if shape == P_ONLY:
            k = t.ps[0]
            dp[k] = dp.get(k, 0) + t.coef
            continue
        if shape == CONST:
            continue
        xs, ps = t.xs, t.ps
        nx = len(xs)
        factors = [x[j] for j in xs] + [p[k] for k in ps]
        for a, f_a in enumerate(factors):
            v = t.coef
            for b, f in enumerate(factors):
                if b != a:
                    v = v * f
            if a < nx:
                dx[xs[a]] = dx.get(xs[a], 0) + v
            else:
                k = ps[a - nx]
                dp[k] = dp.get(k, 0) + v
    return dx, dp


def forward(net, w):
    w = check_point(net, w)
    return _forward(net, w)


def pre_activations(layer, x, p):
    """y of one layer given its input x and its parameters p."""
    yl = []
    for terms in layer.taus:
        acc = 0
        for t in terms:
            shape = t.shape
            if shape == X_TIMES_P:
                acc += t.coef * x[t.xs[0]] * p[t.ps[0]]
            elif shape == X_ONLY:
                acc += t.coef * x[t.xs[0]]
            elif shape == P_ONLY:
                acc += t.coef * p[t.ps[0]]
            else:
                v = t.coef
                for j in t.xs:
                    v = v * x[j]
                for k in t.ps:
                    v = v * p[k]
                acc += v
        yl.append(mpq(acc))
    return tuple(yl)


def layer_forward(layer, x, p):
    """(y, z) of one layer given its input x and its parameters p."""
    y = pre_activations(layer, x, p)
    return y, tuple([act(v) for act, v in zip(layer.activations, y)])


def _forward(net, w):
    z = [net.input_datum]
    ys = []
    x = net.input_datum
    for layer, off in zip(net.layers, net.offsets):
        y, x = layer_forward(layer, x, w[off:off + layer.n_params])
        ys.append(y)
        z.append(x)
    return ForwardTrace(tuple(ys), tuple(z))


def evaluate(net, w):
    """z_L(w) as a tuple of rationals."""
    return forward(net, w).output


def fixture(name, **params):
    """A named construction from the fixtures module: returns (Network, AnswerSheet)."""
    from .fixtures import fixture as build

    return build(name, **params)
