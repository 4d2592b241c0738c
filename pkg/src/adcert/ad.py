"""Exact forward- and reverse-mode AD, hidden-unit partials and piece assignments.

AD applies the chain rule with each activation's adf policy and the exact
derivative of each polynomial pre-activation.  A piece assignment gamma
picks one polynomial piece per neuron.  Its smooth selection z_L^gamma
replaces every activation with the chosen piece.
"""

from dataclasses import dataclass
from itertools import product

from gmpy2 import mpq

from . import network as nw
from .errors import ExplosionGuard

DEFAULT_CAP = 2**20


@dataclass(frozen=True)
class PieceAssignment:
    """gamma[l-1][i] is the chosen piece index of neuron (l, i)."""

    gamma: tuple

    def __getitem__(self, li):
        l, i = li
        return self.gamma[l - 1][i]

    def items(self):
        for l, row in enumerate(self.gamma, 1):
            for i, k in enumerate(row):
                yield (l, i), k


@dataclass(frozen=True)
class ADReport:
    jacobian: tuple  # N_L rows of W rationals
    hidden_partials: dict  # (l, i) -> tuple of N_L rationals
    active: PieceAssignment
    trace: nw.ForwardTrace


def _zero_vec(n):
    return [mpq(0)] * n


def layer_partials(net, w, trace):
    """tau_partials of every neuron, per layer."""
    out = []
    for l, layer in enumerate(net.layers):
        off = net.offsets[l]
        x = trace.z[l]
        p = w[off:off + layer.n_params]
        out.append([nw.tau_partials(terms, x, p) for terms in layer.taus])
    return out


def backward(net, w, trace, dsig, parts=None):
    """Reverse sweep with activation derivatives dsig[l-1][i].

    Returns (jacobian rows, hidden partials per layer as lists of N_L-vectors).
    """
    n_out = net.out_dim
    W = len(w)
    if n_out == 1:
        return _backward_scalar(net, w, trace, dsig, parts)
    jac = [_zero_vec(W) for _ in range(n_out)]
    gz = [[mpq(1) if r == i else mpq(0) for r in range(n_out)] for i in range(n_out)]
    hidden = [None] * net.L
    for l in range(net.L, 0, -1):
        layer = net.layers[l - 1]
        off = net.offsets[l - 1]
        hidden[l - 1] = gz
        x = trace.z[l - 1]
        p = w[off:off + layer.n_params]
        gz_prev = [_zero_vec(n_out) for _ in range(layer.in_dim)]
        ds = dsig[l - 1]
        for i, terms in enumerate(layer.taus):
            d = ds[i]
            if d == 0:
                continue
            gyi = [g * d for g in gz[i]]
            if not any(gyi):
                continue
            dx, dp = parts[l - 1][i] if parts else nw.tau_partials(terms, x, p)
            for k, v in dp.items():
                if v:
                    col = off + k
                    for r in range(n_out):
                        jac[r][col] += gyi[r] * v
            for j, v in dx.items():
                if v:
                    tgt = gz_prev[j]
                    for r in range(n_out):
                        tgt[r] += gyi[r] * v
        gz = gz_prev
    return jac, hidden


def _backward_scalar(net, w, trace, dsig, parts):
    """``backward`` for a single output, without the per-row loops."""
    jac = _zero_vec(len(w))
    gz = [mpq(1)]
    hidden = [None] * net.L
    for l in range(net.L, 0, -1):
        layer = net.layers[l - 1]
        off = net.offsets[l - 1]
        hidden[l - 1] = [[g] for g in gz]
        x = trace.z[l - 1]
        p = w[off:off + layer.n_params]
        prev = _zero_vec(layer.in_dim)
        ds = dsig[l - 1]
        for i, terms in enumerate(layer.taus):
            gi = gz[i] * ds[i]
            if not gi:
                continue
            dx, dp = parts[l - 1][i] if parts else nw.tau_partials(terms, x, p)
            for k, v in dp.items():
                if v:
                    jac[off + k] += gi * v
            for j, v in dx.items():
                if v:
                    prev[j] += gi * v
        gz = prev
    return [jac], hidden


def adf_values(net, trace):
    return [[act.adf(y) for act, y in zip(layer.activations, ys)]
            for layer, ys in zip(net.layers, trace.y)]


def active_of_trace(net, trace):
    return PieceAssignment(tuple(tuple(act.locate(y) for act, y in zip(layer.activations, ys))
                                 for layer, ys in zip(net.layers, trace.y)))


def reverse_ad(net, w):
    w = nw.check_point(net, w)
    trace = nw._forward(net, w)
    jac, hidden = backward(net, w, trace, adf_values(net, trace))
    partials = {(l, i): tuple(vec) for l, rows in enumerate(hidden, 1)
                for i, vec in enumerate(rows)}
    return ADReport(tuple(tuple(r) for r in jac), partials, active_of_trace(net, trace), trace)


def dense(g, W):
    """Sparse gradient {coordinate: value} as a W-vector."""
    out = [mpq(0)] * W
    for c, u in g.items():
        out[c] = mpq(u)
    return out


def tangents(net, w, trace, dsig, parts=None, upto=None, sparse=False, last_only=None):
    """Forward tangent sweep: per layer, the gradients (W-vectors) of y_l and z_l.

    Only layers 1..upto are swept when ``upto`` is given.  With ``sparse`` the
    gradients are returned as {coordinate: value} dicts (see ``dense``), and
    ``last_only`` limits the final swept layer to those neuron indices (the
    others come back empty).
    """
    W = len(w)
    zero = mpq(0)
    sz = [{} for _ in trace.z[0]]
    ty_all = []
    tz_all = [list(sz) if sparse else [[zero] * W for _ in trace.z[0]]]
    last = net.L if upto is None else upto
    for l, layer in enumerate(net.layers[:last], 1):
        off = net.offsets[l - 1]
        x = trace.z[l - 1]
        p = w[off:off + layer.n_params]
        ty_l, tz_l, sz_l = [], [], []
        skip = last_only if (sparse and last_only is not None and l == last) else None
        for i, terms in enumerate(layer.taus):
            if skip is not None and i not in skip:
                ty_l.append({})
                tz_l.append({})
                sz_l.append({})
                continue
            dx, dp = parts[l - 1][i] if parts else nw.tau_partials(terms, x, p)
            g = {}
            for j, v in dx.items():
                if v:
                    for c, u in sz[j].items():
                        g[c] = g.get(c, 0) + v * u
            for k, v in dp.items():
                g[off + k] = g.get(off + k, 0) + v
            d = dsig[l - 1][i]
            gz = g if d == 1 else ({c: d * u for c, u in g.items()} if d else {})
            sz_l.append(gz)
            if sparse:
                ty_l.append(g)
                tz_l.append(gz)
                continue
            dy = [zero] * W
            for c, u in g.items():
                dy[c] = mpq(u)
            ty_l.append(dy)
            if gz is g:
                tz_l.append(list(dy))
            else:
                dz = [zero] * W
                for c, u in gz.items():
                    dz[c] = mpq(u)
                tz_l.append(dz)
        ty_all.append(ty_l)
        tz_all.append(tz_l)
        sz = sz_l
    return ty_all, tz_all


def forward_ad(net, w):
    w = nw.check_point(net, w)
    trace = nw._forward(net, w)
    _, tz = tangents(net, w, trace, adf_values(net, trace))
    return tuple(tuple(row) for row in tz[-1])


def active_assignment(net, w):
    w = nw.check_point(net, w)
    return active_of_trace(net, nw._forward(net, w))


def closure_choices(net, trace):
    """Per neuron, the piece indices whose closure contains y_{l,i}."""
    return [[act.closure_candidates(y) for act, y in zip(layer.activations, ys)]
            for layer, ys in zip(net.layers, trace.y)]


def closure_assignments(net, w, cap=DEFAULT_CAP):
    w = nw.check_point(net, w)
    trace = nw._forward(net, w)
    choices = closure_choices(net, trace)
    total = 1
    for row in choices:
        for c in row:
            total *= len(c)
    if total > cap:
        raise ExplosionGuard(f"{total} closure assignments exceed the cap {cap}")
    flat = [c for row in choices for c in row]
    shape = [len(row) for row in choices]
    out = []
    for combo in product(*flat):
        gamma, k = [], 0
        for n in shape:
            gamma.append(tuple(combo[k:k + n]))
            k += n
        out.append(PieceAssignment(tuple(gamma)))
    return out


def piece_trace(net, gamma, w):
    """Forward pass of the smooth selection z_L^gamma."""
    z = [net.input_datum]
    ys = []
    x = net.input_datum
    for l, layer in enumerate(net.layers, 1):
        off = net.offsets[l - 1]
        p = w[off:off + layer.n_params]
        y = tuple(nw.eval_tau(terms, x, p) for terms in layer.taus)
        x = tuple(act.piece_value(gamma.gamma[l - 1][i], v)
                  for i, (act, v) in enumerate(zip(layer.activations, y)))
        ys.append(y)
        z.append(x)
    return nw.ForwardTrace(tuple(ys), tuple(z))


def piece_derivs(net, gamma, trace):
    return [[act.piece_deriv(gamma.gamma[l][i], y)
             for i, (act, y) in enumerate(zip(layer.activations, ys))]
            for l, (layer, ys) in enumerate(zip(net.layers, trace.y))]


def piece_jacobian(net, gamma, w):
    w = nw.check_point(net, w)
    trace = piece_trace(net, gamma, w)
    jac, _ = backward(net, w, trace, piece_derivs(net, gamma, trace))
    return tuple(tuple(r) for r in jac)
