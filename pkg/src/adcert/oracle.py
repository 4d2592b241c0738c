"""Ground truth about z_L near a point, computed without the certification theorems.

Every neuron whose pre-activation sits exactly on a breakpoint is "touched".
Near w, the pieces of the untouched neurons are fixed.  The function is then
a finite selection among smooth maps z_L^gamma, one per choice of piece at
the touched neurons.  Three tools decide what happens there.

* Closure agreement.  If every closure assignment has the same jacobian,
  z_L is differentiable.
* Local region analysis.  Each touched neuron's offset g = y - b is written
  as a sign-unit times a product of "atoms", local functions with
  independent gradients (parameters, upstream neurons, or g itself).  Such
  a map is a submersion, so every sign pattern of the atoms is realised
  arbitrarily close to w.  A region therefore has interior near w iff a
  parity system over GF(2) is solvable.  When this succeeds, the set of
  limiting gradients is known exactly.
* Ray probes.  Along w + t d every y_{l,i} is a polynomial in t, so the
  one-sided slope and the region entered are computed exactly.  Unequal
  slopes along +d and -d prove non-differentiability.
"""

import math
import random
from dataclasses import dataclass, field
from itertools import product

from gmpy2 import mpq

from . import ad
from . import network as nw
from . import poly as P
from .errors import ExplosionGuard

DIFFERENTIABLE = "Differentiable"
NONDIFFERENTIABLE = "NonDifferentiable"
INCONCLUSIVE = "Inconclusive"

LEFT, SINGLE, RIGHT = -1, 0, 1


@dataclass(frozen=True)
class Budget:
    directions: int = 16
    seed: int = 0
    cap: int = 2**20
    pattern_bits: int = 14
    degree: int = 24
    witness: bool = True  # False: skip building witnesses once the verdict is settled


@dataclass(frozen=True)
class OracleVerdict:
    status: str
    gradient: tuple = None
    witness: dict = None
    evidence: tuple = ()

    @property
    def differentiable(self):
        return self.status == DIFFERENTIABLE


# ------------------------------------------------------------ linear algebra

def _sign(x):
    return (x > 0) - (x < 0)


def rank(rows):
    rows = [list(r) for r in rows]
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((k for k in range(r, len(rows)) if rows[k][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        for k in range(r + 1, len(rows)):
            f = rows[k][c]
            if f:
                f = f / pr[c]
                rows[k] = [a - f * b for a, b in zip(rows[k], pr)]
        r += 1
    return r


def solve_square(m, rhs):
    """Exact solution of m x = rhs for a nonsingular square m."""
    n = len(m)
    a = [list(row) + [rhs[k]] for k, row in enumerate(m)]
    for c in range(n):
        piv = next(k for k in range(c, n) if a[k][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [v * inv for v in a[c]]
        for k in range(n):
            if k != c and a[k][c]:
                f = a[k][c]
                a[k] = [x - f * y for x, y in zip(a[k], a[c])]
    return [a[k][n] for k in range(n)]


def direction_for_signs(grads, signs):
    """Minimum-norm d with <grad_a, d> = sign_a for independent gradients."""
    gram = [[sum(x * y for x, y in zip(ga, gb)) for gb in grads] for ga in grads]
    y = solve_square(gram, [mpq(s) for s in signs])
    W = len(grads[0])
    return tuple(sum(y[a] * grads[a][c] for a in range(len(grads))) for c in range(W))


def gf2_solve(equations, nvars):
    """Solve XOR equations (mask, rhs) over GF(2); returns a bit list or None."""
    pivots = {}
    for mask, rhs in equations:
        while mask:
            top = mask.bit_length() - 1
            if top in pivots:
                pm, pr = pivots[top]
                mask ^= pm
                rhs ^= pr
            else:
                pivots[top] = (mask, rhs)
                break
        else:
            if rhs:
                return None
    bits = [0] * nvars
    for top in sorted(pivots):
        mask, rhs = pivots[top]
        val = rhs
        rest = mask & ~(1 << top)
        k = 0
        while rest:
            if rest & 1:
                val ^= bits[k]
            rest >>= 1
            k += 1
        bits[top] = val
    return bits


# ------------------------------------------------------------- local state

@dataclass(eq=False)
class Touch:
    l: int
    i: int
    b: object
    sides: dict  # side -> piece index
    derivs: dict  # side -> derivative of that piece at b
    owner_side: int
    adf: object


_SIDE_CACHE = {}  # id(boundary) -> (boundary, sides, derivs, owner side); shared, read-only


def _touch(act, l, i, bd, adf):
    hit = _SIDE_CACHE.get(id(bd))
    if hit is None or hit[0] is not bd:
        sides = {LEFT: bd.left, RIGHT: bd.right}
        if bd.singleton is not None:
            sides[SINGLE] = bd.singleton
        derivs = {s: act.piece_deriv(k, bd.point) for s, k in sides.items()}
        owner_side = next(s for s, k in sides.items() if k == bd.owner)
        hit = _SIDE_CACHE[id(bd)] = (bd, sides, derivs, owner_side)
    return Touch(l, i, bd.point, hit[1], hit[2], hit[3], adf)


class _LayerState:
    """Forward values, touches and (lazily) AD derivatives and partials of one layer."""

    __slots__ = ("x", "p", "y", "z", "touched", "adf", "parts")

    def __init__(self, layer, l, x, p):
        self.x, self.p = x, p
        self.y = y = nw.pre_activations(layer, x, p)
        zl = []
        touched = []
        for i, (act, v) in enumerate(zip(layer.activations, y)):
            val, bd = act.eval_at(v)
            zl.append(val)
            if bd is not None:
                touched.append(_touch(act, l, i, bd, act.adf(v)))
        self.z = tuple(zl)
        self.touched = touched
        self.adf = None
        self.parts = None


class Local:
    """The neighbourhood of w: trace, AD values, touched neurons."""

    def __init__(self, net, w):
        self.net = net
        self.w = w
        self._adf = None
        self._parts = None
        self._active = None
        self.touched = []
        states = self._states = []
        x = net.input_datum
        for l, (layer, off) in enumerate(zip(net.layers, net.offsets), 1):
            st = _LayerState(layer, l, x, w[off:off + layer.n_params])
            states.append(st)
            self.touched.extend(st.touched)
            x = st.z
        self.trace = nw.ForwardTrace(tuple(st.y for st in states),
                                     (net.input_datum,) + tuple(st.z for st in states))
        self._back = None
        self._sl = None

    @property
    def partials(self):
        if self._parts is None:
            for st, layer in zip(self._states, self.net.layers):
                if st.parts is None:
                    st.parts = [nw.tau_partials(terms, st.x, st.p) for terms in layer.taus]
            self._parts = [st.parts for st in self._states]
        return self._parts

    @property
    def adf(self):
        if self._adf is None:
            for st, layer in zip(self._states, self.net.layers):
                if st.adf is None:
                    st.adf = [act.adf(v) for act, v in zip(layer.activations, st.y)]
            self._adf = [st.adf for st in self._states]
        return self._adf

    @property
    def active(self):
        if self._active is None:
            self._active = ad.active_of_trace(self.net, self.trace)
        return self._active

    def single_layer(self):
        if self._sl is None:
            self._sl = SingleLayer(self)
        return self._sl

    def _backward(self):
        if self._back is None:
            self._back = ad.backward(self.net, self.w, self.trace, self.adf, self.partials)
        return self._back

    @property
    def ad_jacobian(self):
        return _freeze(self._backward()[0])

    def hidden(self, l, i):
        return self._backward()[1][l - 1][i]

    @property
    def layers_touched(self):
        return sorted({t.l for t in self.touched})

    def gamma_with(self, choice):
        """Active assignment with touched neurons replaced per ``choice`` (touch -> piece)."""
        g = [list(row) for row in self.active.gamma]
        for t, k in choice.items():
            g[t.l - 1][t.i] = k
        return ad.PieceAssignment(tuple(tuple(r) for r in g))


def _freeze(rows):
    return tuple(tuple(r) for r in rows)


# ---------------------------------------------------------- atom analysis

def neuron_form(net, trace, w, l, i, b, grad_y, grad_z_prev, zero_upstream):
    """Local shape of g = y_{l,i} - b near w.

    Returns ("pinned",), ("product", unit, [(atom key, gradient)]),
    ("whole", gradient) or ("unknown",).
    """
    layer = net.layers[l - 1]
    if layer.has_bias:
        return ("whole", grad_y)
    off = net.offsets[l - 1]
    x = trace.z[l - 1]
    const = mpq(0)
    live = []
    for t in layer.taus[i]:
        if not t.xs and not t.ps:
            const += t.coef
            continue
        dead = False
        for j in t.xs:
            if (l == 1 and x[j] == 0) or (l > 1 and zero_upstream(j)):
                dead = True
                break
        if not dead:
            live.append(t)
    if not live:
        return ("pinned",)
    if len(live) == 1 and const == b:
        t = live[0]
        unit = _sign(t.coef)
        atoms = []
        for j in t.xs:
            v = x[j]
            if v != 0:
                unit *= _sign(v)
            else:
                g = grad_z_prev[j]
                if not any(g):
                    return ("unknown",)
                atoms.append((("z", l - 1, j), tuple(g)))
        for k in t.ps:
            v = w[off + k]
            if v != 0:
                unit *= _sign(v)
            else:
                e = [mpq(0)] * len(w)
                e[off + k] = mpq(1)
                atoms.append((("p", off + k), tuple(e)))
        return ("product", unit, atoms)
    if any(grad_y):
        return ("whole", tuple(grad_y))
    return ("unknown",)


@dataclass
class AtomSystem:
    """Atoms with independent gradients and, per touched neuron, its constraint."""

    keys: list = field(default_factory=list)
    grads: list = field(default_factory=list)
    specs: dict = field(default_factory=dict)  # touch index -> ("pinned",) | (mask, unit)
    valid: bool = True

    def atom(self, key, grad):
        if key in self.keys:
            return self.keys.index(key)
        self.keys.append(key)
        self.grads.append(grad)
        return len(self.keys) - 1


def build_atoms(loc, touches, grads_y, grads_z, zero_upstream):
    """Atom system for the touched neurons under one upstream assignment.

    grads_y[k] is the gradient of touched neuron k; grads_z(l, j) gives the
    gradient of z_{l,j}; zero_upstream(l, j) says whether z_{l,j} vanishes
    identically near w.
    """
    net, trace, w = loc.net, loc.trace, loc.w
    sys = AtomSystem()
    wholes = []  # (touch, atom index)
    for k, t in enumerate(touches):
        form = neuron_form(net, trace, w, t.l, t.i, t.b, grads_y[k],
                           _Lazy(grads_z, t.l - 1), lambda j, l=t.l: zero_upstream(l - 1, j))
        if form[0] == "pinned":
            sys.specs[k] = ("pinned",)
        elif form[0] == "product":
            mask = 0
            for key, g in form[2]:
                mask ^= 1 << sys.atom(key, g)
            sys.specs[k] = (mask, form[1])
        elif form[0] == "whole":
            layer = net.layers[t.l - 1]
            merged = None
            for u, a in wholes:
                if u.l == t.l:
                    lam = layer.proportional(u.i, t.i)
                    if lam is not None:
                        merged = (1 << a, _sign(lam))
                        break
            if merged is None:
                a = sys.atom(("y", t.l, t.i), form[1])
                wholes.append((t, a))
                merged = (1 << a, 1)
            sys.specs[k] = merged
        else:
            sys.valid = False
            return sys
    if sys.grads and not _independent(sys.grads):
        sys.valid = False
    return sys


def _independent(rows):
    """Linear independence; rows with pairwise disjoint supports need no elimination."""
    seen = set()
    for r in rows:
        support = {c for c, v in enumerate(r) if v}
        if not support:
            return False
        if support & seen:
            return rank(rows) == len(rows)
        seen |= support
    return True


class _Lazy:
    def __init__(self, fn, l):
        self.fn, self.l = fn, l

    def __getitem__(self, j):
        return self.fn(self.l, j)


def region_signs(sys, touches, sides):
    """Atom signs realising ``sides`` (touch index -> side), or None if the region is thin."""
    eqs = []
    for k, t in enumerate(touches):
        spec = sys.specs[k]
        s = sides[k]
        if spec[0] == "pinned":
            if s != t.owner_side:
                return None
            continue
        if s == SINGLE:
            return None
        mask, unit = spec
        eqs.append((mask, 0 if s * unit > 0 else 1))
    bits = gf2_solve(eqs, len(sys.keys))
    if bits is None:
        return None
    return [1 - 2 * b for b in bits]


# ------------------------------------------------------- single-layer case

def _outer_sparse(h, g, scale, W):
    """scale * h (x) g as {flat index: value}; g is a sparse gradient."""
    out = {}
    for r, a in enumerate(h):
        if a:
            f = scale * a
            base = r * W
            for c, b in g.items():
                if b:
                    out[base + c] = f * b
    return out


class SingleLayer:
    """All touched neurons in one layer: jacobians are affine in the side choices."""

    def __init__(self, loc):
        self.loc = loc
        net, w, trace = loc.net, loc.w, loc.trace
        ell = loc.touched[0].l
        self.ell = ell
        ty, tz = ad.tangents(net, w, trace, loc.adf, loc.partials, upto=ell, sparse=True,
                             last_only={t.i for t in loc.touched})
        W = len(w)
        self.W = W
        self._gs = [ty[ell - 1][t.i] for t in loc.touched]
        self.grad_y = [tuple(ad.dense(g, W)) for g in self._gs]
        dense_z = {}

        def grad_z(l, j):
            if (l, j) not in dense_z:
                dense_z[l, j] = ad.dense(tz[l][j], W)
            return dense_z[l, j]

        self.base = [v for row in loc.ad_jacobian for v in row]
        # per touch: hidden partial h, or None when h (x) grad y vanishes
        self._h = []
        for t, g in zip(loc.touched, self.grad_y):
            h = loc.hidden(t.l, t.i)
            self._h.append(h if any(g) and any(h) else None)
        self._contrib = {}
        self._relevant = None
        upstream_zero = {}

        def zero_upstream(l, j):
            key = (l, j)
            if key not in upstream_zero:
                act = net.activation(l, j)
                upstream_zero[key] = not act.pieces[act.locate(trace.y[l - 1][j])].coeffs
            return upstream_zero[key]

        self.atoms = build_atoms(loc, loc.touched, self.grad_y, grad_z, zero_upstream)

    def contrib(self, k, s):
        """Flat matrix that side s of touch k adds to the AD jacobian, or None."""
        key = (k, s)
        if key not in self._contrib:
            t = self.loc.touched[k]
            d = t.derivs.get(s)
            h = self._h[k]
            self._contrib[key] = None if (d is None or d == t.adf or h is None) \
                else _outer_sparse(h, self._gs[k], d - t.adf, self.W)
        return self._contrib[key]

    def jacobian(self, sides):
        J = list(self.base)
        for k, s in enumerate(sides):
            c = self.contrib(k, s)
            if c:
                for idx, v in c.items():
                    J[idx] += v
        return J

    def relevant(self):
        """Touch indices whose side changes the jacobian."""
        # the outer product is nonzero, so sides differ iff their derivatives do
        if self._relevant is None:
            self._relevant = [
                k for k, t in enumerate(self.loc.touched)
                if self._h[k] is not None and len({d for s, d in t.derivs.items() if s != SINGLE}) > 1]
        return self._relevant

    def sides_for(self, sigma):
        sides = []
        for k, t in enumerate(self.loc.touched):
            spec = self.atoms.specs[k]
            if spec[0] == "pinned":
                sides.append(t.owner_side)
                continue
            mask, unit = spec
            s = unit
            a = 0
            while mask:
                if mask & 1:
                    s *= sigma[a]
                mask >>= 1
                a += 1
            sides.append(s)
        return sides

    def differentiable(self):
        """Exact decision (atoms valid): the varying part of J(sigma) cancels."""
        by_mask = {}
        for k in self.relevant():
            spec = self.atoms.specs[k]
            if spec[0] != "pinned":
                by_mask.setdefault(spec[0], []).append((k, spec[1]))
        for members in by_mask.values():
            if len(members) == 1:
                return False  # a single nonzero h (x) grad y term cannot cancel
            acc = {}
            for k, unit in members:
                t = self.loc.touched[k]
                diff = _outer_sparse(self._h[k], self._gs[k],
                                     unit * (t.derivs[RIGHT] - t.derivs[LEFT]), self.W)
                for idx, v in diff.items():
                    acc[idx] = acc.get(idx, 0) + v
            if any(acc.values()):
                return False
        return True

    def relevant_atoms(self):
        mask = 0
        for k in self.relevant():
            spec = self.atoms.specs[k]
            if spec[0] != "pinned":
                mask |= spec[0]
        return [a for a in range(len(self.atoms.keys)) if mask >> a & 1]

    def patterns(self, bits):
        """(sigma, jacobian) over all sign patterns of the relevant atoms, or None if too many."""
        rel = self.relevant_atoms()
        if len(rel) > bits:
            return None
        n = len(self.atoms.keys)
        out = []
        for combo in product((1, -1), repeat=len(rel)):
            sigma = [1] * n
            for a, s in zip(rel, combo):
                sigma[a] = s
            out.append((sigma, self.jacobian(self.sides_for(sigma))))
        return out


# -------------------------------------------------------- multi-layer case

def _choice_options(t):
    return list(t.sides.items())


def enumerate_regions(loc, cap, with_atoms=True):
    """Per closure assignment: (choice sides, gamma, jacobian, status).

    status is "full", "thin" or "unknown" (interior near w not decided).
    """
    net, w, trace = loc.net, loc.w, loc.trace
    options = [_choice_options(t) for t in loc.touched]
    total = math.prod(len(o) for o in options)
    if total > cap:
        raise ExplosionGuard(f"{total} closure assignments exceed the cap {cap}")
    out = []
    for combo in product(*options):
        sides = [s for s, _ in combo]
        choice = {t: k for t, (_, k) in zip(loc.touched, combo)}
        gamma = loc.gamma_with(choice)
        dsig = ad.piece_derivs(net, gamma, trace)
        jac, _ = ad.backward(net, w, trace, dsig, loc.partials)
        ty, tz = ad.tangents(net, w, trace, dsig, loc.partials)
        grads = [tuple(ty[t.l - 1][t.i]) for t in loc.touched]
        status = "unknown"
        if with_atoms:
            def zero_upstream(l, j, gamma=gamma):
                act = net.activation(l, j)
                return not act.pieces[gamma.gamma[l - 1][j]].coeffs

            system = build_atoms(loc, loc.touched, grads, lambda l, j, tz=tz: tz[l][j],
                                 zero_upstream)
            if system.valid:
                sig = region_signs(system, loc.touched, sides)
                status = "thin" if sig is None else "full"
        if status == "unknown":
            status = _static_prune(loc, sides, grads) or "unknown"
        out.append((tuple(sides), gamma, _freeze(jac), status))
    return out


def _static_prune(loc, sides, grads):
    """'thin' when the sides are impossible on an open set.

    A neuron with a nonzero gradient cannot stay on a singleton piece, and
    two proportional same-layer neurons (tau_b - lam tau_a constant) must
    sit on sides related by the sign of lam.
    """
    ts = loc.touched
    for a in range(len(ts)):
        if not any(grads[a]):
            continue
        if sides[a] == SINGLE:
            return "thin"
        for b in range(len(ts)):
            if b == a or ts[a].l != ts[b].l:
                continue
            lam = loc.net.layers[ts[a].l - 1].proportional(ts[a].i, ts[b].i)
            if lam is not None and sides[b] != _sign(lam) * sides[a]:
                return "thin"
    return None


# ---------------------------------------------------------------- rays

@dataclass(frozen=True)
class Ray:
    direction: tuple
    gamma: ad.PieceAssignment
    strict: bool
    slope: tuple  # one-sided derivative along the direction, per output


def ray_probe(net, w, d, degree=1):
    """Walk t -> w + t d with polynomials truncated at ``degree``.

    The slope is exact for any degree >= 1: a neuron whose offset has no
    linear term contributes nothing linear whichever piece it takes.  The
    region, and whether it is entered strictly, needs larger degrees.
    """
    if degree == 1:
        return _ray_probe_linear(net, w, d)
    xs = [(c,) if c else () for c in net.input_datum]
    gamma = []
    strict = True
    for l, layer in enumerate(net.layers, 1):
        off = net.offsets[l - 1]
        pw = [P.trim((w[off + k], d[off + k])) for k in range(layer.n_params)]
        row = []
        zs = []
        for terms, act in zip(layer.taus, layer.activations):
            y = ()
            for t in terms:
                v = (t.coef,)
                for j in t.xs:
                    v = P.mul(v, xs[j], degree)
                for k in t.ps:
                    v = P.mul(v, pw[k], degree)
                y = P.add(y, v)
            y0 = y[0] if y else mpq(0)
            bd = act.boundary_at(y0)
            if bd is None:
                k = act.locate(y0)
            else:
                lead = next((c for c in y[1:] if c != 0), None)
                if lead is None:
                    strict = False
                    k = bd.owner
                else:
                    k = bd.right if lead > 0 else bd.left
            row.append(k)
            zs.append(P.compose(act.pieces[k].coeffs, y, degree))
        gamma.append(tuple(row))
        xs = zs
    slope = tuple(z[1] if len(z) > 1 else mpq(0) for z in xs)
    return Ray(tuple(d), ad.PieceAssignment(tuple(gamma)), strict, slope)


def _ray_probe_linear(net, w, d):
    """ray_probe at degree 1, with (value, slope) pairs instead of polynomials."""
    zero = mpq(0)
    xs = [(c, zero) for c in net.input_datum]
    gamma = []
    strict = True
    for l, layer in enumerate(net.layers, 1):
        off = net.offsets[l - 1]
        row = []
        zs = []
        for terms, act in zip(layer.taus, layer.activations):
            y0 = zero
            y1 = zero
            for t in terms:
                a, b = t.coef, zero
                for j in t.xs:
                    c0, c1 = xs[j]
                    a, b = a * c0, a * c1 + b * c0
                for k in t.ps:
                    c0, c1 = w[off + k], d[off + k]
                    a, b = a * c0, a * c1 + b * c0
                y0 += a
                y1 += b
            bd = act.boundary_at(y0)
            if bd is None:
                k = act.locate(y0)
            elif y1 == 0:
                strict = False
                k = bd.owner
            else:
                k = bd.right if y1 > 0 else bd.left
            row.append(k)
            zs.append((act.piece_value(k, y0), act.piece_deriv(k, y0) * y1))
        gamma.append(tuple(row))
        xs = zs
    return Ray(tuple(d), ad.PieceAssignment(tuple(gamma)), strict, tuple(z[1] for z in xs))


def _neg(d):
    return tuple(-x for x in d)


def _probe_directions(W, budget, extra=()):
    rng = random.Random(budget.seed)
    dirs = list(extra)
    for j in range(W):
        e = [mpq(0)] * W
        e[j] = mpq(1)
        dirs.append(tuple(e))
    for _ in range(budget.directions):
        dirs.append(tuple(mpq(rng.randint(-8, 8), rng.randint(1, 8)) for _ in range(W)))
    return dirs


def _perturbed(d, rng, scale=mpq(1, 64)):
    return tuple(x + scale * mpq(rng.randint(-16, 16), 16) for x in d)


def antipodal_witness(net, w, dirs):
    for d in dirs:
        if not any(d):
            continue
        sp = ray_probe(net, w, d).slope
        sm = ray_probe(net, w, _neg(d)).slope
        if any(a + b != 0 for a, b in zip(sp, sm)):
            return {"kind": "antipodal", "direction": d, "slope_plus": sp, "slope_minus": sm}
    return None


def _strict_regions(net, w, dirs, degree, rng, tries=3):
    """Rays that enter their region strictly: gamma -> witness direction."""
    found = {}
    for d in dirs:
        for attempt in range(tries):
            dd = d if attempt == 0 else _perturbed(d, rng)
            r = ray_probe(net, w, dd, degree)
            if r.strict:
                found.setdefault(r.gamma, dd)
                break
    return found


# ----------------------------------------------------------- public API

def oracle_differentiability(net, w, budget=Budget(), loc=None):
    if loc is None:
        w = nw.check_point(net, w)
        loc = Local(net, w)
    if not loc.touched:
        return OracleVerdict(DIFFERENTIABLE, loc.ad_jacobian,
                             evidence=(("no breakpoint touched", loc.active),))
    if len(loc.layers_touched) == 1:
        return _single_layer_verdict(loc, budget)
    return _multi_layer_verdict(loc, budget)


def _unflat(flat, n_out):
    W = len(flat) // n_out
    return tuple(tuple(flat[r * W:(r + 1) * W]) for r in range(n_out))


def _single_layer_verdict(loc, budget):
    net, w = loc.net, loc.w
    n_out = net.out_dim
    sl = loc.single_layer()
    if not sl.relevant():
        sides = [t.owner_side if t.owner_side != SINGLE else LEFT for t in loc.touched]
        J = _unflat(sl.jacobian(sides), n_out)
        return OracleVerdict(DIFFERENTIABLE, J, evidence=(("closure agreement", len(loc.touched)),))
    if sl.atoms.valid:
        if sl.differentiable():
            sigma = [1] * len(sl.atoms.keys)
            J = _unflat(sl.jacobian(sl.sides_for(sigma)), n_out)
            return OracleVerdict(DIFFERENTIABLE, J, evidence=(("region analysis", tuple(sl.atoms.keys)),))
        wit = _region_witness(sl, budget) if budget.witness else None
        return OracleVerdict(NONDIFFERENTIABLE, witness=wit,
                             evidence=(("region analysis", tuple(sl.atoms.keys)),))
    return _fallback(loc, budget, enumerate_regions(loc, budget.cap, with_atoms=False))


def _region_witness(sl, budget):
    """Two interior regions with different jacobians, plus an antipodal pair if one turns up."""
    net, w = sl.loc.net, sl.loc.w
    pats = sl.patterns(budget.pattern_bits)
    rng = random.Random(budget.seed)
    if pats is None:
        pats = []
        rel = sl.relevant_atoms()
        for _ in range(64):
            sigma = [1] * len(sl.atoms.keys)
            for a in rel:
                sigma[a] = rng.choice((1, -1))
            pats.append((sigma, sl.jacobian(sl.sides_for(sigma))))
    first = pats[0]
    other = next((p for p in pats if p[1] != first[1]), None)
    dirs = _probe_directions(len(w), Budget(directions=0))
    extra = []
    if other is not None:
        d1 = direction_for_signs(sl.atoms.grads, first[0])
        d2 = direction_for_signs(sl.atoms.grads, other[0])
        extra = [d1, d2, tuple(a - b for a, b in zip(d1, d2))]
    found = antipodal_witness(net, w, extra + dirs)
    if found is not None:
        return found
    n_out = net.out_dim
    return {"kind": "regions", "directions": tuple(extra[:2]),
            "jacobians": (_unflat(first[1], n_out), _unflat(other[1], n_out)) if other else ()}


def _multi_layer_verdict(loc, budget):
    regions = enumerate_regions(loc, budget.cap)
    live = [r for r in regions if r[3] != "thin"]
    jacs = {r[2] for r in live}
    if len(jacs) == 1:
        return OracleVerdict(DIFFERENTIABLE, next(iter(jacs)),
                             evidence=(("region analysis", len(regions), len(live)),))
    full = {r[2] for r in live if r[3] == "full"}
    if len(full) > 1:
        wit = {"kind": "regions", "jacobians": tuple(sorted(full))[:2]}
        if budget.witness:
            dirs = _probe_directions(len(loc.w), Budget(directions=0))
            wit = antipodal_witness(loc.net, loc.w, dirs) or wit
        return OracleVerdict(NONDIFFERENTIABLE, witness=wit,
                             evidence=(("region analysis", len(regions), len(live)),))
    return _fallback(loc, budget, regions)


def _fallback(loc, budget, regions):
    net, w = loc.net, loc.w
    live = [r for r in regions if r[3] != "thin"]
    jacs = {r[2] for r in live}
    if len(jacs) == 1:
        return OracleVerdict(DIFFERENTIABLE, next(iter(jacs)),
                             evidence=(("closure agreement", len(live)),))
    dirs = _probe_directions(len(w), budget)
    wit = antipodal_witness(net, w, dirs)
    if wit is not None:
        return OracleVerdict(NONDIFFERENTIABLE, witness=wit, evidence=(("ray probes", len(dirs)),))
    rng = random.Random(budget.seed + 1)
    strict = _strict_regions(net, w, dirs, budget.degree, rng)
    by_gamma = {r[1]: r[2] for r in regions}
    seen = {}
    for g, d in strict.items():
        J = by_gamma.get(g)
        if J is not None:
            seen.setdefault(J, d)
    if len(seen) > 1:
        (J1, d1), (J2, d2) = list(seen.items())[:2]
        return OracleVerdict(NONDIFFERENTIABLE,
                             witness={"kind": "regions", "directions": (d1, d2), "jacobians": (J1, J2)},
                             evidence=(("strict rays", len(strict)),))
    return OracleVerdict(INCONCLUSIVE, evidence=(("candidates", len(live)), ("probes", len(dirs))))


def clarke_check(net, w, g, budget=Budget(), loc=None):
    """Is g a limit of gradients D z_L(w_n) with w_n -> w?  True, False, or None (undecided)."""
    g = _freeze(g)
    if loc is None:
        w = nw.check_point(net, w)
        loc = Local(net, w)
    if not loc.touched:
        return g == loc.ad_jacobian
    n_out = net.out_dim
    if len(loc.layers_touched) == 1:
        sl = loc.single_layer()
        if not sl.relevant():
            sides = [t.owner_side if t.owner_side != SINGLE else LEFT for t in loc.touched]
            return g == _unflat(sl.jacobian(sides), n_out)
        if sl.atoms.valid:
            pats = sl.patterns(budget.pattern_bits)
            if pats is not None:
                return any(_unflat(J, n_out) == g for _, J in pats)
        regions = enumerate_regions(loc, budget.cap, with_atoms=False)
    else:
        regions = enumerate_regions(loc, budget.cap)
    live = [r for r in regions if r[3] != "thin"]
    if all(r[3] == "full" for r in live):
        return any(r[2] == g for r in live)
    if not any(r[2] == g for r in live):
        return False
    if any(r[2] == g and r[3] == "full" for r in live):
        return True
    dirs = _probe_directions(len(w), budget)
    strict = _strict_regions(net, w, dirs, budget.degree, random.Random(budget.seed + 1))
    by_gamma = {r[1]: r[2] for r in regions}
    if any(by_gamma.get(gm) == g for gm in strict):
        return True
    return None


def oracle_clarke_limit(net, w, g, budget=Budget()):
    """True iff g is certified to be a limit of nearby true gradients."""
    return clarke_check(net, w, g, budget) is True


# --------------------------------------------------------- float cross-check

def _float_forward(net, w):
    x = [float(c) for c in net.input_datum]
    for layer, off in zip(net.layers, net.offsets):
        p = [float(v) for v in w[off:off + layer.n_params]]
        nxt = []
        for terms, act in zip(layer.taus, layer.activations):
            y = 0.0
            for t in terms:
                v = float(t.coef)
                for j in t.xs:
                    v *= x[j]
                for k in t.ps:
                    v *= p[k]
                y += v
            piece = act.pieces[act.locate(mpq(y))]
            acc = 0.0
            for c in reversed(piece.coeffs):
                acc = acc * y + float(c)
            nxt.append(acc)
        x = nxt
    return x


def fd_grad(net, w, step=1e-6):
    """Central finite differences of z_L in float arithmetic."""
    if step <= 0:
        raise ValueError("step must be positive")
    base = [float(v) for v in nw.check_point(net, w)]
    cols = []
    for k in range(len(base)):
        hi = list(base)
        lo = list(base)
        hi[k] += step
        lo[k] -= step
        zp = _float_forward(net, hi)
        zm = _float_forward(net, lo)
        cols.append([(a - b) / (2 * step) for a, b in zip(zp, zm)])
    return tuple(tuple(cols[k][r] for k in range(len(base))) for r in range(net.out_dim))
