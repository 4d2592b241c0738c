"""Exhaustive census of a parameter grid M^W: how often AD is wrong or the network is kinked.

Two exact reductions keep large grids tractable.  Both are off when
per-point logging is requested.

* A bias of an output neuron whose activation is affine, and which appears
  nowhere else, never changes a verdict.  It is pinned to one grid value
  and the tallies are multiplied by |M|.
* Parameter transpositions that are network automorphisms (detected by
  matching neurons layer by layer) make verdicts constant on orbits.  The
  scan visits one sorted representative per orbit, weighted by its orbit size.
"""

import csv
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement, product

from gmpy2 import mpq

from . import certify as cf
from . import network as nw
from . import oracle as orc
from .errors import GridTooLarge, IncompleteReport, NotApplicable
from .rational import Q, fmt

DEFAULT_CAP = 10**7


@dataclass(frozen=True)
class Grid:
    M: tuple
    W: int

    def __post_init__(self):
        m = tuple(sorted(Q(x) for x in self.M))
        if not m:
            raise ValueError("the grid needs at least one value")
        if len(set(m)) != len(m):
            raise ValueError("grid values must be distinct")
        object.__setattr__(self, "M", m)

    @property
    def size(self):
        return len(self.M) ** self.W


@dataclass
class CensusReport:
    grid: Grid
    omega: int
    nd: int
    inc: int
    unknown: int
    verdicts: Counter
    certificates: Counter
    bounds: dict
    lower_bound: tuple = ()
    points: list = None
    classified: int = 0
    reductions: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    neutral: int = 0  # free coordinates that cannot change any verdict

    def _scaled(self, count):
        f = len(self.grid.M) ** self.neutral
        return f"{count // f}/{self.counted // f}"

    @property
    def counted(self):
        """|Omega| minus excluded Unknown points."""
        return self.omega - self.unknown

    @property
    def nd_density(self):
        return mpq(self.nd, self.counted) if self.counted else mpq(0)

    @property
    def inc_density(self):
        return mpq(self.inc, self.counted) if self.counted else mpq(0)

    @property
    def union_density(self):
        return mpq(self.nd + self.inc, self.counted) if self.counted else mpq(0)


# ----------------------------------------------------------------- bounds

def bounds(net, grid, strict=False):
    """Upper-bound formulas (and the plain ndf-or-bdz sum used by lower bounds)."""
    info = nw.validate(net)
    m = len(grid.M) if isinstance(grid, Grid) else len(grid)
    if strict and not info.wsb_ok:
        raise NotApplicable("a layer is neither a bias layer nor well-structured biaffine")
    out = {"bias_ndf_bound": None, "general_union_bound": None, "inc_bound": None}
    total_ndf = 0
    total_union = 0
    total_inc = 0
    total_all = 0
    for l, layer in enumerate(net.layers, 1):
        s_l, s_next = info.S[l - 1], info.S[l]
        for act in layer.activations:
            bp = act.breakpoints()
            total_ndf += len(bp.ndf)
            total_union += len(bp.ndf | (bp.bdz if s_next else frozenset()))
            total_inc += len((bp.ndf if s_l else frozenset()) | (bp.bdz if s_next else frozenset()))
            total_all += len(bp.ndf | bp.bdz)
    if info.has_bias:
        out["bias_ndf_bound"] = mpq(total_ndf, m)
    if info.wsb_ok:
        out["general_union_bound"] = mpq(total_union, m)
        out["inc_bound"] = mpq(total_inc, m)
    out["ndf_or_bdz_sum"] = mpq(total_all, m)
    return out


# -------------------------------------------------------------- symmetry

def _canon_terms(terms, xmap, pmap):
    acc = Counter()
    for t in terms:
        key = (tuple(sorted(xmap[j] for j in t.xs)), tuple(sorted(pmap[k] for k in t.ps)))
        acc[key] += t.coef
    return tuple(sorted((k, v) for k, v in acc.items() if v != 0))


def is_automorphism(net, perm):
    """Does relabelling parameters by ``perm`` (global index map) leave z_L unchanged?"""
    xmap = list(range(len(net.input_datum)))
    for l, layer in enumerate(net.layers, 1):
        off = net.offsets[l - 1]
        ident = {k: off + k for k in range(layer.n_params)}
        moved = {k: perm.get(off + k, off + k) for k in range(layer.n_params)}
        ident_x = list(range(layer.in_dim))
        table = {}
        for i, (terms, act) in enumerate(zip(layer.taus, layer.activations)):
            table.setdefault((_canon_terms(terms, ident_x, ident), act), []).append(i)
        rho = [None] * layer.out_dim
        used = set()
        for i, (terms, act) in enumerate(zip(layer.taus, layer.activations)):
            key = (_canon_terms(terms, xmap, moved), act)
            cands = [j for j in table.get(key, []) if j not in used]
            if not cands:
                return False
            j = i if i in cands else cands[0]
            rho[i] = j
            used.add(j)
        xmap = rho
    return all(rho[i] == i for i in range(net.out_dim))


def free_output_biases(net):
    """Global indices of output biases that cannot affect any verdict."""
    last = net.layers[-1]
    if not last.has_bias:
        return []
    out = []
    for i, act in enumerate(last.activations):
        if act.is_affine and not act.overrides:
            out.append(net.global_param(net.L, last.bias_index(i)))
    return out


def symmetry_groups(net, params):
    """Partition ``params`` into classes whose members may be permuted freely."""
    parent = {p: p for p in params}

    def find(p):
        while parent[p] != p:
            parent[p] = parent[parent[p]]
            p = parent[p]
        return p

    ps = sorted(params)
    for a in range(len(ps)):
        for b in range(a + 1, len(ps)):
            p, q = ps[a], ps[b]
            if find(p) == find(q):
                continue
            if is_automorphism(net, {p: q, q: p}):
                parent[find(q)] = find(p)
    groups = {}
    for p in ps:
        groups.setdefault(find(p), []).append(p)
    return sorted(groups.values())


def _orbit_points(M, W, groups, fixed):
    """Yield (w, weight) over orbit representatives."""
    per_group = []
    for g in groups:
        opts = []
        for combo in combinations_with_replacement(M, len(g)):
            weight = math.factorial(len(g))
            for c in Counter(combo).values():
                weight //= math.factorial(c)
            opts.append((combo, weight))
        per_group.append(opts)
    for choice in product(*per_group):
        w = [None] * W
        weight = 1
        for g, (combo, wt) in zip(groups, choice):
            for p, v in zip(g, combo):
                w[p] = v
            weight *= wt
        for p, v in fixed.items():
            w[p] = v
        yield tuple(w), weight


# ------------------------------------------------------------------- scan

def _classify_chunk(args):
    net, points, budget, bias, consistent, theorems = args
    out = []
    for w in points:
        pt = cf._Point(net, w)
        out.append(cf.verdict_at(pt, budget, bias, consistent, theorems))
    return out


def scan(net, grid, oracle_budget=orc.Budget(), frozen=None, log_points=False,
         cap=DEFAULT_CAP, symmetry=True, jobs=1, theorems=True):
    """Classify every point of M^W (frozen coordinates held at their given values).

    ``theorems=False`` classifies with the oracle alone, for cross-checking.
    """
    if not isinstance(grid, Grid):
        grid = Grid(tuple(grid), net.W)
    if grid.W != net.W:
        raise ValueError(f"grid has W={grid.W}, network has W={net.W}")
    M = grid.M
    W = net.W
    frozen = {int(k): Q(v) for k, v in (frozen or {}).items()}
    free = [p for p in range(W) if p not in frozen]
    omega = len(M) ** len(free)
    reduce = symmetry and not log_points
    fixed = dict(frozen)
    multiplier = 1
    pinned = []
    neutral = [p for p in free_output_biases(net) if p in free]
    if reduce:
        for p in neutral:
            pinned.append(p)
            fixed[p] = M[0]
            multiplier *= len(M)
    movable = [p for p in free if p not in fixed]
    groups = symmetry_groups(net, movable) if reduce else [[p] for p in movable]
    work = 1
    for g in groups:
        work *= math.comb(len(M) + len(g) - 1, len(g))
    if work > cap:
        raise GridTooLarge(f"{work} points to classify exceed the cap {cap}")
    if not log_points:
        oracle_budget = replace(oracle_budget, witness=False)
    bias = nw.has_bias(net)
    consistent = cf._all_consistent(net)
    pts = list(_orbit_points(M, W, groups, fixed))
    if jobs > 1 and len(pts) > 1000:
        size = -(-len(pts) // (jobs * 4))
        chunks = [[w for w, _ in pts[k:k + size]] for k in range(0, len(pts), size)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = [r for part in ex.map(_classify_chunk,
                                            [(net, c, oracle_budget, bias, consistent, theorems) for c in chunks])
                       for r in part]
    else:
        results = _classify_chunk((net, [w for w, _ in pts], oracle_budget, bias, consistent,
                                   theorems))
    verdicts = Counter()
    certs = Counter()
    rows = [] if log_points else None
    for (w, weight), (verdict, cert, wit) in zip(pts, results):
        weight *= multiplier
        verdicts[verdict] += weight
        certs[cert] += weight
        if rows is not None:
            rows.append((w, verdict, cert, wit))
    nd = verdicts[cf.NONDIFF_CLARKE] + verdicts[cf.NONDIFF_NOT_CLARKE]
    return CensusReport(grid, omega, nd, verdicts[cf.DIFF_INCORRECT], verdicts[cf.UNKNOWN],
                        verdicts, certs, bounds(net, grid), points=rows, classified=len(pts),
                        reductions={"pinned_output_biases": pinned,
                                    "symmetric_groups": [g for g in groups if len(g) > 1],
                                    "frozen": sorted(frozen)},
                        neutral=len(neutral))


# ----------------------------------------------------------------- verify

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerifyResult:
    passed: bool
    checks: tuple

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]


def verify(report, lower_bound=(), allow_unknown=False):
    """Compare the tallies with every applicable bound.

    ``lower_bound`` is (tallied set "nd"|"inc", factor, sum kind "bias_ndf"|"union_all").
    """
    if report.unknown and not allow_unknown:
        raise IncompleteReport(f"{report.unknown} points have verdict Unknown")
    b = report.bounds
    checks = []
    if report.unknown:
        checks.append(Check("unknown points excluded", True, str(report.unknown)))
    nd, inc, un = report.nd_density, report.inc_density, report.union_density
    if b.get("bias_ndf_bound") is not None:
        checks.append(Check("nd density <= bias ndf bound", nd <= b["bias_ndf_bound"],
                            f"{fmt(nd)} <= {fmt(b['bias_ndf_bound'])}"))
        checks.append(Check("incorrect set empty (bias network)", report.inc == 0,
                            f"|inc| = {report.inc}"))
    if b.get("general_union_bound") is not None:
        checks.append(Check("nd+inc density <= general union bound",
                            un <= b["general_union_bound"],
                            f"{fmt(un)} <= {fmt(b['general_union_bound'])}"))
    if b.get("inc_bound") is not None:
        checks.append(Check("inc density <= inc bound", inc <= b["inc_bound"],
                            f"{fmt(inc)} <= {fmt(b['inc_bound'])}"))
    lower_bound = lower_bound or report.lower_bound
    if lower_bound:
        which, factor, kind = lower_bound
        total = b["bias_ndf_bound"] if kind == "bias_ndf" else b["ndf_or_bdz_sum"]
        if total is None:
            raise NotApplicable(f"no {kind} sum for this network")
        dens = nd if which == "nd" else inc
        target = factor * total
        checks.append(Check(f"{which} density >= {fmt(factor)} * {kind} sum", dens >= target,
                            f"{fmt(dens)} >= {fmt(target)}"))
    return VerifyResult(all(c.passed for c in checks), tuple(checks))


# -------------------------------------------------------------------- csv

def _witness_text(wit):
    if wit is None:
        return ""
    if isinstance(wit, tuple) and wit and isinstance(wit[0], tuple):
        return "gradient " + ";".join(" ".join(fmt(x) for x in row) for row in wit)
    if isinstance(wit, tuple):
        return f"neuron({wit[0]};{wit[1] + 1})"
    if isinstance(wit, dict) and wit.get("kind") == "antipodal":
        d = " ".join(fmt(x) for x in wit["direction"])
        sp = " ".join(fmt(x) for x in wit["slope_plus"])
        sm = " ".join(fmt(x) for x in wit["slope_minus"])
        return f"antipodal d=[{d}] +:[{sp}] -:[{sm}]"
    return str(wit.get("kind", "")) if isinstance(wit, dict) else str(wit)


def summary_rows(report, result=None):
    rows = [("omega", str(report.omega)), ("classified", str(report.classified)),
            ("nd", str(report.nd)), ("inc", str(report.inc)), ("unknown", str(report.unknown)),
            ("nd_density", report._scaled(report.nd)),
            ("inc_density", report._scaled(report.inc))]
    for k in ("bias_ndf_bound", "general_union_bound", "inc_bound", "ndf_or_bdz_sum"):
        v = report.bounds.get(k)
        rows.append((k, "n/a" if v is None else fmt(v)))
    for v in cf.VERDICTS:
        rows.append((f"verdict:{v}", str(report.verdicts.get(v, 0))))
    if result is not None:
        for c in result.checks:
            rows.append((f"check:{c.name}", ("PASS " if c.passed else "FAIL ") + c.detail))
        rows.append(("verify", "PASS" if result.passed else "FAIL"))
    return rows


def to_csv(report, result=None):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    W = report.grid.W
    if report.points is not None:
        wr.writerow([f"w{k + 1}" for k in range(W)] + ["verdict", "certificate", "witness"])
        for w, verdict, cert, wit in report.points:
            wr.writerow([fmt(x) for x in w] + [verdict, cert, _witness_text(wit)])
    for k, v in summary_rows(report, result):
        wr.writerow([f"# {k}", v])
    return buf.getvalue()
