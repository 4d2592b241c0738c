"""Verdicts at a parameter point: is the AD output the derivative, a Clarke limit, or neither?

The fast paths use structural facts about bias networks and local sufficient
conditions.  Anything they cannot settle goes to the oracle.
"""

from dataclasses import dataclass

from . import ad
from . import network as nw
from . import oracle as orc
from . import scalarfun as sf
from .errors import RequiresBias

DIFF_CORRECT = "DiffCorrect"
DIFF_INCORRECT = "DiffIncorrect"
NONDIFF_CLARKE = "NonDiffClarke"
NONDIFF_NOT_CLARKE = "NonDiffNotClarke"
UNKNOWN = "Unknown"

VERDICTS = (DIFF_CORRECT, DIFF_INCORRECT, NONDIFF_CLARKE, NONDIFF_NOT_CLARKE, UNKNOWN)

CERT_BIAS_EQUIV = "ThmBiasEquivalence"
CERT_BIAS_CLARKE = "ThmBiasClarke"
CERT_SUFF_STD = "SuffStd"
CERT_SUFF_CLARKE = "SuffClarke"
CERT_ORACLE = "Oracle"
CERT_NONE = "None"


@dataclass(frozen=True)
class Classification:
    verdict: str
    derivative_claim: tuple  # the AD jacobian at w
    certificate: str
    witness: object = None

    @property
    def nondifferentiable(self):
        return self.verdict in (NONDIFF_CLARKE, NONDIFF_NOT_CLARKE)


@dataclass(frozen=True)
class BiasDecision:
    differentiable: bool
    gradient: tuple = None
    witness: tuple = None  # (l, i), 1-based layer


def _all_consistent(net):
    return all(sf.is_consistent(a) for layer in net.layers for a in set(layer.activations))


class _Point:
    """Shared state for the checks at one point."""

    def __init__(self, net, w):
        self.net = net
        self.w = w
        self.loc = orc.Local(net, w)

    def hidden_nonzero(self, l, i):
        return any(self.loc.hidden(l, i))

    def in_set(self, which):
        """Touched neurons whose y lies in ndf/ncdf of their activation."""
        out = []
        for t in self.loc.touched:
            bps = self.net.activation(t.l, t.i).breakpoints()
            if t.b in getattr(bps, which):
                out.append(t)
        return out


def decide_bias(net, w):
    """Bias networks: non-differentiable iff some y_{l,i} hits ndf with a nonzero hidden partial."""
    if not nw.has_bias(net):
        raise RequiresBias("decide_bias needs bias parameters in every layer")
    pt = _Point(net, nw.check_point(net, w))
    return _decide_bias(pt)


def _decide_bias(pt):
    for t in pt.in_set("ndf"):
        if pt.hidden_nonzero(t.l, t.i):
            return BiasDecision(False, witness=(t.l, t.i))
    return BiasDecision(True, gradient=pt.loc.ad_jacobian)


def _std_holds(pt):
    for t in pt.in_set("ndf"):
        layer = pt.net.layers[t.l - 1]
        if not layer.has_bias or pt.hidden_nonzero(t.l, t.i):
            return False
    return True


def _clarke_holds(pt, consistent=None):
    if not (_all_consistent(pt.net) if consistent is None else consistent):
        return False
    return all(pt.net.layers[t.l - 1].has_bias for t in pt.in_set("ncdf"))


def sufficient_std(net, w):
    """Certificate string when AD is guaranteed to equal the true derivative, else None."""
    pt = _Point(net, nw.check_point(net, w))
    return CERT_SUFF_STD if _std_holds(pt) else None


def sufficient_clarke(net, w):
    """Certificate string when AD is guaranteed to be a Clarke limit, else None."""
    pt = _Point(net, nw.check_point(net, w))
    return CERT_SUFF_CLARKE if _clarke_holds(pt) else None


def _from_oracle(pt, budget):
    v = orc.oracle_differentiability(pt.net, pt.w, budget, loc=pt.loc)
    claim = pt.loc.ad_jacobian
    if v.status == orc.DIFFERENTIABLE:
        verdict = DIFF_CORRECT if v.gradient == claim else DIFF_INCORRECT
        return verdict, CERT_ORACLE, v.gradient
    if v.status == orc.NONDIFFERENTIABLE:
        return _clarke_verdict(pt, budget, v.witness)
    return UNKNOWN, CERT_NONE, None


def _clarke_verdict(pt, budget, witness):
    c = orc.clarke_check(pt.net, pt.w, pt.loc.ad_jacobian, budget, loc=pt.loc)
    if c is None:
        return UNKNOWN, CERT_NONE, witness
    return (NONDIFF_CLARKE if c else NONDIFF_NOT_CLARKE), CERT_ORACLE, witness


def verdict_at(pt, budget, bias=None, consistent=None, theorems=True):
    """(verdict, certificate, witness) following the theorem precedence.

    With ``theorems=False`` every touched point goes straight to the oracle.
    """
    if not pt.loc.touched:
        if not theorems:
            return DIFF_CORRECT, CERT_ORACLE, None
        return DIFF_CORRECT, (CERT_BIAS_EQUIV if bias else CERT_SUFF_STD), None
    if not theorems:
        return _from_oracle(pt, budget)
    if bias is None:
        bias = nw.has_bias(pt.net)
    if bias:
        dec = _decide_bias(pt)
        if dec.differentiable:
            return DIFF_CORRECT, CERT_BIAS_EQUIV, None
        if consistent is None:
            consistent = _all_consistent(pt.net)
        if consistent:
            return NONDIFF_CLARKE, CERT_BIAS_CLARKE, dec.witness
        return _clarke_verdict(pt, budget, dec.witness)
    if _std_holds(pt):
        return DIFF_CORRECT, CERT_SUFF_STD, None
    if consistent is None:
        consistent = _all_consistent(pt.net)
    if consistent and _clarke_holds(pt, True):
        v = orc.oracle_differentiability(pt.net, pt.w, budget, loc=pt.loc)
        if v.status == orc.DIFFERENTIABLE:
            return DIFF_CORRECT, CERT_SUFF_CLARKE, None
        if v.status == orc.NONDIFFERENTIABLE:
            return NONDIFF_CLARKE, CERT_SUFF_CLARKE, v.witness
        return UNKNOWN, CERT_NONE, None
    return _from_oracle(pt, budget)


def classify(net, w, oracle_budget=orc.Budget()):
    w = nw.check_point(net, w)
    pt = _Point(net, w)
    verdict, cert, witness = verdict_at(pt, oracle_budget)
    return Classification(verdict, pt.loc.ad_jacobian, cert, witness)
