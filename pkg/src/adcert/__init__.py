"""Exact certification of automatic differentiation on piecewise-polynomial networks."""

from .ad import forward_ad, piece_jacobian, reverse_ad
from .census import Grid, bounds, scan, verify
from .certify import classify, decide_bias, sufficient_clarke, sufficient_std
from .fixtures import fixture
from .network import Network, evaluate, forward, from_dict, validate
from .oracle import clarke_check, fd_grad, oracle_clarke_limit, oracle_differentiability
from .scalarfun import breakpoints, catalog, make_piecewise

__all__ = [
    "Grid", "Network", "bounds", "breakpoints", "catalog", "clarke_check", "classify",
    "decide_bias", "evaluate", "fd_grad", "fixture", "forward", "forward_ad", "from_dict",
    "make_piecewise", "oracle_clarke_limit", "oracle_differentiability", "piece_jacobian",
    "reverse_ad", "scan", "sufficient_clarke", "sufficient_std", "validate", "verify",
]
