"""Command-line front end: ``adcert {eval,ad,classify,census,fixture,bounds}``."""

import argparse
import json
import sys
from dataclasses import dataclass

from . import ad
from . import census as cs
from . import certify as cf
from . import fixtures as fx
from . import network as nw
from . import oracle as orc
from .errors import AdcertError
from .rational import fmt, parse_list

VERBS = ("eval", "ad", "classify", "census", "fixture", "bounds")
_VALUED = ("--net", "--fixture", "--at", "--grid", "--out", "--jobs", "--seed", "--directions")

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Command:
    verb: str
    net: str = None
    fixture: str = None
    at: str = None
    grid: str = None
    out: str = None
    log_points: bool = False
    allow_unknown: bool = False
    jobs: int = 1
    seed: int = 0
    directions: int = 16
    decimal: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser():
    p = _Parser(prog="adcert", description="Exact AD certification for piecewise networks.")
    p.add_argument("verb", choices=VERBS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--net", help="network config (JSON)")
    src.add_argument("--fixture", help="NAME[,key=value...], e.g. thm3_bias_lb,M=16eq,n=3,a=2")
    p.add_argument("--at", help="parameter point, comma-separated rationals")
    p.add_argument("--grid", help='"-1,0,1", "equispaced:lo:hi:count" or "16eq"')
    p.add_argument("--out", help="output path")
    p.add_argument("--log-points", action="store_true", help="one CSV row per grid point")
    p.add_argument("--allow-unknown", action="store_true",
                   help="exclude Unknown verdicts from the tallies instead of failing")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--directions", type=int, default=16, help="random probe directions")
    p.add_argument("--decimal", action="store_true", help="add a decimal display column")
    return p


def _glue_values(argv):
    # "--grid -1,0,1" would otherwise be read as an unknown option
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in _VALUED and k + 1 < len(argv) and argv[k + 1].startswith(("-", "−")) \
                and not argv[k + 1].startswith("--"):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
        else:
            out.append(a)
            k += 1
    return out


def parse_args(argv):
    ns = _parser().parse_args(_glue_values(list(argv)))
    if not (ns.net or ns.fixture):
        raise UsageError(_parser().format_usage() + "adcert: error: one of --net or --fixture is required")
    if ns.verb == "fixture" and not ns.fixture:
        raise UsageError("adcert: error: the fixture verb needs --fixture")
    if ns.verb in ("eval", "ad", "classify") and ns.at is None:
        raise UsageError(f"adcert: error: {ns.verb} needs --at")
    if ns.jobs < 1:
        raise UsageError("adcert: error: --jobs must be at least 1")
    return Command(ns.verb, ns.net, ns.fixture, ns.at, ns.grid, ns.out, ns.log_points,
                   ns.allow_unknown, ns.jobs, ns.seed, ns.directions, ns.decimal)


# ------------------------------------------------------------------- run

def _load(cmd):
    if cmd.fixture:
        name, params = fx.parse_fixture_spec(cmd.fixture)
        return fx.fixture(name, **params)
    with open(cmd.net) as fh:
        d = json.load(fh)
    if "network" in d:
        return nw.from_dict(d["network"]), None
    return nw.from_dict(d), None


def _grid_values(cmd, sheet):
    if cmd.grid:
        return fx.parse_grid(cmd.grid)
    if sheet is not None and sheet.grid:
        return tuple(sheet.grid)
    raise UsageError("adcert: error: --grid is required for this network")


def _num(q, decimal):
    return f"{fmt(q)}\t{float(q):.12g}" if decimal else fmt(q)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _row(vals):
    return ",".join(fmt(v) for v in vals)


def run(cmd, stdout=None):
    stdout = stdout or sys.stdout
    net, sheet = _load(cmd)
    budget = orc.Budget(directions=cmd.directions, seed=cmd.seed)
    if cmd.verb == "fixture":
        doc = {"network": net.to_dict(), "answer_sheet": sheet.to_dict()}
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", cmd.out)
        return EXIT_OK
    if cmd.verb in ("eval", "ad", "classify"):
        w = nw.check_point(net, parse_list(cmd.at))
        if cmd.verb == "eval":
            for v in nw.evaluate(net, w):
                print(_num(v, cmd.decimal), file=stdout)
        elif cmd.verb == "ad":
            for row in ad.reverse_ad(net, w).jacobian:
                print(_row(row), file=stdout)
                if cmd.decimal:
                    print(",".join(f"{float(v):.12g}" for v in row), file=stdout)
        else:
            c = cf.classify(net, w, budget)
            print(c.verdict, file=stdout)
            print(f"certificate: {c.certificate}", file=stdout)
            for row in c.derivative_claim:
                print(f"ad: {_row(row)}", file=stdout)
            if c.witness is not None:
                print(f"witness: {_witness(c.witness)}", file=stdout)
        return EXIT_OK
    M = _grid_values(cmd, sheet)
    grid = cs.Grid(M, net.W)
    if cmd.verb == "bounds":
        b = cs.bounds(net, grid, strict=True)
        for k in ("bias_ndf_bound", "general_union_bound", "inc_bound"):
            v = b[k]
            print(f"{k}: {'n/a' if v is None else _num(v, cmd.decimal)}", file=stdout)
        return EXIT_OK
    frozen = sheet.frozen if sheet is not None else None
    report = cs.scan(net, grid, budget, frozen=frozen, log_points=cmd.log_points, jobs=cmd.jobs)
    lower = sheet.lower_bound if sheet is not None else ()
    result = cs.verify(report, lower, allow_unknown=cmd.allow_unknown)
    if cmd.out:
        with open(cmd.out, "w") as fh:
            fh.write(cs.to_csv(report, result))
    for k, v in cs.summary_rows(report, result):
        print(f"{k}: {v}", file=stdout)
    return EXIT_OK if result.passed else EXIT_FAIL


def _witness(wit):
    return cs._witness_text(wit)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        _parser().print_help(sys.stderr)
        return EXIT_IO
    try:
        return run(cmd)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    except cs.IncompleteReport as exc:
        print(f"adcert: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, json.JSONDecodeError, AdcertError, ValueError) as exc:
        print(f"adcert: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
