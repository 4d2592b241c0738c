import csv
import io

import pytest
from gmpy2 import mpq

from adcert import census as cs
from adcert import certify as cf
from adcert import fixtures as fx
from adcert import network as nw
from adcert import scalarfun as sf
from adcert.errors import GridTooLarge, IncompleteReport, NotApplicable


def relu_sum():
    l1 = nw.affine_bias_layer(1, 1, [[(1, (0,), (0,))]], [sf.catalog("relu")])
    return nw.Network([l1], (1,))


class TestScan:
    def test_relu_sum_tight(self):
        net = relu_sum()
        r = cs.scan(net, cs.Grid((-1, 0, 1), net.W))
        assert (r.omega, r.nd, r.inc) == (9, 3, 0)
        assert r.nd_density == mpq(1, 3) == r.bounds["bias_ndf_bound"]
        assert cs.verify(r).passed

    def test_reductions_do_not_change_tallies(self):
        net, sheet = fx.fixture("thm3_bias_lb", M="6eq", n=2, alpha=2)
        grid = cs.Grid(sheet.grid, net.W)
        fast = cs.scan(net, grid)
        slow = cs.scan(net, grid, symmetry=False)
        logged = cs.scan(net, grid, log_points=True)
        assert fast.verdicts == slow.verdicts == logged.verdicts
        assert fast.classified < slow.classified == grid.size
        assert len(logged.points) == grid.size

    def test_symmetry_groups(self):
        net, _ = fx.fixture("thm9_inc_lb_zeros", n=4, alpha=1)
        groups = cs.symmetry_groups(net, range(net.W))
        assert [0, 1, 2, 3] in groups
        assert cs.free_output_biases(net) == [net.W - 1]

    def test_asymmetric_not_grouped(self):
        l1 = nw.affine_bias_layer(1, 2, [[(1, (0,), (0,)), (2, (0,), (1,))]],
                                  [sf.catalog("relu")])
        net = nw.Network([l1], (1,))
        assert cs.symmetry_groups(net, [0, 1]) == [[0], [1]]

    def test_oracle_only_agrees(self):
        net, sheet = fx.fixture("thm7_ndf_lb_kinks", M="6eq", n=4, alpha=1)
        grid = cs.Grid(sheet.grid, net.W)
        a = cs.scan(net, grid)
        b = cs.scan(net, grid, theorems=False)
        assert (a.nd, a.inc) == (b.nd, b.inc)

    def test_cap(self):
        net, sheet = fx.fixture("thm3_bias_lb")
        with pytest.raises(GridTooLarge):
            cs.scan(net, cs.Grid(sheet.grid, net.W), cap=100)

    def test_grid_adversary_all_incorrect(self):
        net, sheet = fx.fixture("intro_grid_adversary")
        r = cs.scan(net, cs.Grid(sheet.grid, net.W))
        assert r.inc == r.omega == 3 and r.nd == 0


class TestBoundsAndVerify:
    def test_bias_bound(self):
        net, sheet = fx.fixture("thm3_bias_lb", M="16eq", n=3, alpha=2)
        b = cs.bounds(net, sheet.grid)
        assert b["bias_ndf_bound"] == mpq(6, 16)
        assert b["general_union_bound"] == mpq(6, 16)
        assert b["inc_bound"] == 0

    def test_general_bounds(self):
        net, sheet = fx.fixture("thm7_ndf_lb_zeros", n=4, alpha=2)
        b = cs.bounds(net, sheet.grid)
        # h contributes alpha bdz points per neuron (S_2 full), ReLUs one kink each
        assert b["general_union_bound"] == mpq(4 * 2 + 4, 16)
        assert b["bias_ndf_bound"] is None

    def test_not_applicable(self):
        net, sheet = fx.fixture("intro_identity")
        with pytest.raises(NotApplicable):
            cs.bounds(net, (-1, 0, 1), strict=True)

    def test_unknown_blocks_verify(self):
        net = relu_sum()
        r = cs.scan(net, cs.Grid((-1, 0, 1), net.W))
        r.unknown = 1
        with pytest.raises(IncompleteReport):
            cs.verify(r)
        assert cs.verify(r, allow_unknown=True).checks[0].name == "unknown points excluded"

    def test_lower_bound_check(self):
        net, sheet = fx.fixture("thm3_bias_lb", M="16eq", n=3, alpha=2)
        r = cs.scan(net, cs.Grid(sheet.grid, net.W))
        res = cs.verify(r, sheet.lower_bound)
        assert res.passed
        assert r.nd_density == mpq(1352, 4096)


class TestCsv:
    def test_points_and_summary(self):
        net = relu_sum()
        r = cs.scan(net, cs.Grid((-1, 0, 1), net.W), log_points=True)
        text = cs.to_csv(r, cs.verify(r))
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["w1", "w2", "verdict", "certificate", "witness"]
        assert len([row for row in rows[1:] if not row[0].startswith("#")]) == 9
        assert ["-1/1", "1/1", cf.NONDIFF_CLARKE, cf.CERT_BIAS_CLARKE, "neuron(1;1)"] in rows
        assert ["# nd_density", "3/9"] in rows
        assert ["# verify", "PASS"] in rows

    def test_deterministic(self):
        net, sheet = fx.fixture("thm7_ndf_lb_kinks", M="6eq", n=4, alpha=1)
        grid = cs.Grid(sheet.grid, net.W)
        a = cs.to_csv(cs.scan(net, grid, log_points=True))
        b = cs.to_csv(cs.scan(net, grid, log_points=True))
        assert a == b
