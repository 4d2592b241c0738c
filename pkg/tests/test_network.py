import json
import random

import pytest
from gmpy2 import mpq

from adcert import fixtures as fx
from adcert import network as nw
from adcert import scalarfun as sf
from adcert.errors import BadBiaffinePattern, BadParams, DimMismatch, LengthMismatch, PreconditionViolated
from netgen import random_bias_net, random_mixed_net, random_point, grid_of


def relu_net():
    return nw.Network([nw.affine_bias_layer(1, 1, [[(1, (0,), (0,))]], [sf.catalog("relu")])], (1,))


class TestConstruction:
    def test_bias_layer_params(self):
        net = relu_net()
        assert net.W == 2
        assert nw.evaluate(net, [mpq(2), mpq(-3)]) == (0,)
        assert nw.evaluate(net, [mpq(2), mpq(1)]) == (3,)

    def test_wsb_pattern_enforced(self):
        with pytest.raises(BadBiaffinePattern):
            nw.wsb_layer(2, 1, [[[1], [1]]], [0], [sf.catalog("relu")])

    def test_dim_mismatch(self):
        l1 = nw.dense_bias_layer(1, 2, [sf.catalog("relu")] * 2)
        l2 = nw.dense_bias_layer(3, 1, [sf.catalog("identity")])
        with pytest.raises(DimMismatch):
            nw.Network([l1, l2], (1,))

    def test_point_length(self):
        with pytest.raises(LengthMismatch):
            nw.evaluate(relu_net(), [1])

    def test_validate_tags(self):
        net, _ = fx.fixture("thm7_ndf_lb_zeros", n=4, alpha=1)
        info = nw.validate(net)
        assert not info.has_bias and info.wsb_ok
        assert info.S == (True, True, False, False)
        assert nw.validate(relu_net()).S == (False, False)

    def test_dict_roundtrip(self):
        rng = random.Random(3)
        for _ in range(10):
            net = random_mixed_net(rng, grid_of(3))
            back = nw.from_dict(json.loads(json.dumps(net.to_dict())))
            for _ in range(5):
                w = random_point(rng, net)
                assert nw.evaluate(back, w) == nw.evaluate(net, w)


class TestFixtures:
    def test_intro_identity_is_identity(self):
        net, _ = fx.fixture("intro_identity")
        for x in (-2, mpq(-1, 3), 0, mpq(5, 7), 4):
            assert nw.evaluate(net, [x]) == (x,)

    def test_intro_half(self):
        net, _ = fx.fixture("intro_half")
        assert nw.evaluate(net, [mpq(-2)]) == (-1,)
        assert nw.evaluate(net, [mpq(2)]) == (2,)

    @pytest.mark.parametrize("M,lam", [((-1, 0, 1), 7), ((-2, mpq(1, 2), 3, 5), mpq(-3, 2))])
    def test_grid_adversary_is_affine_slope_one(self, M, lam):
        net, sheet = fx.fixture("intro_grid_adversary", M=M, lam=lam)
        off = sheet.facts["offset"]
        for x in list(sheet.grid) + [mpq(-17, 3), mpq(11, 2), mpq(1, 9)]:
            assert nw.evaluate(net, [x]) == (x + off,)

    def test_thm3_structure(self):
        net, sheet = fx.fixture("thm3_bias_lb", M="16eq", n=3, alpha=2)
        assert net.N == 4 and nw.validate(net).has_bias
        assert all(len(a.breakpoints().ndf) == 2 for a in net.layers[0].activations)
        assert sheet.facts["nd_density"] == mpq(1352, 4096)

    @pytest.mark.parametrize("name", ["thm7_ndf_lb_kinks", "thm7_ndf_lb_zeros",
                                      "thm9_inc_lb_kinks", "thm9_inc_lb_zeros"])
    @pytest.mark.parametrize("alpha", [1, 2])
    def test_lower_bound_families_validate(self, name, alpha):
        net, sheet = fx.fixture(name, n=4, alpha=alpha)
        info = nw.validate(net)
        assert info.wsb_ok and not info.has_bias
        assert net.layers[-1].has_bias
        assert all(not layer.has_bias for layer in net.layers[:-1])
        for act in net.layers[0].activations:
            bp = act.breakpoints()
            assert len(bp.ndf | bp.bdz) == alpha

    def test_thm9_kinks_function(self):
        net, _ = fx.fixture("thm9_inc_lb_kinks", n=4, alpha=2)
        rng = random.Random(0)
        for _ in range(20):
            w = random_point(rng, net)
            assert nw.evaluate(net, w) == (w[-1],)

    def test_preconditions(self):
        with pytest.raises(PreconditionViolated):
            fx.fixture("thm7_ndf_lb_kinks", n=3)
        with pytest.raises(PreconditionViolated):
            fx.fixture("thm7_ndf_lb_kinks", M="4eq", n=4, alpha=2)
        with pytest.raises(BadParams):
            fx.fixture("no_such_fixture")

    def test_spec_parsing(self):
        name, params = fx.parse_fixture_spec("thm3_bias_lb,M=16eq,n=3,a=2")
        assert name == "thm3_bias_lb" and params == {"M": "16eq", "n": 3, "alpha": 2}
        assert len(fx.parse_grid("16eq")) == 16
        assert fx.parse_grid("equispaced:-1:1:5") == (-1, mpq(-1, 2), 0, mpq(1, 2), 1)
        assert fx.parse_grid("-1,0,1") == (-1, 0, 1)


def test_random_bias_nets_stay_small():
    rng = random.Random(1)
    for _ in range(30):
        net = random_bias_net(rng, grid_of(5))
        assert net.W <= 4 and net.L <= 3 and nw.has_bias(net)
