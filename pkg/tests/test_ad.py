import random

from gmpy2 import mpq

from adcert import ad
from adcert import fixtures as fx
from adcert import network as nw
from adcert import scalarfun as sf
from netgen import grid_of, random_bias_net, random_mixed_net, random_point


class TestIntro:
    def test_identity_ad_is_zero_at_kink(self):
        net, _ = fx.fixture("intro_identity")
        assert ad.reverse_ad(net, [0]).jacobian == ((0,),)
        assert ad.reverse_ad(net, [mpq(1, 3)]).jacobian == ((1,),)

    def test_grid_adversary_ad_is_lambda(self):
        net, sheet = fx.fixture("intro_grid_adversary", M=(-1, 0, 1), lam=7)
        for x in sheet.grid:
            assert ad.reverse_ad(net, [x]).jacobian == ((7,),)
        assert ad.reverse_ad(net, [mpq(1, 2)]).jacobian == ((1,),)


class TestHiddenPartials:
    def test_output_neuron_partial_is_one(self):
        net, _ = fx.fixture("thm3_bias_lb")
        rep = ad.reverse_ad(net, [mpq(1, 3)] * net.W)
        assert rep.hidden_partials[(2, 0)] == (1,)

    def test_dead_downstream(self):
        relu = sf.catalog("relu")
        l1 = nw.affine_bias_layer(1, 0, [[(1, (0,), ())]], [sf.catalog("identity")])
        l2 = nw.affine_bias_layer(1, 0, [[(1, (0,), ())]], [relu])
        net = nw.Network([l1, l2], (1,))
        rep = ad.reverse_ad(net, [mpq(-5), mpq(0)])
        assert rep.hidden_partials[(1, 0)] == (0,)


class TestModesAgree:
    def test_forward_equals_reverse(self):
        rng = random.Random(5)
        for k in range(80):
            grid = grid_of(3 if k % 2 else 5)
            net = random_mixed_net(rng, grid) if k % 3 else random_bias_net(rng, grid)
            for _ in range(4):
                w = random_point(rng, net, grid if k % 2 else None)
                assert ad.forward_ad(net, w) == ad.reverse_ad(net, w).jacobian

    def test_piece_jacobian_of_active_assignment(self):
        rng = random.Random(6)
        for k in range(60):
            grid = grid_of(5)
            net = random_mixed_net(rng, grid)
            w = random_point(rng, net, grid)
            gamma = ad.active_assignment(net, w)
            assert ad.piece_jacobian(net, gamma, w) == ad.reverse_ad(net, w).jacobian

    def test_closure_assignments_contain_active(self):
        net, _ = fx.fixture("intro_identity")
        gammas = ad.closure_assignments(net, [0])
        assert ad.active_assignment(net, [0]) in gammas
        assert len(gammas) == 4
