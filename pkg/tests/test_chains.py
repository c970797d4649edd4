import random
from fractions import Fraction

import pytest

from chaintorque import words
from chaintorque.chains import (
    ChainError,
    ChainMap,
    OneChain,
    boundary,
    chain_between,
    format_chain,
    jacobian,
    lift_translate,
    parse_chain,
)
from chaintorque.graphs import transition_matrix
from chaintorque.words import word_from_text

from conftest import read_fixture


def wft(text, gm):
    return word_from_text(text, gm.graph.generator_names)


class TestLiftTranslate:
    def test_tree_edge_label(self, theta_id):
        assert lift_translate(theta_id.graph, (), "a") == ()

    def test_generator_edge_label(self, theta_id):
        assert lift_translate(theta_id.graph, (), "b") == (1,)
        assert lift_translate(theta_id.graph, (), "c") == (2,)

    def test_equivariance(self, theta_id):
        g = (1, -2, 1)
        assert lift_translate(theta_id.graph, g, "c") == words.multiply(g, (2,))


class TestChainBetween:
    def test_theta_worked_chain(self, theta_id):
        g = theta_id.graph
        K = wft("x1 x2 x1^-1 x2^-1", theta_id)
        rho = chain_between(g, ((), "R"), (K, "R"))
        expected = parse_chain(read_fixture("theta_rho.chain"), g)
        assert rho == expected
        assert all(abs(c) == 1 for c in rho.terms.values())

    def test_rose_worked_chain(self, rose3):
        g = rose3.graph
        w = wft("x1^2 x2 x3 x2^-1 x3^-1", rose3)
        rho = chain_between(g, ((), "v"), (w, "v"))
        expected = parse_chain(read_fixture("rose3_rho.chain"), g)
        assert rho == expected

    def test_same_vertex_gives_zero(self, theta_id):
        assert not chain_between(theta_id.graph, ((), "R"), ((), "R"))

    def test_boundary_is_difference_of_endpoints(self, theta_id):
        g = theta_id.graph
        rng = random.Random(5)
        for _ in range(25):
            letters = [rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 6))]
            gw = words.reduce(tuple(letters))
            v = rng.choice(["L", "R"])
            u = (gw, v)
            chain = chain_between(g, ((), "R"), u)
            b = boundary(g, chain)
            if u == ((), "R"):
                assert not b
            else:
                assert b.terms == {u: Fraction(1), ((), "R"): Fraction(-1)}
            assert all(abs(c) == 1 for c in chain.terms.values())


class TestApplyA:
    def test_identity_map_is_identity(self, theta_id):
        cm = ChainMap(theta_id)
        x = OneChain({((), "a"): 1, ((1,), "c"): Fraction(-2, 3)})
        assert cm.apply(x) == x

    def test_rose_edge_image(self, rose3):
        cm = ChainMap(rose3)
        x = OneChain.single((), "c")
        assert cm.apply(x) == OneChain({((), "a"): 1, ((1,), "b"): 1})

    def test_equivariance(self, rose3):
        cm = ChainMap(rose3)
        rng = random.Random(11)
        for _ in range(20):
            gw = words.reduce(tuple(rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(4)))
            eid = rng.choice(["a", "b", "c"])
            x = OneChain.single(gw, eid, Fraction(rng.randint(1, 5)))
            lhs = cm.apply(x)
            rhs = cm.apply(OneChain.single((), eid, x.terms[(gw, eid)])).translate(
                cm.phi.apply(gw)
            )
            assert lhs == rhs

    def test_geodesic_image_boundary(self, rose3):
        # A [u,v] and [f(u), f(v)] agree (boundaries match and the cover is
        # a tree, so after cancellation the chains are equal)
        g = rose3.graph
        cm = ChainMap(rose3)
        rng = random.Random(3)
        for _ in range(15):
            gw = words.reduce(tuple(rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(5)))
            u, v = ((), "v"), (gw, "v")
            if u == v:
                continue
            lhs = cm.apply(chain_between(g, u, v))
            rhs = chain_between(g, cm.vertex_image(u), cm.vertex_image(v))
            assert boundary(g, lhs).terms == boundary(g, rhs).terms
            assert lhs == rhs

    def test_fixed_chain(self, rose3_fix):
        g = rose3_fix.graph
        cm = ChainMap(rose3_fix)
        w = word_from_text("x1^2 x2 x3 x2^-1 x3^-1", g.generator_names)
        rho = chain_between(g, ((), "v"), (w, "v"))
        assert cm.apply_rel(rho, frozenset()) == rho


class TestProjectRel:
    def test_supported_on_H_dies(self, theta_id):
        x = OneChain({((), "a"): 1, ((1,), "a"): -1})
        assert not x.project_rel({"a"})

    def test_disjoint_unchanged(self, theta_id):
        x = OneChain({((), "b"): 1})
        assert x.project_rel({"a"}) == x

    def test_mixed(self, theta_id):
        x = OneChain({((), "a"): 2, ((), "b"): 3})
        assert x.project_rel({"a"}) == OneChain({((), "b"): 3})


class TestNorms:
    def test_worked_chain_norm(self, theta_id):
        rho = parse_chain(read_fixture("theta_rho.chain"), theta_id.graph)
        assert rho.norm_sq() == 6

    def test_inner_consistency(self):
        x = OneChain({((), "a"): Fraction(1, 2), ((1,), "b"): -2})
        assert x.inner(x) == x.norm_sq()

    def test_translation_isometry(self):
        x = OneChain({((), "a"): 1, ((1,), "b"): 2})
        y = OneChain({((), "a"): 3, ((2,), "b"): -1})
        g = (1, 2, -1)
        assert x.translate(g).inner(y.translate(g)) == x.inner(y)


class TestJacobian:
    def test_rose_worked_matrix(self, rose3):
        J = jacobian(rose3)
        ctx = J.context
        assert J.entries[0][1].terms == {(): 1}
        assert J.entries[1][2].terms == {(): 1}
        assert J.entries[2][0].terms == {(): 1}
        assert J.entries[2][1].terms == {(1,): 1}
        zero_cells = [(0, 0), (0, 2), (1, 0), (1, 1), (2, 2)]
        for i, j in zero_cells:
            assert not J.entries[i][j]

    def test_identity_jacobian(self, theta_id):
        J = jacobian(theta_id)
        for i in range(3):
            for j in range(3):
                assert J.entries[i][j].terms == ({(): 1} if i == j else {})

    def test_transition_is_l1_mass(self, rose3, theta_fix, rose2_fib):
        for gm in (rose3, theta_fix, rose2_fib):
            J = jacobian(gm)
            M = transition_matrix(gm)
            eids = gm.graph.edge_ids
            for i in range(len(eids)):
                for j in range(len(eids)):
                    mass = sum(abs(c) for c in J.entries[i][j].terms.values())
                    assert M[i][j] == mass


class TestChainFiles:
    def test_round_trip(self, theta_id):
        g = theta_id.graph
        rho = parse_chain(read_fixture("theta_rho.chain"), g)
        assert parse_chain(format_chain(rho, g), g) == rho

    def test_reversal_token(self, theta_id):
        g = theta_id.graph
        assert parse_chain("-1 e a", g) == parse_chain("1 e ~a", g)

    def test_bad_edge(self, theta_id):
        with pytest.raises(ChainError):
            parse_chain("1 e zz", theta_id.graph)
