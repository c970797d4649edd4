import random
from fractions import Fraction

import pytest

from chaintorque import words
from chaintorque.chains import ChainMap, OneChain, chain_between, parse_chain
from chaintorque.nielsen import (
    CertificationError,
    EnlargeBallError,
    NotGeometricError,
    QuasiFixedElement,
    build_trho,
    build_trho_hull,
    classify_chain,
    classify_nielsen,
    coboundary,
    coboundary_norm_sq,
    cochain_norm_sq,
    dot_export,
    overlap_candidates,
    overlap_data,
    realize,
    sigma_parity,
    sign_of,
)
from chaintorque.words import word_from_text

from conftest import read_fixture


def wft(text, gm):
    return word_from_text(text, gm.graph.generator_names)


@pytest.fixture
def theta_rho(theta_id):
    return parse_chain(read_fixture("theta_rho.chain"), theta_id.graph)


@pytest.fixture
def rose_rho(rose3):
    return parse_chain(read_fixture("rose3_rho.chain"), rose3.graph)


THETA_OVERLAPS = [
    "x2^-1 x1^-1",
    "x1 x2^-1 x1^-1",
    "x1 x2 x1 x2^-1 x1^-1",
    "x1 x2",
    "x1 x2 x1^-1",
    "x1 x2 x1^-1 x2^-1 x1^-1",
]


class TestOverlapCandidates:
    def test_theta_has_the_six_translates(self, theta_id, theta_rho):
        found = {g for g, _ in overlap_candidates(theta_rho)}
        expected = {wft(t, theta_id) for t in THETA_OVERLAPS}
        assert found == expected

    def test_single_edge_chain_has_none(self, rose3):
        assert overlap_candidates(OneChain.single((), "a")) == set()

    def test_rose_contains_worked_neighbors(self, rose3, rose_rho):
        found = overlap_candidates(rose_rho)
        gs = {g for g, _ in found}
        g1 = wft("x1", rose3)
        g3 = wft("x1^2 x2 x3 x2^-1 x1^-2", rose3)
        assert g1 in gs and g3 in gs
        assert (g1, ((1,), "a")) in found
        shared_g3 = [s for g, s in found if g == g3]
        assert shared_g3 == [(wft("x1^2 x2 x3 x2^-1", rose3), "b")]


class TestClassification:
    def test_theta_geometric(self, theta_id):
        u = ((), "R")
        v = (wft("x1 x2 x1^-1 x2^-1", theta_id), "R")
        cert = classify_nielsen(theta_id, frozenset(), u, v)
        assert cert.verdict == "geometric"
        assert cert.d == 6
        assert cert.endpoints_fixed is True
        assert cert.fixed_by_map is True

    def test_rose_geometric(self, rose3_fix):
        u = ((), "v")
        v = (wft("x1^2 x2 x3 x2^-1 x3^-1", rose3_fix), "v")
        cert = classify_nielsen(rose3_fix, frozenset(), u, v)
        assert cert.verdict == "geometric"
        assert cert.d == 6
        assert cert.fixed_by_map is True

    def test_single_edge_non_geometric(self, theta_id):
        u = ((), "R")
        v = (wft("x1", theta_id), "R")
        cert = classify_nielsen(theta_id, frozenset(), u, v)
        assert cert.verdict == "non-geometric"
        assert cert.witness_edge is not None

    def test_unfixed_endpoint_rejected(self, theta_fix):
        u = ((), "R")
        v = (wft("x1 x2", theta_fix), "R")  # Phi(x1 x2) = x1 x2 x1 != x1 x2
        cert = classify_nielsen(theta_fix, frozenset(), u, v)
        assert cert.verdict == "not-nielsen"
        assert cert.violated == "endpoints"
        assert cert.endpoints_fixed is False

    def test_gnc2_failure_odd_multiplicity(self, rose3):
        # x1 x2 crosses each edge once: NNC1 applies instead -> non-geometric
        rho = chain_between(rose3.graph, ((), "v"), (wft("x1 x2", rose3), "v"))
        cert = classify_chain(rho, rose3.graph)
        assert cert.verdict == "non-geometric"

    def test_gnc2_failure_uncovered_edge(self, rose3):
        # x1^2 covers edge a twice but never b or c
        rho = chain_between(rose3.graph, ((), "v"), (wft("x1^2", rose3), "v"))
        cert = classify_chain(rho, rose3.graph)
        assert cert.verdict == "not-nielsen"
        assert cert.violated == "GNC2"

    def test_gnc3_failure_commuting_overlaps(self, rose3):
        # x1^2 relative to {b, c}: single-edge overlaps with x1^{+-1} only,
        # orbit a covered twice, but the two overlap translates commute
        rho = chain_between(rose3.graph, ((), "v"), (wft("x1^2", rose3), "v"))
        cert = classify_chain(rho, rose3.graph, H=frozenset({"b", "c"}))
        assert cert.verdict == "not-nielsen"
        assert cert.violated == "GNC3"

    def test_degenerate_zero_chain(self, theta_id):
        with pytest.raises(CertificationError):
            classify_chain(OneChain.zero(), theta_id.graph)

    def test_relative_chain_with_H(self, theta_id):
        # relative to H = {a}: the commutator chain keeps only b/c terms,
        # multiplicity two each, overlaps single edges
        rho = chain_between(
            theta_id.graph, ((), "R"), (wft("x1 x2 x1^-1 x2^-1", theta_id), "R")
        ).project_rel({"a"})
        cert = classify_chain(rho, theta_id.graph, H=frozenset({"a"}))
        assert cert.verdict in ("geometric", "not-nielsen")


class TestTRho:
    def test_theta_ball_radius_one_matches_figure(self, theta_id, theta_rho):
        t = build_trho(theta_rho, 1)
        assert len(t.vertices) == 7
        assert len(t.edges) == 9  # six spokes plus three rim edges
        base_neighbors = {
            frozenset((a, b)) for a, b, _, _ in t.edges if () in (a, b)
        }
        assert len(base_neighbors) == 6
        rim = [e for e in t.edges if () not in (e[0], e[1])]
        assert len(rim) == 3
        # rim pairs per the figure
        pairs = {
            frozenset(
                (wft(x, theta_id), wft(y, theta_id))
            )
            for x, y in [
                ("x1 x2^-1 x1^-1", "x2^-1 x1^-1"),
                ("x1 x2 x1^-1 x2^-1 x1^-1", "x1 x2 x1^-1"),
                ("x1 x2", "x1 x2 x1 x2^-1 x1^-1"),
            ]
        }
        assert {frozenset((a, b)) for a, b, _, _ in rim} == pairs

    def test_theta_has_no_nonorientable_edges(self, theta_rho):
        t = build_trho(theta_rho, 2)
        assert all(not non for _, _, _, non in t.edges)
        assert all(s == 1 for s in t.sign.values())

    def test_rose_ball_is_tree(self, rose_rho):
        t = build_trho(rose_rho, 2)
        assert len(t.vertices) == 37
        assert len(t.edges) == 36  # 6-regular tree ball

    def test_radius_zero(self, rose_rho):
        t = build_trho(rose_rho, 0)
        assert t.vertices == {()}
        assert t.sign[()] == 1

    def test_interior_degree_is_d(self, rose_rho, theta_rho):
        for rho in (rose_rho, theta_rho):
            t = build_trho(rho, 2)
            deg = {}
            for a, b, _, _ in t.edges:
                deg[a] = deg.get(a, 0) + 1
                deg[b] = deg.get(b, 0) + 1
            for g in t.interior:
                assert deg[g] == t.d == 6

    def test_nongeometric_input_rejected(self, rose3):
        rho = OneChain.single((), "a")
        with pytest.raises(NotGeometricError):
            build_trho(rho, 1)

    def test_each_built_edge_covered_by_its_two_ends(self, rose_rho):
        # GNC2 locally: the labelled cover edge lies in exactly the two
        # incident translates' supports
        t = build_trho(rose_rho, 1)
        for a, b, label, _ in t.edges:
            covering = [
                g
                for g in t.vertices
                if label in rose_rho.translate(g).support()
            ]
            assert sorted(covering, key=words.word_key) == sorted(
                [a, b], key=words.word_key
            )


class TestSigmaAndSign:
    def test_empty_path(self, rose_rho):
        t = build_trho(rose_rho, 1)
        assert sigma_parity(t, [()]) == 1

    def test_single_nonorientable_step(self, rose3, rose_rho):
        t = build_trho(rose_rho, 1)
        g1 = wft("x1", rose3)
        assert sigma_parity(t, [(), g1]) == -1

    def test_worked_signs(self, rose3, rose_rho):
        t = build_trho(rose_rho, 2)
        g1 = wft("x1", rose3)
        g2 = wft("x1^3 x2 x3 x2^-1 x1^-2", rose3)
        g3 = wft("x1^2 x2 x3 x2^-1 x1^-2", rose3)
        assert sign_of(t, g1) == -1
        assert sign_of(t, g2) == -1
        assert sign_of(t, g3) == 1
        assert sign_of(t, ()) == 1

    def test_cycles_have_positive_parity(self, theta_rho):
        # enumerate all non-backtracking cycles through the base up to
        # length 8 in the radius-3 ball (cycle space is generated by the
        # built fundamental cycles, which _collect_edges_and_signs already
        # verified; this checks the statement literally)
        t = build_trho(theta_rho, 3)
        adjacency = {}
        for a, b, _, _ in t.edges:
            adjacency.setdefault(a, []).append(b)
            adjacency.setdefault(b, []).append(a)
        base = ()
        count = 0
        stack = [(base, [base])]
        while stack:
            vertex, path = stack.pop()
            if len(path) > 9:
                continue
            for nxt in adjacency.get(vertex, ()):
                if len(path) >= 2 and nxt == path[-2]:
                    continue  # no immediate backtracking
                if nxt == base and len(path) >= 3:
                    assert sigma_parity(t, path + [base]) == 1
                    count += 1
                elif nxt not in path and len(path) <= 8:
                    stack.append((nxt, path + [nxt]))
        assert count > 0

    def test_sign_path_independence(self, theta_rho):
        t = build_trho(theta_rho, 2)
        adjacency = {}
        for a, b, _, _ in t.edges:
            adjacency.setdefault(a, []).append(b)
            adjacency.setdefault(b, []).append(a)

        def bfs_path(src, dst, banned_first=None):
            queue = [[src]]
            seen = {src}
            while queue:
                path = queue.pop(0)
                if path[-1] == dst:
                    return path
                for nxt in adjacency.get(path[-1], ()):
                    if nxt in seen:
                        continue
                    if banned_first is not None and len(path) == 1 and nxt == banned_first:
                        continue
                    seen.add(nxt)
                    queue.append(path + [nxt])
            return None

        pairs_checked = 0
        ordered = sorted(t.vertices, key=words.word_key)
        for src in ordered[:6]:
            for dst in ordered[:8]:
                if src == dst:
                    continue
                p1 = bfs_path(src, dst)
                if p1 is None or len(p1) < 2:
                    continue
                p2 = bfs_path(src, dst, banned_first=p1[1])
                if p2 is None:
                    continue
                assert sigma_parity(t, p1) == sigma_parity(t, p2)
                pairs_checked += 1
        assert pairs_checked >= 20

    def test_sign_outside_ball_errors(self, rose_rho):
        t = build_trho(rose_rho, 1)
        with pytest.raises(EnlargeBallError):
            sign_of(t, (1, 1, 1, 1, 1, 1, 1, 1))


class TestRealization:
    def _rose_setup(self, rose3_fix, rose_rho):
        names = rose3_fix.graph.generator_names
        g1 = word_from_text("x1", names)
        g2 = word_from_text("x1^3 x2 x3 x2^-1 x1^-2", names)
        g3 = word_from_text("x1^2 x2 x3 x2^-1 x1^-2", names)
        t = build_trho_hull(rose_rho, [(), g1, g2, g3])
        return (g1, g2, g3), t

    def test_worked_realization_signs(self, rose3_fix, rose_rho):
        (g1, g2, g3), t = self._rose_setup(rose3_fix, rose_rho)
        q = [Fraction(2), Fraction(3), Fraction(5), Fraction(7)]
        x = QuasiFixedElement(rose_rho, list(zip(q, [(), g1, g2, g3])))
        psi = realize(x, t)
        assert psi == {(): q[0], g1: -q[1], g2: -q[2], g3: q[3]}

    def test_single_translate(self, rose_rho):
        t = build_trho(rose_rho, 0)
        x = QuasiFixedElement(rose_rho, [(Fraction(1), ())])
        assert realize(x, t) == {(): Fraction(1)}

    def test_r_norm_is_coefficient_norm(self, rose3_fix, rose_rho):
        (g1, g2, g3), t = self._rose_setup(rose3_fix, rose_rho)
        rng = random.Random(23)
        for _ in range(50):
            q = [Fraction(rng.randint(-6, 6), rng.randint(1, 5)) for _ in range(4)]
            x = QuasiFixedElement(rose_rho, list(zip(q, [(), g1, g2, g3])))
            assert cochain_norm_sq(realize(x, t)) == sum(v * v for v in q)

    def test_missing_vertex_errors(self, rose_rho):
        t = build_trho(rose_rho, 0)
        x = QuasiFixedElement(rose_rho, [(Fraction(1), (1, 2, 3))])
        with pytest.raises(EnlargeBallError):
            realize(x, t)


class TestCoboundary:
    def test_interior_spike_norm_is_degree(self, rose_rho):
        t = build_trho(rose_rho, 1)
        psi = {(): Fraction(1)}
        assert coboundary_norm_sq(t, psi) == 6

    def test_worked_coboundary_values(self, rose3_fix, rose_rho):
        names = rose3_fix.graph.generator_names
        g1 = word_from_text("x1", names)
        g2 = word_from_text("x1^3 x2 x3 x2^-1 x1^-2", names)
        g3 = word_from_text("x1^2 x2 x3 x2^-1 x1^-2", names)
        t = build_trho_hull(rose_rho, [(), g1, g2, g3])
        q = [Fraction(2), Fraction(3), Fraction(5), Fraction(7)]
        x = QuasiFixedElement(rose_rho, list(zip(q, [(), g1, g2, g3])))
        values = coboundary(t, realize(x, t))
        magnitudes = sorted(abs(v) for v in values.values())
        # path values: |q0+q1| = 5, |-q1+q2| = 2, |-q0+q3| = 5;
        # peripheral: 4x|q0|, 4x|q1|, 5x|q2|, 5x|q3|
        expected = sorted(
            [Fraction(5), Fraction(2), Fraction(5)]
            + [Fraction(2)] * 4
            + [Fraction(3)] * 4
            + [Fraction(5)] * 5
            + [Fraction(7)] * 5
        )
        assert magnitudes == expected

    def test_norm_identity_random(self, rose3_fix, rose_rho):
        names = rose3_fix.graph.generator_names
        g1 = word_from_text("x1", names)
        g2 = word_from_text("x1^3 x2 x3 x2^-1 x1^-2", names)
        g3 = word_from_text("x1^2 x2 x3 x2^-1 x1^-2", names)
        t = build_trho_hull(rose_rho, [(), g1, g2, g3])
        rng = random.Random(31)
        for _ in range(100):
            q = [Fraction(rng.randint(-8, 8), rng.randint(1, 6)) for _ in range(4)]
            x = QuasiFixedElement(rose_rho, list(zip(q, [(), g1, g2, g3])))
            assert coboundary_norm_sq(t, realize(x, t)) == x.chain().norm_sq()

    def test_boundary_support_errors(self, rose_rho):
        t = build_trho(rose_rho, 1)
        boundary_vertex = next(iter(t.vertices - t.interior))
        with pytest.raises(EnlargeBallError):
            coboundary(t, {boundary_vertex: Fraction(1)})

    def test_4d_upper_bound(self, rose_rho, theta_rho):
        rng = random.Random(47)
        for rho in (rose_rho, theta_rho):
            t = build_trho(rho, 2)
            interior = sorted(t.interior, key=words.word_key)
            for _ in range(100):
                support = rng.sample(interior, k=min(3, len(interior)))
                psi = {
                    g: Fraction(rng.randint(-5, 5), rng.randint(1, 4))
                    for g in support
                }
                psi = {g: c for g, c in psi.items() if c}
                lhs = coboundary_norm_sq(t, psi)
                assert lhs <= 4 * t.d * cochain_norm_sq(psi)

    def test_injectivity_on_compact_support(self, rose_rho):
        t = build_trho(rose_rho, 1)
        psi = {(): Fraction(3, 2)}
        assert coboundary(t, psi)


class TestNonGeometricBound:
    def test_coefficient_sandwich(self, rose3):
        # NNC1 chain: a single-edge orbit witness; bound sum q^2 <= |x|^2 <=
        # d^3 sum q^2 over random translate combinations
        g = rose3.graph
        rho = chain_between(g, ((), "v"), (word_from_text("x1 x2", g.generator_names), "v"))
        cert = classify_chain(rho, g)
        assert cert.verdict == "non-geometric"
        d = len(rho.terms)
        rng = random.Random(77)
        for _ in range(50):
            translates = []
            seen = set()
            for _ in range(4):
                gw = words.reduce(
                    tuple(rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(3))
                )
                if gw not in seen:
                    seen.add(gw)
                    translates.append((Fraction(rng.randint(-5, 5)), gw))
            x = QuasiFixedElement(rho, translates)
            if not x.terms:
                continue
            qq = x.coefficient_norm_sq()
            norm = x.chain().norm_sq()
            assert qq <= norm <= d**3 * qq


class TestDotExport:
    def test_dot_contains_styles(self, rose_rho):
        t = build_trho(rose_rho, 1)
        dot = dot_export(t)
        assert dot.startswith("graph trho {")
        assert "style=dashed" in dot  # the x1 edge is non-orientable
        assert "lightsalmon" in dot
