"""Rational 1-chains on the universal cover of a marked graph.

The cover of the basepoint component is coordinatized by the spanning tree:
vertices are pairs ``(g, v)`` and edges pairs ``(g, e)`` with ``g`` a reduced
word; crossing a lifted non-tree edge multiplies the label by the edge's
generator.  ``(e, basepoint)`` is the fixed lift of the basepoint.  Chains are
finitely supported maps ``(g, e) -> Fraction`` stored in the input edge
orientation; reversal is a sign.
"""

from fractions import Fraction

from chaintorque import words
from chaintorque.graphs import RequiresStabilizationError, path_word, generator_loop
from chaintorque.words import IDENTITY, invert, multiply


class ChainError(ValueError):
    pass


def _as_fraction(c):
    return c if isinstance(c, Fraction) else Fraction(c)


class OneChain:
    """Finitely supported rational combination of lifted edges."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for key, c in terms.items():
                c = _as_fraction(c)
                if c:
                    self.terms[key] = c

    @classmethod
    def single(cls, g, eid, coeff=1):
        return cls({(g, eid): coeff})

    @classmethod
    def zero(cls):
        return cls()

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return isinstance(other, OneChain) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other):
        out = dict(self.terms)
        for key, c in other.terms.items():
            s = out.get(key, 0) + c
            if s:
                out[key] = s
            else:
                out.pop(key, None)
        chain = OneChain.__new__(OneChain)
        chain.terms = out
        return chain

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        chain = OneChain.__new__(OneChain)
        chain.terms = {key: -c for key, c in self.terms.items()}
        return chain

    def scale(self, q):
        q = _as_fraction(q)
        if not q:
            return OneChain.zero()
        chain = OneChain.__new__(OneChain)
        chain.terms = {key: c * q for key, c in self.terms.items()}
        return chain

    def translate(self, g):
        """Left translate g . x."""
        chain = OneChain.__new__(OneChain)
        chain.terms = {(multiply(g, h), eid): c for (h, eid), c in self.terms.items()}
        return chain

    def support(self):
        return set(self.terms)

    def coefficient(self, g, eid):
        return self.terms.get((g, eid), Fraction(0))

    def norm_sq(self):
        return sum((c * c for c in self.terms.values()), Fraction(0))

    def inner(self, other):
        small, big = (self, other) if len(self.terms) <= len(other.terms) else (other, self)
        total = Fraction(0)
        for key, c in small.terms.items():
            d = big.terms.get(key)
            if d is not None:
                total += c * d
        return total

    def project_rel(self, H):
        """pi_H-perp: zero every term whose edge lies in H."""
        chain = OneChain.__new__(OneChain)
        chain.terms = {
            (g, eid): c for (g, eid), c in self.terms.items() if eid not in H
        }
        return chain

    def sorted_terms(self):
        return sorted(
            self.terms.items(), key=lambda kv: (words.word_key(kv[0][0]), kv[0][1])
        )

    def __repr__(self):
        parts = [f"{c}*({words.word_to_text(g)},{eid})" for (g, eid), c in self.sorted_terms()]
        return "OneChain(" + " + ".join(parts) + ")" if parts else "OneChain(0)"


class ZeroChain:
    """Finitely supported rational combination of lifted vertices."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for key, c in terms.items():
                c = _as_fraction(c)
                if c:
                    self.terms[key] = c

    def __eq__(self, other):
        return isinstance(other, ZeroChain) and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)


def l2_norm_sq(x):
    return x.norm_sq()


def inner(x, y):
    return x.inner(y)


def project_rel(x, H):
    return x.project_rel(H)


def lift_translate(graph, g, eid):
    """Label of the far endpoint of the lifted edge (g, e): g for tree edges,
    g times the edge's generator otherwise."""
    gen = graph.deck_label(eid)
    return g if gen == 0 else multiply(g, (gen,))


def edge_endpoints(graph, g, eid):
    """((g, o(e)), (g w(e), t(e))) for the lifted edge (g, e)."""
    return (g, graph.origin[eid]), (lift_translate(graph, g, eid), graph.terminal[eid])


def boundary(graph, x):
    """The boundary 0-chain: linear extension of t(e) - o(e)."""
    terms = {}
    for (g, eid), c in x.terms.items():
        u, v = edge_endpoints(graph, g, eid)
        for key, sign in ((v, 1), (u, -1)):
            s = terms.get(key, 0) + sign * c
            if s:
                terms[key] = s
            else:
                terms.pop(key, None)
    chain = ZeroChain.__new__(ZeroChain)
    chain.terms = terms
    return chain


def chain_of_path(graph, start_label, tokens):
    """Chain of a lifted token path starting at label ``start_label``;
    returns (OneChain, end_label)."""
    terms = {}
    g = start_label
    for eid, sign in tokens:
        if sign > 0:
            key = (g, eid)
            g = lift_translate(graph, g, eid)
        else:
            gen = graph.deck_label(eid)
            h = g if gen == 0 else multiply(g, (-gen,))
            key = (h, eid)
            g = h
        s = terms.get(key, 0) + sign
        if s:
            terms[key] = s
        else:
            terms.pop(key, None)
    chain = OneChain.__new__(OneChain)
    chain.terms = {key: Fraction(c) for key, c in terms.items()}
    return chain, g


def anchor_chain(graph, uv):
    """The chain [*~, uv]: generator loops along the label, then the tree
    run out to the vertex."""
    g, v = uv
    words.check_word(g, graph.rank)
    terms = OneChain.zero()
    label = IDENTITY
    for letter in g:
        loop = generator_loop(graph, abs(letter))
        if letter < 0:
            loop = [(eid, -s) for eid, s in reversed(loop)]
        piece, label = chain_of_path(graph, label, loop)
        terms = terms + piece
    tail, _ = chain_of_path(graph, label, graph.tree_path(graph.basepoint, v))
    return terms + tail


def chain_between(graph, u, v):
    """The geodesic chain [u, v]: boundary is delta_v - delta_u, coefficients
    all +-1 on the tree geodesic (cancellation of anchored chains)."""
    base_comp = graph.component_of(graph.basepoint)
    for g, vid in (u, v):
        if graph.component_of(vid) != base_comp:
            raise ChainError(f"vertex {vid} is outside the basepoint component")
    if u == v:
        return OneChain.zero()
    return anchor_chain(graph, v) - anchor_chain(graph, u)


class ChainMap:
    """The chain map of the lift f~ with f~(*~) = *~.

    Precomputes the marking automorphism, the vertex displacement labels h_v
    (f~(g, v) = (Phi(g) h_v, f(v))) and the images of fundamental-domain
    edges.  Requires f to fix the basepoint.
    """

    def __init__(self, gm, phi=None):
        from chaintorque.graphs import induced_automorphism

        if not gm.fixes_basepoint():
            raise RequiresStabilizationError(
                "basepoint not fixed; apply stabilize_vertices first"
            )
        self.gm = gm
        self.graph = gm.graph
        self.phi = phi if phi is not None else induced_automorphism(gm)
        g = self.graph
        self.h = {}
        for vtx in g.vertices:
            if g.component_of(vtx) != g.component_of(g.basepoint):
                continue
            self.h[vtx] = path_word(g, gm.map_path(g.tree_path(g.basepoint, vtx)))
        self.basis_image = {}
        for eid in g.edge_ids:
            if g.component_of(g.origin[eid]) != g.component_of(g.basepoint):
                continue
            start = self.h[g.origin[eid]]
            chain, _ = chain_of_path(g, start, gm.edge_map[eid])
            self.basis_image[eid] = chain

    def vertex_image(self, uv):
        g, v = uv
        return (multiply(self.phi.apply(g), self.h[v]), self.gm.vertex_map[v])

    def apply(self, x):
        """A_f(x); linear and Phi-equivariant."""
        out = OneChain.zero()
        for (g, eid), c in x.terms.items():
            image = self.basis_image.get(eid)
            if image is None:
                raise ChainError(f"edge {eid} is outside the basepoint component")
            out = out + image.translate(self.phi.apply(g)).scale(c)
        return out

    def apply_rel(self, x, H):
        """A_{f,H} = pi_H-perp after A_f, on relative chains."""
        return self.apply(x.project_rel(H)).project_rel(H)

    def apply_rel_power(self, x, H, k):
        for _ in range(k):
            x = self.apply_rel(x, H)
        return x


def apply_A(gm, x, _cache={}):
    """Convenience wrapper over ChainMap for one-off applications."""
    key = id(gm)
    cm = _cache.get(key)
    if cm is None or cm.gm is not gm:
        cm = ChainMap(gm)
        _cache.clear()
        _cache[key] = cm
    return cm.apply(x)


def jacobian_rows(gm, stratum_edges=None, chain_map=None):
    """Rows of the Jacobian: for each edge e_i, the terms of A_f(e, e_i)
    restricted to ``stratum_edges`` (all generators-component edges when
    None).  Returns (row_edge_ids, list of dict[(word, eid)] -> Fraction)."""
    cm = chain_map if chain_map is not None else ChainMap(gm)
    g = gm.graph
    eids = list(stratum_edges) if stratum_edges is not None else [
        eid for eid in g.edge_ids if eid in cm.basis_image
    ]
    keep = set(eids)
    rows = []
    for eid in eids:
        image = cm.basis_image[eid]
        rows.append(
            {key: c for key, c in image.terms.items() if key[1] in keep}
        )
    return eids, rows


def jacobian(gm, stratum_edges=None, chain_map=None):
    """The Jacobian over Q[F]: row i records A_f(e, e_i) in the chosen edge
    set (the full generators-component Jacobian when ``stratum_edges`` is
    None; a filtration block when it is a stratum's edge list)."""
    from chaintorque.ring import FreeContext, RingElement, RingMatrix

    eids, rows = jacobian_rows(gm, stratum_edges, chain_map=chain_map)
    ctx = FreeContext(gm.graph.rank, names=gm.graph.generator_names)
    col = {eid: j for j, eid in enumerate(eids)}
    entries = [
        [RingElement.zero(ctx) for _ in range(len(eids))] for _ in range(len(eids))
    ]
    for i, row in enumerate(rows):
        for (g, eid), c in row.items():
            j = col[eid]
            entries[i][j] = entries[i][j] + RingElement.of(ctx, g, c)
    return RingMatrix(ctx, entries)


# --- .chain file format ------------------------------------------------------

def parse_chain(text, graph):
    """Parse ``coeff <word tokens> <eid>`` lines; '~eid' negates."""
    chain = OneChain.zero()
    names = graph.generator_names
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 3:
            raise ChainError(f"line {lineno}: want 'coeff <word> <eid>'")
        try:
            coeff = Fraction(fields[0])
        except ValueError:
            raise ChainError(f"line {lineno}: bad coefficient {fields[0]!r}") from None
        eid = fields[-1]
        if eid.startswith("~"):
            eid = eid[1:]
            coeff = -coeff
        if eid not in graph.origin:
            raise ChainError(f"line {lineno}: unknown edge {eid!r}")
        g = words.word_from_text(" ".join(fields[1:-1]), names)
        chain = chain + OneChain.single(g, eid, coeff)
    return chain


def format_chain(chain, graph=None):
    names = graph.generator_names if graph is not None else None
    lines = []
    for (g, eid), c in chain.sorted_terms():
        word_text = words.word_to_text(g, names) if g else "e"
        lines.append(f"{c} {word_text} {eid}")
    return "\n".join(lines)
