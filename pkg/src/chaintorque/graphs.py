"""Graphs, self-morphisms, transition matrices and stratum analysis.

A graph map ``f`` sends vertices to vertices and expands each edge across an
edge-path (tokens ``eid`` / ``~eid`` for reversed traversal).  Marking: the
basepoint component's non-tree edges are the free-group generators, in file
edge order; generator ``l`` is the loop tree-path * -> o(e_l), then e_l, then
tree-path t(e_l) -> *.
"""

from dataclasses import dataclass

from chaintorque import words
from chaintorque.words import FreeEndomorphism

EG_THRESHOLD = 1e-9
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000


class GraphError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class RequiresStabilizationError(GraphError):
    """The operation needs f to fix the basepoint (or all vertex images)."""


class Graph:
    """Vertices, oriented edges, a basepoint and a spanning forest."""

    def __init__(self, vertices, edges, basepoint, tree, name="graph"):
        self.name = name
        self.vertices = list(vertices)
        self.edges = list(edges)  # (eid, origin, terminal)
        self.basepoint = basepoint
        self.tree = frozenset(tree)
        self._validate()
        self.edge_ids = [e[0] for e in self.edges]
        self.edge_index = {eid: i for i, eid in enumerate(self.edge_ids)}
        self.origin = {e[0]: e[1] for e in self.edges}
        self.terminal = {e[0]: e[2] for e in self.edges}
        self._component = self._label_components()
        # generators: non-tree edges of the basepoint component, in edge order
        base_comp = self._component[self.basepoint]
        self.generator_edges = [
            eid for eid in self.edge_ids
            if eid not in self.tree and self._component[self.origin[eid]] == base_comp
        ]
        self.rank = len(self.generator_edges)
        self.generator_of_edge = {
            eid: i + 1 for i, eid in enumerate(self.generator_edges)
        }
        self.generator_names = words.default_names(self.rank)

    def _validate(self):
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise GraphError("duplicate vertex id")
        seen = set()
        for eid, o, t in self.edges:
            if eid in seen:
                raise GraphError(f"duplicate edge id {eid}")
            seen.add(eid)
            if o not in vset or t not in vset:
                raise GraphError(f"edge {eid} has a dangling endpoint")
        if self.basepoint not in vset:
            raise GraphError("basepoint is not a vertex")
        for eid in self.tree:
            if eid not in seen:
                raise GraphError(f"tree edge {eid} is not an edge")
        self._check_spanning_forest()

    def _check_spanning_forest(self):
        # tree edges must be acyclic and connect each component fully
        tree_parent = {v: v for v in self.vertices}
        full_parent = {v: v for v in self.vertices}

        def find(parent, v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for eid, o, t in self.edges:
            ro, rt = find(full_parent, o), find(full_parent, t)
            if ro != rt:
                full_parent[ro] = rt
            if eid in self.tree:
                ro, rt = find(tree_parent, o), find(tree_parent, t)
                if ro == rt:
                    raise GraphError("tree edges contain a cycle")
                tree_parent[ro] = rt
        classes = {}
        for v in self.vertices:
            classes.setdefault(find(full_parent, v), set()).add(find(tree_parent, v))
        if any(len(roots) > 1 for roots in classes.values()):
            raise GraphError("tree does not span a component")

    def _label_components(self):
        adj = {v: [] for v in self.vertices}
        for eid, o, t in self.edges:
            adj[o].append(t)
            adj[t].append(o)
        label = {}
        for v in self.vertices:
            if v in label:
                continue
            stack = [v]
            label[v] = v
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in label:
                        label[w] = v
                        stack.append(w)
        return label

    def component_of(self, v):
        return self._component[v]

    def tree_path(self, u, v):
        """Token path u -> v inside the spanning forest; [] when u == v."""
        if self._component[u] != self._component[v]:
            raise GraphError(f"{u} and {v} lie in different components")
        if u == v:
            return []
        adj = {w: [] for w in self.vertices}
        for eid, o, t in self.edges:
            if eid in self.tree:
                adj[o].append((eid, 1, t))
                adj[t].append((eid, -1, o))
        prev = {u: None}
        queue = [u]
        while queue:
            nxt = []
            for w in queue:
                for eid, sign, other in adj[w]:
                    if other not in prev:
                        prev[other] = (w, eid, sign)
                        nxt.append(other)
            if v in prev:
                break
            queue = nxt
        tokens = []
        cur = v
        while prev[cur] is not None:
            w, eid, sign = prev[cur]
            tokens.append((eid, sign))
            cur = w
        tokens.reverse()
        return tokens

    def deck_label(self, eid):
        """Generator index crossed by the lifted edge (0 for tree edges)."""
        return 0 if eid in self.tree else self.generator_of_edge.get(eid, 0)


def reverse_path(tokens):
    return [(eid, -sign) for eid, sign in reversed(tokens)]


class GraphMap:
    """A morphism f: Gamma -> Gamma given by a vertex map and edge paths."""

    def __init__(self, graph, vertex_map, edge_map, inverse_images=None):
        self.graph = graph
        self.vertex_map = dict(vertex_map)
        self.edge_map = {eid: tuple(path) for eid, path in edge_map.items()}
        self.inverse_images = inverse_images  # generator name -> word text
        self._validate()

    def _validate(self):
        g = self.graph
        for v in g.vertices:
            if v not in self.vertex_map:
                raise GraphError(f"vmap missing vertex {v}")
            if self.vertex_map[v] not in g.origin and self.vertex_map[v] not in set(g.vertices):
                raise GraphError(f"vmap sends {v} to unknown vertex")
        vset = set(g.vertices)
        for v, w in self.vertex_map.items():
            if v not in vset or w not in vset:
                raise GraphError(f"vmap entry {v} -> {w} is dangling")
        for eid in g.edge_ids:
            if eid not in self.edge_map:
                raise GraphError(f"emap missing edge {eid}")
            path = self.edge_map[eid]
            if not path:
                raise GraphError(f"emap for {eid} is empty")
            at = self.vertex_map[g.origin[eid]]
            for d, sign in path:
                if d not in g.origin:
                    raise GraphError(f"emap for {eid} uses unknown edge {d}")
                start = g.origin[d] if sign > 0 else g.terminal[d]
                end = g.terminal[d] if sign > 0 else g.origin[d]
                if start != at:
                    raise GraphError(
                        f"edge-path for {eid} breaks at {d}: at {at}, edge starts {start}"
                    )
                at = end
            if at != self.vertex_map[g.terminal[eid]]:
                raise GraphError(
                    f"edge-path for {eid} ends at {at}, vmap wants "
                    f"{self.vertex_map[g.terminal[eid]]}"
                )

    def fixes_basepoint(self):
        return self.vertex_map[self.graph.basepoint] == self.graph.basepoint

    def map_path(self, tokens):
        """Image of a token path under f."""
        out = []
        for eid, sign in tokens:
            image = self.edge_map[eid]
            out.extend(image if sign > 0 else reverse_path(image))
        return out

    def compose(self, inner):
        """self after inner: edge paths of inner pushed through self."""
        if inner.graph is not self.graph and inner.graph.edge_ids != self.graph.edge_ids:
            raise GraphError("composing maps of different graphs")
        vmap = {v: self.vertex_map[inner.vertex_map[v]] for v in self.graph.vertices}
        emap = {
            eid: tuple(self.map_path(inner.edge_map[eid]))
            for eid in self.graph.edge_ids
        }
        return GraphMap(self.graph, vmap, emap, inverse_images=None)

    def power(self, k):
        if k < 1:
            raise ValueError("power must be >= 1")
        result = self
        for _ in range(k - 1):
            result = self.compose(result)
        return result


# --- parsing ---------------------------------------------------------------

def parse_graph_map(text):
    """Parse the .gm format; raises ParseError with a line number."""
    name = "graph"
    vertices = []
    edges = []
    basepoint = None
    tree = []
    saw_tree = False
    vmap = {}
    emap = {}
    invimages = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        head = fields[0]
        try:
            if head == "graph":
                name = fields[1] if len(fields) > 1 else name
            elif head == "vertex":
                vertices.extend(fields[1:])
            elif head == "edge":
                if len(fields) != 4:
                    raise ParseError("edge wants: edge <eid> <origin> <terminal>", lineno)
                edges.append((fields[1], fields[2], fields[3]))
            elif head == "basepoint":
                basepoint = fields[1]
            elif head == "tree":
                saw_tree = True
                tree.extend(fields[1:])
            elif head == "vmap":
                if len(fields) != 4 or fields[2] != "->":
                    raise ParseError("vmap wants: vmap <vid> -> <vid>", lineno)
                vmap[fields[1]] = fields[3]
            elif head == "emap":
                if len(fields) < 4 or fields[2] != "->":
                    raise ParseError("emap wants: emap <eid> -> <token> ...", lineno)
                path = []
                for token in fields[3:]:
                    if token.startswith("~"):
                        path.append((token[1:], -1))
                    else:
                        path.append((token, 1))
                emap[fields[1]] = path
            elif head == "invimages":
                if len(fields) < 4 or fields[2] != "->":
                    raise ParseError("invimages wants: invimages <gen> -> <word>", lineno)
                invimages[fields[1]] = " ".join(fields[3:])
            else:
                raise ParseError(f"unknown directive {head!r}", lineno)
        except IndexError:
            raise ParseError(f"incomplete {head!r} directive", lineno) from None
    if basepoint is None:
        raise ParseError("no basepoint line")
    if not saw_tree:
        raise ParseError("no tree line (use a bare 'tree' for roses)")
    try:
        graph = Graph(vertices, edges, basepoint, tree, name=name)
        return GraphMap(graph, vmap, emap, inverse_images=invimages or None)
    except GraphError as err:
        raise ParseError(str(err)) from err


def load_graph_map(path):
    with open(path, encoding="utf-8") as handle:
        return parse_graph_map(handle.read())


# --- transition matrix and strata -------------------------------------------

def transition_matrix(gm):
    """M(f)[i][j] = occurrences of e_j or its reverse in f(e_i)."""
    g = gm.graph
    n = len(g.edge_ids)
    M = [[0] * n for _ in range(n)]
    for i, eid in enumerate(g.edge_ids):
        for d, _sign in gm.edge_map[eid]:
            M[i][g.edge_index[d]] += 1
    return M


def _tarjan_sccs(n, succ):
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    sccs = []
    counter = [0]

    def strongconnect(v0):
        work = [(v0, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for i in range(pi, len(succ[v])):
                w = succ[v][i]
                if index[w] is None:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))

    for v in range(n):
        if index[v] is None:
            strongconnect(v)
    return sccs


def perron_frobenius(block):
    """(lambda, right eigenvector) of a nonnegative irreducible matrix by
    power iteration on M + I (the shift forces aperiodicity)."""
    n = len(block)
    if n == 1:
        lam = float(block[0][0])
        return lam, [1.0]
    vec = [1.0] * n
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        nxt = [
            sum(block[i][j] * vec[j] for j in range(n)) + vec[i]
            for i in range(n)
        ]
        norm = max(abs(x) for x in nxt)
        nxt = [x / norm for x in nxt]
        new_lam = norm - 1.0
        if abs(new_lam - lam) <= POWER_TOL * max(1.0, abs(new_lam)):
            return new_lam, nxt
        lam, vec = new_lam, nxt
    return lam, vec


@dataclass
class StratumInfo:
    index: int           # 1-based position in the filtration
    edges: list          # edge ids of Gamma_s - Gamma_{s-1}, in matrix order
    block: list          # n_s x n_s transition block
    lam: float           # PF eigenvalue; None for the zero 1x1 block
    is_eg: bool
    eigenvector: list = None

    @property
    def n(self):
        return len(self.edges)

    @property
    def is_zero(self):
        return all(x == 0 for row in self.block for x in row)


@dataclass
class FiltrationInfo:
    strata: list         # StratumInfo, lowest first
    edge_order: list     # edge ids realizing the lower block triangular form
    reduced: bool

    @property
    def eg_set(self):
        return [s.index for s in self.strata if s.is_eg]


def strata_decomposition(gm):
    """Maximal filtration: SCC refinement of the transition digraph, ordered
    so edges lower in the filtration come first, plus PF data per block."""
    g = gm.graph
    M = transition_matrix(gm)
    n = len(g.edge_ids)
    succ = [[j for j in range(n) if M[i][j] > 0] for i in range(n)]
    sccs = _tarjan_sccs(n, succ)
    # order components topologically: a component's targets must come first
    comp_of = {}
    for ci, comp in enumerate(sccs):
        for v in comp:
            comp_of[v] = ci
    deps = [set() for _ in sccs]  # deps[c] = components c maps onto
    for i in range(n):
        for j in succ[i]:
            if comp_of[i] != comp_of[j]:
                deps[comp_of[i]].add(comp_of[j])
    placed = [False] * len(sccs)
    order = []
    remaining = set(range(len(sccs)))
    while remaining:
        ready = [c for c in remaining if all(placed[d] for d in deps[c])]
        if not ready:
            raise GraphError("cyclic stratum dependencies (unreachable)")
        ready.sort(key=lambda c: min(sccs[c]))
        pick = ready[0]
        placed[pick] = True
        order.append(pick)
        remaining.remove(pick)
    strata = []
    edge_order = []
    for pos, ci in enumerate(order, start=1):
        comp = sccs[ci]
        eids = [g.edge_ids[i] for i in comp]
        block = [[M[i][j] for j in comp] for i in comp]
        zero = all(x == 0 for row in block for x in row)
        if zero:
            lam, vec, is_eg = None, None, False
        else:
            lam, vec = perron_frobenius(block)
            is_eg = lam > 1.0 + EG_THRESHOLD
        strata.append(StratumInfo(pos, eids, block, lam, is_eg, vec))
        edge_order.extend(eids)
    return FiltrationInfo(strata, edge_order, _reduced(g, strata))


def _reduced(graph, strata):
    """Paper-style reduced: each Gamma_s adds exactly one new component."""
    prev_components = set()
    acc_edges = []
    for stratum in strata:
        acc_edges.extend(stratum.edges)
        comps = _edge_subgraph_components(graph, acc_edges)
        new = [c for c in comps if c not in prev_components]
        if len(new) != 1:
            return False
        prev_components = comps
    return True


def _edge_subgraph_components(graph, eids):
    verts = set()
    adj = {}
    for eid in eids:
        o, t = graph.origin[eid], graph.terminal[eid]
        verts.update((o, t))
        adj.setdefault(o, []).append((eid, t))
        adj.setdefault(t, []).append((eid, o))
    comps = set()
    seen = set()
    for v in verts:
        if v in seen:
            continue
        stack = [v]
        cv, ce = set(), set()
        seen.add(v)
        while stack:
            u = stack.pop()
            cv.add(u)
            for eid, w in adj.get(u, []):
                ce.add(eid)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.add((frozenset(cv), frozenset(ce)))
    return comps


def stabilize_vertices(gm, max_power=10_000):
    """Smallest k >= 1 such that every vertex image of f^k is fixed by f^k,
    together with the composed map."""
    g = gm.graph
    vm = {v: gm.vertex_map[v] for v in g.vertices}
    current = dict(vm)
    k = 1
    while k <= max_power:
        if all(current[current[v]] == current[v] for v in g.vertices):
            break
        current = {v: vm[current[v]] for v in g.vertices}
        k += 1
    else:
        raise GraphError("vertex dynamics did not stabilize (bound exceeded)")
    return gm.power(k), k


def path_word(graph, tokens):
    """Group label accumulated by walking a token path in the cover."""
    letters = []
    for eid, sign in tokens:
        gen = graph.deck_label(eid)
        if gen:
            letters.append(gen if sign > 0 else -gen)
    return words.reduce(tuple(letters))


def generator_loop(graph, gen_index):
    """Token loop at the basepoint representing generator ``gen_index``."""
    eid = graph.generator_edges[gen_index - 1]
    base = graph.basepoint
    return (
        graph.tree_path(base, graph.origin[eid])
        + [(eid, 1)]
        + graph.tree_path(graph.terminal[eid], base)
    )


def induced_automorphism(gm):
    """The automorphism Phi_f of the marking; needs f to fix the basepoint."""
    g = gm.graph
    if not gm.fixes_basepoint():
        raise RequiresStabilizationError(
            "basepoint is not fixed; apply stabilize_vertices first"
        )
    images = []
    for gen in range(1, g.rank + 1):
        loop = generator_loop(g, gen)
        images.append(path_word(g, gm.map_path(loop)))
    inverse_images = None
    if gm.inverse_images:
        inverse_images = []
        for gen_name in g.generator_names:
            if gen_name not in gm.inverse_images:
                raise GraphError(f"invimages missing generator {gen_name}")
            inverse_images.append(
                words.word_from_text(gm.inverse_images[gen_name], g.generator_names)
            )
        inverse_images = tuple(inverse_images)
    return FreeEndomorphism(g.rank, tuple(images), inverse_images)
