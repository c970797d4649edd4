"""Bounded-scale scans for the chain flare inequality.

The scan enumerates nonzero integral chains supported on the edges of a
radius-r ball around the base lift, filters out near-quasi-fixed chains, and
reports the minimal flare ratio at power N:

    general mode:  max(|A^2N x|, |x|) / |A^N x|
    rose mode:     max(|A^N x|, |A^-N x|) / |x|

A bounded scan can falsify the flare condition (a witness with ratio <= 1 is
recomputed independently before being reported) but never prove it; every
report carries the bounded-evidence disclaimer.  Enumeration order is
canonical (support size, edge combination, coefficient vector, first nonzero
coefficient positive), so identical parameters give identical reports.
"""

import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from chaintorque import words
from chaintorque.chains import ChainMap, OneChain, lift_translate
from chaintorque.graphs import GraphMap
from chaintorque.nielsen import overlap_data
from chaintorque.words import IDENTITY, MissingInverseError, invert, multiply

BOUNDED_EVIDENCE = (
    "bounded evidence only: a finite scan can falsify the flare inequality "
    "but cannot prove it"
)


@dataclass
class FlareParams:
    radius: int = 1
    coeff_bound: int = 1
    power: int = None          # defaults to the smallest N with lambda_PF^N >= 2
    theta: Fraction = Fraction(1, 2)
    mode: str = "general"      # 'general' | 'rose-invertible'
    lam_target: float = None
    budget: int = 200_000
    search_radius: int = 1     # overlap-closure radius for the quasi-fixed span

    def __post_init__(self):
        self.theta = Fraction(self.theta)
        if not (0 < self.theta < 1):
            raise ValueError("theta must lie in (0, 1)")
        if self.coeff_bound < 1:
            raise ValueError("coeff-bound must be >= 1")
        if self.power is not None and self.power < 1:
            raise ValueError("power must be >= 1")
        if self.mode not in ("general", "rose-invertible"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class FlareReport:
    lam_min: float             # minimal ratio (inf when nothing flared-tested)
    lam_min_sq: Fraction       # exact square of the minimum, None when vacuous
    witness: OneChain
    tested_count: int
    quasi_fixed_excluded: int
    mode: str
    params: FlareParams
    power: int
    partial: bool = False
    disclaimer: str = BOUNDED_EVIDENCE
    residual_change: float = None
    vh_convention: str = (
        "N_theta taken against the residual after exact projection off the "
        "radius-limited quasi-fixed span"
    )


def default_power(gm):
    """Smallest N with lambda_PF^N >= 2 over the EG strata (1 when none)."""
    from chaintorque.graphs import strata_decomposition

    fil = strata_decomposition(gm)
    lams = [s.lam for s in fil.strata if s.is_eg]
    if not lams:
        return 1
    lam = max(lams)
    return max(1, math.ceil(math.log(2.0) / math.log(lam)))


def ball_edge_positions(graph, radius, H=frozenset()):
    """Edges of the radius-r ball around the base lift, excluding H lifts,
    in canonical order (label word, then edge id)."""
    if radius < 1:
        return []
    base = (IDENTITY, graph.basepoint)
    dist = {base: 0}
    frontier = [base]
    edges = set()
    out_edges = {}
    in_edges = {}
    for eid in graph.edge_ids:
        out_edges.setdefault(graph.origin[eid], []).append(eid)
        in_edges.setdefault(graph.terminal[eid], []).append(eid)
    for level in range(radius):
        nxt = []
        for (g, v) in frontier:
            for eid in out_edges.get(v, ()):
                edge = (g, eid)
                far = (lift_translate(graph, g, eid), graph.terminal[eid])
                if eid not in H:
                    edges.add(edge)
                if far not in dist:
                    dist[far] = level + 1
                    nxt.append(far)
            for eid in in_edges.get(v, ()):
                gen = graph.deck_label(eid)
                h = g if gen == 0 else multiply(g, (-gen,))
                edge = (h, eid)
                far = (h, graph.origin[eid])
                if eid not in H:
                    edges.add(edge)
                if far not in dist:
                    dist[far] = level + 1
                    nxt.append(far)
        frontier = nxt
    return sorted(edges, key=lambda e: (words.word_key(e[0]), e[1]))


def enumerate_chains(positions, coeff_bound, budget):
    """Yield integral chains on the given positions in canonical order,
    coefficients in [-c, c], first nonzero coefficient positive; stops at
    the budget."""
    count = 0
    nonzero = [x for x in range(-coeff_bound, coeff_bound + 1) if x]
    for size in range(1, len(positions) + 1):
        for combo in itertools.combinations(range(len(positions)), size):
            first_choices = range(1, coeff_bound + 1)
            rest = itertools.product(nonzero, repeat=size - 1)
            for tail_coeffs in rest:
                for first in first_choices:
                    if count >= budget:
                        return
                    coeffs = (first,) + tail_coeffs
                    terms = {
                        positions[p]: Fraction(c)
                        for p, c in zip(combo, coeffs)
                    }
                    chain = OneChain.__new__(OneChain)
                    chain.terms = terms
                    count += 1
                    yield chain


@dataclass
class ProjectionResult:
    coeffs: list              # (Fraction q, word g), nonzero entries
    residual: OneChain
    pseudo: bool = False      # Gram system was singular; minimal-choice solve

    def projection(self, rho):
        out = OneChain.zero()
        for q, g in self.coeffs:
            out = out + rho.translate(g).scale(q)
        return out


def project_quasifixed(x, rho, search_radius=1):
    """Exact least-squares projection of x onto nearby translates of rho.

    Candidate translates are those whose support meets supp(x), enlarged by
    overlap-closure ``search_radius`` steps; the Gram system is solved over
    the rationals.
    """
    rho_orbits = {}
    for (h, eid), c in rho.terms.items():
        rho_orbits.setdefault(eid, []).append(h)
    candidates = set()
    for (h1, eid) in x.terms:
        for h2 in rho_orbits.get(eid, ()):
            candidates.add(multiply(h1, invert(h2)))
    if search_radius > 0 and candidates:
        overlaps = list(overlap_data(rho))
        frontier = set(candidates)
        for _ in range(search_radius):
            nxt = set()
            for g in frontier:
                for o in overlaps:
                    h = multiply(g, o)
                    if h not in candidates:
                        candidates.add(h)
                        nxt.add(h)
            frontier = nxt
    gs = sorted(candidates, key=words.word_key)
    if not gs:
        return ProjectionResult([], x)
    translates = [rho.translate(g) for g in gs]
    m = len(gs)
    gram = [[translates[i].inner(translates[j]) for j in range(m)] for i in range(m)]
    rhs = [translates[i].inner(x) for i in range(m)]
    sol, pseudo = _solve_psd(gram, rhs)
    coeffs = [(q, g) for q, g in zip(sol, gs) if q]
    proj = OneChain.zero()
    for q, g in coeffs:
        proj = proj + rho.translate(g).scale(q)
    return ProjectionResult(coeffs, x - proj, pseudo=pseudo)


def _solve_psd(gram, rhs):
    """Gaussian elimination over Q; free variables pinned to 0 (the normal
    equations of a projection are always consistent)."""
    m = len(gram)
    a = [row[:] + [rhs[i]] for i, row in enumerate(gram)]
    pivots = []
    row = 0
    for col in range(m):
        pivot = None
        for r in range(row, m):
            if a[r][col]:
                pivot = r
                break
        if pivot is None:
            continue
        a[row], a[pivot] = a[pivot], a[row]
        pv = a[row][col]
        a[row] = [v / pv for v in a[row]]
        for r in range(m):
            if r != row and a[r][col]:
                factor = a[r][col]
                a[r] = [v - factor * w for v, w in zip(a[r], a[row])]
        pivots.append(col)
        row += 1
        if row == m:
            break
    sol = [Fraction(0)] * m
    for r, col in enumerate(pivots):
        sol[col] = a[r][m]
    pseudo = len(pivots) < m
    return sol, pseudo


def angle_filter(x, rho, theta, search_radius=1):
    """True iff x makes angle < arccos(theta) with its part off the
    quasi-fixed span (always true when rho is None, i.e. V_qf = 0)."""
    if rho is None:
        return bool(x)
    if not x:
        return False
    theta = Fraction(theta)
    result = project_quasifixed(x, rho, search_radius)
    r2 = result.residual.norm_sq()
    # <x, residual> = |residual|^2, so the angle condition collapses to
    # |residual| > theta |x|
    return r2 > theta * theta * x.norm_sq()


def _ratio_sq_general(cm, H, x, N):
    aN = cm.apply_rel_power(x, H, N)
    a2N = cm.apply_rel_power(aN, H, N)
    denom = aN.norm_sq()
    if denom == 0:
        return None
    return max(a2N.norm_sq(), x.norm_sq()) / denom


def _ratio_sq_rose(cm_fwd, cm_bwd, x, N):
    fwd = x
    bwd = x
    for _ in range(N):
        fwd = cm_fwd.apply(fwd)
        bwd = cm_bwd.apply(bwd)
    return max(fwd.norm_sq(), bwd.norm_sq()) / x.norm_sq()


def flare_scan(gm, H=frozenset(), rho=None, params=None):
    """General-mode scan of the flare inequality at power N."""
    params = params or FlareParams()
    H = frozenset(H)
    N = params.power if params.power is not None else default_power(gm)
    cm = ChainMap(gm)
    positions = ball_edge_positions(gm.graph, params.radius, H)
    tested = 0
    excluded = 0
    best_sq = None
    witness = None
    gen = enumerate_chains(positions, params.coeff_bound, params.budget)
    produced = 0
    for x in gen:
        produced += 1
        if rho is not None and not angle_filter(
            x, rho, params.theta, params.search_radius
        ):
            excluded += 1
            continue
        ratio_sq = _ratio_sq_general(cm, H, x, N)
        tested += 1
        if ratio_sq is None:
            continue
        if best_sq is None or ratio_sq < best_sq:
            best_sq = ratio_sq
            witness = x
    partial = produced >= params.budget and _space_size(
        len(positions), params.coeff_bound
    ) > params.budget
    report = _finish_report(
        gm, H, rho, params, N, best_sq, witness, tested, excluded, partial,
        mode="general", cm=cm,
    )
    return report


def rose_flare_scan(gm, params=None, phi=None):
    """Rose-mode scan: the monodromy must be invertible (inverse images
    supplied); uses max(|A^N x|, |A^-N x|) / |x|."""
    from chaintorque.graphs import induced_automorphism

    params = params or FlareParams(mode="rose-invertible")
    g = gm.graph
    if len(set(g.vertices)) != 1 or g.tree:
        raise ValueError("rose mode needs a rose (single vertex, empty tree)")
    phi = phi if phi is not None else induced_automorphism(gm)
    if not phi.has_inverse:
        raise MissingInverseError(
            "rose mode needs inverse images ('invimages' lines)"
        )
    N = params.power if params.power is not None else default_power(gm)
    cm_fwd = ChainMap(gm, phi=phi)
    inv_gm = rose_map_from_endo(g, phi.inverse())
    cm_bwd = ChainMap(inv_gm, phi=phi.inverse())
    # inverse consistency on the basis edges
    for eid in g.edge_ids:
        e_chain = OneChain.single(IDENTITY, eid)
        if cm_bwd.apply(cm_fwd.apply(e_chain)) != e_chain:
            raise ValueError("inverse images do not invert the chain map")
    positions = ball_edge_positions(g, params.radius)
    tested = 0
    best_sq = None
    witness = None
    produced = 0
    for x in enumerate_chains(positions, params.coeff_bound, params.budget):
        produced += 1
        ratio_sq = _ratio_sq_rose(cm_fwd, cm_bwd, x, N)
        tested += 1
        if best_sq is None or ratio_sq < best_sq:
            best_sq = ratio_sq
            witness = x
    partial = produced >= params.budget and _space_size(
        len(positions), params.coeff_bound
    ) > params.budget
    return _finish_report(
        gm, frozenset(), None, params, N, best_sq, witness, tested, 0, partial,
        mode="rose-invertible", cm=cm_fwd, cm_bwd=cm_bwd,
    )


def rose_map_from_endo(graph, endo):
    """The rose graph map realizing a free endomorphism."""
    base = graph.basepoint
    edge_of_gen = {i + 1: eid for i, eid in enumerate(graph.generator_edges)}
    emap = {}
    for i, eid in enumerate(graph.generator_edges):
        image = endo.images[i]
        emap[eid] = tuple(
            (edge_of_gen[abs(x)], 1 if x > 0 else -1) for x in image
        )
    return GraphMap(graph, {base: base}, emap)


def _space_size(positions, c):
    # nonzero chains with entries in [-c, c], up to the leading-sign symmetry
    if positions == 0:
        return 0
    return ((2 * c + 1) ** positions - 1) // 2


def _finish_report(
    gm, H, rho, params, N, best_sq, witness, tested, excluded, partial,
    mode, cm, cm_bwd=None,
):
    if best_sq is None:
        lam_min = math.inf
    else:
        lam_min = math.sqrt(float(best_sq))
        # falsifier soundness: recompute the witness ratio independently
        if mode == "general":
            check = _ratio_sq_general(cm, H, witness, N)
        else:
            check = _ratio_sq_rose(cm, cm_bwd, witness, N)
        if check != best_sq:
            raise AssertionError("witness ratio failed recomputation")
    residual_change = None
    if rho is not None and witness is not None:
        r1 = project_quasifixed(witness, rho, params.search_radius).residual
        r2 = project_quasifixed(witness, rho, params.search_radius + 1).residual
        residual_change = float((r1 - r2).norm_sq())
    return FlareReport(
        lam_min=lam_min,
        lam_min_sq=best_sq,
        witness=witness,
        tested_count=tested,
        quasi_fixed_excluded=excluded,
        mode=mode,
        params=params,
        power=N,
        partial=partial,
        residual_change=residual_change,
    )


def iterate_consequences(gm, H, x, lam, j):
    """Consistency check of the iterated flare inequalities for a concrete
    chain: when the one-step hypothesis holds, the j-step conclusion must
    (vacuously true when neither hypothesis applies or x = 0)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if not x:
        return True
    lam = Fraction(lam)
    lam2 = lam * lam
    H = frozenset(H)
    cm = ChainMap(gm)
    iterates = [x.project_rel(H)]
    for _ in range(j):
        iterates.append(cm.apply_rel(iterates[-1], H))
    norms = [y.norm_sq() for y in iterates]
    ok = True
    # downward: lam |A x| <= |x| at every step forces lam^j |A^j x| <= |x|
    if all(lam2 * norms[i + 1] <= norms[i] for i in range(j)):
        ok = ok and (lam2 ** j) * norms[j] <= norms[0]
    # upward: lam |x| <= |A x| at every step forces lam^j |x| <= |A^j x|
    if all(lam2 * norms[i] <= norms[i + 1] for i in range(j)):
        ok = ok and (lam2 ** j) * norms[0] <= norms[j]
    return ok
