"""Fuglede-Kadison log-determinant estimation and the L2-torsion pipeline.

For injective right multiplication by a square group-ring matrix M,

    log det(M) = 1/2 [ n log K^2 - sum_{k>=1} (1/k) tr((I - M*M/K^2)^k) ]

with K an upper bound for the operator norm.  Traces are exact rationals
(integers in a scaled fast path); partial sums are nonincreasing.  Without a
spectral gap the plain truncation converges like a power of 1/N, so the
engine optionally completes the tail by fitting the positive term sequence
with a geometric or power-law model (Hurwitz zeta for the latter); raw
partial sums are always reported alongside.
"""

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import mpmath

from chaintorque._wordops import GroupConvolver
from chaintorque.chains import ChainMap, jacobian_rows
from chaintorque.graphs import stabilize_vertices, strata_decomposition
from chaintorque.ring import (
    FreeByCyclicContext,
    RingElement,
    RingMatrix,
    adjoint,
    operator_norm_bound,
)


@dataclass
class DetEstimate:
    """Series output: `estimate` is the engine's best value (tail-completed
    when the model fit succeeded), `raw_estimate` the last partial sum."""

    k_bound: float
    estimate: float
    raw_estimate: float
    partial_sums: list
    terms_used: int
    warnings: list = dc_field(default_factory=list)
    tail_model: str = None
    tail_correction: float = 0.0
    trace_terms: list = None


def _all_integer(P, K2):
    if K2.denominator != 1:
        return False
    return all(
        c.denominator == 1 for row in P.entries for el in row for c in el.terms.values()
    )


PACKED_IDENTITY = 2048  # word id 0 (empty word), t-degree 0
MAX_SERIES_TERMS = 2000  # packed t-degrees live in [-2048, 2047]


def _build_convolver(ctx, support_cap):
    if ctx.kind == "fbc":
        working = None if support_cap is None else 2 * support_cap + 8
        return GroupConvolver(
            ctx.phi.images, ctx.phi.inverse_images, support_cap, working
        )
    if ctx.kind == "free":
        return GroupConvolver(None, None, support_cap, support_cap)
    return GroupConvolver()


def _pack_element(ctx, g, conv):
    if ctx.kind == "fbc":
        w, m = g
        return conv.pack(w, m)
    if ctx.kind == "integers":
        return conv.pack((), g)
    return conv.pack(g, 0)


def _pack_matrix(P, conv, int_mode):
    ctx = P.context
    out = []
    for row in P.entries:
        out_row = []
        for el in row:
            cell = {}
            for g, c in el.terms.items():
                cell[_pack_element(ctx, g, conv)] = int(c) if int_mode else c
            out_row.append(cell)
        out.append(out_row)
    return out


def _half_power_traces(Bp, conv, n, terms):
    """Raw traces of B^k, k = 1..terms, via half powers.

    B is self-adjoint here (K^2 I - M*M), so tr(B^{2m}) is the coefficient
    sum of squares of B^m and tr(B^{2m-1}) the pointwise dot of consecutive
    half powers; only ceil(terms/2) multiplications are needed and the
    expensive deep iterates never materialize.
    """
    u_prev = [
        [({PACKED_IDENTITY: 1} if i == j else {}) for j in range(n)]
        for i in range(n)
    ]
    traces = []
    while len(traces) < terms:
        u = [[{} for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for l in range(n):
                a = u_prev[i][l]
                if not a:
                    continue
                for j in range(n):
                    b = Bp[l][j]
                    if b:
                        conv.convolve(u[i][j], a, b)
        odd = 0
        for i in range(n):
            for j in range(n):
                odd += conv.dot(u_prev[i][j], u[i][j])
        traces.append(odd)
        if len(traces) >= terms:
            break
        even = 0
        for i in range(n):
            for j in range(n):
                even += conv.sum_squares(u[i][j])
        traces.append(even)
        u_prev = u
        if all(not u[i][j] for i in range(n) for j in range(n)):
            traces.extend([0] * (terms - len(traces)))
            break
    return traces[:terms]


def log_det_fk(M, terms, support_cap=None, tail="auto", tighten_k=False):
    """Estimate log det of right multiplication by M (intended injective).

    ``support_cap`` bounds the word length of retained support elements
    (free-by-cyclic and free contexts); capped runs are flagged approximate
    and skip tail completion.  ``tail`` is "auto" or "none".
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if terms > MAX_SERIES_TERMS:
        raise ValueError(f"terms must be <= {MAX_SERIES_TERMS}")
    if M.rows != M.cols:
        raise ValueError("log_det_fk needs a square matrix")
    n = M.rows
    ctx = M.context
    warnings = []
    if all(not el for row in M.entries for el in row):
        return DetEstimate(
            k_bound=0.0,
            estimate=0.0,
            raw_estimate=0.0,
            partial_sums=[0.0],
            terms_used=0,
            warnings=["zero operator: Fuglede-Kadison determinant is 1 by convention"],
        )
    K = operator_norm_bound(M)
    P = adjoint(M).mul(M)
    K2 = K * K
    if tighten_k:
        K2t = _tight_k2(P)
        if K2t is not None and K2t < K2:
            K2 = K2t
            warnings.append(
                "tightened K from power-iteration traces; the upper-bound "
                "guarantee is heuristic"
            )
    int_mode = _all_integer(P, K2) and isinstance(K2, Fraction)
    conv = _build_convolver(ctx, support_cap)
    B = _pack_matrix(P, conv, int_mode)
    for row in B:
        for cell in row:
            for key in list(cell):
                cell[key] = -cell[key]
    K2_value = int(K2) if int_mode else K2
    for i in range(n):
        B[i][i][PACKED_IDENTITY] = B[i][i].get(PACKED_IDENTITY, 0) + K2_value
        if not B[i][i][PACKED_IDENTITY]:
            del B[i][i][PACKED_IDENTITY]
    log_k2 = math.log(float(K2))
    raw_traces = _half_power_traces(B, conv, n, terms)
    state = {"truncated": conv.truncated}
    # trim trailing exact zeros (terminated series)
    last = len(raw_traces)
    while last > 1 and not raw_traces[last - 1]:
        last -= 1
    raw_traces = raw_traces[:last]
    trace_terms = []
    summands = []
    partial = []
    series_sum = 0.0
    scale = 1
    for k, r in enumerate(raw_traces, start=1):
        scale = scale * K2_value
        a_k = float(Fraction(r, scale) if int_mode else Fraction(r) / (K2 ** k))
        if a_k < 0 and not state["truncated"]:
            raise AssertionError("negative exact trace term; K bound violated")
        trace_terms.append(a_k)
        summands.append(a_k / k)
        series_sum += a_k / k
        partial.append(0.5 * (n * log_k2 - series_sum))
    if state["truncated"]:
        warnings.append("truncated-support: traces beyond the cap are approximate")
    raw = partial[-1]
    estimate = raw
    tail_model = None
    tail_corr = 0.0
    if tail == "auto":
        tail_model, tail_sum, note = _fit_tail(summands)
        if note:
            warnings.append(note)
        if tail_model is not None:
            tail_corr = 0.5 * tail_sum
            estimate = raw - tail_corr
            if state["truncated"]:
                warnings.append(
                    "tail completion fitted support-truncated traces"
                )
    return DetEstimate(
        k_bound=math.sqrt(float(K2)),
        estimate=estimate,
        raw_estimate=raw,
        partial_sums=partial[-10:],
        terms_used=len(trace_terms),
        warnings=warnings,
        tail_model=tail_model,
        tail_correction=tail_corr,
        trace_terms=trace_terms,
    )


def _tight_k2(P, steps=8):
    """Heuristic norm bound for P from trace ratios of its powers."""
    try:
        power = P
        traces = []
        for _ in range(steps):
            t = sum(
                (power.entries[i][i].identity_coefficient() for i in range(P.rows)),
                Fraction(0),
            )
            traces.append(t)
            size = sum(len(el.terms) for row in power.entries for el in row)
            if size > 20000:
                return None
            power = power.mul(P)
        ratios = [
            traces[i + 1] / traces[i]
            for i in range(len(traces) - 1)
            if traces[i] > 0
        ]
        if not ratios:
            return None
        return max(ratios) * Fraction(1000001, 1000000)
    except ZeroDivisionError:
        return None


def _linfit(xs, ys):
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    denom = n * sxx - sx * sx
    if denom == 0:
        return None
    slope = (n * sxy - sx * sy) / denom
    intercept = (sy - slope * sx) / n
    return slope, intercept


def _fit_tail(a):
    """Model the tail sum of the positive term sequence a_k = (1/k)tr(Q^k).

    Returns (model, tail_sum, note).  Geometric and power-law models are fit
    on a trailing window and chosen by held-out prediction error; anchored at
    the final term so only the decay rate matters.
    """
    N = len(a)
    if N == 0 or a[-1] <= 0.0:
        return None, 0.0, None
    if N < 16:
        return None, 0.0, "tail completion skipped: too few terms"
    width = max(10, N // 3)
    idx = list(range(N - width, N))
    if any(a[i] <= 0.0 for i in idx):
        return None, 0.0, "tail completion skipped: nonpositive trailing terms"
    ks = [i + 1.0 for i in idx]
    logs = [math.log(a[i]) for i in idx]
    half = width // 2
    fits = {}
    errors = {}
    for model in ("geometric", "power"):
        xs = ks if model == "geometric" else [math.log(k) for k in ks]
        fit = _linfit(xs[:half], logs[:half])
        if fit is None:
            continue
        slope, intercept = fit
        predicted = [intercept + slope * x for x in xs[half:]]
        errors[model] = sum((p - y) ** 2 for p, y in zip(predicted, logs[half:]))
        fits[model] = _linfit(xs, logs)
    if not errors:
        return None, 0.0, "tail completion skipped: degenerate fit"
    model = min(errors, key=lambda m: errors[m])
    slope, _ = fits[model]
    a_last = a[-1]
    if model == "geometric":
        r = math.exp(slope)
        if not (0.0 < r < 1.0 - 1e-12):
            return None, 0.0, "tail completion skipped: no geometric decay"
        return "geometric", a_last * r / (1.0 - r), None
    p = -slope
    if p <= 1.02:
        return (
            None,
            0.0,
            "tail completion skipped: decay exponent too close to 1",
        )
    # sum_{k > N} a_N (k/N)^-p = a_N N^p zeta(p, N+1)
    tail = a_last * float(mpmath.power(N, p) * mpmath.zeta(p, N + 1))
    return "power", tail, None


# --- torsion pipeline ---------------------------------------------------------


@dataclass
class StratumTorsion:
    index: int
    n: int
    lam: float
    det: DetEstimate


@dataclass
class TorsionReport:
    strata: list                  # StratumTorsion for EG strata
    eg_set: list
    total: float
    exact_zero: bool
    stabilization_power: int
    power: int                    # explicit monodromy power analysed
    budget: dict
    warnings: list = dc_field(default_factory=list)


def build_torsion_operator(gm, phi, stratum_edges, chain_map=None):
    """I - t J_1(f)_s over the free-by-cyclic context."""
    ctx = FreeByCyclicContext(phi, names=gm.graph.generator_names)
    eids, rows = jacobian_rows(gm, stratum_edges, chain_map=chain_map)
    col = {eid: j for j, eid in enumerate(eids)}
    n = len(eids)
    t = RingElement.of(ctx, ((), 1))
    entries = [[RingElement.zero(ctx) for _ in range(n)] for _ in range(n)]
    for i, row in enumerate(rows):
        for (g, eid), c in row.items():
            j = col[eid]
            entries[i][j] = entries[i][j] + RingElement.of(ctx, (g, 0), c)
    J = RingMatrix(ctx, entries)
    L = RingMatrix(
        ctx, [[t.mul(el) for el in row] for row in J.entries]
    )
    return RingMatrix.identity(ctx, n) - L, ctx


def torsion_estimate(
    gm,
    terms=48,
    support_cap=14,
    stabilize=True,
    power=1,
    tail="auto",
    phi=None,
):
    """Estimate -rho^(2) for the free-by-cyclic group of the map's monodromy
    (raised to ``power``): sum over EG strata of log det(I - t J_1(f)_s).

    Needs inverse images.  When stabilize is set and vertex images are not
    fixed, the map is replaced by the smallest stabilizing power and the
    total divided accordingly (torsion scales linearly in the power).
    """
    from chaintorque.graphs import induced_automorphism
    from chaintorque.words import MissingInverseError

    warnings = []
    work = gm if power == 1 else gm.power(power)
    base_phi = None
    if phi is not None:
        base_phi = phi
    elif gm.fixes_basepoint():
        one_phi = induced_automorphism(gm)
        base_phi = one_phi
        for _ in range(power - 1):
            base_phi = one_phi.compose(base_phi)
    k_stab = 1
    vm = work.vertex_map
    if not all(vm[vm[v]] == vm[v] for v in work.graph.vertices):
        if not stabilize:
            warnings.append(
                "vertex images are not fixed; the det-splitting formula "
                "needs a stabilized power (pass stabilize=True)"
            )
        else:
            work, k_stab = stabilize_vertices(work)
            if base_phi is not None:
                stab_phi = base_phi
                for _ in range(k_stab - 1):
                    stab_phi = base_phi.compose(stab_phi)
                base_phi = stab_phi
            warnings.append(
                f"stabilized at power {k_stab}; per-stratum estimates are "
                f"for the stabilized map and the total is divided by {k_stab}"
            )
    if base_phi is None:
        # the original map did not fix the basepoint: the file's inverse
        # images describe the stabilized power's automorphism
        work = type(work)(
            work.graph, work.vertex_map, work.edge_map,
            inverse_images=gm.inverse_images,
        )
        base_phi = induced_automorphism(work)
    work_phi = base_phi
    fil = strata_decomposition(work)
    eg = [s for s in fil.strata if s.is_eg]
    budget = {"terms": terms, "support_cap": support_cap, "tail": tail}
    if not eg:
        return TorsionReport(
            strata=[],
            eg_set=[],
            total=0.0,
            exact_zero=True,
            stabilization_power=k_stab,
            power=power,
            budget=budget,
            warnings=warnings,
        )
    if not work_phi.has_inverse:
        raise MissingInverseError(
            "torsion needs the inverse automorphism for the EG strata: add "
            "'invimages' lines to the .gm file"
        )
    cm = ChainMap(work, phi=work_phi)
    strata_out = []
    total = 0.0
    for stratum in eg:
        op, _ctx = build_torsion_operator(work, work_phi, stratum.edges, chain_map=cm)
        det = log_det_fk(op, terms, support_cap=support_cap, tail=tail)
        strata_out.append(
            StratumTorsion(index=stratum.index, n=stratum.n, lam=stratum.lam, det=det)
        )
        total += det.estimate
    total /= k_stab
    return TorsionReport(
        strata=strata_out,
        eg_set=[s.index for s in eg],
        total=total,
        exact_zero=False,
        stabilization_power=k_stab,
        power=power,
        budget=budget,
        warnings=warnings,
    )
