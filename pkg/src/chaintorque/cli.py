"""Command-line front door.

Subcommands: analyze, jacobian, nielsen, trho, flare-scan, det, moments,
torsion.  Exit codes: 0 success/affirmative verdict, 1 negative verdict,
2 parse error, 3 missing-data error.  Reports are deterministic JSON
(schema-versioned, exactness-tagged scalars).
"""

import argparse
import os
import sys
from fractions import Fraction

from chaintorque import jsonio, words
from chaintorque.chains import jacobian, parse_chain
from chaintorque.detfk import log_det_fk, torsion_estimate
from chaintorque.flare import FlareParams, flare_scan, rose_flare_scan
from chaintorque.graphs import (
    ParseError,
    induced_automorphism,
    load_graph_map,
    strata_decomposition,
    transition_matrix,
)
from chaintorque.nielsen import (
    CertificationError,
    NotGeometricError,
    build_trho,
    classify_chain,
    classify_nielsen,
    dot_export,
)
from chaintorque.ring import moments as ring_moments
from chaintorque.ring import parse_ring_matrix
from chaintorque.words import IDENTITY, MissingInverseError

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_PARSE = 2
EXIT_MISSING = 3


def _load_gm(path):
    try:
        return load_graph_map(path)
    except (ParseError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE) from err


def _word_arg(text, graph):
    return words.word_from_text(text, graph.generator_names)


def _H_arg(text, graph):
    if not text:
        return frozenset()
    eids = [e for e in text.split(",") if e]
    for eid in eids:
        if eid not in graph.origin:
            print(f"error: unknown edge {eid!r} in --H", file=sys.stderr)
            raise SystemExit(EXIT_PARSE)
    return frozenset(eids)


def _emit(payload):
    print(jsonio.dumps(payload))


def cmd_analyze(args):
    gm = _load_gm(args.gm)
    fil = strata_decomposition(gm)
    strata = [
        {
            "index": s.index,
            "edges": s.edges,
            "matrix": s.block,
            "lambda": jsonio.approx(s.lam),
            "is_eg": s.is_eg,
        }
        for s in fil.strata
    ]
    payload = {
        "graph": gm.graph.name,
        "transition_matrix": transition_matrix(gm),
        "edge_order": fil.edge_order,
        "strata": strata,
        "eg_set": fil.eg_set,
        "reduced": fil.reduced,
    }
    if gm.fixes_basepoint():
        phi = induced_automorphism(gm)
        names = gm.graph.generator_names
        payload["marking"] = {
            "generators": list(names),
            "generator_edges": gm.graph.generator_edges,
            "images": {
                names[i]: words.word_to_text(phi.images[i], names)
                for i in range(phi.rank)
            },
        }
    else:
        payload["marking"] = None
        payload["note"] = "basepoint not fixed; marking requires stabilization"
    _emit(payload)
    return EXIT_OK


def cmd_jacobian(args):
    gm = _load_gm(args.gm)
    fil = strata_decomposition(gm)
    if args.stratum is not None:
        strata = [s for s in fil.strata if s.index == args.stratum]
        if not strata:
            print(f"error: no stratum {args.stratum}", file=sys.stderr)
            return EXIT_PARSE
        edge_sets = [(strata[0].index, strata[0].edges)]
    else:
        edge_sets = [(None, None)]
    blocks = []
    names = gm.graph.generator_names
    for index, edges in edge_sets:
        J = jacobian(gm, stratum_edges=edges)
        blocks.append(
            {
                "stratum": index,
                "edges": edges if edges is not None else gm.graph.edge_ids,
                "entries": [
                    [
                        [
                            [str(c), J.context.format(g, names)]
                            for g, c in sorted(
                                el.terms.items(), key=lambda kv: words.word_key(kv[0])
                            )
                        ]
                        for el in row
                    ]
                    for row in J.entries
                ],
            }
        )
    _emit({"graph": gm.graph.name, "jacobian": blocks})
    return EXIT_OK


def cmd_nielsen(args):
    gm = _load_gm(args.gm)
    g = gm.graph
    H = _H_arg(args.H, g)
    u = (_word_arg(args.u, g), args.u_vertex or g.basepoint)
    v = (_word_arg(args.v, g), args.v_vertex or g.basepoint)
    try:
        cert = classify_nielsen(gm, H, u, v)
    except CertificationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    names = g.generator_names
    payload = {
        "verdict": cert.verdict,
        "endpoints_fixed": cert.endpoints_fixed,
        "d": cert.d,
        "fixed_by_map": cert.fixed_by_map,
    }
    if cert.witness_edge is not None:
        h, eid = cert.witness_edge
        payload["witness_edge"] = [words.word_to_text(h, names), eid]
    if cert.overlap is not None:
        payload["overlap"] = {
            words.word_to_text(g_el, names): {
                "shared": [
                    [words.word_to_text(h, names), eid]
                    for h, eid in datum.shared
                ],
                "nonorientable": datum.single and datum.nonorientable,
            }
            for g_el, datum in sorted(
                cert.overlap.items(), key=lambda kv: words.word_key(kv[0])
            )
        }
    if cert.violated is not None:
        payload["violated"] = cert.violated
        payload["witness"] = repr(cert.witness)
    _emit(payload)
    return EXIT_OK if cert.is_nielsen else EXIT_NEGATIVE


def cmd_trho(args):
    gm = _load_gm(args.gm)
    g = gm.graph
    H = _H_arg(args.H, g)
    try:
        with open(args.rho, encoding="utf-8") as handle:
            rho = parse_chain(handle.read(), g)
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    cert = classify_chain(rho, g, H)
    if cert.verdict != "geometric":
        print(
            f"error: chain is not geometric (verdict {cert.verdict})",
            file=sys.stderr,
        )
        return EXIT_NEGATIVE
    try:
        t = build_trho(rho, args.radius, cert=cert)
    except NotGeometricError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NEGATIVE
    names = g.generator_names
    fmt = lambda w: words.word_to_text(w, names)
    payload = {
        "radius": args.radius,
        "d": t.d,
        "vertices": [fmt(w) for w in sorted(t.vertices, key=words.word_key)],
        "edges": [
            {
                "ends": [fmt(a), fmt(b)],
                "label": [fmt(label[0]), label[1]],
                "nonorientable": non,
            }
            for a, b, label, non in sorted(
                t.edges, key=lambda e: (words.word_key(e[0]), words.word_key(e[1]))
            )
        ],
        "signs": {
            fmt(w): t.sign[w] for w in sorted(t.sign, key=words.word_key)
        },
    }
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as handle:
            handle.write(dot_export(t, names))
        payload["dot"] = args.dot
    _emit(payload)
    return EXIT_OK


def cmd_flare_scan(args):
    gm = _load_gm(args.gm)
    g = gm.graph
    H = _H_arg(args.H, g)
    rho = None
    if args.rho:
        with open(args.rho, encoding="utf-8") as handle:
            rho = parse_chain(handle.read(), g)
    params = FlareParams(
        radius=args.radius,
        coeff_bound=args.coeff_bound,
        power=args.power,
        theta=Fraction(args.theta),
        budget=args.budget,
        mode="rose-invertible" if args.rose else "general",
    )
    try:
        if args.rose:
            report = rose_flare_scan(gm, params)
        else:
            report = flare_scan(gm, H, rho, params)
    except MissingInverseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    names = g.generator_names
    witness_lines = None
    if report.witness is not None:
        witness_lines = [
            [str(c), words.word_to_text(gw, names), eid]
            for (gw, eid), c in report.witness.sorted_terms()
        ]
    payload = {
        "mode": report.mode,
        "power": report.power,
        "lambda_min": jsonio.approx(
            None if report.lam_min_sq is None else report.lam_min
        ),
        "lambda_min_sq": None
        if report.lam_min_sq is None
        else jsonio.exact(report.lam_min_sq),
        "witness": witness_lines,
        "tested": report.tested_count,
        "quasi_fixed_excluded": report.quasi_fixed_excluded,
        "partial": report.partial,
        "disclaimer": report.disclaimer,
        "vh_convention": report.vh_convention,
        "residual_change": jsonio.approx(report.residual_change)
        if report.residual_change is not None
        else None,
        "params": {
            "radius": params.radius,
            "coeff_bound": params.coeff_bound,
            "theta": str(params.theta),
            "budget": params.budget,
        },
    }
    _emit(payload)
    return EXIT_OK


def _load_operator(path, terms_hint):
    """A .rm matrix, or the I - t J_1(f) operator of a .gm file."""
    if path.endswith(".rm"):
        with open(path, encoding="utf-8") as handle:
            return parse_ring_matrix(handle.read(), gm_loader=load_graph_map)
    gm = _load_gm(path)
    from chaintorque.detfk import build_torsion_operator

    phi = induced_automorphism(gm)
    op, _ctx = build_torsion_operator(
        gm, phi, [e for e in gm.graph.edge_ids if e in _basepoint_edges(gm)]
    )
    return op


def _basepoint_edges(gm):
    g = gm.graph
    base = g.component_of(g.basepoint)
    return {e for e in g.edge_ids if g.component_of(g.origin[e]) == base}


def cmd_det(args):
    try:
        M = _load_operator(args.input, args.terms)
    except MissingInverseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    est = log_det_fk(
        M,
        args.terms,
        support_cap=args.support_cap,
        tail="none" if args.no_tail else "auto",
        tighten_k=args.tighten_k,
    )
    _emit(_det_payload(est))
    return EXIT_OK


def _det_payload(est):
    return {
        "k_bound": jsonio.approx(est.k_bound),
        "estimate": jsonio.approx(est.estimate),
        "raw_estimate": jsonio.approx(est.raw_estimate),
        "partial_sums": [jsonio.approx(s) for s in est.partial_sums],
        "terms_used": est.terms_used,
        "tail_model": est.tail_model,
        "tail_correction": jsonio.approx(est.tail_correction),
        "warnings": est.warnings,
    }


def cmd_moments(args):
    if args.input.endswith(".rm"):
        with open(args.input, encoding="utf-8") as handle:
            M = parse_ring_matrix(handle.read(), gm_loader=load_graph_map)
    else:
        gm = _load_gm(args.input)
        try:
            phi = induced_automorphism(gm)
        except MissingInverseError as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_MISSING
        from chaintorque.detfk import build_torsion_operator
        from chaintorque.ring import RingMatrix

        op, ctx = build_torsion_operator(
            gm, phi, sorted(_basepoint_edges(gm), key=gm.graph.edge_index.get)
        )
        M = RingMatrix.identity(ctx, op.rows) - op  # the operator L = tJ
    try:
        vals = ring_moments(M, args.kmax)
    except MissingInverseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    _emit({"moments": [jsonio.exact(v) for v in vals]})
    return EXIT_OK


def cmd_torsion(args):
    gm = _load_gm(args.gm)
    try:
        report = torsion_estimate(
            gm,
            terms=args.terms,
            support_cap=args.support_cap,
            stabilize=args.stabilize,
            power=args.power,
            tail="none" if args.no_tail else "auto",
        )
    except MissingInverseError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MISSING
    payload = {
        "eg_set": report.eg_set,
        "total": jsonio.approx(report.total),
        "exact_zero": report.exact_zero,
        "stabilization_power": report.stabilization_power,
        "monodromy_power": report.power,
        "budget": report.budget,
        "warnings": report.warnings,
        "strata": [
            {
                "index": s.index,
                "n": s.n,
                "lambda": jsonio.approx(s.lam),
                "det": _det_payload(s.det),
            }
            for s in report.strata
        ],
    }
    _emit(payload)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chaintorque",
        description=(
            "analyze train-track style graph maps, certify Nielsen 1-chains, "
            "scan the chain flare inequality and estimate L2-torsion"
        ),
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=int(os.environ.get("CHAINTORQUE_JOBS", "1")),
        help="worker cap (results are deterministic regardless)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="strata, PF values, EG set, marking")
    p.add_argument("gm")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("jacobian", help="group-ring Jacobian of the chain map")
    p.add_argument("gm")
    p.add_argument("--stratum", type=int, default=None)
    p.set_defaults(func=cmd_jacobian)

    p = sub.add_parser("nielsen", help="classify pi_H-perp([u,v])")
    p.add_argument("gm")
    p.add_argument("--u", required=True, help="group element labeling u")
    p.add_argument("--v", required=True, help="group element labeling v")
    p.add_argument("--u-vertex", default=None)
    p.add_argument("--v-vertex", default=None)
    p.add_argument("--H", default="", help="comma-separated invariant edge ids")
    p.set_defaults(func=cmd_nielsen)

    p = sub.add_parser("trho", help="build a ball of the overlap graph")
    p.add_argument("gm")
    p.add_argument("--rho", required=True, help=".chain file")
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--H", default="")
    p.add_argument("--dot", default=None, help="write DOT here")
    p.set_defaults(func=cmd_trho)

    p = sub.add_parser("flare-scan", help="scan the flare inequality")
    p.add_argument("gm")
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--coeff-bound", type=int, default=1)
    p.add_argument("--power", type=int, default=None)
    p.add_argument("--theta", default="1/2")
    p.add_argument("--rose", action="store_true", help="invertible rose mode")
    p.add_argument("--rho", default=None, help=".chain file spanning V_qf")
    p.add_argument("--H", default="")
    p.add_argument("--budget", type=int, default=200_000)
    p.set_defaults(func=cmd_flare_scan)

    p = sub.add_parser("det", help="Fuglede-Kadison log-determinant")
    p.add_argument("input", help=".rm matrix or .gm file (I - tJ operator)")
    p.add_argument("--terms", type=int, default=200)
    p.add_argument("--support-cap", type=int, default=None)
    p.add_argument("--no-tail", action="store_true")
    p.add_argument("--tighten-k", action="store_true")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("moments", help="exact traces of operator powers")
    p.add_argument("input", help=".rm matrix or .gm file (L = tJ operator)")
    p.add_argument("--kmax", type=int, default=6)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("torsion", help="estimate -rho^(2) via det-splitting")
    p.add_argument("gm")
    p.add_argument("--terms", type=int, default=48)
    p.add_argument("--support-cap", type=int, default=14)
    p.add_argument("--stabilize", action="store_true", default=True)
    p.add_argument("--no-stabilize", dest="stabilize", action="store_false")
    p.add_argument("--power", type=int, default=1)
    p.add_argument("--no-tail", action="store_true")
    p.set_defaults(func=cmd_torsion)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        code = EXIT_PARSE
    raise SystemExit(code)


if __name__ == "__main__":
    main()
