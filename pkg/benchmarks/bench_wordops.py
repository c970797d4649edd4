"""Benchmark the compiled word/convolution kernels against the pure-Python
twins on the workloads that dominate runtime: free-word arithmetic and the
determinant trace series.

Run:  python benchmarks/bench_wordops.py
"""

import random
import time

import chaintorque._convolve_py as convolve_py
import chaintorque._wordops_py as wordops_py

try:
    import chaintorque._speedups as speedups
except ImportError:
    speedups = None


def random_words(rank, length, count, seed=13):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        letters = []
        last = 0
        for _ in range(length):
            while True:
                x = rng.choice([i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)])
                if x != -last:
                    break
            letters.append(x)
            last = x
        out.append(tuple(letters))
    return out


def bench_word_ops(mod, words, repeats=20):
    t0 = time.perf_counter()
    for _ in range(repeats):
        for i in range(len(words) - 1):
            mod.mul_words(words[i], words[i + 1])
        for w in words:
            mod.reduce_word(w + mod.invert_word(w))
    return time.perf_counter() - t0


def bench_det_series(convolver_cls, terms=28, cap=8):
    from chaintorque.detfk import _half_power_traces, _pack_matrix, PACKED_IDENTITY
    from chaintorque.graphs import load_graph_map, induced_automorphism
    from chaintorque.detfk import build_torsion_operator
    from chaintorque.ring import adjoint, operator_norm_bound
    import os

    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    gm = load_graph_map(os.path.join(here, "fixtures", "rose3.gm"))
    phi = induced_automorphism(gm)
    op, ctx = build_torsion_operator(gm, phi, gm.graph.edge_ids)
    P = adjoint(op).mul(op)
    K2 = int(operator_norm_bound(op) ** 2)
    conv = convolver_cls(phi.images, phi.inverse_images, cap, 2 * cap + 8)
    B = _pack_matrix(P, conv, True)
    for row in B:
        for cell in row:
            for key in list(cell):
                cell[key] = -cell[key]
    for i in range(3):
        B[i][i][PACKED_IDENTITY] = B[i][i].get(PACKED_IDENTITY, 0) + K2
    t0 = time.perf_counter()
    traces = _half_power_traces(B, conv, 3, terms)
    dt = time.perf_counter() - t0
    return dt, traces[-1]


def main():
    words = random_words(rank=3, length=40, count=2000)
    t_py = bench_word_ops(wordops_py, words)
    print(f"word ops   pure-python: {t_py:8.3f} s")
    if speedups is not None:
        t_cy = bench_word_ops(speedups, words)
        print(f"word ops   compiled:    {t_cy:8.3f} s   ({t_py / t_cy:.1f}x)")
    else:
        print("word ops   compiled:    (extension not built)")

    dt_py, tr_py = bench_det_series(convolve_py.GroupConvolver)
    print(f"det series pure-python: {dt_py:8.3f} s")
    if speedups is not None:
        dt_cy, tr_cy = bench_det_series(speedups.GroupConvolver)
        agree = "ok" if tr_cy == tr_py else "MISMATCH"
        print(
            f"det series compiled:    {dt_cy:8.3f} s   ({dt_py / dt_cy:.1f}x, traces {agree})"
        )
    else:
        print("det series compiled:    (extension not built)")


if __name__ == "__main__":
    main()
