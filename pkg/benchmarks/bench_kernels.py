"""Time the compiled and pure-numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--docs 50000] [--dim 100] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from lmprf._kernels import available_backends


def score_inputs(rng, n_docs, n_terms, avg_df):
    df = rng.poisson(avg_df, n_terms).clip(1, n_docs)
    ptr = np.concatenate([[0], np.cumsum(df)]).astype(np.int64)
    docs = np.concatenate([np.sort(rng.choice(n_docs, k, replace=False)) for k in df]).astype(np.int32)
    counts = rng.integers(1, 8, len(docs)).astype(np.int32)
    q = rng.choice(n_terms, 50, replace=False).astype(np.int64)
    return ptr, docs, counts, q, rng.random(50), rng.random(50) + 0.01


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--docs", type=int, default=50_000)
    ap.add_argument("--terms", type=int, default=5_000)
    ap.add_argument("--df", type=float, default=400.0, help="mean postings per term")
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    backends = available_backends()
    ptr, docs, counts, q, w, coef = score_inputs(rng, args.docs, args.terms, args.df)
    n = args.dim
    W0 = rng.uniform(-1, 1, (n, n))
    vq = rng.standard_normal(n) / np.sqrt(n)
    pos, neg = rng.standard_normal((40, n)), rng.standard_normal((100, n))

    print(f"{'kernel':<20}{'backend':<10}{'best of ' + str(args.repeat):>14}")
    for name, mod in backends.items():
        out = np.zeros(args.docs)

        def score():
            out[:] = 0.0
            mod.accumulate_scores(ptr, docs, counts, q, w, coef, out)

        def sgd():
            mod.sgd_project(W0.copy(), vq, pos, neg, 0.8, 0.05, 0.01, 0.01, 0.01, args.iters, 0.0)

        for label, fn in [("accumulate_scores", score), ("sgd_project", sgd)]:
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            print(f"{label:<20}{name:<10}{best * 1e3:>12.2f}ms")


if __name__ == "__main__":
    main()
