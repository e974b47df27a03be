"""Compare the compiled and numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on
the same inputs under both backends; the table reports the best of
``--repeat`` runs and the speed-up of the compiled code. A final row
times one full training iteration through :func:`compograph.model.grad`.
"""

import argparse
import timeit

import numpy as np

from compograph import kernels
from compograph.graphio import Graph
from compograph.model import EPS, NegativeSampler, grad, init_state


def make_inputs(N, E, K, neg_ratio, seed):
    rng = np.random.default_rng(seed)
    keys = rng.choice(N * (N - 1) // 2, size=E, replace=False)
    iu, ju = np.triu_indices(N, 1)
    graph = Graph(N, np.column_stack([iu[keys], ju[keys]]))
    X = rng.normal(size=(N, K - 1))
    gamma = rng.normal(size=N)
    neg = NegativeSampler(graph).sample(int(neg_ratio * E), rng)
    indptr, indices = kernels.csr_neighbours(N, graph.edges)
    cand = rng.integers(0, N, size=(len(neg), 2))
    ci, cj = cand.min(axis=1), cand.max(axis=1)
    return graph, X, gamma, neg, (indptr, indices, ci, cj)


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--E", type=int, default=10000)
    ap.add_argument("--K", type=int, default=9)
    ap.add_argument("--neg-ratio", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    graph, X, gamma, neg, mask_args = make_inputs(args.N, args.E, args.K, args.neg_ratio, args.seed)
    w = graph.num_non_edges / len(neg)
    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")

    cases = {
        "pair_log_odds": lambda b: kernels.pair_log_odds(X, gamma, neg, EPS, backend=b),
        "pair_objective": lambda b: kernels.pair_objective(X, gamma, graph.edges, neg, w, EPS, backend=b),
        "non_edge_mask": lambda b: kernels.non_edge_mask(*mask_args, backend=b),
    }
    print(f"N={args.N} E={args.E} K={args.K} negatives={len(neg)} (active backend: {kernels.BACKEND})")
    print(f"{'kernel':<16}" + "".join(f"{b + ' ms':>12}" for b in backends) + f"{'speed-up':>10}")
    for name, fn in cases.items():
        t = {b: best(lambda b=b: fn(b), args.repeat, 3) for b in backends}
        row = f"{name:<16}" + "".join(f"{1e3 * t[b]:>12.3f}" for b in backends)
        if "cython" in t:
            row += f"{t['python'] / t['cython']:>9.1f}x"
        print(row)

    state = init_state(args.N, args.K, seed=args.seed)
    sampler = NegativeSampler(graph)
    rng = np.random.default_rng(args.seed)
    t_iter = best(lambda: grad(state, sampler.batch(len(neg), rng)), args.repeat, 3)
    print(f"{'train iteration':<16}{1e3 * t_iter:>12.3f} ms with the active backend")


if __name__ == "__main__":
    main()
