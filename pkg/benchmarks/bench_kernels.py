"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py --words 5000 --k 25 --repeat 5

Both backends get identical inputs; the script also checks their outputs agree.
"""

import argparse
import timeit

import numpy as np

from driftlens import kernels


def make_inputs(n_words, dim, n_queries, n_tokens, seed):
    rng = np.random.default_rng(seed)
    ua = rng.standard_normal((n_words, dim))
    ub = ua + 0.3 * rng.standard_normal((n_words, dim))
    ua /= np.linalg.norm(ua, axis=1, keepdims=True)
    ub /= np.linalg.norm(ub, axis=1, keepdims=True)
    q = np.arange(n_queries)
    present = np.ones(n_words, dtype=bool)
    ids = rng.integers(-1, n_words, size=n_tokens)
    starts = np.arange(0, n_tokens + 1, 20)
    if starts[-1] != n_tokens:
        starts = np.append(starts, n_tokens)
    return dict(sa=ua[q] @ ua.T, sb=ub[q] @ ub.T, present=present, queries=q, ids=ids, starts=starts)


def cases(x, k, window, n_words):
    return {
        "topk_rows": lambda b: kernels.topk_rows(x["sa"], x["present"], x["queries"], k, backend=b),
        "local_change_rows": lambda b: kernels.local_change_rows(
            x["sa"], x["sb"], x["present"], x["present"], x["queries"], k, backend=b),
        "cooc_keys": lambda b: kernels.cooc_keys(x["ids"], x["starts"], window, n_words, backend=b),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=0, atol=1e-12, equal_nan=True)
    return np.array_equal(np.sort(a, axis=None), np.sort(b, axis=None))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--words", type=int, default=5000)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--queries", type=int, default=512)
    p.add_argument("--tokens", type=int, default=500_000)
    p.add_argument("--k", type=int, default=25)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    backends = sorted(kernels.BACKENDS)
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    x = make_inputs(args.words, args.dim, args.queries, args.tokens, args.seed)
    print(f"words={args.words} queries={args.queries} k={args.k} tokens={args.tokens} "
          f"window={args.window} (best of {args.repeat})")
    print(f"{'kernel':<20}" + "".join(f"{b + ' [ms]':>16}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(x, args.k, args.window, args.words).items():
        outs = {b: fn(b) for b in backends}
        if len(backends) > 1 and not same(outs["compiled"], outs["python"]):
            raise SystemExit(f"{name}: backends disagree")
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) * 1e3 for b in backends}
        speed = f"{times['python'] / times['compiled']:.1f}x" if "compiled" in times else "-"
        print(f"{name:<20}" + "".join(f"{times[b]:>16.1f}" for b in backends) + f"{speed:>10}")


if __name__ == "__main__":
    main()
