"""Time every hot kernel under both backends and check they agree.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Numba compile time is excluded: each kernel runs once before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from reponlab.inference import precedence, _initial_order
from reponlab.kernels import close_knowledge, count_automorphisms, rk4_full, rk4_reduced, sample_orders_mcmc, sample_orders_topological
from reponlab.kernels.mlp import tanh_backward


def cases(quick: bool):
    rng = np.random.default_rng(0)
    scale = 0.1 if quick else 1.0

    steps = int(20000 * scale)
    a0 = rng.normal(size=64)
    c0 = rng.normal(size=64)
    ones = np.ones(64)
    reduced_args = (a0, c0, ones, ones, ones, 1e-3, steps, steps)
    yield "rk4_reduced (64 inits)", rk4_reduced.numba_impl, rk4_reduced.numpy_impl, lambda: reduced_args

    A0 = rng.normal(size=(4, 3))
    r0 = rng.normal(size=3)
    yield "rk4_full (4x3)", rk4_full.numba_impl, rk4_full.numpy_impl, lambda: (A0, r0, 1.0, 1.0, 1e-3, steps, steps)

    n = 30
    cells = np.full((n, n), -1, dtype=np.int8)
    labels = np.arange(n) % 3
    idx = rng.choice(n * n, size=n * n // 4, replace=False)
    cells.flat[idx] = (labels[idx // n] == labels[idx % n]).astype(np.int8)
    yield "close_knowledge (n=30, equivalence)", close_knowledge.numba_impl, close_knowledge.numpy_impl, lambda: (cells.copy(), True, True, True, False, True)

    order_cells = np.full((n, n), -1, dtype=np.int8)
    ii, jj = np.divmod(idx, n)
    order_cells[ii, jj] = (ii < jj).astype(np.int8)
    prec = precedence(close_knowledge(order_cells, False, False, True, True, False)[0])
    start = _initial_order(prec)
    moves = rng.integers(0, 2 * (n - 1), size=int(2_000_000 * scale))
    thin = n**3
    yield "sample_orders_mcmc (n=30)", sample_orders_mcmc.numba_impl, sample_orders_mcmc.numpy_impl, lambda: (prec, start.copy(), moves, thin)

    uniforms = rng.random((int(2000 * scale), n))
    yield "sample_orders_topological (n=30)", sample_orders_topological.numba_impl, sample_orders_topological.numpy_impl, lambda: (prec, uniforms)

    k23 = np.zeros((5, 5), dtype=np.uint8)
    k23[:2, 2:] = 1
    k23[2:, :2] = 1
    ring = np.roll(np.eye(8, dtype=np.uint8), 1, axis=1)
    yield "count_automorphisms (K2,3)", count_automorphisms.numba_impl, count_automorphisms.numpy_impl, lambda: (k23,)
    yield "count_automorphisms (8-cycle)", count_automorphisms.numba_impl, count_automorphisms.numpy_impl, lambda: (ring,)

    g = rng.normal(size=(675, 50))
    a = np.tanh(rng.normal(size=(675, 50)))

    def in_place(impl):
        def run(g, a):
            impl(g, a)
            return g

        return run

    yield "tanh_backward (675x50)", in_place(tanh_backward.numba_impl), in_place(tanh_backward.numpy_impl), lambda: (g.copy(), a)


def _same(x, y) -> bool:
    if isinstance(x, tuple):
        return all(_same(u, v) for u, v in zip(x, y))
    if x is None or np.isscalar(x):
        return x == y
    x, y = np.asarray(x), np.asarray(y)
    if np.issubdtype(x.dtype, np.floating):
        # BLAS and explicit loops may sum in different orders
        return x.shape == y.shape and np.allclose(x, y, rtol=1e-12, atol=1e-14)
    return np.array_equal(x, y)


def _time(fn, make_args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        args = make_args()
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="shrink problem sizes tenfold")
    args = parser.parse_args(argv)
    print(f"{'kernel':40s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for name, nb, npy, make_args in cases(args.quick):
        nb(*make_args())  # compile
        t_nb, out_nb = _time(nb, make_args, args.repeat)
        t_np, out_np = _time(npy, make_args, args.repeat)
        print(f"{name:40s} {t_nb * 1e3:10.2f} {t_np * 1e3:10.2f} {t_np / t_nb:8.1f}  {_same(out_nb, out_np)}")


if __name__ == "__main__":
    main()
