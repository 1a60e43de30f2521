"""Samplers over linear extensions of a precedence relation.

``prec[i, j]`` true means ``i`` must be placed before ``j``. Both samplers
return ``ranks`` of shape ``(n_samples, n)`` with ``ranks[s, v]`` the
position of node ``v`` in sample ``s``. Random numbers are drawn by the
caller and passed in, so the numba and numpy paths produce identical output.
"""
from __future__ import annotations

import numpy as np

from reponlab._accel import dispatch, njit


@njit
def _mcmc_loop(prec, order, moves, thin):
    n = order.shape[0]
    n_samples = moves.shape[0] // thin
    ranks = np.empty((n_samples, n), dtype=np.int32)
    t = 0
    for s in range(n_samples):
        for _ in range(thin):
            m = moves[t]
            t += 1
            if m & 1:
                p = m >> 1
                u = order[p]
                v = order[p + 1]
                if not prec[u, v]:
                    order[p] = v
                    order[p + 1] = u
        for q in range(n):
            ranks[s, order[q]] = q
    return ranks


def _sample_orders_mcmc_numba(prec, order, moves, thin):
    if order.dtype != np.int64 or not order.flags.c_contiguous:
        raise TypeError("order must be a contiguous int64 array (updated in place)")
    return _mcmc_loop(
        np.ascontiguousarray(prec, dtype=np.bool_),
        order,
        np.ascontiguousarray(moves, dtype=np.int64),
        int(thin),
    )


def _sample_orders_mcmc_numpy(prec, order, moves, thin):
    """Advance a lazy adjacent-transposition chain; its stationary law is uniform.

    ``order`` (int64, a valid linear extension) is updated in place. Move
    ``m`` proposes swapping positions ``m >> 1`` and ``(m >> 1) + 1`` when its
    low bit is set, and the swap happens unless it breaks a precedence.
    After every ``thin`` moves the current ranks are recorded, giving
    ``len(moves) // thin`` rows.
    """
    allowed = (~np.asarray(prec, dtype=bool)).tolist()
    o = order.tolist()
    n = len(o)
    n_samples = len(moves) // thin
    ranks = np.empty((n_samples, n), dtype=np.int32)
    mv = np.asarray(moves).tolist()
    t = 0
    for s in range(n_samples):
        for m in mv[t : t + thin]:
            if m & 1:
                p = m >> 1
                u, v = o[p], o[p + 1]
                if allowed[u][v]:
                    o[p], o[p + 1] = v, u
        t += thin
        ranks[s, o] = np.arange(n, dtype=np.int32)
    order[:] = o
    return ranks


sample_orders_mcmc = dispatch(_sample_orders_mcmc_numba, _sample_orders_mcmc_numpy)


@njit
def _topo_loop(prec, uniforms):
    n_samples, n = uniforms.shape
    base_indeg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if prec[i, j]:
                base_indeg[j] += 1
    ranks = np.empty((n_samples, n), dtype=np.int32)
    indeg = np.empty(n, dtype=np.int64)
    placed = np.empty(n, dtype=np.bool_)
    for s in range(n_samples):
        indeg[:] = base_indeg
        placed[:] = False
        for step in range(n):
            cnt = 0
            for v in range(n):
                if not placed[v] and indeg[v] == 0:
                    cnt += 1
            if cnt == 0:
                return ranks, False
            k = int(uniforms[s, step] * cnt)
            if k >= cnt:
                k = cnt - 1
            pick = -1
            for v in range(n):
                if not placed[v] and indeg[v] == 0:
                    if k == 0:
                        pick = v
                        break
                    k -= 1
            placed[pick] = True
            ranks[s, pick] = step
            for j in range(n):
                if prec[pick, j]:
                    indeg[j] -= 1
    return ranks, True


def _sample_orders_topological_numba(prec, uniforms):
    return _topo_loop(
        np.ascontiguousarray(prec, dtype=np.bool_),
        np.ascontiguousarray(uniforms, dtype=np.float64),
    )


def _sample_orders_topological_numpy(prec, uniforms):
    """Random topological sort with uniform tie-breaking among ready nodes.

    Fast but biased: orders are not uniform over linear extensions. Returns
    ``(ranks, ok)``; ``ok`` is false when ``prec`` contains a cycle.
    """
    prec = np.asarray(prec, dtype=bool)
    uniforms = np.asarray(uniforms, dtype=float)
    n_samples, n = uniforms.shape
    indeg = np.broadcast_to(prec.sum(axis=0), (n_samples, n)).astype(np.int64)
    placed = np.zeros((n_samples, n), dtype=bool)
    ranks = np.empty((n_samples, n), dtype=np.int32)
    rows = np.arange(n_samples)
    p_int = prec.astype(np.int64)
    for step in range(n):
        ready = (indeg == 0) & ~placed
        cnt = ready.sum(axis=1)
        if np.any(cnt == 0):
            return ranks, False
        k = np.minimum((uniforms[:, step] * cnt).astype(np.int64), cnt - 1)
        pick = np.argmax(np.cumsum(ready, axis=1) > k[:, None], axis=1)
        placed[rows, pick] = True
        ranks[rows, pick] = step
        indeg -= p_int[pick]
    return ranks, True


sample_orders_topological = dispatch(
    _sample_orders_topological_numba, _sample_orders_topological_numpy
)
