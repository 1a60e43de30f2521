"""Exact automorphism counting for small directed graphs (self-loops allowed)."""
from __future__ import annotations

import itertools

import numpy as np

from reponlab._accel import dispatch, njit


@njit
def _backtrack(adj):
    n = adj.shape[0]
    perm = np.full(n, -1, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    cand = np.zeros(n + 1, dtype=np.int64)
    count = 0
    k = 0
    while k >= 0:
        if k == n:
            count += 1
            k -= 1
            used[perm[k]] = False
            perm[k] = -1
            continue
        pick = -1
        v = cand[k]
        while v < n:
            if not used[v] and adj[v, v] == adj[k, k]:
                ok = True
                for l in range(k):
                    w = perm[l]
                    if adj[w, v] != adj[l, k] or adj[v, w] != adj[k, l]:
                        ok = False
                        break
                if ok:
                    pick = v
                    break
            v += 1
        if pick >= 0:
            perm[k] = pick
            used[pick] = True
            cand[k] = pick + 1
            k += 1
            if k <= n:
                cand[k] = 0
        else:
            k -= 1
            if k >= 0:
                used[perm[k]] = False
                perm[k] = -1
    return count


def _count_automorphisms_numba(adj):
    return int(_backtrack(np.ascontiguousarray(adj, dtype=np.uint8)))


def _count_automorphisms_numpy(adj, chunk=20000):
    """Count vertex permutations ``p`` with ``adj[p][:, p] == adj``.

    Enumerates all ``n!`` permutations in chunks; intended for ``n <= 10``.
    """
    adj = np.asarray(adj, dtype=np.uint8)
    n = adj.shape[0]
    perms = itertools.permutations(range(n))
    total = 0
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        block = block.reshape(-1, n)
        mapped = adj[block[:, :, None], block[:, None, :]]
        total += int(np.all(mapped == adj, axis=(1, 2)).sum())
    return total


count_automorphisms = dispatch(_count_automorphisms_numba, _count_automorphisms_numpy)
