"""Fixed-point propagation of ternary relation knowledge.

Cells hold 1 (known true), 0 (known false) or -1 (unknown). Both kernels
return ``(cells, ci, cj)`` where ``(ci, cj)`` is a cell that closure would
have to set to both values, or ``(-1, -1)`` when the knowledge is consistent.
"""
from __future__ import annotations

import numpy as np

from reponlab._accel import dispatch, njit

UNKNOWN = -1


@njit
def _close_loop(cells, sym, refl, trans, anti, neg):
    n = cells.shape[0]
    out = cells.copy()
    changed = True
    while changed:
        changed = False
        if refl:
            for i in range(n):
                if out[i, i] == 0:
                    return out, i, i
                if out[i, i] == -1:
                    out[i, i] = 1
                    changed = True
        if anti:
            for i in range(n):
                if out[i, i] == 1:
                    return out, i, i
                if out[i, i] == -1:
                    out[i, i] = 0
                    changed = True
                for j in range(n):
                    if out[i, j] == 1 and i != j:
                        if out[j, i] == 1:
                            return out, j, i
                        if out[j, i] == -1:
                            out[j, i] = 0
                            changed = True
        if sym:
            for i in range(n):
                for j in range(i + 1, n):
                    u = out[i, j]
                    v = out[j, i]
                    if u != v:
                        if u == -1:
                            out[i, j] = v
                            changed = True
                        elif v == -1:
                            out[j, i] = u
                            changed = True
                        else:
                            return out, j, i
        if trans:
            for k in range(n):
                for i in range(n):
                    if out[i, k] != 1:
                        continue
                    for j in range(n):
                        if out[k, j] == 1:
                            if out[i, j] == 0:
                                return out, i, j
                            if out[i, j] == -1:
                                out[i, j] = 1
                                changed = True
        if neg:
            for i in range(n):
                for j in range(n):
                    if out[i, j] != 1:
                        continue
                    for k in range(n):
                        if out[j, k] == 0:
                            if out[i, k] == 1:
                                return out, i, k
                            if out[i, k] == -1:
                                out[i, k] = 0
                                changed = True
    return out, -1, -1


def _close_knowledge_numba(cells, sym, refl, trans, anti, neg):
    out, ci, cj = _close_loop(
        np.ascontiguousarray(cells, dtype=np.int8),
        bool(sym), bool(refl), bool(trans), bool(anti), bool(neg),
    )
    return out, int(ci), int(cj)


def _first_conflict(ones, zeros):
    hits = np.argwhere(ones & zeros)
    if hits.size:
        return int(hits[0, 0]), int(hits[0, 1])
    return None


def _close_knowledge_numpy(cells, sym, refl, trans, anti, neg):
    """Close ternary knowledge under the enabled rules.

    ``sym``: v(i,j) => v(j,i). ``refl``: 1 on the diagonal. ``trans``:
    1(i,j), 1(j,k) => 1(i,k). ``anti`` (strict order): 1(i,j) => 0(j,i),
    0 on the diagonal. ``neg``: 1(i,j), 0(j,k) => 0(i,k).
    """
    cells = np.asarray(cells, dtype=np.int8)
    n = cells.shape[0]
    ones = cells == 1
    zeros = cells == 0
    diag = np.eye(n, dtype=bool)
    while True:
        before = (ones.sum(), zeros.sum())
        if refl:
            ones |= diag
        if anti:
            zeros |= diag
            zeros |= ones.T & ~diag
        if sym:
            ones |= ones.T
            zeros |= zeros.T
        if trans:
            for k in range(n):
                ones |= np.outer(ones[:, k], ones[k, :])
        if neg:
            zeros |= (ones.astype(np.int32) @ zeros.astype(np.int32)) > 0
        hit = _first_conflict(ones, zeros)
        if hit is not None:
            out = np.where(ones, 1, np.where(zeros, 0, UNKNOWN)).astype(np.int8)
            return out, hit[0], hit[1]
        if (ones.sum(), zeros.sum()) == before:
            break
    out = np.full((n, n), UNKNOWN, dtype=np.int8)
    out[ones] = 1
    out[zeros] = 0
    return out, -1, -1


close_knowledge = dispatch(_close_knowledge_numba, _close_knowledge_numpy)
