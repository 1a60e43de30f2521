"""Classical RK4 for the repon flows.

Reduced flow (batched over independent initial conditions)::

    da2/dt = -2 g eta_A c^2 a2
    dc/dt  = -eta_x a2^2 c

``g`` is 1 for a repon pair and ``2N/(N+1)`` for one repon against a cluster
of N. Full flow::

    dA/dt = -2 eta_A (A r) r^T
    dr/dt = -eta_x A^T A r
"""
from __future__ import annotations

import functools

import numpy as np

from reponlab._accel import dispatch, njit

# Magnitudes below this are flushed to 0 (a fixed point of the flow); squares
# of smaller values would be subnormal and slow the loop down by ~100x.
TINY = 1e-150


def _record_steps(nsteps: int, stride: int) -> np.ndarray:
    steps = np.arange(0, nsteps + 1, stride, dtype=np.int64)
    if steps[-1] != nsteps:
        steps = np.append(steps, nsteps)
    return steps


@njit
def _rk4_reduced_loop(a0, c0, eta_a, eta_x, gain, dt, nsteps, rec_steps):
    nb = a0.shape[0]
    nrec = rec_steps.shape[0]
    a_out = np.empty((nrec, nb))
    c_out = np.empty((nrec, nb))
    bad = -1
    for b in range(nb):
        a = a0[b]
        c = c0[b]
        ka = 2.0 * gain[b] * eta_a[b]
        kc = eta_x[b]
        a_out[0, b] = a
        c_out[0, b] = c
        ri = 1
        for step in range(1, nsteps + 1):
            da1 = -ka * c * c * a
            dc1 = -kc * a * a * c
            a2 = a + 0.5 * dt * da1
            c2 = c + 0.5 * dt * dc1
            da2 = -ka * c2 * c2 * a2
            dc2 = -kc * a2 * a2 * c2
            a3 = a + 0.5 * dt * da2
            c3 = c + 0.5 * dt * dc2
            da3 = -ka * c3 * c3 * a3
            dc3 = -kc * a3 * a3 * c3
            a4 = a + dt * da3
            c4 = c + dt * dc3
            da4 = -ka * c4 * c4 * a4
            dc4 = -kc * a4 * a4 * c4
            a = a + dt / 6.0 * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
            c = c + dt / 6.0 * (dc1 + 2.0 * dc2 + 2.0 * dc3 + dc4)
            if abs(a) < TINY:
                a = 0.0
            if abs(c) < TINY:
                c = 0.0
            if not (np.isfinite(a) and np.isfinite(c)):
                if bad < 0 or step < bad:
                    bad = step
                break
            if ri < nrec and rec_steps[ri] == step:
                a_out[ri, b] = a
                c_out[ri, b] = c
                ri += 1
    return a_out, c_out, bad


def _rk4_reduced_numba(a0, c0, eta_a, eta_x, gain, dt, nsteps, stride=1):
    rec = _record_steps(nsteps, stride)
    return _rk4_reduced_loop(a0, c0, eta_a, eta_x, gain, float(dt), int(nsteps), rec)


def _quiet(func):
    """Overflow is reported through ``bad_step``, so skip numpy's warning."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return func(*args, **kwargs)

    return wrapper


@_quiet
def _rk4_reduced_numpy(a0, c0, eta_a, eta_x, gain, dt, nsteps, stride=1):
    """Batched RK4 of the reduced repon flow.

    Returns ``(a2, c, bad_step)`` with arrays of shape ``(n_records, batch)``;
    ``bad_step`` is the first step producing a non-finite value, or -1.
    """
    rec = _record_steps(nsteps, stride)
    a = np.array(a0, dtype=float)
    c = np.array(c0, dtype=float)
    ka = 2.0 * gain * eta_a
    kc = np.asarray(eta_x, dtype=float)
    a_out = np.empty((rec.size, a.size))
    c_out = np.empty((rec.size, a.size))
    a_out[0], c_out[0] = a, c
    ri = 1
    for step in range(1, nsteps + 1):
        da1 = -ka * c * c * a
        dc1 = -kc * a * a * c
        a2 = a + 0.5 * dt * da1
        c2 = c + 0.5 * dt * dc1
        da2 = -ka * c2 * c2 * a2
        dc2 = -kc * a2 * a2 * c2
        a3 = a + 0.5 * dt * da2
        c3 = c + 0.5 * dt * dc2
        da3 = -ka * c3 * c3 * a3
        dc3 = -kc * a3 * a3 * c3
        a4 = a + dt * da3
        c4 = c + dt * dc3
        da4 = -ka * c4 * c4 * a4
        dc4 = -kc * a4 * a4 * c4
        a = a + dt / 6.0 * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
        c = c + dt / 6.0 * (dc1 + 2.0 * dc2 + 2.0 * dc3 + dc4)
        a[np.abs(a) < TINY] = 0.0
        c[np.abs(c) < TINY] = 0.0
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            return a_out, c_out, step
        if ri < rec.size and rec[ri] == step:
            a_out[ri], c_out[ri] = a, c
            ri += 1
    return a_out, c_out, -1


rk4_reduced = dispatch(_rk4_reduced_numba, _rk4_reduced_numpy)


@njit
def _full_rhs(A, r, eta_a, eta_x, dA, dr):
    m, k = A.shape
    for i in range(m):
        s = 0.0
        for j in range(k):
            s += A[i, j] * r[j]
        for j in range(k):
            dA[i, j] = -2.0 * eta_a * s * r[j]
    for j in range(k):
        dr[j] = 0.0
    for i in range(m):
        s = 0.0
        for j in range(k):
            s += A[i, j] * r[j]
        for j in range(k):
            dr[j] += -eta_x * A[i, j] * s


@njit
def _rk4_full_loop(A0, r0, eta_a, eta_x, dt, nsteps, rec_steps):
    m, k = A0.shape
    nrec = rec_steps.shape[0]
    A_out = np.empty((nrec, m, k))
    r_out = np.empty((nrec, k))
    A = A0.copy()
    r = r0.copy()
    A_out[0] = A
    r_out[0] = r
    k1A = np.empty_like(A)
    k2A = np.empty_like(A)
    k3A = np.empty_like(A)
    k4A = np.empty_like(A)
    k1r = np.empty_like(r)
    k2r = np.empty_like(r)
    k3r = np.empty_like(r)
    k4r = np.empty_like(r)
    ri = 1
    for step in range(1, nsteps + 1):
        _full_rhs(A, r, eta_a, eta_x, k1A, k1r)
        _full_rhs(A + 0.5 * dt * k1A, r + 0.5 * dt * k1r, eta_a, eta_x, k2A, k2r)
        _full_rhs(A + 0.5 * dt * k2A, r + 0.5 * dt * k2r, eta_a, eta_x, k3A, k3r)
        _full_rhs(A + dt * k3A, r + dt * k3r, eta_a, eta_x, k4A, k4r)
        A = A + dt / 6.0 * (k1A + 2.0 * k2A + 2.0 * k3A + k4A)
        r = r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(r))):
            return A_out, r_out, step
        if ri < nrec and rec_steps[ri] == step:
            A_out[ri] = A
            r_out[ri] = r
            ri += 1
    return A_out, r_out, -1


def _rk4_full_numba(A0, r0, eta_a, eta_x, dt, nsteps, stride=1):
    rec = _record_steps(nsteps, stride)
    return _rk4_full_loop(
        np.ascontiguousarray(A0, dtype=np.float64),
        np.ascontiguousarray(r0, dtype=np.float64),
        float(eta_a), float(eta_x), float(dt), int(nsteps), rec,
    )


@_quiet
def _rk4_full_numpy(A0, r0, eta_a, eta_x, dt, nsteps, stride=1):
    """RK4 of the full linearized-decoder flow; returns ``(A, r, bad_step)``."""
    rec = _record_steps(nsteps, stride)

    def rhs(A, r):
        Ar = A @ r
        return -2.0 * eta_a * np.outer(Ar, r), -eta_x * (A.T @ Ar)

    A = np.array(A0, dtype=float)
    r = np.array(r0, dtype=float)
    A_out = np.empty((rec.size,) + A.shape)
    r_out = np.empty((rec.size,) + r.shape)
    A_out[0], r_out[0] = A, r
    ri = 1
    for step in range(1, nsteps + 1):
        k1A, k1r = rhs(A, r)
        k2A, k2r = rhs(A + 0.5 * dt * k1A, r + 0.5 * dt * k1r)
        k3A, k3r = rhs(A + 0.5 * dt * k2A, r + 0.5 * dt * k2r)
        k4A, k4r = rhs(A + dt * k3A, r + dt * k3r)
        A = A + dt / 6.0 * (k1A + 2.0 * k2A + 2.0 * k3A + k4A)
        r = r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(r))):
            return A_out, r_out, step
        if ri < rec.size and rec[ri] == step:
            A_out[ri], r_out[ri] = A, r
            ri += 1
    return A_out, r_out, -1


rk4_full = dispatch(_rk4_full_numba, _rk4_full_numpy)
