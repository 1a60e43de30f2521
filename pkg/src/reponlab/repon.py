"""Interacting-repon dynamics.

Two same-class embeddings near each other see a locally linear decoder
``A x + b``. Under gradient flow the decoder matrix ``A`` and the half
separation ``r`` of the pair evolve as::

    dA/dt = -2 eta_A A r r^T        dr/dt = -eta_x A^T A r

If ``r0`` is a unit right-singular vector of ``A0`` with singular value 1,
the solution stays of the form ``A = a A0 + b A0 r0 r0^T``, ``r = c r0`` and
the pair ``(a2, c) = (a + b, c)`` obeys::

    da2/dt = -2 eta_A c^2 a2        dc/dt = -eta_x a2^2 c

which conserves ``C = a2^2 / (2 eta_A) - c^2 / eta_x``. The sign of ``C``
decides whether the repons collide (``c -> 0``) or the decoder dies first.

For one repon facing a cluster of ``N`` coincident repons (centre of mass at
the origin, ``r`` half the separation) the decoder equation picks up a gain:
``dA/dt = -(4N/(N+1)) eta_A A r r^T``, i.e. ``g = 2N/(N+1)`` multiplies the
``a2`` rate. The conserved quantity becomes ``a2^2 / (2 g eta_A) - c^2 / eta_x``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from reponlab.kernels import rk4_full, rk4_reduced


class NonFiniteError(ArithmeticError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"non-finite state at integration step {step}")


@dataclass(frozen=True)
class ReponFullState:
    A: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    eta_A: float
    eta_x: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        r = np.array(self.r, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != r.size:
            raise ValueError(f"A must be d_out x {r.size}, got {A.shape}")
        _check_rates(self.eta_A, self.eta_x)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class ReponReducedState:
    a2: float
    c: float
    eta_A: float
    eta_x: float

    def __post_init__(self):
        _check_rates(self.eta_A, self.eta_x)


def _check_rates(eta_A, eta_x):
    if eta_A < 0 or eta_x < 0 or (eta_A == 0 and eta_x == 0):
        raise ValueError(f"learning rates must be >= 0 and not both zero, got {eta_A}, {eta_x}")


@dataclass(frozen=True)
class InitDistribution:
    sigma_a: float
    sigma_c: float

    def __post_init__(self):
        if not (self.sigma_a > 0 and self.sigma_c > 0):
            raise ValueError("init widths must be positive")


class Outcome(str, enum.Enum):
    COLLISION = "collision"
    NO_COLLISION = "no_collision"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class ReponOutcome:
    label: Outcome
    final_a2: float
    final_c: float
    C: float


@dataclass(frozen=True)
class FullTrajectory:
    t: np.ndarray
    A: np.ndarray
    r: np.ndarray

    def final(self, eta_A: float, eta_x: float) -> ReponFullState:
        return ReponFullState(self.A[-1], self.r[-1], eta_A, eta_x)


@dataclass(frozen=True)
class ReducedTrajectory:
    t: np.ndarray
    a2: np.ndarray
    c: np.ndarray


def _steps(dt: float, T: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if T < dt:
        raise ValueError(f"T must be >= dt, got T={T}, dt={dt}")
    return int(round(T / dt))


def _times(dt, nsteps, stride):
    idx = np.arange(0, nsteps + 1, stride)
    if idx[-1] != nsteps:
        idx = np.append(idx, nsteps)
    return idx * dt


def integrate_full(state: ReponFullState, dt: float, T: float, stride: int = 1) -> FullTrajectory:
    """RK4 trajectory of the matrix flow, recorded every ``stride`` steps."""
    nsteps = _steps(dt, T)
    A, r, bad = rk4_full(state.A, state.r, state.eta_A, state.eta_x, dt, nsteps, stride)
    if bad >= 0:
        raise NonFiniteError(bad)
    return FullTrajectory(_times(dt, nsteps, stride), A, r)


def _integrate_batch(a2, c, eta_A, eta_x, gain, dt, T, stride):
    a2, c, eta_A, eta_x, gain = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (a2, c, eta_A, eta_x, gain))
    a2, c, eta_A, eta_x, gain = np.broadcast_arrays(a2, c, eta_A, eta_x, gain)
    nsteps = _steps(dt, T)
    args = [np.ascontiguousarray(v) for v in (a2, c, eta_A, eta_x, gain)]
    a_out, c_out, bad = rk4_reduced(*args, dt, nsteps, stride)
    if bad >= 0:
        raise NonFiniteError(bad)
    return _times(dt, nsteps, stride), a_out, c_out


def integrate_reduced(state: ReponReducedState, dt: float, T: float, stride: int = 1) -> ReducedTrajectory:
    t, a, c = _integrate_batch(state.a2, state.c, state.eta_A, state.eta_x, 1.0, dt, T, stride)
    return ReducedTrajectory(t, a[:, 0], c[:, 0])


def integrate_reduced_batch(a2_0, c0, eta_A, eta_x, dt, T, stride=None, gain=1.0):
    """Integrate many independent reduced systems at once.

    Returns ``(t, a2, c)`` with ``a2`` and ``c`` shaped ``(records, batch)``.
    By default only the initial and final states are recorded.
    """
    nsteps = _steps(dt, T)
    return _integrate_batch(a2_0, c0, eta_A, eta_x, gain, dt, T, nsteps if stride is None else stride)


def cluster_gain(N: int) -> float:
    if int(N) != N or N < 1:
        raise ValueError(f"cluster size must be a positive integer, got {N}")
    return 2.0 * N / (N + 1.0)


def integrate_multi(N, a2_0, c0, eta_A, eta_x, dt, T, stride=1) -> ReducedTrajectory:
    """One repon against a cluster of ``N``; ``N=1`` is the pair flow."""
    t, a, c = _integrate_batch(a2_0, c0, eta_A, eta_x, cluster_gain(N), dt, T, stride)
    return ReducedTrajectory(t, a[:, 0], c[:, 0])


def conserved_quantity(state: ReponReducedState) -> float:
    return state.a2**2 / (2.0 * state.eta_A) - state.c**2 / state.eta_x


def multi_conserved_quantity(N, a2, c, eta_A, eta_x):
    return np.asarray(a2) ** 2 / (2.0 * cluster_gain(N) * eta_A) - np.asarray(c) ** 2 / eta_x


def default_tolerance(state: ReponReducedState) -> float:
    scale = max(state.a2**2 / (2.0 * state.eta_A), state.c**2 / state.eta_x)
    return 1e-12 * scale


def classify_outcome(state: ReponReducedState, tol: float | None = None) -> ReponOutcome:
    """Read the asymptotic fate off the sign of the conserved quantity."""
    C = conserved_quantity(state)
    tol = default_tolerance(state) if tol is None else tol
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if C > tol:
        return ReponOutcome(Outcome.COLLISION, math.copysign(math.sqrt(2 * state.eta_A * C), state.a2), 0.0, C)
    if C < -tol:
        return ReponOutcome(Outcome.NO_COLLISION, 0.0, math.copysign(math.sqrt(-state.eta_x * C), state.c), C)
    return ReponOutcome(Outcome.BOUNDARY, 0.0, 0.0, C)


def collision_probability_closed_form(init: InitDistribution, eta_A: float, eta_x: float) -> float:
    if not (eta_A > 0 and eta_x > 0):
        raise ValueError("learning rates must be positive")
    return 2.0 / math.pi * math.atan(init.sigma_a / init.sigma_c * math.sqrt(eta_x / (2.0 * eta_A)))


def collision_probability_mc(init: InitDistribution, eta_A, eta_x, samples: int, seed: int):
    """Fraction of Gaussian initializations with ``C > 0``, and its binomial stderr."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, init.sigma_a, samples)
    c = rng.normal(0.0, init.sigma_c, samples)
    p = float(np.mean(a * a / (2.0 * eta_A) - c * c / eta_x > 0))
    return p, math.sqrt(p * (1.0 - p) / samples)


def multi_repon_probability(init: InitDistribution, eta_A: float, eta_x: float, N: int) -> float:
    if int(N) != N or N < 1:
        raise ValueError(f"cluster size must be a positive integer, got {N}")
    g = 4.0 / (1.0 + 1.0 / N)
    return 2.0 / math.pi * math.atan(init.sigma_a / init.sigma_c * math.sqrt(eta_x / (g * eta_A)))


@dataclass(frozen=True)
class PhaseSpaceMap:
    a2: np.ndarray
    c: np.ndarray
    eta_A: float
    eta_x: float
    C: np.ndarray
    labels: np.ndarray

    CSV_HEADER = ("a2_0", "c_0", "eta_A", "eta_x", "C", "label")

    def rows(self):
        for i, a in enumerate(self.a2):
            for j, c in enumerate(self.c):
                yield (float(a), float(c), self.eta_A, self.eta_x, float(self.C[i, j]), self.labels[i, j])


def phase_space_map(a2_range, c_range, grid: int, eta_A: float, eta_x: float) -> PhaseSpaceMap:
    """Outcome labels on a ``grid x grid`` lattice of initial ``(a2, c)``."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    a_vals = np.linspace(a2_range[0], a2_range[1], grid)
    c_vals = np.linspace(c_range[0], c_range[1], grid)
    C = np.empty((grid, grid))
    labels = np.empty((grid, grid), dtype=object)
    for i, a in enumerate(a_vals):
        for j, c in enumerate(c_vals):
            out = classify_outcome(ReponReducedState(float(a), float(c), eta_A, eta_x))
            C[i, j] = out.C
            labels[i, j] = out.label.value
    return PhaseSpaceMap(a_vals, c_vals, eta_A, eta_x, C, labels)


@dataclass(frozen=True)
class ProbabilityPoint:
    ratio: float
    p_closed: float
    p_mc: float
    stderr: float
    sigma_a: float
    sigma_c: float

    CSV_HEADER = ("ratio", "p_closed", "p_mc", "stderr", "sigma_a", "sigma_c")

    def row(self):
        return (self.ratio, self.p_closed, self.p_mc, self.stderr, self.sigma_a, self.sigma_c)


def probability_sweep(init: InitDistribution, ratios, samples: int = 100_000, seed: int = 0, eta_A: float = 1.0):
    """Closed form and MC collision probability for each ``eta_x / eta_A`` ratio."""
    out = []
    for idx, ratio in enumerate(ratios):
        eta_x = float(ratio) * eta_A
        p_mc, se = collision_probability_mc(init, eta_A, eta_x, samples, seed + idx)
        out.append(
            ProbabilityPoint(float(ratio), collision_probability_closed_form(init, eta_A, eta_x), p_mc, se, init.sigma_a, init.sigma_c)
        )
    return out


def ansatz_state(A0: np.ndarray, r0: np.ndarray, a2: float, c: float, eta_A: float, eta_x: float) -> ReponFullState:
    """Full state ``A = A0 + (a2 - 1) A0 r0 r0^T``, ``r = c r0``.

    ``r0`` must be a unit right-singular vector of ``A0`` with singular
    value 1 for the reduced flow to describe the evolution.
    """
    A0 = np.asarray(A0, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    return ReponFullState(A0 + (a2 - 1.0) * np.outer(A0 @ r0, r0), c * r0, eta_A, eta_x)


def project_ansatz(A: np.ndarray, r: np.ndarray, A0: np.ndarray, r0: np.ndarray):
    """Recover ``(a2, c)`` from a full state via ``A r0 = a2 A0 r0``, ``r = c r0``."""
    u = A0 @ r0
    return float(u @ (A @ r0) / (u @ u)), float(r0 @ r)


def unit_singular_pair(d_out: int, d_in: int, rng: np.random.Generator):
    """Random ``A0`` with a unit right-singular vector ``r0`` of singular value 1."""
    if d_out < 1 or d_in < 1:
        raise ValueError("dimensions must be positive")
    U, _ = np.linalg.qr(rng.normal(size=(d_out, d_out)))
    V, _ = np.linalg.qr(rng.normal(size=(d_in, d_in)))
    k = min(d_out, d_in)
    s = np.concatenate([[1.0], rng.uniform(0.3, 2.0, k - 1)])
    A0 = U[:, :k] @ np.diag(s) @ V[:, :k].T
    return A0, V[:, 0].copy()
