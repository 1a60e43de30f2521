"""Statics: what a learner could infer from a random subset of a relation.

Two routes to the theoretical accuracy ceiling are provided. The Monte Carlo
oracles close the sampled knowledge under the relation's properties and
score every remaining cell by the best guess under a uniform prior over
compatible structures. The analytic route treats each sample as one bit
landing in one of ``b`` buckets.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from reponlab.kernels import close_knowledge, sample_orders_mcmc, sample_orders_topological
from reponlab.relations import (
    RelationKind,
    RelationMatrix,
    RelationSpec,
    build_relation,
    sample_training_set,
)

UNKNOWN = -1


class Property(str, enum.Enum):
    SYMMETRIC = "symmetric"
    REFLEXIVE = "reflexive"
    TRANSITIVE = "transitive"
    ANTISYMMETRIC = "antisymmetric"


EQUIVALENCE = frozenset({Property.SYMMETRIC, Property.REFLEXIVE, Property.TRANSITIVE})
STRICT_ORDER = frozenset({Property.ANTISYMMETRIC, Property.TRANSITIVE})


class ContradictionError(ValueError):
    def __init__(self, cell: tuple[int, int]):
        self.cell = cell
        super().__init__(f"cell {cell} is forced to be both 1 and 0")


@dataclass(frozen=True, eq=False)
class KnowledgeState:
    """Per-pair knowledge: 1 / 0 known, ``UNKNOWN`` (-1) otherwise."""

    n: int
    cells: np.ndarray = field(repr=False)
    properties: frozenset = frozenset()

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8)
        if cells.shape != (self.n, self.n):
            raise ValueError(f"cells must be {self.n}x{self.n}, got {cells.shape}")
        if not np.isin(cells, (UNKNOWN, 0, 1)).all():
            raise ValueError("cells must hold 1, 0 or -1")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "properties", frozenset(Property(p) for p in self.properties))

    @classmethod
    def empty(cls, n: int, properties=frozenset()) -> KnowledgeState:
        return cls(n, np.full((n, n), UNKNOWN, dtype=np.int8), properties)

    @classmethod
    def from_samples(cls, matrix: RelationMatrix, pairs, properties) -> KnowledgeState:
        cells = np.full((matrix.n, matrix.n), UNKNOWN, dtype=np.int8)
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        cells[pairs[:, 0], pairs[:, 1]] = matrix.entries[pairs[:, 0], pairs[:, 1]]
        return cls(matrix.n, cells, properties)

    def with_cell(self, i: int, j: int, value: int) -> KnowledgeState:
        cells = self.cells.copy()
        cells[i, j] = value
        return KnowledgeState(self.n, cells, self.properties)

    @property
    def known(self) -> np.ndarray:
        return self.cells != UNKNOWN

    def __eq__(self, other):
        if not isinstance(other, KnowledgeState):
            return NotImplemented
        return (
            self.n == other.n
            and self.properties == other.properties
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None


def closure(state: KnowledgeState) -> KnowledgeState:
    """Propagate known cells to the fixed point of the state's properties.

    With both symmetry and transitivity, negative facts propagate too:
    1(i,j) and 0(j,k) give 0(i,k).
    """
    props = state.properties
    sym = Property.SYMMETRIC in props
    trans = Property.TRANSITIVE in props
    cells, ci, cj = close_knowledge(
        state.cells,
        sym,
        Property.REFLEXIVE in props,
        trans,
        Property.ANTISYMMETRIC in props,
        sym and trans,
    )
    if ci >= 0:
        raise ContradictionError((ci, cj))
    return KnowledgeState(state.n, cells, props)


# analytic estimates -----------------------------------------------------


def guess_probability(spec: RelationSpec) -> float:
    if spec.kind is RelationKind.MODULO:
        return 1.0 / spec.k
    if spec.kind is RelationKind.BIPARTITE:
        return 0.5
    if spec.kind is RelationKind.GREATER_THAN:
        return 1.0 / 3.0
    raise ValueError("no built-in guess probability for custom relations; pass p_star explicitly")


def analytic_inferable_fraction(m: float, b: float) -> float:
    """Expected filled fraction after ``m`` balls land in ``b`` buckets."""
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    return 1.0 - (1.0 - 1.0 / b) ** m


def analytic_upper_bound(m: float, b: float, p_star: float) -> float:
    if not 0.0 < p_star < 1.0:
        raise ValueError(f"p_star must lie in (0, 1), got {p_star}")
    f = analytic_inferable_fraction(m, b)
    return f + max(p_star, 1.0 - p_star) * (1.0 - f)


def critical_fraction(alpha: float, b: float, N: float) -> float:
    """Training fraction at which the expected inferable fraction reaches ``alpha``.

    Values above 1 mean the target is out of reach with ``N`` samples.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if b <= 1:
        raise ValueError(f"b must exceed 1 (log singularity at b=1), got {b}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return math.log(1.0 - alpha) / math.log(1.0 - 1.0 / b) / N


@dataclass(frozen=True)
class StaticsEstimate:
    inferable_fraction: float
    accuracy_upper_bound: float
    p_star: float


def statics_estimate(m: float, b: float, p_star: float) -> StaticsEstimate:
    return StaticsEstimate(
        analytic_inferable_fraction(m, b), analytic_upper_bound(m, b, p_star), p_star
    )


# Monte Carlo oracles ----------------------------------------------------


def _score(cells: np.ndarray, p_one: np.ndarray) -> float:
    unknown = cells == UNKNOWN
    best = np.maximum(p_one, 1.0 - p_one)
    return float((np.count_nonzero(~unknown) + best[unknown].sum()) / cells.size)


def _class_view(spec: RelationSpec, matrix: RelationMatrix):
    """Equivalence-relation view: (truth matrix, class labels, class count)."""
    n = spec.n
    if spec.kind is RelationKind.MODULO:
        return matrix.entries, np.arange(n) % spec.k, spec.k
    if spec.kind is RelationKind.BIPARTITE:
        labels = np.isin(np.arange(n), sorted(spec.part)).astype(np.int64)
        # "different side" is the complement of a two-class equivalence
        return (1 - matrix.entries).astype(np.uint8), labels, 2
    raise ValueError(f"equivalence oracle needs a modulo or bipartite relation, got {spec.kind.value}")


def class_candidates(cells: np.ndarray, labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Boolean ``(n, n_classes)`` table of classes each node may still belong to.

    A node known to share a class with some other node is pinned to that
    node's class; otherwise every class of a node it is known to differ from
    is ruled out.
    """
    n = cells.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    pos = np.ones((n, n_classes), dtype=bool)
    for i in range(n):
        partners = np.flatnonzero((cells[i] == 1) & offdiag[i])
        if partners.size:
            pos[i] = False
            pos[i, labels[partners[0]]] = True
        else:
            pos[i, labels[cells[i] == 0]] = False
    return pos


def equivalence_trial_accuracy(spec: RelationSpec, fraction: float, seed: int) -> float:
    matrix = build_relation(spec)
    truth, labels, k = _class_view(spec, matrix)
    pairs = sample_training_set(matrix, fraction, seed)
    view = RelationMatrix(spec.n, truth, spec)
    state = closure(KnowledgeState.from_samples(view, pairs, EQUIVALENCE))
    pos = class_candidates(state.cells, labels, k).astype(np.float64)
    sizes = pos.sum(axis=1)
    p_one = (pos @ pos.T) / np.outer(sizes, sizes)
    return _score(state.cells, p_one)


def equivalence_trial_accuracies(spec, fraction, trials=20, seed=0) -> np.ndarray:
    return np.array([equivalence_trial_accuracy(spec, fraction, seed + t) for t in range(trials)])


def mc_oracle_equivalence(spec: RelationSpec, fraction: float, trials: int = 20, seed: int = 0) -> float:
    """Accuracy ceiling for an equivalence (or complete bipartite) relation."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return float(equivalence_trial_accuracies(spec, fraction, trials, seed).mean())


def precedence(cells: np.ndarray) -> np.ndarray:
    """``prec[i, j]``: ``i`` must come before ``j`` in every compatible order."""
    n = cells.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    return ((cells == 1) | (cells.T == 0)) & offdiag


def _initial_order(prec: np.ndarray) -> np.ndarray:
    n = prec.shape[0]
    indeg = prec.sum(axis=0)
    done = np.zeros(n, dtype=bool)
    order = []
    for _ in range(n):
        ready = np.flatnonzero((indeg == 0) & ~done)
        if ready.size == 0:
            stuck = np.flatnonzero(~done)
            raise ContradictionError((int(stuck[0]), int(stuck[-1])))
        v = ready[0]
        done[v] = True
        order.append(v)
        indeg = indeg - prec[v]
    return np.array(order, dtype=np.int64)


_MOVE_CHUNK = 1 << 20


def _mcmc_ranks(prec, order0, sequences, rng, burn=None, thin=None):
    n = prec.shape[0]
    burn = 4 * n**3 if burn is None else burn
    thin = max(n**3, 1) if thin is None else thin
    order = np.array(order0, dtype=np.int64)

    def moves(count):
        return rng.integers(0, 2 * (n - 1), size=count, dtype=np.int64)

    while burn > 0:
        step = min(burn, _MOVE_CHUNK)
        sample_orders_mcmc(prec, order, moves(step), step)
        burn -= step
    per_chunk = max(1, _MOVE_CHUNK // thin)
    out = []
    left = sequences
    while left > 0:
        take = min(per_chunk, left)
        out.append(sample_orders_mcmc(prec, order, moves(take * thin), thin))
        left -= take
    return np.concatenate(out)


def order_probabilities(
    state: KnowledgeState,
    sequences: int,
    rng: np.random.Generator,
    sampler: str = "mcmc",
    burn: int | None = None,
    thin: int | None = None,
) -> np.ndarray:
    """Estimate ``P(R[i, j] = 1)`` over total orders compatible with ``state``.

    ``sampler="mcmc"`` runs a lazy adjacent-transposition chain whose
    stationary law is uniform over linear extensions (defaults: ``4 n**3``
    burn-in moves and ``n**3`` moves between recorded samples, about twice
    the chain's relaxation time).
    ``sampler="topological"`` draws independent random topological sorts,
    which is faster but not uniform.
    """
    n = state.n
    if sequences < 1:
        raise ValueError("sequences must be >= 1")
    prec = precedence(state.cells)
    order0 = _initial_order(prec)
    if n < 2:
        return np.zeros((n, n))
    if sampler == "mcmc":
        ranks = _mcmc_ranks(prec, order0, sequences, rng, burn, thin)
    elif sampler == "topological":
        ranks, ok = sample_orders_topological(prec, rng.random((sequences, n)))
        if not ok:
            raise ContradictionError((int(order0[0]), int(order0[-1])))
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    p = np.zeros((n, n))
    for i in range(n):
        p[i] = (ranks[:, i : i + 1] < ranks).mean(axis=0)
    return p


def exact_order_probabilities(state: KnowledgeState, max_n: int = 8) -> np.ndarray:
    """``P(R[i, j] = 1)`` by enumerating every compatible permutation."""
    n = state.n
    if n > max_n:
        raise ValueError(f"exhaustive enumeration limited to n <= {max_n}")
    prec = precedence(state.cells)
    need = np.argwhere(prec)
    total = np.zeros((n, n))
    count = 0
    for perm in itertools.permutations(range(n)):
        rank = np.empty(n, dtype=np.int64)
        rank[list(perm)] = np.arange(n)
        if need.size and np.any(rank[need[:, 0]] > rank[need[:, 1]]):
            continue
        total += rank[:, None] < rank[None, :]
        count += 1
    if count == 0:
        raise ContradictionError((0, 0))
    return total / count


def total_order_trial_accuracy(
    n: int, fraction: float, sequences: int, seed: int, sampler: str = "mcmc"
) -> float:
    matrix = build_relation(RelationSpec.greater_than(n))
    pairs = sample_training_set(matrix, fraction, seed)
    state = closure(KnowledgeState.from_samples(matrix, pairs, STRICT_ORDER))
    if np.all(state.known):
        return 1.0
    rng = np.random.default_rng([seed, 1])
    p_one = order_probabilities(state, sequences, rng, sampler=sampler)
    return _score(state.cells, p_one)


def total_order_trial_accuracies(n, fraction, sequences=1000, trials=3, seed=0, sampler="mcmc"):
    return np.array(
        [total_order_trial_accuracy(n, fraction, sequences, seed + t, sampler) for t in range(trials)]
    )


def mc_oracle_total_order(
    n: int,
    fraction: float,
    sequences: int = 1000,
    trials: int = 3,
    seed: int = 0,
    sampler: str = "mcmc",
) -> float:
    """Accuracy ceiling for the strict total order ``i < j``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return float(total_order_trial_accuracies(n, fraction, sequences, trials, seed, sampler).mean())


@dataclass(frozen=True)
class OraclePoint:
    relation: str
    n: int
    fraction: float
    accuracy: float
    stderr: float
    trials: int
    seed: int

    CSV_HEADER = ("relation", "n", "fraction", "accuracy", "stderr", "trials", "seed")

    def row(self):
        return (self.relation, self.n, self.fraction, self.accuracy, self.stderr, self.trials, self.seed)


def oracle_point(spec: RelationSpec, fraction: float, trials=None, seed=0, sequences=1000) -> OraclePoint:
    """One point of the oracle curve, with the standard error over trials."""
    if spec.kind is RelationKind.GREATER_THAN:
        trials = 3 if trials is None else trials
        accs = total_order_trial_accuracies(spec.n, fraction, sequences, trials, seed)
    else:
        trials = 20 if trials is None else trials
        accs = equivalence_trial_accuracies(spec, fraction, trials, seed)
    stderr = float(accs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return OraclePoint(spec.label(), spec.n, float(fraction), float(accs.mean()), stderr, trials, seed)
