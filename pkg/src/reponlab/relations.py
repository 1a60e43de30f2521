"""Relation matrices, description lengths and automorphism counts.

A relation over ``n`` integer elements is stored as its ``n x n`` 0/1
adjacency matrix; every one of the ``n**2`` ordered pairs (diagonal
included) is a data sample.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reponlab.kernels import count_automorphisms

MAX_AUTOMORPHISM_N = 10


class RelationKind(str, enum.Enum):
    MODULO = "modulo"
    GREATER_THAN = "greater_than"
    BIPARTITE = "bipartite"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class RelationSpec:
    """What relation to build.

    Use the constructors :meth:`modulo`, :meth:`greater_than`,
    :meth:`bipartite` and :meth:`custom` rather than filling fields by hand.
    """

    kind: RelationKind
    n: int
    k: int | None = None
    part: frozenset[int] | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", RelationKind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"node count must be a positive integer, got {self.n!r}")
        if self.kind is RelationKind.MODULO:
            if self.k is None or not 1 <= self.k <= self.n:
                raise ValueError(f"modulo relation needs 1 <= k <= n={self.n}, got k={self.k!r}")
        elif self.kind is RelationKind.BIPARTITE:
            if self.part is None:
                raise ValueError("bipartite relation needs a part")
            part = frozenset(int(v) for v in self.part)
            if any(v < 0 or v >= self.n for v in part):
                raise ValueError(f"bipartite part {sorted(part)} has indices outside 0..{self.n - 1}")
            if not part or len(part) == self.n:
                raise ValueError("bipartite part must be a nonempty proper subset of the nodes")
            object.__setattr__(self, "part", part)
        elif self.kind is RelationKind.CUSTOM:
            if self.matrix is None:
                raise ValueError("custom relation needs a matrix")
            m = np.array(self.matrix)
            if m.shape != (self.n, self.n):
                raise ValueError(f"custom matrix must be {self.n}x{self.n}, got {m.shape}")
            if not np.isin(m, (0, 1)).all():
                raise ValueError("custom matrix entries must be 0 or 1")
            m = m.astype(np.uint8)
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    @classmethod
    def modulo(cls, k: int, n: int) -> RelationSpec:
        return cls(RelationKind.MODULO, n, k=k)

    @classmethod
    def greater_than(cls, n: int) -> RelationSpec:
        return cls(RelationKind.GREATER_THAN, n)

    @classmethod
    def bipartite(cls, part, n: int) -> RelationSpec:
        return cls(RelationKind.BIPARTITE, n, part=frozenset(part))

    @classmethod
    def custom(cls, matrix) -> RelationSpec:
        m = np.asarray(matrix)
        return cls(RelationKind.CUSTOM, m.shape[0], matrix=m)

    def __eq__(self, other):
        if not isinstance(other, RelationSpec):
            return NotImplemented
        same = (self.kind, self.n, self.k, self.part) == (other.kind, other.n, other.k, other.part)
        if same and self.kind is RelationKind.CUSTOM:
            return bool(np.array_equal(self.matrix, other.matrix))
        return same

    def __hash__(self):
        extra = self.matrix.tobytes() if self.matrix is not None else None
        return hash((self.kind, self.n, self.k, self.part, extra))

    def label(self) -> str:
        if self.kind is RelationKind.MODULO:
            return f"mod{self.k}"
        if self.kind is RelationKind.BIPARTITE:
            return f"bipartite{len(self.part)}"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class RelationMatrix:
    n: int
    entries: np.ndarray = field(repr=False)
    spec: RelationSpec

    def __eq__(self, other):
        if not isinstance(other, RelationMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.entries, other.entries)

    __hash__ = None

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def is_reflexive(self) -> bool:
        return bool(np.all(np.diag(self.entries) == 1))

    def is_transitive(self) -> bool:
        e = self.entries.astype(np.int64)
        return bool(np.all((e @ e > 0) <= (e > 0)))

    def is_antisymmetric(self) -> bool:
        return not np.any(self.entries * self.entries.T)

    # plain-text serialisations -------------------------------------------

    def to_edge_list(self) -> str:
        lines = [str(self.n)]
        lines += [f"{i} {j}" for i, j in np.argwhere(self.entries == 1)]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in self.entries)

    def save(self, path) -> None:
        path = Path(path)
        text = self.to_csv() if path.suffix == ".csv" else self.to_edge_list()
        path.write_text(text)


def build_relation(spec: RelationSpec) -> RelationMatrix:
    n = spec.n
    i, j = np.indices((n, n))
    if spec.kind is RelationKind.MODULO:
        entries = (i % spec.k) == (j % spec.k)
    elif spec.kind is RelationKind.GREATER_THAN:
        entries = i < j
    elif spec.kind is RelationKind.BIPARTITE:
        side = np.isin(np.arange(n), sorted(spec.part))
        entries = side[:, None] != side[None, :]
    else:
        entries = spec.matrix
    entries = np.array(entries, dtype=np.uint8)
    entries.flags.writeable = False
    return RelationMatrix(n, entries, spec)


def parse_edge_list(text: str) -> RelationMatrix:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [(no, ln) for no, ln in enumerate(rows, 1) if ln]
    if not rows:
        raise ValueError("edge list is empty")
    try:
        n = int(rows[0][1])
    except ValueError:
        raise ValueError(f"line {rows[0][0]}: expected node count, got {rows[0][1]!r}") from None
    m = np.zeros((n, n), dtype=np.uint8)
    for no, ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"line {no}: expected 'i j', got {ln!r}")
        a, b = int(parts[0]), int(parts[1])
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"line {no}: edge ({a}, {b}) outside 0..{n - 1}")
        m[a, b] = 1
    return build_relation(RelationSpec.custom(m))


def parse_csv(text: str) -> RelationMatrix:
    m = np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.int64, ndmin=2)
    return build_relation(RelationSpec.custom(m))


def load_relation(path) -> RelationMatrix:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".csv":
        return parse_csv(text)
    return parse_edge_list(text)


# description lengths ----------------------------------------------------


def log2_factorial(n: int) -> float:
    """``log2(n!)`` by exact summation of ``log2(i)``."""
    return math.fsum(math.log2(i) for i in range(2, int(n) + 1))


class Formula(str, enum.Enum):
    GENERIC = "generic"
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"
    REFLEXIVE = "reflexive"
    TRANSITIVE = "transitive"
    EQUIVALENCE = "equivalence"
    TOTAL_ORDER = "total_order"
    COMPLETE_BIPARTITE = "complete_bipartite"
    INCOMPLETE_BIPARTITE = "incomplete_bipartite"
    TREE = "tree"
    AUTOMORPHISM = "automorphism"


@dataclass(frozen=True)
class DescriptionLengthModel:
    """A row of the bits-per-relation table plus its parameters.

    ``mean_chain`` is the average transitive chain length, ``mean_depth`` the
    average node depth of a tree, ``k`` the number of equivalence classes,
    ``sizes`` the two part sizes of an incomplete bipartite graph and
    ``aut_count`` the automorphism group order.
    """

    formula: Formula
    k: int | None = None
    mean_chain: float | None = None
    mean_depth: float | None = None
    sizes: tuple[int, int] | None = None
    aut_count: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "formula", Formula(self.formula))
        f = self.formula
        if f is Formula.TRANSITIVE and not (self.mean_chain and self.mean_chain > 1):
            raise ValueError("transitive model needs mean_chain > 1")
        if f is Formula.TREE and not (self.mean_depth and self.mean_depth > 1):
            raise ValueError("tree model needs mean_depth > 1")
        if f is Formula.EQUIVALENCE and not (self.k and self.k >= 2):
            raise ValueError("equivalence model needs k >= 2")
        if f is Formula.INCOMPLETE_BIPARTITE and (
            self.sizes is None or min(self.sizes) < 1
        ):
            raise ValueError("incomplete bipartite model needs two positive part sizes")
        if f is Formula.AUTOMORPHISM and not (self.aut_count and self.aut_count >= 1):
            raise ValueError("automorphism model needs aut_count >= 1")


def description_length(model: DescriptionLengthModel, n: int) -> float:
    if n < 2:
        raise ValueError(f"description length needs n >= 2, got {n}")
    f = model.formula
    if f is Formula.GENERIC:
        return float(n * n)
    if f is Formula.SYMMETRIC:
        return n * (n + 1) / 2
    if f is Formula.ANTISYMMETRIC:
        return n * (n - 1) / 2
    if f is Formula.REFLEXIVE:
        return float(n * (n - 1))
    if f is Formula.TRANSITIVE:
        # (<k> - 1)! for real <k> via the gamma function
        return n * n / math.gamma(model.mean_chain)
    if f is Formula.EQUIVALENCE:
        return n * math.log2(model.k)
    if f is Formula.TOTAL_ORDER:
        return log2_factorial(n)
    if f is Formula.COMPLETE_BIPARTITE:
        return float(n)
    if f is Formula.INCOMPLETE_BIPARTITE:
        return float(model.sizes[0] * model.sizes[1])
    if f is Formula.TREE:
        return n * math.log2(model.mean_depth)
    return description_length_from_aut(n, model.aut_count)


def description_length_from_aut(n: int, aut_count: int) -> float:
    """``log2(n! / |Aut|)``, the bits naming one graph among its relabelings."""
    if aut_count < 1:
        raise ValueError(f"automorphism count must be >= 1, got {aut_count}")
    return log2_factorial(n) - math.log2(aut_count)


def automorphism_count(matrix: RelationMatrix) -> int:
    if matrix.n > MAX_AUTOMORPHISM_N:
        raise ValueError(
            f"brute-force automorphism search is limited to n <= {MAX_AUTOMORPHISM_N} "
            f"(got n={matrix.n}); use a closed-form DescriptionLengthModel instead"
        )
    return count_automorphisms(matrix.entries)


def default_model(spec: RelationSpec) -> DescriptionLengthModel:
    """The table row matching one of the built-in relation kinds."""
    if spec.kind is RelationKind.MODULO:
        return DescriptionLengthModel(Formula.EQUIVALENCE, k=max(spec.k, 2))
    if spec.kind is RelationKind.GREATER_THAN:
        return DescriptionLengthModel(Formula.TOTAL_ORDER)
    if spec.kind is RelationKind.BIPARTITE:
        return DescriptionLengthModel(Formula.COMPLETE_BIPARTITE)
    aut = automorphism_count(build_relation(spec))
    return DescriptionLengthModel(Formula.AUTOMORPHISM, aut_count=aut)


def sample_training_set(matrix: RelationMatrix, fraction: float, seed: int) -> np.ndarray:
    """Uniform subset of the ordered pairs, without replacement.

    Returns an ``(m, 2)`` int array of ``(i, j)`` rows with
    ``m = round(fraction * n**2)`` (halves round up), sorted row-major.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    total = matrix.n * matrix.n
    m = int(math.floor(fraction * total + 0.5))
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(total, size=m, replace=False))
    return np.column_stack(np.divmod(flat, matrix.n)).astype(np.int64)
