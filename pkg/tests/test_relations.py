import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reponlab.relations import (
    DescriptionLengthModel,
    Formula,
    RelationKind,
    RelationSpec,
    automorphism_count,
    build_relation,
    default_model,
    description_length,
    description_length_from_aut,
    load_relation,
    log2_factorial,
    parse_csv,
    parse_edge_list,
    sample_training_set,
)


def test_modulo_entry():
    assert build_relation(RelationSpec.modulo(3, 6)).entries[1, 4] == 1


def test_greater_than_entries():
    e = build_relation(RelationSpec.greater_than(6)).entries
    assert e[2, 5] == 1 and e[5, 2] == 0


def test_bipartite_entries():
    e = build_relation(RelationSpec.bipartite({0, 1}, 5)).entries
    assert e[0, 2] == 1 and e[0, 1] == 0


@pytest.mark.parametrize(
    "make",
    [
        lambda: RelationSpec.modulo(7, 6),
        lambda: RelationSpec.modulo(0, 6),
        lambda: RelationSpec.bipartite(set(), 4),
        lambda: RelationSpec.bipartite({0, 1, 2, 3}, 4),
        lambda: RelationSpec.bipartite({5}, 4),
        lambda: RelationSpec.custom(np.array([[0, 2], [1, 0]])),
        lambda: RelationSpec.custom(np.zeros((2, 3))),
        lambda: RelationSpec.greater_than(0),
    ],
)
def test_invalid_specs_rejected(make):
    with pytest.raises(ValueError):
        make()


@given(st.integers(2, 30), st.integers(1, 30))
def test_modulo_is_equivalence(n, k):
    k = min(k, n)
    m = build_relation(RelationSpec.modulo(k, n))
    assert m.is_symmetric() and m.is_reflexive() and m.is_transitive()


@given(st.integers(2, 30))
def test_greater_than_is_strict_order(n):
    m = build_relation(RelationSpec.greater_than(n))
    assert m.is_antisymmetric() and m.is_transitive()


@given(st.integers(2, 20), st.data())
def test_bipartite_symmetric_zero_diagonal(n, data):
    part = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
    m = build_relation(RelationSpec.bipartite(part, n))
    assert m.is_symmetric() and not np.any(np.diag(m.entries))


def test_regeneration_is_bit_identical():
    for spec in (RelationSpec.modulo(3, 30), RelationSpec.greater_than(30), RelationSpec.bipartite(range(15), 30)):
        a, b = build_relation(spec), build_relation(spec)
        assert a.entries.tobytes() == b.entries.tobytes()


def test_entries_read_only():
    m = build_relation(RelationSpec.modulo(3, 5))
    with pytest.raises(ValueError):
        m.entries[0, 0] = 0


def test_description_lengths():
    assert description_length(DescriptionLengthModel(Formula.COMPLETE_BIPARTITE), 30) == 30
    assert description_length(DescriptionLengthModel(Formula.TOTAL_ORDER), 30) == pytest.approx(107.70906734197344, abs=1e-9)
    assert description_length(DescriptionLengthModel(Formula.EQUIVALENCE, k=3), 30) == pytest.approx(47.548875021634686, abs=1e-9)
    assert description_length(DescriptionLengthModel(Formula.GENERIC), 30) == 900
    assert description_length(DescriptionLengthModel(Formula.SYMMETRIC), 4) == 10
    assert description_length(DescriptionLengthModel(Formula.ANTISYMMETRIC), 4) == 6
    assert description_length(DescriptionLengthModel(Formula.REFLEXIVE), 4) == 12
    assert description_length(DescriptionLengthModel(Formula.INCOMPLETE_BIPARTITE, sizes=(3, 4)), 7) == 12
    assert description_length(DescriptionLengthModel(Formula.TRANSITIVE, mean_chain=3.0), 10) == pytest.approx(50.0)
    assert description_length(DescriptionLengthModel(Formula.TREE, mean_depth=4.0), 10) == pytest.approx(20.0)


@given(st.integers(2, 60))
def test_log2_factorial_matches_lgamma(n):
    assert log2_factorial(n) == pytest.approx(math.lgamma(n + 1) / math.log(2), rel=1e-12)


def test_description_length_from_aut():
    assert description_length_from_aut(4, 1) == pytest.approx(4.584962500721156, abs=1e-12)
    assert abs(description_length_from_aut(5, 12) - math.log2(10)) < 1e-12
    assert description_length_from_aut(2, 2) == 0
    with pytest.raises(ValueError):
        description_length_from_aut(4, 0)


@given(st.integers(2, 40))
def test_aut_one_equals_total_order(n):
    assert description_length_from_aut(n, 1) == description_length(DescriptionLengthModel(Formula.TOTAL_ORDER), n)


def _brute_aut(e):
    n = len(e)
    return sum(all(e[p[i], p[j]] == e[i, j] for i in range(n) for j in range(n)) for p in permutations(range(n)))


def test_automorphism_examples(backend):
    k23 = RelationSpec.bipartite({0, 1}, 5)
    assert automorphism_count(build_relation(k23)) == 12
    assert automorphism_count(build_relation(RelationSpec.greater_than(4))) == 1
    assert automorphism_count(build_relation(RelationSpec.custom(np.zeros((3, 3), dtype=int)))) == 6


@pytest.mark.parametrize("a,c", [(1, 1), (1, 3), (2, 2), (2, 3), (3, 3), (2, 5), (4, 4)])
def test_complete_bipartite_automorphisms(a, c, backend):
    spec = RelationSpec.bipartite(range(a), a + c)
    expected = math.factorial(a) * math.factorial(c) * (2 if a == c else 1)
    assert automorphism_count(build_relation(spec)) == expected


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.data())
def test_automorphisms_match_brute_force(n, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n * n, max_size=n * n))
    e = np.array(bits, dtype=np.uint8).reshape(n, n)
    assert automorphism_count(build_relation(RelationSpec.custom(e))) == _brute_aut(e)


def test_automorphism_bound():
    with pytest.raises(ValueError, match="n <= 10"):
        automorphism_count(build_relation(RelationSpec.greater_than(11)))


def test_default_models():
    assert default_model(RelationSpec.modulo(3, 30)).formula is Formula.EQUIVALENCE
    assert default_model(RelationSpec.greater_than(30)).formula is Formula.TOTAL_ORDER
    assert default_model(RelationSpec.bipartite({0}, 30)).formula is Formula.COMPLETE_BIPARTITE
    custom = default_model(RelationSpec.custom(build_relation(RelationSpec.bipartite({0, 1}, 5)).entries))
    assert custom.formula is Formula.AUTOMORPHISM and custom.aut_count == 12


def test_sample_training_set_sizes():
    m = build_relation(RelationSpec.modulo(3, 30))
    assert sample_training_set(m, 0.0, 0).shape == (0, 2)
    full = sample_training_set(m, 1.0, 0)
    assert len(full) == 900 and len({tuple(p) for p in full}) == 900
    assert len(sample_training_set(m, 0.75, 0)) == 675
    with pytest.raises(ValueError):
        sample_training_set(m, 1.5, 0)


@given(st.floats(0, 1), st.integers(0, 2**31))
def test_sample_training_set_deterministic_and_unique(fraction, seed):
    m = build_relation(RelationSpec.greater_than(12))
    a = sample_training_set(m, fraction, seed)
    assert np.array_equal(a, sample_training_set(m, fraction, seed))
    assert len({tuple(p) for p in a}) == len(a) == int(math.floor(fraction * 144 + 0.5))
    assert np.all((a >= 0) & (a < 12))


def test_edge_list_and_csv_round_trip(tmp_path):
    m = build_relation(RelationSpec.bipartite({0, 2}, 6))
    assert parse_edge_list(m.to_edge_list()) == m
    assert parse_csv(m.to_csv()) == m
    for name in ("g.txt", "g.csv"):
        m.save(tmp_path / name)
        assert load_relation(tmp_path / name) == m
    loaded = load_relation(tmp_path / "g.txt")
    assert loaded.spec.kind is RelationKind.CUSTOM


def test_edge_list_errors_name_the_line():
    with pytest.raises(ValueError, match="line 3"):
        parse_edge_list("3\n0 1\n0 7\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_edge_list("# header\nthree\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_edge_list("3\n0 1 2\n")


def test_edge_list_comments():
    m = parse_edge_list("# a graph\n3\n0 1  # edge\n\n1 2\n")
    assert m.entries.sum() == 2 and m.entries[0, 1] == 1
