import itertools

from hypothesis import given, strategies as st

from qeasplit.perm import Permutation, symmetric_group

from oracles import compose


def perms(max_size=5):
    return st.integers(1, max_size).flatmap(lambda n: st.permutations(range(n))).map(
        lambda p: Permutation(tuple(p)))


def test_group_sizes_and_identity_first():
    for n, size in [(0, 1), (1, 1), (2, 2), (3, 6), (4, 24)]:
        group = symmetric_group(n)
        assert len(group) == size
        assert len(set(group)) == size
        assert group[0].is_identity()


def test_trailing_fixed_points_are_trimmed():
    assert Permutation((1, 0, 2, 3)) == Permutation((1, 0))
    assert Permutation((0, 1, 2)).is_identity()


def test_composition_matches_oracle():
    for p, q in itertools.product(symmetric_group(3), repeat=2):
        assert (p @ q).on(3) == compose(p.on(3), q.on(3))


@given(perms(), perms())
def test_inverse_and_associativity(p, q):
    assert (p @ p.inverse()).is_identity()
    r = Permutation.transposition(0, 2)
    assert (p @ q) @ r == p @ (q @ r)


@given(perms())
def test_transposition_factorisation_round_trips(p):
    assert Permutation.from_transpositions(p.transpositions()) == p
    assert all(i != j for i, j in p.transpositions())


def test_on_rejects_too_small_dimension():
    import pytest
    with pytest.raises(ValueError):
        Permutation((2, 0, 1)).on(2)
