import itertools

import pytest

from qeasplit.nondiag import EnlargedBase, lift, nondiag_representation
from qeasplit.setalg import BaseSpec, product_set
from qeasplit.splitting import SplitError


@pytest.fixture(scope="module")
def eb(wide):
    return EnlargedBase(wide.base, extra=1)


def test_enlarged_base_shape(wide, eb):
    assert eb.W == tuple(range(9))
    assert eb.blocks[0] == (0, 1, 8)
    assert eb.t[8] == 0 and all(eb.t[u] == u for u in wide.base.universe)
    eb.check()
    assert not EnlargedBase(wide.base, 0).enlarged
    with pytest.raises(ValueError):
        EnlargedBase(wide.base, -1)


def test_lift_against_brute_force(wide):
    eb2 = EnlargedBase(wide.base, extra=2)
    space = eb2.space()
    for x in (wide.R, wide.space.diag(0, 1), wide.space.cyl(2, wide.R)):
        members = set(x.sequences())
        expected = {s for s in itertools.product(eb2.W, repeat=3) if eb2.g(s) in members}
        assert set(lift(x, eb2).sequences()) == expected
    assert lift(wide.space.empty(), eb2).is_empty()
    assert lift(wide.R, eb2) == product_set(space, eb2.blocks)


def test_lift_does_not_commute_with_diagonals(wide):
    eb2 = EnlargedBase(wide.base, extra=2)
    space = eb2.space()
    lifted = lift(wide.space.diag(0, 1), eb2)
    assert lifted != space.diag(0, 1)
    w = (lifted - space.diag(0, 1)).first()
    assert w[0] != w[1] and eb2.t[w[0]] == eb2.t[w[1]]


def test_lift_commutes_with_cylindrifications(wide, eb):
    space = eb.space()
    for i in range(3):
        assert lift(wide.space.cyl(i, wide.R), eb) == space.cyl(i, lift(wide.R, eb))


def test_only_diagonals_fail(wide, eb):
    rep = nondiag_representation(wide.S, eb)
    summary = rep.summary()
    assert summary["families_failed"] == ["diag"]
    assert set(summary["failed"]) == {"diag[0,1]", "diag[0,2]", "diag[1,2]"}
    assert summary["failed"]["diag[0,1]"]["sequence"] == [0, 8, 0]
    for family in ("boolean", "cyl", "subst", "replace", "injective"):
        assert any(law.startswith(family) for law in summary["preserved"])
    assert rep.partition.verify().passed


def test_block_zero_too_small_without_enlargement(wide):
    with pytest.raises(SplitError):
        nondiag_representation(wide.S, EnlargedBase(wide.base, 0))


def test_other_blocks_too_small(tiny):
    with pytest.raises(SplitError):
        nondiag_representation(tiny.S, EnlargedBase(tiny.base, 1))


def test_base_mismatch(wide):
    other = BaseSpec.from_sizes((2, 3, 4))
    with pytest.raises(SplitError):
        nondiag_representation(wide.S, EnlargedBase(other, 1))
