import pytest

from qeasplit.bao import Homomorphism, verify_hom
from qeasplit.setalg import BaseSpec, DimensionError, PowersetAlgebra, SeqSpace, generate, product_R
from qeasplit.splitting import SplitSpec, split
from qeasplit.terms import parse_term
from qeasplit.witness import (
    BudgetExceeded, ExhaustedNone, Found, HomViolation, RefutationCertificate, candidate_from_points,
    eval_tau, refute_representation, search_representation, synthetic_candidates, tau, verify_tau_zero,
)

import oracles


def test_tau_guards():
    with pytest.raises(ValueError):
        tau(0, 3)
    with pytest.raises(DimensionError):
        tau(3, 3)


def test_tau_printed_form_round_trips():
    t = tau(2, 3)
    assert str(t) == ("c1(c2(x0)) * c0(d(0,1) * c1(c2(x0))) * c0(d(0,2) * c1(c2(x0)))"
                      " * -d(0,1) * -d(0,2) * -d(1,2)")
    assert parse_term(str(t), 3) == t.term
    assert str(tau(1, 2)) == "c1(x0) * c0(d(0,1) * c1(x0)) * -d(0,1)"


@pytest.mark.parametrize("sizes,m,empty", [
    ((2, 2, 2), 2, True),
    ((3, 2, 2), 2, False),
    ((1, 2), 1, True),
    ((2, 2), 1, False),
    ((2, 3, 3), 2, True),
])
def test_tau_against_brute_force(sizes, m, empty):
    base = BaseSpec.from_sizes(sizes)
    space = base.space()
    R = product_R(base)
    A = generate(space, 1, [R])
    got = eval_tau(A, R, m)
    expected = oracles.witness_set(m, set(R.sequences()), space.dimension, space.universe)
    assert set(got.sequences()) == expected
    assert verify_tau_zero(A, R, m) == empty


def test_tau_vanishes_in_the_split_algebra(tiny, wide):
    for t in (tiny, wide):
        assert verify_tau_zero(t.S.bao, t.S.R, t.m)
        assert verify_tau_zero(t.A, t.R, t.m)


def test_collapsed_R_is_reported(tiny):
    S = tiny.S
    space = SeqSpace(3, (0, 1, 2))
    outside = next(a for a in range(S.bao.num_atoms) if not (S.R >> a) & 1)
    h = candidate_from_points(S, space, [outside] * space.size, "collapsed")
    result = refute_representation(S, h)
    assert isinstance(result, HomViolation) and result.op == "nonzero"
    assert result.verify()


def test_random_candidates_fail_a_cylindrification(tiny):
    S = tiny.S
    cands = synthetic_candidates(S, 8, seed=4)
    for h in cands[::2]:
        result = refute_representation(S, h)
        assert isinstance(result, HomViolation)
        assert result.verify()
        assert not verify_hom(h).passed


def test_local_candidates_give_certificates(tiny):
    S = tiny.S
    for h in synthetic_candidates(S, 12, seed=9)[1::2]:
        result = refute_representation(S, h)
        assert isinstance(result, RefutationCertificate), result
        assert result.verify()
        assert all(result.checks.values())
        assert len(set(result.w)) == S.m + 1
        data = result.to_json()
        assert data["kind"] == "certificate" and data["verified"]


def test_tampered_certificate_does_not_verify(tiny):
    S = tiny.S
    result = refute_representation(S, synthetic_candidates(S, 2, seed=1)[1])
    assert isinstance(result, RefutationCertificate)
    result.w = [result.w[0]] * len(result.w)
    assert not result.verify()


def test_overlapping_parts_are_reported(tiny):
    S = tiny.S
    space = SeqSpace(3, (0, 1, 2))
    outside = next(a for a in range(S.bao.num_atoms) if not (S.R >> a) & 1)
    r0 = S.part(0).bit_length() - 1
    labels = [outside] * space.size
    labels[space.index((0, 0, 0))] = r0
    h = candidate_from_points(S, space, labels, "one-part")
    images = list(h.images)
    r1 = S.part(1).bit_length() - 1
    images[r1] = images[r0]
    h2 = Homomorphism(S.bao, h.target, images, h.ops, perms=(), injective=False, name="overlap")
    result = refute_representation(S, h2)
    assert isinstance(result, HomViolation) and result.op == "meet"
    assert result.verify()


def test_refutation_rejects_wrong_inputs(tiny, wide):
    h = synthetic_candidates(tiny.S, 1)[0]
    with pytest.raises(ValueError):
        refute_representation(wide.S, h)


def test_search_finds_nothing_for_the_split_algebra(tiny):
    res = search_representation(tiny.S.bao, ("cyl", "diag"), max_base=6, budget=50_000)
    assert isinstance(res, ExhaustedNone)
    assert [b["base"] for b in res.stats["bases"]] == [1, 2, 3, 4, 5, 6]


def test_search_recovers_a_representation_of_the_base(tiny):
    res = search_representation(tiny.B, ("cyl", "diag"), max_base=6, budget=200_000)
    assert isinstance(res, Found) and res.base_size == 6
    assert verify_hom(res.h).passed


def test_search_budget_is_enforced(tiny):
    with pytest.raises(BudgetExceeded):
        search_representation(tiny.B, ("cyl", "diag"), max_base=6, budget=3)


def test_search_rejects_unknown_operations(tiny):
    with pytest.raises(ValueError):
        search_representation(tiny.B, ("replace",))
