"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from qeasplit.bao import Homomorphism, Sampled as SampledHom, from_concrete, verify_bao, verify_hom
from qeasplit.cli import preset, run, dumps, strip_timings
from qeasplit.nondiag import EnlargedBase, lift, nondiag_representation
from qeasplit.perm import symmetric_group
from qeasplit.setalg import BaseSpec, PowersetAlgebra, generate, operator_law_violations, product_R
from qeasplit.splitting import (
    SplitAtoms, SplitSpec, embed_small, embed_split, equiv_blocks, real_partition, small_subalgebra, split,
    verify_split,
)
from qeasplit.terms import (
    BOTTOM, Atomic, QuasiEquation, Sampled, check_quasi_equation, derived_subst, diag, eval_term, var,
)
from qeasplit.witness import (
    ExhaustedNone, Found, HomViolation, RefutationCertificate, eval_tau, refute_representation,
    search_representation, synthetic_candidates, verify_tau_zero,
)

import oracles


@contextmanager
def criterion(capsys, number, title, limit=None):
    t0 = time.perf_counter()
    status = "FAIL"
    elapsed = 0.0
    try:
        yield
        elapsed = time.perf_counter() - t0
        if limit is not None:
            assert elapsed < limit, f"took {elapsed:.2f} s, limit {limit} s"
        status = "PASS"
    finally:
        elapsed = elapsed or time.perf_counter() - t0
        budget = f" (limit {limit} s)" if limit is not None else ""
        with capsys.disabled():
            print(f"\n[acceptance] criterion {number:2d} {status}: {title} [{elapsed:.2f} s{budget}]")


def tiny_setup(sizes=(2, 2, 2), m=2, n=2):
    base = BaseSpec.from_sizes(sizes)
    space = base.space()
    R = product_R(base)
    A = generate(space, n, [R])
    B = from_concrete(A)
    S = split(SplitSpec.from_concrete(A, R, m, n, base=B))
    return base, space, R, A, B, S


def test_criterion_01_operator_laws(capsys):
    with criterion(capsys, 1, "operator laws at d=3, |U|=6", 5):
        base = BaseSpec.from_sizes((2, 2, 2))
        space = base.space()
        R = product_R(base)
        A = generate(space, 2, [R])
        full = PowersetAlgebra(space, 2)
        # generated subalgebra: every atom, then every atom pair for the binary laws
        assert operator_law_violations(full, list(A.atoms)) == []
        for x, y in itertools.combinations(A.atoms, 2):
            for i in range(3):
                assert full.cyl(i, x | y) == full.cyl(i, x) | full.cyl(i, y)
            for p in full.perms:
                assert full.subst(p, x | y) == full.subst(p, x) | full.subst(p, y)
                assert full.subst(p, x & y) == full.subst(p, x) & full.subst(p, y)
        assert verify_bao(from_concrete(A)).passed
        rng = np.random.default_rng(1000)
        sample = [full.random_element(rng) for _ in range(1000)]
        assert operator_law_violations(full, sample) == []


def test_criterion_02_atomhood_and_disjointness(capsys):
    with criterion(capsys, 2, "s_tau R atoms, pairwise disjoint", 5):
        base = BaseSpec.from_sizes((2, 2, 2))
        space = base.space()
        R = product_R(base)
        A = generate(space, 2, [R])
        family = [space.subst(p, R) for p in symmetric_group(2)]
        assert len(family) == 2
        assert all(A.is_atom(x) for x in family)
        assert (family[0] & family[1]).is_empty()
        # independent check: swapping coordinates 0 and 1 of R by brute force
        swapped = oracles.subst((1, 0), set(R.sequences()), 3, space.universe)
        assert set(family[1].sequences()) == swapped


def test_criterion_03_witness_vanishing(capsys):
    with criterion(capsys, 3, "tau(R)=0 at |U_0|=2, nonzero control at |U_0|=3", 2):
        _, space, R, A, _, _ = tiny_setup()
        assert verify_tau_zero(A, R, 2) is True
        cbase = BaseSpec.from_sizes((3, 2, 2))
        cR = product_R(cbase)
        cA = generate(cbase.space(), 2, [cR])
        assert verify_tau_zero(cA, cR, 2) is False
        point = eval_tau(cA, cR, 2).first()
        assert point is not None and len(set(point)) == 3
        assert point in oracles.witness_set(2, set(cR.sequences()), 3, cbase.universe)


def test_criterion_04_split_laws(capsys):
    with criterion(capsys, 4, "split construction laws and tau(R)=0 in the split", 5):
        *_, S = tiny_setup()
        rec = verify_split(S)
        assert rec.passed, [r.law for r in rec.failures()]
        assert rec.get("split.cyl_parts").checked == 18
        assert verify_tau_zero(S.bao, S.R, 2)


def test_criterion_05_refutation_engine(capsys):
    with criterion(capsys, 5, "100 candidates refuted with verified evidence", 10):
        *_, S = tiny_setup()
        cands = synthetic_candidates(S, 100, seed=0, sizes=(3, 4, 5, 6))
        assert len(cands) == 100
        assert {len(h.target.space.universe) for h in cands} == {3, 4, 5, 6}
        kinds = {"violation": 0, "certificate": 0}
        for h in cands:
            assert not h(S.R).is_empty()
            result = refute_representation(S, h)
            assert isinstance(result, (HomViolation, RefutationCertificate))
            assert result.verify()
            if isinstance(result, RefutationCertificate):
                assert len(set(result.w)) == S.m + 1
                assert all(result.checks.values())
                kinds["certificate"] += 1
            else:
                kinds["violation"] += 1
        assert kinds["certificate"] > 0 and kinds["violation"] > 0


def test_criterion_06_bounded_search(capsys):
    with criterion(capsys, 6, "search: split none up to |W|=4, base algebra found", 60):
        base, *_, B, S = tiny_setup()
        res = search_representation(S.bao, ("cyl", "diag"), max_base=4)
        assert isinstance(res, ExhaustedNone)
        # the base algebra's smallest representation lives on its own 6-point base
        found = search_representation(B, ("cyl", "diag"), max_base=len(base.universe))
        assert isinstance(found, Found)
        assert verify_hom(found.h).passed


@pytest.mark.parametrize("k,n,m", [(1, 1, 4), (1, 2, 8), (2, 2, 16)])
def test_criterion_07_block_bound(capsys, k, n, m):
    with criterion(capsys, 7, f"block bound at (k,n,m)=({k},{n},{m})", 5):
        atoms = SplitAtoms.synthetic(n, m)
        bound = 2 ** (k * len(symmetric_group(n)))
        rng = np.random.default_rng(7)
        nbits = len(atoms.perms) * atoms.parts
        for _ in range(500):
            size = int(rng.integers(0, k + 1))
            G = [int("".join(map(str, rng.integers(0, 2, nbits))), 2) << atoms.offset for _ in range(size)]
            part = equiv_blocks(atoms, G, k)
            assert part.p <= bound
            assert sorted(j for b in part.blocks for j in b) == list(range(m + 1))


def test_criterion_08_real_partition(capsys):
    with criterion(capsys, 8, "real partitions at q=2 and q=3", 2):
        for sizes, q in [((2, 2, 2), 2), ((3, 3, 3), 3)]:
            base = BaseSpec.from_sizes(sizes)
            space = base.space()
            rp = real_partition(space, base.blocks, q)
            rec = rp.verify()
            assert rec.passed
            for a, b in itertools.combinations(rp.pieces, 2):
                assert (a & b).is_empty()
            union = rp.pieces[0]
            for piece in rp.pieces[1:]:
                union = union | piece
            assert union == rp.target
            for i in range(3):
                assert all(space.cyl(i, piece) == space.cyl(i, rp.target) for piece in rp.pieces)


def test_criterion_09_small_subalgebra_representable(capsys):
    with criterion(capsys, 9, "embed_small verifies over B, full signature", 10):
        _, space, _, _, _, S = tiny_setup()
        rng = np.random.default_rng(0)
        part = equiv_blocks(S, [S.bao.random_element(rng)], 1)
        small = small_subalgebra(S, part)
        rp = real_partition(space, BaseSpec.from_sizes((2, 2, 2)).blocks, S.m)
        h = embed_small(S, small, rp)
        assert {"boolean", "cyl", "diag", "subst"} <= h.ops and h.injective
        rec = verify_hom(h)
        assert rec.passed, [r.law for r in rec.failures()]
        assert rec.get("injective").passed
        # second route: literal evaluation on random elements of B
        assert verify_hom(h, SampledHom(300, seed=9)).passed


def test_criterion_10_inter_splitting_embedding(capsys):
    with criterion(capsys, 10, "embed_split (2,1)->(4,2) and a chained composition", 10):
        base = BaseSpec.from_sizes((2, 2, 2))
        R = product_R(base)
        A = generate(base.space(), 2, [R])
        B = from_concrete(A)
        with pytest.warns(UserWarning):
            S1, S2, S3 = (split(SplitSpec.from_concrete(A, R, m, n, base=B)) for m, n in [(2, 1), (4, 2), (6, 2)])
        e1, e2 = embed_split(S1, S2), embed_split(S2, S3)
        assert e1.perms == tuple(symmetric_group(1))
        for h in (e1, e2, e1.then(e2)):
            assert verify_hom(h).passed, h.name


def test_criterion_11_diagonal_free_representation(capsys):
    with criterion(capsys, 11, "nondiag: all but diagonals preserved, witness recorded", 10):
        base, space, R, A, B, S = tiny_setup((2, 3, 3))
        eb = EnlargedBase(base, extra=1)
        assert len(eb.fresh) == 1
        rep = nondiag_representation(S, eb)
        summary = rep.summary()
        laws = set(summary["preserved"])
        assert "boolean.join" in laws and "boolean.complement" in laws and "injective" in laws
        assert {f"cyl[{i}]" for i in range(3)} <= laws
        assert {f"subst[{','.join(map(str, p.mapping))}]" for p in symmetric_group(2) if not p.is_identity()} <= laws
        assert {f"replace[{i}|{j}]" for i in range(3) for j in range(3) if i != j} <= laws
        # derived s_i^j as terms: h(s_i^j a) = s_i^j h(a) on every atom
        h, T = rep.h, rep.h.target
        for i, j in itertools.permutations(range(3), 2):
            t = derived_subst(i, j, var(0))
            for a in range(S.bao.num_atoms):
                assert h(eval_term(t, {0: 1 << a}, S.bao)) == eval_term(t, {0: h(1 << a)}, T)
        failed = {k: v for k, v in summary["failed"].items() if k.startswith("diag")}
        assert failed and summary["families_failed"] == ["diag"]
        seq = tuple(failed["diag[0,1]"]["sequence"])
        assert seq[0] != seq[1] and seq in lift(space.diag(0, 1), eb)


def test_criterion_12_quasi_equation(capsys):
    with criterion(capsys, 12, "x <= -d_ij implies s_i^j x = 0 in the split algebra", 5):
        *_, S = tiny_setup()
        x = var(0)
        for i, j in itertools.permutations(range(3), 2):
            q = QuasiEquation(((x * -diag(i, j), x),), (derived_subst(i, j, x), BOTTOM))
            verdict = check_quasi_equation(q, S.bao, Atomic())
            assert verdict.holds, (i, j, verdict.counterexample)
            # second route: literal evaluation on random elements below -d_ij
            below = S.bao.complement(S.bao.diag(i, j))
            rng = np.random.default_rng(12)
            for _ in range(200):
                y = S.bao.random_element(rng) & below
                assert eval_term(derived_subst(i, j, x), {0: y}, S.bao) == 0
            assert check_quasi_equation(q, S.bao, Sampled(200, seed=i * 3 + j)).holds


def test_criterion_13_determinism(capsys):
    with criterion(capsys, 13, "tiny preset reports are byte-identical modulo timings"):
        first = dumps(strip_timings(run(preset("tiny"))))
        second = dumps(strip_timings(run(preset("tiny"))))
        assert first == second
        assert json.loads(first)["passed"]
