"""Splitting an atom of a finite BAO, and the maps built around the split.

Given an atom ``R`` of a base algebra ``A'`` whose substitution images
``s_tau R`` (tau in G_n) are pairwise distinct atoms, ``split`` replaces each
``s_tau R`` by ``m + 1`` new atoms ``s_tau R_j`` that keep the
cylindrifications of ``s_tau R``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bao import FiniteBAO, Homomorphism, VerificationRecord, bits_of, verify_bao, verify_hom
from .perm import Permutation, symmetric_group
from .bao import from_concrete
from .setalg import GeneratedAlgebra, PowersetAlgebra, SeqSpace, SetElement, product_set


class SplitError(ValueError):
    pass


def perm_label(p: Permutation) -> str:
    return "" if p.is_identity() else "s" + "".join(map(str, p.mapping))


@dataclass
class SplitAtoms:
    """Index table for the named atoms ``s_tau R_j`` (tau in G_n, j <= m)."""

    perms: tuple[Permutation, ...]
    m: int
    offset: int = 0

    @classmethod
    def synthetic(cls, n: int, m: int) -> SplitAtoms:
        return cls(symmetric_group(n), m)

    @property
    def parts(self) -> int:
        return self.m + 1

    def index(self, perm: Permutation, j: int) -> int:
        return self.offset + self.perms.index(perm) * self.parts + j

    def atom(self, perm: Permutation, j: int) -> int:
        return 1 << self.index(perm, j)

    def family(self, perm: Permutation) -> int:
        """The mask of ``s_perm R = sum_j s_perm R_j``."""
        return sum(self.atom(perm, j) for j in range(self.parts))

    def all_mask(self) -> int:
        return sum(self.family(p) for p in self.perms)

    def items(self):
        for p in self.perms:
            for j in range(self.parts):
                yield p, j


@dataclass
class SplitSpec:
    base: FiniteBAO
    r_atom: int
    m: int
    n: int
    k: int = 1

    @classmethod
    def from_concrete(cls, A: GeneratedAlgebra, R: SetElement, m: int, n: int | None = None, k: int = 1,
                      base: FiniteBAO | None = None) -> SplitSpec:
        base = base or from_concrete(A)
        if not A.is_atom(R):
            raise SplitError("R is not an atom of the base algebra")
        return cls(base, A.atom_index(R), m, A.n if n is None else n, k)

    def validate(self, witness: bool = False) -> None:
        B = self.base
        if not 0 <= self.r_atom < B.num_atoms:
            raise SplitError("R is not an atom of the base algebra")
        if self.m < 0:
            raise SplitError("m must be >= 0")
        if self.n > B.n:
            raise SplitError(f"base algebra only has substitutions from G_{B.n}")
        images = [B.subst_action[p][self.r_atom] for p in symmetric_group(self.n)]
        if len(set(images)) != len(images):
            raise SplitError("the atoms s_tau R are not pairwise disjoint")
        if B.dimension < self.m + 1:
            msg = f"dimension {B.dimension} < m + 1 = {self.m + 1}; the witness term is unavailable"
            if witness:
                raise SplitError(msg)
            warnings.warn(msg, stacklevel=3)


@dataclass
class SplitAlgebra:
    spec: SplitSpec
    bao: FiniteBAO
    named: SplitAtoms
    kept: list[int]
    family: dict[Permutation, int]
    _pos: dict[int, int] = field(repr=False, default_factory=dict)

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def base(self) -> FiniteBAO:
        return self.spec.base

    @property
    def origin(self) -> GeneratedAlgebra | None:
        return self.spec.base.origin

    def embed_old(self, x: int) -> int:
        """Image of a base element; a split family maps to the sum of its parts."""
        out = 0
        fam = {a: p for p, a in self.family.items()}
        for a in bits_of(x):
            if a in fam:
                out |= self.named.family(fam[a])
            else:
                out |= 1 << self._pos[a]
        return out

    @property
    def R(self) -> int:
        return self.named.family(Permutation.identity())

    def part(self, j: int, perm: Permutation | None = None) -> int:
        return self.named.atom(perm or Permutation.identity(), j)

    def embed_old_hom(self) -> Homomorphism:
        return Homomorphism(self.base, self.bao, [self.embed_old(1 << a) for a in range(self.base.num_atoms)],
                            perms=symmetric_group(self.n), name="embed_old")


def split(spec: SplitSpec) -> SplitAlgebra:
    """Split ``R`` into ``m + 1`` parts inside every ``s_tau R``."""
    spec.validate()
    B, r, m = spec.base, spec.r_atom, spec.m
    perms = symmetric_group(spec.n)
    family = {p: B.subst_action[p][r] for p in perms}
    fam_atoms = set(family.values())
    kept = [a for a in range(B.num_atoms) if a not in fam_atoms]
    pos = {a: k for k, a in enumerate(kept)}
    named = SplitAtoms(perms, m, offset=len(kept))
    S = SplitAlgebra(spec, None, named, kept, family, pos)  # type: ignore[arg-type]

    d = B.dimension
    cyl = []
    for i in range(d):
        row = [S.embed_old(B.cyl_action[i][a]) for a in kept]
        row += [S.embed_old(B.cyl_action[i][family[p]]) for p, _ in named.items()]
        cyl.append(row)
    subst = {}
    for s in perms:
        table = B.subst_action[s]
        row = [pos[table[a]] for a in kept]
        row += [named.index(s @ p, j) for p, j in named.items()]
        subst[s] = row
    diag = {ij: S.embed_old(mask) for ij, mask in B.diag_action.items()}
    names = [B.names[a] for a in kept] + [f"{perm_label(p)}R{j}" for p, j in named.items()]
    S.bao = FiniteBAO(d, spec.n, names, cyl, subst, diag)
    return S


def verify_split(S: SplitAlgebra) -> VerificationRecord:
    """The split laws: BAO laws, R = sum R_j, c_i s_tau R_j = c_i s_tau R, s_sigma s_tau R_j = s_{sigma tau} R_j."""
    rec = verify_bao(S.bao)
    rec.subject = f"split(m={S.m}, n={S.n})"
    A, named = S.bao, S.named
    R_sum = 0
    for j in range(named.parts):
        R_sum |= S.part(j)
    rec.add("split.R_is_sum", None if R_sum == S.embed_old(1 << S.spec.r_atom) else {"R": A.describe(R_sum)}, 1)

    w, count = None, 0
    for i in range(A.dimension):
        for p in named.perms:
            whole = A.cyl(i, named.family(p))
            for j in range(named.parts):
                count += 1
                if A.cyl(i, named.atom(p, j)) != whole and w is None:
                    w = {"i": i, "perm": list(p.mapping), "j": j}
    rec.add("split.cyl_parts", w, count)

    w, count = None, 0
    for s in named.perms:
        for p, j in named.items():
            count += 1
            if A.subst(s, named.atom(p, j)) != named.atom(s @ p, j) and w is None:
                w = {"perm": list(s.mapping), "after": list(p.mapping), "j": j}
    rec.add("split.subst_parts", w, count)

    idx = [named.index(p, j) for p, j in named.items()]
    rec.add("split.named_distinct", None if len(set(idx)) == len(idx) else {"reason": "collision"}, len(idx))

    emb = verify_hom(S.embed_old_hom())
    w = None if emb.passed else {"failed": [r.law for r in emb.failures()]}
    rec.add("split.embed_old_hom", w, sum(r.checked for r in emb.results))
    return rec


def decompose(S: SplitAlgebra, x: int) -> tuple[int, frozenset[tuple[Permutation, int]]]:
    """Write ``x`` as ``embed_old(a) + (named atoms)`` with ``a`` as large as possible."""
    base_mask = 0
    loose = set()
    for a in S.kept:
        if (x >> S._pos[a]) & 1:
            base_mask |= 1 << a
    for p in S.named.perms:
        fam = S.named.family(p)
        if x & fam == fam:
            base_mask |= 1 << S.family[p]
        else:
            loose.update((p, j) for j in range(S.named.parts) if x & S.named.atom(p, j))
    return base_mask, frozenset(loose)


def recompose(S: SplitAlgebra, base_mask: int, loose) -> int:
    out = S.embed_old(base_mask)
    for p, j in loose:
        out |= S.named.atom(p, j)
    return out


# -- the equivalence on parts and the small subalgebra ----------------------

@dataclass
class EquivPartition:
    G: list[int]
    blocks: list[list[int]]
    bound: int

    @property
    def p(self) -> int:
        return len(self.blocks)

    def block_of(self, j: int) -> int:
        for b, block in enumerate(self.blocks):
            if j in block:
                return b
        raise KeyError(j)


def block_bound(k: int, n: int) -> int:
    return 2 ** (k * len(symmetric_group(n)))


def equiv_blocks(S: SplitAlgebra | SplitAtoms, G: Sequence[int], k: int | None = None) -> EquivPartition:
    """Group the parts ``R_j`` by which ``g`` in ``G`` lie above each ``s_tau R_j``."""
    named = S.named if isinstance(S, SplitAlgebra) else S
    if k is None and isinstance(S, SplitAlgebra):
        k = S.spec.k
    if k is not None and len(G) > k:
        warnings.warn(f"|G| = {len(G)} exceeds k = {k}; the block bound is not guaranteed", stacklevel=2)
    groups: dict[tuple, list[int]] = {}
    for j in range(named.parts):
        key = tuple(bool(g & named.atom(p, j)) for g in G for p in named.perms)
        groups.setdefault(key, []).append(j)
    blocks = sorted(groups.values(), key=lambda b: b[0])
    return EquivPartition(list(G), blocks, 2 ** ((len(G) if k is None else k) * len(named.perms)))


def in_small(S: SplitAlgebra, part: EquivPartition, x: int) -> bool:
    """Membership in B: equivalent parts sit below ``x`` together, for every tau."""
    for p in S.named.perms:
        for block in part.blocks:
            inside = [bool(x & S.named.atom(p, j)) for j in block]
            if any(inside) and not all(inside):
                return False
    return True


@dataclass
class SmallSubalgebra:
    split: SplitAlgebra
    part: EquivPartition
    bao: FiniteBAO
    members: list[int]              # B-atom -> S-mask
    merged: dict[tuple[Permutation, int], int]  # (tau, block) -> B-atom index

    def inclusion(self) -> Homomorphism:
        return Homomorphism(self.bao, self.split.bao, list(self.members), name="inclusion")

    def y(self, b: int, perm: Permutation | None = None) -> int:
        """``s_perm y_b`` as an element of the split algebra."""
        return self.members[self.merged[(perm or Permutation.identity(), b)]]


def small_subalgebra(S: SplitAlgebra, part: EquivPartition) -> SmallSubalgebra:
    """The subalgebra B of elements respecting the parts' equivalence."""
    A = S.bao
    members = [1 << S._pos[a] for a in S.kept]
    names = [A.names[S._pos[a]] for a in S.kept]
    merged = {}
    for p in S.named.perms:
        for b, block in enumerate(part.blocks):
            merged[(p, b)] = len(members)
            members.append(sum(S.named.atom(p, j) for j in block))
            names.append(f"{perm_label(p)}y{b}")
    owner = {}
    for t, mask in enumerate(members):
        for a in bits_of(mask):
            owner[a] = t

    def pull(mask: int) -> int:
        out = 0
        for a in bits_of(mask):
            out |= 1 << owner[a]
        if sum_members(out) != mask:
            raise SplitError("B is not closed: image cuts a merged atom")
        return out

    def sum_members(bmask: int) -> int:
        out = 0
        for t in bits_of(bmask):
            out |= members[t]
        return out

    d = A.dimension
    cyl = [[pull(A.cyl(i, x)) for x in members] for i in range(d)]
    subst = {}
    for s in A.perms:
        row = []
        for x in members:
            img = pull(A.subst(s, x))
            if img & (img - 1):
                raise SplitError("substitution does not map B-atoms to B-atoms")
            row.append(img.bit_length() - 1)
        subst[s] = row
    diag = {ij: pull(mask) for ij, mask in A.diag_action.items()}
    bao = FiniteBAO(d, A.n, names, cyl, subst, diag)
    return SmallSubalgebra(S, part, bao, members, merged)


# -- real partitions ---------------------------------------------------------

@dataclass
class RealPartition:
    space: SeqSpace
    blocks: tuple[tuple[int, ...], ...]
    q: int
    target: SetElement
    pieces: list[SetElement]
    representative: tuple[int, ...]
    labelings: list[dict[int, int]]

    def verify(self) -> VerificationRecord:
        rec = VerificationRecord(f"real_partition(q={self.q})")
        union = self.space.empty()
        w = None
        for a, b in itertools.combinations(range(self.q), 2):
            if not (self.pieces[a] & self.pieces[b]).is_empty():
                w = {"pieces": [a, b], "sequence": list((self.pieces[a] & self.pieces[b]).first())}
                break
        rec.add("partition.disjoint", w, self.q * (self.q - 1) // 2)
        for piece in self.pieces:
            union = union | piece
        w = None if union == self.target else {"sequence": list((self.target - union).first() or ())}
        rec.add("partition.cover", w, 1)
        w, count = None, 0
        for i in range(self.space.dimension):
            whole = self.space.cyl(i, self.target)
            for j, piece in enumerate(self.pieces):
                count += 1
                if self.space.cyl(i, piece) != whole and w is None:
                    w = {"i": i, "j": j, "sequence": list((whole - self.space.cyl(i, piece)).first())}
        rec.add("partition.cyl", w, count)
        return rec

    def transported(self, perm: Permutation) -> list[SetElement]:
        return [self.space.subst(perm, piece) for piece in self.pieces]


def real_partition(space: SeqSpace, blocks: Sequence[Sequence[int]], q: int,
                   labelings: Sequence[dict[int, int]] | None = None) -> RealPartition:
    """Cut ``prod_i blocks[i]`` into ``q`` pieces with full cylindrifications.

    Piece ``j`` holds the sequences whose coordinate labels sum to ``j`` mod ``q``.
    The representative is the least sequence; by default block ``i``'s
    ``t``-th element is labelled ``t - t0 mod q`` where ``t0`` is the
    representative's position, so the representative lies in piece 0.
    """
    blocks = tuple(tuple(sorted(b)) for b in blocks)
    if len(blocks) != space.dimension:
        raise ValueError("need one block per coordinate")
    if q < 1:
        raise ValueError("q must be >= 1")
    small = [i for i, b in enumerate(blocks) if len(b) < q]
    if small:
        raise SplitError(f"block {small[0]} has {len(blocks[small[0]])} < q = {q} elements; no onto labelling")
    rep = tuple(b[0] for b in blocks)
    if labelings is None:
        labelings = [{u: (t - b.index(s)) % q for t, u in enumerate(b)} for b, s in zip(blocks, rep)]
    else:
        labelings = [dict(f) for f in labelings]
        for f, b, s in zip(labelings, blocks, rep):
            if set(f) != set(b) or set(f.values()) != set(range(q)) or f[s] != 0:
                raise SplitError("labelings must be onto Z_q and vanish at the representative")
    target = product_set(space, blocks)
    pos = space._position
    total = np.zeros(space.shape, dtype=np.int64)
    idx = space._indices
    for i, f in enumerate(labelings):
        lut = np.zeros(len(space.universe), dtype=np.int64)
        for u, v in f.items():
            lut[pos[u]] = v
        total += lut[idx[i]]
    total %= q
    pieces = [space.wrap(target.bits & (total == j)) for j in range(q)]
    return RealPartition(space, blocks, q, target, pieces, rep, list(labelings))


# -- embeddings ----------------------------------------------------------------

def embed_small(S: SplitAlgebra, small: SmallSubalgebra, rp: RealPartition) -> Homomorphism:
    """Represent B in the concrete algebra over ``A'``'s own base.

    Base atoms go to themselves; ``s_tau y_b`` goes to ``s_tau R'_b`` where
    ``R'_b`` is piece ``b`` of ``rp`` for ``b < p - 1`` and the union of the
    remaining pieces for ``b = p - 1``.
    """
    A1 = S.origin
    if A1 is None:
        raise SplitError("the base algebra has no concrete origin")
    p, m = small.part.p, S.m
    if rp.q != m:
        raise SplitError(f"real partition has {rp.q} pieces, need m = {m}")
    if p > m:
        raise SplitError(f"{p} blocks cannot be merged into {m} pieces")
    if rp.target != A1.atoms[S.spec.r_atom]:
        raise SplitError("the real partition does not cut R")
    merged = list(rp.pieces[: p - 1])
    tail = rp.space.empty()
    for piece in rp.pieces[p - 1:]:
        tail = tail | piece
    merged.append(tail)
    target = PowersetAlgebra(A1.space, S.n)
    images = [A1.atoms[a] for a in S.kept]
    for perm in S.named.perms:
        for b in range(p):
            images.append(A1.space.subst(perm, merged[b]))
    return Homomorphism(small.bao, target, images, name="embed_small")


def verify_piece_algebra(S: SplitAlgebra, A2: GeneratedAlgebra, rp: RealPartition) -> VerificationRecord:
    """Check that the algebra generated by the pieces has exactly the atoms
    of ``A'`` other than the ``s_sigma R``, plus every ``s_sigma R''_j``."""
    A1 = S.origin
    rec = VerificationRecord("piece_algebra")
    fam = {A1.atoms[a] for a in S.family.values()}
    expected = {a for a in A1.atoms if a not in fam}
    for perm in S.named.perms:
        expected.update(rp.transported(perm))
    got = set(A2.atoms)
    w = None
    if got != expected:
        w = {"unexpected": len(got - expected), "missing": len(expected - got)}
    rec.add("pieces.atoms", w, len(got))
    return rec


def default_chi(m1: int, m2: int) -> list[list[int]]:
    """Balanced contiguous ranges sending the ``m1 + 1`` parts onto the ``m2 + 1`` parts."""
    return [list(map(int, r)) for r in np.array_split(np.arange(m2 + 1), m1 + 1)]


def embed_split(S1: SplitAlgebra, S2: SplitAlgebra, chi: Sequence[Sequence[int]] | None = None) -> Homomorphism:
    """Embed split(m1, n1) into the G_{n1}-reduct of split(m2, n2)."""
    if S1.base is not S2.base or S1.spec.r_atom != S2.spec.r_atom:
        raise SplitError("both splittings must start from the same base algebra and atom")
    if not (S1.m < S2.m and S1.n <= S2.n):
        raise SplitError("need m1 < m2 and n1 <= n2")
    chi = default_chi(S1.m, S2.m) if chi is None else [list(c) for c in chi]
    if len(chi) != S1.named.parts:
        raise SplitError("chi needs one image per part")
    flat = [i for c in chi for i in c]
    if any(not c for c in chi) or len(flat) != len(set(flat)) or set(flat) != set(range(S2.named.parts)):
        raise SplitError("chi images must be nonempty, disjoint and cover the parts")
    images = [S2.embed_old(1 << a) for a in S1.kept]
    for perm, j in S1.named.items():
        images.append(sum(S2.named.atom(perm, i) for i in chi[j]))
    return Homomorphism(S1.bao, S2.bao, images, perms=symmetric_group(S1.n), name="embed_split")
