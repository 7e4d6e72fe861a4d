"""A representation of the split algebra that keeps everything but the diagonals.

Enlarge the base by a few fresh points that collapse onto block 0 under a
retraction ``t``.  Pulling sets back along ``s -> t o s`` preserves the
Boolean operations, cylindrifications, substitutions and replacements, and
the pullback of ``R`` is big enough to carry a real partition into ``m + 1``
pieces, one per split part.  Equality is not preserved: two distinct fresh
points look equal after the retraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bao import SIGNATURE, Homomorphism, VerificationRecord, verify_hom
from .setalg import BaseSpec, PowersetAlgebra, SeqSpace, SetElement, product_set
from .splitting import RealPartition, SplitAlgebra, SplitError, real_partition


@dataclass(frozen=True)
class EnlargedBase:
    """``W = U + fresh points``, with the fresh points joining block 0.

    ``t`` sends each fresh point to the least element of block 0 and fixes ``U``.
    """

    original: BaseSpec
    extra: int = 1
    fresh: tuple[int, ...] = field(init=False)
    t: dict[int, int] = field(init=False, compare=False)

    def __post_init__(self):
        if self.extra < 0:
            raise ValueError("extra must be >= 0")
        start = max(self.original.universe) + 1
        fresh = tuple(range(start, start + self.extra))
        t = {u: u for u in self.original.universe}
        t.update({w: self.original.blocks[0][0] for w in fresh})
        object.__setattr__(self, "fresh", fresh)
        object.__setattr__(self, "t", t)

    @property
    def dimension(self) -> int:
        return self.original.dimension

    @property
    def W(self) -> tuple[int, ...]:
        return self.original.universe + self.fresh

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """``W_0 = U_0 + fresh`` and ``W_i = U_i`` otherwise."""
        first, *rest = self.original.blocks
        return (tuple(first) + self.fresh, *rest)

    @property
    def enlarged(self) -> bool:
        return self.extra > 0

    def space(self) -> SeqSpace:
        return SeqSpace(self.dimension, self.W)

    def g(self, s) -> tuple[int, ...]:
        return tuple(self.t[w] for w in s)

    def check(self) -> None:
        if set(self.t[w] for w in self.blocks[0]) != set(self.original.blocks[0]):
            raise AssertionError("t must map W_0 onto U_0")
        if any(self.t[u] != u for u in self.original.universe):
            raise AssertionError("t must fix U")


def lift(x: SetElement, eb: EnlargedBase) -> SetElement:
    """``{s in ^dW : t o s in x}``."""
    src = x.space
    if src.universe != eb.original.universe or src.dimension != eb.dimension:
        raise ValueError("element does not live over the original base")
    target = eb.space()
    pos = src._position
    index_map = np.array([pos[eb.t[w]] for w in target.universe], dtype=np.intp)
    return target.wrap(x.bits[np.ix_(*[index_map] * eb.dimension)])


@dataclass
class NondiagRepresentation:
    h: Homomorphism
    enlarged: EnlargedBase
    partition: RealPartition

    def verify(self) -> VerificationRecord:
        return verify_hom(self.h)

    def summary(self) -> dict:
        """Which operation families survive, and a witness for each that does not."""
        rec = self.verify()
        preserved, failed = [], {}
        for r in rec.results:
            if r.passed:
                preserved.append(r.law)
            else:
                failed[r.law] = r.witness
        families_failed = sorted({law.split("[")[0].split(".")[0] for law in failed})
        return {"preserved": preserved, "failed": failed, "families_failed": families_failed}


def nondiag_representation(S: SplitAlgebra, eb: EnlargedBase) -> NondiagRepresentation:
    """Atoms of the base go to their lifts; the part ``(sigma, j)`` goes to
    ``s_sigma`` of piece ``j`` of a real partition of ``prod W_i``."""
    A1 = S.origin
    if A1 is None:
        raise SplitError("the base algebra has no concrete origin")
    if A1.space != eb.original.space():
        raise SplitError("the enlarged base does not extend the split algebra's base")
    q = S.m + 1
    small = [i for i, b in enumerate(eb.blocks) if len(b) < q]
    if small:
        raise SplitError(f"W_{small[0]} has fewer than m + 1 = {q} points")
    eb.check()
    space = eb.space()
    R = A1.atoms[S.spec.r_atom]
    rp = real_partition(space, eb.blocks, q)
    if lift(R, eb) != product_set(space, eb.blocks):
        raise SplitError("R is not the product of the blocks, so its lift is not prod W_i")
    images = [lift(A1.atoms[a], eb) for a in S.kept]
    for perm, j in S.named.items():
        images.append(space.subst(perm, rp.pieces[j]))
    target = PowersetAlgebra(space, S.n)
    h = Homomorphism(S.bao, target, images, frozenset(SIGNATURE), name="nondiag")
    return NondiagRepresentation(h, eb, rp)
