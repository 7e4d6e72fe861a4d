"""Concrete quasipolyadic equality set algebras of finite dimension.

Elements are subsets of ``^dU`` stored as boolean arrays of shape ``(|U|,)*d``
indexed by the position of each coordinate's value in the sorted universe.
The enumeration of points is numpy C-order, i.e. lexicographic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .perm import Permutation, symmetric_group

DEFAULT_CAP = 100_000


class DimensionError(ValueError):
    """An index or permutation refers to coordinates outside the dimension."""


class ClosureCapExceeded(RuntimeError):
    def __init__(self, reached: int, cap: int):
        super().__init__(f"closure reached {reached} atoms, cap is {cap}")
        self.reached = reached
        self.cap = cap


class NotInAlgebra(ValueError):
    pass


@dataclass(frozen=True)
class BaseSpec:
    """A base set ``U`` split into ``d`` pairwise disjoint nonempty blocks."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(u) for u in b)) for b in self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        seen: set[int] = set()
        for b in blocks:
            if not b:
                raise ValueError("blocks must be nonempty")
            if seen.intersection(b):
                raise ValueError("blocks must be pairwise disjoint")
            seen.update(b)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> BaseSpec:
        blocks, start = [], 0
        for size in sizes:
            blocks.append(tuple(range(start, start + size)))
            start += size
        return cls(tuple(blocks))

    @property
    def dimension(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def universe(self) -> tuple[int, ...]:
        return tuple(sorted(u for b in self.blocks for u in b))

    def block_of(self, u: int) -> int:
        for i, b in enumerate(self.blocks):
            if u in b:
                return i
        raise KeyError(u)

    def space(self) -> SeqSpace:
        return SeqSpace(self.dimension, self.universe)


@dataclass(frozen=True)
class SeqSpace:
    """All length-``d`` sequences over a finite universe."""

    dimension: int
    universe: tuple[int, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        uni = tuple(sorted(set(int(u) for u in self.universe)))
        if not uni:
            raise ValueError("empty universe")
        object.__setattr__(self, "universe", uni)

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.universe),) * self.dimension

    @property
    def size(self) -> int:
        return len(self.universe) ** self.dimension

    @cached_property
    def _position(self) -> dict[int, int]:
        return {u: k for k, u in enumerate(self.universe)}

    @cached_property
    def _indices(self) -> np.ndarray:
        return np.indices(self.shape)

    def index(self, seq: Sequence[int]) -> int:
        pos = tuple(self._position[u] for u in seq)
        if len(pos) != self.dimension:
            raise DimensionError(f"sequence of length {len(pos)} in dimension {self.dimension}")
        return int(np.ravel_multi_index(pos, self.shape))

    def point(self, index: int) -> tuple[int, ...]:
        pos = np.unravel_index(index, self.shape)
        return tuple(self.universe[int(p)] for p in pos)

    def points(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(self.universe, repeat=self.dimension)

    # -- elements -------------------------------------------------------

    def wrap(self, bits: np.ndarray) -> SetElement:
        return SetElement(self, bits)

    def empty(self) -> SetElement:
        return self.wrap(np.zeros(self.shape, dtype=bool))

    def full(self) -> SetElement:
        return self.wrap(np.ones(self.shape, dtype=bool))

    def element(self, seqs: Iterable[Sequence[int]]) -> SetElement:
        bits = np.zeros(self.size, dtype=bool)
        for s in seqs:
            bits[self.index(s)] = True
        return self.wrap(bits.reshape(self.shape))

    def where(self, predicate) -> SetElement:
        """The set of sequences satisfying ``predicate(seq)``; brute force."""
        return self.element(s for s in self.points() if predicate(s))

    # -- operations -----------------------------------------------------

    def _check_index(self, *indices: int):
        for i in indices:
            if not 0 <= i < self.dimension:
                raise DimensionError(f"index {i} outside dimension {self.dimension}")

    def cyl(self, i: int, x: SetElement) -> SetElement:
        self._check_index(i)
        hit = x.bits.any(axis=i, keepdims=True)
        return self.wrap(np.broadcast_to(hit, self.shape).copy())

    def diag(self, i: int, j: int) -> SetElement:
        self._check_index(i, j)
        idx = self._indices
        return self.wrap(idx[i] == idx[j])

    def subst(self, perm: Permutation, x: SetElement) -> SetElement:
        """``{s : s o perm in x}``."""
        axes = perm.inverse().on(self.dimension) if perm.size <= self.dimension else None
        if axes is None:
            raise DimensionError(f"{perm} exceeds dimension {self.dimension}")
        return self.wrap(np.ascontiguousarray(np.transpose(x.bits, axes)))

    def replace(self, i: int, j: int, x: SetElement) -> SetElement:
        """``{s : s o [i|j] in x}``: coordinate ``i`` overwritten by coordinate ``j``."""
        self._check_index(i, j)
        idx = list(self._indices)
        idx[i] = idx[j]
        return self.wrap(x.bits[tuple(idx)])


@dataclass(frozen=True, eq=False)
class SetElement:
    space: SeqSpace
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.bits.shape != self.space.shape or self.bits.dtype != bool:
            raise ValueError("bit array does not match the space")
        self.bits.flags.writeable = False

    @cached_property
    def _key(self) -> bytes:
        return np.packbits(self.bits, axis=None).tobytes()

    def __eq__(self, other):
        if not isinstance(other, SetElement):
            return NotImplemented
        return self.space == other.space and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def _same(self, other: SetElement):
        if self.space != other.space:
            raise ValueError("elements live in different spaces")

    def __or__(self, other: SetElement) -> SetElement:
        self._same(other)
        return SetElement(self.space, self.bits | other.bits)

    def __and__(self, other: SetElement) -> SetElement:
        self._same(other)
        return SetElement(self.space, self.bits & other.bits)

    def __sub__(self, other: SetElement) -> SetElement:
        self._same(other)
        return SetElement(self.space, self.bits & ~other.bits)

    def __invert__(self) -> SetElement:
        return SetElement(self.space, ~self.bits)

    def __le__(self, other: SetElement) -> bool:
        self._same(other)
        return not (self.bits & ~other.bits).any()

    def __lt__(self, other: SetElement) -> bool:
        return self <= other and self != other

    def __len__(self) -> int:
        return int(self.bits.sum())

    def __contains__(self, seq) -> bool:
        return bool(self.bits.flat[self.space.index(seq)])

    def is_empty(self) -> bool:
        return not self.bits.any()

    def indices(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.bits)]

    def sequences(self) -> list[tuple[int, ...]]:
        """Members as sorted sequences (the textual export form)."""
        return [self.space.point(k) for k in self.indices()]

    def first(self) -> tuple[int, ...] | None:
        flat = np.flatnonzero(self.bits)
        return self.space.point(int(flat[0])) if flat.size else None

    def __repr__(self):
        return f"SetElement(|{len(self)}| of {self.space.size})"


def product_R(base: BaseSpec, space: SeqSpace | None = None) -> SetElement:
    """The sequences with coordinate ``i`` in block ``i``, for every ``i``."""
    space = space or base.space()
    if space.dimension != base.dimension:
        raise DimensionError("space and base disagree on dimension")
    return product_set(space, base.blocks)


def product_set(space: SeqSpace, blocks: Sequence[Iterable[int]]) -> SetElement:
    """``prod_i blocks[i]`` as an element of ``space``."""
    bits = np.ones(space.shape, dtype=bool)
    idx = space._indices
    for i, block in enumerate(blocks):
        pos = [space._position[u] for u in block]
        bits &= np.isin(idx[i], pos)
    return space.wrap(bits)


class ConcreteAlgebra:
    """Set-algebra operations on ``^dU`` with substitutions from G_n.

    With no restriction this is the full powerset algebra; subclasses may
    narrow the universe to a subalgebra.
    """

    def __init__(self, space: SeqSpace, n: int):
        if n > space.dimension:
            raise DimensionError(f"substitution bound {n} exceeds dimension {space.dimension}")
        self.space = space
        self.n = n

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def perms(self) -> tuple[Permutation, ...]:
        return symmetric_group(self.n)

    def zero(self) -> SetElement:
        return self.space.empty()

    def one(self) -> SetElement:
        return self.space.full()

    def join(self, x, y):
        return x | y

    def meet(self, x, y):
        return x & y

    def complement(self, x):
        return ~x

    def cyl(self, i: int, x: SetElement) -> SetElement:
        return self.space.cyl(i, x)

    def diag(self, i: int, j: int) -> SetElement:
        return self.space.diag(i, j)

    def subst(self, perm: Permutation, x: SetElement) -> SetElement:
        if not perm.fixes_from(self.n):
            raise DimensionError(f"{perm} is not in G_{self.n}")
        return self.space.subst(perm, x)

    def replace(self, i: int, j: int, x: SetElement) -> SetElement:
        return self.space.replace(i, j, x)

    def is_zero(self, x: SetElement) -> bool:
        return x.is_empty()

    def random_element(self, rng: np.random.Generator) -> SetElement:
        return self.space.wrap(rng.random(self.space.shape) < 0.5)

    def count(self) -> int:
        return 2 ** self.space.size

    def elements(self) -> Iterator[SetElement]:
        for mask in range(self.count()):
            bits = np.array([(mask >> k) & 1 for k in range(self.space.size)], dtype=bool)
            yield self.space.wrap(bits.reshape(self.space.shape))

    def describe(self, x: SetElement) -> list[list[int]]:
        return [list(s) for s in x.sequences()]

    def diff_witness(self, lhs: SetElement, rhs: SetElement) -> dict:
        only_l = (lhs - rhs).first()
        only_r = (rhs - lhs).first()
        if only_l is not None:
            return {"sequence": list(only_l), "in": "lhs"}
        return {"sequence": list(only_r), "in": "rhs"}


class PowersetAlgebra(ConcreteAlgebra):
    """The full set algebra ``B(^dU)`` with all of its operations."""


class GeneratedAlgebra(ConcreteAlgebra):
    """A finite subalgebra of ``B(^dU)`` given by its atoms.

    ``labels[p]`` is the index of the atom containing point ``p``; atoms are
    ordered by their lexicographically least point.  The universe is the set
    of all unions of atoms.
    """

    def __init__(self, space: SeqSpace, n: int, labels: np.ndarray, generators=()):
        super().__init__(space, n)
        self.labels = labels
        self.labels.flags.writeable = False
        self.generators = tuple(generators)
        self.num_atoms = int(labels.max()) + 1
        self.atoms = [space.wrap(labels == a) for a in range(self.num_atoms)]

    def count(self) -> int:
        return 2 ** self.num_atoms

    def element(self, mask: int) -> SetElement:
        chosen = np.array([(mask >> a) & 1 for a in range(self.num_atoms)], dtype=bool)
        return self.space.wrap(chosen[self.labels])

    def mask(self, x: SetElement) -> int:
        """The atoms below ``x``, as a bitmask; raises if ``x`` is not in the algebra."""
        inside = np.bincount(self.labels.ravel(), weights=x.bits.ravel(), minlength=self.num_atoms)
        sizes = np.bincount(self.labels.ravel(), minlength=self.num_atoms)
        if np.any((inside > 0) & (inside < sizes)):
            raise NotInAlgebra("element cuts through an atom")
        return sum(1 << int(a) for a in np.flatnonzero(inside))

    def contains(self, x: SetElement) -> bool:
        try:
            self.mask(x)
        except NotInAlgebra:
            return False
        return True

    def atom_index(self, x: SetElement) -> int:
        mask = self.mask(x)
        if mask == 0 or mask & (mask - 1):
            raise NotInAlgebra("not an atom")
        return mask.bit_length() - 1

    def is_atom(self, x: SetElement) -> bool:
        mask = self.mask(x)
        return mask != 0 and mask & (mask - 1) == 0

    def elements(self) -> Iterator[SetElement]:
        for mask in range(self.count()):
            yield self.element(mask)

    def random_element(self, rng: np.random.Generator) -> SetElement:
        return self.element(int.from_bytes(rng.bytes((self.num_atoms + 7) // 8), "little") % self.count())


def _relabel(key_columns: list[np.ndarray], shape) -> np.ndarray:
    """Number the distinct rows of the stacked columns by first occurrence."""
    ids = np.zeros(int(np.prod(shape)), dtype=np.int64)
    for col in key_columns:
        _, col_ids = np.unique(col.ravel(), return_inverse=True)
        # both factors are < number of points, so the key fits in int64
        _, ids = np.unique(ids * (int(col_ids.max()) + 1) + col_ids.ravel(), return_inverse=True)
    _, first, inverse = np.unique(ids, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse.ravel()].reshape(shape)


def _fiber_ids(labels: np.ndarray, axis: int) -> np.ndarray:
    """Per point, an id for the *set* of labels on its ``axis``-fiber."""
    moved = np.moveaxis(labels, axis, -1)
    rows = np.sort(moved.reshape(-1, moved.shape[-1]), axis=1)
    dup = np.zeros_like(rows, dtype=bool)
    dup[:, 1:] = rows[:, 1:] == rows[:, :-1]
    rows = np.sort(np.where(dup, -1, rows), axis=1)
    _, inverse = np.unique(rows, axis=0, return_inverse=True)
    ids = inverse.ravel().reshape(moved.shape[:-1])[..., None]
    return np.moveaxis(np.broadcast_to(ids, moved.shape), -1, axis)


def generate(space: SeqSpace, n: int, generators: Sequence[SetElement] = (), cap: int = DEFAULT_CAP) -> GeneratedAlgebra:
    """The subalgebra of ``B(^dU)`` generated by ``generators``.

    Computed as the coarsest partition of the points that separates the
    generators and diagonals and is stable under every c_i and s_tau; its
    blocks are the atoms.  ``cap`` bounds the number of atoms.
    """
    if n > space.dimension:
        raise DimensionError(f"substitution bound {n} exceeds dimension {space.dimension}")
    d = space.dimension
    columns = [np.zeros(space.shape, dtype=np.int64)]
    columns += [g.bits.astype(np.int64) for g in generators]
    columns += [space.diag(i, j).bits.astype(np.int64) for i in range(d) for j in range(i + 1, d)]
    labels = _relabel(columns, space.shape)
    perms = [p for p in symmetric_group(n) if not p.is_identity()]
    count = int(labels.max()) + 1
    while True:
        if count > cap:
            raise ClosureCapExceeded(count, cap)
        cols = [labels]
        cols += [_fiber_ids(labels, i) for i in range(d)]
        cols += [np.transpose(labels, p.inverse().on(d)) for p in perms]
        new = _relabel(cols, space.shape)
        new_count = int(new.max()) + 1
        labels = new
        if new_count == count:
            break
        count = new_count
    if count > cap:
        raise ClosureCapExceeded(count, cap)
    return GeneratedAlgebra(space, n, np.ascontiguousarray(labels), generators)


def block_preserving_permutations(base: BaseSpec) -> Iterator[dict[int, int]]:
    """Every permutation of ``U`` mapping each block onto itself."""
    for parts in itertools.product(*(itertools.permutations(b) for b in base.blocks)):
        sigma = {}
        for block, image in zip(base.blocks, parts):
            sigma.update(zip(block, image))
        yield sigma


def induced_point_map(space: SeqSpace, sigma: dict[int, int], x: SetElement) -> SetElement:
    """``{sigma o s : s in x}`` for a permutation ``sigma`` of the universe."""
    pos = np.array([space._position[sigma[u]] for u in space.universe])
    inv = np.argsort(pos)
    return space.wrap(x.bits[np.ix_(*([inv] * space.dimension))])


def operator_law_violations(alg: ConcreteAlgebra, xs: Sequence[SetElement]) -> list[tuple[str, dict]]:
    """Check the c_i / s_tau / d_ij laws on the given elements.

    Returns a list of ``(law, witness)`` failures; empty when all hold.
    """
    d = alg.dimension
    perms = alg.perms
    fails: list[tuple[str, dict]] = []
    zero = alg.zero()
    for i in range(d):
        if alg.cyl(i, zero) != zero:
            fails.append(("cyl.normal", {"i": i}))
    for p in perms:
        for i in range(d):
            for j in range(d):
                image = alg.subst(p, alg.diag(i, j))
                q = p.on(d)
                if image != alg.diag(q[i], q[j]):
                    fails.append(("subst.diag", {"perm": list(p.mapping), "i": i, "j": j}))
    for t, x in enumerate(xs):
        cx = [alg.cyl(i, x) for i in range(d)]
        for i in range(d):
            if not x <= cx[i]:
                fails.append(("cyl.increasing", {"i": i, "element": t}))
            if alg.cyl(i, cx[i]) != cx[i]:
                fails.append(("cyl.idempotent", {"i": i, "element": t}))
            for j in range(i + 1, d):
                if alg.cyl(i, cx[j]) != alg.cyl(j, cx[i]):
                    fails.append(("cyl.commute", {"i": i, "j": j, "element": t}))
        sx = {p: alg.subst(p, x) for p in perms}
        for p in perms:
            if len(sx[p]) != len(x):
                fails.append(("subst.size", {"perm": list(p.mapping), "element": t}))
            if alg.subst(p, alg.complement(x)) != alg.complement(sx[p]):
                fails.append(("subst.complement", {"perm": list(p.mapping), "element": t}))
            for q in perms:
                if alg.subst(p, sx[q]) != sx[p @ q]:
                    fails.append(("subst.compose", {"perm": list(p.mapping), "after": list(q.mapping), "element": t}))
    for t, (x, y) in enumerate(zip(xs, xs[1:])):
        for i in range(d):
            if alg.cyl(i, x | y) != alg.cyl(i, x) | alg.cyl(i, y):
                fails.append(("cyl.additive", {"i": i, "pair": t}))
        for p in perms:
            if alg.subst(p, x & y) != alg.subst(p, x) & alg.subst(p, y):
                fails.append(("subst.meet", {"perm": list(p.mapping), "pair": t}))
            if alg.subst(p, x | y) != alg.subst(p, x) | alg.subst(p, y):
                fails.append(("subst.join", {"perm": list(p.mapping), "pair": t}))
    return fails

