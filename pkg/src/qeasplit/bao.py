"""Finite atomic Boolean algebras with operators, and homomorphisms between them.

An element of a :class:`FiniteBAO` is a set of atoms encoded as an ``int``
bitmask.  Operators are given by their action on atoms and extended by joins.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np

from .perm import Permutation, symmetric_group
from .setalg import DimensionError, GeneratedAlgebra, _fiber_ids


def bits_of(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class LawResult:
    law: str
    passed: bool
    checked: int = 0
    witness: dict | None = None

    def to_json(self) -> dict:
        out = {"law": self.law, "status": "pass" if self.passed else "fail", "checked": self.checked}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class VerificationRecord:
    subject: str
    results: list[LawResult] = field(default_factory=list)
    method: str = "exhaustive"

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def get(self, law: str) -> LawResult:
        for r in self.results:
            if r.law == law:
                return r
        raise KeyError(law)

    def failures(self) -> list[LawResult]:
        return [r for r in self.results if not r.passed]

    def add(self, law: str, witness: dict | None, checked: int) -> None:
        self.results.append(LawResult(law, witness is None, checked, witness))

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "method": self.method,
            "passed": self.passed,
            "laws": [r.to_json() for r in self.results],
        }


class FiniteBAO:
    """A finite atomic BAO in the quasipolyadic equality signature.

    ``cyl[i][a]``      mask of atoms below ``c_i a``
    ``subst[p][a]``    the atom ``s_p a`` (substitutions permute atoms)
    ``diag[(i, j)]``   mask of atoms below ``d_ij``
    """

    def __init__(self, dimension: int, n: int, names: Sequence[str],
                 cyl: Sequence[Sequence[int]], subst: dict[Permutation, Sequence[int]],
                 diag: dict[tuple[int, int], int]):
        self.dimension = dimension
        self.n = n
        self.names = tuple(names)
        self.num_atoms = len(self.names)
        self.top = (1 << self.num_atoms) - 1
        self.cyl_action = tuple(tuple(row) for row in cyl)
        self.subst_action = {p: tuple(row) for p, row in subst.items()}
        self.diag_action = dict(diag)
        self.origin: GeneratedAlgebra | None = None
        if len(self.cyl_action) != dimension:
            raise ValueError("need one cylindrification table per coordinate")

    def __repr__(self):
        return f"FiniteBAO(d={self.dimension}, n={self.n}, atoms={self.num_atoms})"

    @property
    def perms(self) -> tuple[Permutation, ...]:
        return symmetric_group(self.n)

    def atom(self, name: str) -> int:
        return 1 << self.names.index(name)

    # -- algebra handle -------------------------------------------------

    def zero(self) -> int:
        return 0

    def one(self) -> int:
        return self.top

    def join(self, x: int, y: int) -> int:
        return x | y

    def meet(self, x: int, y: int) -> int:
        return x & y

    def complement(self, x: int) -> int:
        return self.top & ~x

    def cyl(self, i: int, x: int) -> int:
        if not 0 <= i < self.dimension:
            raise DimensionError(f"c_{i} outside dimension {self.dimension}")
        table = self.cyl_action[i]
        out = 0
        for a in bits_of(x):
            out |= table[a]
        return out

    def diag(self, i: int, j: int) -> int:
        if not (0 <= i < self.dimension and 0 <= j < self.dimension):
            raise DimensionError(f"d_{i}{j} outside dimension {self.dimension}")
        return self.diag_action[(i, j)]

    def subst(self, perm: Permutation, x: int) -> int:
        try:
            table = self.subst_action[perm]
        except KeyError:
            raise DimensionError(f"{perm} is not in G_{self.n}") from None
        out = 0
        for a in bits_of(x):
            out |= 1 << table[a]
        return out

    def replace(self, i: int, j: int, x: int) -> int:
        """The derived replacement ``c_i(d_ij . x)``."""
        if i == j:
            return x
        return self.cyl(i, self.diag(i, j) & x)

    def is_zero(self, x: int) -> bool:
        return x == 0

    def count(self) -> int:
        return 1 << self.num_atoms

    def elements(self) -> Iterator[int]:
        return iter(range(self.count()))

    def atoms(self) -> list[int]:
        return [1 << a for a in range(self.num_atoms)]

    def random_element(self, rng: np.random.Generator) -> int:
        raw = int.from_bytes(rng.bytes((self.num_atoms + 7) // 8), "little")
        return raw & self.top

    def describe(self, x: int) -> list[str]:
        return [self.names[a] for a in bits_of(x)]

    def diff_witness(self, lhs: int, rhs: int) -> dict:
        return {"only_lhs": self.describe(lhs & ~rhs), "only_rhs": self.describe(rhs & ~lhs)}

    def relabel(self, order: Sequence[int]) -> FiniteBAO:
        """An isomorphic copy whose atom ``k`` is this algebra's atom ``order[k]``."""
        pos = {old: new for new, old in enumerate(order)}

        def move(mask):
            return sum(1 << pos[a] for a in bits_of(mask))

        return FiniteBAO(
            self.dimension, self.n, [self.names[a] for a in order],
            [[move(self.cyl_action[i][a]) for a in order] for i in range(self.dimension)],
            {p: [pos[row[a]] for a in order] for p, row in self.subst_action.items()},
            {ij: move(m) for ij, m in self.diag_action.items()},
        )

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "n": self.n,
            "atoms": list(self.names),
            "cyl": [[list(bits_of(m)) for m in row] for row in self.cyl_action],
            "subst": [{"perm": list(p.mapping), "image": list(row)} for p, row in sorted(self.subst_action.items())],
            "diag": [{"i": i, "j": j, "atoms": list(bits_of(m))} for (i, j), m in sorted(self.diag_action.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> FiniteBAO:
        def mask(atoms):
            return sum(1 << a for a in atoms)

        return cls(
            data["dimension"], data["n"], data["atoms"],
            [[mask(a) for a in row] for row in data["cyl"]],
            {Permutation(tuple(e["perm"])): e["image"] for e in data["subst"]},
            {(e["i"], e["j"]): mask(e["atoms"]) for e in data["diag"]},
        )


def from_concrete(A: GeneratedAlgebra) -> FiniteBAO:
    """The atom structure of a generated set algebra as a :class:`FiniteBAO`."""
    d, labels, k = A.dimension, A.labels, A.num_atoms
    flat = labels.ravel()
    cyl = []
    for i in range(d):
        fid = _fiber_ids(labels, i).ravel()
        pairs = np.unique(np.stack([fid, flat], axis=1), axis=0)
        fiber_mask: dict[int, int] = {}
        for f, a in pairs:
            fiber_mask[int(f)] = fiber_mask.get(int(f), 0) | (1 << int(a))
        row = [0] * k
        for f, a in pairs:
            row[int(a)] |= fiber_mask[int(f)]
        cyl.append(row)
    subst = {}
    for p in A.perms:
        moved = np.transpose(labels, p.inverse().on(d)).ravel()
        # point q lies in s_p(atom moved[q]) and in atom flat[q]
        pairs = np.unique(np.stack([moved, flat], axis=1), axis=0)
        row = [-1] * k
        for src, dst in pairs:
            if row[int(src)] != -1:
                raise ValueError("substitution image is not an atom; input is not closed")
            row[int(src)] = int(dst)
        subst[p] = row
    diag = {}
    for i in range(d):
        for j in range(d):
            inside = np.unique(flat[A.space.diag(i, j).bits.ravel()])
            diag[(i, j)] = sum(1 << int(a) for a in inside)
            if A.mask(A.space.diag(i, j)) != diag[(i, j)]:
                raise ValueError("diagonal not in the algebra")
    names = [f"a{a}" for a in range(k)]
    bao = FiniteBAO(d, A.n, names, cyl, subst, diag)
    bao.origin = A
    return bao


def verify_bao(B: FiniteBAO) -> VerificationRecord:
    """Check the defining laws of a finite BAO atom by atom."""
    rec = VerificationRecord(f"bao({B.num_atoms} atoms)")
    atoms = range(B.num_atoms)
    d = B.dimension

    w = None
    for i in range(d):
        if B.cyl(i, 0) != 0:
            w = {"i": i}
            break
    rec.add("cyl.normal", w, d)

    w = None
    for i in range(d):
        bad = [a for a in atoms if not (B.cyl_action[i][a] >> a) & 1]
        if bad:
            w = {"i": i, "atom": B.names[bad[0]]}
            break
    rec.add("cyl.increasing", w, d * B.num_atoms)

    w = None
    for i in range(d):
        for a, b in itertools.combinations(atoms, 2):
            x, y = 1 << a, 1 << b
            if B.cyl(i, x | y) != B.cyl(i, x) | B.cyl(i, y):
                w = {"i": i, "atoms": [B.names[a], B.names[b]]}
                break
        if w:
            break
    rec.add("cyl.additive", w, d * B.num_atoms * (B.num_atoms - 1) // 2)

    w = None
    for p in B.perms:
        row = B.subst_action.get(p)
        if row is None or sorted(row) != list(atoms):
            w = {"perm": list(p.mapping), "reason": "missing" if row is None else "not a bijection"}
            break
    rec.add("subst.bijection", w, len(B.perms))

    ident = B.subst_action.get(Permutation.identity())
    w = None
    if ident is None:
        w = {"reason": "identity missing"}
    else:
        bad = [a for a in atoms if ident[a] != a]
        if bad:
            w = {"atom": B.names[bad[0]]}
    rec.add("subst.identity", w, B.num_atoms)

    w = None
    if rec.get("subst.bijection").passed:
        for p, q in itertools.product(B.perms, repeat=2):
            pq, rp, rq = B.subst_action[p @ q], B.subst_action[p], B.subst_action[q]
            bad = [a for a in atoms if pq[a] != rp[rq[a]]]
            if bad:
                w = {"perm": list(p.mapping), "after": list(q.mapping), "atom": B.names[bad[0]]}
                break
    else:
        w = {"reason": "substitution tables are not bijections"}
    rec.add("subst.compose", w, len(B.perms) ** 2 * B.num_atoms)

    w = None
    for i in range(d):
        if B.diag(i, i) != B.top:
            w = {"i": i}
            break
    rec.add("diag.reflexive", w, d)

    w = None
    for i, j in itertools.product(range(d), repeat=2):
        if B.diag(i, j) != B.diag(j, i):
            w = {"i": i, "j": j}
            break
    rec.add("diag.symmetric", w, d * d)
    return rec


BOOLEAN = "boolean"
SIGNATURE = ("boolean", "cyl", "diag", "subst", "replace")


@dataclass
class Homomorphism:
    """An additive map from a :class:`FiniteBAO` into some algebra.

    ``images[a]`` is the image of atom ``a``; elements map to the join of the
    images of their atoms.  ``ops`` lists the operation families the map is
    claimed to preserve; ``perms`` restricts which substitutions are checked
    (``None`` means all of the source's G_n).
    """

    source: FiniteBAO
    target: Any
    images: list
    ops: frozenset = frozenset(SIGNATURE)
    perms: tuple[Permutation, ...] | None = None
    injective: bool = True
    name: str = "h"

    def __post_init__(self):
        self.ops = frozenset(self.ops)
        unknown = self.ops - set(SIGNATURE)
        if unknown:
            raise ValueError(f"unknown operation families {sorted(unknown)}")
        if len(self.images) != self.source.num_atoms:
            raise ValueError("need one image per source atom")

    def __call__(self, x: int):
        out = self.target.zero()
        for a in bits_of(x):
            out = self.target.join(out, self.images[a])
        return out

    @property
    def checked_perms(self) -> tuple[Permutation, ...]:
        return self.source.perms if self.perms is None else tuple(self.perms)

    def then(self, other: Homomorphism, name: str | None = None) -> Homomorphism:
        """``other o self``; preserves what both preserve."""
        if other.source is not self.target:
            raise ValueError("composition needs matching target/source")
        perms = set(self.checked_perms) & set(other.checked_perms)
        return Homomorphism(
            self.source, other.target, [other(x) for x in self.images],
            self.ops & other.ops, tuple(sorted(perms)), self.injective and other.injective,
            name or f"{other.name}.{self.name}",
        )


@dataclass(frozen=True)
class Sampled:
    count: int
    seed: int = 0


def verify_hom(h: Homomorphism, mode: str | Sampled = "exhaustive", cap: int = 1 << 16) -> VerificationRecord:
    """Check that ``h`` preserves each declared operation.

    ``"exhaustive"`` checks atoms (and pairs of atoms for the binary laws).
    Since ``h`` is the join-extension of its atom map and every non-Boolean
    operator is additive and normal, this decides preservation on every
    element of the source.  ``"enumerate"`` literally runs through all source
    elements (at most ``cap`` of them); ``Sampled`` checks random elements.
    """
    S, T = h.source, h.target
    d = S.dimension
    if isinstance(mode, Sampled):
        rng = np.random.default_rng(mode.seed)
        xs = [S.random_element(rng) for _ in range(mode.count)]
        pairs = list(zip(xs, xs[1:] + xs[:1]))
        method = f"sampled(count={mode.count}, seed={mode.seed})"
    elif mode == "enumerate":
        if S.count() > cap:
            raise OverflowError(f"source has {S.count()} elements, cap is {cap}")
        xs = list(S.elements())
        pairs = list(itertools.product(xs, repeat=2))
        method = "enumerate"
    elif mode == "exhaustive":
        xs = S.atoms()
        pairs = list(itertools.combinations(xs, 2))
        method = "exhaustive (atoms; complete by additivity)"
    else:
        raise ValueError(f"unknown mode {mode!r}")

    rec = VerificationRecord(h.name, method=method)

    def first_mismatch(cases):
        count = 0
        for label, lhs, rhs in cases:
            count += 1
            if lhs != rhs:
                return {**label, **T.diff_witness(lhs, rhs)}, count
        return None, count

    def record(law, cases):
        w, count = first_mismatch(cases)
        rec.add(law, w, count)

    if BOOLEAN in h.ops:
        record("boolean.one", [({}, h(S.top), T.one())])
        record("boolean.join", (({"x": S.describe(x), "y": S.describe(y)}, h(x | y), T.join(h(x), h(y))) for x, y in pairs))
        record("boolean.meet", (({"x": S.describe(x), "y": S.describe(y)}, h(x & y), T.meet(h(x), h(y))) for x, y in pairs))
        record("boolean.complement", (({"x": S.describe(x)}, h(S.complement(x)), T.complement(h(x))) for x in xs))
    if "cyl" in h.ops:
        for i in range(d):
            record(f"cyl[{i}]", (({"x": S.describe(x)}, h(S.cyl(i, x)), T.cyl(i, h(x))) for x in xs))
    if "diag" in h.ops:
        for i in range(d):
            for j in range(i + 1, d):
                record(f"diag[{i},{j}]", [({}, h(S.diag(i, j)), T.diag(i, j))])
    if "subst" in h.ops:
        for p in h.checked_perms:
            if p.is_identity():
                continue
            record(f"subst[{','.join(map(str, p.mapping))}]",
                   (({"x": S.describe(x)}, h(S.subst(p, x)), T.subst(p, h(x))) for x in xs))
    if "replace" in h.ops:
        for i in range(d):
            for j in range(d):
                if i != j:
                    record(f"replace[{i}|{j}]",
                           (({"x": S.describe(x)}, h(S.replace(i, j, x)), T.replace(i, j, h(x))) for x in xs))
    if h.injective:
        w, count = None, 0
        if method.startswith("exhaustive"):
            for a, x in enumerate(xs):
                count += 1
                if T.is_zero(h(x)):
                    w = {"atom": S.names[a], "reason": "maps to zero"}
                    break
            if w is None:
                for x, y in pairs:
                    count += 1
                    if not T.is_zero(T.meet(h(x), h(y))):
                        w = {"x": S.describe(x), "y": S.describe(y), "reason": "images overlap"}
                        break
        else:
            seen = {}
            for x in xs:
                count += 1
                key = h(x)
                if key in seen and seen[key] != x:
                    w = {"x": S.describe(x), "y": S.describe(seen[key]), "reason": "same image"}
                    break
                seen[key] = x
        rec.add("injective", w, count)
    return rec


def identity_hom(B: FiniteBAO) -> Homomorphism:
    return Homomorphism(B, B, B.atoms(), name="id")


def isomorphism_by_names(A: FiniteBAO, B: FiniteBAO) -> Homomorphism:
    """The atom bijection matching equal names, as a homomorphism ``A -> B``."""
    if sorted(A.names) != sorted(B.names):
        raise ValueError("atom names differ")
    return Homomorphism(A, B, [B.atom(name) for name in A.names], name="iso")
