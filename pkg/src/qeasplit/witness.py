"""Non-representability of the split algebra's cylindric reduct.

``tau(m, d)`` builds the witness term.  ``refute_representation`` takes any
purported representation of the split algebra and either pinpoints an
operation it fails to preserve or assembles a sequence lying in
``tau(h(R))`` although ``tau(R) = 0``.  ``search_representation`` is a
bounded exhaustive search for representations over small bases.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .bao import FiniteBAO, Homomorphism, bits_of, verify_hom
from .setalg import ConcreteAlgebra, DimensionError, PowersetAlgebra, SeqSpace
from .splitting import SplitAlgebra
from .terms import Term, cyls, derived_subst, diag, eval_term, product, var


@dataclass(frozen=True)
class WitnessTerm:
    m: int
    dimension: int
    term: Term

    def __str__(self):
        return str(self.term)


def column_term(i: int, m: int, x: Term) -> Term:
    """``s_i^0 c_1 ... c_m x``, i.e. ``c_0(d_0i . c_1 ... c_m x)`` (just ``c_1...c_m x`` for i = 0)."""
    return derived_subst(0, i, cyls(range(1, m + 1), x))


def tau(m: int, d: int) -> WitnessTerm:
    """``prod_{i<=m} s_i^0 c_1...c_m x . prod_{i<j<=m} -d_ij`` in the variable ``x0``."""
    if m < 1:
        raise ValueError("the witness term needs m >= 1")
    if d < m + 1:
        raise DimensionError(f"the witness term for m = {m} needs dimension >= {m + 1}, got {d}")
    x = var(0)
    factors = [column_term(i, m, x) for i in range(m + 1)]
    factors += [-diag(i, j) for i, j in itertools.combinations(range(m + 1), 2)]
    return WitnessTerm(m, d, product(factors))


def eval_tau(algebra, R, m: int):
    return eval_term(tau(m, algebra.dimension).term, {0: R}, algebra)


def verify_tau_zero(algebra, R, m: int) -> bool:
    """True iff ``tau_m(R) = 0`` in ``algebra``."""
    return algebra.is_zero(eval_tau(algebra, R, m))


# -- refutation ----------------------------------------------------------------

@dataclass
class HomViolation:
    """A concrete instance where ``h(op(args)) != op(h(args))``."""

    op: str
    args: dict
    sequence: tuple[int, ...] | None
    in_lhs: bool
    reason: str
    h: Homomorphism = field(repr=False)
    lhs_source: Any = field(repr=False, default=None)

    def verify(self) -> bool:
        """Recompute both sides and confirm ``sequence`` separates them."""
        S, T = self.h.source, self.h.target
        if self.op == "nonzero":
            return T.is_zero(self.h(self.lhs_source)) and not S.is_zero(self.lhs_source)
        lhs, rhs = self._sides()
        if self.sequence is None:
            return lhs != rhs
        return (self.sequence in lhs) == self.in_lhs and (self.sequence in rhs) != self.in_lhs

    def _sides(self):
        S, T, h = self.h.source, self.h.target, self.h
        if self.op == "cyl":
            i, x = self.args["i"], self.lhs_source
            return h(S.cyl(i, x)), T.cyl(i, h(x))
        if self.op == "meet":
            x, y = self.lhs_source
            return h(S.meet(x, y)), T.meet(h(x), h(y))
        raise ValueError(self.op)

    def to_json(self) -> dict:
        return {"kind": "violation", "op": self.op, "args": self.args, "reason": self.reason,
                "sequence": None if self.sequence is None else list(self.sequence),
                "verified": self.verify()}


@dataclass
class RefutationCertificate:
    m: int
    s: tuple[int, ...]
    w: list[int]
    z: tuple[int, ...]
    checks: dict[str, bool]
    h: Homomorphism = field(repr=False)
    R: int = field(repr=False, default=0)

    def verify(self) -> bool:
        """Re-derive every recorded membership from scratch."""
        S, T, h, m = self.h.source, self.h.target, self.h, self.m
        if len(set(self.w)) != m + 1:
            return False
        if tuple(self.z[: m + 1]) != tuple(self.w) or tuple(self.z[m + 1:]) != tuple(self.s[m + 1:]):
            return False
        hR = h(self.R)
        # z must lie in -d_ij for all i < j <= m and in each s_i^0 c_1..c_m h(R)
        for i, j in itertools.combinations(range(m + 1), 2):
            if self.z in T.diag(i, j):
                return False
        for i in range(m + 1):
            if self.z not in eval_term(column_term(i, m, var(0)), {0: hR}, T):
                return False
        in_tau_image = self.z in eval_term(tau(m, T.dimension).term, {0: hR}, T)
        image_of_tau = h(eval_term(tau(m, S.dimension).term, {0: self.R}, S))
        return in_tau_image and self.z not in image_of_tau

    def to_json(self) -> dict:
        return {"kind": "certificate", "m": self.m, "s": list(self.s), "w": list(self.w), "z": list(self.z),
                "checks": self.checks, "verified": self.verify()}


def _overwrite(s: Sequence[int], i: int, value: int) -> tuple[int, ...]:
    out = list(s)
    out[i] = value
    return tuple(out)


def refute_representation(S: SplitAlgebra, h: Homomorphism) -> RefutationCertificate | HomViolation:
    """Run the pigeonhole extraction against ``h``.

    ``h`` must map ``S.bao`` into a concrete set algebra.  Either some step
    of the extraction exposes an operation ``h`` does not preserve, or the
    extracted sequence ``z`` lies in ``tau(h(R))`` while ``h(tau(R)) = h(0)``.
    """
    T = h.target
    if not isinstance(T, ConcreteAlgebra):
        raise TypeError("refutation needs a concrete set-algebra target")
    if h.source is not S.bao:
        raise ValueError("h does not start at this split algebra")
    m, A = S.m, S.bao
    if T.dimension < m + 1:
        raise DimensionError("target dimension too small for the witness")
    R = S.R
    hR = h(R)
    if hR.is_empty():
        return HomViolation("nonzero", {"x": "R"}, None, False, "R collapsed: h(R) is empty but R is not 0",
                            h, lhs_source=R)
    s = hR.first()
    space: SeqSpace = T.space
    w: list[int] = []
    for i in range(m + 1):
        Ri = S.part(i)
        hRi = h(Ri)
        hits = [u for u in space.universe if _overwrite(s, 0, u) in hRi]
        if not hits:
            # R <= c_0 R_i in S, so s in h(c_0 R_i) but s is not in c_0 h(R_i)
            return HomViolation("cyl", {"i": 0, "x": A.describe(Ri)}, s, True,
                                f"s is in h(c_0 R_{i}) but no value at coordinate 0 puts it in h(R_{i})",
                                h, lhs_source=Ri)
        for k, prev in enumerate(w):
            if prev in hits:
                Rk = S.part(k)
                return HomViolation("meet", {"x": A.describe(Rk), "y": A.describe(Ri)},
                                    _overwrite(s, 0, prev), False,
                                    f"h(R_{k}) and h(R_{i}) overlap although R_{k} . R_{i} = 0",
                                    h, lhs_source=(Rk, Ri))
        w.append(hits[0])
    z = tuple(w) + tuple(s[m + 1:])
    hR_col = [eval_term(column_term(i, m, var(0)), {0: hR}, T) for i in range(m + 1)]
    checks = {f"z in s_{i}^0 c_1..c_{m} h(R)": z in hR_col[i] for i in range(m + 1)}
    checks.update({f"z in -d_{i}{j}": z not in T.diag(i, j) for i, j in itertools.combinations(range(m + 1), 2)})
    checks["z in tau(h(R))"] = z in eval_term(tau(m, T.dimension).term, {0: hR}, T)
    checks["tau(R) = 0 in source"] = A.is_zero(eval_term(tau(m, A.dimension).term, {0: R}, A))
    return RefutationCertificate(m, s, w, z, checks, h, R)


# -- bounded search --------------------------------------------------------------

class BudgetExceeded(RuntimeError):
    def __init__(self, nodes: int, base: int):
        super().__init__(f"search budget of {nodes} nodes exhausted at base size {base}")
        self.nodes = nodes
        self.base = base


@dataclass
class Found:
    h: Homomorphism
    base_size: int
    stats: dict


@dataclass
class ExhaustedNone:
    stats: dict


def _pattern(p: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(v, len(seen)) for v in p)


def _atom_pattern(A: FiniteBAO, a: int) -> tuple[int, ...] | None:
    """The equality pattern the diagonals force on points of ``h(a)``, or None if inconsistent."""
    d = A.dimension
    rep = [next(i for i in range(j + 1) if i == j or (A.diag(i, j) >> a) & 1) for j in range(d)]
    pattern = _pattern(rep)
    for i, j in itertools.combinations(range(d), 2):
        if bool((A.diag(i, j) >> a) & 1) != (pattern[i] == pattern[j]):
            return None
    return pattern


class _Search:
    """Constraint propagation plus DFS over one atom per point of ``^d size``."""

    def __init__(self, A: FiniteBAO, ops: set[str], size: int, perms, anchor: int | None, budget: int):
        self.A, self.ops, self.size, self.budget = A, ops, size, budget
        d = A.dimension
        self.space = SeqSpace(d, tuple(range(size)))
        self.points = list(self.space.points())
        self.index = {p: k for k, p in enumerate(self.points)}
        self.nodes = 0
        self.perms = [p for p in perms if not p.is_identity()]
        self.inverse_row = {p: A.subst_action[p.inverse()] for p in self.perms}
        # below[i][a]: atoms under c_i a; above[i][a]: atoms b with a under c_i b
        self.below = A.cyl_action
        self.above = [[0] * A.num_atoms for _ in range(d)]
        for i in range(d):
            for b in range(A.num_atoms):
                for a in bits_of(A.cyl_action[i][b]):
                    self.above[i][a] |= 1 << b
        if "diag" in ops:
            by_pattern: dict[tuple, int] = {}
            for a in range(A.num_atoms):
                pat = _atom_pattern(A, a)
                if pat is not None:
                    by_pattern[pat] = by_pattern.get(pat, 0) | (1 << a)
            self.domains = [by_pattern.get(_pattern(p), 0) for p in self.points]
        else:
            self.domains = [A.top] * len(self.points)
        self.fibers = []
        self.fiber_of = [[0] * len(self.points) for _ in range(d)]
        for i in range(d):
            groups: dict[tuple, list[int]] = {}
            for k, p in enumerate(self.points):
                groups.setdefault(p[:i] + p[i + 1:], []).append(k)
            self.fibers.append(list(groups.values()))
            for f, members in enumerate(self.fibers[i]):
                for k in members:
                    self.fiber_of[i][k] = f
        # twin[p][k] is the index of point_k o p
        self.twin = {p: [self.index[tuple(pt[p(c)] for c in range(d))] for pt in self.points] for p in self.perms}
        self.anchor = anchor
        self.anchor_point = None
        if anchor is not None and "diag" in ops:
            pat = _atom_pattern(A, anchor)
            if pat is not None and max(pat) < size:
                self.anchor_point = self.index[pat]

    def _narrow(self, dom: list[int], q: int, allowed: int, queue: list[int]) -> bool:
        if dom[q] & ~allowed:
            dom[q] &= allowed
            if dom[q] == 0:
                return False
            queue.append(q)
        return True

    def propagate(self, dom: list[int], queue: list[int]) -> bool:
        d = self.A.dimension
        use_cyl, use_subst = "cyl" in self.ops, "subst" in self.ops
        while queue:
            k = queue.pop()
            mask = dom[k]
            if mask == 0:
                return False
            if use_cyl:
                for i in range(d):
                    below = above = 0
                    for a in bits_of(mask):
                        below |= self.below[i][a]
                        above |= self.above[i][a]
                    members = self.fibers[i][self.fiber_of[i][k]]
                    for q in members:
                        if not self._narrow(dom, q, below & above, queue):
                            return False
                    if mask & (mask - 1) == 0:
                        # x in h(c_i b) = c_i h(b) forces b onto the fiber of x
                        if bin(above).count("1") > len(members):
                            return False
                        for b in bits_of(above):
                            holders = [q for q in members if (dom[q] >> b) & 1]
                            if not holders:
                                return False
                            if len(holders) == 1 and not self._narrow(dom, holders[0], 1 << b, queue):
                                return False
            if use_subst:
                for p in self.perms:
                    # the atom at x o p is s_{p^-1} of the atom at x
                    row = self.inverse_row[p]
                    image = 0
                    for a in bits_of(mask):
                        image |= 1 << row[a]
                    if not self._narrow(dom, self.twin[p][k], image, queue):
                        return False
        return True

    def covered(self, dom: list[int]) -> bool:
        union = 0
        for mask in dom:
            union |= mask
        return union == self.A.top

    def run(self, injective: bool):
        dom = list(self.domains)
        if self.anchor is not None and "diag" in self.ops:
            if self.anchor_point is None:
                return None
            dom[self.anchor_point] &= 1 << self.anchor
        if not self.propagate(dom, list(range(len(dom)))):
            return None
        return self._dfs(dom, injective)

    def _dfs(self, dom: list[int], injective: bool):
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(self.budget, self.size)
        if injective and not self.covered(dom):
            return None
        best, best_count = None, 0
        for k, mask in enumerate(dom):
            if mask & (mask - 1):
                c = bin(mask).count("1")
                if best is None or c < best_count:
                    best, best_count = k, c
                    if c == 2:
                        break
        if best is None:
            return dom
        for a in bits_of(dom[best]):
            trial = list(dom)
            trial[best] = 1 << a
            if self.propagate(trial, [best]):
                found = self._dfs(trial, injective)
                if found is not None:
                    return found
        return None


def search_representation(A: FiniteBAO, ops: Sequence[str] = ("cyl", "diag", "subst"), max_base: int = 4,
                          budget: int = 200_000, anchor: int = 0, min_base: int = 1,
                          injective: bool = True) -> Found | ExhaustedNone:
    """Look for a homomorphism of ``A`` onto ``B(^dW)`` with ``|W| <= max_base``.

    Booleans are always preserved; ``ops`` chooses which of ``cyl``, ``diag``
    and ``subst`` must be preserved too.  A point assignment is a Boolean
    homomorphism; the search fixes one point of ``h(anchor)`` to the least
    sequence with its equality pattern, which loses nothing up to a
    permutation of ``W``.  Nodes are counted across all base sizes.
    """
    ops = set(ops) - {"boolean"}
    unknown = ops - {"cyl", "diag", "subst"}
    if unknown:
        raise ValueError(f"unsupported operations {sorted(unknown)}")
    perms = A.perms if "subst" in ops else ()
    tried = []
    nodes = 0
    for size in range(min_base, max_base + 1):
        search = _Search(A, ops, size, perms, anchor if injective else None, budget - nodes)
        try:
            dom = search.run(injective)
        finally:
            nodes += search.nodes
        tried.append({"base": size, "points": len(search.points), "nodes": search.nodes})
        if dom is None:
            continue
        target = PowersetAlgebra(search.space, A.n if "subst" in ops else 0)
        members: dict[int, list] = {}
        for k, mask in enumerate(dom):
            members.setdefault(mask.bit_length() - 1, []).append(search.points[k])
        images = [search.space.element(members.get(a, [])) for a in range(A.num_atoms)]
        full = {"boolean"} | ops
        h = Homomorphism(A, target, images, frozenset(full), injective=injective, name="found")
        stats = {"bases": tried, "nodes": nodes, "anchor": A.names[anchor], "ops": sorted(full)}
        if not verify_hom(h).passed:
            raise AssertionError("search produced a map that does not verify")
        return Found(h, size, stats)
    return ExhaustedNone({"bases": tried, "nodes": nodes, "anchor": A.names[anchor],
                          "ops": sorted({"boolean"} | ops), "injective": injective,
                          "symmetry": "one point of h(anchor) fixed to its canonical sequence"})


# -- synthetic candidates ------------------------------------------------------------

def candidate_from_points(S: SplitAlgebra, space: SeqSpace, assignment: Sequence[int], name: str) -> Homomorphism:
    """The Boolean homomorphism sending atom ``a`` to the points labelled ``a``."""
    labels = np.asarray(assignment).reshape(space.shape)
    images = [space.wrap(labels == a) for a in range(S.bao.num_atoms)]
    return Homomorphism(S.bao, PowersetAlgebra(space, 0), images, frozenset({"boolean", "cyl", "diag"}),
                        perms=(), injective=False, name=name)


def synthetic_candidates(S: SplitAlgebra, count: int, seed: int = 0,
                         sizes: Sequence[int] = (3, 4, 5, 6)) -> list[Homomorphism]:
    """Seeded purported representations with ``h(R)`` nonempty.

    Even-numbered candidates label points with uniformly random atoms.
    Odd-numbered ones pass the local checks the extraction relies on:
    ``h(R)`` is one coordinate-0 fiber meeting each ``h(R_i)`` exactly once.
    """
    rng = np.random.default_rng(seed)
    A, m = S.bao, S.m
    in_R = [a for a in range(A.num_atoms) if (S.R >> a) & 1]
    outside = [a for a in range(A.num_atoms) if not (S.R >> a) & 1]
    out = []
    for c in range(count):
        size = int(sizes[c % len(sizes)])
        space = SeqSpace(A.dimension, tuple(range(size)))
        if c % 2 == 0:
            labels = rng.integers(0, A.num_atoms, size=space.size)
            if not any(labels[k] in in_R for k in range(space.size)):
                labels[int(rng.integers(space.size))] = in_R[int(rng.integers(len(in_R)))]
            out.append(candidate_from_points(S, space, labels, f"random-{c}"))
            continue
        labels = np.asarray(outside)[rng.integers(0, len(outside), size=space.size)]
        rest = tuple(int(v) for v in rng.integers(0, size, size=A.dimension - 1))
        ws = rng.permutation(size)[: m + 1]
        for j, w in enumerate(ws):
            atom = S.part(j).bit_length() - 1
            labels[space.index((int(w),) + rest)] = atom
        out.append(candidate_from_points(S, space, labels, f"local-{c}"))
    return out
