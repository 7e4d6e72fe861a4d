"""Terms over the quasipolyadic equality signature.

Grammar (whitespace is ignored, ``*`` binds tighter than ``+``, ``-`` is prefix)::

    term := var | "0" | "1" | "d(" i "," j ")" | "-" term | "c" i "(" term ")"
          | "s[" i "," j "]" ("[" i "," j "]")* "(" term ")"
          | term "+" term | term "*" term | "(" term ")"
    var  := "x" nat

A substitution prefix ``s[i0,j0][i1,j1]`` denotes ``s_p`` with
``p = [i0,j0] o [i1,j1]``; ``s[i,i]`` is the identity.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .perm import Permutation
from .setalg import DimensionError

VAR, ZERO, ONE, DIAG, JOIN, MEET, NEG, CYL, SUBST = (
    "var", "zero", "one", "diag", "join", "meet", "neg", "cyl", "subst")
_ARITY = {VAR: 0, ZERO: 0, ONE: 0, DIAG: 0, JOIN: 2, MEET: 2, NEG: 1, CYL: 1, SUBST: 1}


@dataclass(frozen=True)
class Term:
    """An immutable term tree.

    ``params`` holds the variable index (``var``), ``(i, j)`` (``diag``),
    ``(i,)`` (``cyl``) or ``(perm,)`` (``subst``).
    """

    op: str
    params: tuple = ()
    children: tuple[Term, ...] = ()

    def __post_init__(self):
        if self.op not in _ARITY:
            raise ValueError(f"unknown operation {self.op!r}")
        if len(self.children) != _ARITY[self.op]:
            raise ValueError(f"{self.op} takes {_ARITY[self.op]} arguments")

    def __add__(self, other: Term) -> Term:
        return Term(JOIN, (), (self, other))

    def __mul__(self, other: Term) -> Term:
        return Term(MEET, (), (self, other))

    def __neg__(self) -> Term:
        return Term(NEG, (), (self,))

    def __str__(self) -> str:
        return print_term(self)

    def variables(self) -> set[int]:
        if self.op == VAR:
            return {self.params[0]}
        out: set[int] = set()
        for c in self.children:
            out |= c.variables()
        return out

    def max_index(self) -> int:
        """Largest coordinate mentioned by a diag/cyl/subst node, or -1."""
        here = -1
        if self.op == DIAG:
            here = max(self.params)
        elif self.op == CYL:
            here = self.params[0]
        elif self.op == SUBST:
            here = self.params[0].size - 1
        return max([here] + [c.max_index() for c in self.children])


def var(k: int) -> Term:
    return Term(VAR, (k,))


TOP = Term(ONE)
BOTTOM = Term(ZERO)


def diag(i: int, j: int) -> Term:
    return Term(DIAG, (i, j))


def cyl(i: int, t: Term) -> Term:
    return Term(CYL, (i,), (t,))


def subst(perm: Permutation, t: Term) -> Term:
    return Term(SUBST, (perm,), (t,))


def cyls(indices: Sequence[int], t: Term) -> Term:
    """``c_{i0} c_{i1} ... t`` (the last index is applied first)."""
    for i in reversed(indices):
        t = cyl(i, t)
    return t


def product(terms: Sequence[Term]) -> Term:
    if not terms:
        return TOP
    out = terms[0]
    for t in terms[1:]:
        out = out * t
    return out


def derived_subst(i: int, j: int, body: Term, dimension: int | None = None) -> Term:
    """The replacement ``s_[i|j]`` written as ``c_i(d_ij . body)``; identity when ``i == j``."""
    if dimension is not None and not (0 <= i < dimension and 0 <= j < dimension):
        raise DimensionError(f"indices ({i}, {j}) outside dimension {dimension}")
    if i == j:
        return body
    return cyl(i, diag(i, j) * body)


def leq(a: Term, b: Term) -> tuple[Term, Term]:
    """``a <= b`` as the equation ``a * b = a``."""
    return (a * b, a)


# -- printing ------------------------------------------------------------

_PREC = {JOIN: 1, MEET: 2}


def print_term(t: Term) -> str:
    return _print(t, 0)


def _print(t: Term, context: int) -> str:
    op = t.op
    if op == VAR:
        return f"x{t.params[0]}"
    if op == ZERO:
        return "0"
    if op == ONE:
        return "1"
    if op == DIAG:
        return f"d({t.params[0]},{t.params[1]})"
    if op == NEG:
        return "-" + _print(t.children[0], 3)
    if op == CYL:
        return f"c{t.params[0]}({_print(t.children[0], 0)})"
    if op == SUBST:
        pairs = t.params[0].transpositions() or [(0, 0)]
        head = "s" + "".join(f"[{i},{j}]" for i, j in pairs)
        return f"{head}({_print(t.children[0], 0)})"
    prec = _PREC[op]
    sym = " + " if op == JOIN else " * "
    left = _print(t.children[0], prec)
    right = _print(t.children[1], prec + 1)
    text = left + sym + right
    return f"({text})" if prec < context else text


# -- parsing -------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN = re.compile(r"\s*(?:(x\d+)|(c\d+)|(\d+)|(s\[)|(d\()|([()\[\],+*\-]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        start = m.start(m.lastindex)
        kind = ("var", "cyl", "num", "subst", "diag", "punct")[m.lastindex - 1]
        tokens.append((kind, m.group(m.lastindex), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int, n: int):
        self.tokens = _tokenize(text)
        self.k = 0
        self.dimension = dimension
        self.n = n

    def peek(self):
        return self.tokens[self.k]

    def take(self, value: str | None = None, kind: str | None = None):
        tok = self.tokens[self.k]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value or kind
            raise ParseError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.k += 1
        return tok

    def index(self) -> int:
        tok = self.take(kind="num")
        i = int(tok[1])
        if i >= self.dimension:
            raise ParseError(f"index {i} outside dimension {self.dimension}", tok[2])
        return i

    def parse(self) -> Term:
        t = self.expr()
        self.take(kind="end")
        return t

    def expr(self) -> Term:
        t = self.prod()
        while self.peek()[1] == "+":
            self.take("+")
            t = t + self.prod()
        return t

    def prod(self) -> Term:
        t = self.unary()
        while self.peek()[1] == "*":
            self.take("*")
            t = t * self.unary()
        return t

    def unary(self) -> Term:
        if self.peek()[1] == "-":
            self.take("-")
            return -self.unary()
        return self.primary()

    def primary(self) -> Term:
        kind, value, pos = self.peek()
        if kind == "var":
            self.take()
            return var(int(value[1:]))
        if kind == "num":
            self.take()
            if value == "0":
                return BOTTOM
            if value == "1":
                return TOP
            raise ParseError(f"constant {value!r} is not 0 or 1", pos)
        if kind == "diag":
            self.take()
            i = self.index()
            self.take(",")
            j = self.index()
            self.take(")")
            return diag(i, j)
        if kind == "cyl":
            self.take()
            i = int(value[1:])
            if i >= self.dimension:
                raise ParseError(f"index {i} outside dimension {self.dimension}", pos)
            return cyl(i, self.group())
        if kind == "subst":
            self.take()
            pairs = [self.pair()]
            while self.peek()[1] == "[":
                self.take("[")
                pairs.append(self.pair())
            perm = Permutation.from_transpositions(pairs)
            if not perm.fixes_from(self.n):
                raise ParseError(f"permutation {list(perm.mapping)} is not in G_{self.n}", pos)
            return subst(perm, self.group())
        if value == "(":
            return self.group()
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos)

    def pair(self) -> tuple[int, int]:
        i = self.index()
        self.take(",")
        j = self.index()
        self.take("]")
        return i, j

    def group(self) -> Term:
        self.take("(")
        t = self.expr()
        self.take(")")
        return t


def parse_term(text: str, dimension: int, n: int | None = None) -> Term:
    """Parse ``text``; ``n`` bounds the substitution group (default: ``dimension``)."""
    return _Parser(text, dimension, dimension if n is None else n).parse()


def parse_equation(text: str, dimension: int, n: int | None = None) -> tuple[Term, Term]:
    if text.count("=") != 1:
        raise ParseError("an equation needs exactly one '='", text.find("="))
    lhs, rhs = text.split("=")
    return parse_term(lhs, dimension, n), parse_term(rhs, dimension, n)


# -- evaluation ----------------------------------------------------------

class UnassignedVariable(KeyError):
    pass


def eval_term(t: Term, assignment: Mapping[int, Any] | Sequence[Any], algebra) -> Any:
    """Evaluate bottom-up with ``algebra``'s operations."""
    if t.max_index() >= algebra.dimension:
        raise DimensionError(f"term uses index {t.max_index()} in dimension {algebra.dimension}")
    return _eval(t, assignment, algebra, {})


def _eval(t: Term, env, alg, memo: dict):
    if t in memo:
        return memo[t]
    op = t.op
    if op == VAR:
        try:
            out = env[t.params[0]]
        except (KeyError, IndexError):
            raise UnassignedVariable(f"x{t.params[0]}") from None
    elif op == ZERO:
        out = alg.zero()
    elif op == ONE:
        out = alg.one()
    elif op == DIAG:
        out = alg.diag(*t.params)
    else:
        args = [_eval(c, env, alg, memo) for c in t.children]
        if op == JOIN:
            out = alg.join(*args)
        elif op == MEET:
            out = alg.meet(*args)
        elif op == NEG:
            out = alg.complement(args[0])
        elif op == CYL:
            out = alg.cyl(t.params[0], args[0])
        else:
            out = alg.subst(t.params[0], args[0])
    memo[t] = out
    return out


# -- checking ------------------------------------------------------------

@dataclass(frozen=True)
class Exhaustive:
    cap: int = 1 << 20


@dataclass(frozen=True)
class Sampled:
    count: int
    seed: int = 0


@dataclass(frozen=True)
class Atomic:
    """Range each variable over atoms only.

    Sound and complete when both sides are additive and normal in every
    variable: their values at arbitrary elements are joins of their values
    at atoms.
    """


class CapExceeded(OverflowError):
    pass


@dataclass
class Verdict:
    holds: bool
    exhaustive: bool
    method: str
    checked: int
    counterexample: dict | None = field(default=None)

    def to_json(self) -> dict:
        out = {"holds": self.holds, "exhaustive": self.exhaustive, "method": self.method, "checked": self.checked}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def is_additive_in(t: Term, v: int) -> bool:
    """Syntactic test: ``t`` preserves finite joins (including 0) in variable ``v``."""
    op = t.op
    if op == ZERO:
        return True
    if op == VAR:
        return t.params[0] == v
    if op in (CYL, SUBST):
        return is_additive_in(t.children[0], v)
    if op == JOIN:
        return all(is_additive_in(c, v) for c in t.children)
    if op == MEET:
        a, b = t.children
        return (is_additive_in(a, v) and v not in b.variables()) or (is_additive_in(b, v) and v not in a.variables())
    return False


def _atoms_of(algebra) -> list:
    atoms = algebra.atoms
    return list(atoms() if callable(atoms) else atoms)


def _domains(variables, algebra, strategy, bounds=None):
    if isinstance(strategy, Exhaustive):
        total = algebra.count() ** len(variables)
        if total > strategy.cap:
            raise CapExceeded(f"{total} assignments exceed cap {strategy.cap}")
        return itertools.product(*(list(algebra.elements()) for _ in variables)), True, "exhaustive"
    if isinstance(strategy, Atomic):
        atoms = _atoms_of(algebra)
        doms = []
        for v in variables:
            if bounds and v in bounds:
                doms.append([a for a in atoms if algebra.meet(a, bounds[v]) == a])
            else:
                doms.append(atoms)
        return itertools.product(*doms), True, "atomic"
    if isinstance(strategy, Sampled):
        rng = np.random.default_rng(strategy.seed)
        samples = ([algebra.random_element(rng) for _ in variables] for _ in range(strategy.count))
        return samples, False, f"sampled(count={strategy.count}, seed={strategy.seed})"
    raise TypeError(f"unknown strategy {strategy!r}")


def _describe(algebra, value):
    return algebra.describe(value) if hasattr(algebra, "describe") else repr(value)


def check_equation(lhs: Term, rhs: Term, algebra, strategy=Exhaustive()) -> Verdict:
    variables = sorted(lhs.variables() | rhs.variables())
    if isinstance(strategy, Atomic):
        bad = [v for v in variables if not (is_additive_in(lhs, v) and is_additive_in(rhs, v))]
        if bad:
            raise ValueError(f"atomic strategy needs both sides additive in x{bad[0]}")
    domain, exhaustive, method = _domains(variables, algebra, strategy)
    checked = 0
    if not variables:
        domain = [()]
    for values in domain:
        env = dict(zip(variables, values))
        checked += 1
        if eval_term(lhs, env, algebra) != eval_term(rhs, env, algebra):
            cex = {f"x{v}": _describe(algebra, val) for v, val in env.items()}
            return Verdict(False, exhaustive, method, checked, cex)
    return Verdict(True, exhaustive, method, checked)


@dataclass(frozen=True)
class QuasiEquation:
    """``premises[0] and premises[1] ... -> conclusion``, each an equation pair."""

    premises: tuple[tuple[Term, Term], ...]
    conclusion: tuple[Term, Term]

    def variables(self) -> list[int]:
        out: set[int] = set()
        for lhs, rhs in self.premises + (self.conclusion,):
            out |= lhs.variables() | rhs.variables()
        return sorted(out)


def _upper_bound(premise: tuple[Term, Term]) -> tuple[int, Term] | None:
    """Recognise ``x * K = x`` (either factor order) with ``K`` variable-free."""
    lhs, rhs = premise
    if rhs.op != VAR or lhs.op != MEET:
        return None
    a, b = lhs.children
    for x, k in ((a, b), (b, a)):
        if x == rhs and not k.variables():
            return rhs.params[0], k
    return None


def check_quasi_equation(q: QuasiEquation, algebra, strategy=Exhaustive()) -> Verdict:
    variables = q.variables()
    bounds = None
    if isinstance(strategy, Atomic):
        bounds = {}
        for prem in q.premises:
            ub = _upper_bound(prem)
            if ub is None:
                raise ValueError("atomic strategy needs premises of the form x * K = x")
            v, k = ub
            value = eval_term(k, {}, algebra)
            bounds[v] = algebra.meet(bounds[v], value) if v in bounds else value
        lhs, rhs = q.conclusion
        bad = [v for v in variables if not (is_additive_in(lhs, v) and is_additive_in(rhs, v))]
        if bad:
            raise ValueError(f"atomic strategy needs the conclusion additive in x{bad[0]}")
    domain, exhaustive, method = _domains(variables, algebra, strategy, bounds)
    checked = 0
    for values in domain:
        env = dict(zip(variables, values))
        if not all(eval_term(a, env, algebra) == eval_term(b, env, algebra) for a, b in q.premises):
            continue
        checked += 1
        lhs, rhs = q.conclusion
        if eval_term(lhs, env, algebra) != eval_term(rhs, env, algebra):
            cex = {f"x{v}": _describe(algebra, val) for v, val in env.items()}
            return Verdict(False, exhaustive, method, checked, cex)
    return Verdict(True, exhaustive, method, checked)
