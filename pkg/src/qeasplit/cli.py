"""Batch runner: build the constructions, verify them, write a JSON report."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .bao import FiniteBAO, VerificationRecord, from_concrete, verify_bao, verify_hom
from .perm import symmetric_group
from .setalg import BaseSpec, PowersetAlgebra, generate, operator_law_violations, product_R
from .splitting import (
    SplitAtoms, SplitSpec, block_bound, embed_small, embed_split, equiv_blocks, real_partition,
    small_subalgebra, split, verify_piece_algebra, verify_split,
)
from .terms import BOTTOM, Atomic, Exhaustive, QuasiEquation, Sampled, check_equation, check_quasi_equation, \
    cyl, derived_subst, diag, parse_equation, var
from .witness import (
    BudgetExceeded, ExhaustedNone, Found, eval_tau, refute_representation, search_representation,
    synthetic_candidates, tau, verify_tau_zero,
)
from .nondiag import EnlargedBase, nondiag_representation

SCHEMA = "qeasplit-report/1"
PHASES = ("setalg", "split", "equiv", "bounds", "partitions", "embeddings", "witness", "nondiag", "equations")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dimension: int
    blocks: list[int]
    m: int
    n: int
    k: int = 1
    enlargement: int = 1
    maxBase: int = 4
    budget: int = 200_000
    seed: int = 0
    phases: list[str] = field(default_factory=lambda: list(PHASES))
    samples: int = 200
    candidates: int = 100
    boundTrials: int = 500
    baselineSearch: bool = True
    nondiagBlocks: list[int] | None = None

    @classmethod
    def from_json(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.blocks = list(cfg.blocks)
        cfg.phases = list(cfg.phases)
        return cfg

    def to_json(self) -> dict:
        out = asdict(self)
        out["nondiagBlocks"] = self.nondiag_blocks()
        return out

    def nondiag_blocks(self) -> list[int]:
        """Block 0 has exactly m points; the others at least m + 1."""
        if self.nondiagBlocks is not None:
            return list(self.nondiagBlocks)
        return [self.m] + [max(b, self.m + 1) for b in self.blocks[1:]]

    def validate(self) -> list[str]:
        """Raise on inconsistent settings; return warnings for soft ones."""
        bad = [p for p in self.phases if p not in PHASES]
        if bad:
            raise ConfigError(f"unknown phases {bad}; choose from {list(PHASES)}")
        if len(self.blocks) != self.dimension:
            raise ConfigError(f"need {self.dimension} block sizes, got {len(self.blocks)}")
        if any(b < 1 for b in self.blocks):
            raise ConfigError("block sizes must be positive")
        if self.n > self.dimension:
            raise ConfigError(f"n = {self.n} exceeds the dimension {self.dimension}")
        if self.m < 1 or self.k < 0 or self.n < 0:
            raise ConfigError("need m >= 1, n >= 0, k >= 0")
        if "witness" in self.phases and self.dimension < self.m + 1:
            raise ConfigError(f"witness phase needs dimension >= m + 1 = {self.m + 1}, got {self.dimension}")
        if {"partitions", "embeddings"} & set(self.phases) and min(self.blocks) < self.m:
            raise ConfigError(f"partition phases need every block to have at least m = {self.m} points")
        notes = []
        need = 2 ** (self.k * math.factorial(self.n) + 1)
        if self.m < need:
            notes.append(f"m = {self.m} < 2^(k*n!+1) = {need}: representability of "
                         f"{self.k}-generated subalgebras is not claimed")
        return notes


def preset(name: str) -> ExperimentConfig:
    if name == "tiny":
        return ExperimentConfig(dimension=3, blocks=[2, 2, 2], m=2, n=2, k=1, enlargement=1, maxBase=4)
    if name == "small":
        warnings.warn("the small preset needs minutes and several GB of memory", stacklevel=2)
        return ExperimentConfig(dimension=5, blocks=[4] * 5, m=4, n=2, k=1, maxBase=4, baselineSearch=False,
                                phases=["setalg", "split", "equiv", "partitions", "embeddings", "witness",
                                        "equations"])
    if name == "bounds":
        return ExperimentConfig(dimension=3, blocks=[2, 2, 2], m=16, n=2, k=2, phases=["bounds"])
    raise ConfigError(f"unknown preset {name!r}; choose tiny, small or bounds")


# -- phases --------------------------------------------------------------------

class _Context:
    """Lazily built constructions shared by the phases."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self._cache: dict = {}

    def _get(self, key: str, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def base(self) -> BaseSpec:
        return self._get("base", lambda: BaseSpec.from_sizes(self.cfg.blocks))

    @property
    def R(self):
        return self._get("R", lambda: product_R(self.base))

    @property
    def A1(self):
        return self._get("A1", lambda: generate(self.base.space(), self.cfg.n, [self.R]))

    @property
    def B1(self) -> FiniteBAO:
        return self._get("B1", lambda: from_concrete(self.A1))

    def split_with(self, m: int, n: int):
        return self._get(f"split{m},{n}", lambda: split(
            SplitSpec.from_concrete(self.A1, self.R, m, n, self.cfg.k, base=self.B1)))

    @property
    def S(self):
        return self.split_with(self.cfg.m, self.cfg.n)

    @property
    def part(self):
        def build():
            rng = np.random.default_rng(self.cfg.seed)
            G = [self.S.bao.random_element(rng) for _ in range(self.cfg.k)]
            return equiv_blocks(self.S, G, self.cfg.k)
        return self._get("part", build)

    @property
    def small(self):
        return self._get("small", lambda: small_subalgebra(self.S, self.part))

    @property
    def rp(self):
        return self._get("rp", lambda: real_partition(self.base.space(), self.base.blocks, self.cfg.m))


def _claim(rec: VerificationRecord, law: str, ok: bool, witness: dict | None = None, checked: int = 1):
    rec.add(law, None if ok else (witness or {"reason": "claim failed"}), checked)


def phase_setalg(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    cfg, A = ctx.cfg, ctx.A1
    full = PowersetAlgebra(A.space, cfg.n)
    rng = np.random.default_rng(cfg.seed)
    xs = list(A.atoms) + [full.random_element(rng) for _ in range(cfg.samples)]
    rec = VerificationRecord("operator_laws", method=f"atoms + {cfg.samples} random subsets")
    violations = operator_law_violations(full, xs)
    _claim(rec, "setalg.laws", not violations, violations[0][1] if violations else None, len(xs))
    fam = [A.space.subst(p, ctx.R) for p in symmetric_group(cfg.n)]
    _claim(rec, "setalg.R_family_atoms", all(A.is_atom(x) for x in fam), checked=len(fam))
    disjoint = all((x & y).is_empty() for i, x in enumerate(fam) for y in fam[i + 1:])
    _claim(rec, "setalg.R_family_disjoint", disjoint, checked=len(fam))
    facts["atoms"] = A.num_atoms
    facts["points"] = A.space.size
    return [rec, verify_bao(ctx.B1)]


def phase_split(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    S = ctx.S
    facts["atoms"] = S.bao.num_atoms
    facts["named_atoms"] = len(list(S.named.items()))
    return [verify_split(S), verify_hom(S.embed_old_hom())]


def phase_equiv(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    part, small = ctx.part, ctx.small
    rec = VerificationRecord("small_subalgebra")
    _claim(rec, "equiv.block_bound", part.p <= part.bound, {"p": part.p, "bound": part.bound})
    facts["blocks"] = [list(b) for b in part.blocks]
    facts["bound"] = part.bound
    facts["atoms"] = small.bao.num_atoms
    return [rec, verify_bao(small.bao), verify_hom(small.inclusion())]


def phase_bounds(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    cfg = ctx.cfg
    rng = np.random.default_rng(cfg.seed)
    atoms = SplitAtoms.synthetic(cfg.n, cfg.m)
    nbytes = (len(atoms.perms) * atoms.parts + 7) // 8
    rec = VerificationRecord("block_bound", method=f"{cfg.boundTrials} seeded generator sets")
    worst, w = 0, None
    for _ in range(cfg.boundTrials):
        size = int(rng.integers(1, cfg.k + 1)) if cfg.k else 0
        G = [int.from_bytes(rng.bytes(nbytes), "little") & atoms.all_mask() for _ in range(size)]
        part = equiv_blocks(atoms, G, cfg.k)
        worst = max(worst, part.p)
        if part.p > part.bound and w is None:
            w = {"p": part.p, "bound": part.bound}
    rec.add("equiv.block_bound", w, cfg.boundTrials)
    facts["max_blocks"] = worst
    facts["bound"] = block_bound(cfg.k, cfg.n)
    return [rec]


def phase_partitions(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    rp = ctx.rp
    facts["pieces"] = [len(p) for p in rp.pieces]
    facts["representative"] = list(rp.representative)
    return [rp.verify()]


def phase_embeddings(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    cfg, S = ctx.cfg, ctx.S
    recs = [verify_hom(embed_small(S, ctx.small, ctx.rp))]
    A2 = generate(ctx.base.space(), cfg.n, ctx.rp.pieces)
    recs.append(verify_piece_algebra(S, A2, ctx.rp))
    n1 = min(cfg.n, 1)
    S1, S2, S3 = ctx.split_with(cfg.m, n1), ctx.split_with(2 * cfg.m, cfg.n), ctx.split_with(3 * cfg.m, cfg.n)
    e1, e2 = embed_split(S1, S2), embed_split(S2, S3)
    recs += [verify_hom(e1), verify_hom(e2), verify_hom(e1.then(e2))]
    facts["chain"] = [[cfg.m, n1], [2 * cfg.m, cfg.n], [3 * cfg.m, cfg.n]]
    return recs


def phase_witness(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    cfg, S = ctx.cfg, ctx.S
    rec = VerificationRecord("witness")
    facts["tau"] = str(tau(cfg.m, cfg.dimension))
    _claim(rec, "tau.zero_in_base", verify_tau_zero(ctx.A1, ctx.R, cfg.m))
    _claim(rec, "tau.zero_in_split", verify_tau_zero(S.bao, S.R, cfg.m))
    # control: block 0 enlarged to m + 1 points, where a repetition-free tuple exists
    sizes = [cfg.m + 1] + list(cfg.blocks[1:])
    cbase = BaseSpec.from_sizes(sizes)
    cR = product_R(cbase)
    cA = generate(cbase.space(), cfg.n, [cR])
    point = eval_tau(cA, cR, cfg.m).first()
    _claim(rec, "tau.control_nonzero", point is not None)
    facts["control_point"] = None if point is None else list(point)

    outcomes = {"certificate": 0, "violation": 0}
    w = None
    cands = synthetic_candidates(S, cfg.candidates, cfg.seed)
    for h in cands:
        result = refute_representation(S, h)
        kind = result.to_json()
        outcomes["certificate" if kind["kind"] == "certificate" else "violation"] += 1
        if not kind["verified"] and w is None:
            w = {"candidate": h.name, "result": kind}
    rec.add("refute.verified", w, len(cands))
    facts["refutation"] = outcomes

    searches = {}
    try:
        res = search_representation(S.bao, ("cyl", "diag"), cfg.maxBase, cfg.budget)
        searches["split"] = {"result": type(res).__name__, **res.stats}
        _claim(rec, "search.split_none", isinstance(res, ExhaustedNone), {"base": getattr(res, "base_size", None)})
    except BudgetExceeded as exc:
        searches["split"] = {"result": "BudgetExceeded", "nodes": exc.nodes, "base": exc.base}
        _claim(rec, "search.split_none", False, {"reason": str(exc)})
    if cfg.baselineSearch:
        size = len(ctx.base.universe)
        try:
            res = search_representation(ctx.B1, ("cyl", "diag"), size, cfg.budget)
            searches["base"] = {"result": type(res).__name__, **res.stats}
            ok = isinstance(res, Found) and verify_hom(res.h).passed
            _claim(rec, "search.base_found", ok, {"result": type(res).__name__})
        except BudgetExceeded as exc:
            searches["base"] = {"result": "BudgetExceeded", "nodes": exc.nodes, "base": exc.base}
            _claim(rec, "search.base_found", False, {"reason": str(exc)})
    facts["search"] = searches
    facts["search_scope"] = "bounded: a negative answer covers only bases up to maxBase"
    return [rec]


def phase_nondiag(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    cfg = ctx.cfg
    base = BaseSpec.from_sizes(ctx.cfg.nondiag_blocks())
    R = product_R(base)
    A = generate(base.space(), cfg.n, [R])
    S = split(SplitSpec.from_concrete(A, R, cfg.m, cfg.n, cfg.k))
    nd = nondiag_representation(S, EnlargedBase(base, cfg.enlargement))
    summary = nd.summary()
    rec = VerificationRecord("nondiag")
    others = [f for f in summary["failed"] if not f.startswith("diag")]
    _claim(rec, "nondiag.preserves_non_diagonal", not others, {"failed": others})
    diag_fail = {k: v for k, v in summary["failed"].items() if k.startswith("diag")}
    _claim(rec, "nondiag.diagonal_fails", bool(diag_fail) or cfg.enlargement == 0)
    facts["blocks"] = list(cfg.nondiag_blocks())
    facts["failed"] = summary["failed"]
    facts["families_failed"] = summary["families_failed"]
    facts["preserved"] = summary["preserved"]
    return [rec, nd.partition.verify()]


def phase_equations(ctx: _Context, facts: dict) -> list[VerificationRecord]:
    S, d = ctx.S, ctx.cfg.dimension
    rec = VerificationRecord("equations", method="atomic (complete for additive terms)")
    x = var(0)
    verdicts = {}
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            q = QuasiEquation(((x * -diag(i, j), x),), (derived_subst(i, j, x), BOTTOM))
            v = check_quasi_equation(q, S.bao, Atomic())
            rec.add(f"quasi[{i}|{j}]", v.counterexample if not v.holds else None, v.checked)
            verdicts[f"x <= -d({i},{j}) -> s[{i}|{j}] x = 0"] = v.to_json()
    for i in range(d):
        for j in range(i + 1, d):
            v = check_equation(cyl(i, cyl(j, x)), cyl(j, cyl(i, x)), S.bao, Atomic())
            rec.add(f"cyl_commute[{i},{j}]", v.counterexample if not v.holds else None, v.checked)
    facts["quasi_equations"] = verdicts
    return [rec]


PHASE_RUNNERS = {
    "setalg": phase_setalg, "split": phase_split, "equiv": phase_equiv, "bounds": phase_bounds,
    "partitions": phase_partitions, "embeddings": phase_embeddings, "witness": phase_witness,
    "nondiag": phase_nondiag, "equations": phase_equations,
}


def run(cfg: ExperimentConfig) -> dict:
    """Run the configured phases in dependency order and return the report."""
    notes = cfg.validate()
    ctx = _Context(cfg)
    report = {"schema": SCHEMA, "config": cfg.to_json(), "warnings": list(notes), "phases": {}, "seconds": {}}
    start = time.perf_counter()
    for name in PHASES:
        if name not in cfg.phases:
            continue
        facts: dict = {}
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                recs = PHASE_RUNNERS[name](ctx, facts)
                entry = {"passed": all(r.passed for r in recs), "records": [r.to_json() for r in recs],
                         "facts": facts}
            except Exception as exc:  # a crashing phase is a failed phase
                entry = {"passed": False, "error": f"{type(exc).__name__}: {exc}", "records": [], "facts": facts}
        entry["warnings"] = sorted({str(w.message) for w in caught})
        report["phases"][name] = entry
        report["seconds"][name] = round(time.perf_counter() - t0, 4)
    report["seconds"]["total"] = round(time.perf_counter() - start, 4)
    report["passed"] = all(p["passed"] for p in report["phases"].values())
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def strip_timings(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "seconds"}


# -- command line ----------------------------------------------------------------

def _cmd_run(args) -> int:
    try:
        if args.config:
            cfg = ExperimentConfig.from_json(json.loads(Path(args.config).read_text()))
        else:
            cfg = preset(args.preset)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.phases:
            cfg.phases = args.phases.split(",")
        report = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = dumps(report)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    if args.save_algebra:
        ctx = _Context(cfg)
        Path(args.save_algebra).write_text(json.dumps(ctx.S.bao.to_json()))
    for name, entry in report["phases"].items():
        print(f"{name:11s} {'PASS' if entry['passed'] else 'FAIL'}", file=sys.stderr)
    return 0 if report["passed"] else 1


def _cmd_check_eq(args) -> int:
    data = json.loads(Path(args.algebra).read_text())
    B = FiniteBAO.from_json(data)
    try:
        lhs, rhs = parse_equation(args.eq, B.dimension, B.n)
    except ValueError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    if args.strategy == "atomic":
        strategy = Atomic()
    elif args.strategy == "sampled":
        strategy = Sampled(args.samples, args.seed or 0)
    else:
        strategy = Exhaustive()
    try:
        verdict = check_equation(lhs, rhs, B, strategy)
    except (ValueError, OverflowError) as exc:
        print(f"cannot check: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(verdict.to_json(), indent=2))
    return 0 if verdict.holds else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeasplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="build and verify the constructions")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON config file")
    src.add_argument("--preset", help="tiny, small or bounds")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--seed", type=int)
    p.add_argument("--phases", help="comma-separated subset of phases")
    p.add_argument("--save-algebra", help="write the split algebra's atom structure as JSON")
    p.set_defaults(func=_cmd_run)
    q = sub.add_parser("check-eq", help="check an equation in a saved algebra")
    q.add_argument("--algebra", required=True)
    q.add_argument("--eq", required=True, help='e.g. "c0(c1(x0)) = c1(c0(x0))"')
    q.add_argument("--strategy", choices=["exhaustive", "atomic", "sampled"], default="atomic")
    q.add_argument("--samples", type=int, default=1000)
    q.add_argument("--seed", type=int)
    q.set_defaults(func=_cmd_check_eq)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
