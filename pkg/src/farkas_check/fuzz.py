"""Differential fuzzing: prover vs oracle, checker vs mutated proofs."""

from __future__ import annotations

import time
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .arith import format_rational
from .checker import check_tree
from .network import compile_query
from .oracle import (
    MUTATIONS,
    VALUE_MUTATIONS,
    GenParams,
    MutationNotApplicable,
    OracleSat,
    gen_instance,
    mutate_proof,
    oracle_decide,
)
from .proof import Node, ProofTree, count_internal, iter_nodes
from .prover import Sat, solve_query
from .query import satisfies_query, well_formed

MIN_REJECTION_RATE = 0.95


def instance_seed(seed: int, i: int) -> int:
    return (seed << 20) + i


@dataclass
class InstanceResult:
    index: int
    seed: int
    prover: str
    oracle: str
    problems: list[str] = field(default_factory=list)
    splits: int = 0
    # kind -> (applied, rejected, rejections that named a path)
    mutations: dict[str, list[int]] = field(default_factory=dict)
    rescaled: int = 0


def is_positive_rescaling(original: ProofTree, mutated: ProofTree) -> bool:
    """True if ``mutated`` differs from ``original`` only by scaling leaf vectors by positive factors.

    ``w`` and ``c * w`` with ``c > 0`` are the same certificate, so such a
    mutation corrupts nothing.
    """
    a_nodes = list(iter_nodes(original))
    b_nodes = list(iter_nodes(mutated))
    if len(a_nodes) != len(b_nodes):
        return False
    for (pa, a), (pb, b) in zip(a_nodes, b_nodes):
        if pa != pb or type(a) is not type(b):
            return False
        if isinstance(a, Node):
            if a.split != b.split:
                return False
            continue
        if a == b:
            continue
        if len(a.contradiction) != len(b.contradiction):
            return False
        ratios = set()
        for x, y in zip(a.contradiction, b.contradiction):
            if (x == 0) != (y == 0):
                return False
            if x:
                ratios.add(y / x)
        if len(ratios) != 1 or ratios.pop() <= 0:
            return False
    return True


def run_instance(index: int, seed: int, template: GenParams) -> InstanceResult:
    s = instance_seed(seed, index)
    net, prop = gen_instance(replace(template, seed=s))
    q = compile_query(net, prop)
    res = InstanceResult(index, s, "?", "?")
    if not well_formed(q).ok:
        res.problems.append("compiled query is not well formed")
        return res
    outcome = solve_query(q)
    truth = oracle_decide(q)
    res.prover = "sat" if isinstance(outcome, Sat) else "unsat"
    res.oracle = "sat" if isinstance(truth, OracleSat) else "unsat"
    if res.prover != res.oracle:
        res.problems.append(f"prover says {res.prover}, oracle says {res.oracle}")
    if isinstance(truth, OracleSat) and not satisfies_query(q, truth.assignment):
        res.problems.append("oracle witness fails satisfies_query")
    if isinstance(outcome, Sat):
        if not satisfies_query(q, outcome.assignment):
            res.problems.append("prover witness fails satisfies_query")
        return res
    tree = outcome.proof
    res.splits = count_internal(tree)
    if not check_tree(q, tree, sequential=True).certified:
        res.problems.append("prover proof was not certified")
        return res
    for k, kind in enumerate(MUTATIONS):
        try:
            mutated = mutate_proof(s * len(MUTATIONS) + k, tree, kind)
        except MutationNotApplicable:
            continue
        if mutated == tree:
            continue
        if kind in VALUE_MUTATIONS and is_positive_rescaling(tree, mutated):
            res.rescaled += 1
            continue
        report = check_tree(q, mutated, sequential=True)
        stats = res.mutations.setdefault(kind, [0, 0, 0])
        stats[0] += 1
        if not report.certified:
            stats[1] += 1
            stats[2] += bool(report.failures)
    return res


def _run(args):
    return run_instance(*args)


@dataclass
class FuzzSummary:
    count: int
    seed: int
    sat: int = 0
    unsat: int = 0
    splits: int = 0
    rescaled: int = 0
    problems: list[dict] = field(default_factory=list)
    mutations: dict[str, list[int]] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def value_mutations(self) -> tuple[int, int]:
        applied = sum(self.mutations.get(k, [0, 0, 0])[0] for k in VALUE_MUTATIONS)
        rejected = sum(self.mutations.get(k, [0, 0, 0])[1] for k in VALUE_MUTATIONS)
        return applied, rejected

    @property
    def rejection_rate(self) -> float:
        applied, rejected = self.value_mutations
        return rejected / applied if applied else 1.0

    @property
    def unnamed_rejections(self) -> int:
        return sum(v[1] - v[2] for v in self.mutations.values())

    @property
    def ok(self) -> bool:
        return not self.problems and self.rejection_rate >= MIN_REJECTION_RATE and not self.unnamed_rejections

    def to_dict(self) -> dict:
        applied, rejected = self.value_mutations
        return {
            "ok": self.ok,
            "count": self.count,
            "seed": self.seed,
            "sat": self.sat,
            "unsat": self.unsat,
            "splits": self.splits,
            "problems": self.problems,
            "mutations": {k: dict(zip(("applied", "rejected", "named"), v)) for k, v in sorted(self.mutations.items())},
            "rescaled_mutations_skipped": self.rescaled,
            "value_mutation_rejection_rate": format_rational_ratio(rejected, applied),
        }


def format_rational_ratio(num: int, den: int) -> str:
    return format_rational(Fraction(num, den)) if den else "1"


def run_fuzz(count: int, seed: int, template: GenParams | None = None, workers: int = 1) -> FuzzSummary:
    template = template or GenParams()
    start = time.perf_counter()
    jobs = [(i, seed, template) for i in range(count)]
    if workers > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, jobs, chunksize=max(1, count // (4 * workers))))
    else:
        results = [_run(j) for j in jobs]
    summary = FuzzSummary(count, seed)
    for r in results:
        if r.prover == "sat":
            summary.sat += 1
        elif r.prover == "unsat":
            summary.unsat += 1
        summary.splits += r.splits
        summary.rescaled += r.rescaled
        for p in r.problems:
            summary.problems.append({"instance": r.index, "seed": r.seed, "problem": p})
        for kind, v in r.mutations.items():
            acc = summary.mutations.setdefault(kind, [0, 0, 0])
            for j in range(3):
                acc[j] += v[j]
    summary.seconds = time.perf_counter() - start
    return summary
