"""Acceptance gate: one pass/fail line per criterion.

Run under pytest (lines appear in the "acceptance" summary section) or
directly with ``python3 tests/test_acceptance.py``.
"""

import functools
import random
import statistics
import sys
import time
from fractions import Fraction as F
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import lemmas  # noqa: E402
from farkas_check.checker import check_tree, default_workers  # noqa: E402
from farkas_check.fuzz import MIN_REJECTION_RATE, run_fuzz  # noqa: E402
from farkas_check.network import compile_query, load_network, load_property  # noqa: E402
from farkas_check.proof import Leaf, Node, ReluSplit, SingleVarSplit, parse_proof, size  # noqa: E402
from farkas_check.prover import Unsat, solve_query  # noqa: E402
from farkas_check.query import load_query  # noqa: E402

DATA = Path(__file__).parent / "data"
RESULTS: list[str] = []

LEMMA_CASES = 1000
FUZZ_COUNT = 500
FUZZ_SEED = 7


def _text(name):
    return (DATA / name).read_text()


def _median_ms(fn, repeat=5):
    times = []
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append((time.perf_counter() - start) * 1000)
    return out, statistics.median(times)


def _record(name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def vec(*xs):
    return tuple(F(x) for x in xs)


def gate_compile() -> bool:
    net_text, prop_text = _text("example1_network.json"), _text("example1_property.json")
    q, ms = _median_ms(lambda: compile_query(load_network(net_text), load_property(prop_text)))
    expected = load_query(_text("example1_query.json"))
    exact = (
        q.upper == vec(1, 1, 3, 1, 3, 1, 3, 2, 5)
        and q.lower == vec(0, 0, 0, -1, 0, 0, 0, 0, 4)
        and q.tableau == expected.tableau
        and len(q.tableau) == 5
        and all(len(r) == 9 for r in q.tableau)
        and {c.as_tuple() for c in q.constraints} == {(2, 4, 6), (3, 5, 7)}
    )
    return _record("example network compile", exact and ms < 10, f"exact={exact}, {ms:.2f} ms (< 10 ms)")


def gate_check_example() -> bool:
    q = load_query(_text("example1_query.json"))
    proof_text = _text("example2_proof.json")
    report, ms = _median_ms(lambda: check_tree(q, parse_proof(proof_text, q.m), sequential=True))
    left, right = report.leaf("L").constant, report.leaf("R").constant
    ok = report.certified and left == -4 and right == -2 and ms < 10
    return _record(
        "example proof tree check",
        ok,
        f"certified={report.certified}, left constant {left}, right constant {right}, {ms:.2f} ms (< 10 ms)",
    )


def gate_round_trip() -> bool:
    start = time.perf_counter()
    q = compile_query(load_network(_text("example1_network.json")), load_property(_text("example1_property.json")))
    out = solve_query(q)
    certified = isinstance(out, Unsat) and check_tree(q, out.proof).certified
    ms = (time.perf_counter() - start) * 1000
    return _record("solve then check round trip", certified and ms < 1000, f"unsat+certified={certified}, {ms:.1f} ms (< 1 s)")


@functools.lru_cache(maxsize=None)
def _corpus():
    return run_fuzz(FUZZ_COUNT, FUZZ_SEED, workers=default_workers())


def gate_differential() -> bool:
    s = _corpus()
    ok = not s.problems and s.sat + s.unsat == FUZZ_COUNT and s.seconds < 300
    detail = (
        f"{FUZZ_COUNT} instances (seed {FUZZ_SEED}): {s.sat} sat, {s.unsat} unsat, "
        f"{len(s.problems)} problems, {s.seconds:.1f} s (< 5 min)"
    )
    if s.problems:
        detail += f"; first: {s.problems[0]}"
    return _record("solver/oracle differential soundness", ok, detail)


def gate_mutations() -> bool:
    s = _corpus()
    applied, rejected = s.value_mutations
    rate = s.rejection_rate
    ok = rate >= MIN_REJECTION_RATE and s.unnamed_rejections == 0 and applied > 0
    return _record(
        "mutation discrimination",
        ok,
        f"{rejected}/{applied} value-corrupting mutations rejected ({rate:.2%}, need >= 95%), "
        f"{s.unnamed_rejections} rejections without a path, {s.rescaled} rescalings skipped",
    )


def gate_lemmas() -> bool:
    neg, nonneg = lemmas.certificate_signs(LEMMA_CASES)
    suites = {
        "cert_is_neg": neg,
        "solution_is_not_neg": nonneg,
        "single-variable covering": lemmas.single_var_covering(LEMMA_CASES),
        "ReLU covering": lemmas.relu_covering(LEMMA_CASES),
        "get_set_nth/ith_set_nth": lemmas.substitution_laws(LEMMA_CASES),
        "tableau/bound reduction": lemmas.reduction_equivalence(LEMMA_CASES),
    }
    failed = {k: len(v) for k, v in suites.items() if v}
    return _record(
        "lemma property suites",
        not failed,
        f"{len(suites)} suites x {LEMMA_CASES} cases, failures: {failed or 'none'}",
    )


def synthetic_tree(rng: random.Random, internal: int, q):
    """A random tree with ``internal`` splits; about a fifth of its parts are defective."""
    n, m = q.n, q.m

    def leaf():
        r = rng.random()
        if r < 0.4:
            return Leaf((0, 0, 1, 0, 0))
        if r < 0.6:
            return Leaf((0, 0, 1, 0, -2))
        if r < 0.95:
            return Leaf(tuple(F(rng.randint(-3, 3), rng.randint(1, 2)) for _ in range(m)))
        return Leaf((1,) * (m - 1))

    def split():
        r = rng.random()
        if r < 0.45:
            return ReluSplit(3, 5, 7)
        if r < 0.8:
            return ReluSplit(2, 4, 6)
        if r < 0.95:
            return SingleVarSplit(rng.randrange(n), F(rng.randint(-4, 8), 2))
        return ReluSplit(3, 5, 6)

    # grow by replacing random leaves; kept as a mutable skeleton then frozen
    skeleton = [None]
    children = {}
    leaves = [0]
    while len(children) < internal:
        k = leaves.pop(rng.randrange(len(leaves)))
        a, b = len(skeleton), len(skeleton) + 1
        skeleton.extend([None, None])
        children[k] = (split(), a, b)
        leaves.extend([a, b])

    built = {}
    for k in sorted(range(len(skeleton)), reverse=True):
        if k in children:
            s, a, b = children[k]
            built[k] = Node(s, built.pop(a), built.pop(b))
        else:
            built[k] = leaf()
    return built[0]


def gate_parallel() -> bool:
    q = load_query(_text("example1_query.json"))
    tree = synthetic_tree(random.Random(2024), 500, q)
    nodes = size(tree)
    seq = check_tree(q, tree, sequential=True)
    par = check_tree(q, tree, workers=max(2, default_workers()))
    par4 = check_tree(q, tree, workers=4)
    same = seq.to_dict(include_leaves=True) == par.to_dict(include_leaves=True) == par4.to_dict(include_leaves=True)
    ok = same and nodes >= 1000 and seq.failures
    return _record(
        "parallel check determinism",
        bool(ok),
        f"{nodes}-node tree, {len(seq.failures)} failures, sequential == parallel: {same}",
    )


def test_example_network_compile():
    assert gate_compile()


def test_example_proof_tree_check():
    assert gate_check_example()


def test_solve_check_round_trip():
    assert gate_round_trip()


def test_differential_soundness():
    assert gate_differential()


def test_mutation_discrimination():
    assert gate_mutations()


def test_lemma_property_suites():
    assert gate_lemmas()


def test_parallel_check_determinism():
    assert gate_parallel()


if __name__ == "__main__":
    gates = [gate_compile, gate_check_example, gate_round_trip, gate_differential, gate_mutations, gate_lemmas, gate_parallel]
    results = [g() for g in gates]
    sys.exit(0 if all(results) else 1)
