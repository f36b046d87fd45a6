import time

from farkas_check.fuzz import FuzzSummary, instance_seed, is_positive_rescaling, run_fuzz, run_instance
from farkas_check.network import compile_query
from farkas_check.oracle import GenParams, gen_instance, oracle_decide
from farkas_check.proof import Leaf, Node, ReluSplit


def test_small_run_has_no_problems():
    summary = run_fuzz(40, seed=3)
    assert summary.problems == []
    assert summary.sat + summary.unsat == 40
    assert summary.unnamed_rejections == 0


def test_runs_are_deterministic():
    a = run_fuzz(15, seed=5).to_dict()
    b = run_fuzz(15, seed=5, workers=2).to_dict()
    assert a == b


def test_instance_result_fields():
    r = run_instance(0, 7, GenParams())
    assert r.seed == instance_seed(7, 0)
    assert r.prover == r.oracle


def test_positive_rescaling():
    t = Node(ReluSplit(0, 1, 2), Leaf((1, 0, 2)), Leaf((0, 1, 0)))
    assert is_positive_rescaling(t, Node(t.split, Leaf((2, 0, 4)), t.right))
    assert not is_positive_rescaling(t, Node(t.split, Leaf((-1, 0, -2)), t.right))
    assert not is_positive_rescaling(t, Node(t.split, Leaf((1, 1, 2)), t.right))
    assert not is_positive_rescaling(t, Node(t.split, Leaf((2, 0, 5)), t.right))
    assert not is_positive_rescaling(t, Node(ReluSplit(1, 0, 2), t.left, t.right))


def test_summary_rate():
    s = FuzzSummary(1, 0, mutations={"perturb": [20, 19, 19], "swap_children": [5, 1, 1]})
    assert s.value_mutations == (20, 19)
    assert s.rejection_rate == 0.95
    assert s.ok
    assert s.to_dict()["value_mutation_rejection_rate"] == "19/20"


def test_oracle_is_quick_on_generated_instances():
    slowest = 0.0
    for i in range(100):
        net, prop = gen_instance(GenParams(seed=instance_seed(7, i)))
        q = compile_query(net, prop)
        start = time.perf_counter()
        oracle_decide(q)
        slowest = max(slowest, time.perf_counter() - start)
    assert slowest < 1
