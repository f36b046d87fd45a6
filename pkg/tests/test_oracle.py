import random
from fractions import Fraction as F

import pytest

from farkas_check.checker import check_tree
from farkas_check.network import BoundProperty, compile_query, full_assignment
from farkas_check.oracle import (
    MUTATIONS,
    EnumerationLimit,
    GenParams,
    MutationNotApplicable,
    OracleSat,
    OracleUnsat,
    fm_solve,
    gen_instance,
    mutate_proof,
    oracle_decide,
)
from farkas_check.proof import Leaf, Node, ReluSplit, SingleVarSplit
from farkas_check.query import ReluConstraint, VerificationQuery, satisfies_query


def box(*pairs):
    return tuple((F(a), F(b)) for a, b in pairs)


def test_example_query_unsat(ex_net, ex_prop):
    assert oracle_decide(compile_query(ex_net, ex_prop)) == OracleUnsat()


def test_relaxed_query_sat(ex_net, ex_prop):
    q = compile_query(ex_net, BoundProperty(ex_prop.input_bounds, box((-3, 0))))
    out = oracle_decide(q)
    assert isinstance(out, OracleSat)
    assert satisfies_query(q, out.assignment)


def test_trivial_query():
    q = VerificationQuery([[0, 0, 0]], [0, 0, 0], [0, 0, 0])
    assert oracle_decide(q) == OracleSat((F(0), F(0), F(0)))


def test_empty_system_is_feasible():
    assert fm_solve(0, [], []) == []
    assert fm_solve(3, [], []) is not None


def test_elimination_examples():
    one = (F(1),)
    # x >= 2 and x <= 1
    assert fm_solve(1, [], [(one, F(-2)), ((F(-1),), F(1))]) is None
    x = fm_solve(2, [((F(1), F(-1)), F(0))], [((F(1), F(0)), F(-3, 2)), ((F(0), F(-1)), F(2))])
    assert x[0] == x[1] and F(3, 2) <= x[0] <= 2


def test_phase_semantics():
    # x in [-1, 1], f = relu(x), f >= 1/2 forces x >= 1/2
    q = VerificationQuery([], [-1, 0, 0], [1, 1, 1], [ReluConstraint(0, 1, 2)])
    lower = list(q.lower)
    lower[1] = F(1, 2)
    out = oracle_decide(q.with_bounds(lower, q.upper))
    assert isinstance(out, OracleSat) and out.assignment[0] >= F(1, 2)


def test_enumeration_limit(ex_query):
    with pytest.raises(EnumerationLimit):
        oracle_decide(ex_query, max_constraints=1)


def test_generation_is_deterministic():
    assert gen_instance(GenParams(seed=0)) == gen_instance(GenParams(seed=0))
    assert gen_instance(GenParams(seed=0)) != gen_instance(GenParams(seed=1))


def test_generated_instances_are_well_formed_and_coherent():
    for seed in range(200):
        net, prop = gen_instance(GenParams(seed=seed, max_inputs=3, max_hidden=4, max_outputs=2))
        q = compile_query(net, prop)
        assert all(nd.activation in ("relu", "id") for nd in net.nodes)
        assert all(nd.activation == "id" for nd in net.nodes if nd.id in net.outputs)
        # a network run inside the input box is a solution whenever its outputs fit
        s = full_assignment(net, [lo for lo, _ in prop.input_bounds])
        if all(lo <= s[i] <= hi for (lo, hi), i in zip(prop.output_bounds, range(q.n - len(net.outputs), q.n))):
            assert satisfies_query(q, s)
            assert isinstance(oracle_decide(q), OracleSat)


def test_gen_params_validation():
    with pytest.raises(ValueError):
        GenParams(max_hidden=0)
    with pytest.raises(ValueError):
        GenParams(weight_range=(F(1), F(-1)))


def test_zero_leaf_mutation_rejected(ex_query, ex_tree):
    mutated = mutate_proof(0, ex_tree, "zero_leaf")
    report = check_tree(ex_query, mutated)
    assert not report.certified
    bad = report.failures[0].path
    assert report.leaf(bad).constant == 0


def test_negate_left_leaf_rejected(ex_query, ex_tree):
    left_only = Node(ex_tree.split, ex_tree.left, Leaf((0,) * 5))
    mutated = mutate_proof(3, left_only, "negate_entry")
    assert mutated.left == Leaf((0, 0, -1, 0, 0))
    report = check_tree(ex_query, Node(mutated.split, mutated.left, ex_tree.right))
    assert [f.path for f in report.failures] == [("L",)]
    assert report.leaf("L").constant == 8


def test_swap_children_matches_recomputation(ex_query, ex_tree):
    mutated = mutate_proof(0, ex_tree, "swap_children")
    assert mutated == Node(ex_tree.split, ex_tree.right, ex_tree.left)
    verdict = check_tree(ex_query, mutated).certified
    # recompute from scratch: each leaf against its own branch box
    from farkas_check.checker import mk_certificate, update_bounds

    (ll, ul), (lr, ur) = update_bounds(ex_query.lower, ex_query.upper, ex_tree.split)
    expect = (
        mk_certificate(ex_query.tableau, ll, ul, mutated.left.contradiction).valid
        and mk_certificate(ex_query.tableau, lr, ur, mutated.right.contradiction).valid
    )
    assert verdict == expect


def test_retarget_split(ex_query, ex_tree):
    mutated = mutate_proof(0, ex_tree, "retarget_split")
    assert mutated.split == ReluSplit(5, 3, 7)
    assert not check_tree(ex_query, mutated).certified


def test_mutations_are_deterministic(ex_tree):
    for kind in MUTATIONS:
        assert mutate_proof(11, ex_tree, kind) == mutate_proof(11, ex_tree, kind)


def test_mutation_not_applicable():
    with pytest.raises(MutationNotApplicable):
        mutate_proof(0, Leaf((1,)), "swap_children")
    with pytest.raises(MutationNotApplicable):
        mutate_proof(0, Leaf((0, 0)), "zero_leaf")
    with pytest.raises(ValueError):
        mutate_proof(0, Leaf((1,)), "shuffle")


def test_perturb_single_var_value():
    tree = Node(SingleVarSplit(0, F(1, 2)), Leaf(()), Leaf(()))
    assert mutate_proof(0, tree, "perturb").split == SingleVarSplit(0, F(3, 2))


def test_right_leaf_variant_survives(ex_query, ex_tree):
    # a coincidentally valid corruption: (0,0,1,0,0) also refutes the active branch
    tree = Node(ex_tree.split, ex_tree.left, Leaf((0, 0, 1, 0, 0)))
    report = check_tree(ex_query, tree)
    assert report.certified and report.leaf("R").constant == -2
