"""Ground truth for differential testing.

:func:`oracle_decide` enumerates ReLU phases and decides each linear
sub-problem with Fourier-Motzkin elimination.  Nothing here imports the
prover or the checker, so a bug in either cannot be mirrored here.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .network import RELU, IDENTITY, BoundProperty, Edge, NetworkGraph, Node, eval_network, propagate_bounds
from .proof import Leaf, Node as ProofNode, ProofTree, ReluSplit, SingleVarSplit, iter_nodes, replace_at
from .query import VerificationQuery, require_well_formed

MAX_ORACLE_CONSTRAINTS = 20


class EnumerationLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSat:
    assignment: tuple[Fraction, ...]


@dataclass(frozen=True)
class OracleUnsat:
    pass


# -- Fourier-Motzkin ------------------------------------------------------------

# a constraint is (coeffs, constant) meaning sum(coeffs[i] * x[i]) + constant {= or >=} 0
Row = tuple[tuple[Fraction, ...], Fraction]


def _normalize(coeffs, const) -> Row:
    lead = next((abs(a) for a in coeffs if a), None)
    if lead is None or lead == 1:
        return tuple(coeffs), const
    return tuple(a / lead for a in coeffs), const / lead


def _add_ineq(store: dict, coeffs, const) -> bool:
    """Insert ``coeffs.x + const >= 0`` keeping the tightest constant; False if trivially infeasible."""
    if not any(coeffs):
        return const >= 0
    coeffs, const = _normalize(coeffs, const)
    old = store.get(coeffs)
    if old is None or const < old:
        store[coeffs] = const
    return True


def fm_solve(n: int, equalities: Sequence[Row], inequalities: Sequence[Row]) -> Optional[list[Fraction]]:
    """Return a rational point satisfying the system, or None if there is none."""
    eqs = [(list(c), k) for c, k in equalities]
    ineqs = [(list(c), k) for c, k in inequalities]

    # Gaussian elimination on the equalities; pivots are recorded for back-substitution
    pivots: list[tuple[int, list[Fraction], Fraction]] = []
    while eqs:
        coeffs, const = eqs.pop()
        p = next((i for i, a in enumerate(coeffs) if a), None)
        if p is None:
            if const != 0:
                return None
            continue
        a = coeffs[p]
        # x_p = expr . x + expr_const
        expr = [-c / a for c in coeffs]
        expr[p] = Fraction(0)
        expr_const = -const / a
        pivots.append((p, expr, expr_const))

        def subst(row):
            c, k = row
            t = c[p]
            if not t:
                return row
            c = [ci + t * ei for ci, ei in zip(c, expr)]
            c[p] = Fraction(0)
            return c, k + t * expr_const

        eqs = [subst(r) for r in eqs]
        ineqs = [subst(r) for r in ineqs]

    store: dict = {}
    for c, k in ineqs:
        if not _add_ineq(store, tuple(c), k):
            return None

    eliminated: list[tuple[int, list[Row]]] = []
    remaining = {i for c in store for i, a in enumerate(c) if a}
    while remaining:
        def cost(v):
            pos = sum(1 for c in store if c[v] > 0)
            neg = sum(1 for c in store if c[v] < 0)
            return (pos * neg - pos - neg, v)

        v = min(remaining, key=cost)
        touching = [(c, k) for c, k in store.items() if c[v]]
        eliminated.append((v, touching))
        pos = [(c, k) for c, k in touching if c[v] > 0]
        neg = [(c, k) for c, k in touching if c[v] < 0]
        nxt = {c: k for c, k in store.items() if not c[v]}
        for (cp, kp), (cn, kn) in itertools.product(pos, neg):
            sp, sn = -cn[v], cp[v]
            coeffs = tuple(sp * a + sn * b for a, b in zip(cp, cn))
            if not _add_ineq(nxt, coeffs, sp * kp + sn * kn):
                return None
        store = nxt
        remaining = {i for c in store for i, a in enumerate(c) if a}

    x = [Fraction(0)] * n
    for v, rows in reversed(eliminated):
        lo = hi = None
        for c, k in rows:
            rest = k + sum((a * x[i] for i, a in enumerate(c) if a and i != v), Fraction(0))
            bound = -rest / c[v]
            if c[v] > 0:
                lo = bound if lo is None else max(lo, bound)
            else:
                hi = bound if hi is None else min(hi, bound)
        if lo is not None and hi is not None and lo > hi:
            raise AssertionError("Fourier-Motzkin back-substitution found an empty interval")
        if lo is not None and lo > 0:
            x[v] = lo
        elif hi is not None and hi < 0:
            x[v] = hi
        else:
            x[v] = Fraction(0)
    for p, expr, expr_const in reversed(pivots):
        x[p] = expr_const + sum((e * x[i] for i, e in enumerate(expr) if e), Fraction(0))
    return x


# -- phase enumeration ----------------------------------------------------------


def _phase_box(q: VerificationQuery, phases: Sequence[bool]):
    """Intersect the query box with each constraint's phase (True = active)."""
    lo, hi = list(q.lower), list(q.upper)
    zero = Fraction(0)
    for c, active in zip(q.constraints, phases):
        if active:
            lo[c.b] = max(lo[c.b], zero)
            lo[c.aux] = max(lo[c.aux], zero)
            hi[c.aux] = min(hi[c.aux], zero)
        else:
            hi[c.b] = min(hi[c.b], zero)
            lo[c.f] = max(lo[c.f], zero)
            hi[c.f] = min(hi[c.f], zero)
    return lo, hi


def decide_phase(q: VerificationQuery, phases: Sequence[bool]) -> Optional[list[Fraction]]:
    n = q.n
    lo, hi = _phase_box(q, phases)
    if any(a > b for a, b in zip(lo, hi)):
        return None
    zero_row = (Fraction(0),) * n
    eqs: list[Row] = [(tuple(row), Fraction(0)) for row in q.tableau]
    for c in q.constraints:
        row = list(zero_row)
        row[c.f] += 1
        row[c.b] -= 1
        row[c.aux] -= 1
        eqs.append((tuple(row), Fraction(0)))
    ineqs: list[Row] = []
    for i in range(n):
        unit = list(zero_row)
        if lo[i] == hi[i]:
            unit[i] = Fraction(1)
            eqs.append((tuple(unit), -lo[i]))
            continue
        unit[i] = Fraction(1)
        ineqs.append((tuple(unit), -lo[i]))
        unit = list(zero_row)
        unit[i] = Fraction(-1)
        ineqs.append((tuple(unit), hi[i]))
    return fm_solve(n, eqs, ineqs)


def oracle_decide(q: VerificationQuery, max_constraints: int = MAX_ORACLE_CONSTRAINTS):
    require_well_formed(q)
    k = len(q.constraints)
    if k > max_constraints:
        raise EnumerationLimit(f"{k} ReLU constraints exceed the enumeration limit of {max_constraints}")
    for phases in itertools.product((False, True), repeat=k):
        x = decide_phase(q, phases)
        if x is not None:
            return OracleSat(tuple(x))
    return OracleUnsat()


# -- instance generation ----------------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    seed: int = 0
    max_inputs: int = 2
    max_hidden: int = 4
    max_outputs: int = 1
    weight_range: tuple[Fraction, Fraction] = (Fraction(-2), Fraction(2))
    bound_width: Fraction = Fraction(1)

    def __post_init__(self):
        if min(self.max_inputs, self.max_hidden, self.max_outputs) < 1:
            raise ValueError("max_inputs, max_hidden and max_outputs must all be at least 1")
        lo, hi = (Fraction(v) for v in self.weight_range)
        if lo > hi:
            raise ValueError(f"empty weight range {self.weight_range}")
        object.__setattr__(self, "weight_range", (lo, hi))
        object.__setattr__(self, "bound_width", Fraction(self.bound_width))


def _grid_value(rng: random.Random, lo: Fraction, hi: Fraction, denom: int = 2) -> Fraction:
    a = int(lo * denom) if (lo * denom).denominator == 1 else int(lo * denom) + 1
    b = int(hi * denom)
    if a > b:
        return lo
    return Fraction(rng.randint(a, b), denom)


def gen_instance(params: GenParams) -> tuple[NetworkGraph, BoundProperty]:
    """Deterministic random dense network with ReLU hidden layers and identity outputs."""
    rng = random.Random(params.seed)
    n_in = rng.randint(1, params.max_inputs)
    n_hidden = rng.randint(1, params.max_hidden)
    n_out = rng.randint(1, params.max_outputs)
    n_layers = 1 if n_hidden == 1 else rng.randint(1, 2)
    sizes = [n_hidden] if n_layers == 1 else [n_hidden - (k := rng.randint(1, n_hidden - 1)), k]
    wlo, whi = params.weight_range

    def weight():
        w = _grid_value(rng, wlo, whi)
        if w == 0 and wlo < 0 < whi:
            w = rng.choice([Fraction(-1, 2), Fraction(1, 2)])
        return w

    inputs = tuple(f"x{i + 1}" for i in range(n_in))
    prev = list(inputs)
    nodes = []
    count = 0
    for size in sizes:
        layer = []
        for _ in range(size):
            count += 1
            name = f"v{count}"
            nodes.append(Node(name, RELU, tuple(Edge(p, weight()) for p in prev)))
            layer.append(name)
        prev = layer
    outputs = tuple(f"y{i + 1}" if n_out > 1 else "y" for i in range(n_out))
    for name in outputs:
        nodes.append(Node(name, IDENTITY, tuple(Edge(p, weight()) for p in prev)))
    net = NetworkGraph(inputs, tuple(nodes), outputs)

    width = params.bound_width
    in_bounds = []
    for _ in inputs:
        lo = _grid_value(rng, Fraction(-1), Fraction(1))
        in_bounds.append((lo, lo + width))
    reach = propagate_bounds(net, in_bounds)
    # grid over the input box, corners included; capped for many inputs
    steps = [Fraction(k, 4) for k in range(5)]
    grid = list(itertools.product(steps, repeat=len(inputs)))
    if len(grid) > 64:
        grid = rng.sample(grid, 64)
    samples = [eval_network(net, [lo + width * t for (lo, _), t in zip(in_bounds, pt)]) for pt in grid]
    out_bounds = []
    for k, name in enumerate(outputs):
        lo_y, hi_y = reach[name].f
        seen = [ys[k] for ys in samples]
        top, bottom = max(seen), min(seen)
        length = width * Fraction(rng.randint(1, 4), 4)
        mode = rng.randrange(4)
        if mode == 0:
            # between the best sampled output and the propagated upper bound (or past it)
            gap = (hi_y - top) if hi_y > top else width / 4
            start = top + gap * Fraction(rng.randint(1, 8), 8)
            out_bounds.append((start, start + length))
        elif mode == 1:
            gap = (bottom - lo_y) if lo_y < bottom else width / 4
            end = bottom - gap * Fraction(rng.randint(1, 8), 8)
            out_bounds.append((end - length, end))
        else:
            centre = rng.choice(seen)
            half = width * Fraction(rng.randint(0, 4), 8)
            out_bounds.append((centre - half, centre + half))
    return net, BoundProperty(tuple(in_bounds), tuple(out_bounds))


# -- proof mutation ----------------------------------------------------------------

MUTATIONS = ("negate_entry", "zero_leaf", "perturb", "swap_children", "retarget_split")
VALUE_MUTATIONS = ("negate_entry", "zero_leaf", "perturb")


class MutationNotApplicable(ValueError):
    pass


def mutate_proof(seed: int, tree: ProofTree, kind: str) -> ProofTree:
    """Apply one deterministic corruption of ``kind`` to ``tree``."""
    if kind not in MUTATIONS:
        raise ValueError(f"unknown mutation {kind!r}; choose from {MUTATIONS}")
    rng = random.Random(seed)
    leaves = [(p, t) for p, t in iter_nodes(tree) if isinstance(t, Leaf)]
    inner = [(p, t) for p, t in iter_nodes(tree) if isinstance(t, ProofNode)]

    if kind == "negate_entry":
        targets = [(p, t, i) for p, t in leaves for i, v in enumerate(t.contradiction) if v]
        if not targets:
            raise MutationNotApplicable("no nonzero leaf entry to negate")
        p, t, i = rng.choice(targets)
        w = list(t.contradiction)
        w[i] = -w[i]
        return replace_at(tree, p, Leaf(tuple(w)))
    if kind == "zero_leaf":
        targets = [(p, t) for p, t in leaves if any(t.contradiction)]
        if not targets:
            raise MutationNotApplicable("no nonzero leaf to zero")
        p, t = rng.choice(targets)
        return replace_at(tree, p, Leaf((Fraction(0),) * len(t.contradiction)))
    if kind == "perturb":
        targets = [(p, t, i) for p, t in leaves for i in range(len(t.contradiction))]
        targets += [(p, t, None) for p, t in inner if isinstance(t.split, SingleVarSplit)]
        if not targets:
            raise MutationNotApplicable("no rational to perturb")
        p, t, i = rng.choice(targets)
        if i is None:
            s = t.split
            return replace_at(tree, p, ProofNode(SingleVarSplit(s.index, s.value + 1), t.left, t.right))
        w = list(t.contradiction)
        w[i] += 1
        return replace_at(tree, p, Leaf(tuple(w)))
    if kind == "swap_children":
        if not inner:
            raise MutationNotApplicable("tree has no split to swap")
        p, t = rng.choice(inner)
        return replace_at(tree, p, ProofNode(t.split, t.right, t.left))
    targets = [(p, t) for p, t in inner if isinstance(t.split, ReluSplit)]
    if not targets:
        raise MutationNotApplicable("tree has no ReLU split to retarget")
    p, t = rng.choice(targets)
    s = t.split
    return replace_at(tree, p, ProofNode(ReluSplit(s.f, s.b, s.aux), t.left, t.right))
