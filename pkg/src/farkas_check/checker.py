"""Certificate checking for UNSAT proof trees.

A leaf carries a contradiction vector ``w``.  Its certificate is the row
combination ``w^T A x`` closed off with one bound polynomial per variable:
``c_i * (u_i - x_i)`` for a positive coefficient ``c_i`` and
``-c_i * (x_i - l_i)`` for a negative one.  The sum has zero coefficients by
construction and its constant must be strictly negative.

Inner nodes are splits; each child is checked against the bounds that
:func:`update_bounds` derives for its phase.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .arith import DimensionError, LinPoly, format_rational, lin_combination, poly_add
from .proof import Leaf, Node, ProofTree, ReluSplit, SingleVarSplit, Split, size
from .query import ReluConstraint, VerificationQuery, require_well_formed, row_polynomials

BAD_CONTRADICTION = "bad-contradiction"
UNKNOWN_SPLIT = "unknown-split"
DIMENSION_ERROR = "dimension-error"

THREADS_ENV = "FARKAS_CHECK_THREADS"

# below this many tree nodes the pool costs more than it saves
_PARALLEL_MIN_NODES = 64

Path = tuple[str, ...]


def set_nth(values: Sequence[Fraction], i: int, v) -> tuple[Fraction, ...]:
    if not 0 <= i < len(values):
        raise IndexError(f"index {i} out of range for length {len(values)}")
    out = list(values)
    out[i] = Fraction(v)
    return tuple(out)


def update_bounds(lower: Sequence[Fraction], upper: Sequence[Fraction], split: Split):
    """Return ``((lower_L, upper_L), (lower_R, upper_R))`` for ``split``.

    Inputs are left untouched.  For a ReLU split the left child is the
    inactive phase (``f = 0``, ``b <= 0``) and the right child the active
    phase (``aux = 0``, ``b >= 0``).
    """
    if len(lower) != len(upper):
        raise DimensionError(f"lower has {len(lower)} entries, upper has {len(upper)}")
    lower, upper = tuple(lower), tuple(upper)
    if isinstance(split, SingleVarSplit):
        i, k = split.index, split.value
        return (lower, set_nth(upper, i, k)), (set_nth(lower, i, k), upper)
    b, f, aux = split.b, split.f, split.aux
    lower_l = set_nth(lower, f, 0)
    upper_l = set_nth(set_nth(upper, b, 0), f, 0)
    lower_r = set_nth(set_nth(lower, b, 0), aux, 0)
    upper_r = set_nth(upper, aux, 0)
    return (lower_l, upper_l), (lower_r, upper_r)


def check_split(split: Split, constraints: Sequence[ReluConstraint]) -> bool:
    if isinstance(split, SingleVarSplit):
        return True
    triple = (split.b, split.f, split.aux)
    return any(c.as_tuple() == triple for c in constraints)


@dataclass(frozen=True)
class CertificateCandidate:
    eq_part: LinPoly
    bound_part: LinPoly
    combined: LinPoly

    @property
    def constant(self) -> Fraction:
        return self.combined.constant

    @property
    def valid(self) -> bool:
        return self.combined.is_constant() and self.combined.constant < 0


def _row_combination(tableau, w, n: int) -> LinPoly:
    if len(w) != len(tableau):
        raise DimensionError(f"contradiction vector has {len(w)} entries, tableau has {len(tableau)} rows")
    for r, row in enumerate(tableau):
        if len(row) != n:
            raise DimensionError(f"tableau row {r} has length {len(row)}, expected {n}")
    return lin_combination(row_polynomials(tableau), [Fraction(v) for v in w], n)


def mk_certificate(tableau, lower, upper, w) -> CertificateCandidate:
    n = len(lower)
    if len(upper) != n:
        raise DimensionError(f"lower has {n} entries, upper has {len(upper)}")
    eq_part = _row_combination(tableau, w, n)
    constant = Fraction(0)
    coeffs = []
    for c, lo, hi in zip(eq_part.coeffs, lower, upper):
        if c > 0:
            constant += c * hi
        elif c < 0:
            constant += c * lo
        coeffs.append(-c)
    bound_part = LinPoly(constant, tuple(coeffs))
    return CertificateCandidate(eq_part, bound_part, poly_add(eq_part, bound_part))


def check_contradiction(tableau, upper, lower, w) -> bool:
    """True iff ``w`` yields a certificate: zero coefficients, negative constant.

    Takes upper bounds before lower bounds, unlike :func:`mk_certificate`.
    """
    cert = mk_certificate(tableau, lower, upper, w)
    return all(c == 0 for c in cert.combined.coeffs) and cert.combined.constant < 0


@dataclass(frozen=True)
class Failure:
    path: Path
    reason: str
    detail: str = ""

    def to_dict(self) -> dict:
        d = {"path": list(self.path), "reason": self.reason}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class LeafResult:
    path: Path
    constant: Fraction | None
    passed: bool
    empty_box: bool = False


@dataclass(frozen=True)
class CheckReport:
    failures: tuple[Failure, ...] = ()
    leaves: tuple[LeafResult, ...] = field(default=(), compare=False)
    empty_box_leaves: tuple[Path, ...] = ()

    @property
    def certified(self) -> bool:
        return not self.failures

    def leaf(self, path) -> LeafResult:
        path = tuple(path)
        for lr in self.leaves:
            if lr.path == path:
                return lr
        raise KeyError(path)

    def to_dict(self, include_leaves: bool = False) -> dict:
        d = {"certified": self.certified, "failures": [f.to_dict() for f in self.failures]}
        if self.empty_box_leaves:
            d["empty_box_leaves"] = [list(p) for p in self.empty_box_leaves]
        if include_leaves:
            d["leaves"] = [
                {
                    "path": list(lr.path),
                    "constant": None if lr.constant is None else format_rational(lr.constant),
                    "passed": lr.passed,
                }
                for lr in self.leaves
            ]
        return d


@dataclass
class _Acc:
    failures: list = field(default_factory=list)
    leaves: list = field(default_factory=list)
    empty: list = field(default_factory=list)

    def extend(self, other: "_Acc"):
        self.failures.extend(other.failures)
        self.leaves.extend(other.leaves)
        self.empty.extend(other.empty)


def _check_leaf(tableau, lower, upper, leaf: Leaf, path: Path, allow_empty_box: bool, acc: _Acc):
    w = leaf.contradiction
    if len(w) != len(tableau):
        acc.failures.append(
            Failure(path, DIMENSION_ERROR, f"leaf vector length {len(w)}, expected {len(tableau)}")
        )
        acc.leaves.append(LeafResult(path, None, False))
        return
    cert = mk_certificate(tableau, lower, upper, w)
    if all(c == 0 for c in cert.combined.coeffs) and cert.constant < 0:
        acc.leaves.append(LeafResult(path, cert.constant, True))
        return
    if allow_empty_box and any(lo > hi for lo, hi in zip(lower, upper)):
        acc.leaves.append(LeafResult(path, cert.constant, True, empty_box=True))
        acc.empty.append(path)
        return
    acc.failures.append(
        Failure(path, BAD_CONTRADICTION, f"certificate constant {format_rational(cert.constant)} is not negative")
    )
    acc.leaves.append(LeafResult(path, cert.constant, False))


def _check_node(node: Node, constraints, n: int, path: Path, acc: _Acc) -> bool:
    """Record split failures at ``node``; False if its children cannot be checked."""
    split = node.split
    if any(not 0 <= i < n for i in split.indices()):
        acc.failures.append(Failure(path, DIMENSION_ERROR, f"split index out of range for n={n}: {split}"))
        return False
    if isinstance(split, ReluSplit) and len(set(split.indices())) != 3:
        acc.failures.append(Failure(path, UNKNOWN_SPLIT, f"ReLU split indices not distinct: {split.indices()}"))
        return True
    if not check_split(split, constraints):
        acc.failures.append(Failure(path, UNKNOWN_SPLIT, f"no ReLU constraint {split.indices()} in the query"))
    return True


def _check_subtree(tableau, constraints, lower, upper, tree, path, allow_empty_box) -> _Acc:
    acc = _Acc()
    n = len(lower)
    stack = [(tree, path, lower, upper)]
    while stack:
        t, p, lo, hi = stack.pop()
        if isinstance(t, Leaf):
            _check_leaf(tableau, lo, hi, t, p, allow_empty_box, acc)
            continue
        if not _check_node(t, constraints, n, p, acc):
            continue
        (lo_l, hi_l), (lo_r, hi_r) = update_bounds(lo, hi, t.split)
        stack.append((t.right, p + ("R",), lo_r, hi_r))
        stack.append((t.left, p + ("L",), lo_l, hi_l))
    return acc


_worker_ctx: dict = {}


def _init_worker(tableau, constraints, allow_empty_box):
    _worker_ctx.update(tableau=tableau, constraints=constraints, allow_empty_box=allow_empty_box)


def _run_task(task):
    tree, path, lower, upper = task
    c = _worker_ctx
    return _check_subtree(c["tableau"], c["constraints"], lower, upper, tree, path, c["allow_empty_box"])


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
    return os.cpu_count() or 1


def _frontier(tableau, constraints, q_lower, q_upper, tree, target: int, acc: _Acc):
    """Expand the top of the tree breadth-first until ``target`` subtrees are open."""
    n = len(q_lower)
    open_ = [(tree, (), q_lower, q_upper)]
    while len(open_) < target:
        expandable = [item for item in open_ if isinstance(item[0], Node)]
        if not expandable:
            break
        nxt = []
        for t, p, lo, hi in open_:
            if not isinstance(t, Node):
                nxt.append((t, p, lo, hi))
                continue
            if not _check_node(t, constraints, n, p, acc):
                continue
            (lo_l, hi_l), (lo_r, hi_r) = update_bounds(lo, hi, t.split)
            nxt.append((t.left, p + ("L",), lo_l, hi_l))
            nxt.append((t.right, p + ("R",), lo_r, hi_r))
        open_ = nxt
    return open_


def check_tree(
    q: VerificationQuery,
    tree: ProofTree,
    *,
    allow_empty_box: bool = False,
    workers: int | None = None,
    sequential: bool = False,
) -> CheckReport:
    """Check every node of ``tree`` against ``q`` and report all failing paths.

    Sibling subtrees are checked in worker processes unless ``sequential`` is
    set, ``workers == 1``, or the tree is small.  Failures are ordered by
    path (pre-order), so the report does not depend on scheduling.
    """
    require_well_formed(q)
    tableau, constraints = q.tableau, q.constraints
    if workers is None:
        workers = default_workers()
    acc = _Acc()
    if sequential or workers <= 1 or size(tree) < _PARALLEL_MIN_NODES:
        acc.extend(_check_subtree(tableau, constraints, q.lower, q.upper, tree, (), allow_empty_box))
    else:
        tasks = _frontier(tableau, constraints, q.lower, q.upper, tree, 4 * workers, acc)
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(tableau, constraints, allow_empty_box)
        ) as pool:
            for part in pool.map(_run_task, tasks):
                acc.extend(part)
    return CheckReport(
        tuple(sorted(acc.failures, key=lambda f: f.path)),
        tuple(sorted(acc.leaves, key=lambda lr: lr.path)),
        tuple(sorted(acc.empty)),
    )
