"""A small certificate-producing verifier.

:func:`simplex_solve` decides ``A x = 0, l <= x <= u`` over the rationals and
returns either an assignment or a contradiction vector ``w``.
:func:`solve_query` adds ReLU case splitting on top and assembles the proof
tree that the checker consumes.

The simplex is the general (bounded-variable) form: one slack ``s_i = A_i x``
per row, fixed to ``[0, 0]``, basic at the start.  Both the leaving and the
entering variable are chosen by smallest index (Bland), which rules out
cycling.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .arith import DimensionError
from .checker import mk_certificate, update_bounds
from .proof import Leaf, Node, ProofTree, ReluSplit
from .query import VerificationQuery, require_well_formed, satisfies_query, satisfies_relu

log = logging.getLogger(__name__)

# 2**k point boxes are tried for k empty coordinates
MAX_EMPTY_COORDS = 12


class ProverError(RuntimeError):
    pass


class DepthLimitExceeded(ProverError):
    pass


class UncertifiableBox(ProverError):
    """The box is empty but no contradiction vector can witness it."""


@dataclass(frozen=True)
class LinearSat:
    assignment: tuple[Fraction, ...]


@dataclass(frozen=True)
class LinearUnsat:
    w: tuple[Fraction, ...]


LinearOutcome = Union[LinearSat, LinearUnsat]


@dataclass(frozen=True)
class Sat:
    assignment: tuple[Fraction, ...]


@dataclass(frozen=True)
class Unsat:
    proof: ProofTree


SolveOutcome = Union[Sat, Unsat]


class _Simplex:
    def __init__(self, tableau, lower, upper):
        self.m = len(tableau)
        self.n = len(lower)
        n, m = self.n, self.m
        self.lo = list(lower) + [Fraction(0)] * m
        self.hi = list(upper) + [Fraction(0)] * m
        # basic var -> {nonbasic var: coeff}, basic = sum(coeff * nonbasic)
        self.rows: dict[int, dict[int, Fraction]] = {}
        # nonbasic var -> basic vars whose row mentions it
        self.cols: dict[int, set[int]] = {j: set() for j in range(n)}
        self.val = [Fraction(0)] * (n + m)
        for j in range(n):
            self.val[j] = self.lo[j]
        for i, row in enumerate(tableau):
            r = n + i
            self.rows[r] = {j: Fraction(a) for j, a in enumerate(row) if a}
            for j in self.rows[r]:
                self.cols[j].add(r)
            self.val[r] = sum((a * self.val[j] for j, a in self.rows[r].items()), Fraction(0))

    def _update(self, j: int, delta: Fraction):
        self.val[j] += delta
        for r in self.cols[j]:
            self.val[r] += self.rows[r][j] * delta

    def _pivot(self, r: int, j: int):
        row = self.rows.pop(r)
        a = row.pop(j)
        users = self.cols.pop(j)
        users.discard(r)
        for k in row:
            self.cols[k].discard(r)
        # j = (1/a) r - sum(row[k]/a * k)
        new = {k: -c / a for k, c in row.items()}
        new[r] = 1 / a
        self.cols[r] = set()
        for i in users:
            ri = self.rows[i]
            c = ri.pop(j)
            for k, d in new.items():
                v = ri.get(k, Fraction(0)) + c * d
                if v:
                    ri[k] = v
                    self.cols[k].add(i)
                else:
                    ri.pop(k, None)
                    self.cols[k].discard(i)
        self.rows[j] = new
        for k in new:
            self.cols[k].add(j)

    def run(self):
        while True:
            r = None
            for b in sorted(self.rows):
                if self.val[b] < self.lo[b] or self.val[b] > self.hi[b]:
                    r = b
                    break
            if r is None:
                return None
            row = self.rows[r]
            below = self.val[r] < self.lo[r]
            entering = None
            for j in sorted(row):
                a = row[j]
                up = self.val[j] < self.hi[j]
                down = self.val[j] > self.lo[j]
                if below and ((a > 0 and up) or (a < 0 and down)):
                    entering = j
                    break
                if not below and ((a < 0 and up) or (a > 0 and down)):
                    entering = j
                    break
            if entering is None:
                return r
            target = self.lo[r] if below else self.hi[r]
            theta = (target - self.val[r]) / row[entering]
            self._update(entering, theta)
            self._pivot(r, entering)

    def conflict_vector(self, r: int) -> list[Fraction]:
        """Slack coefficients of the conflict row written as ``r - sum(...) = 0``."""
        w = [Fraction(0)] * self.m
        if r >= self.n:
            w[r - self.n] += 1
        for k, a in self.rows[r].items():
            if k >= self.n:
                w[k - self.n] -= a
        return w


def _simplex_box(tableau, lower, upper) -> LinearOutcome:
    sx = _Simplex(tableau, lower, upper)
    r = sx.run()
    if r is None:
        return LinearSat(tuple(sx.val[: sx.n]))
    w = sx.conflict_vector(r)
    if not mk_certificate(tableau, lower, upper, w).valid:
        w = [-v for v in w]
    cert = mk_certificate(tableau, lower, upper, w)
    if not cert.valid:
        raise AssertionError(f"simplex conflict row gave no certificate (constant {cert.constant})")
    return LinearUnsat(tuple(w))


def simplex_solve(tableau, lower, upper) -> LinearOutcome:
    """Decide ``A x = 0, lower <= x <= upper`` exactly.

    Empty coordinates (``lower[i] > upper[i]``) cannot be fed to the simplex.
    Collapsing each to one endpoint of ``[upper[i], lower[i]]`` only raises the
    certificate constant, so a contradiction vector for any such point box is
    also one for the empty box; if every point box is feasible no vector
    exists and :class:`UncertifiableBox` is raised.
    """
    n = len(lower)
    if len(upper) != n:
        raise DimensionError(f"lower has {n} entries, upper has {len(upper)}")
    for r, row in enumerate(tableau):
        if len(row) != n:
            raise DimensionError(f"tableau row {r} has length {len(row)}, expected {n}")
    lower = [Fraction(v) for v in lower]
    upper = [Fraction(v) for v in upper]
    empty = [i for i in range(n) if lower[i] > upper[i]]
    if not empty:
        return _simplex_box(tableau, lower, upper)
    if len(empty) > MAX_EMPTY_COORDS:
        raise UncertifiableBox(f"{len(empty)} empty coordinates, at most {MAX_EMPTY_COORDS} supported")
    for choice in itertools.product((0, 1), repeat=len(empty)):
        lo, hi = list(lower), list(upper)
        for i, c in zip(empty, choice):
            lo[i] = hi[i] = upper[i] if c == 0 else lower[i]
        out = _simplex_box(tableau, lo, hi)
        if isinstance(out, LinearUnsat) and mk_certificate(tableau, lower, upper, out.w).valid:
            return out
    raise UncertifiableBox(f"empty box on variables {empty} has no contradiction vector")


def solve_query(q: VerificationQuery, depth_limit: int | None = None) -> SolveOutcome:
    """Simplex plus ReLU case splitting; UNSAT answers come with a proof tree.

    The lowest-index violated constraint not yet split on the current path is
    split; the inactive phase becomes the left child.
    """
    require_well_formed(q)
    if depth_limit is None:
        depth_limit = 2 * len(q.constraints)

    def solve(lower, upper, depth: int, used: frozenset) -> SolveOutcome:
        lin = simplex_solve(q.tableau, lower, upper)
        if isinstance(lin, LinearUnsat):
            return Unsat(Leaf(lin.w))
        s = lin.assignment
        violated = [k for k, c in enumerate(q.constraints) if not satisfies_relu(c, s)]
        if not violated:
            if not satisfies_query(q, s):
                raise ProverError("assignment satisfies the split bounds but not the original query bounds")
            return Sat(s)
        fresh = [k for k in violated if k not in used]
        if not fresh:
            raise ProverError(f"constraints {violated} stay violated after their split")
        if depth >= depth_limit:
            raise DepthLimitExceeded(f"split depth limit {depth_limit} exceeded")
        k = fresh[0]
        c = q.constraints[k]
        split = ReluSplit(c.b, c.f, c.aux)
        (lo_l, hi_l), (lo_r, hi_r) = update_bounds(lower, upper, split)
        log.debug("depth %d: split on constraint %d %s", depth, k, c.as_tuple())
        left = solve(lo_l, hi_l, depth + 1, used | {k})
        if isinstance(left, Sat):
            return left
        right = solve(lo_r, hi_r, depth + 1, used | {k})
        if isinstance(right, Sat):
            return right
        return Unsat(Node(split, left.proof, right.proof))

    return solve(q.lower, q.upper, 0, frozenset())
