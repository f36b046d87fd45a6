"""DNN verification queries: tableau, bounds and ReLU constraints.

A query over ``n`` variables asks for an assignment ``s`` with ``A s = 0``,
``lower <= s <= upper`` and, for every ReLU triple ``(b, f, aux)``,
``s[f] = max(s[b], 0)`` and ``s[f] - s[b] - s[aux] = 0``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .arith import (
    DimensionError,
    LinPoly,
    ParseError,
    format_rational,
    poly_eval,
    rational_vector,
)


class QueryError(ValueError):
    """Raised when an operation needs a well-formed query and did not get one."""


@dataclass(frozen=True)
class ReluConstraint:
    b: int
    f: int
    aux: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.b, self.f, self.aux)


@dataclass(frozen=True)
class Violation:
    where: str
    reason: str

    def __str__(self):
        return f"{self.where}: {self.reason}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class VerificationQuery:
    tableau: tuple[tuple[Fraction, ...], ...]
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction, ...]
    constraints: tuple[ReluConstraint, ...] = ()
    var_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tableau", tuple(tuple(Fraction(a) for a in row) for row in self.tableau))
        object.__setattr__(self, "lower", tuple(Fraction(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(Fraction(v) for v in self.upper))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.var_names is not None:
            object.__setattr__(self, "var_names", tuple(self.var_names))

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def m(self) -> int:
        return len(self.tableau)

    def with_bounds(self, lower, upper) -> VerificationQuery:
        return VerificationQuery(self.tableau, lower, upper, self.constraints, self.var_names)

    def name(self, i: int) -> str:
        if self.var_names is not None and 0 <= i < len(self.var_names):
            return self.var_names[i]
        return f"x{i}"


@dataclass(frozen=True)
class PolySystem:
    """Equalities (each ``= 0``) and inequalities (each ``>= 0``)."""

    equalities: tuple[LinPoly, ...]
    inequalities: tuple[LinPoly, ...]

    def satisfied_by(self, point: Sequence[Fraction]) -> bool:
        return all(poly_eval(p, point) == 0 for p in self.equalities) and all(
            poly_eval(q, point) >= 0 for q in self.inequalities
        )


def well_formed(q: VerificationQuery) -> ValidationResult:
    """Collect every structural violation of ``q``; an empty list means ok.

    Bounds with ``lower[i] > upper[i]`` are legal here: splits produce them.
    Constraints sharing a ``b`` or ``f`` index only raise a warning.
    """
    n = len(q.lower)
    out = []
    notes = []
    if len(q.upper) != n:
        out.append(Violation("bounds", f"lower has {n} entries, upper has {len(q.upper)}"))
    for r, row in enumerate(q.tableau):
        if len(row) != n:
            out.append(Violation(f"row {r}", f"length {len(row)}, expected {n}"))
    if q.var_names is not None and len(q.var_names) != n:
        out.append(Violation("var_names", f"{len(q.var_names)} names for {n} variables"))
    seen_aux: dict[int, int] = {}
    seen_b: dict[int, int] = {}
    seen_f: dict[int, int] = {}
    for k, c in enumerate(q.constraints):
        where = f"constraint {k}"
        idx = c.as_tuple()
        if any(not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < n for i in idx):
            out.append(Violation(where, f"index out of range in {idx} for n={n}"))
            continue
        if len(set(idx)) != 3:
            out.append(Violation(where, f"indices not distinct: {idx}"))
            continue
        if c.aux in seen_aux:
            out.append(Violation(where, f"aux index {c.aux} already used by constraint {seen_aux[c.aux]}"))
        seen_aux.setdefault(c.aux, k)
        if c.b in seen_b:
            notes.append(f"{where}: b index {c.b} shared with constraint {seen_b[c.b]}")
        seen_b.setdefault(c.b, k)
        if c.f in seen_f:
            notes.append(f"{where}: f index {c.f} shared with constraint {seen_f[c.f]}")
        seen_f.setdefault(c.f, k)
    return ValidationResult(tuple(out), tuple(notes))


def require_well_formed(q: VerificationQuery) -> None:
    result = well_formed(q)
    if not result.ok:
        raise QueryError("ill-formed query: " + "; ".join(map(str, result.violations)))
    for note in result.warnings:
        warnings.warn(note, stacklevel=3)


def row_residuals(tableau, s) -> list[Fraction]:
    return [sum((a * v for a, v in zip(row, s) if a), Fraction(0)) for row in tableau]


def satisfies_linear(q: VerificationQuery, s: Sequence[Fraction]) -> bool:
    """``A s = 0`` and ``lower <= s <= upper``; ReLU constraints ignored."""
    if len(s) != q.n:
        raise DimensionError(f"assignment has {len(s)} entries, query has {q.n} variables")
    if any(r != 0 for r in row_residuals(q.tableau, s)):
        return False
    return all(lo <= v <= hi for lo, v, hi in zip(q.lower, s, q.upper))


def satisfies_relu(c: ReluConstraint, s: Sequence[Fraction]) -> bool:
    return s[c.f] == max(s[c.b], 0) and s[c.f] - s[c.b] - s[c.aux] == 0


def satisfies_query(q: VerificationQuery, s: Sequence) -> bool:
    s = [Fraction(v) for v in s]
    return satisfies_linear(q, s) and all(satisfies_relu(c, s) for c in q.constraints)


def bound_polynomials(lower, upper) -> tuple[list[LinPoly], list[LinPoly]]:
    """Upper-bound polys ``u_j - x_j`` and lower-bound polys ``x_k - l_k``."""
    n = len(lower)
    uppers = [LinPoly.variable(n, j, -1, upper[j]) for j in range(n)]
    lowers = [LinPoly.variable(n, k, 1, -lower[k]) for k in range(n)]
    return uppers, lowers


def row_polynomials(tableau) -> list[LinPoly]:
    return [LinPoly(Fraction(0), row) for row in tableau]


def tableau_to_polynomials(q: VerificationQuery) -> PolySystem:
    """Rows as equalities, then upper-bound then lower-bound inequalities."""
    require_well_formed(q)
    uppers, lowers = bound_polynomials(q.lower, q.upper)
    return PolySystem(tuple(row_polynomials(q.tableau)), tuple(uppers + lowers))


# -- JSON -------------------------------------------------------------------


def query_from_dict(doc: dict) -> VerificationQuery:
    if not isinstance(doc, dict):
        raise ParseError("query document must be a JSON object")
    for key in ("tableau", "lower", "upper"):
        if key not in doc:
            raise ParseError(f"query document is missing {key!r}")
    try:
        tableau = [rational_vector(row) for row in doc["tableau"]]
    except ParseError as exc:
        raise ParseError(f"tableau: {exc}") from None
    try:
        lower = rational_vector(doc["lower"])
    except ParseError as exc:
        raise ParseError(f"lower: {exc}") from None
    try:
        upper = rational_vector(doc["upper"])
    except ParseError as exc:
        raise ParseError(f"upper: {exc}") from None
    constraints = []
    for k, c in enumerate(doc.get("relu_constraints", [])):
        try:
            constraints.append(ReluConstraint(int(c["b"]), int(c["f"]), int(c["aux"])))
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"relu_constraints[{k}]: expected {{b, f, aux}} integers, got {c!r}") from None
    names = doc.get("var_names")
    return VerificationQuery(tableau, lower, upper, constraints, tuple(names) if names is not None else None)


def query_to_dict(q: VerificationQuery) -> dict:
    doc = {
        "tableau": [[format_rational(a) for a in row] for row in q.tableau],
        "lower": [format_rational(v) for v in q.lower],
        "upper": [format_rational(v) for v in q.upper],
        "relu_constraints": [{"b": c.b, "f": c.f, "aux": c.aux} for c in q.constraints],
    }
    if q.var_names is not None:
        doc["var_names"] = list(q.var_names)
    return doc


def load_query(text: str | bytes) -> VerificationQuery:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"query: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return query_from_dict(doc)


def dump_query(q: VerificationQuery) -> str:
    return json.dumps(query_to_dict(q), indent=2) + "\n"
