"""Exact rational scalars and linear polynomials.

Every number in the package is a :class:`fractions.Fraction`; nothing is ever
rounded.  Text input uses a deliberately small syntax::

    [-]digits | [-]digits/digits | [-]digits.digits
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Rational = Fraction

__all__ = [
    "Rational",
    "ParseError",
    "DimensionError",
    "parse_rational",
    "to_rational",
    "format_rational",
    "LinPoly",
    "poly_scale",
    "poly_add",
    "lin_combination",
    "poly_eval",
]

_RATIONAL_RE = re.compile(r"(-?)(\d+)(?:/(\d+)|\.(\d+))?")


class ParseError(ValueError):
    """Malformed input text or document."""


class DimensionError(ValueError):
    """Vector or matrix lengths do not line up."""


def parse_rational(text: str) -> Fraction:
    """Parse ``text`` into an exact rational.

    >>> parse_rational("-4/6")
    Fraction(-2, 3)
    >>> parse_rational("0.1")
    Fraction(1, 10)
    """
    if not isinstance(text, str):
        raise ParseError(f"expected a rational string, got {text!r}")
    m = _RATIONAL_RE.fullmatch(text.strip())
    if m is None:
        raise ParseError(f"malformed rational {text!r}")
    sign, whole, denom, frac = m.groups()
    if denom is not None:
        if int(denom) == 0:
            raise ParseError(f"zero denominator in {text!r}")
        value = Fraction(int(whole), int(denom))
    elif frac is not None:
        value = Fraction(int(whole + frac), 10 ** len(frac))
    else:
        value = Fraction(int(whole))
    return -value if sign else value


def to_rational(value) -> Fraction:
    """Coerce a JSON scalar (string or integer) to a Fraction.

    Floats are refused: a binary float has usually already lost the value the
    author meant to write.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ParseError(f"expected a rational, got boolean {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise ParseError(f"expected a rational string, got {value!r}")


def format_rational(value: Fraction) -> str:
    """Canonical text form, ``"p"`` or ``"p/q"``."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class LinPoly:
    """``constant + sum(coeffs[i] * x[i])`` over a fixed number of variables."""

    constant: Fraction
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "constant", Fraction(self.constant))
        object.__setattr__(self, "coeffs", tuple(Fraction(c) for c in self.coeffs))

    @classmethod
    def zero(cls, n: int) -> LinPoly:
        return cls(Fraction(0), (Fraction(0),) * n)

    @classmethod
    def variable(cls, n: int, index: int, coeff=1, constant=0) -> LinPoly:
        """``constant + coeff * x[index]`` in an ``n``-variable space."""
        coeffs = [Fraction(0)] * n
        coeffs[index] = Fraction(coeff)
        return cls(Fraction(constant), tuple(coeffs))

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def is_constant(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __add__(self, other: LinPoly) -> LinPoly:
        return poly_add(self, other)

    def __neg__(self) -> LinPoly:
        return poly_scale(self, -1)

    def __call__(self, point: Sequence[Fraction]) -> Fraction:
        return poly_eval(self, point)

    def __str__(self) -> str:
        terms = [format_rational(self.constant)]
        for i, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{format_rational(c)}*x{i}")
        return " + ".join(terms)


def poly_scale(p: LinPoly, c) -> LinPoly:
    c = Fraction(c)
    return LinPoly(p.constant * c, tuple(a * c for a in p.coeffs))


def poly_add(p: LinPoly, q: LinPoly) -> LinPoly:
    if p.size != q.size:
        raise DimensionError(f"cannot add polynomials of size {p.size} and {q.size}")
    return LinPoly(p.constant + q.constant, tuple(a + b for a, b in zip(p.coeffs, q.coeffs)))


def lin_combination(polys: Sequence[LinPoly], coeffs: Sequence, n: int | None = None) -> LinPoly:
    """Return ``sum(coeffs[i] * polys[i])``.

    An empty combination is the zero polynomial of size ``n`` (0 if not given).
    """
    if len(polys) != len(coeffs):
        raise DimensionError(f"{len(polys)} polynomials but {len(coeffs)} coefficients")
    if not polys:
        return LinPoly.zero(n or 0)
    size = polys[0].size
    if n is not None and n != size:
        raise DimensionError(f"polynomials have size {size}, expected {n}")
    constant = Fraction(0)
    acc = [Fraction(0)] * size
    for p, c in zip(polys, coeffs):
        if p.size != size:
            raise DimensionError(f"polynomial of size {p.size} in a size-{size} combination")
        c = Fraction(c)
        if not c:
            continue
        constant += c * p.constant
        for i, a in enumerate(p.coeffs):
            if a:
                acc[i] += c * a
    return LinPoly(constant, tuple(acc))


def poly_eval(p: LinPoly, point: Sequence) -> Fraction:
    if len(point) != p.size:
        raise DimensionError(f"point has {len(point)} entries, polynomial has {p.size}")
    return p.constant + sum((a * Fraction(s) for a, s in zip(p.coeffs, point) if a), Fraction(0))


def rational_vector(values: Iterable) -> tuple[Fraction, ...]:
    return tuple(to_rational(v) for v in values)
