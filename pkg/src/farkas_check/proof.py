"""Proof trees and their JSON encoding.

Leaf::

    {"type": "leaf", "contradiction": [rational, ...], "bound_lemmas": [...]}

Node::

    {"type": "node",
     "split": {"kind": "relu", "b": int, "f": int, "aux": int}
            | {"kind": "single_var", "index": int, "value": rational},
     "left": ..., "right": ..., "bound_lemmas": [...]}

``bound_lemmas`` is optional, accepted and dropped.  For ReLU splits the left
child is the inactive phase; for single-variable splits the left child is the
branch whose upper bound was lowered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .arith import ParseError, format_rational, to_rational


@dataclass(frozen=True)
class ReluSplit:
    b: int
    f: int
    aux: int

    def indices(self) -> tuple[int, ...]:
        return (self.b, self.f, self.aux)


@dataclass(frozen=True)
class SingleVarSplit:
    index: int
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))

    def indices(self) -> tuple[int, ...]:
        return (self.index,)


Split = Union[ReluSplit, SingleVarSplit]


@dataclass(frozen=True)
class Leaf:
    contradiction: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "contradiction", tuple(Fraction(v) for v in self.contradiction))


@dataclass(frozen=True)
class Node:
    split: Split
    left: "ProofTree"
    right: "ProofTree"


ProofTree = Union[Leaf, Node]


def iter_nodes(tree: ProofTree) -> Iterator[tuple[tuple[str, ...], ProofTree]]:
    """Pre-order walk yielding ``(path, subtree)``; left before right."""
    stack: list[tuple[tuple[str, ...], ProofTree]] = [((), tree)]
    while stack:
        path, t = stack.pop()
        yield path, t
        if isinstance(t, Node):
            stack.append((path + ("R",), t.right))
            stack.append((path + ("L",), t.left))


def count_leaves(tree: ProofTree) -> int:
    return sum(1 for _, t in iter_nodes(tree) if isinstance(t, Leaf))


def count_internal(tree: ProofTree) -> int:
    return sum(1 for _, t in iter_nodes(tree) if isinstance(t, Node))


def depth(tree: ProofTree) -> int:
    return max(len(p) for p, _ in iter_nodes(tree))


def size(tree: ProofTree) -> int:
    return sum(1 for _ in iter_nodes(tree))


def subtree_at(tree: ProofTree, path) -> ProofTree:
    for step in path:
        if not isinstance(tree, Node):
            raise KeyError(f"path {''.join(path)} runs past a leaf")
        tree = tree.left if step == "L" else tree.right
    return tree


def replace_at(tree: ProofTree, path, new: ProofTree) -> ProofTree:
    if not path:
        return new
    assert isinstance(tree, Node)
    if path[0] == "L":
        return Node(tree.split, replace_at(tree.left, path[1:], new), tree.right)
    return Node(tree.split, tree.left, replace_at(tree.right, path[1:], new))


# -- decoding -----------------------------------------------------------------


def _where(path: str) -> str:
    return path or "$"


def _index(doc: dict, key: str, path: str) -> int:
    v = doc.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ParseError(f"{_where(path)}.split.{key}: expected an integer index, got {v!r}")
    if v < 0:
        raise ParseError(f"{_where(path)}.split.{key}: negative index {v}")
    return v


def _split_from(doc, path: str) -> Split:
    if not isinstance(doc, dict):
        raise ParseError(f"{_where(path)}.split: expected an object")
    kind = doc.get("kind")
    if kind == "relu":
        return ReluSplit(_index(doc, "b", path), _index(doc, "f", path), _index(doc, "aux", path))
    if kind == "single_var":
        try:
            value = to_rational(doc.get("value"))
        except ParseError as exc:
            raise ParseError(f"{_where(path)}.split.value: {exc}") from None
        return SingleVarSplit(_index(doc, "index", path), value)
    raise ParseError(f"{_where(path)}.split: unknown split kind {kind!r}")


def proof_from_dict(doc, expected_rows: int | None = None, path: str = "") -> ProofTree:
    if not isinstance(doc, dict):
        raise ParseError(f"{_where(path)}: expected a proof-tree object")
    kind = doc.get("type")
    lemmas = doc.get("bound_lemmas", [])
    if not isinstance(lemmas, list):
        raise ParseError(f"{_where(path)}.bound_lemmas: expected an array")
    if kind == "leaf":
        raw = doc.get("contradiction")
        if not isinstance(raw, list):
            raise ParseError(f"{_where(path)}.contradiction: expected an array")
        if expected_rows is not None and len(raw) != expected_rows:
            raise ParseError(f"{_where(path)}: leaf vector length {len(raw)}, expected {expected_rows}")
        values = []
        for k, v in enumerate(raw):
            try:
                values.append(to_rational(v))
            except ParseError as exc:
                raise ParseError(f"{_where(path)}.contradiction[{k}]: {exc}") from None
        return Leaf(tuple(values))
    if kind == "node":
        split = _split_from(doc.get("split"), path)
        for side in ("left", "right"):
            if side not in doc:
                raise ParseError(f"{_where(path)}: node is missing its {side!r} child")
        return Node(
            split,
            proof_from_dict(doc["left"], expected_rows, f"{_where(path)}.left"),
            proof_from_dict(doc["right"], expected_rows, f"{_where(path)}.right"),
        )
    raise ParseError(f"{_where(path)}: unknown node type {kind!r}")


def parse_proof(text: str | bytes, expected_rows: int | None = None) -> ProofTree:
    """Decode a proof document, checking every leaf has ``expected_rows`` entries."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"proof: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except RecursionError:
        raise ParseError("proof: document nested too deeply") from None
    return proof_from_dict(doc, expected_rows)


# -- encoding -----------------------------------------------------------------


def split_to_dict(split: Split) -> dict:
    if isinstance(split, ReluSplit):
        return {"kind": "relu", "b": split.b, "f": split.f, "aux": split.aux}
    return {"kind": "single_var", "index": split.index, "value": format_rational(split.value)}


def proof_to_dict(tree: ProofTree) -> dict:
    if isinstance(tree, Leaf):
        return {"type": "leaf", "contradiction": [format_rational(v) for v in tree.contradiction]}
    return {
        "type": "node",
        "split": split_to_dict(tree.split),
        "left": proof_to_dict(tree.left),
        "right": proof_to_dict(tree.right),
    }


def serialize_proof(tree: ProofTree) -> bytes:
    return json.dumps(proof_to_dict(tree), separators=(",", ":")).encode()
