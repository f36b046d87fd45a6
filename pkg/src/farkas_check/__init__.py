"""Exact-arithmetic proof checking for ReLU network verification queries."""

from .arith import LinPoly, ParseError, format_rational, parse_rational
from .checker import CheckReport, check_tree, mk_certificate, update_bounds
from .network import compile_query, eval_network, load_network, load_property
from .oracle import oracle_decide
from .proof import Leaf, Node, ReluSplit, SingleVarSplit, parse_proof, serialize_proof
from .prover import simplex_solve, solve_query
from .query import ReluConstraint, VerificationQuery, load_query, satisfies_query, well_formed

__all__ = [
    "CheckReport",
    "Leaf",
    "LinPoly",
    "Node",
    "ParseError",
    "ReluConstraint",
    "ReluSplit",
    "SingleVarSplit",
    "VerificationQuery",
    "check_tree",
    "compile_query",
    "eval_network",
    "format_rational",
    "load_network",
    "load_property",
    "load_query",
    "mk_certificate",
    "oracle_decide",
    "parse_proof",
    "parse_rational",
    "satisfies_query",
    "serialize_proof",
    "simplex_solve",
    "solve_query",
    "update_bounds",
    "well_formed",
]
