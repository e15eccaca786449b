"""Set-formula expression trees and their parser.

Grammar (precedence low to high: `|` < `&` < `!`):

    or_expr   := and_expr ('|' and_expr)*
    and_expr  := unary ('&' unary)*
    unary     := '!' unary | primary
    primary   := '(' or_expr ')' | 'subset' '(' or_expr ',' or_expr ')' | name

A name is either one of the reserved set names (C, C_all, C_sat, C_req,
C_eval, C_pos, C_neg) or a condition-atom identifier. `subset` is reserved.
Binary operators associate to the left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import FormulaError

NAMED_SETS = frozenset({"C", "C_all", "C_sat", "C_req", "C_eval", "C_pos", "C_neg"})


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class SetRef:
    name: str


@dataclass(frozen=True)
class And:
    left: "SetFormula"
    right: "SetFormula"


@dataclass(frozen=True)
class Or:
    left: "SetFormula"
    right: "SetFormula"


@dataclass(frozen=True)
class Not:
    child: "SetFormula"


@dataclass(frozen=True)
class Subset:
    left: "SetFormula"
    right: "SetFormula"


SetFormula = Union[Atom, SetRef, And, Or, Not, Subset]

_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|([&|!(),])|(\S))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            break
        name, punct, bad = m.groups()
        if bad is not None:
            raise FormulaError(f"unexpected character {bad!r}", m.start(3))
        if name is not None:
            tokens.append(("name", name, m.start(1)))
        elif punct is not None:
            tokens.append((punct, punct, m.start(2)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, kind: str) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if tok[0] != kind:
            raise FormulaError(
                f"expected {kind!r}, found {tok[1]!r}" if tok[0] != "end"
                else f"expected {kind!r}, found end of input",
                tok[2],
            )
        self.i += 1
        return tok

    def or_expr(self) -> SetFormula:
        node = self.and_expr()
        while self.peek()[0] == "|":
            self.take("|")
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> SetFormula:
        node = self.unary()
        while self.peek()[0] == "&":
            self.take("&")
            node = And(node, self.unary())
        return node

    def unary(self) -> SetFormula:
        if self.peek()[0] == "!":
            self.take("!")
            return Not(self.unary())
        return self.primary()

    def primary(self) -> SetFormula:
        kind, value, pos = self.peek()
        if kind == "(":
            self.take("(")
            node = self.or_expr()
            self.take(")")
            return node
        if kind == "name":
            self.take("name")
            if value == "subset":
                self.take("(")
                left = self.or_expr()
                self.take(",")
                right = self.or_expr()
                self.take(")")
                return Subset(left, right)
            if value in NAMED_SETS:
                return SetRef(value)
            return Atom(value)
        if kind == "end":
            raise FormulaError("unexpected end of input", pos)
        raise FormulaError(f"unexpected token {value!r}", pos)


def parse_formula(text: str) -> SetFormula:
    """Parse a formula string into its expression tree."""
    parser = _Parser(text)
    node = parser.or_expr()
    kind, value, pos = parser.peek()
    if kind != "end":
        raise FormulaError(f"unexpected token {value!r}", pos)
    return node


def _precedence(node: SetFormula) -> int:
    if isinstance(node, Or):
        return 1
    if isinstance(node, And):
        return 2
    if isinstance(node, Not):
        return 3
    return 4


def pretty_print(node: SetFormula) -> str:
    """Render a tree back to the grammar; parse_formula(pretty_print(t)) == t."""
    if isinstance(node, (Atom, SetRef)):
        return node.name
    if isinstance(node, Subset):
        return f"subset({pretty_print(node.left)}, {pretty_print(node.right)})"
    if isinstance(node, Not):
        child = pretty_print(node.child)
        if _precedence(node.child) < _precedence(node):
            child = f"({child})"
        return f"!{child}"
    op = "&" if isinstance(node, And) else "|"
    mine = _precedence(node)
    left = pretty_print(node.left)
    if _precedence(node.left) < mine:
        left = f"({left})"
    right = pretty_print(node.right)
    # left-associative grammar: parenthesize equal-precedence right children
    if _precedence(node.right) <= mine:
        right = f"({right})"
    return f"{left} {op} {right}"


def iter_atoms(node: SetFormula) -> Iterator[str]:
    """Yield condition-atom names in left-to-right order (with repeats)."""
    if isinstance(node, Atom):
        yield node.name
    elif isinstance(node, SetRef):
        return
    elif isinstance(node, Not):
        yield from iter_atoms(node.child)
    else:
        yield from iter_atoms(node.left)
        yield from iter_atoms(node.right)


def iter_set_refs(node: SetFormula) -> Iterator[str]:
    """Yield referenced named-set names in left-to-right order."""
    if isinstance(node, SetRef):
        yield node.name
    elif isinstance(node, Atom):
        return
    elif isinstance(node, Not):
        yield from iter_set_refs(node.child)
    else:
        yield from iter_set_refs(node.left)
        yield from iter_set_refs(node.right)
