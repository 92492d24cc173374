"""Recursive-descent parser for the LTL surface syntax.

Grammar (precedence high to low): unary (! X F G), U/R (right
associative), &, |. Atoms match [a-z][a-z0-9_]*; `true` and `false`
are keywords.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from .formula import (
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
)


class LTLSyntaxError(ValueError):
    """Malformed formula text; carries the byte offset and expected tokens."""

    def __init__(self, offset: int, expected: List[str], found: str):
        self.offset = offset
        self.expected = sorted(expected)
        self.found = found
        super().__init__(
            f"syntax error at offset {offset}: expected one of "
            f"{self.expected}, found {found!r}"
        )


@dataclass
class _Token:
    kind: str  # 'atom', 'op', 'lparen', 'rparen', 'eof'
    text: str
    offset: int


_TOKEN_RE = re.compile(r"\s*(?:(?P<atom>[a-z][a-z0-9_]*)|(?P<op>[!&|()XFGUR]))")


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise LTLSyntaxError(bad_at, ["atom", "operator", "("], stripped[0])
        if m.group("atom") is not None:
            tokens.append(_Token("atom", m.group("atom"), m.start("atom")))
        else:
            op = m.group("op")
            kind = {"(": "lparen", ")": "rparen"}.get(op, "op")
            tokens.append(_Token(kind, op, m.start("op")))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: List[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, expected: List[str]) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise LTLSyntaxError(tok.offset, expected, tok.text or "<end>")
        return self.advance()

    # or_expr := and_expr ('|' and_expr)*
    def parse_or(self) -> Formula:
        left = self.parse_and()
        while self.peek().kind == "op" and self.peek().text == "|":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    # and_expr := until_expr ('&' until_expr)*
    def parse_and(self) -> Formula:
        left = self.parse_until()
        while self.peek().kind == "op" and self.peek().text == "&":
            self.advance()
            left = And(left, self.parse_until())
        return left

    # until_expr := unary (('U'|'R') until_expr)?   right assoc
    def parse_until(self) -> Formula:
        left = self.parse_unary()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("U", "R"):
            self.advance()
            right = self.parse_until()
            return Until(left, right) if tok.text == "U" else Release(left, right)
        return left

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("!", "X", "F", "G"):
            self.advance()
            child = self.parse_unary()
            ctor = {"!": Not, "X": Next, "F": Eventually, "G": Always}[tok.text]
            return ctor(child)
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "atom":
            self.advance()
            if tok.text == "true":
                return TrueF()
            if tok.text == "false":
                return FalseF()
            return Atom(tok.text)
        if tok.kind == "lparen":
            self.advance()
            inner = self.parse_or()
            self.expect("rparen", [")"])
            return inner
        raise LTLSyntaxError(
            tok.offset, ["atom", "!", "X", "F", "G", "("], tok.text or "<end>"
        )


def parse_formula(text: str) -> Formula:
    """Parse LTL text into a Formula AST.

    Raises LTLSyntaxError with a byte offset and the expected-token set
    on malformed input.
    """
    parser = _Parser(_tokenize(text))
    f = parser.parse_or()
    tok = parser.peek()
    if tok.kind != "eof":
        raise LTLSyntaxError(tok.offset, ["&", "|", "U", "R", "<end>"], tok.text)
    return f
