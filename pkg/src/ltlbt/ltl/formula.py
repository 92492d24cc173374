"""LTL formula AST, printing, and negation normal form."""
from __future__ import annotations

import re
from dataclasses import dataclass

ATOM_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


class Formula:
    """Base class for LTL formulas. Instances are immutable and hashable."""

    def __str__(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self})"


@dataclass(frozen=True)
class TrueF(Formula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseF(Formula):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not ATOM_RE.match(self.name):
            raise ValueError(f"bad atom name: {self.name!r}")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(Formula):
    child: Formula

    def __str__(self):
        return f"!{_paren(self.child)}"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Next(Formula):
    child: Formula

    def __str__(self):
        return f"X {_paren(self.child)}"


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} U {self.right})"


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left} R {self.right})"


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula

    def __str__(self):
        return f"F {_paren(self.child)}"


@dataclass(frozen=True)
class Always(Formula):
    child: Formula

    def __str__(self):
        return f"G {_paren(self.child)}"


def _paren(f: Formula) -> str:
    if isinstance(f, (Atom, TrueF, FalseF, Not)):
        return str(f)
    return f"({f})"


def atoms_of(f: Formula) -> frozenset:
    """All atom names occurring in f."""
    if isinstance(f, Atom):
        return frozenset([f.name])
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, (Not, Next, Eventually, Always)):
        return atoms_of(f.child)
    return atoms_of(f.left) | atoms_of(f.right)


def to_nnf(f: Formula) -> Formula:
    """Push negations to the atoms and desugar F/G into U/R.

    The result is semantically equivalent; Not appears only directly
    above Atom.
    """
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Next):
        return Next(to_nnf(f.child))
    if isinstance(f, Until):
        return Until(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Release):
        return Release(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Eventually):
        return Until(TrueF(), to_nnf(f.child))
    if isinstance(f, Always):
        return Release(FalseF(), to_nnf(f.child))
    if isinstance(f, Not):
        g = f.child
        if isinstance(g, TrueF):
            return FalseF()
        if isinstance(g, FalseF):
            return TrueF()
        if isinstance(g, Atom):
            return f
        if isinstance(g, Not):
            return to_nnf(g.child)
        if isinstance(g, And):
            return Or(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Or):
            return And(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Next):
            return Next(to_nnf(Not(g.child)))
        if isinstance(g, Until):
            return Release(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Release):
            return Until(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
        if isinstance(g, Eventually):
            return Release(FalseF(), to_nnf(Not(g.child)))
        if isinstance(g, Always):
            return Until(TrueF(), to_nnf(Not(g.child)))
    raise TypeError(f"unknown formula node: {f!r}")


def is_nnf(f: Formula) -> bool:
    if isinstance(f, (TrueF, FalseF, Atom)):
        return True
    if isinstance(f, Not):
        return isinstance(f.child, Atom)
    if isinstance(f, (Eventually, Always)):
        return False
    if isinstance(f, Next):
        return is_nnf(f.child)
    return is_nnf(f.left) and is_nnf(f.right)
