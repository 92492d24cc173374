"""Finite lasso representation of infinite words, plus two independent
acceptance oracles: automaton-based (accepts_lasso) and semantic
(formula_holds_on_lasso). They share nothing but the LassoWord type, so
agreement between them cross-checks the tableau construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Tuple

from .buchi import BuchiAutomaton
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


@dataclass(frozen=True)
class LassoWord:
    """Infinite word prefix . cycle^omega over atom-set letters."""

    prefix: Tuple[FrozenSet[str], ...]
    cycle: Tuple[FrozenSet[str], ...]

    def __post_init__(self):
        if len(self.cycle) < 1:
            raise ValueError("cycle must be nonempty")

    @staticmethod
    def of(prefix, cycle) -> "LassoWord":
        return LassoWord(
            tuple(frozenset(a) for a in prefix),
            tuple(frozenset(a) for a in cycle),
        )

    @property
    def positions(self) -> int:
        return len(self.prefix) + len(self.cycle)

    def letter(self, i: int) -> FrozenSet[str]:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.cycle[(i - len(self.prefix)) % len(self.cycle)]

    def next_pos(self, i: int) -> int:
        """Successor in the folded position graph."""
        return i + 1 if i + 1 < self.positions else len(self.prefix)


def accepts_lasso(ba: BuchiAutomaton, w: LassoWord) -> bool:
    """True iff some run of ba over w^omega visits acceptance infinitely
    often, decided by cycle search in the product of ba with the lasso's
    position graph."""
    n = w.positions
    # product edges: (q, i) -> (q', next(i)) where guard satisfied by letter(i)
    def successors(q, i):
        letter = w.letter(i)
        ni = w.next_pos(i)
        return [(e.dst, ni) for e in ba.edges_from(q) if e.satisfied_by(letter)]

    start = (ba.initial, 0)
    reach = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nxt in successors(*node):
            if nxt not in reach:
                reach.add(nxt)
                stack.append(nxt)

    cycle_start = len(w.prefix)
    candidates = [
        (q, i) for (q, i) in reach if q in ba.accepting and i >= cycle_start
    ]
    for cand in candidates:
        # accepting product node on a cycle?
        seen = set()
        stack = successors(*cand)
        while stack:
            node = stack.pop()
            if node == cand:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(successors(*node))
    return False


def formula_holds_on_lasso(f: Formula, w: LassoWord) -> bool:
    """Standard LTL semantics evaluated directly on the lasso.

    Until/Eventually are least fixpoints and Release/Always greatest
    fixpoints over the folded position set; boolean and Next cases are
    memoized per (subformula, position).
    """
    n = w.positions

    memo: Dict[Tuple[int, Formula], bool] = {}

    def ev(f: Formula, i: int) -> bool:
        key = (i, f)
        if key in memo:
            return memo[key]
        if isinstance(f, TrueF):
            v = True
        elif isinstance(f, FalseF):
            v = False
        elif isinstance(f, Atom):
            v = f.name in w.letter(i)
        elif isinstance(f, Not):
            v = not ev(f.child, i)
        elif isinstance(f, And):
            v = ev(f.left, i) and ev(f.right, i)
        elif isinstance(f, Or):
            v = ev(f.left, i) or ev(f.right, i)
        elif isinstance(f, Next):
            v = ev(f.child, w.next_pos(i))
        elif isinstance(f, (Until, Eventually, Release, Always)):
            vals = _fixpoint(f, least=isinstance(f, (Until, Eventually)))
            for j in range(n):
                memo[(j, f)] = vals[j]
            v = vals[i]
        else:
            raise TypeError(f"unknown formula node: {f!r}")
        memo[key] = v
        return v

    def _fixpoint(f: Formula, least: bool) -> List[bool]:
        if isinstance(f, Eventually):
            hold, cont = f.child, TrueF()
        elif isinstance(f, Always):
            hold, cont = f.child, None  # G: greatest fixpoint of child & X self
        elif isinstance(f, Until):
            hold, cont = f.right, f.left
        else:  # Release
            hold, cont = f.right, f.left

        vals = [not least] * n
        changed = True
        while changed:
            changed = False
            for i in range(n - 1, -1, -1):
                nxt = vals[w.next_pos(i)]
                if least:  # U: right now, or (left now and U next)
                    v = ev(hold, i) or (ev(cont, i) and nxt)
                elif isinstance(f, Always):
                    v = ev(hold, i) and nxt
                else:  # R: right now and (left now or R next)
                    v = ev(hold, i) and (ev(cont, i) or nxt)
                if v != vals[i]:
                    vals[i] = v
                    changed = True
        return vals

    return ev(f, 0)
