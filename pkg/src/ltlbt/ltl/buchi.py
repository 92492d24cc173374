"""Nondeterministic Buchi automata from LTL via the expand-node tableau.

Construction pipeline: NNF formula -> generalized automaton (one
acceptance set per Until subformula) -> counter degeneralization ->
unreachable-state removal and signature merging -> canonical ids.

Guards are compact literal sets (required-positive, required-negative
atoms) instead of an explicit 2^Pi alphabet.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .formula import (
    And,
    Atom,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    atoms_of,
    is_nnf,
)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    pos: FrozenSet[str]
    neg: FrozenSet[str]

    def satisfied_by(self, letter: FrozenSet[str]) -> bool:
        return self.pos <= letter and not (self.neg & letter)

    def guard_str(self) -> str:
        lits = [f"+{a}" for a in sorted(self.pos)] + [f"-{a}" for a in sorted(self.neg)]
        return ",".join(lits)


@dataclass(frozen=True)
class BuchiAutomaton:
    states: Tuple[str, ...]
    initial: str
    accepting: FrozenSet[str]
    edges: Tuple[Edge, ...]
    atoms: FrozenSet[str]

    def __post_init__(self):
        state_set = set(self.states)
        assert self.initial in state_set
        assert self.accepting <= state_set
        for e in self.edges:
            assert e.src in state_set and e.dst in state_set

    def edges_from(self, src: str) -> List[Edge]:
        return self._by_src().get(src, [])

    def _by_src(self) -> Dict[str, List[Edge]]:
        cached = self.__dict__.get("_by_src_cache")
        if cached is None:
            cached = {}
            for e in self.edges:
                cached.setdefault(e.src, []).append(e)
            object.__setattr__(self, "_by_src_cache", cached)
        return cached

    def successors(self, src: str, letter: FrozenSet[str]) -> List[str]:
        return [e.dst for e in self.edges_from(src) if e.satisfied_by(letter)]

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for q in self.states:
            flags = []
            if q == self.initial:
                flags.append("init")
            if q in self.accepting:
                flags.append("accept")
            lines.append(" ".join(["state", q] + flags))
        for e in sorted(self.edges, key=lambda e: (e.src, e.dst, e.guard_str())):
            lines.append(f"edge {e.src} {e.dst} {e.guard_str()}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph buchi {", "  rankdir=LR;"]
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  "{q}" [shape={shape}];')
        lines.append(f'  __init [shape=point]; __init -> "{self.initial}";')
        for e in self.edges:
            lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.guard_str()}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- tableau nodes -------------------------------------------------------


class _Node:
    __slots__ = ("nid", "incoming", "new", "old", "nxt")

    def __init__(self, nid, incoming, new, old, nxt):
        self.nid = nid
        self.incoming: Set[str] = incoming
        self.new: Set[Formula] = new
        self.old: Set[Formula] = old
        self.nxt: Set[Formula] = nxt


_INIT = "__init__"


def _new1(f: Formula) -> Set[Formula]:
    if isinstance(f, Until):
        return {f.left}
    if isinstance(f, Release):
        return {f.right}
    if isinstance(f, Or):
        return {f.left}
    raise AssertionError


def _new2(f: Formula) -> Set[Formula]:
    if isinstance(f, Until):
        return {f.right}
    if isinstance(f, Release):
        return {f.left, f.right}
    if isinstance(f, Or):
        return {f.right}
    raise AssertionError


def _build_node_set(f: Formula) -> List[_Node]:
    counter = itertools.count(1)
    nodes: List[_Node] = []

    def fresh(incoming, new, old, nxt) -> _Node:
        return _Node(f"n{next(counter)}", set(incoming), set(new), set(old), set(nxt))

    def expand(node: _Node):
        if not node.new:
            for r in nodes:
                if r.old == node.old and r.nxt == node.nxt:
                    r.incoming |= node.incoming
                    return
            nodes.append(node)
            succ = fresh({node.nid}, node.nxt, set(), set())
            expand(succ)
            return
        eta = node.new.pop()
        if isinstance(eta, FalseF):
            return  # contradiction; drop this node
        if isinstance(eta, TrueF):
            if eta not in node.old:
                node.old.add(eta)
            expand(node)
            return
        if isinstance(eta, Atom) or (isinstance(eta, Not) and isinstance(eta.child, Atom)):
            negated = Not(eta) if isinstance(eta, Atom) else eta.child
            if negated in node.old:
                return  # contradiction
            node.old.add(eta)
            expand(node)
            return
        if isinstance(eta, And):
            node.old.add(eta)
            for part in (eta.left, eta.right):
                if part not in node.old:
                    node.new.add(part)
            expand(node)
            return
        if isinstance(eta, Next):
            node.old.add(eta)
            node.nxt.add(eta.child)
            expand(node)
            return
        if isinstance(eta, (Until, Release, Or)):
            node.old.add(eta)
            # branch 1 keeps the obligation for the next step (U/R only)
            n1 = fresh(node.incoming, node.new | (_new1(eta) - node.old), node.old, node.nxt)
            if isinstance(eta, (Until, Release)):
                n1.nxt.add(eta)
            # branch 2 discharges the obligation now
            n2 = fresh(node.incoming, node.new | (_new2(eta) - node.old), node.old, node.nxt)
            expand(n1)
            expand(n2)
            return
        raise TypeError(f"unexpected formula in tableau: {eta!r}")

    root = fresh({_INIT}, {f}, set(), set())
    expand(root)
    return nodes


def _node_guard(old: Set[Formula]) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    pos = frozenset(g.name for g in old if isinstance(g, Atom))
    neg = frozenset(g.child.name for g in old if isinstance(g, Not))
    return pos, neg


def _generalized(f: Formula):
    """Return (state ids, init id, edges, acceptance sets) of the GBA."""
    nodes = _build_node_set(f)
    by_id = {n.nid: n for n in nodes}
    states = [_INIT] + [n.nid for n in nodes]
    edges: List[Edge] = []
    for n in nodes:
        pos, neg = _node_guard(n.old)
        for src in n.incoming:
            edges.append(Edge(src, n.nid, pos, neg))

    untils = sorted(
        {g for n in nodes for g in n.old if isinstance(g, Until)},
        key=str,
    )
    acc_sets: List[Set[str]] = []
    for u in untils:
        # the synthetic init node is left out: it has no incoming edges,
        # so its acceptance flag cannot matter but would block merging
        acc = {n.nid for n in nodes if u not in n.old or u.right in n.old}
        acc_sets.append(acc)
    return states, _INIT, edges, acc_sets


def _degeneralize(states, init, edges, acc_sets):
    """Counter construction collapsing multiple acceptance sets to one."""
    if len(acc_sets) == 0:
        return states, init, edges, set(states)
    if len(acc_sets) == 1:
        return states, init, edges, set(acc_sets[0])
    # counter automaton: from (q, i), the counter advances when q is in
    # acceptance set i; accepting = F_{k-1} x {k-1}
    k = len(acc_sets)
    new_edges = []
    for e in edges:
        for i in range(k):
            ni = (i + 1) % k if e.src in acc_sets[i] else i
            new_edges.append(Edge(f"{e.src}#{i}", f"{e.dst}#{ni}", e.pos, e.neg))
    accepting = {f"{q}#{k - 1}" for q in acc_sets[k - 1]}
    flat_states = [f"{q}#{i}" for q in states for i in range(k)]
    return flat_states, f"{init}#0", new_edges, accepting


def _simplify(states, init, edges, accepting):
    """Remove unreachable states; merge states with identical signatures."""
    out: Dict[str, Set[Tuple]] = {q: set() for q in states}
    for e in edges:
        out[e.src].add((e.pos, e.neg, e.dst))

    # reachability from init
    reach = {init}
    stack = [init]
    while stack:
        q = stack.pop()
        for (_, _, dst) in out[q]:
            if dst not in reach:
                reach.add(dst)
                stack.append(dst)
    states = [q for q in states if q in reach]

    # iterated signature merging (outgoing edges + acceptance membership)
    cls = {q: int(q in accepting) for q in states}
    while True:
        canon: Dict[Tuple, int] = {}
        new_cls = {}
        for q in sorted(states):
            sig = (
                q in accepting,
                frozenset(
                    (pos, neg, cls[dst]) for (pos, neg, dst) in out[q] if dst in reach
                ),
            )
            if sig not in canon:
                canon[sig] = len(canon)
            new_cls[q] = canon[sig]
        if new_cls == cls:
            break
        cls = new_cls

    rep: Dict[int, str] = {}
    for q in states:
        rep.setdefault(cls[q], q)
    remap = {q: rep[cls[q]] for q in states}

    merged_states = sorted(set(remap.values()))
    merged_edges = {
        (remap[e.src], remap[e.dst], e.pos, e.neg)
        for e in edges
        if e.src in reach and e.dst in reach
    }
    merged_accepting = {remap[q] for q in states if q in accepting}
    return (
        merged_states,
        remap[init],
        [Edge(s, d, p, n) for (s, d, p, n) in merged_edges],
        merged_accepting,
    )


def _canonicalize(states, init, edges, accepting, atoms) -> BuchiAutomaton:
    """Rename states q0, q1, ... in deterministic BFS order from init."""
    out: Dict[str, List[Edge]] = {q: [] for q in states}
    for e in edges:
        out[e.src].append(e)
    order = [init]
    seen = {init}
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for e in sorted(out[q], key=lambda e: (sorted(e.pos), sorted(e.neg), e.dst)):
            if e.dst not in seen:
                seen.add(e.dst)
                order.append(e.dst)
    # unreachable already removed, but be safe
    for q in sorted(states):
        if q not in seen:
            seen.add(q)
            order.append(q)
    name = {q: f"q{idx}" for idx, q in enumerate(order)}
    new_edges = tuple(
        sorted(
            (Edge(name[e.src], name[e.dst], e.pos, e.neg) for e in edges),
            key=lambda e: (e.src, e.dst, e.guard_str()),
        )
    )
    return BuchiAutomaton(
        states=tuple(name[q] for q in order),
        initial=name[init],
        accepting=frozenset(name[q] for q in accepting),
        edges=new_edges,
        atoms=frozenset(atoms),
    )


def build_buchi(f: Formula) -> BuchiAutomaton:
    """Construct a nondeterministic Buchi automaton with L(BA) = L(f).

    Requires f in NNF (use to_nnf first). The automaton is simplified by
    unreachable-state removal and signature merging; ids are canonical,
    so equal formulas yield identical serializations.
    """
    if not is_nnf(f):
        raise ValueError("build_buchi requires an NNF formula")
    states, init, edges, acc_sets = _generalized(f)
    states, init, edges, accepting = _degeneralize(states, init, edges, acc_sets)
    states, init, edges, accepting = _simplify(states, init, edges, accepting)
    return _canonicalize(states, init, edges, accepting, atoms_of(f))


# -- analysis helpers used by the planner --------------------------------


def distance_to_accepting(ba: BuchiAutomaton) -> Dict[str, int]:
    """Min number of edges from each state to any accepting state,
    guards ignored. Unreachable states get a large sentinel."""
    INF = 10 ** 9
    dist = {q: (0 if q in ba.accepting else INF) for q in ba.states}
    preds: Dict[str, Set[str]] = {q: set() for q in ba.states}
    for e in ba.edges:
        preds[e.dst].add(e.src)
    frontier = [q for q in ba.states if q in ba.accepting]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for q in frontier:
            for p in preds[q]:
                if dist[p] > d:
                    dist[p] = d
                    nxt.append(p)
        frontier = nxt
    return dist


def _restricted_out(ba: BuchiAutomaton, letter: FrozenSet[str]) -> Dict[str, List[str]]:
    out: Dict[str, List[str]] = {}
    for e in ba.edges:
        if e.satisfied_by(letter):
            out.setdefault(e.src, []).append(e.dst)
    return out


def accepts_constant_word(ba: BuchiAutomaton, q: str, letter: FrozenSet[str]) -> bool:
    """True iff some run from q over letter^omega visits acceptance
    infinitely often: an accepting state on a cycle of the restricted
    graph is reachable from q."""
    out = _restricted_out(ba, letter)
    reach = {q}
    stack = [q]
    while stack:
        cur = stack.pop()
        for dst in out.get(cur, []):
            if dst not in reach:
                reach.add(dst)
                stack.append(dst)
    for acc in ba.accepting & reach:
        if _on_cycle(acc, out):
            return True
    return False


def stutter_accepting(ba: BuchiAutomaton, q: str, letter: FrozenSet[str]) -> bool:
    """True iff q is accepting and can loop forever under the constant
    letter (q lies on a cycle of the letter-restricted graph)."""
    if q not in ba.accepting:
        return False
    return _on_cycle(q, _restricted_out(ba, letter))


def _on_cycle(q: str, out: Dict[str, List[str]]) -> bool:
    # is q reachable from itself in >= 1 step?
    seen = set()
    stack = list(out.get(q, []))
    while stack:
        cur = stack.pop()
        if cur == q:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(out.get(cur, []))
    return False
