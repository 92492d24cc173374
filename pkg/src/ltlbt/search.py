"""Product-automaton planning: lazy (partial) graph construction, A*
with an automaton-distance heuristic and experience-cached edge costs,
Dijkstra, and a full-construction baseline.
"""
from __future__ import annotations

import heapq
import itertools
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

from .costs import HOME_ANCHOR, ExperienceCache, place_anchor
from .ltl.buchi import (
    BuchiAutomaton,
    accepts_constant_word,
    distance_to_accepting,
)
from .world import (
    SymbolicState,
    TransitionSystem,
    apply_action,
    encode_state,
    enumerate_actions,
    label,
)

_INF = float("inf")


class NoPlan(Exception):
    """The formula is unsatisfiable from the start state."""


class GraphTooLarge(Exception):
    """Full construction would exceed the node budget."""


@dataclass(frozen=True)
class ProductState:
    state: SymbolicState
    ba_state: str
    ee: str = HOME_ANCHOR  # end-effector anchor; meaningful in chain mode only


def node_key(q: ProductState, path_dependent: bool) -> str:
    base = f"{encode_state(q.state)}|{q.ba_state}"
    return f"{base}|{q.ee}" if path_dependent else base


@dataclass
class PlannerStats:
    nodes_expanded: int = 0
    provider_invocations: int = 0
    cache_hits: int = 0
    wall_time_s: float = 0.0
    plan_cost: float = 0.0
    plan_length: int = 0

    def to_dict(self):
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class PlanStep:
    source: ProductState
    action: object
    target: ProductState
    cost: float


@dataclass(frozen=True)
class Plan:
    steps: Tuple[PlanStep, ...]
    cost: float
    stats: PlannerStats

    @property
    def actions(self) -> List[object]:
        return [st.action for st in self.steps]

    @property
    def action_keys(self) -> List[str]:
        return [st.action.key for st in self.steps]

    def states(self) -> List[SymbolicState]:
        if not self.steps:
            return []
        return [self.steps[0].source.state] + [st.target.state for st in self.steps]

    def validate_chained(self):
        for a, b in zip(self.steps, self.steps[1:]):
            assert a.target == b.source, "plan steps do not chain"


class PartialGraph:
    """Lazily grown product graph; expanded nodes have complete
    successor lists. Stamped with the geometry version it was built
    against."""

    def __init__(self, version: int, path_dependent: bool):
        self.version = version
        self.path_dependent = path_dependent
        self.nodes: Dict[str, ProductState] = {}
        self.expanded: set = set()
        self.edges: Dict[str, List[Tuple[str, object, float]]] = {}

    def key(self, q: ProductState) -> str:
        return node_key(q, self.path_dependent)

    def add_node(self, q: ProductState) -> str:
        k = self.key(q)
        self.nodes.setdefault(k, q)
        return k

    def to_dot(self) -> str:
        lines = ["digraph product {", "  rankdir=LR;"]
        for k in self.nodes:
            style = "solid" if k in self.expanded else "dashed"
            lines.append(f'  "{k}" [style={style}];')
        for src, outs in self.edges.items():
            for dst, action, cost in outs:
                lines.append(f'  "{src}" -> "{dst}" [label="{action.key} ({cost:.3f})"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def successors(
    graph: PartialGraph,
    q: ProductState,
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    geometry,
    provider,
    cache: ExperienceCache,
    action_filter: Optional[Callable] = None,
) -> List[Tuple[ProductState, object, float]]:
    """Expand q per the product transition rule: one successor per
    (action, compatible automaton move), with the automaton guard
    evaluated on the source state's label. Expansion is idempotent and
    costs come from the cache when the geometry version matches."""
    k = graph.add_node(q)
    if k in graph.expanded:
        return [
            (graph.nodes[dst], action, cost) for dst, action, cost in graph.edges[k]
        ]
    letter = label(ts, q.state)
    ba_moves = [e.dst for e in ba.edges_from(q.ba_state) if e.satisfied_by(letter)]
    out: List[Tuple[str, object, float]] = []
    result = []
    for action in enumerate_actions(ts, q.state):
        if action_filter is not None and not action_filter(action):
            continue
        s_next = apply_action(ts, q.state, action)
        cost = cache.lookup(k, action.key, graph.version)
        if cost is None:
            cost = provider.cost(geometry, q.state, action, q.ee)
            cache.store(k, action.key, graph.version, cost)
        ee_next = place_anchor(s_next, action) if graph.path_dependent else HOME_ANCHOR
        for qb_next in ba_moves:
            succ = ProductState(s_next, qb_next, ee_next)
            dst = graph.add_node(succ)
            out.append((dst, action, cost))
            result.append((succ, action, cost))
    graph.edges[k] = out
    graph.expanded.add(k)
    return result


class _GoalTest:
    """Goal nodes: the automaton accepts the final state's label repeated
    forever from the current automaton state, so the finite plan prefix
    extends to an accepting infinite run.

    Because guards are evaluated on the source state's label, the
    automaton trails the transition system by one step; requiring the
    node's own automaton state to be accepting would make goals
    unreachable (there are no no-op actions to let it catch up)."""

    def __init__(self, ts: TransitionSystem, ba: BuchiAutomaton):
        self.ts = ts
        self.ba = ba
        self._memo: Dict[Tuple[str, FrozenSet[str]], bool] = {}

    def __call__(self, state: SymbolicState, ba_state: str) -> bool:
        letter = label(self.ts, state)
        key = (ba_state, letter)
        if key not in self._memo:
            self._memo[key] = accepts_constant_word(self.ba, ba_state, letter)
        return self._memo[key]


def heuristic_ba_distance(ba: BuchiAutomaton, c_min: float) -> Callable[[ProductState], float]:
    """Admissible lower bound: automaton hops to the nearest accepting
    state times the minimum edge cost. Every product edge advances the
    automaton by exactly one transition and costs at least c_min."""
    dist = distance_to_accepting(ba)
    big = 10 ** 8

    def h(q: ProductState) -> float:
        d = dist.get(q.ba_state, big)
        return _INF if d >= big else d * c_min

    return h


def _search(
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    geometry,
    provider,
    cache: ExperienceCache,
    start_state: Optional[SymbolicState],
    heuristic: Optional[Callable[[ProductState], float]],
    graph: Optional[PartialGraph],
    action_filter: Optional[Callable],
    start_ee: str,
) -> Plan:
    t0 = time.perf_counter()
    prov0 = provider.invocations
    hits0 = cache.hits

    s0 = start_state if start_state is not None else ts.init
    start = ProductState(s0, ba.initial, start_ee)
    goal = _GoalTest(ts, ba)

    def finish(steps: Tuple[PlanStep, ...], cost: float, expanded: int) -> Plan:
        stats = PlannerStats(
            nodes_expanded=expanded,
            provider_invocations=provider.invocations - prov0,
            cache_hits=cache.hits - hits0,
            wall_time_s=time.perf_counter() - t0,
            plan_cost=cost,
            plan_length=len(steps),
        )
        return Plan(steps, cost, stats)

    if graph is None:
        graph = PartialGraph(ts.geometry_version, getattr(provider, "path_dependent", False))
    start_key = graph.add_node(start)

    # clamp to zero on goal nodes: a goal's automaton component may be
    # non-accepting (it trails by one step), where the raw distance would
    # overestimate and break optimality under the descending-g tie-break
    if heuristic is None:
        h = lambda q: 0.0
    else:
        h = lambda q: 0.0 if goal(q.state, q.ba_state) else heuristic(q)

    g_cost: Dict[str, float] = {start_key: 0.0}
    parent: Dict[str, Tuple[str, object, float]] = {}
    closed: set = set()
    h0 = h(start)
    if h0 == _INF:
        raise NoPlan("no accepting automaton state is reachable")
    # tie-break: f, then larger g first, then canonical key
    open_heap = [(h0, 0.0, start_key)]
    expanded = 0

    while open_heap:
        f, neg_g, k = heapq.heappop(open_heap)
        if k in closed:
            continue
        closed.add(k)
        q = graph.nodes[k]
        if goal(q.state, q.ba_state):
            steps: List[PlanStep] = []
            cur = k
            while cur != start_key:
                pk, action, cost = parent[cur]
                steps.append(PlanStep(graph.nodes[pk], action, graph.nodes[cur], cost))
                cur = pk
            steps.reverse()
            return finish(tuple(steps), g_cost[k], expanded)
        expanded += 1
        for succ, action, cost in successors(
            graph, q, ts, ba, geometry, provider, cache, action_filter
        ):
            sk = graph.key(succ)
            if sk in closed:
                continue
            ng = g_cost[k] + cost
            if ng < g_cost.get(sk, _INF) - 1e-15:
                g_cost[sk] = ng
                parent[sk] = (k, action, cost)
                hv = h(succ)
                if hv == _INF:
                    continue
                heapq.heappush(open_heap, (ng + hv, -ng, sk))
    raise NoPlan("search space exhausted without reaching an accepting loop")


def plan_astar(
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    geometry,
    provider,
    cache: ExperienceCache,
    start_state: Optional[SymbolicState] = None,
    graph: Optional[PartialGraph] = None,
    action_filter: Optional[Callable] = None,
    start_ee: str = HOME_ANCHOR,
) -> Plan:
    """Minimum-cost plan over the lazily constructed product graph using
    the automaton-distance heuristic. Raises NoPlan when no accepting
    loop is reachable."""
    h = heuristic_ba_distance(ba, provider.c_min(geometry))
    return _search(
        ts, ba, geometry, provider, cache, start_state, h, graph, action_filter, start_ee
    )


def plan_dijkstra(
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    geometry,
    provider,
    cache: ExperienceCache,
    start_state: Optional[SymbolicState] = None,
    graph: Optional[PartialGraph] = None,
    action_filter: Optional[Callable] = None,
    start_ee: str = HOME_ANCHOR,
) -> Plan:
    """plan_astar with the zero heuristic."""
    return _search(
        ts, ba, geometry, provider, cache, start_state, None, graph, action_filter,
        start_ee,
    )


# -- full construction baseline ------------------------------------------


@dataclass
class FullGraph:
    nodes: Dict[str, ProductState]
    edges: Dict[str, List[Tuple[str, object, float]]]
    node_count: int
    construction_time_s: float


def full_graph_construct(
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    geometry,
    provider,
    max_nodes: int = 10 ** 6,
) -> FullGraph:
    """Materialize every product node and edge up front. Node count is
    exactly |S| * |Q_b|. Requires a path-independent cost provider."""
    if getattr(provider, "path_dependent", False):
        raise ValueError("full construction requires a path-independent cost provider")
    total = ts.state_space_size() * len(ba.states)
    if total > max_nodes:
        raise GraphTooLarge(f"{total} nodes exceeds budget {max_nodes}")

    t0 = time.perf_counter()
    nodes: Dict[str, ProductState] = {}
    edges: Dict[str, List[Tuple[str, object, float]]] = {}
    ba_succ_memo: Dict[FrozenSet[str], Dict[str, List[str]]] = {}

    for s in ts.enumerate_states():
        letter = label(ts, s)
        ba_succ = ba_succ_memo.get(letter)
        if ba_succ is None:
            ba_succ = {
                qb: [e.dst for e in ba.edges_from(qb) if e.satisfied_by(letter)]
                for qb in ba.states
            }
            ba_succ_memo[letter] = ba_succ
        s_key = encode_state(s)
        moves = []
        for action in enumerate_actions(ts, s):
            s_next = apply_action(ts, s, action)
            cost = provider.cost(geometry, s, action, HOME_ANCHOR)
            moves.append((action, encode_state(s_next), s_next, cost))
        for qb in ba.states:
            k = f"{s_key}|{qb}"
            nodes[k] = ProductState(s, qb)
            out = []
            for action, ns_key, s_next, cost in moves:
                for qb_next in ba_succ[qb]:
                    out.append((f"{ns_key}|{qb_next}", action, cost))
            edges[k] = out

    return FullGraph(nodes, edges, len(nodes), time.perf_counter() - t0)


def dijkstra_full(
    full: FullGraph,
    ts: TransitionSystem,
    ba: BuchiAutomaton,
    start_state: Optional[SymbolicState] = None,
) -> Plan:
    """Uniform-cost search over a fully materialized graph; the oracle
    baseline for partial-construction optimality checks."""
    t0 = time.perf_counter()
    s0 = start_state if start_state is not None else ts.init
    goal = _GoalTest(ts, ba)
    start_key = f"{encode_state(s0)}|{ba.initial}"
    if start_key not in full.nodes:
        raise NoPlan(f"start node {start_key} not in graph")
    g_cost = {start_key: 0.0}
    parent: Dict[str, Tuple[str, object, float]] = {}
    closed: set = set()
    heap = [(0.0, start_key)]
    expanded = 0
    while heap:
        g, k = heapq.heappop(heap)
        if k in closed:
            continue
        closed.add(k)
        q = full.nodes[k]
        if goal(q.state, q.ba_state):
            steps: List[PlanStep] = []
            cur = k
            while cur != start_key:
                pk, action, cost = parent[cur]
                steps.append(PlanStep(full.nodes[pk], action, full.nodes[cur], cost))
                cur = pk
            steps.reverse()
            stats = PlannerStats(
                nodes_expanded=expanded,
                wall_time_s=time.perf_counter() - t0,
                plan_cost=g,
                plan_length=len(steps),
            )
            return Plan(tuple(steps), g, stats)
        expanded += 1
        for dst, action, cost in full.edges[k]:
            if dst in closed:
                continue
            ng = g + cost
            if ng < g_cost.get(dst, _INF) - 1e-15:
                g_cost[dst] = ng
                parent[dst] = (k, action, cost)
                heapq.heappush(heap, (ng, dst))
    raise NoPlan("no accepting loop reachable in full graph")
