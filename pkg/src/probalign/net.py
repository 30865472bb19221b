"""Stochastic workflow nets: markings, firing, and the probability-annotated
reachability graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Iterable, Mapping, Union

from .errors import ModelAssumptionError, PreconditionError, StructuralError

DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_SILENCE_BOUND = 3


class _Tau:
    """The invisible label. Compares unequal to every activity name."""

    __slots__ = ()
    _instance: "_Tau | None" = None

    def __new__(cls) -> "_Tau":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TAU"

    def __str__(self) -> str:
        return "tau"

    def __reduce__(self):
        return (_Tau, ())


TAU = _Tau()
Label = Union[str, _Tau]


def is_tau(label: Label) -> bool:
    return label is TAU


@dataclass(frozen=True)
class Transition:
    id: str
    label: Label
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class StochasticWorkflowNet:
    places: tuple[str, ...]
    transitions: tuple[Transition, ...]
    arcs: frozenset[tuple[str, str]]
    initial_place: str
    final_place: str

    def __post_init__(self) -> None:
        places = set(self.places)
        if len(places) != len(self.places):
            raise StructuralError("duplicate place id")
        tids = [t.id for t in self.transitions]
        if len(set(tids)) != len(tids):
            raise StructuralError("duplicate transition id")
        if places & set(tids):
            raise StructuralError("place and transition ids overlap")
        for t in self.transitions:
            if not isinstance(t.label, _Tau) and (not isinstance(t.label, str) or not t.label):
                raise StructuralError(f"transition {t.id!r} has an empty label")
            if not t.weight > 0:
                raise StructuralError(f"transition {t.id!r} has non-positive weight {t.weight}")
        tset = set(tids)
        for src, dst in self.arcs:
            if not ((src in places and dst in tset) or (src in tset and dst in places)):
                raise StructuralError(f"arc {src}->{dst} does not join a place and a transition")
        for p in (self.initial_place, self.final_place):
            if p not in places:
                raise StructuralError(f"unknown place {p!r}")
        if any(dst == self.initial_place for _, dst in self.arcs):
            raise StructuralError("initial place has ingoing arcs")
        if any(src == self.final_place for src, _ in self.arcs):
            raise StructuralError("final place has outgoing arcs")

    @cached_property
    def transition(self) -> dict[str, Transition]:
        return {t.id: t for t in self.transitions}

    @cached_property
    def preset(self) -> dict[str, tuple[str, ...]]:
        pre: dict[str, list[str]] = {t.id: [] for t in self.transitions}
        for src, dst in sorted(self.arcs):
            if dst in pre:
                pre[dst].append(src)
        return {k: tuple(v) for k, v in pre.items()}

    @cached_property
    def postset(self) -> dict[str, tuple[str, ...]]:
        post: dict[str, list[str]] = {t.id: [] for t in self.transitions}
        for src, dst in sorted(self.arcs):
            if src in post:
                post[src].append(dst)
        return {k: tuple(v) for k, v in post.items()}

    @property
    def initial_marking(self) -> "Marking":
        return Marking.of({self.initial_place: 1})

    @property
    def final_marking(self) -> "Marking":
        return Marking.of({self.final_place: 1})

    def with_weights(self, weights: Mapping[str, float]) -> "StochasticWorkflowNet":
        ts = tuple(replace(t, weight=float(weights.get(t.id, t.weight))) for t in self.transitions)
        return replace(self, transitions=ts)


@dataclass(frozen=True)
class Marking:
    """Token counts, stored as a sorted tuple of (place, count) with count > 0."""

    counts: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, tokens: Mapping[str, int]) -> "Marking":
        for p, n in tokens.items():
            if n < 0:
                raise StructuralError(f"negative token count on {p!r}")
        return cls(tuple(sorted((p, int(n)) for p, n in tokens.items() if n)))

    def __getitem__(self, place: str) -> int:
        for p, n in self.counts:
            if p == place:
                return n
        return 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def __str__(self) -> str:
        if not self.counts:
            return "[]"
        return "[" + ",".join(p if n == 1 else f"{n}{p}" for p, n in self.counts) + "]"


def _check_marking(net: StochasticWorkflowNet, m: Marking) -> None:
    places = set(net.places)
    for p, _ in m.counts:
        if p not in places:
            raise StructuralError(f"marking refers to unknown place {p!r}")


def enabled(net: StochasticWorkflowNet, m: Marking) -> tuple[str, ...]:
    """Ids of the transitions enabled in ``m``, in net order."""
    _check_marking(net, m)
    tokens = m.as_dict()
    return tuple(
        t.id for t in net.transitions if all(tokens.get(p, 0) >= 1 for p in net.preset[t.id])
    )


def fire(net: StochasticWorkflowNet, m: Marking, t: str) -> Marking:
    if t not in enabled(net, m):
        raise PreconditionError(f"transition {t!r} is not enabled in {m}")
    tokens = m.as_dict()
    for p in net.preset[t]:
        tokens[p] -= 1
    for p in net.postset[t]:
        tokens[p] = tokens.get(p, 0) + 1
    return Marking.of(tokens)


def transition_probability(net: StochasticWorkflowNet, m: Marking, t: str) -> float:
    en = enabled(net, m)
    if t not in en:
        raise PreconditionError(f"transition {t!r} is not enabled in {m}")
    total = sum(net.transition[u].weight for u in en)
    return net.transition[t].weight / total


@dataclass(frozen=True)
class RGEdge:
    source: int
    transition: str
    target: int


@dataclass(frozen=True, eq=False)
class ReachabilityGraph:
    """Markings reachable from the initial marking, indexed in BFS order.

    Edge probabilities are derived from the net's weights on demand, so a
    reweighted net can reuse the same structure via :meth:`reweighted`.
    """

    net: StochasticWorkflowNet
    markings: tuple[Marking, ...]
    edges: tuple[RGEdge, ...]
    root: int = 0

    @cached_property
    def index(self) -> dict[Marking, int]:
        return {m: i for i, m in enumerate(self.markings)}

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.markings]
        for k, e in enumerate(self.edges):
            out[e.source].append(k)
        return tuple(tuple(x) for x in out)

    @cached_property
    def probabilities(self) -> tuple[float, ...]:
        weight = {t.id: t.weight for t in self.net.transitions}
        totals = [0.0] * len(self.markings)
        for e in self.edges:
            totals[e.source] += weight[e.transition]
        return tuple(weight[e.transition] / totals[e.source] for e in self.edges)

    @property
    def final(self) -> int | None:
        return self.index.get(self.net.final_marking)

    def label(self, edge: RGEdge) -> Label:
        return self.net.transition[edge.transition].label

    def reweighted(self, net: StochasticWorkflowNet) -> "ReachabilityGraph":
        if {t.id for t in net.transitions} != {t.id for t in self.net.transitions}:
            raise StructuralError("reweighted net has a different transition set")
        return ReachabilityGraph(net, self.markings, self.edges, self.root)


def reachability_graph(
    net: StochasticWorkflowNet,
    max_nodes: int = DEFAULT_NODE_BUDGET,
    require_safe: bool = True,
) -> ReachabilityGraph:
    """Breadth-first exploration from the initial marking.

    With ``require_safe`` any marking holding two tokens on a place aborts
    the exploration; the node budget applies in every mode.
    """
    root = net.initial_marking
    markings = [root]
    index = {root: 0}
    edges: list[RGEdge] = []
    queue = deque([0])
    while queue:
        i = queue.popleft()
        m = markings[i]
        for t in enabled(net, m):
            m2 = fire(net, m, t)
            if require_safe and any(n > 1 for _, n in m2.counts):
                raise ModelAssumptionError(f"net is not safe: firing {t} in {m} yields {m2}")
            j = index.get(m2)
            if j is None:
                if len(markings) >= max_nodes:
                    raise ModelAssumptionError(
                        f"reachability graph exceeds {max_nodes} markings (unbounded or too large)"
                    )
                j = index[m2] = len(markings)
                markings.append(m2)
                queue.append(j)
            edges.append(RGEdge(i, t, j))
    return ReachabilityGraph(net, tuple(markings), tuple(edges))


def check_safe(rg: ReachabilityGraph) -> bool:
    return all(n <= 1 for m in rg.markings for _, n in m.counts)


def longest_silent_chain(rg: ReachabilityGraph) -> int | None:
    """Length of the longest run of consecutive tau edges, or None on a tau cycle."""
    succ: dict[int, list[int]] = {}
    for e in rg.edges:
        if is_tau(rg.label(e)):
            succ.setdefault(e.source, []).append(e.target)
    depth: dict[int, int] = {}
    GREY, DONE = 1, 2
    state: dict[int, int] = {}
    # iterative DFS: longest path in the tau-edge subgraph, which must be acyclic
    for start in succ:
        if start in depth:
            continue
        stack = [(start, iter(succ.get(start, ())))]
        state[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                depth[node] = max((1 + depth[s] for s in succ.get(node, ())), default=0)
                state[node] = DONE
                continue
            st = state.get(nxt)
            if st == GREY:
                return None
            if st is None:
                state[nxt] = GREY
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return max(depth.values(), default=0)


def check_bounded_silence(rg: ReachabilityGraph, b: int = DEFAULT_SILENCE_BOUND) -> bool:
    if b < 1:
        raise PreconditionError("silence bound must be a positive integer")
    chain = longest_silent_chain(rg)
    return chain is not None and chain <= b


def estimate_weights_constant(net: StochasticWorkflowNet) -> StochasticWorkflowNet:
    """Every transition gets weight 1, so each conflict is uniform."""
    return replace(net, transitions=tuple(replace(t, weight=1.0) for t in net.transitions))


def _as_given(net: StochasticWorkflowNet) -> StochasticWorkflowNet:
    return net


Estimator = Callable[[StochasticWorkflowNet], StochasticWorkflowNet]

ESTIMATORS: dict[str, Estimator] = {
    "asgiven": _as_given,
    "constant": estimate_weights_constant,
}


def register_estimator(name: str, fn: Estimator) -> None:
    ESTIMATORS[name] = fn


def build_net(
    places: Iterable[str],
    transitions: Iterable[tuple[str, Label] | tuple[str, Label, float]],
    arcs: Iterable[tuple[str, str]],
    initial_place: str,
    final_place: str,
) -> StochasticWorkflowNet:
    """Convenience constructor taking plain tuples."""
    ts = tuple(Transition(*t) for t in transitions)
    return StochasticWorkflowNet(tuple(places), ts, frozenset(arcs), initial_place, final_place)
