"""Model traces of a transition graph and their exact probabilities.

Traces are explored one visible label at a time. For every label prefix the
frontier keeps the probability mass sitting on each node that emitted its
last label; tau nodes are crossed inside a step. A prefix whose total mass is
below the threshold cannot extend to a trace above it (every run of the trace
passes through one of those nodes), so pruning by prefix mass is exact even
when a trace is produced by several runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import ModelAssumptionError, PreconditionError
from .graph import TransitionGraph, find_tau_cycle
from .net import DEFAULT_SILENCE_BOUND, is_tau

DEFAULT_RHO = 1e-5

Trace = tuple[str, ...]


@dataclass(frozen=True, order=True)
class ModelTrace:
    labels: Trace
    probability: float

    def __str__(self) -> str:
        return " ".join(self.labels)


class _Stepper:
    """Shared one-label transition used by :func:`unfold` and :func:`trace_probability`.

    Both walk the same dictionaries in the same order, so they produce
    bit-identical sums.
    """

    def __init__(self, tg: TransitionGraph):
        if tg.start is None or tg.end is None:
            raise PreconditionError("graph needs start and end nodes to define runs")
        cycle = find_tau_cycle(tg)
        if cycle is not None:
            raise ModelAssumptionError(
                "tau-only cycle: " + " -> ".join(tg.name(i) for i in cycle)
            )
        self.tg = tg
        self.live = _coreachable(tg)
        self._closure = lru_cache(maxsize=None)(self._silent_targets)

    def _silent_targets(self, node: int) -> tuple[tuple[int, float], ...]:
        """Distribution over the first visible node (or the end) after ``node``.

        Interior tau successors are crossed; their path probabilities add up.
        """
        tg = self.tg
        acc: dict[int, float] = {}
        for j, p in tg.succ[node]:
            if j not in self.live:
                continue
            if is_tau(tg.labels[j]) and j != tg.end:
                for t, q in self._closure(j):
                    acc[t] = acc.get(t, 0.0) + p * q
            else:
                acc[j] = acc.get(j, 0.0) + p
        return tuple(acc.items())

    def initial(self) -> tuple[Trace, dict[int, float]]:
        tg = self.tg
        lab = tg.labels[tg.start]
        if tg.start not in self.live:
            return (), {}
        return (() if is_tau(lab) else (lab,)), {tg.start: 1.0}

    def step(self, states: dict[int, float]) -> tuple[float, dict[str, dict[int, float]]]:
        """Advance one visible label. Returns (mass terminating now, next frontiers)."""
        tg = self.tg
        done = 0.0
        nxt: dict[str, dict[int, float]] = {}
        for u, p in states.items():
            if u == tg.end:
                done += p
                continue
            for v, q in self._closure(u):
                lab = tg.labels[v]
                if is_tau(lab):
                    done += p * q
                else:
                    bucket = nxt.setdefault(lab, {})
                    bucket[v] = bucket.get(v, 0.0) + p * q
        return done, nxt


def _coreachable(tg: TransitionGraph) -> frozenset[int]:
    """Nodes from which the end node is reachable."""
    seen = {tg.end}
    stack = [tg.end]
    while stack:
        j = stack.pop()
        for i in tg.pred[j]:
            if i not in seen:
                seen.add(i)
                stack.append(i)
    return frozenset(seen)


def _has_cycle(tg: TransitionGraph) -> bool:
    """Kahn's algorithm over the whole graph."""
    indeg = [len(p) for p in tg.pred]
    queue = [i for i, d in enumerate(indeg) if d == 0]
    seen = 0
    while queue:
        i = queue.pop()
        seen += 1
        for j, _ in tg.succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    return seen < len(tg)


def unfold(
    tg: TransitionGraph, rho: float = DEFAULT_RHO, n_max: int | None = None
) -> list[ModelTrace]:
    """All model traces with probability >= rho and length <= n_max.

    Output is sorted by descending probability, ties by label sequence.
    """
    if not 0 <= rho <= 1:
        raise PreconditionError("rho must lie in [0, 1]")
    if n_max is not None and n_max < 0:
        raise PreconditionError("n_max must be non-negative")
    if rho == 0 and n_max is None and _has_cycle(tg):
        raise PreconditionError("infinite unfolding; require rho > 0 or finite n_max")
    stepper = _Stepper(tg)
    prefix, states = stepper.initial()
    found: dict[Trace, float] = {}
    level: dict[Trace, dict[int, float]] = {prefix: states} if states else {}
    while level:
        nxt_level: dict[Trace, dict[int, float]] = {}
        for pre in sorted(level):
            done, ext = stepper.step(level[pre])
            if done > 0 and done >= rho:
                found[pre] = done
            if n_max is not None and len(pre) >= n_max:
                continue
            for lab in sorted(ext):
                frontier = ext[lab]
                if sum(frontier.values()) < rho or not frontier:
                    continue
                nxt_level[pre + (lab,)] = frontier
        level = nxt_level
    out = [ModelTrace(t, p) for t, p in found.items()]
    out.sort(key=lambda m: (-m.probability, m.labels))
    return out


def trace_probability(tg: TransitionGraph, trace: Sequence[str]) -> float:
    """Sum of run probabilities yielding ``trace``; 0 for non-model traces."""
    trace = tuple(trace)
    stepper = _Stepper(tg)
    prefix, states = stepper.initial()
    if not states:
        return 0.0
    if trace[: len(prefix)] != prefix:
        return 0.0
    for lab in trace[len(prefix):]:
        _, ext = stepper.step(states)
        states = ext.get(lab)
        if not states:
            return 0.0
    done, _ = stepper.step(states)
    return done


@dataclass(frozen=True)
class Run:
    nodes: tuple[int, ...]
    probability: float


def runs_of(
    tg: TransitionGraph, trace: Sequence[str], b: int = DEFAULT_SILENCE_BOUND
) -> list[Run]:
    """Every start-to-end node path whose visible labels spell ``trace``.

    Consecutive interior tau nodes are limited to ``b``; exceeding it raises
    :class:`ModelAssumptionError`.
    """
    if tg.start is None or tg.end is None:
        raise PreconditionError("graph needs start and end nodes to define runs")
    trace = tuple(trace)
    out: list[Run] = []
    for nodes, p in _walk(tg, trace, b):
        out.append(Run(nodes, p))
    return out


def _walk(tg: TransitionGraph, trace: Trace, b: int) -> Iterator[tuple[tuple[int, ...], float]]:
    def interior_tau(i: int) -> bool:
        return is_tau(tg.labels[i]) and i != tg.start and i != tg.end

    def consume(i: int, pos: int) -> int | None:
        lab = tg.labels[i]
        if is_tau(lab):
            return pos
        if pos < len(trace) and trace[pos] == lab:
            return pos + 1
        return None

    pos0 = consume(tg.start, 0)
    if pos0 is None:
        return
    stack = [((tg.start,), 1.0, pos0, 1 if interior_tau(tg.start) else 0)]
    while stack:
        path, p, pos, silent = stack.pop()
        u = path[-1]
        if u == tg.end:
            if pos == len(trace):
                yield path, p
            continue
        for v, q in reversed(tg.succ[u]):
            pos2 = consume(v, pos)
            if pos2 is None:
                continue
            run = silent + 1 if interior_tau(v) else 0
            if run > b:
                chain = [tg.name(i) for i in path[len(path) - silent:]] + [tg.name(v)]
                raise ModelAssumptionError(
                    f"more than {b} consecutive tau nodes: " + " -> ".join(chain)
                )
            stack.append((path + (v,), p * q, pos2, run))
