"""Restriction of a transition graph to the runs of one model trace."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .graph import TransitionGraph, linear_tg, tau_closure
from .net import DEFAULT_SILENCE_BOUND, is_tau
from .unfold import Trace, runs_of, unfold


@dataclass(frozen=True, eq=False)
class WeightedTransitionGraph:
    """A graph paired with the tau-endpoint weight ``omega``.

    ``traces`` is the trace set the graph stands for (used by label-frequency
    embeddings); ``horizon`` is the default path-length bound for 2-gram
    embeddings.
    """

    tg: TransitionGraph
    omega: float
    traces: tuple[Trace, ...]
    horizon: int

    def __post_init__(self) -> None:
        if not 0 < self.omega <= 1:
            raise PreconditionError(f"omega must lie in (0, 1], got {self.omega}")


def ifte(x: float, y: float) -> float:
    """``y`` when the indicator ``x`` is 1, else 1.

    Equal to ``x * (y - 1) + 1`` on indicators, without its rounding.
    """
    if x not in (0, 1):
        raise PreconditionError(f"ifte expects an indicator, got {x}")
    return y if x else 1.0


def project(
    tg: TransitionGraph, trace: Sequence[str], b: int = DEFAULT_SILENCE_BOUND
) -> WeightedTransitionGraph:
    """Keep only the visible nodes and edges used by runs of ``trace``.

    Rows of the restricted matrix are renormalised over the kept successors.
    The probability of entering from a tau start node and of leaving into a
    tau end node is folded into ``omega`` as a noisy-or over the runs.
    """
    trace = tuple(trace)
    if tg.interior_tau():
        tg = tau_closure(tg)
    runs = runs_of(tg, trace, b)
    if not runs:
        raise PreconditionError(f"{' '.join(trace) or '<empty>'} is not a model trace")

    miss = 1.0
    kept: list[int] = []
    edges: set[tuple[int, int]] = set()
    for run in runs:
        nodes = run.nodes
        f = 1.0
        if len(nodes) > 1:
            first, last = nodes[0], nodes[-1]
            f = ifte(float(is_tau(tg.labels[first])), tg.R[first, nodes[1]])
            f *= ifte(float(is_tau(tg.labels[last])), tg.R[nodes[-2], last])
        miss *= 1.0 - f
        vis = [i for i in nodes if not is_tau(tg.labels[i])]
        for i in vis:
            if i not in kept:
                kept.append(i)
        edges.update(zip(vis, vis[1:]))
    omega = 1.0 - miss

    kept.sort()
    pos = {old: new for new, old in enumerate(kept)}
    R = np.zeros((len(kept), len(kept)))
    for i, j in edges:
        R[pos[i], pos[j]] = tg.R[i, j]
    sums = R.sum(axis=1, keepdims=True)
    np.divide(R, sums, out=R, where=sums > 0)
    sub = TransitionGraph(
        tuple(tg.labels[i] for i in kept),
        R,
        None,
        None,
        tuple(tg.names[i] for i in kept),
    )
    return WeightedTransitionGraph(sub, omega, (trace,), len(trace))


def weighted_linear(trace: Sequence[str]) -> WeightedTransitionGraph:
    """Log-trace encoding: the chain graph with omega = 1."""
    trace = tuple(trace)
    return WeightedTransitionGraph(linear_tg(trace), 1.0, (trace,), len(trace))


def weighted(
    tg: TransitionGraph,
    omega: float = 1.0,
    rho: float = 0.0,
    n_max: int | None = 8,
) -> WeightedTransitionGraph:
    """Wrap an arbitrary graph; its trace set is its unfolding at (rho, n_max)."""
    traces = tuple(m.labels for m in unfold(tg, rho, n_max))
    horizon = max((len(t) for t in traces), default=1) or 1
    return WeightedTransitionGraph(tg, omega, traces, horizon)
