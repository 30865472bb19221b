"""Node-labelled transition graphs (the Markov-chain encoding of a net).

A :class:`TransitionGraph` stores one label per node and a row-stochastic
matrix ``R``. A run is a node path from ``start`` to ``end``; its trace is the
sequence of node labels with tau removed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ModelAssumptionError, PreconditionError, StructuralError
from .net import TAU, Label, ReachabilityGraph, is_tau

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    labels: tuple[Label, ...]
    R: np.ndarray
    start: int | None
    end: int | None
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.labels)
        R = np.array(self.R, dtype=float, copy=True).reshape(n, n) if n else np.zeros((0, 0))
        if not np.all(np.isfinite(R)) or (R < 0).any() or (R > 1 + ROW_SUM_TOL).any():
            raise StructuralError("transition probabilities must lie in [0, 1]")
        sums = R.sum(axis=1)
        bad = np.nonzero((sums > 0) & (np.abs(sums - 1.0) > ROW_SUM_TOL))[0]
        if bad.size:
            i = int(bad[0])
            raise StructuralError(f"row of node {self.name(i)} sums to {sums[i]!r}, not 1")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        names = tuple(self.names) or tuple(f"n{i}" for i in range(n))
        if len(names) != n or len(set(names)) != n:
            raise StructuralError("node names must be unique, one per node")
        object.__setattr__(self, "names", names)
        for lab in self.labels:
            if not is_tau(lab) and (not isinstance(lab, str) or not lab):
                raise StructuralError(f"invalid node label {lab!r}")
        if self.start is not None and R[:, self.start].any():
            raise StructuralError("start node has predecessors")
        if self.end is not None and R[self.end].any():
            raise StructuralError("end node has successors")

    def __len__(self) -> int:
        return len(self.labels)

    def name(self, i: int) -> str:
        return self.names[i] if self.names else f"n{i}"

    @cached_property
    def succ(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        out = []
        for row in self.R:
            nz = np.nonzero(row)[0]
            out.append(tuple((int(j), float(row[j])) for j in nz))
        return tuple(out)

    @cached_property
    def pred(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(i) for i in np.nonzero(self.R[:, j])[0]) for j in range(len(self)))

    @cached_property
    def alphabet(self) -> tuple[str, ...]:
        """Sorted activity labels occurring on nodes (tau excluded)."""
        return tuple(sorted({lab for lab in self.labels if not is_tau(lab)}))

    @cached_property
    def visible(self) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if not is_tau(lab)], dtype=int)

    def interior_tau(self) -> list[int]:
        return [
            i for i, lab in enumerate(self.labels) if is_tau(lab) and i not in (self.start, self.end)
        ]

    def edge_count(self) -> int:
        return int(np.count_nonzero(self.R > 0))


def label_matrix(labels: Sequence[Label], alphabet: Sequence[Label]) -> np.ndarray:
    """0/1 matrix node x label; labels outside ``alphabet`` get an all-zero row."""
    col = {a: k for k, a in enumerate(alphabet)}
    L = np.zeros((len(labels), len(alphabet)))
    for i, lab in enumerate(labels):
        k = col.get(lab)
        if k is not None:
            L[i, k] = 1.0
    return L


def lambda_power(
    tg: TransitionGraph, n: int, alphabet: Sequence[Label] | None = None
) -> np.ndarray:
    """Label-to-label n-step reachability, averaged over the source label's nodes.

    Rows and columns follow ``alphabet`` (default: ``tg.alphabet`` then tau).
    """
    if n < 1:
        raise PreconditionError("power must be >= 1")
    if alphabet is None:
        alphabet = tg.alphabet + ((TAU,) if any(is_tau(x) for x in tg.labels) else ())
    L = label_matrix(tg.labels, alphabet)
    Rn = np.linalg.matrix_power(tg.R, n)
    counts = L.sum(axis=0)
    out = L.T @ Rn @ L
    nz = counts > 0
    out[nz] /= counts[nz, None]
    out[~nz] = 0.0
    return out


def linear_tg(trace: Sequence[str]) -> TransitionGraph:
    """Chain graph for a log trace: node i carries trace[i], every edge has probability 1."""
    n = len(trace)
    if n == 0:
        raise PreconditionError("cannot encode the empty trace")
    for x in trace:
        if is_tau(x) or not isinstance(x, str) or not x:
            raise PreconditionError(f"invalid activity {x!r} in trace")
    R = np.zeros((n, n))
    for i in range(n - 1):
        R[i, i + 1] = 1.0
    return TransitionGraph(tuple(trace), R, 0, n - 1, tuple(f"{i}:{x}" for i, x in enumerate(trace)))


def tg_from_reachability(rg: ReachabilityGraph) -> TransitionGraph:
    """Move labels from reachability-graph edges onto nodes.

    Each edge becomes a node labelled by its transition's label. A fresh tau
    start node points at the edges leaving the initial marking, and edges
    entering the final marking point at a fresh tau end node, so every run
    keeps its probability.
    """
    final = rg.final
    if final is None or not _reaches(rg, final):
        raise ModelAssumptionError("no accepting run: final marking is unreachable")
    m = len(rg.edges)
    n = m + 2
    start, end = 0, n - 1
    probs = rg.probabilities
    R = np.zeros((n, n))
    for k in rg.out_edges[rg.root]:
        R[start, 1 + k] = probs[k]
    for k, e in enumerate(rg.edges):
        if e.target == final:
            R[1 + k, end] = 1.0
        else:
            for j in rg.out_edges[e.target]:
                R[1 + k, 1 + j] = probs[j]
    labels = (TAU,) + tuple(rg.label(e) for e in rg.edges) + (TAU,)
    names = ("start",) + tuple(f"{e.transition}@{e.source}" for e in rg.edges) + ("end",)
    return TransitionGraph(labels, R, start, end, names)


def _reaches(rg: ReachabilityGraph, target: int) -> bool:
    seen = {rg.root}
    stack = [rg.root]
    while stack:
        i = stack.pop()
        if i == target:
            return True
        for k in rg.out_edges[i]:
            j = rg.edges[k].target
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return False


def find_tau_cycle(tg: TransitionGraph) -> list[int] | None:
    """A cycle made only of tau nodes, as a node list, or None."""
    taus = {i for i, lab in enumerate(tg.labels) if is_tau(lab)}
    state: dict[int, int] = {}
    for root in sorted(taus):
        if root in state:
            continue
        path = [root]
        state[root] = 1
        iters = [iter(j for j, _ in tg.succ[root] if j in taus)]
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                state[path.pop()] = 2
                iters.pop()
                continue
            if state.get(nxt) == 1:
                return path[path.index(nxt):] + [nxt]
            if nxt not in state:
                state[nxt] = 1
                path.append(nxt)
                iters.append(iter(j for j, _ in tg.succ[nxt] if j in taus))
    return None


def tau_closure(tg: TransitionGraph) -> TransitionGraph:
    """Eliminate interior tau nodes, keeping tau start/end nodes.

    Each elimination redirects the mass through the removed node:
    ``R[i, j] += R[i, k] * R[k, j]``. Without tau cycles no tau self-loop can
    appear, so the result is exact and every trace keeps its probability.
    """
    cycle = find_tau_cycle(tg)
    if cycle is not None:
        raise ModelAssumptionError(
            "tau-only cycle: " + " -> ".join(tg.name(i) for i in cycle)
        )
    drop = tg.interior_tau()
    if not drop:
        return tg
    R = np.array(tg.R)
    for k in drop:
        preds = np.nonzero(R[:, k])[0]
        succs = np.nonzero(R[k])[0]
        if preds.size and succs.size:
            R[np.ix_(preds, succs)] += np.outer(R[preds, k], R[k, succs])
        R[:, k] = 0.0
        R[k, :] = 0.0
    keep = np.array([i for i in range(len(tg)) if i not in set(drop)], dtype=int)
    remap = {int(old): new for new, old in enumerate(keep)}
    R2 = R[np.ix_(keep, keep)]
    return TransitionGraph(
        tuple(tg.labels[i] for i in keep),
        R2,
        remap.get(tg.start) if tg.start is not None else None,
        remap.get(tg.end) if tg.end is not None else None,
        tuple(tg.names[i] for i in keep),
    )


def example_fixture_tg() -> TransitionGraph:
    """Five-node closed graph whose traces up to length 4 are
    a .4, aa .2, aaa .1, ca .07, cb .06, aaaa .05, caa .035, caaa .0175."""
    names = ("s", "A", "C", "B", "e")
    labels = (TAU, "a", "c", "b", TAU)
    idx = {n: i for i, n in enumerate(names)}
    R = np.zeros((5, 5))
    for src, dst, p in [
        ("s", "A", 0.8),
        ("s", "C", 0.2),
        ("A", "A", 0.5),
        ("A", "e", 0.5),
        ("C", "A", 0.7),
        ("C", "B", 0.3),
        ("B", "e", 1.0),
    ]:
        R[idx[src], idx[dst]] = p
    return TransitionGraph(labels, R, idx["s"], idx["e"], names)
