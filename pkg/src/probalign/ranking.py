"""Optimal ranking of model traces against a log trace.

The score of a model trace is its probability times a similarity derived
from the edit distance. Top-k retrieval maps each (probability, similarity)
pair to a 2-D point whose distance from the origin is the reciprocal score,
then asks a k-NN index for the points nearest the origin.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import knn
from .errors import PreconditionError
from .unfold import ModelTrace, Trace

DEFAULT_C = 5
DEFAULT_K = 20


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance over whole activity symbols."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def similarity(d: int, c: int = DEFAULT_C) -> float:
    if d < 0:
        raise PreconditionError("distance must be non-negative")
    if c <= 0:
        raise PreconditionError("c must be a positive integer")
    return 1.0 / (d / c + 1.0)


def golden_rank(trace: Sequence[str], model_trace: ModelTrace, c: int = DEFAULT_C) -> float:
    return model_trace.probability * similarity(levenshtein(trace, model_trace.labels), c)


def t_transform(p: float, s: float) -> tuple[float, float]:
    """Point at distance 1/(p*s) from the origin."""
    if not (0 < p <= 1 and 0 < s <= 1):
        raise PreconditionError(f"t-transform needs p, s in (0, 1], got p={p}, s={s}")
    r = math.hypot(p, s)
    return 1.0 / (s * r), 1.0 / (p * r)


@dataclass(frozen=True)
class RankedAlignment:
    model_trace: ModelTrace
    distance: int
    similarity: float
    score: float
    transformed: tuple[float, float]

    @property
    def trace(self) -> Trace:
        return self.model_trace.labels


@dataclass(frozen=True)
class EmbeddedMatch:
    """One hit of the approximate strategy."""

    model_trace: ModelTrace
    kernel: float
    distance: float

    @property
    def trace(self) -> Trace:
        return self.model_trace.labels


@dataclass(frozen=True)
class Ranking:
    items: tuple = ()
    k_exceeded: bool = False
    timings: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def traces(self) -> list[Trace]:
        return [it.trace for it in self.items]


def align(trace: Sequence[str], model_trace: ModelTrace, c: int = DEFAULT_C) -> RankedAlignment:
    d = levenshtein(trace, model_trace.labels)
    s = similarity(d, c)
    p = model_trace.probability
    return RankedAlignment(model_trace, d, s, p * s, t_transform(p, s))


def optimal_topk(
    traces: Iterable[ModelTrace],
    trace: Sequence[str],
    k: int = DEFAULT_K,
    c: int = DEFAULT_C,
    index_kind: str = "kd",
) -> Ranking:
    """The k model traces with the highest score for ``trace``.

    The transformed point set depends on the query, so the index is rebuilt
    on every call; the time spent is reported in ``Ranking.timings``.
    """
    if k <= 0:
        raise PreconditionError("k must be >= 1")
    pool = sorted(traces, key=lambda m: m.labels)
    if not pool:
        raise PreconditionError("no model traces to rank")
    if any(m.probability <= 0 for m in pool):
        raise PreconditionError("model trace probabilities must be positive")
    t0 = time.perf_counter()
    rows = [align(trace, m, c) for m in pool]
    index = knn.build([r.transformed for r in rows], index_kind)
    t1 = time.perf_counter()
    hits = index.query([0.0, 0.0], min(k, len(rows)))
    t2 = time.perf_counter()
    chosen = [rows[i] for i, _ in hits]
    chosen.sort(key=lambda r: (-r.score, r.trace))
    return Ranking(
        tuple(chosen),
        k_exceeded=k > len(rows),
        timings={"indexing": t1 - t0, "search": t2 - t1},
    )


def brute_force_ranking(
    traces: Iterable[ModelTrace], trace: Sequence[str], c: int = DEFAULT_C
) -> Ranking:
    rows = [align(trace, m, c) for m in traces]
    rows.sort(key=lambda r: (-r.score, r.trace))
    return Ranking(tuple(rows))


def rank_positions(ranking: Ranking) -> dict[Trace, int]:
    return {t: i + 1 for i, t in enumerate(ranking.traces())}


def spearman(r1: Ranking | Sequence[float], r2: Ranking | Sequence[float]) -> float:
    """Spearman's rho; rankings are compared on the positions of their traces."""
    if isinstance(r1, Ranking) or isinstance(r2, Ranking):
        if not (isinstance(r1, Ranking) and isinstance(r2, Ranking)):
            raise PreconditionError("compare two rankings or two rank vectors")
        p1, p2 = rank_positions(r1), rank_positions(r2)
        if set(p1) != set(p2):
            raise PreconditionError("rankings cover different trace sets")
        keys = sorted(p1)
        x = [p1[t] for t in keys]
        y = [p2[t] for t in keys]
    else:
        x, y = list(r1), list(r2)
        if len(x) != len(y):
            raise PreconditionError("rank vectors differ in length")
    if len(x) < 2:
        return 1.0
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 1.0 if list(stats.rankdata(x)) == list(stats.rankdata(y)) else 0.0
    return float(stats.spearmanr(x, y).statistic)
