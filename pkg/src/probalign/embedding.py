"""Vector embeddings of traces and weighted transition graphs.

Every vector has one coordinate per activity (the label-frequency block)
followed by one per ordered pair of activities (the 2-gram block), both in
the sorted order of an :class:`Alphabet`. The omega and tuning-factor
scalings are baked into the stored vectors, so the kernel is a plain dot
product and the kernel-induced distance is the Euclidean distance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from . import knn
from .errors import PreconditionError, UsageError
from .graph import TransitionGraph, label_matrix, linear_tg
from .net import DEFAULT_SILENCE_BOUND, is_tau
from .projection import WeightedTransitionGraph, project, weighted_linear
from .ranking import EmbeddedMatch, Ranking
from .unfold import ModelTrace

DEFAULT_DECAY = 0.07
DEFAULT_TF = 1e-4
TF_EXPONENTS = ("paths", "edges")


@dataclass(frozen=True)
class EmbeddingConfig:
    """``eps``/``nu`` pick the sub-embedding strategies (1 or 2).

    ``horizon`` caps the path-length series (None: the graph's own horizon).
    ``tf_exponent`` chooses what the tuning factor is raised to: ``"paths"``
    counts positive entries of every power R^1..R^l, ``"edges"`` counts the
    positive entries of R only.
    """

    decay: float = DEFAULT_DECAY
    tf: float = DEFAULT_TF
    eps: int = 1
    nu: int = 1
    horizon: int | None = None
    tf_exponent: str = "paths"

    def __post_init__(self) -> None:
        if not 0 < self.decay <= 1:
            raise PreconditionError("decay must lie in (0, 1]")
        if not 0 <= self.tf <= 1:
            raise PreconditionError("tf must lie in [0, 1]")
        if self.eps not in (1, 2) or self.nu not in (1, 2):
            raise PreconditionError("eps and nu strategies are 1 or 2")
        if self.horizon is not None and self.horizon < 1:
            raise PreconditionError("horizon must be a positive integer")
        if self.tf_exponent not in TF_EXPONENTS:
            raise PreconditionError(f"tf_exponent must be one of {TF_EXPONENTS}")

    @property
    def name(self) -> str:
        return f"eps{self.eps}&nu{self.nu}"


class Alphabet:
    """Sorted activity labels shared by every vector of a session."""

    def __init__(self, labels: Iterable[str]):
        labs = sorted(set(labels))
        for x in labs:
            if is_tau(x) or not isinstance(x, str) or not x:
                raise PreconditionError(f"invalid activity label {x!r}")
        self.labels: tuple[str, ...] = tuple(labs)
        self.position = {a: i for i, a in enumerate(self.labels)}

    @classmethod
    def of(cls, *trace_sets: Iterable[Sequence[str]]) -> "Alphabet":
        return cls(x for traces in trace_sets for t in traces for x in t)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __contains__(self, label) -> bool:
        return label in self.position

    @property
    def pairs(self) -> list[tuple[str, str]]:
        return [(a, b) for a in self.labels for b in self.labels]

    @property
    def dim(self) -> int:
        n = len(self.labels)
        return n + n * n

    def pair_index(self, a: str, b: str) -> int:
        return self.position[a] * len(self.labels) + self.position[b]

    def column_names(self) -> list[str]:
        sep = "" if all(len(a) == 1 for a in self.labels) else "|"
        return list(self.labels) + [a + sep + b for a, b in self.pairs]

    def check(self, labels: Iterable) -> None:
        for x in labels:
            if not is_tau(x) and x not in self.position:
                raise UsageError(
                    f"label {x!r} is outside the session alphabet; "
                    "build the alphabet from the model and the log together"
                )


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    alphabet: Alphabet
    values: np.ndarray

    @property
    def nu_block(self) -> np.ndarray:
        return self.values[: len(self.alphabet)]

    @property
    def eps_block(self) -> np.ndarray:
        return self.values[len(self.alphabet):]

    def nu(self, a: str) -> float:
        return float(self.values[self.alphabet.position[a]])

    def eps(self, a: str, b: str) -> float:
        return float(self.values[len(self.alphabet) + self.alphabet.pair_index(a, b)])


def _compensated_sum(terms: Iterable[np.ndarray], shape) -> np.ndarray:
    """Element-wise Neumaier summation."""
    s = np.zeros(shape)
    comp = np.zeros(shape)
    for t in terms:
        total = s + t
        big = np.abs(s) >= np.abs(t)
        comp += np.where(big, (s - total) + t, (t - total) + s)
        s = total
    return s + comp


def _visible_part(tg: TransitionGraph, alphabet: Alphabet) -> tuple[np.ndarray, np.ndarray]:
    vis = tg.visible
    labels = [tg.labels[i] for i in vis]
    alphabet.check(labels)
    L = label_matrix(labels, alphabet.labels)
    return L, tg.R[np.ix_(vis, vis)]


def string_embedding(
    trace: Sequence[str], decay: float = DEFAULT_DECAY, alphabet: Alphabet | None = None
) -> np.ndarray:
    """2-gram block of a single trace: pair (a, b) collects decay**l for
    every a occurring l positions before b."""
    alphabet = alphabet or Alphabet(trace)
    tg = linear_tg(trace)
    L, R = _visible_part(tg, alphabet)
    n = len(alphabet)
    P = R
    terms = []
    for ell in range(1, len(trace)):
        terms.append(decay**ell * (L.T @ P @ L))
        P = P @ R
    return _compensated_sum(terms, (n, n)).reshape(-1)


def _horizon(g: WeightedTransitionGraph, cfg: EmbeddingConfig) -> int:
    return cfg.horizon if cfg.horizon is not None else max(g.horizon, 1)


def _power_series(g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet):
    """Per-power label-pair matrices, path totals and positive-entry counts."""
    L, R = _visible_part(g.tg, alphabet)
    P = R
    for i in range(1, _horizon(g, cfg) + 1):
        if not P.any():
            break
        yield i, L.T @ P @ L, float(P.sum()), int(np.count_nonzero(P > 0))
        P = P @ R


def sub_embedding_eps(
    g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet
) -> np.ndarray:
    n = len(alphabet)
    if cfg.eps == 1:
        terms = (cfg.decay**i * M / total for i, M, total, _ in _power_series(g, cfg, alphabet))
        return _compensated_sum(terms, (n, n)).reshape(-1)
    L, _ = _visible_part(g.tg, alphabet)
    counts = L.sum(axis=0)
    safe = np.where(counts > 0, counts, 1.0)[:, None]
    terms = (cfg.decay**i * M / safe for i, M, _, _ in _power_series(g, cfg, alphabet))
    return _compensated_sum(terms, (n, n)).reshape(-1)


def sub_embedding_nu(
    g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet
) -> np.ndarray:
    nu = np.zeros(len(alphabet))
    if cfg.nu == 2:
        return nu
    for t in g.traces:
        if not t:
            continue
        alphabet.check(t)
        for x in t:
            nu[alphabet.position[x]] += 1.0 / len(t)
    total = nu.sum()
    return nu / total if total > 0 else nu


def tf_exponent(g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet) -> int:
    if cfg.tf_exponent == "edges":
        return g.tg.edge_count()
    return sum(nnz for _, _, _, nnz in _power_series(g, cfg, alphabet))


def _unit(v: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(v))
    return v / nrm if nrm > 0 else v


def embedding_parts(
    g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet
) -> tuple[float, np.ndarray]:
    """(scale, unscaled vector): the embedding is their product."""
    scale = cfg.tf ** tf_exponent(g, cfg, alphabet)
    nu = _unit(sub_embedding_nu(g, cfg, alphabet))
    eps = _unit(sub_embedding_eps(g, cfg, alphabet)) * g.omega
    return scale, np.concatenate([nu, eps])


def tg_embedding(
    g: WeightedTransitionGraph, cfg: EmbeddingConfig, alphabet: Alphabet
) -> EmbeddingVector:
    """Unit-normalised blocks, the 2-gram block weighted by omega, both
    scaled by tf raised to the graph's size exponent."""
    scale, unit = embedding_parts(g, cfg, alphabet)
    return EmbeddingVector(alphabet, unit * scale)


def embed_trace(trace: Sequence[str], cfg: EmbeddingConfig, alphabet: Alphabet) -> EmbeddingVector:
    return tg_embedding(weighted_linear(trace), cfg, alphabet)


def kernel(e: EmbeddingVector | np.ndarray, e2: EmbeddingVector | np.ndarray) -> float:
    x = e.values if isinstance(e, EmbeddingVector) else np.asarray(e)
    y = e2.values if isinstance(e2, EmbeddingVector) else np.asarray(e2)
    return float(x @ y)


def row_kernels(V: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Kernel of every row of ``V`` with ``q``, row by row, so a row's value
    does not depend on which other rows are scored with it."""
    return (V * q).sum(axis=1)


def kernel_distance(e, e2) -> float:
    """sqrt(k(x,x) - 2k(x,y) + k(y,y))."""
    return math.sqrt(max(0.0, kernel(e, e) - 2.0 * kernel(e, e2) + kernel(e2, e2)))


MODES = ("kernel", "distance", "by-kernel")
# relative width of the band treated as a possible tie in kernel mode
_TIE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class _ScaleClass:
    scale: float
    rows: np.ndarray
    index: knn.KnnIndex | None
    radius: float


def _scale_classes(scales: np.ndarray, units: np.ndarray, kind: str) -> tuple[_ScaleClass, ...]:
    """Group rows sharing a tf scale; inside a group, inner-product order
    equals Euclidean order after padding every row to a common norm."""
    out = []
    for s in sorted(set(scales.tolist()), reverse=True):
        rows = np.nonzero(scales == s)[0]
        if s == 0.0:
            out.append(_ScaleClass(s, rows, None, 0.0))
            continue
        V = units[rows]
        norms2 = (V * V).sum(axis=1)
        radius = float(np.sqrt(norms2.max()))
        pad = np.sqrt(np.maximum(radius * radius - norms2, 0.0))
        index = knn.build(np.column_stack([V, pad]), kind, ids=rows.tolist())
        out.append(_ScaleClass(s, rows, index, radius))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Embeddings of every model trace, indexed once and then read-only.

    ``index`` holds the stored vectors as they are (Euclidean mode);
    ``classes`` hold the per-scale padded indexes used for kernel top-k.
    """

    alphabet: Alphabet
    cfg: EmbeddingConfig
    traces: tuple[ModelTrace, ...]
    vectors: np.ndarray
    scales: np.ndarray
    units: np.ndarray
    index: knn.KnnIndex
    classes: tuple[_ScaleClass, ...]
    build_seconds: float = 0.0

    def kernels(self, q: np.ndarray) -> np.ndarray:
        return row_kernels(self.vectors, q)

    def with_index(self, kind: str) -> "EmbeddingTable":
        """Same vectors behind a different index backend."""
        index = knn.build(self.vectors, kind)
        return replace(self, index=index, classes=_scale_classes(self.scales, self.units, kind))


def build_table(
    tg: TransitionGraph,
    traces: Iterable[ModelTrace],
    cfg: EmbeddingConfig = EmbeddingConfig(),
    alphabet: Alphabet | None = None,
    index_kind: str = "kd",
    b: int = DEFAULT_SILENCE_BOUND,
) -> EmbeddingTable:
    t0 = time.perf_counter()
    pool = tuple(sorted(traces, key=lambda m: m.labels))
    if not pool:
        raise PreconditionError("no model traces to embed")
    if alphabet is None:
        alphabet = Alphabet(tg.alphabet)
    parts = [embedding_parts(project(tg, m.labels, b), cfg, alphabet) for m in pool]
    scales = np.array([s for s, _ in parts])
    units = np.vstack([u for _, u in parts])
    vectors = units * scales[:, None]
    for arr in (scales, units, vectors):
        arr.setflags(write=False)
    index = knn.build(vectors, index_kind)
    classes = _scale_classes(scales, units, index_kind)
    return EmbeddingTable(
        alphabet, cfg, pool, vectors, scales, units, index, classes, time.perf_counter() - t0
    )


def _kernel_topk(table: EmbeddingTable, u: np.ndarray, q: np.ndarray, k: int) -> list[int]:
    """Exact top-k by kernel, visiting scale classes from the largest scale
    and skipping any class whose best possible score cannot enter.

    Inside a class the padded distances rank candidates only up to rounding,
    so the search widens until the last candidate is clearly below the k-th
    score; tied kernels are then ordered by position like the linear scan.
    """
    best: list[tuple[float, int]] = []
    unorm = float(np.linalg.norm(u))
    qpad = np.concatenate([u, [0.0]])
    for cls in table.classes:
        bound = cls.scale * unorm * cls.radius
        slack = _TIE_SLACK * bound
        if len(best) >= k and bound + slack < -best[k - 1][0]:
            continue
        size = len(cls.rows)
        if cls.index is None:
            ids = [int(i) for i in cls.rows[:k]]
        else:
            m = min(k, size)
            while True:
                ids = [i for i, _ in cls.index.query(qpad, m)]
                scores = row_kernels(table.vectors[ids], q)
                kth = np.sort(scores)[::-1][min(k, m) - 1]
                if m == size or scores[-1] < kth - slack:
                    break
                m = min(2 * m, size)
        scores = row_kernels(table.vectors[ids], q)
        best = sorted(best + [(-float(v), i) for v, i in zip(scores, ids)])[:k]
    return [i for _, i in best]


def approx_topk(
    table: EmbeddingTable, trace: Sequence[str], k: int, mode: str = "kernel"
) -> Ranking:
    """Model traces closest to the embedded log trace.

    ``kernel`` returns the k largest kernel values through the prebuilt
    indexes; ``distance`` returns the k nearest stored vectors under the
    Euclidean distance; ``by-kernel`` scores every model vector directly.
    """
    if k <= 0:
        raise PreconditionError("k must be >= 1")
    if mode not in MODES:
        raise PreconditionError(f"unknown mode {mode!r}; expected one of {MODES}")
    t0 = time.perf_counter()
    g = weighted_linear(trace)
    scale, u = embedding_parts(g, table.cfg, table.alphabet)
    q = u * scale
    t1 = time.perf_counter()
    n = len(table.traces)
    kk = min(k, n)
    if mode == "distance":
        order = [i for i, _ in table.index.query(q, kk)]
    elif mode == "kernel":
        order = _kernel_topk(table, u, q, kk)
    else:
        ks = table.kernels(q)
        order = sorted(range(n), key=lambda i: (-ks[i], i))[:kk]
    t2 = time.perf_counter()
    ks = row_kernels(table.vectors[order], q) if order else np.zeros(0)
    ds = knn.distances(table.vectors[order], q) if order else np.zeros(0)
    items = [EmbeddedMatch(table.traces[i], float(kv), float(d)) for i, kv, d in zip(order, ks, ds)]
    if mode != "distance":
        items.sort(key=lambda m: (-m.kernel, m.trace))
    return Ranking(tuple(items), k_exceeded=k > n, timings={"embedding": t1 - t0, "search": t2 - t1})
