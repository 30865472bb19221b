"""Exact k-nearest-neighbour search under the Euclidean distance.

Two trees (vantage-point and k-d) plus a linear scan that serves as the
reference. All three return identical answers: results are ordered by
(distance, id) and subtrees are pruned only when their lower bound exceeds
the current k-th distance, so equal-distance candidates are never lost.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Any, Hashable, Sequence, Union

import numpy as np

from .errors import PreconditionError, StructuralError

KINDS = ("vp", "kd", "linear")
LEAF_SIZE = 16
# slack on pruning bounds so floating-point rounding in the triangle
# inequality never discards a tied candidate
_SLACK = 1e-9


def distances(X: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distance; every backend computes distances through here."""
    diff = X - q
    return np.sqrt((diff * diff).sum(axis=1))


class _TopK:
    def __init__(self, k: int):
        self.k = k
        self.items: list[tuple[float, Any]] = []

    @property
    def radius(self) -> float:
        return self.items[-1][0] if len(self.items) == self.k else np.inf

    def push_many(self, ds: np.ndarray, ids: Sequence[Hashable]) -> None:
        for d, i in zip(ds.tolist(), ids):
            item = (d, i)
            if len(self.items) < self.k:
                bisect.insort(self.items, item)
            elif item < self.items[-1]:
                bisect.insort(self.items, item)
                self.items.pop()

    def prunes(self, bound: float) -> bool:
        r = self.radius
        return bound > r + r * _SLACK


@dataclass
class _Leaf:
    idx: np.ndarray


@dataclass
class _VPNode:
    vantage: int
    inner_max: float
    outer_min: float
    inner: "_Tree"
    outer: "_Tree | None"


@dataclass
class _KDNode:
    dim: int
    left_max: float
    right_min: float
    left: "_Tree"
    right: "_Tree"


_Tree = Union[_Leaf, _VPNode, _KDNode]


def _build_vp(X: np.ndarray, idx: np.ndarray, leaf_size: int) -> _Tree:
    if len(idx) <= leaf_size:
        return _Leaf(idx)
    vantage = int(idx[0])
    rest = idx[1:]
    d = distances(X[rest], X[vantage])
    order = np.argsort(d, kind="stable")
    half = len(rest) // 2
    inner, outer = rest[order[:half]], rest[order[half:]]
    return _VPNode(
        vantage,
        float(d[order[half - 1]]) if half else 0.0,
        float(d[order[half]]),
        _build_vp(X, inner, leaf_size),
        _build_vp(X, outer, leaf_size) if len(outer) else None,
    )


def _build_kd(X: np.ndarray, idx: np.ndarray, leaf_size: int, depth: int) -> _Tree:
    if len(idx) <= leaf_size:
        return _Leaf(idx)
    P = X[idx]
    dims = X.shape[1]
    if dims <= 3:
        dim = depth % dims
    else:
        dim = int(np.argmax(P.max(axis=0) - P.min(axis=0)))
    order = np.argsort(P[:, dim], kind="stable")
    half = len(idx) // 2
    left, right = idx[order[:half]], idx[order[half:]]
    return _KDNode(
        dim,
        float(X[left[-1], dim]),
        float(X[right[0], dim]),
        _build_kd(X, left, leaf_size, depth + 1),
        _build_kd(X, right, leaf_size, depth + 1),
    )


@dataclass(frozen=True, eq=False)
class KnnIndex:
    kind: str
    points: np.ndarray
    ids: tuple[Hashable, ...]
    root: _Tree
    leaf_size: int = LEAF_SIZE

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def query(self, q: Sequence[float] | np.ndarray, k: int) -> list[tuple[Hashable, float]]:
        """The ``k`` nearest stored points as (id, distance), ascending."""
        q = self._check_query(q, k)
        top = _TopK(k)
        if self.kind == "linear":
            top.push_many(distances(self.points, q), self.ids)
        else:
            self._search(self.root, q, top)
        return [(i, d) for d, i in top.items]

    def _check_query(self, q, k: int) -> np.ndarray:
        if k <= 0:
            raise PreconditionError("k must be >= 1")
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dimension,):
            raise StructuralError(
                f"query has dimension {q.shape}, index has {self.dimension}"
            )
        return q

    def _search(self, node: _Tree, q: np.ndarray, top: _TopK) -> None:
        X, ids = self.points, self.ids
        if isinstance(node, _Leaf):
            top.push_many(distances(X[node.idx], q), [ids[i] for i in node.idx])
            return
        if isinstance(node, _VPNode):
            d = float(distances(X[node.vantage][None, :], q)[0])
            top.push_many(np.array([d]), [ids[node.vantage]])
            near_inner = d <= (node.inner_max + node.outer_min) / 2
            branches = [(node.inner, d - node.inner_max), (node.outer, node.outer_min - d)]
            if not near_inner:
                branches.reverse()
        else:
            x = q[node.dim]
            branches = [(node.left, x - node.left_max), (node.right, node.right_min - x)]
            if x > (node.left_max + node.right_min) / 2:
                branches.reverse()
        for child, bound in branches:
            if child is None or top.prunes(bound):
                continue
            self._search(child, q, top)


def build(
    points: Sequence[Sequence[float]] | np.ndarray,
    kind: str = "kd",
    ids: Sequence[Hashable] | None = None,
    leaf_size: int = LEAF_SIZE,
) -> KnnIndex:
    if kind not in KINDS:
        raise PreconditionError(f"unknown index kind {kind!r}; expected one of {KINDS}")
    try:
        X = np.array(points, dtype=float)
    except ValueError as exc:
        raise StructuralError(f"points have mixed dimensions: {exc}") from None
    if X.ndim != 2 or X.shape[0] == 0:
        raise StructuralError("need a non-empty list of equal-dimension points")
    if not np.all(np.isfinite(X)):
        raise StructuralError("point coordinates must be finite")
    X.setflags(write=False)
    ids = tuple(range(len(X))) if ids is None else tuple(ids)
    if len(ids) != len(X):
        raise StructuralError("one id per point required")
    idx = np.arange(len(X))
    if kind == "vp":
        root: _Tree = _build_vp(X, idx, leaf_size)
    elif kind == "kd":
        root = _build_kd(X, idx, leaf_size, 0)
    else:
        root = _Leaf(idx)
    return KnnIndex(kind, X, ids, root, leaf_size)


def brute_force(
    points: Sequence[Sequence[float]] | np.ndarray,
    q: Sequence[float] | np.ndarray,
    k: int,
    ids: Sequence[Hashable] | None = None,
) -> list[tuple[Hashable, float]]:
    """Full scan and sort; the reference answer for the trees."""
    if k <= 0:
        raise PreconditionError("k must be >= 1")
    X = np.asarray(points, dtype=float)
    ids = list(range(len(X))) if ids is None else list(ids)
    ds = distances(X, np.asarray(q, dtype=float)).tolist()
    ranked = sorted(zip(ds, ids))[:k]
    return [(i, d) for d, i in ranked]
