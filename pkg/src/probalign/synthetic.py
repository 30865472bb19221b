"""Random layered transition graphs and perturbed query logs for benchmarks."""

from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from .graph import TransitionGraph
from .net import TAU
from .unfold import Trace


def layered_tg(
    seed: int = 0,
    stages: int = 7,
    width: int = 4,
    labels: str | Sequence[str] = "abcdefg",
    fan: int = 2,
    loop: float = 0.3,
    early_exit: float = 0.2,
) -> TransitionGraph:
    """A start node, ``stages`` layers of ``width`` labelled nodes, an end node.

    Each node moves to ``fan`` random nodes of the next layer, sometimes back
    to a node of its own layer (``loop``), and in the second half sometimes
    straight to the end (``early_exit``). Every row is uniform, which is what
    the constant weight estimator would give.
    """
    rng = random.Random(seed)
    labels = list(labels)
    names = ["start"]
    labs: list = [TAU]
    layers = []
    for s in range(stages):
        layer = []
        for w in range(width):
            layer.append(len(names))
            names.append(f"n{s}_{w}")
            labs.append(rng.choice(labels))
        layers.append(layer)
    names.append("end")
    labs.append(TAU)
    end = len(names) - 1
    A = np.zeros((len(names), len(names)))
    for j in layers[0]:
        A[0, j] = 1
    for s, layer in enumerate(layers):
        for i in layer:
            if s + 1 < stages:
                for j in rng.sample(layers[s + 1], min(fan, width)):
                    A[i, j] = 1
                if rng.random() < loop:
                    A[i, rng.choice(layer)] = 1
            else:
                A[i, end] = 1
            if s >= stages // 2 and rng.random() < early_exit:
                A[i, end] = 1
    R = A / A.sum(axis=1, keepdims=True).clip(min=1)
    return TransitionGraph(tuple(labs), R, 0, end, tuple(names))


def perturb(trace: Sequence[str], alphabet: Sequence[str], rng: random.Random, max_edits: int = 2) -> Trace:
    """Apply up to ``max_edits`` random insertions, deletions or substitutions."""
    t = list(trace)
    for _ in range(rng.randint(0, max_edits)):
        op = rng.random()
        i = rng.randrange(len(t) + 1)
        if op < 1 / 3:
            t.insert(i, rng.choice(alphabet))
        elif op < 2 / 3 and len(t) > 1 and i < len(t):
            t.pop(i)
        elif i < len(t):
            t[i] = rng.choice(alphabet)
    return tuple(t)


def query_log(
    traces: Sequence[Trace], alphabet: Sequence[str], n: int = 50, seed: int = 1, max_edits: int = 2
) -> list[Trace]:
    """``n`` model traces drawn uniformly, each with a few random edits."""
    rng = random.Random(seed)
    pool = sorted(traces)
    return [perturb(rng.choice(pool), list(alphabet), rng, max_edits) for _ in range(n)]
