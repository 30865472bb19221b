"""Benchmark harness: ranking quality and query time of both strategies.

For each query trace the optimal ranking is the reference. Every strategy
is run twice per index kind: once at the session's k, timed, and once over
the whole trace set, untimed, to compute Spearman's rho against the
reference. Optimal query time counts the per-query indexing of the
transformed points plus the search; approximate query time counts the
embedding of the query plus the search over the prebuilt table.
"""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .embedding import Alphabet, EmbeddingConfig, EmbeddingTable, approx_topk, build_table
from .formats import csv_text, fmt
from .graph import TransitionGraph
from .ranking import DEFAULT_C, DEFAULT_K, brute_force_ranking, optimal_topk, spearman
from .unfold import ModelTrace, Trace

OPTIMAL = "optimal"
STRATEGIES = ("eps1&nu1", "eps1&nu2", "eps2&nu1", "eps2&nu2")
ALL = "all"
HEADER = (
    "length", "strategy", "index", "queries", "mean_spearman",
    "mean_time", "mean_prep_time", "mean_search_time", "table_build_time",
)


@dataclass
class Row:
    length: str
    strategy: str
    index: str
    queries: int
    mean_spearman: float
    mean_time: float
    mean_prep_time: float
    mean_search_time: float
    table_build_time: float = 0.0

    def cells(self) -> list:
        return [
            self.length, self.strategy, self.index, self.queries, fmt(self.mean_spearman),
            fmt(self.mean_time), fmt(self.mean_prep_time), fmt(self.mean_search_time),
            fmt(self.table_build_time),
        ]


@dataclass
class BenchmarkReport:
    rows: list[Row] = field(default_factory=list)

    def to_csv(self) -> str:
        return csv_text((r.cells() for r in self.rows), HEADER)

    def row(self, length: str, strategy: str, index: str) -> Row:
        for r in self.rows:
            if (r.length, r.strategy, r.index) == (length, strategy, index):
                return r
        raise KeyError((length, strategy, index))


def strategy_config(name: str, base: EmbeddingConfig) -> EmbeddingConfig:
    eps, nu = name.replace("eps", "").replace("nu", "").split("&")
    return EmbeddingConfig(base.decay, base.tf, int(eps), int(nu), base.horizon, base.tf_exponent)


@dataclass
class _Sample:
    spearman: float
    prep: float
    search: float


def run_benchmark(
    tg: TransitionGraph,
    traces: Sequence[ModelTrace],
    queries: Sequence[Trace],
    strategies: Sequence[str] = (OPTIMAL, "eps1&nu1"),
    index_kinds: Sequence[str] = ("vp", "kd"),
    k: int = DEFAULT_K,
    c: int = DEFAULT_C,
    cfg: EmbeddingConfig = EmbeddingConfig(),
    mode: str = "kernel",
    b: int = 3,
) -> BenchmarkReport:
    traces = list(traces)
    n = len(traces)
    alphabet = Alphabet.of([m.labels for m in traces], queries)
    tables: dict[tuple[str, str], EmbeddingTable] = {}
    for name in strategies:
        if name == OPTIMAL:
            continue
        base = build_table(tg, traces, strategy_config(name, cfg), alphabet, index_kinds[0], b)
        for kind in index_kinds:
            tables[name, kind] = base if kind == index_kinds[0] else base.with_index(kind)

    samples: dict[tuple[int, str, str], list[_Sample]] = defaultdict(list)
    for q in queries:
        reference = brute_force_ranking(traces, q, c)
        for name in strategies:
            for kind in index_kinds:
                if name == OPTIMAL:
                    timed = optimal_topk(traces, q, k, c, kind)
                    full = optimal_topk(traces, q, n, c, kind)
                    prep = timed.timings["indexing"]
                else:
                    timed = approx_topk(tables[name, kind], q, k, mode)
                    full = approx_topk(tables[name, kind], q, n, mode)
                    prep = timed.timings["embedding"]
                rho = spearman(full, reference)
                samples[len(q), name, kind].append(_Sample(rho, prep, timed.timings["search"]))

    report = BenchmarkReport()
    lengths = sorted({key[0] for key in samples})
    for length in [*lengths, ALL]:
        for name in strategies:
            for kind in index_kinds:
                if length == ALL:
                    group = [s for ln in lengths for s in samples[ln, name, kind]]
                else:
                    group = samples[length, name, kind]
                if not group:
                    continue
                prep = statistics.fmean(s.prep for s in group)
                search = statistics.fmean(s.search for s in group)
                build = tables[name, kind].build_seconds if (name, kind) in tables else 0.0
                report.rows.append(Row(
                    str(length), name, kind, len(group),
                    statistics.fmean(s.spearman for s in group),
                    prep + search, prep, search, build,
                ))
    return report


FIGURES = (
    ("mean_spearman", "mean Spearman rho vs optimal", "spearman", False),
    ("mean_time", "mean query time (s)", "time", True),
)


def figure_paths(stem: Path) -> list[Path]:
    return [stem.with_name(f"{stem.name}_{fname}.png") for _, _, fname, _ in FIGURES]


def render_figures(report: BenchmarkReport, stem: Path) -> list[Path]:
    """Spearman and query time per trace length, one line per strategy and index."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    per_length = [r for r in report.rows if r.length != ALL]
    series: dict[tuple[str, str], list[Row]] = defaultdict(list)
    for r in per_length:
        series[r.strategy, r.index].append(r)

    paths = figure_paths(stem)
    for (metric, ylabel, _, log), path in zip(FIGURES, paths):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for (strategy, kind), rows in sorted(series.items()):
            xs = [int(r.length) for r in rows]
            style = "--" if kind == "vp" else ":" if kind == "linear" else "-"
            ax.plot(xs, [getattr(r, metric) for r in rows], style, marker="o", label=f"{strategy} / {kind}")
        ax.set_xlabel("query trace length")
        ax.set_ylabel(ylabel)
        if log:
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return paths
