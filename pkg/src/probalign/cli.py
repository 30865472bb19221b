"""Command line: ``unfold``, ``align``, ``embed`` and ``bench``.

Exit codes: 0 success, 1 usage or precondition error, 2 parse or structural
error, 3 model assumption violated. Output files are written to a temporary
name and moved into place only when the command succeeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench, synthetic
from .config import FORMATS, SessionConfig, load_model
from .embedding import TF_EXPONENTS, Alphabet, EmbeddingConfig, approx_topk, build_table, embed_trace
from .errors import ProbAlignError, UsageError
from .formats import embedding_csv, parse_log, ranking_csv, ranking_json, unfold_csv, vectors_csv
from .knn import KINDS
from .net import ESTIMATORS
from .ranking import optimal_topk
from .unfold import unfold


# bench caps model traces at this length unless --nmax says otherwise
BENCH_NMAX = 12


@dataclass
class Output:
    text: str
    report: bench.BenchmarkReport | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _model_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("model", type=Path, nargs=None if required else "?", help="PNML net or transition-graph text file")
    p.add_argument("--format", choices=FORMATS, help="model format (default: from the file extension)")
    p.add_argument("--estimator", default="asgiven", choices=sorted(ESTIMATORS), help="weight estimator for nets")
    p.add_argument("--b", type=_positive_int, default=3, help="bound on consecutive silent steps")
    p.add_argument("--rho", type=float, default=1e-5, help="probability threshold for model traces")
    p.add_argument("--nmax", type=int, default=None, help="maximum model trace length")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")


def _embedding_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="decay", type=float, default=0.07, help="decay factor")
    p.add_argument("--tf", type=float, default=1e-4, help="tuning factor")
    p.add_argument("--eps", type=int, choices=(1, 2), default=1, help="2-gram sub-embedding")
    p.add_argument("--nu", type=int, choices=(1, 2), default=1, help="label-frequency sub-embedding")
    p.add_argument("--horizon", type=_positive_int, default=None, help="path-length horizon")
    p.add_argument(
        "--tf-exponent", choices=TF_EXPONENTS, default="paths",
        help="what tf is raised to: positive entries of R^1..R^l (paths) or of R (edges)",
    )


def _query_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--trace", help='one log trace, activities separated by spaces, e.g. "c a b a"')
    src.add_argument("--log", type=Path, help="log file, one trace per line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probalign", description="Probabilistic trace alignment against stochastic workflow nets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("unfold", help="list model traces with their probabilities")
    _model_args(p)

    p = sub.add_parser("align", help="rank model traces against log traces")
    _model_args(p)
    _query_args(p)
    _embedding_args(p)
    p.add_argument("--strategy", choices=("optimal", "approx"), default="optimal")
    p.add_argument("--c", type=_positive_int, default=5, help="edit-distance scale in the similarity")
    p.add_argument("--k", type=_positive_int, default=20, help="number of model traces to return")
    p.add_argument("--index", choices=KINDS, default="kd", help="k-NN index backend")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--by-kernel", action="store_true", help="approx: rank by a linear kernel scan")
    mode.add_argument("--by-distance", action="store_true", help="approx: nearest stored vectors by Euclidean distance")
    p.add_argument("--json", action="store_true", help="write JSON instead of CSV")

    p = sub.add_parser("embed", help="write the embedding table of the model (or of log traces)")
    _model_args(p)
    _query_args(p)
    _embedding_args(p)

    p = sub.add_parser("bench", help="compare strategies over a log and report Spearman and timings")
    _model_args(p, required=False)
    p.add_argument("--log", type=Path, help="pre-split log of query traces")
    _embedding_args(p)
    p.add_argument("--synthetic", type=int, metavar="SEED", help="use a random layered model instead of a file")
    p.add_argument("--queries", type=_positive_int, default=50, help="number of generated queries when no log is given")
    p.add_argument("--strategies", default="optimal,eps1&nu1", help="comma-separated: optimal and/or eps{1,2}&nu{1,2}")
    p.add_argument("--indexes", default="vp,kd", help="comma-separated index kinds")
    p.add_argument("--c", type=_positive_int, default=5)
    p.add_argument("--k", type=_positive_int, default=20)
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    return parser


def _session(args: argparse.Namespace) -> SessionConfig:
    return SessionConfig(
        model=args.model,
        format=args.format,
        rho=args.rho,
        n_max=args.nmax,
        c=getattr(args, "c", 5),
        k=getattr(args, "k", 20),
        decay=getattr(args, "decay", 0.07),
        tf=getattr(args, "tf", 1e-4),
        eps=getattr(args, "eps", 1),
        nu=getattr(args, "nu", 1),
        horizon=getattr(args, "horizon", None),
        tf_exponent=getattr(args, "tf_exponent", "paths"),
        index=getattr(args, "index", "kd"),
        b=args.b,
        estimator=args.estimator,
    )


def _queries(args: argparse.Namespace) -> list[tuple[str, ...]] | None:
    if getattr(args, "trace", None) is not None:
        q = tuple(args.trace.split())
        if not q:
            raise UsageError("--trace is empty")
        return [q]
    if getattr(args, "log", None) is not None:
        try:
            text = args.log.read_bytes().decode("utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read log: {exc}") from None
        log = parse_log(text)
        if not log:
            raise UsageError("log contains no traces")
        return log
    return None


def cmd_unfold(args: argparse.Namespace) -> Output:
    cfg = _session(args)
    traces = unfold(load_model(cfg), cfg.rho, cfg.n_max)
    return Output(unfold_csv(traces))


def cmd_align(args: argparse.Namespace) -> Output:
    cfg = _session(args)
    queries = _queries(args)
    if queries is None:
        raise UsageError("align needs --trace or --log")
    tg = load_model(cfg)
    traces = unfold(tg, cfg.rho, cfg.n_max)
    if args.strategy == "optimal":
        rankings = [optimal_topk(traces, q, cfg.k, cfg.c, cfg.index) for q in queries]
    else:
        alphabet = Alphabet.of([m.labels for m in traces], queries)
        table = build_table(tg, traces, cfg.embedding(), alphabet, cfg.index, cfg.b)
        mode = "by-kernel" if args.by_kernel else "distance" if args.by_distance else "kernel"
        rankings = [approx_topk(table, q, cfg.k, mode) for q in queries]
    if args.json:
        docs = [json.loads(ranking_json(r)) for r in rankings]
        if len(queries) == 1:
            return Output(json.dumps(docs[0], indent=2) + "\n")
        body = [{"query": " ".join(q), **d} for q, d in zip(queries, docs)]
        return Output(json.dumps(body, indent=2) + "\n")
    if len(queries) == 1:
        return Output(ranking_csv(rankings[0]))
    lines = []
    for n, r in enumerate(rankings):
        text = ranking_csv(r).splitlines()
        if n == 0:
            lines.append("query," + text[0])
        lines += [f"{n + 1}," + row for row in text[1:]]
    return Output("\n".join(lines) + "\n")


def cmd_embed(args: argparse.Namespace) -> Output:
    cfg = _session(args)
    queries = _queries(args)
    tg = load_model(cfg)
    traces = unfold(tg, cfg.rho, cfg.n_max)
    alphabet = Alphabet.of([m.labels for m in traces], queries or [])
    if queries is None:
        return Output(embedding_csv(build_table(tg, traces, cfg.embedding(), alphabet, cfg.index, cfg.b)))
    vectors = np.vstack([embed_trace(q, cfg.embedding(), alphabet).values for q in queries])
    return Output(vectors_csv(alphabet, queries, vectors))


def cmd_bench(args: argparse.Namespace) -> Output:
    if (args.model is None) == (args.synthetic is None):
        raise UsageError("bench needs exactly one of a model file or --synthetic SEED")
    n_max = args.nmax if args.nmax is not None else BENCH_NMAX
    if args.synthetic is not None:
        tg = synthetic.layered_tg(args.synthetic)
    else:
        tg = load_model(_session(args))
    traces = unfold(tg, args.rho, n_max)
    if not traces:
        raise UsageError("the model has no traces above the threshold")
    queries = _queries(args) or synthetic.query_log(
        [m.labels for m in traces], tg.alphabet, args.queries, seed=(args.synthetic or 0) + 1
    )
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    for s in strategies:
        if s != bench.OPTIMAL and s not in bench.STRATEGIES:
            raise UsageError(f"unknown strategy {s!r}")
    kinds = [s.strip() for s in args.indexes.split(",") if s.strip()]
    for kind in kinds:
        if kind not in KINDS:
            raise UsageError(f"unknown index kind {kind!r}")
    emb = EmbeddingConfig(args.decay, args.tf, horizon=args.horizon, tf_exponent=args.tf_exponent)
    report = bench.run_benchmark(tg, traces, queries, strategies, kinds, args.k, args.c, emb, b=args.b)
    return Output(report.to_csv(), None if args.no_figures else report)


COMMANDS = {"unfold": cmd_unfold, "align": cmd_align, "embed": cmd_embed, "bench": cmd_bench}


def _write(path: Path, out: Output) -> None:
    """Write the CSV (and figures) or leave nothing behind."""
    figures = bench.figure_paths(path.with_suffix("")) if out.report is not None else []
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(out.text)
        if out.report is not None:
            bench.render_figures(out.report, path.with_suffix(""))
        os.replace(tmp, path)
    except BaseException:
        for leftover in (Path(tmp), *figures):
            leftover.unlink(missing_ok=True)
        raise


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
        if args.out is None:
            sys.stdout.write(out.text)
        else:
            _write(args.out, out)
    except ProbAlignError as exc:
        print(f"probalign: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"probalign: error: {exc}", file=sys.stderr)
        return UsageError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
