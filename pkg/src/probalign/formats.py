"""Readers and writers: PNML nets, the plain-text graph format, trace logs,
and CSV/JSON renderings of the engine's outputs.

Numbers are written with ``repr``-style 17 significant digits so that two
runs (or two implementations) can be diffed byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence
from xml.parsers import expat
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .embedding import Alphabet, EmbeddingTable
from .errors import ParseError, StructuralError
from .graph import TransitionGraph
from .net import TAU, StochasticWorkflowNet, Transition, is_tau
from .ranking import EmbeddedMatch, RankedAlignment, Ranking
from .unfold import ModelTrace

TAU_TEXT = "tau"
WEIGHT_KEYS = ("weight",)
# ProM marks silent transitions with this activity value.
_PROM_INVISIBLE = "$invisible$"


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


# --------------------------------------------------------------------- PNML


@dataclass
class _Element:
    tag: str
    attrs: dict
    line: int
    children: list = field(default_factory=list)
    text: str = ""

    def find(self, tag: str) -> "_Element | None":
        return next((c for c in self.children if c.tag == tag), None)

    def iter(self, tag: str):
        if self.tag == tag:
            yield self
        for c in self.children:
            yield from c.iter(tag)


def _read_xml(data: bytes | str) -> _Element:
    """Parse into a light tree that keeps the line number of every element."""
    parser = expat.ParserCreate()
    stack: list[_Element] = []
    root: list[_Element] = []

    def start(tag, attrs):
        el = _Element(tag.split(":")[-1], attrs, parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(el)
        else:
            root.append(el)
        stack.append(el)

    def end(tag):
        stack.pop()

    def chars(text):
        if stack:
            stack[-1].text += text

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(data.encode() if isinstance(data, str) else data, True)
    except expat.ExpatError as exc:
        raise ParseError(f"malformed XML: {expat.ErrorString(exc.code)}", exc.lineno) from None
    if not root:
        raise ParseError("empty document", 1)
    return root[0]


def _name_of(el: _Element) -> str | None:
    name = el.find("name")
    if name is None:
        return None
    text = name.find("text")
    value = (text.text if text is not None else name.text).strip()
    return value or None


def _weight_of(el: _Element) -> float:
    for ts in el.iter("toolspecific"):
        for prop in ts.iter("property"):
            if prop.attrs.get("key") in WEIGHT_KEYS:
                try:
                    w = float(prop.text.strip())
                except ValueError:
                    raise ParseError(f"weight {prop.text.strip()!r} is not a number", prop.line) from None
                if not w > 0:
                    raise ParseError(f"transition {el.attrs.get('id')}: weight must be positive, got {w}", prop.line)
                return w
    return 1.0


def _is_invisible(el: _Element) -> bool:
    return any(ts.attrs.get("activity") == _PROM_INVISIBLE for ts in el.iter("toolspecific"))


def parse_pnml(data: bytes | str) -> StochasticWorkflowNet:
    """Read the place/transition/arc subset of PNML.

    A transition without a name (or flagged invisible) is silent. The
    source and sink places are found structurally and must be unique.
    """
    root = _read_xml(data)
    net_el = next(root.iter("net"), None)
    if net_el is None:
        raise ParseError("no <net> element", root.line)

    places: dict[str, int] = {}
    transitions: dict[str, Transition] = {}
    for el in net_el.iter("place"):
        pid = el.attrs.get("id")
        if not pid:
            raise ParseError("place without id", el.line)
        if pid in places or pid in transitions:
            raise ParseError(f"duplicate id {pid!r}", el.line)
        places[pid] = el.line
    for el in net_el.iter("transition"):
        tid = el.attrs.get("id")
        if not tid:
            raise ParseError("transition without id", el.line)
        if tid in places or tid in transitions:
            raise ParseError(f"duplicate id {tid!r}", el.line)
        label = None if _is_invisible(el) else _name_of(el)
        transitions[tid] = Transition(tid, TAU if label is None else label, _weight_of(el))

    arcs = set()
    for el in net_el.iter("arc"):
        src, dst = el.attrs.get("source"), el.attrs.get("target")
        if src is None or dst is None:
            raise ParseError("arc needs source and target", el.line)
        ok = (src in places and dst in transitions) or (src in transitions and dst in places)
        if not ok:
            raise ParseError(f"arc {src} -> {dst} must join a place and a transition", el.line)
        arcs.add((src, dst))

    has_in = {d for _, d in arcs}
    has_out = {s for s, _ in arcs}
    sources = [p for p in places if p not in has_in]
    sinks = [p for p in places if p not in has_out]
    if len(sources) != 1:
        raise ParseError(f"expected one source place, found {sorted(sources) or 'none'}", net_el.line)
    if len(sinks) != 1:
        raise ParseError(f"expected one sink place, found {sorted(sinks) or 'none'}", net_el.line)
    try:
        return StochasticWorkflowNet(
            tuple(places), tuple(transitions.values()), frozenset(arcs), sources[0], sinks[0]
        )
    except StructuralError as exc:
        raise ParseError(str(exc), net_el.line) from None


def write_pnml(net: StochasticWorkflowNet) -> str:
    """Inverse of :func:`parse_pnml`, used for fixtures and round trips."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>', "<pnml>", '  <net id="net">', '    <page id="page">']
    for p in net.places:
        out.append(f"      <place id={quoteattr(p)}/>")
    for t in net.transitions:
        out.append(f"      <transition id={quoteattr(t.id)}>")
        if not is_tau(t.label):
            out.append(f"        <name><text>{escape(t.label)}</text></name>")
        out.append('        <toolspecific tool="StochasticPetriNet" version="0.2">')
        out.append(f'          <property key="weight">{fmt(t.weight)}</property>')
        out.append("        </toolspecific>")
        out.append("      </transition>")
    for n, (s, d) in enumerate(sorted(net.arcs)):
        out.append(f"      <arc id=\"a{n}\" source={quoteattr(s)} target={quoteattr(d)}/>")
    out += ["    </page>", "  </net>", "</pnml>", ""]
    return "\n".join(out)


# --------------------------------------------------------- graph text format


def _lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def parse_tg(text: str) -> TransitionGraph:
    """Read ``start``/``end`` headers, ``node label`` lines and ``src dst prob`` edges.

    The first ``start``/``end`` lines are headers; later two-token lines
    are nodes, so nodes may themselves be called ``start`` or ``end``.
    Probabilities are parsed as decimals and converted once, so ``0.1`` is
    the nearest double to one tenth regardless of how many rows mention it.
    """
    start = end = None
    order: list[str] = []
    labels: dict[str, object] = {}
    edges: list[tuple[int, str, str, Decimal]] = []
    for n, tok in _lines(text):
        if len(tok) == 2 and tok[0] == "start" and start is None:
            start = tok[1]
        elif len(tok) == 2 and tok[0] == "end" and end is None:
            end = tok[1]
        elif len(tok) == 2:
            node, lab = tok
            if node in labels:
                raise ParseError(f"node {node!r} declared twice", n)
            labels[node] = TAU if lab == TAU_TEXT else lab
            order.append(node)
        elif len(tok) == 3:
            try:
                p = Decimal(tok[2])
            except InvalidOperation:
                raise ParseError(f"probability {tok[2]!r} is not a number", n) from None
            if not (0 < p <= 1):
                raise ParseError(f"probability {tok[2]} outside (0, 1]", n)
            edges.append((n, tok[0], tok[1], p))
        else:
            raise ParseError(f"cannot read {' '.join(tok)!r}", n)
    if start is None or end is None:
        raise ParseError("missing start or end header", None)
    for which, node in (("start", start), ("end", end)):
        if node not in labels:
            raise ParseError(f"{which} node {node!r} is not declared", None)
    pos = {name: i for i, name in enumerate(order)}
    R = np.zeros((len(order), len(order)))
    sums: dict[str, Decimal] = {}
    last_line: dict[str, int] = {}
    for n, s, d, p in edges:
        for node in (s, d):
            if node not in pos:
                raise ParseError(f"edge mentions undeclared node {node!r}", n)
        if R[pos[s], pos[d]]:
            raise ParseError(f"duplicate edge {s} -> {d}", n)
        R[pos[s], pos[d]] = float(p)
        sums[s] = sums.get(s, Decimal(0)) + p
        last_line[s] = n
    for node, total in sums.items():
        if abs(total - 1) > Decimal("1e-6"):
            raise ParseError(f"outgoing probabilities of {node!r} sum to {total}, not 1", last_line[node])
    try:
        return TransitionGraph(tuple(labels[x] for x in order), R, pos[start], pos[end], tuple(order))
    except StructuralError as exc:
        raise ParseError(str(exc), None) from None


def serialize_tg(tg: TransitionGraph) -> str:
    if tg.start is None or tg.end is None:
        raise StructuralError("only graphs with start and end nodes can be written")
    out = [f"start {tg.name(tg.start)}", f"end {tg.name(tg.end)}"]
    for i, lab in enumerate(tg.labels):
        out.append(f"{tg.name(i)} {TAU_TEXT if is_tau(lab) else lab}")
    for i, row in enumerate(tg.succ):
        for j, p in row:
            out.append(f"{tg.name(i)} {tg.name(j)} {float(p)!r}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------- logs


def parse_log(text: str) -> list[tuple[str, ...]]:
    """One trace per line, activities separated by whitespace; blank lines skipped."""
    return [tuple(line.split()) for line in text.splitlines() if line.strip()]


# ------------------------------------------------------------------- outputs


def csv_text(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_text(labels: Sequence[str]) -> str:
    return " ".join(labels)


def unfold_csv(traces: Iterable[ModelTrace]) -> str:
    return csv_text(((trace_text(m.labels), fmt(m.probability)) for m in traces), ("trace", "probability"))


OPTIMAL_HEADER = ("rank", "trace", "probability", "distance", "similarity", "score")
APPROX_HEADER = ("rank", "trace", "probability", "kernel", "distance")


def ranking_rows(ranking: Ranking) -> tuple[tuple[str, ...], list[list]]:
    if all(isinstance(it, RankedAlignment) for it in ranking):
        rows = [
            [n, trace_text(it.trace), fmt(it.model_trace.probability), it.distance, fmt(it.similarity), fmt(it.score)]
            for n, it in enumerate(ranking, 1)
        ]
        return OPTIMAL_HEADER, rows
    if all(isinstance(it, EmbeddedMatch) for it in ranking):
        rows = [
            [n, trace_text(it.trace), fmt(it.model_trace.probability), fmt(it.kernel), fmt(it.distance)]
            for n, it in enumerate(ranking, 1)
        ]
        return APPROX_HEADER, rows
    raise StructuralError("ranking mixes item kinds")


def ranking_csv(ranking: Ranking) -> str:
    header, rows = ranking_rows(ranking)
    return csv_text(rows, header)


def ranking_json(ranking: Ranking) -> str:
    header, rows = ranking_rows(ranking)
    items = []
    for row in rows:
        item = dict(zip(header, row))
        for key in header[2:]:
            if isinstance(item[key], str):
                item[key] = float(item[key])
        items.append(item)
    return json.dumps({"k_exceeded": ranking.k_exceeded, "items": items}, indent=2) + "\n"


def embedding_csv(table: EmbeddingTable) -> str:
    return vectors_csv(table.alphabet, [m.labels for m in table.traces], table.vectors)


def vectors_csv(alphabet: Alphabet, traces: Sequence[Sequence[str]], vectors: np.ndarray) -> str:
    header = ["trace", *alphabet.column_names()]
    rows = ([trace_text(t), *map(fmt, v)] for t, v in zip(traces, vectors))
    return csv_text(rows, header)
