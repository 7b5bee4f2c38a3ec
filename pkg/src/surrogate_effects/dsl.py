"""Text format for path diagrams and the JSON covariance document.

Graph files are line oriented::

    # comments run to the end of the line
    observed Z X U W T
    latent Y
    Z -> X : 0.5
    X <-> Y : 0.1

Names must be declared before they are used. A ``: REAL`` annotation on a
directed edge is its path coefficient; on a bidirected edge it is the error
covariance. Covariance documents are JSON objects with ``labels`` and
``matrix`` keys, numbers written with 17 significant digits.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .exceptions import CycleError, GraphError, ParseError
from .gaussian import LabeledCovariance
from .graph import NAME_PATTERN, PathDiagram
from .sem import LinearSEM

_DECL = re.compile(r"(observed|latent)\b")
_EDGE = re.compile(
    r"(?P<a>\S+?)\s*(?P<op><->|->)\s*(?P<b>[^\s:]+)\s*(?::\s*(?P<num>\S+)\s*)?$"
)


@dataclass(frozen=True, eq=False)
class GraphDocument:
    source: str
    diagram: PathDiagram
    coefficients: Dict[Tuple[str, str], float] = field(default_factory=dict)
    bidirected_cov: Dict[Tuple[str, str], float] = field(default_factory=dict)
    edge_lines: Dict[Tuple[str, str], int] = field(default_factory=dict)

    @property
    def has_coefficients(self) -> bool:
        return bool(self.coefficients) or bool(self.bidirected_cov)

    def to_sem(self) -> LinearSEM:
        """Unit-variance SEM from the annotations; all edges must be annotated."""
        g = self.diagram
        missing = sorted(set(g.directed) - set(self.coefficients))
        missing += sorted(set(g.bidirected) - set(self.bidirected_cov))
        if missing:
            a, b = missing[0]
            line = self.edge_lines.get((a, b))
            raise ParseError(
                f"simulation needs every edge annotated; {a}-{b} has no value", line, None
            )
        return LinearSEM.with_unit_variances(g, self.coefficients, self.bidirected_cov)


def _fail(msg, line, col):
    raise ParseError(msg, line, col)


def parse_graph(text: str) -> GraphDocument:
    observed, latent = [], []
    declared = {}
    directed, bidirected = {}, {}
    coefs, bicov = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        decl = _DECL.match(body)
        if decl:
            kind = decl.group(1)
            rest = body[decl.end():]
            if not rest.strip():
                _fail(f"'{kind}' needs at least one name", lineno, indent + 1)
            for m in re.finditer(r"\S+", rest):
                name, col = m.group(), indent + decl.end() + m.start() + 1
                if not NAME_PATTERN.match(name):
                    _fail(f"invalid name {name!r}", lineno, col)
                if name in declared:
                    _fail(f"{name} already declared on line {declared[name]}", lineno, col)
                declared[name] = lineno
                (observed if kind == "observed" else latent).append(name)
            continue
        m = _EDGE.match(body)
        if not m:
            _fail(f"cannot parse {body!r}", lineno, indent + 1)
        a, op, b = m.group("a"), m.group("op"), m.group("b")
        for name, start in ((a, m.start("a")), (b, m.start("b"))):
            col = indent + start + 1
            if not NAME_PATTERN.match(name):
                _fail(f"invalid name {name!r}", lineno, col)
            if name not in declared:
                _fail(f"undeclared name {name}", lineno, col)
        if a == b:
            _fail(f"self-loop on {a}", lineno, indent + 1)
        value = None
        if m.group("num") is not None:
            col = indent + m.start("num") + 1
            try:
                value = float(m.group("num"))
            except ValueError:
                _fail(f"malformed number {m.group('num')!r}", lineno, col)
            if not math.isfinite(value):
                _fail(f"number must be finite, got {m.group('num')!r}", lineno, col)
        if op == "->":
            key = (a, b)
            if key in directed:
                _fail(f"duplicate edge {a} -> {b} (first on line {directed[key]})", lineno, indent + 1)
            directed[key] = lineno
            if value is not None:
                coefs[key] = value
        else:
            key = tuple(sorted((a, b)))
            if key in bidirected:
                _fail(f"duplicate edge {a} <-> {b} (first on line {bidirected[key]})", lineno, indent + 1)
            bidirected[key] = lineno
            if value is not None:
                bicov[key] = value
    try:
        g = PathDiagram(observed, latent, set(directed), set(bidirected))
    except CycleError as exc:
        cyc = exc.cycle
        lines = sorted({directed[(cyc[i], cyc[i + 1])] for i in range(len(cyc) - 1)})
        raise ParseError(
            f"directed edges form a cycle {' -> '.join(cyc)} (lines {', '.join(map(str, lines))})",
            lines[-1],
            None,
        ) from None
    except GraphError as exc:
        raise ParseError(str(exc)) from None
    lines = dict(directed)
    lines.update(bidirected)
    return GraphDocument(text, g, coefs, bicov, lines)


def format_graph(g: PathDiagram, coefficients=None, bidirected_cov=None) -> str:
    coefficients = coefficients or {}
    bidirected_cov = bidirected_cov or {}
    out = []
    if g.observed:
        out.append("observed " + " ".join(sorted(g.observed)))
    if g.latent:
        out.append("latent " + " ".join(sorted(g.latent)))
    for a, b in sorted(g.directed):
        value = coefficients.get((a, b))
        out.append(f"{a} -> {b}" + ("" if value is None else f" : {value!r}"))
    for a, b in sorted(g.bidirected):
        value = bidirected_cov.get((a, b))
        out.append(f"{a} <-> {b}" + ("" if value is None else f" : {value!r}"))
    return "\n".join(out) + "\n"


def format_sem(m: LinearSEM) -> str:
    bicov = {e: m.error_cov[e] for e in m.graph.bidirected}
    return format_graph(m.graph, m.coefficients, bicov)


def load_graph(path) -> GraphDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def _num(v: float) -> str:
    return format(float(v), ".17g")


def dumps_covariance(cov: LabeledCovariance) -> str:
    rows = ",\n    ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in cov.matrix)
    labels = ", ".join(json.dumps(l) for l in cov.labels)
    return '{\n  "labels": [' + labels + '],\n  "matrix": [\n    ' + rows + "\n  ]\n}\n"


def loads_covariance(text: str) -> LabeledCovariance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict) or "labels" not in doc or "matrix" not in doc:
        raise ParseError("covariance document needs 'labels' and 'matrix'")
    labels, matrix = doc["labels"], doc["matrix"]
    if not all(isinstance(l, str) for l in labels) or len(set(labels)) != len(labels):
        raise ParseError("labels must be distinct strings")
    try:
        arr = np.array(matrix, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("matrix must be an array of numeric rows") from None
    if arr.shape != (len(labels), len(labels)):
        raise ParseError(f"matrix shape {arr.shape} does not match {len(labels)} labels")
    try:
        return LabeledCovariance(labels, arr)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_covariance(path) -> LabeledCovariance:
    with open(path, encoding="utf-8") as fh:
        return loads_covariance(fh.read())


def save_covariance(cov: LabeledCovariance, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_covariance(cov))
